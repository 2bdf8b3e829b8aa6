import numpy as np
import pytest

from cfisac import jointopt as jo
from cfisac import kernel as kn
from cfisac.fronthaul import summarize
from cfisac.scenario import ScenarioConfig, build_scenario
from cfisac.channel import gen_comm_channels, sensing_paths


def _rc(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_linearize_g_tangent_and_zero_anchor():
    rng = np.random.default_rng(0)
    h = _rc(rng, 5)
    w0 = _rc(rng, 5)
    gbar = jo.linearize_g(h, w0)
    g0 = abs(np.vdot(h, w0)) ** 2
    assert gbar(w0) == pytest.approx(g0, rel=1e-12)
    zero = jo.linearize_g(h, np.zeros(5))
    for _ in range(5):
        assert zero(_rc(rng, 5)) == pytest.approx(0.0, abs=1e-12)


def test_linearize_g_global_lower_bound():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        h = _rc(rng, 4)
        w0 = _rc(rng, 4)
        w = _rc(rng, 4)
        gbar = jo.linearize_g(h, w0)
        assert gbar(w) <= abs(np.vdot(h, w)) ** 2 + 1e-9


def test_surrogate_f_tangent_and_lower_bound():
    rng = np.random.default_rng(2)
    steer = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    W0 = _rc(rng, (6, 4))
    fbar = jo.surrogate_f(steer, W0)
    f0 = np.sum(np.abs(steer.conj() @ W0) ** 2)
    assert fbar(W0) == pytest.approx(f0, rel=1e-12)
    assert jo.surrogate_f(steer, np.zeros((6, 4)))(W0) == pytest.approx(0.0,
                                                                        abs=1e-12)
    for _ in range(1000):
        W = _rc(rng, (6, 4))
        assert fbar(W) <= np.sum(np.abs(steer.conj() @ W) ** 2) + 1e-9


def test_interference_share_examples():
    rng = np.random.default_rng(3)
    H = _rc(rng, (3, 6))
    assert jo.compute_interference_share(H, np.zeros((6, 4)), 0) == 0.0
    # nulled instance: exact ZF leaves ~zero leakage
    W = np.hstack([np.linalg.pinv(H), np.zeros((6, 1))])
    for u in range(3):
        assert jo.compute_interference_share(H, W, u) <= 1e-6
    # random instance vs naive summation
    W = _rc(rng, (6, 4))
    for u in range(3):
        ref = 0.0
        for i in range(4):
            if i != u:
                ref += abs(np.vdot(np.conj(H[u]), W[:, i])) ** 2
        assert jo.compute_interference_share(H, W, u) \
            == pytest.approx(np.sqrt(ref), rel=1e-12)


def test_global_step_examples():
    gamma, psi = jo.global_step({0: 1.0, 1: 2.0, 2: 3.0}, {0: 0.0, 1: 0.0, 2: 0.0},
                                {a: np.zeros(2) for a in range(3)},
                                [0, 1, 2], divisor=3)
    assert gamma == pytest.approx(2.0)
    assert np.allclose(psi, 0.0)
    g2, _ = jo.global_step({0: 2.0, 1: 2.0}, {0: 0.5, 1: -0.5},
                           {a: np.zeros(1) for a in range(2)}, [0, 1], divisor=2)
    assert g2 == pytest.approx(2.0)


def test_global_step_missing_report_raises():
    with pytest.raises(ValueError, match="AP 1"):
        jo.global_step({0: 1.0}, {0: 0.0}, {0: np.zeros(2)}, [0, 1], divisor=2)


def test_global_step_psi_aggregation_exact():
    rng = np.random.default_rng(4)
    shares = {a: rng.uniform(0, 1, 4) for a in range(3)}
    _, psi = jo.global_step({a: 1.0 for a in range(3)}, {a: 0.0 for a in range(3)},
                            shares, [0, 1, 2], divisor=3)
    assert np.allclose(psi, shares[0] + shares[1] + shares[2], atol=1e-12)


def test_dual_and_penalty_updates():
    nu, xi = jo.dual_and_penalty_update(0.1, 2.0, 2.0, 5.0, 2.0, 100.0, 1)
    assert nu == pytest.approx(0.1)
    nu, xi = jo.dual_and_penalty_update(0.0, 0.0, 0.0, 1.0, 2.0, 100.0, 1)
    assert xi == pytest.approx(3.0)
    nu, xi = jo.dual_and_penalty_update(0.0, 0.0, 0.0, 99.0, 10.0, 100.0, 5)
    assert xi == pytest.approx(100.0)


def _local_inputs(rng, M=4, n_ue=1, lam=1.0, gamma_center=1e3):
    from types import SimpleNamespace
    h = _rc(rng, M)
    H = np.conj(h)[None, :]
    steer = np.exp(1j * rng.uniform(0, 2 * np.pi, M))
    anchor = np.hstack([(h / np.linalg.norm(h))[:, None],
                        (steer / np.sqrt(M))[:, None]])
    return h, H, steer, anchor


def test_local_step_lambda_one_hits_power_boundary():
    # only the floor pays: the beam gain is pushed to the power boundary
    rng = np.random.default_rng(5)
    cfg = ScenarioConfig(ue_count=1, antennas_per_ap=4, p_max_watts=4.0)
    params = cfg.solver.admm
    params.lambda_tradeoff = 1.0
    h, H, steer, anchor = _local_inputs(rng)
    from cfisac.channel import ChannelSet
    channels = ChannelSet(H={0: H}, path_loss={0: None})
    spec = jo.build_local_spec(
        0, channels, steer, 0.5, np.sqrt(2.0) * anchor, gamma_prev=1e5,
        psi_prev=np.zeros(1), dual_prev=0.0, xi_prev=1e3,
        eta_a=np.array([0.5]), psi_own_prev=np.array([1.0]), n_tx=1,
        params=params, config=cfg, iteration=1)
    spec.trust_radius_sq = 1e3             # wide open for the corner check
    sol = kn.solve(spec)
    assert np.linalg.norm(sol.W, "fro") ** 2 == pytest.approx(4.0, rel=1e-4)


def test_local_step_lambda_zero_aligns_with_steering():
    rng = np.random.default_rng(6)
    cfg = ScenarioConfig(ue_count=1, antennas_per_ap=4, p_max_watts=4.0)
    params = cfg.solver.admm
    params.lambda_tradeoff = 0.0
    h, H, steer, anchor = _local_inputs(rng)
    from cfisac.channel import ChannelSet
    channels = ChannelSet(H={0: H}, path_loss={0: None})
    spec = jo.build_local_spec(
        0, channels, steer, 0.5, np.sqrt(2.0) * anchor, gamma_prev=0.0,
        psi_prev=np.zeros(1), dual_prev=0.0, xi_prev=1e3,
        eta_a=np.array([0.5]), psi_own_prev=np.array([10.0]), n_tx=1,
        params=params, config=cfg, iteration=1)
    spec.trust_radius_sq = 1e3
    sol = kn.solve(spec)
    for j in range(sol.W.shape[1]):
        col = sol.W[:, j]
        cosine = abs(np.vdot(steer, col)) / (np.linalg.norm(steer)
                                             * np.linalg.norm(col))
        assert cosine >= 0.99


def test_local_spec_agrees_with_reference_oracle():
    # jointopt-shaped spec (beam rows + floor + slacks) against the
    # independent first-order solver
    from oracles import reference_subproblem_solve
    rng = np.random.default_rng(7)
    h1, h2 = _rc(rng, 3), _rc(rng, 3)
    rows = [kn.AffineRow(col=0, v=jo.linearize_g(h1, _rc(rng, 3)).v,
                         coef_gamma=-0.4, slack=0, const=-0.5),
            kn.AffineRow(col=1, v=jo.linearize_g(h2, _rc(rng, 3)).v,
                         coef_gamma=-0.7, slack=1, const=-0.2)]
    spec = kn.SubproblemSpec(w_shape=(3, 2), w_lin=0.5 * _rc(rng, (3, 2)),
                             p_gamma=0.6, q_gamma=1.0, gamma_center=2.0,
                             slack_penalty=50.0, rows=rows, n_slacks=2,
                             ball_radius_sq=2.0)
    sol = kn.solve(spec)
    _, _, _, obj_ref = reference_subproblem_solve(spec)
    assert abs(sol.objective - obj_ref) <= 1e-5 * max(1.0, abs(obj_ref))


def test_responsibility_weights_policies(small_setup):
    cfg, geo, ch, paths = small_setup
    eq = jo.responsibility_weights("equal", ch.tx_aps, ch, cfg.ap_count)
    for a in ch.tx_aps:
        assert np.allclose(eq[a], 1.0 / cfg.ap_count)
    gain = jo.responsibility_weights("gain", ch.tx_aps, ch, cfg.ap_count)
    total = sum(gain[a] for a in ch.tx_aps)
    assert np.allclose(total, 1.0)
    with pytest.raises(ValueError):
        jo.responsibility_weights("nope", ch.tx_aps, ch, cfg.ap_count)


def test_run_jointopt_converges_and_accounts(small_setup):
    cfg, geo, ch, paths = small_setup
    beams, state, link, ledger = jo.run_jointopt(cfg, geo, ch, paths=paths)
    assert state.converged
    assert state.trace[-1]["max_residual"] < cfg.solver.admm.conv_tol
    for a in beams.tx_aps:
        assert beams.total_power(a) <= cfg.p_max_watts * (1 + 1e-6)
    n_ue = cfg.ue_count
    # downlink: 1 + N_ue scalars per AP per iteration (plus the bootstrap)
    table = summarize(ledger)["jointopt"]
    for a in ch.tx_aps:
        assert table[a] == (1 + n_ue) * state.t
    # uplink carries the shares plus the consensus report
    up = [m for m in ledger.messages
          if m.phase == "admm_uplink" and m.iteration >= 1]
    assert all(m.scalar_count == n_ue + 1 for m in up)
    # psi aggregation is exact at the last iterate
    agg = sum(state.psi_au[a] for a in ch.tx_aps)
    assert np.allclose(agg, state.psi, atol=1e-12)


def test_run_jointopt_deterministic(small_setup):
    cfg, geo, ch, paths = small_setup
    _, s1, l1, _ = jo.run_jointopt(cfg, geo, ch, paths=paths)
    _, s2, l2, _ = jo.run_jointopt(cfg, geo, ch, paths=paths)
    assert s1.t == s2.t
    assert np.array_equal(l1.sinr, l2.sinr)
    for r1, r2 in zip(s1.trace, s2.trace):
        assert r1["gamma"] == r2["gamma"]
        assert r1["max_residual"] == r2["max_residual"]


def test_run_jointopt_flags_non_convergence(small_setup):
    import dataclasses
    cfg, geo, ch, paths = small_setup
    cfg = dataclasses.replace(cfg)
    cfg.solver = dataclasses.replace(cfg.solver)
    cfg.solver.admm = dataclasses.replace(cfg.solver.admm, max_iters=1)
    beams, state, link, ledger = jo.run_jointopt(cfg, geo, ch, paths=paths)
    assert not state.converged
    assert state.t == 1
