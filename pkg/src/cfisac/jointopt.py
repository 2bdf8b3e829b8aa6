"""Consensus-ADMM joint beamforming and power design over the fronthaul bus."""

from dataclasses import dataclass, field

import numpy as np

from . import kernel as kn
from . import metrics as mt
from .beamforming import BeamformerSet
from .channel import sensing_paths
from .fronthaul import Bus
from .scenario import AdmmParams  # noqa: F401  (re-export, params live with the config)


# ---------------------------------------------------------------------------
# First-order surrogates. Both underlying functions are convex quadratics of
# the beams, so their tangent planes are global under-estimators.
# ---------------------------------------------------------------------------

@dataclass
class GBar:
    """Tangent of g(w) = |h^H w|^2 at an anchor: 2 Re{v^H w} + const."""
    v: np.ndarray
    const: float

    def __call__(self, w):
        return 2.0 * float(np.real(np.vdot(self.v, w))) + self.const


@dataclass
class FBar:
    """Tangent of f(W) = ||a^H W||^2 at an anchor: 2 Re tr(G^H W) + const."""
    G: np.ndarray
    const: float

    def __call__(self, W):
        return 2.0 * float(np.real(np.vdot(self.G, W))) + self.const


def linearize_g(h, w_anchor):
    beta = complex(np.vdot(h, w_anchor))          # h^H w_anchor
    return GBar(v=beta * np.asarray(h), const=-abs(beta) ** 2)


def surrogate_f(steer, W_anchor):
    tau = np.conj(steer) @ np.asarray(W_anchor)   # a^H W_anchor, row over columns
    return FBar(G=np.outer(steer, tau), const=-float(np.sum(np.abs(tau) ** 2)))


def compute_interference_share(H_a, W_a, u):
    """psi_au: root power AP a leaks onto user u from every other stream."""
    row = np.asarray(H_a)[u] @ np.asarray(W_a)
    p = np.abs(row) ** 2
    return float(np.sqrt(p.sum() - p[u]))


# ---------------------------------------------------------------------------
# ADMM state and steps
# ---------------------------------------------------------------------------

@dataclass
class AdmmState:
    t: int
    gamma: float
    gamma_local: dict
    duals: dict
    psi_au: dict                  # ap -> (N_ue,) shares
    psi: np.ndarray               # aggregated (N_ue,)
    xi: float
    W: dict
    slacks: dict
    converged: bool = False
    trace: list = field(default_factory=list)

    @property
    def iterations(self):
        return self.t


def responsibility_weights(policy, tx_aps, channels, n_ap):
    """eta_au per (AP, UE): equal shares or channel-gain-proportional."""
    n_ue = next(iter(channels.H.values())).shape[0]
    if policy == "equal":
        return {a: np.full(n_ue, 1.0 / n_ap) for a in tx_aps}
    if policy == "gain":
        gains = {a: np.sum(np.abs(channels.H[a]) ** 2, axis=1) for a in tx_aps}
        total = sum(gains.values())
        return {a: gains[a] / total for a in tx_aps}
    raise ValueError(f"unknown responsibility policy {policy!r}")


def initial_beams(config, channels, steer_by_ap):
    """Power-feasible interference-aware anchor.

    User columns come from a regularized ZF solve, sensing columns from the
    null-space-projected steering beam (plain conjugate beam when the user
    channels leave no null space). Starting from low leakage matters: a
    matched-filter start certifies a tiny SINR floor and lets the sensing
    term capture the whole power budget.
    """
    from . import beamforming as bf
    D = config.n_streams
    rho0 = config.ue_count / D
    W = {}
    for a in channels.tx_aps:
        H_a = channels.H[a]
        raw_comm = bf.lm_rzf(H_a, np.eye(config.ue_count),
                             bf.default_rzf_reg(H_a, 1e-6))
        proj = bf.null_projection(H_a, bf.default_proj_reg(H_a, 1e-8))
        beam = proj @ steer_by_ap[a]
        if np.linalg.norm(beam) <= 1e-6 * np.linalg.norm(steer_by_ap[a]):
            beam = steer_by_ap[a]
        sens = np.tile(beam[:, None], (1, config.sensing_streams))
        W[a] = np.hstack([
            bf.normalize_power(raw_comm, rho0 * config.p_max_watts),
            bf.normalize_power(sens, (1.0 - rho0) * config.p_max_watts),
        ])
    return W


def build_local_spec(a, channels, steer, zeta_sq, anchor_W, gamma_prev, psi_prev,
                     dual_prev, xi_prev, eta_a, psi_own_prev, n_tx, params, config,
                     iteration=1, penalty=None):
    """Assemble the per-AP convex subproblem around the previous iterate."""
    lam = params.lambda_tradeoff
    kappa = zeta_sq if params.include_rcs_in_local_objective else 1.0
    fbar = surrogate_f(steer, anchor_W)
    sigma_z = np.sqrt(config.noise_var)
    D = anchor_W.shape[1]
    rows = []
    leaks = []
    for u in range(config.ue_count):
        gbar = linearize_g(channels.h(a, u), anchor_W[:, u])
        rows.append(kn.AffineRow(
            col=u, v=gbar.v,
            coef_gamma=-eta_a[u] * (psi_prev[u] + sigma_z) ** 2,
            slack=u, const=gbar.const))
        grow = params.leak_growth_frac * params.leak_growth_decay ** (iteration - 1)
        allowed = psi_own_prev[u] + grow * max(sigma_z / n_tx, psi_own_prev[u])
        h_u = channels.h(a, u)
        # scale terms by the bound so the barrier sees a unit-bound row
        leaks.append(kn.QuadRow(
            terms=[(i, h_u / allowed) for i in range(D) if i != u], bound=1.0))
    return kn.SubproblemSpec(
        w_shape=anchor_W.shape,
        w_lin=2.0 * (1.0 - lam) * kappa * fbar.G,
        p_gamma=lam, q_gamma=params.penalty if penalty is None else penalty,
        gamma_center=gamma_prev - dual_prev,
        slack_penalty=xi_prev, rows=rows,
        n_slacks=config.ue_count,
        ball_radius_sq=config.p_max_watts,
        quad_rows=leaks,
        trust_center=anchor_W,
        trust_radius_sq=max(
            params.trust_region_frac * params.trust_region_decay ** (iteration - 1),
            1e-9) * config.p_max_watts)


def _warm_point(spec, W, gamma):
    """Strictly feasible warm start near (W, gamma).

    Margins are generous on purpose: a point hugging the constraint
    boundaries makes the barrier solve crawl. The shrink toward the origin
    must stay inside the trust region when one is present.
    """
    nrm = np.linalg.norm(W, "fro")
    shrink = 0.01
    if spec.trust_center is not None and nrm > 0:
        shrink = min(shrink, 0.3 * np.sqrt(spec.trust_radius_sq) / nrm)
    W = W * (1.0 - shrink)
    gamma = 0.98 * gamma
    slacks = np.empty(spec.n_slacks)
    for row in spec.rows:
        val = spec.row_value(row, W, gamma, np.zeros(spec.n_slacks))
        margin = 1e-2 * max(1.0, abs(row.const))
        if row.slack is not None:
            slacks[row.slack] = max(margin, margin - val)
    return W, gamma, slacks


def local_step(a, channels, steer, zeta_sq, state, params, config, eta_a, n_tx,
               penalty=None):
    """One AP update: solve the surrogate QCQP, report fresh interference shares."""
    spec = build_local_spec(a, channels, steer, zeta_sq, state.W[a], state.gamma,
                            state.psi, state.duals[a], state.xi, eta_a,
                            psi_own_prev=state.psi_au[a], n_tx=n_tx,
                            config=config, params=params, iteration=state.t + 1,
                            penalty=penalty)
    sol = kn.solve(spec, warm_start=_warm_point(spec, state.W[a], state.gamma_local[a]))
    psi_au = np.array([compute_interference_share(channels.H[a], sol.W, u)
                       for u in range(config.ue_count)])
    return sol.W, sol.gamma, sol.slacks, psi_au, sol.status, sol.iterations


def global_step(gamma_locals, duals_prev, psi_by_ap, tx_aps, divisor):
    """Floor and interference aggregation, exactly as the update rules state."""
    for a in tx_aps:
        if a not in gamma_locals:
            raise ValueError(f"missing local floor report from AP {a}")
        if a not in psi_by_ap:
            raise ValueError(f"missing interference report from AP {a}")
    gamma = sum(gamma_locals[a] + duals_prev[a] for a in tx_aps) / divisor
    psi = np.sum([psi_by_ap[a] for a in tx_aps], axis=0)
    return float(gamma), psi


def dual_and_penalty_update(dual_prev, gamma_local, gamma, xi_prev, step, xi_max, t):
    nu = dual_prev + (gamma_local - gamma)
    xi = min(xi_max, xi_prev + step * t)
    return nu, xi


def run_jointopt(config, geometry, channels, params=None, *, paths=None, bus=None):
    """Full consensus loop; returns (beams, state-with-trace, metrics, ledger)."""
    params = params or config.solver.admm
    bus = bus or Bus()
    paths = paths if paths is not None else sensing_paths(geometry, config)
    tx_aps = channels.tx_aps
    n_ue = config.ue_count
    steer = {p.tx_ap: p.tx_steering for p in paths}
    zeta_sq = {p.tx_ap: p.gain_std ** 2 for p in paths}
    eta = responsibility_weights(params.responsibility, tx_aps, channels,
                                 config.ap_count)
    divisor = len(tx_aps) if params.divide_by_tx_count else config.ap_count
    sigma_z = np.sqrt(config.noise_var)

    # bootstrap: anchors, initial shares, informed initial floor
    W = initial_beams(config, channels, steer)
    psi_au = {}
    gain0 = {}
    for a in tx_aps:
        psi_au[a] = np.array([compute_interference_share(channels.H[a], W[a], u)
                              for u in range(n_ue)])
        row = np.abs(channels.H[a] @ W[a]) ** 2
        gain0[a] = row[np.arange(n_ue), np.arange(n_ue)]
        bus.send("ap_to_cs", "admm_uplink", a, ("real", 2 * n_ue),
                 payload=(psi_au[a], gain0[a]), iteration=0)
    psi = np.sum([psi_au[a] for a in tx_aps], axis=0)
    # the consensus fixed point sits between the weakest AP's certificate and
    # the mean certificate (duals bridge part of the per-AP gaps); starting at
    # the blend keeps both the vertex-capped ascent and the ceiling descent
    # short
    cert = [min(gain0[a][u] / (eta[a][u] * (psi[u] + sigma_z) ** 2)
                for u in range(n_ue)) for a in tx_aps]
    gamma0 = 0.5 * (min(cert) + float(np.mean(cert)))
    for a in tx_aps:
        bus.send("cs_to_ap", "admm_downlink", a, ("real", 1 + n_ue),
                 payload=(gamma0, psi), iteration=0)

    state = AdmmState(t=0, gamma=float(gamma0),
                      gamma_local={a: float(gamma0) for a in tx_aps},
                      duals={a: 0.0 for a in tx_aps},
                      psi_au=psi_au, psi=psi,
                      xi=params.slack_penalty_init, W=W,
                      slacks={a: np.zeros(n_ue) for a in tx_aps})

    rho = params.penalty
    gamma_hist = gamma0
    for t in range(1, params.max_iters + 1):
        new_W, new_psi_au, statuses, iters = {}, {}, {}, {}
        reports = {}
        for a in tx_aps:          # ascending order keeps reductions deterministic
            Wa, ga, eps_a, shares, status, its = local_step(
                a, channels, steer[a], zeta_sq[a], state, params, config, eta[a],
                n_tx=len(tx_aps), penalty=rho)
            new_W[a] = Wa
            new_psi_au[a] = shares
            state.gamma_local[a] = ga
            state.slacks[a] = eps_a
            statuses[a] = status
            iters[a] = its
            reports[a] = ga + state.duals[a]
            bus.send("ap_to_cs", "admm_uplink", a, ("real", n_ue + 1),
                     payload=(shares, reports[a]), iteration=t)

        psi_prev = state.psi
        gamma, psi = global_step(state.gamma_local, state.duals, new_psi_au,
                                 tx_aps, divisor)
        for a in tx_aps:
            bus.send("cs_to_ap", "admm_downlink", a, ("real", 1 + n_ue),
                     payload=(gamma, psi), iteration=t)

        xi_next = state.xi
        for a in tx_aps:
            state.duals[a], xi_next = dual_and_penalty_update(
                state.duals[a], state.gamma_local[a], gamma,
                state.xi, params.slack_penalty_step, params.slack_penalty_max, t)
        state.xi = xi_next

        state.W = new_W
        state.psi_au = new_psi_au
        state.psi = psi
        state.gamma = gamma
        state.t = t

        resid = max(abs(state.gamma_local[a] - gamma) for a in tx_aps)
        # consensus alone can fire on the very first pass (all local floors
        # start from the same broadcast); demand a settled interference
        # vector as well before declaring convergence
        psi_resid = float(np.max(np.abs(psi - psi_prev))) / max(1.0, float(np.max(psi)))
        if params.adaptive_penalty:
            drift = rho * abs(gamma - gamma_hist)
            rho_new = rho
            if resid > 10.0 * drift:
                rho_new = min(2.0 * rho, params.penalty_max)
            elif drift > 10.0 * resid:
                rho_new = max(0.5 * rho, params.penalty_min)
            if rho_new != rho:
                scale = rho / rho_new
                for a in tx_aps:
                    state.duals[a] *= scale
                rho = rho_new
        gamma_hist = gamma
        cds, mui, s2ci, nz = mt.sinr_decomposition(channels.H, state.W, n_ue,
                                                   config.noise_var)
        sinr = cds / (mui + s2ci + nz)
        rx = min(p.rx_ap for p in paths)
        snr = mt.sensing_snr(rx, state.W, paths, config.noise_var,
                             config.antennas_per_ap)
        state.trace.append({
            "t": t, "gamma": gamma, "max_residual": resid,
            "psi_residual": psi_resid,
            "min_sinr": float(sinr.min()), "sens_snr": snr, "xi": state.xi,
            "penalty": rho,
            "solver_iters": dict(iters), "statuses": dict(statuses),
        })
        if resid < params.conv_tol and psi_resid < params.conv_tol:
            state.converged = True
            break

    beams = BeamformerSet(W=state.W, n_ue=n_ue, n_sens=config.sensing_streams)
    link = mt.evaluate(channels, beams, paths, config)
    return beams, state, link, bus.ledger
