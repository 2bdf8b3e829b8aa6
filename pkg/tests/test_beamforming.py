import numpy as np
import pytest

from cfisac import beamforming as bf


def _random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_compute_weights_examples():
    assert np.allclose(bf.compute_weights([1, 1, 1]), [1 / 3] * 3)
    assert np.allclose(bf.compute_weights([0.5, 0.0]), [1.0, 0.0])
    assert np.allclose(bf.compute_weights([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
    with pytest.raises(ValueError):
        bf.compute_weights([0.0, 0.0])


def test_lm_rzf_rank_one_closed_form():
    h = np.array([2.0, 0.0], dtype=complex)          # ||h|| = 2
    H = h.conj()[None, :]
    w = bf.lm_rzf(H, np.array([[1.0]]), 0.0)
    assert np.allclose(w[:, 0], h / 4.0)


def test_lm_rzf_orthonormal_rows_gives_scaled_adjoint():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(_random_complex(rng, (6, 6)))
    H = q[:3]
    W = bf.lm_rzf(H, 0.7 * np.eye(3), 0.0)
    assert np.allclose(W, 0.7 * H.conj().T, atol=1e-12)


def test_lm_rzf_residual_matches_normal_equations_oracle():
    rng = np.random.default_rng(11)
    H = _random_complex(rng, (4, 8))
    C = _random_complex(rng, (4, 4))
    reg = 0.1
    W = bf.lm_rzf(H, C, reg)
    # independent oracle: direct normal-equations solve per column
    gram = H.conj().T @ H + reg * np.eye(8)
    W_ref = np.column_stack([np.linalg.solve(gram, H.conj().T @ C[:, j])
                             for j in range(4)])
    assert np.linalg.norm(H @ W - C - (H @ W_ref - C)) <= 1e-8
    assert np.allclose(W, W_ref, atol=1e-10)


def test_normalize_power_examples():
    rng = np.random.default_rng(0)
    W = _random_complex(rng, (5, 3))
    out = bf.normalize_power(W, 4.0)
    assert np.linalg.norm(out, "fro") ** 2 == pytest.approx(4.0, rel=1e-12)
    assert np.allclose(bf.normalize_power(W, 0.0), 0.0)
    unit = W / np.linalg.norm(W, "fro")
    assert np.allclose(bf.normalize_power(unit, 1.0), unit)
    with pytest.raises(ValueError):
        bf.normalize_power(np.zeros((2, 2)), 1.0)


def test_null_projection_empty_channel_is_identity():
    P = bf.null_projection(np.zeros((0, 5)), 0.0)
    assert np.allclose(P, np.eye(5))


def test_null_projection_projector_identities():
    rng = np.random.default_rng(5)
    H = _random_complex(rng, (3, 8))                  # full row rank a.s.
    P = bf.null_projection(H, 0.0)
    assert np.linalg.norm(H @ P) <= 1e-9 * np.linalg.norm(H)
    assert np.linalg.norm(P @ P - P) <= 1e-9
    assert np.linalg.norm(P - P.conj().T) <= 1e-9


def test_null_projection_square_invertible_is_zero():
    rng = np.random.default_rng(6)
    H = _random_complex(rng, (4, 4))
    P = bf.null_projection(H, 0.0)
    assert np.linalg.norm(P) <= 1e-9


def test_nsc_empty_channel_returns_conjugate_beam():
    steer = np.exp(1j * np.linspace(0, 1, 6))
    P = bf.null_projection(np.zeros((0, 6)), 0.0)
    W, raw = bf.nsc_beamformer(P, steer, 1, 1.0)
    assert np.allclose(raw[:, 0], steer)


def test_nsc_orthogonal_steering_passes_through():
    H = np.zeros((1, 4), dtype=complex)
    H[0, 0] = 1.0
    steer = np.array([0, 1, 1, 1], dtype=complex)
    P = bf.null_projection(H, 0.0)
    _, raw = bf.nsc_beamformer(P, steer, 1, 1.0)
    assert np.allclose(raw[:, 0], steer, atol=1e-12)


def test_nsc_leakage_bound():
    rng = np.random.default_rng(8)
    for _ in range(5):
        H = _random_complex(rng, (4, 10))
        steer = np.exp(1j * rng.uniform(0, 2 * np.pi, 10))
        P = bf.null_projection(H, 1e-8)
        W, _ = bf.nsc_beamformer(P, steer, 1, 2.0)
        smax = np.linalg.svd(H, compute_uv=False)[0]
        leak = np.linalg.norm(H @ W[:, 0]) / np.linalg.norm(W[:, 0])
        assert leak <= 1e-4 * smax


def test_nsc_unservable_direction_raises():
    H = np.eye(3, dtype=complex)                      # rows span everything
    P = bf.null_projection(H, 0.0)
    with pytest.raises(ValueError, match="unservable"):
        bf.nsc_beamformer(P, np.array([1.0, 1j, -1.0]), 1, 1.0)


def test_effective_coupling_ideal_zf():
    rng = np.random.default_rng(9)
    n_ue, M, n_aps = 4, 8, 3
    alphas = bf.compute_weights([0.2, 0.5, 0.3])
    H, W = {}, {}
    for a in range(n_aps):
        H[a] = _random_complex(rng, (n_ue, M))
        comm = bf.lm_rzf(H[a], alphas[a] * np.eye(n_ue), 0.0)
        proj = bf.null_projection(H[a], 0.0)
        steer = np.exp(1j * rng.uniform(0, 2 * np.pi, M))
        _, sens = bf.nsc_beamformer(proj, steer, 1, 1.0)
        W[a] = np.hstack([comm, sens])
    C = bf.effective_coupling(H, W)
    assert np.allclose(C[:, :n_ue], np.eye(n_ue), atol=1e-6)
    assert np.linalg.norm(C[:, n_ue:]) <= 1e-6


def test_effective_coupling_zero_and_mismatch():
    H = {0: np.ones((2, 3), dtype=complex)}
    assert np.allclose(bf.effective_coupling(H, {0: np.zeros((3, 2))}), 0.0)
    with pytest.raises(ValueError, match="dimension mismatch"):
        bf.effective_coupling(H, {0: np.zeros((4, 2))})


def test_effective_coupling_matches_naive_accumulation():
    rng = np.random.default_rng(10)
    H = {a: _random_complex(rng, (3, 5)) for a in range(2)}
    W = {a: _random_complex(rng, (5, 4)) for a in range(2)}
    C = bf.effective_coupling(H, W)
    ref = np.zeros((3, 4), dtype=complex)
    for a in range(2):
        for u in range(3):
            for i in range(4):
                for m in range(5):
                    ref[u, i] += H[a][u, m] * W[a][m, i]
    assert np.allclose(C, ref, atol=1e-12)


def test_power_split_budgets_exact():
    rng = np.random.default_rng(12)
    from cfisac.splitopt import assemble
    raw_c = _random_complex(rng, (8, 4))
    raw_s = _random_complex(rng, (8, 1))
    for rho in (0.0, 0.3, 1.0):
        W, n_ue, n_s = assemble(raw_c, raw_s, rho, 10.0)
        pc = np.linalg.norm(W[:, :4], "fro") ** 2
        ps = np.linalg.norm(W[:, 4:], "fro") ** 2
        assert pc == pytest.approx(rho * 10.0, rel=1e-9, abs=1e-12)
        assert ps == pytest.approx((1 - rho) * 10.0, rel=1e-9, abs=1e-12)


def test_rzf_interference_suppression_property():
    # with M >= N_ue + N_s and a tiny regularizer, MUI+S2CI sits >= 40 dB
    # below the desired-signal power
    from cfisac.metrics import sinr_decomposition
    rng = np.random.default_rng(13)
    for trial in range(5):
        n_ue, M = 4, 8
        H = {0: _random_complex(rng, (n_ue, M))}
        comm = bf.lm_rzf(H[0], np.eye(n_ue), 1e-6)
        proj = bf.null_projection(H[0], 1e-8)
        steer = np.exp(1j * rng.uniform(0, 2 * np.pi, M))
        _, sens = bf.nsc_beamformer(proj, steer, 1, 1.0)
        W = {0: np.hstack([bf.normalize_power(comm, 0.5),
                           bf.normalize_power(sens, 0.5)])}
        cds, mui, s2ci, _ = sinr_decomposition(H, W, n_ue, 1.0)
        ratio = (mui + s2ci) / cds
        assert np.all(ratio <= 1e-4)          # >= 40 dB below
