"""Fixed local beamformers: weighted RZF for users, null-space conjugate for sensing."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class BeamformerSet:
    """Per transmit-AP beamforming matrices W[a] = [comm columns | sensing columns]."""
    W: dict                       # tx-AP index -> (M, N_ue + N_s) complex
    n_ue: int
    n_sens: int
    raw_comm: dict = field(default_factory=dict)    # pre-normalization matrices
    raw_sens: dict = field(default_factory=dict)

    def comm(self, a):
        return self.W[a][:, :self.n_ue]

    def sens(self, a):
        return self.W[a][:, self.n_ue:]

    @property
    def tx_aps(self):
        return sorted(self.W)

    def total_power(self, a):
        return float(np.linalg.norm(self.W[a], "fro") ** 2)


def compute_weights(metrics):
    """Sum-normalized channel-quality weights alpha_a = M(a) / sum M(a')."""
    m = np.asarray(metrics, dtype=float)
    total = m.sum()
    if total <= 0:
        raise ValueError("all channel metrics are zero: no usable channel")
    return m / total


def lm_rzf(H_a, C_a, reg):
    """Regularized zero-forcing solve of H_a W = C_a.

    Returns (H^H H + reg I)^(-1) H^H C_a. At reg = 0 a singular Gram matrix
    falls back to the minimum-norm (pseudo-inverse) solution when the system
    is consistent; an inconsistent singular system needs a regularizer.
    """
    H_a = np.asarray(H_a)
    C_a = np.atleast_2d(np.asarray(C_a))
    rhs = H_a.conj().T @ C_a
    gram = H_a.conj().T @ H_a + reg * np.eye(H_a.shape[1])
    if reg > 0:
        return np.linalg.solve(gram, rhs)
    W = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    resid = np.linalg.norm(H_a @ W - C_a)
    if resid > 1e-9 * max(1.0, np.linalg.norm(C_a)):
        raise ValueError("singular RZF system cannot reach the target: "
                         "use a regularizer > 0")
    return W


def normalize_power(W_raw, power_budget):
    """Scale W to Frobenius power exactly `power_budget`. Zero budget gives zeros."""
    if power_budget < 0:
        raise ValueError("power budget must be nonnegative")
    norm = np.linalg.norm(W_raw, "fro")
    if norm == 0:
        raise ValueError("cannot power-normalize an all-zero matrix")
    return np.sqrt(power_budget) * np.asarray(W_raw) / norm


def null_projection(H_a, reg):
    """Projector onto the (regularized) null space of the user channels.

    P = I - H^H (H H^H + reg I)^(-1) H. An empty H gives the identity.
    """
    H_a = np.asarray(H_a)
    if H_a.size == 0:
        m = H_a.shape[1] if H_a.ndim == 2 else 0
        return np.eye(m, dtype=complex)
    M = H_a.shape[1]
    gram = H_a @ H_a.conj().T + reg * np.eye(H_a.shape[0])
    try:
        return np.eye(M, dtype=complex) - H_a.conj().T @ np.linalg.solve(gram, H_a)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular projection system: use a regularizer > 0") from exc


def nsc_beamformer(P_perp, steer, n_sens, power_budget):
    """Null-space conjugate sensing beams: n_sens copies of P_perp @ steer.

    The projected beam is power-normalized to the sensing budget; a steering
    vector that lies (numerically) inside the user-channel row space cannot
    be served.
    """
    beam = np.asarray(P_perp) @ np.asarray(steer)
    if np.linalg.norm(beam) <= 1e-6 * np.linalg.norm(steer):
        raise ValueError("sensing direction unservable: steering vector lies "
                         "in the user-channel row space")
    raw = np.tile(beam[:, None], (1, n_sens))
    if power_budget == 0:
        return np.zeros_like(raw), raw
    return normalize_power(raw, power_budget), raw


def effective_coupling(H_by_ap, W_by_ap):
    """Network coupling matrix C = sum_a H_a W_a (users x streams)."""
    C = None
    for a in sorted(H_by_ap):
        H_a = np.asarray(H_by_ap[a])
        W_a = np.asarray(W_by_ap[a])
        if H_a.shape[1] != W_a.shape[0]:
            raise ValueError(f"dimension mismatch at AP {a}: "
                             f"H is {H_a.shape}, W is {W_a.shape}")
        term = H_a @ W_a
        C = term if C is None else C + term
    return C


def default_rzf_reg(H_a, scale):
    """Scale-invariant RZF regularizer: scale * trace(H^H H) / M."""
    H_a = np.asarray(H_a)
    return scale * float(np.real(np.vdot(H_a, H_a))) / H_a.shape[1]


def default_proj_reg(H_a, scale):
    """Scale-invariant projection regularizer: scale * trace(H H^H) / N_ue."""
    H_a = np.asarray(H_a)
    n_rows = max(1, H_a.shape[0])
    return scale * float(np.real(np.vdot(H_a, H_a))) / n_rows
