"""Centralized joint design: successive convex rounds with global channel state."""

from dataclasses import dataclass, field

import numpy as np

from . import metrics as mt
from .beamforming import BeamformerSet
from .channel import sensing_paths
from .jointopt import initial_beams, surrogate_f
from .kernel import KernelParams, QcqpProblem, QuadConstraint, solve_qcqp


@dataclass
class _Layout:
    """Real embedding of several complex beam blocks plus floor and slacks."""
    aps: list
    M: int
    D: int
    n_slacks: int
    offsets: dict = field(default_factory=dict)

    def __post_init__(self):
        off = 0
        for a in self.aps:
            self.offsets[a] = off
            off += 2 * self.M * self.D
        self.gamma_idx = off
        self.slack0 = off + 1
        self.dim = off + 1 + self.n_slacks

    def pack(self, W_by_ap, gamma, slacks):
        x = np.zeros(self.dim)
        nw = self.M * self.D
        for a in self.aps:
            off = self.offsets[a]
            x[off:off + nw] = np.real(W_by_ap[a]).ravel(order="F")
            x[off + nw:off + 2 * nw] = np.imag(W_by_ap[a]).ravel(order="F")
        x[self.gamma_idx] = gamma
        x[self.slack0:] = slacks
        return x

    def unpack(self, x):
        nw = self.M * self.D
        W = {}
        for a in self.aps:
            off = self.offsets[a]
            W[a] = (x[off:off + nw] + 1j * x[off + nw:off + 2 * nw]).reshape(
                (self.M, self.D), order="F")
        return W, float(x[self.gamma_idx]), x[self.slack0:].copy()

    def embed_col(self, a, col, v):
        """Real row vector for the complex scalar v^H w_{a,col}: (re, im) parts."""
        nw = self.M * self.D
        off = self.offsets[a] + col * self.M
        re = np.zeros(self.dim)
        im = np.zeros(self.dim)
        re[off:off + self.M] = np.real(v)
        re[off + nw:off + nw + self.M] = np.imag(v)
        im[off:off + self.M] = -np.imag(v)
        im[off + nw:off + nw + self.M] = np.real(v)
        return re, im


def _true_objective(channels, W, paths, lam, zeta_sq, config):
    cds, mui, s2ci, nz = mt.sinr_decomposition(channels.H, W, config.ue_count,
                                               config.noise_var)
    sinr = cds / (mui + s2ci + nz)
    sens = sum(zeta_sq[a] * float(np.sum(np.abs(
        steer.conj() @ W[a]) ** 2)) for a, steer in _steer_items(paths))
    return lam * float(sinr.min()) + (1.0 - lam) * sens, float(sinr.min()), sens


def _steer_items(paths):
    return [(p.tx_ap, p.tx_steering) for p in paths]


def _build_round(layout, channels, paths, anchors, lam, zeta_sq, xi, config):
    """One convex inner approximation around the anchor beams.

    Per-user constraint: the desired-signal numerator is linearized at the
    anchor and divided by the anchor's interference-plus-noise, giving a
    concave global under-estimator of the SINR; the exact interference
    quadratic stays on the left, so any feasible point of the round also
    satisfies the true floor constraint (minus slack).
    """
    n_ue = config.ue_count
    aps = layout.aps
    D = config.n_streams
    q = np.zeros(layout.dim)
    for a, steer in _steer_items(paths):
        fbar = surrogate_f(steer, anchors[a])
        G = 2.0 * (1.0 - lam) * zeta_sq[a] * fbar.G
        nw = layout.M * D
        off = layout.offsets[a]
        q[off:off + nw] -= np.real(G).ravel(order="F")
        q[off + nw:off + 2 * nw] -= np.imag(G).ravel(order="F")
    q[layout.gamma_idx] = -lam
    q[layout.slack0:] = xi

    cons = []
    # per-user floor rows (quadratic, PSD)
    for u in range(n_ue):
        d_hat = sum(complex(channels.H[a][u] @ anchors[a][:, u]) for a in aps)
        inter_vec = [sum(complex(channels.H[a][u] @ anchors[a][:, i]) for a in aps)
                     for i in range(D) if i != u]
        denom = float(np.sum(np.abs(inter_vec) ** 2)) + config.noise_var
        y = d_hat / denom
        rows = []
        for i in range(D):
            if i == u:
                continue
            re = np.zeros(layout.dim)
            im = np.zeros(layout.dim)
            for a in aps:
                h_u = np.conj(channels.H[a][u])      # h_au
                r_, i_ = layout.embed_col(a, i, abs(y) * h_u)
                re += r_
                im += i_
            rows.append(re)
            rows.append(im)
        B = np.asarray(rows)
        b = np.zeros(layout.dim)
        for a in aps:
            h_u = np.conj(channels.H[a][u])
            r_, _ = layout.embed_col(a, u, np.conj(y) * h_u)
            b -= 2.0 * r_                             # -2 Re{y* d_u(W)}
        b[layout.gamma_idx] = 1.0
        b[layout.slack0 + u] = -1.0
        cons.append(QuadConstraint(b=b, c=abs(y) ** 2 * config.noise_var,
                                   Q=2.0 * B.T @ B))
    # per-AP power balls
    nw = layout.M * D
    for a in aps:
        d = np.zeros(layout.dim)
        off = layout.offsets[a]
        d[off:off + 2 * nw] = 2.0
        cons.append(QuadConstraint(b=np.zeros(layout.dim),
                                   c=-config.p_max_watts, Q=d))
    # slack nonnegativity
    for s in range(n_ue):
        b = np.zeros(layout.dim)
        b[layout.slack0 + s] = -1.0
        cons.append(QuadConstraint(b=b, c=0.0, Q=None))
    return QcqpProblem(P=None, q=q, constraints=cons)


def _strict_start(problem, layout, anchors, channels, paths, config):
    """Interior point near the anchor: shrunk beams, floor under the anchor SINR."""
    W = {a: 0.995 * anchors[a] for a in layout.aps}
    cds, mui, s2ci, nz = mt.sinr_decomposition(channels.H, W, config.ue_count,
                                               config.noise_var)
    sinr = cds / (mui + s2ci + nz)
    gamma = 0.9 * float(sinr.min())
    slacks = np.full(layout.n_slacks, 1e-3)
    x = layout.pack(W, gamma, slacks)
    # inflate slacks until every floor row is strictly inside
    for r, con in enumerate(problem.constraints[:config.ue_count]):
        val = con.value(x)
        if val >= -1e-6:
            slacks[r] += val + 1e-3 * max(1.0, abs(val))
    return layout.pack(W, gamma, slacks)


def solve_centralized(config, geometry, channels, lam=None, *, paths=None,
                      sca_params=None, kernel_params=None):
    """Global-CSI joint design of all beam matrices and the SINR floor.

    Returns (BeamformerSet, floor gamma, LinkMetrics, round trace). The round
    acceptance keeps the best true objective, so the reported trace is
    non-decreasing.
    """
    sca = sca_params or config.solver.sca
    lam = config.solver.admm.lambda_tradeoff if lam is None else lam
    if not (0.0 <= lam <= 1.0):
        raise ValueError("tradeoff weight must lie in [0, 1]")
    paths = paths if paths is not None else sensing_paths(geometry, config)
    zeta_sq = {p.tx_ap: p.gain_std ** 2 for p in paths}
    steer = {p.tx_ap: p.tx_steering for p in paths}
    aps = channels.tx_aps
    layout = _Layout(aps=aps, M=config.antennas_per_ap, D=config.n_streams,
                     n_slacks=config.ue_count)
    kp = kernel_params or KernelParams(gap_tol=1e-10)

    anchors = initial_beams(config, channels, steer)
    best_W = anchors
    best_obj, best_floor, _ = _true_objective(channels, anchors, paths, lam,
                                              zeta_sq, config)
    trace = [{"round": 0, "objective": best_obj, "min_sinr": best_floor,
              "status": "init"}]
    x_prev = None
    for rnd in range(1, sca.max_rounds + 1):
        problem = _build_round(layout, channels, paths, anchors, lam, zeta_sq,
                               sca.slack_penalty, config)
        x0 = _strict_start(problem, layout, anchors, channels, paths, config)
        if x_prev is not None:
            cand = x_prev.copy()
            if all(c.value(cand) < 0 for c in problem.constraints):
                x0 = cand
        x, info = solve_qcqp(problem, x0, kp)
        x_prev = x
        W_new, gamma_new, _ = layout.unpack(x)
        obj, floor, sens = _true_objective(channels, W_new, paths, lam, zeta_sq,
                                           config)
        trace.append({"round": rnd, "objective": obj, "min_sinr": floor,
                      "status": info["status"]})
        improved = obj > best_obj
        if improved:
            gain = obj - best_obj
            best_obj, best_W = obj, W_new
            anchors = W_new
            if gain < sca.rel_tol * max(1.0, abs(best_obj)):
                break
        else:
            break                      # surrogate stopped paying: keep best

    beams = BeamformerSet(W=best_W, n_ue=config.ue_count,
                          n_sens=config.sensing_streams)
    link = mt.evaluate(channels, beams, paths, config)
    return beams, float(link.sinr_db.min()), link, trace
