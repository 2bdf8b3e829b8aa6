"""Split design: local fixed beamformers plus a central power-splitting solve."""

from dataclasses import dataclass, field

import numpy as np

from . import beamforming as bf
from . import metrics as mt
from .channel import channel_metric, sensing_paths
from .fronthaul import Bus


@dataclass
class UtilityReport:
    ap: int
    alpha_tilde: float     # alpha_a / ||raw comm beamformer||_F
    delta_tilde: float     # zeta^2 * (comm vs sensing beam-gain difference)


@dataclass
class PowerSplit:
    rho: np.ndarray        # per tx-AP communication share in [0, 1]
    slack: float
    gamma_util: float      # communication-utility floor (linear)
    penalty: float
    objective_trace: list = field(default_factory=list)


def compute_report(W_comm_raw, W_sens_raw, alpha, steer, zeta):
    """Scalar utilities an AP ships to the central server."""
    nc = np.linalg.norm(W_comm_raw, "fro")
    ns = np.linalg.norm(W_sens_raw, "fro")
    if nc == 0 or ns == 0:
        raise ValueError("utility report requires nonzero raw beamformers")
    hat_c = W_comm_raw / nc
    hat_s = W_sens_raw / ns
    gain_c = float(np.sum(np.abs(steer.conj() @ hat_c) ** 2))
    gain_s = float(np.sum(np.abs(steer.conj() @ hat_s) ** 2))
    return UtilityReport(ap=-1, alpha_tilde=alpha / nc,
                         delta_tilde=zeta ** 2 * (gain_c - gain_s))


def solve_pa(alpha_tilde, delta_tilde, gamma_util, penalty, pga):
    """Maximize delta^T rho - xi*eps over the box, eps the constraint slack.

    The slack is eliminated: eps(rho) = max(0, sqrt(gamma) - alpha^T sqrt(rho)),
    leaving a concave objective on [rho_floor, 1]^n solved by projected
    (sub)gradient ascent with Armijo backtracking. At the kink the
    constraint-active branch of the subgradient is used.
    """
    alpha = np.asarray(alpha_tilde, float)
    delta = np.asarray(delta_tilde, float)
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(delta))
            and np.isfinite(gamma_util)):
        raise ValueError("non-finite power-allocation inputs")
    root_gamma = np.sqrt(max(0.0, gamma_util))
    lo_bound = pga.rho_floor

    def objective(rho):
        return float(delta @ rho - penalty * max(0.0, root_gamma - alpha @ np.sqrt(rho)))

    kink_band = 1e-6 * (1.0 + root_gamma)

    def gradient(rho):
        s = root_gamma - alpha @ np.sqrt(rho)
        if abs(s) <= kink_band:
            return bundle_direction(rho), "bundle"
        if s > 0:                                   # constraint-active branch
            return delta + penalty * alpha / (2.0 * np.sqrt(rho)), "active"
        return delta.copy(), "slack"

    def bundle_direction(rho):
        """Steepest-ascent element of the two-branch supergradient hull.

        The reduced objective is the minimum of an affine branch and a
        concave penalized branch; on the kink surface neither branch
        gradient alone ascends, but the minimum-norm point of their convex
        hull moves tangentially along the surface.
        """
        g_active = delta + penalty * alpha / (2.0 * np.sqrt(rho))
        d = g_active - delta
        dd = float(d @ d)
        theta = 0.0 if dd == 0 else min(1.0, max(0.0, -float(delta @ d) / dd))
        return delta + theta * d

    def manifold_step(rho):
        """Exact sliding step along the active constraint surface.

        In x = sqrt(rho) coordinates the surface alpha^T x = sqrt(gamma) is a
        hyperplane and the objective along any tangent line is a scalar
        quadratic, so the best on-surface move has a closed form. First-order
        steps crawl here: the penalty makes the surface a knife edge whose
        curvature in rho space limits straight chords to tiny lengths.
        """
        x = np.sqrt(rho)
        x_lo = np.sqrt(lo_bound)
        v = 2.0 * delta * x                        # d/dx of the smooth part
        for _ in range(3):                         # project + drop blocked
            v = v - (alpha @ v) / (alpha @ alpha) * alpha
            blocked = ((x >= 1.0 - 1e-12) & (v > 0)) | ((x <= x_lo + 1e-12) & (v < 0))
            if not np.any(blocked):
                break
            v = np.where(blocked, 0.0, v)
        if not np.any(np.abs(v) > 1e-15):
            return None
        t_max = np.inf
        for i in range(x.size):
            if v[i] > 0:
                t_max = min(t_max, (1.0 - x[i]) / v[i])
            elif v[i] < 0:
                t_max = min(t_max, (x_lo - x[i]) / v[i])
        if not np.isfinite(t_max) or t_max <= 0:
            return None
        A = float(delta @ (v * v))
        B = 2.0 * float(delta @ (x * v))
        if A < 0:
            t = min(t_max, max(0.0, -B / (2.0 * A)))
        else:
            t = t_max if B * t_max + A * t_max ** 2 > 0 else 0.0
        if t <= 0:
            return None
        cand = np.clip((x + t * v) ** 2, lo_bound, 1.0)
        if objective(cand) > trace[-1]:
            return cand
        return None

    def project(rho):
        return np.clip(rho, lo_bound, 1.0)

    rho = np.full(alpha.shape, pga.init_value)
    trace = [objective(rho)]

    def line_max(rho, g):
        """Exact concave line search along g, stopped at the first box face.

        The objective restricted to any straight feasible segment is concave,
        so a ternary search finds the segment maximum; acceptance still
        requires strict improvement, keeping the trace monotone.
        """
        g = g.copy()                 # drop components blocked by the box
        g[(rho >= 1.0 - 1e-12) & (g > 0)] = 0.0
        g[(rho <= lo_bound * (1 + 1e-9) + 1e-18) & (g < 0)] = 0.0
        if not np.any(g):
            return None
        t_max = np.inf
        for i in range(rho.size):
            if g[i] > 0:
                t_max = min(t_max, (1.0 - rho[i]) / g[i])
            elif g[i] < 0:
                t_max = min(t_max, (lo_bound - rho[i]) / g[i])
        if not np.isfinite(t_max) or t_max <= 0:
            return None
        d = t_max * g
        lo, hi = 0.0, 1.0
        for _ in range(200):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            if objective(rho + m1 * d) < objective(rho + m2 * d):
                lo = m1
            else:
                hi = m2
            if hi - lo < 1e-14:
                break
        t = 0.5 * (lo + hi)
        cand = rho + t * d
        if objective(cand) > trace[-1] + pga.armijo * abs(trace[-1]) * 1e-12 \
                or objective(cand) > trace[-1]:
            return cand
        return None

    for _ in range(pga.max_iter):
        g, kind = gradient(rho)
        pg_norm = np.linalg.norm(project(rho + g) - rho)
        if pg_norm < pga.grad_tol:
            break
        cand = line_max(rho, g)
        if kind == "bundle":
            slide = manifold_step(rho)
            if slide is not None and (cand is None
                                      or objective(slide) > objective(cand)):
                cand = slide
        if cand is None and kind != "bundle":
            # branch gradient stalls on the kink surface: retry along the
            # bundle direction, then try sliding on the surface itself
            cand = line_max(rho, bundle_direction(rho))
            if cand is None:
                cand = manifold_step(rho)
        if cand is None:
            break
        # snap onto box faces: a line search that lands within float noise of
        # a face must not leave a sliver that blocks the next direction
        cand[cand > 1.0 - 1e-12] = 1.0
        cand[cand < lo_bound * (1 + 1e-9)] = lo_bound
        rho = cand
        trace.append(objective(rho))
    slack = max(0.0, root_gamma - alpha @ np.sqrt(rho))
    return rho, slack, trace


def design_local_beamformers(H_a, steer, n_sens, split_params):
    """Raw (unit-budget) comm and sensing beamformers for a single AP."""
    n_ue = H_a.shape[0]
    sigma = bf.default_rzf_reg(H_a, split_params.rzf_reg_scale)
    eps = bf.default_proj_reg(H_a, split_params.proj_reg_scale)
    raw_comm = bf.lm_rzf(H_a, np.eye(n_ue), sigma)      # target scaled later
    P_perp = bf.null_projection(H_a, eps)
    _, raw_sens = bf.nsc_beamformer(P_perp, steer, n_sens, 0.0)
    return raw_comm, raw_sens


def assemble(raw_comm, raw_sens, rho_a, p_max):
    """Power-normalized [comm | sensing] matrix for one AP."""
    n_ue = raw_comm.shape[1]
    n_sens = raw_sens.shape[1]
    comm = (bf.normalize_power(raw_comm, rho_a * p_max)
            if rho_a > 0 else np.zeros_like(raw_comm))
    sens = (bf.normalize_power(raw_sens, (1.0 - rho_a) * p_max)
            if rho_a < 1 else np.zeros_like(raw_sens))
    W = np.hstack([comm, sens])
    return W, n_ue, n_sens


def run_splitopt(config, geometry, channels, gamma_sinr_db, *, fixed_rho=None,
                 paths=None, bus=None):
    """Distributed beamforming + central power split over the fronthaul bus.

    Each tx AP ships its channel metric, receives the network metric sum,
    designs weighted-RZF / null-space-conjugate beams, reports its two
    utility scalars, and gets its optimal power-splitting ratio back. Passing
    `fixed_rho` bypasses the central solve (fixed-PSR baseline).
    """
    sp = config.solver.split
    bus = bus or Bus()
    paths = paths if paths is not None else sensing_paths(geometry, config)
    tx_aps = channels.tx_aps
    steer = {p.tx_ap: p.tx_steering for p in paths}
    zeta = {p.tx_ap: p.gain_std for p in paths}

    # metric exchange ------------------------------------------------------
    metric = {}
    for a in tx_aps:
        metric[a] = channel_metric(channels.H[a])
        bus.send("ap_to_cs", "metric_exchange", a, ("real", 1), payload=metric[a])
    metric_sum = sum(metric.values())
    if metric_sum <= 0:
        raise ValueError("all channel metrics are zero: no usable channel")
    for a in tx_aps:
        bus.send("cs_to_ap", "metric_exchange", a, ("real", 1), payload=metric_sum)

    # local design + utility reports ---------------------------------------
    raw = {}
    reports = {}
    for a in tx_aps:
        alpha_a = metric[a] / metric_sum
        raw_comm, raw_sens = design_local_beamformers(channels.H[a], steer[a],
                                                      config.sensing_streams, sp)
        raw_comm = alpha_a * raw_comm                   # weighted share of the target
        raw[a] = (raw_comm, raw_sens)
        rep = compute_report(raw_comm, raw_sens, alpha_a, steer[a], zeta[a])
        rep.ap = a
        reports[a] = rep
        bus.send("ap_to_cs", "utility_report", a, ("real", 2),
                 payload=(rep.alpha_tilde, rep.delta_tilde))

    # central power split ---------------------------------------------------
    gamma_util = 10.0 ** (gamma_sinr_db / 10.0) * config.noise_var / config.p_max_watts
    if fixed_rho is None:
        rho, slack, trace = solve_pa(
            [reports[a].alpha_tilde for a in tx_aps],
            [reports[a].delta_tilde for a in tx_aps],
            gamma_util, sp.slack_penalty, sp.pga)
    else:
        rho = np.full(len(tx_aps), float(fixed_rho))
        slack, trace = 0.0, []
    split = PowerSplit(rho=rho, slack=slack, gamma_util=gamma_util,
                       penalty=sp.slack_penalty, objective_trace=trace)
    for k, a in enumerate(tx_aps):
        bus.send("cs_to_ap", "psr_assignment", a, ("real", 1), payload=rho[k])

    # assembly + exact metrics ----------------------------------------------
    W = {}
    beams = None
    for k, a in enumerate(tx_aps):
        W[a], n_ue, n_sens = assemble(raw[a][0], raw[a][1], rho[k],
                                      config.p_max_watts)
    beams = bf.BeamformerSet(W=W, n_ue=config.ue_count, n_sens=config.sensing_streams,
                             raw_comm={a: raw[a][0] for a in tx_aps},
                             raw_sens={a: raw[a][1] for a in tx_aps})
    link = mt.evaluate(channels, beams, paths, config)
    return beams, split, link, bus.ledger
