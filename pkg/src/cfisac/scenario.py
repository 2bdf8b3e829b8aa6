"""Scenario configuration, random geometry, and deterministic seeding."""

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict, is_dataclass, fields as dc_fields

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


# ---------------------------------------------------------------------------
# Seeding: one master seed, independent substreams per (tag, indices) so that
# adding entities never perturbs the draws of existing ones.
# ---------------------------------------------------------------------------

def substream(seed, tag, *indices):
    """Deterministic per-purpose RNG derived from (seed, tag, indices)."""
    key = ":".join([str(seed), str(tag)] + [str(i) for i in indices])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


# ---------------------------------------------------------------------------
# Parameter groups
# ---------------------------------------------------------------------------

@dataclass
class PgaParams:
    """Projected gradient ascent settings for the central power split."""
    init_value: float = 0.5
    step0: float = 0.1
    shrink: float = 0.5
    max_iter: int = 500
    grad_tol: float = 1e-8
    armijo: float = 1e-4
    rho_floor: float = 1e-9


@dataclass
class SplitParams:
    """Knobs for the fixed local beamformers and the power-split solve."""
    rzf_reg_scale: float = 1e-6       # scales trace(H^H H)/M
    proj_reg_scale: float = 1e-8      # scales trace(H H^H)/N_ue
    slack_penalty: float = 1e3
    pga: PgaParams = field(default_factory=PgaParams)


@dataclass
class AdmmParams:
    """Consensus-ADMM settings for the joint beamforming/power design."""
    lambda_tradeoff: float = 0.3
    penalty: float = 1.0              # quadratic consensus penalty weight
    # standard residual balancing: grow/shrink the penalty when the consensus
    # residual and the floor drift get out of proportion (duals are rescaled)
    adaptive_penalty: bool = False
    penalty_min: float = 1e-3
    penalty_max: float = 10.0
    responsibility: str = "gain"      # "gain" | "equal"
    slack_penalty_init: float = 10.0
    slack_penalty_step: float = 10.0
    slack_penalty_max: float = 1e3
    # per-iteration move limit ||W - anchor||_F^2 <= frac * decay^(t-1) * P_max;
    # the affine rows are tangent models, so unconstrained jumps away from the
    # anchor de-stabilize the interference fixed point. The decay anneals the
    # iteration into a settled point (geometric total-movement budget),
    # guaranteeing the consensus tail converges.
    trust_region_frac: float = 0.15
    trust_region_decay: float = 0.7
    # per-iteration cap on each AP's leakage onto each user, relative to the
    # share it reported last round. The local floor is the minimum over
    # per-user certificates, so without this cap every non-binding user's
    # beam gain is locally worthless and gets razed for sensing, poisoning
    # the broadcast interference vector for everyone. The allowance decays
    # geometrically: at the consensus fixed point the marginal value of the
    # floor vanishes, so a renewing allowance would be consumed forever.
    leak_growth_frac: float = 0.15
    leak_growth_decay: float = 0.55
    conv_tol: float = 1e-3
    max_iters: int = 50
    include_rcs_in_local_objective: bool = True
    # Dividing the floor update by the full AP count while only the transmit
    # APs report pins the floor at N_t*lambda/(penalty*(N_ap - N_t)) no matter
    # how good the channels are; the per-reporting-AP mean has no such trap.
    divide_by_tx_count: bool = True


@dataclass
class ScaParams:
    """Centralized successive-convex-approximation settings."""
    max_rounds: int = 30
    rel_tol: float = 1e-5
    slack_penalty: float = 1e3


@dataclass
class SolverParams:
    split: SplitParams = field(default_factory=SplitParams)
    admm: AdmmParams = field(default_factory=AdmmParams)
    sca: ScaParams = field(default_factory=ScaParams)


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------

@dataclass
class OfdmConfig:
    bandwidth_hz: float = 61.44e6
    subcarrier_count: int = 2048
    subcarrier_spacing_hz: float = 30e3
    cp_duration_s: float = 2.34e-6
    symbol_period_s: float = 1.0 / 30e3 + 2.34e-6
    rb_subcarriers: int = 12
    rb_symbols: int = 14

    @classmethod
    def from_base(cls, bandwidth_hz, subcarrier_count, cp_duration_s,
                  rb_subcarriers=12, rb_symbols=14):
        """Build with the derived spacing/period fields filled in."""
        f_sc = bandwidth_hz / subcarrier_count
        return cls(
            bandwidth_hz=bandwidth_hz,
            subcarrier_count=subcarrier_count,
            subcarrier_spacing_hz=f_sc,
            cp_duration_s=cp_duration_s,
            symbol_period_s=1.0 / f_sc + cp_duration_s,
            rb_subcarriers=rb_subcarriers,
            rb_symbols=rb_symbols,
        )


@dataclass
class ScenarioConfig:
    ap_count: int = 4
    antennas_per_ap: int = 10
    ue_count: int = 6
    sensing_streams: int = 1
    p_max_watts: float = 10.0
    noise_var: float = 0.1            # 20 dB budget against p_max_watts
    rcs_var: float = 0.5
    rician_k_factor: float = 10.0     # linear
    carrier_wavelength_m: float = SPEED_OF_LIGHT / 3.5e9
    ap_circle_radius_m: float = 650.0
    placement_radius_m: float = 1000.0
    ap_height_m: float = 10.0
    ue_height_m: float = 1.5
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    seed: int = 0
    solver: SolverParams = field(default_factory=SolverParams)

    @property
    def n_streams(self):
        return self.ue_count + self.sensing_streams


def validate_config(config):
    """Check every invariant; return a list of violation strings (empty = valid)."""
    v = []
    c = config
    if c.ap_count < 2:
        v.append("ap_count: >= 2 required (cannot form a Tx/Rx split)")
    if c.antennas_per_ap < 1:
        v.append("antennas_per_ap: >= 1 required")
    if c.ue_count < 1:
        v.append("ue_count: >= 1 required")
    if c.sensing_streams < 1:
        v.append("sensing_streams: >= 1 required")
    if not c.p_max_watts > 0:
        v.append("p_max_watts: must be > 0")
    if not c.noise_var > 0:
        v.append("noise_var: must be > 0")
    if not c.rcs_var > 0:
        v.append("rcs_var: must be > 0")
    if c.rician_k_factor < 0:
        v.append("rician_k_factor: must be >= 0")
    if not c.carrier_wavelength_m > 0:
        v.append("carrier_wavelength_m: must be > 0")
    if not c.ap_circle_radius_m > 0:
        v.append("ap_circle_radius_m: must be > 0")
    if not c.placement_radius_m > 0:
        v.append("placement_radius_m: must be > 0")

    o = c.ofdm
    if not math.isclose(o.subcarrier_spacing_hz, o.bandwidth_hz / o.subcarrier_count,
                        rel_tol=1e-9):
        v.append("ofdm.subcarrier_spacing_hz: must equal bandwidth_hz / subcarrier_count")
    if not math.isclose(o.symbol_period_s, 1.0 / o.subcarrier_spacing_hz + o.cp_duration_s,
                        rel_tol=1e-9):
        v.append("ofdm.symbol_period_s: must equal 1/subcarrier_spacing_hz + cp_duration_s")
    if not (1 <= o.rb_subcarriers <= o.subcarrier_count):
        v.append("ofdm.rb_subcarriers: must lie in [1, subcarrier_count]")
    if o.rb_symbols < 1:
        v.append("ofdm.rb_symbols: >= 1 required")

    lam = c.solver.admm.lambda_tradeoff
    if not (0.0 <= lam <= 1.0):
        v.append("solver.admm.lambda_tradeoff: not in [0, 1]")
    if not c.solver.admm.penalty > 0:
        v.append("solver.admm.penalty: must be > 0")
    if c.solver.admm.responsibility not in ("equal", "gain"):
        v.append("solver.admm.responsibility: must be 'equal' or 'gain'")
    if not c.solver.split.slack_penalty > 0:
        v.append("solver.split.slack_penalty: must be > 0")
    return v


# ---------------------------------------------------------------------------
# JSON round-trip. Keys mirror the dataclass field names; any numeric field
# may instead be given with an `_db` suffix and is converted to linear.
# ---------------------------------------------------------------------------

def _apply_db_keys(d):
    out = {}
    for key, val in d.items():
        if isinstance(val, dict):
            out[key] = _apply_db_keys(val)
        elif key.endswith("_db"):
            out[key[:-3]] = 10.0 ** (float(val) / 10.0)
        else:
            out[key] = val
    return out


def _build_dataclass(cls, d):
    kwargs = {}
    for f in dc_fields(cls):
        if f.name not in d:
            continue
        val = d[f.name]
        sub = {"ofdm": OfdmConfig, "solver": SolverParams, "split": SplitParams,
               "admm": AdmmParams, "sca": ScaParams, "pga": PgaParams}.get(f.name)
        kwargs[f.name] = _build_dataclass(sub, val) if sub else val
    unknown = set(d) - {f.name for f in dc_fields(cls)}
    if unknown:
        raise ValueError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    return cls(**kwargs)


def config_from_dict(d):
    return _build_dataclass(ScenarioConfig, _apply_db_keys(d))


def load_config(path):
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def config_to_dict(config):
    return asdict(config)


def scenario_hash(config):
    """Stable short hash of the fully resolved configuration."""
    blob = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

@dataclass
class Geometry:
    ap_positions: np.ndarray          # (N_ap, 2) meters
    ue_positions: np.ndarray          # (N_ue, 2)
    target_position: np.ndarray       # (2,)
    tx_set: list                      # AP indices transmitting
    rx_set: list                      # AP indices receiving echoes
    az_ap_ue: np.ndarray              # (N_ap, N_ue) radians
    el_ap_ue: np.ndarray
    az_ap_target: np.ndarray          # (N_ap,)
    el_ap_target: np.ndarray
    d_ap_ue: np.ndarray               # (N_ap, N_ue) 3-D meters
    d_ap_target: np.ndarray           # (N_ap,)


def _angles(from_xy, from_h, to_xy, to_h):
    delta = np.asarray(to_xy, float) - np.asarray(from_xy, float)
    d2 = np.hypot(delta[..., 0], delta[..., 1])
    az = np.arctan2(delta[..., 1], delta[..., 0])
    el = np.arctan2(to_h - from_h, d2)
    d3 = np.hypot(d2, to_h - from_h)
    return az, el, d3


def select_rx_ap(ap_positions, target_position):
    """Index of the AP nearest the target (ties broken by lowest index)."""
    d = np.linalg.norm(np.asarray(ap_positions, float) - np.asarray(target_position, float),
                       axis=1)
    return int(np.argmin(d))


def build_scenario(config, *, ue_positions=None, target_position=None):
    """Place APs on the circle, drop UEs/target in the disk, assign Tx/Rx roles.

    Explicit `ue_positions` / `target_position` arrays override the random
    placement (used for controlled experiments and tests).
    """
    c = config
    if c.ap_count < 2:
        raise ValueError("ap_count must be >= 2 to split Tx and Rx roles")
    if c.ap_circle_radius_m <= 0 or c.placement_radius_m <= 0:
        raise ValueError("radii must be positive")

    rot = substream(c.seed, "ap-rotation").uniform(0.0, 2.0 * np.pi)
    angles = rot + 2.0 * np.pi * np.arange(c.ap_count) / c.ap_count
    ap_pos = c.ap_circle_radius_m * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    def disk_point(rng):
        r = c.placement_radius_m * np.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * np.pi)
        return np.array([r * np.cos(phi), r * np.sin(phi)])

    if ue_positions is None:
        ue_pos = np.stack([disk_point(substream(c.seed, "ue", u))
                           for u in range(c.ue_count)])
    else:
        ue_pos = np.asarray(ue_positions, float).reshape(c.ue_count, 2)
    if target_position is None:
        tgt = disk_point(substream(c.seed, "target"))
    else:
        tgt = np.asarray(target_position, float).reshape(2)

    rx = select_rx_ap(ap_pos, tgt)
    tx_set = [a for a in range(c.ap_count) if a != rx]

    az_u = np.empty((c.ap_count, c.ue_count))
    el_u = np.empty_like(az_u)
    d_u = np.empty_like(az_u)
    for a in range(c.ap_count):
        az_u[a], el_u[a], d_u[a] = _angles(ap_pos[a], c.ap_height_m, ue_pos, c.ue_height_m)
    az_t, el_t, d_t = _angles(ap_pos, c.ap_height_m, tgt, c.ue_height_m)

    return Geometry(
        ap_positions=ap_pos, ue_positions=ue_pos, target_position=tgt,
        tx_set=tx_set, rx_set=[rx],
        az_ap_ue=az_u, el_ap_ue=el_u,
        az_ap_target=np.asarray(az_t), el_ap_target=np.asarray(el_t),
        d_ap_ue=d_u, d_ap_target=np.asarray(d_t),
    )
