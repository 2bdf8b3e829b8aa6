"""Channel generation: Rician downlink channels, sensing paths, steering vectors."""

import csv
from dataclasses import dataclass

import numpy as np

from .scenario import SPEED_OF_LIGHT, substream


def uca_steering(azimuth, elevation, n_antennas, wavelength):
    """Steering vector of a uniform circular array.

    Element m sits at angle 2*pi*m/M on a ring of radius
    lambda / (4 sin(pi/M)) (half-wavelength arc spacing); a single element
    degenerates to radius 0. Entries have unit modulus, so ||a||^2 = M.
    """
    m = np.arange(n_antennas)
    if n_antennas == 1:
        return np.ones(1, dtype=complex)
    radius = wavelength / (4.0 * np.sin(np.pi / n_antennas))
    phase = (2.0 * np.pi * radius / wavelength) * np.cos(elevation) \
        * np.cos(azimuth - 2.0 * np.pi * m / n_antennas)
    return np.exp(1j * phase)


def path_loss_linear(d3_m, wavelength_m):
    """UMi line-of-sight path loss (linear power gain, un-normalized)."""
    f_ghz = SPEED_OF_LIGHT / wavelength_m / 1e9
    pl_db = -(32.4 + 21.0 * np.log10(d3_m) + 20.0 * np.log10(f_ghz))
    return 10.0 ** (pl_db / 10.0)


@dataclass
class ChannelSet:
    """Downlink channels of the transmit APs, rows of H[a] are h_au^H."""
    H: dict                    # tx-AP index -> (N_ue, M) complex
    path_loss: dict            # tx-AP index -> (N_ue,) linear gains (normalized)

    def h(self, a, u):
        """Channel vector h_au (column), i.e. conj of row u of H[a]."""
        return np.conj(self.H[a][u])

    @property
    def tx_aps(self):
        return sorted(self.H)


@dataclass
class SensingPath:
    tx_ap: int
    rx_ap: int
    gain_std: float            # zeta, sqrt of combined path-loss/RCS variance
    gain: complex              # beta ~ CN(0, zeta^2), one draw per block
    delay_s: float
    doppler_hz: float
    tx_steering: np.ndarray
    rx_steering: np.ndarray


def normalized_path_loss(geometry, config):
    """Per-(tx AP, UE) path loss scaled so the median link has unit gain.

    With the median link at gain 1, a full-power transmission toward the
    median UE arrives at exactly the configured p_max/noise_var budget.
    """
    d = geometry.d_ap_ue[geometry.tx_set, :]
    if np.any(d < 1e-9):
        raise ValueError("UE coincident with an AP: degenerate path loss")
    pl = path_loss_linear(d, config.carrier_wavelength_m)
    return pl / np.median(pl)


def gen_comm_channels(geometry, config, seed=None):
    """Rician downlink channels for every (transmit AP, UE) pair.

    h_au = sqrt(PL) * (sqrt(K/(K+1)) * steer(az, el) + sqrt(1/(K+1)) * g),
    g ~ CN(0, I_M), deterministic per (seed, AP, UE) substream.
    """
    c = config
    seed = c.seed if seed is None else seed
    M = c.antennas_per_ap
    K_r = c.rician_k_factor
    pl_all = normalized_path_loss(geometry, c)

    H = {}
    pls = {}
    for k, a in enumerate(geometry.tx_set):
        rows = np.empty((c.ue_count, M), dtype=complex)
        for u in range(c.ue_count):
            rng = substream(seed, "comm", a, u)
            g = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / np.sqrt(2.0)
            los = uca_steering(geometry.az_ap_ue[a, u], geometry.el_ap_ue[a, u],
                               M, c.carrier_wavelength_m)
            h = np.sqrt(pl_all[k, u]) * (np.sqrt(K_r / (K_r + 1.0)) * los
                                         + np.sqrt(1.0 / (K_r + 1.0)) * g)
            rows[u] = np.conj(h)
        H[a] = rows
        pls[a] = pl_all[k]
    return ChannelSet(H=H, path_loss=pls)


def sensing_paths(geometry, config, seed=None):
    """One Swerling-I path per (tx AP, rx AP) pair toward the single target."""
    c = config
    seed = c.seed if seed is None else seed
    paths = []
    for a_t in geometry.tx_set:
        for a_r in geometry.rx_set:
            zeta = np.sqrt(c.rcs_var)
            rng = substream(seed, "sensing-gain", a_t, a_r)
            beta = zeta * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
            tau = (geometry.d_ap_target[a_t] + geometry.d_ap_target[a_r]) / SPEED_OF_LIGHT
            paths.append(SensingPath(
                tx_ap=a_t, rx_ap=a_r, gain_std=zeta, gain=beta,
                delay_s=tau, doppler_hz=0.0,
                tx_steering=uca_steering(geometry.az_ap_target[a_t],
                                         geometry.el_ap_target[a_t],
                                         c.antennas_per_ap, c.carrier_wavelength_m),
                rx_steering=uca_steering(geometry.az_ap_target[a_r],
                                         geometry.el_ap_target[a_r],
                                         c.antennas_per_ap, c.carrier_wavelength_m),
            ))
    return paths


def channel_metric(H_a):
    """Inverse 2-norm condition number sigma_min / sigma_max of H_a."""
    H_a = np.asarray(H_a)
    if not np.any(H_a):
        raise ValueError("channel_metric undefined for an all-zero matrix")
    s = np.linalg.svd(H_a, compute_uv=False)
    return float(s[-1] / s[0])


# ---------------------------------------------------------------------------
# Plain-CSV dump/load for cross-implementation comparisons.
# ---------------------------------------------------------------------------

def dump_channels_csv(channels, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ap", "ue", "ant", "re", "im"])
        for a in channels.tx_aps:
            H = channels.H[a]
            for u in range(H.shape[0]):
                for m in range(H.shape[1]):
                    w.writerow([a, u, m, repr(float(H[u, m].real)), repr(float(H[u, m].imag))])


def load_channels_csv(path):
    cells = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            cells[(int(row["ap"]), int(row["ue"]), int(row["ant"]))] = \
                float(row["re"]) + 1j * float(row["im"])
    aps = sorted({k[0] for k in cells})
    H = {}
    for a in aps:
        n_ue = max(k[1] for k in cells if k[0] == a) + 1
        n_ant = max(k[2] for k in cells if k[0] == a) + 1
        H[a] = np.array([[cells[(a, u, m)] for m in range(n_ant)]
                         for u in range(n_ue)])
    return ChannelSet(H=H, path_loss={a: None for a in aps})
