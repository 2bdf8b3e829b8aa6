"""Exact link metrics (per-UE SINR, sensing SNR) and a Monte-Carlo signal oracle."""

from dataclasses import dataclass

import numpy as np

from .beamforming import effective_coupling


@dataclass
class LinkMetrics:
    sinr: np.ndarray              # (N_ue,) linear
    cds: np.ndarray               # desired-signal power per UE
    mui: np.ndarray               # multi-user interference power
    s2ci: np.ndarray              # sensing-to-comm interference power
    noise_var: float
    sensing_snr: dict             # rx-AP index -> linear SNR

    @property
    def sinr_db(self):
        return 10.0 * np.log10(self.sinr)

    def sensing_snr_db(self, rx_ap=None):
        if rx_ap is None:
            rx_ap = min(self.sensing_snr)
        return 10.0 * np.log10(self.sensing_snr[rx_ap])


def sinr_decomposition(H_by_ap, W_by_ap, n_ue, noise_var):
    """Per-UE (CDS, MUI, S2CI) powers from the coupling matrix rows.

    Cross-AP sums happen inside the magnitude: row u of C = sum_a H_a W_a
    holds sum_a h_au^H w_ai for every stream i.
    """
    C = effective_coupling(H_by_ap, W_by_ap)
    p = np.abs(C) ** 2
    cds = p[np.arange(n_ue), np.arange(n_ue)]
    mui = p[:, :n_ue].sum(axis=1) - cds
    s2ci = p[:, n_ue:].sum(axis=1)
    return cds, mui, s2ci, np.full(n_ue, float(noise_var))


def comm_sinr(u, H_by_ap, W_by_ap, noise_var):
    """Exact linear SINR of UE u."""
    n_ue = next(iter(H_by_ap.values())).shape[0]
    cds, mui, s2ci, nz = sinr_decomposition(H_by_ap, W_by_ap, n_ue, noise_var)
    return float(cds[u] / (mui[u] + s2ci[u] + nz[u]))


def sensing_snr(rx_ap, W_by_ap, paths, noise_var, n_antennas):
    """Matched-filter echo SNR at a receive AP.

    (M / sigma^2) * sum over tx APs of zeta^2 * ||a_t^H W_t||^2, where the
    column sum runs over every stream (communication beams contribute too).
    """
    total = 0.0
    for p in paths:
        if p.rx_ap != rx_ap:
            continue
        if p.tx_ap not in W_by_ap:
            raise ValueError(f"no beamformer for tx AP {p.tx_ap}")
        g = p.tx_steering.conj() @ W_by_ap[p.tx_ap]
        total += p.gain_std ** 2 * float(np.sum(np.abs(g) ** 2))
    return n_antennas / noise_var * total


def evaluate(channels, beams, paths, config):
    """Full LinkMetrics for one beamformer set."""
    cds, mui, s2ci, nz = sinr_decomposition(channels.H, beams.W, config.ue_count,
                                            config.noise_var)
    sinr = cds / (mui + s2ci + nz)
    rx_aps = sorted({p.rx_ap for p in paths})
    snr = {r: sensing_snr(r, beams.W, paths, config.noise_var, config.antennas_per_ap)
           for r in rx_aps}
    return LinkMetrics(sinr=sinr, cds=cds, mui=mui, s2ci=s2ci,
                       noise_var=config.noise_var, sensing_snr=snr)


def mc_link_oracle(H_by_ap, W_by_ap, noise_var, n_symbols, rng):
    """Signal-level Monte-Carlo estimate of the per-UE power decomposition.

    Draws independent CN(0,1) symbols for every stream plus receiver noise,
    forms the received samples term by term, and averages their powers.
    Returns dict with keys sinr, cds, mui, s2ci, noise (arrays over UEs).
    """
    if n_symbols < 10 ** 3:
        raise ValueError("need at least 1e3 symbols for a meaningful estimate")
    C = effective_coupling(H_by_ap, W_by_ap)
    n_ue, n_streams = C.shape
    s = (rng.standard_normal((n_streams, n_symbols))
         + 1j * rng.standard_normal((n_streams, n_symbols))) / np.sqrt(2.0)
    z = np.sqrt(noise_var / 2.0) * (rng.standard_normal((n_ue, n_symbols))
                                    + 1j * rng.standard_normal((n_ue, n_symbols)))

    cds = np.empty(n_ue)
    mui = np.empty(n_ue)
    s2ci = np.empty(n_ue)
    for u in range(n_ue):
        desired = C[u, u] * s[u]
        others = np.delete(np.arange(n_ue), u)
        interf = C[u, others] @ s[others]
        sens = C[u, n_ue:] @ s[n_ue:]
        cds[u] = np.mean(np.abs(desired) ** 2)
        mui[u] = np.mean(np.abs(interf) ** 2)
        s2ci[u] = np.mean(np.abs(sens) ** 2)
    noise = np.mean(np.abs(z) ** 2, axis=1)
    return {
        "sinr": cds / (mui + s2ci + noise),
        "cds": cds, "mui": mui, "s2ci": s2ci, "noise": noise,
    }


def metrics_rows(metrics, scenario_id, seed, algo):
    """CSV-ready rows: scenario_id, seed, algo, ue_id, sinr_db, snr_db, cds, mui, s2ci."""
    snr_db = metrics.sensing_snr_db()
    rows = []
    for u in range(len(metrics.sinr)):
        rows.append({
            "scenario_id": scenario_id, "seed": seed, "algo": algo, "ue_id": u,
            "sinr_db": float(metrics.sinr_db[u]), "snr_db": float(snr_db),
            "cds": float(metrics.cds[u]), "mui": float(metrics.mui[u]),
            "s2ci": float(metrics.s2ci[u]),
        })
    return rows
