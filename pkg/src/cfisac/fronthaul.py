"""Typed AP<->CS message bus with exact real-scalar accounting."""

import csv
from dataclasses import dataclass, field

import numpy as np

DIRECTIONS = ("ap_to_cs", "cs_to_ap", "broadcast")
PHASES = ("metric_exchange", "utility_report", "psr_assignment",
          "admm_uplink", "admm_downlink", "csi_upload", "bf_download")

# Published-table view: which recorded traffic each algorithm's headline
# per-AP count includes. The full ledger additionally keeps the metric-sum
# broadcast (splitopt), the iteration-0 bootstrap and the uplink reports
# (jointopt); those stay visible in totals() but are not part of the
# headline numbers.
TABLE1_PHASES = {
    "splitopt": {("metric_exchange", "ap_to_cs"),
                 ("utility_report", "ap_to_cs"),
                 ("psr_assignment", "cs_to_ap")},
    "jointopt": {("admm_downlink", "cs_to_ap"),
                 ("admm_downlink", "broadcast")},
    "centralized": {("csi_upload", "ap_to_cs"),
                    ("bf_download", "cs_to_ap")},
}
PHASE_ALGO = {
    "metric_exchange": "splitopt", "utility_report": "splitopt",
    "psr_assignment": "splitopt",
    "admm_uplink": "jointopt", "admm_downlink": "jointopt",
    "csi_upload": "centralized", "bf_download": "centralized",
}


def descriptor_scalars(descriptor):
    """Real-scalar count implied by a ('real'|'complex', shape) descriptor."""
    try:
        kind, shape = descriptor
    except (TypeError, ValueError):
        raise ValueError(f"malformed payload descriptor: {descriptor!r}")
    if kind not in ("real", "complex"):
        raise ValueError(f"malformed payload descriptor kind: {kind!r}")
    count = int(np.prod(shape))
    if count <= 0:
        raise ValueError(f"malformed payload descriptor shape: {shape!r}")
    return 2 * count if kind == "complex" else count


@dataclass
class Message:
    direction: str
    phase: str
    ap_id: int
    descriptor: tuple
    scalar_count: int
    payload: object = None
    iteration: int = 0
    seq: int = 0


@dataclass
class FronthaulLedger:
    messages: list = field(default_factory=list)

    def totals(self):
        """Full accounting: (ap_id, phase, direction) -> real scalars."""
        agg = {}
        for m in self.messages:
            key = (m.ap_id, m.phase, m.direction)
            agg[key] = agg.get(key, 0) + m.scalar_count
        return agg

    def per_ap_total(self, ap_id):
        return sum(m.scalar_count for m in self.messages if m.ap_id == ap_id)


class Bus:
    """Serialized message channel between APs and the central server."""

    def __init__(self):
        self.ledger = FronthaulLedger()
        self._seq = 0

    def send(self, direction, phase, ap_id, descriptor, payload=None, iteration=0):
        if direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {direction!r}")
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        count = descriptor_scalars(descriptor)
        msg = Message(direction=direction, phase=phase, ap_id=ap_id,
                      descriptor=descriptor, scalar_count=count,
                      payload=payload, iteration=iteration, seq=self._seq)
        self._seq += 1
        self.ledger.messages.append(msg)
        return msg


def summarize(ledger):
    """Headline per-AP scalar totals per algorithm (published-table view)."""
    out = {}
    for m in ledger.messages:
        algo = PHASE_ALGO[m.phase]
        allowed = TABLE1_PHASES[algo]
        if (m.phase, m.direction) not in allowed:
            continue
        if algo == "jointopt" and m.iteration < 1:
            continue                      # bootstrap broadcast not in the table
        out.setdefault(algo, {})
        out[algo][m.ap_id] = out[algo].get(m.ap_id, 0) + m.scalar_count
    return out


def centralized_exchange(bus, tx_aps, n_antennas, n_streams):
    """Record the centralized CSI-up / beamformer-down exchange for each AP.

    Uplink carries the local channel block plus the sensing steering columns
    (M x (N_ue + N_s) complex); downlink returns the designed M x (N_ue + N_s)
    beamformer.
    """
    for a in tx_aps:
        bus.send("ap_to_cs", "csi_upload", a, ("complex", (n_antennas, n_streams)))
    for a in tx_aps:
        bus.send("cs_to_ap", "bf_download", a, ("complex", (n_antennas, n_streams)))
    return bus.ledger


def write_fronthaul_csv(ledger, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ap_id", "phase", "direction", "scalars", "iteration"])
        for m in ledger.messages:
            w.writerow([m.ap_id, m.phase, m.direction, m.scalar_count, m.iteration])
