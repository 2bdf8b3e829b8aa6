"""Cell-free ISAC network simulator and decentralized resource optimizers."""

from .scenario import (ScenarioConfig, OfdmConfig, SolverParams, AdmmParams,
                       Geometry, build_scenario, validate_config, load_config,
                       scenario_hash)
from .channel import (ChannelSet, SensingPath, uca_steering, gen_comm_channels,
                      sensing_paths, channel_metric)
from .beamforming import (BeamformerSet, compute_weights, lm_rzf,
                          normalize_power, null_projection, nsc_beamformer,
                          effective_coupling)
from .metrics import LinkMetrics, comm_sinr, sensing_snr, mc_link_oracle, evaluate
from .splitopt import run_splitopt, solve_pa, compute_report
from .jointopt import run_jointopt, linearize_g, surrogate_f
from .centralized import solve_centralized
from .fronthaul import Bus, FronthaulLedger, Message, summarize

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig", "OfdmConfig", "SolverParams", "AdmmParams", "Geometry",
    "build_scenario", "validate_config", "load_config", "scenario_hash",
    "ChannelSet", "SensingPath", "uca_steering", "gen_comm_channels",
    "sensing_paths", "channel_metric",
    "BeamformerSet", "compute_weights", "lm_rzf", "normalize_power",
    "null_projection", "nsc_beamformer", "effective_coupling",
    "LinkMetrics", "comm_sinr", "sensing_snr", "mc_link_oracle", "evaluate",
    "run_splitopt", "solve_pa", "compute_report",
    "run_jointopt", "linearize_g", "surrogate_f",
    "solve_centralized",
    "Bus", "FronthaulLedger", "Message", "summarize",
]
