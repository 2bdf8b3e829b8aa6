import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cfisac.scenario import ScenarioConfig, build_scenario
from cfisac.channel import gen_comm_channels, sensing_paths


@pytest.fixture
def default_cfg():
    return ScenarioConfig(seed=3)


@pytest.fixture
def small_cfg():
    # 3 APs (2 tx), few antennas/users: fast end-to-end runs
    return ScenarioConfig(seed=5, ap_count=3, antennas_per_ap=6, ue_count=3)


@pytest.fixture
def small_setup(small_cfg):
    geo = build_scenario(small_cfg)
    ch = gen_comm_channels(geo, small_cfg)
    paths = sensing_paths(geo, small_cfg)
    return small_cfg, geo, ch, paths
