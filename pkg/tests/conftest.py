import pytest

from allocator import ProblemSpec
from config import settings
from phy_model import ChannelSet, build_channels
from scenario import build_config, reference_scenario


@pytest.fixture(scope="session")
def ref_cfg():
    return reference_scenario()


@pytest.fixture(scope="session")
def ref_channels(ref_cfg):
    return build_channels(ref_cfg)


@pytest.fixture(scope="session")
def single_cfg():
    """Reference parameters with only the first device"""
    return build_config({"device_pos": ((0.8, 0.0),)})[0]


@pytest.fixture
def unit_channels():
    """Unit gains and noise so SNRs equal transmit powers"""
    return ChannelSet(g_sr=1.0, g_sd=(1.0,), g_dr=(1.0,), noise_w=1.0)


@pytest.fixture(scope="session")
def ref_spec(ref_cfg):
    return ProblemSpec.build(ref_cfg, 1.0, 0.0)


@pytest.fixture
def isolated_settings(tmp_path, monkeypatch):
    """Logs, results and the archive under a temporary directory"""
    monkeypatch.setattr(settings, "LOGS_DIR", tmp_path / "logs")
    monkeypatch.setattr(settings, "RESULTS_DIR", tmp_path / "results")
    monkeypatch.setattr(settings, "DATABASE_URL", f"sqlite:///{tmp_path / 'archive.db'}")
    return tmp_path
