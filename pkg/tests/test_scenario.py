from pathlib import Path

import pytest

from errors import ConfigError
from phy_model import Position
from scenario import REFERENCE_DEFAULTS, calibration_header, config_digest, load_config, reference_scenario

SHIPPED = Path(__file__).resolve().parent.parent / "scenarios" / "reference.conf"


def write(tmp_path, text):
    path = tmp_path / "scenario.conf"
    path.write_text(text, encoding="utf-8")
    return path


def test_shipped_file_is_the_reference_scenario():
    cfg, report = load_config(SHIPPED)
    assert cfg == reference_scenario()
    assert cfg.num_devices == 2
    assert cfg.source_pos == Position(x=0, y=0)
    assert cfg.device_pos == (Position(x=0.8, y=0), Position(x=0, y=1))
    assert cfg.receiver_pos == Position(x=100, y=1)
    assert cfg.bandwidth_hz == 1e4
    assert cfg.noise_psd_dbm_hz == -90.0
    assert cfg.eh_efficiency == 0.8
    assert cfg.circuit_power_bc_w == 1e-5
    assert cfg.circuit_power_ac_w == 1e-3
    assert cfg.spreading_factor == 128
    assert cfg.path_loss_ref_gain == 1e-3
    assert cfg.path_loss_exponent == 2.7
    # optional keys left at their defaults
    assert set(report.filled_keys) == {"min_distance_m", "device_power_cap_w", "backscatter_combining"}


def test_empty_file_uses_every_default(tmp_path):
    cfg, report = load_config(write(tmp_path, ""))
    assert cfg == reference_scenario()
    assert report.filled_keys == tuple(REFERENCE_DEFAULTS)


def test_single_key_overrides(tmp_path):
    cfg, report = load_config(write(tmp_path, "bandwidth_hz = 20000\n"))
    assert cfg.bandwidth_hz == 2e4
    assert "bandwidth_hz" not in report.filled_keys
    assert cfg.eh_efficiency == 0.8


def test_comments_and_blank_lines(tmp_path):
    text = "# header\n\neh_efficiency = 0.5  # lower efficiency\n   \n"
    cfg, _ = load_config(write(tmp_path, text))
    assert cfg.eh_efficiency == 0.5


def test_range_error_names_the_key(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "bandwidth_hz = 10000\neh_efficiency = 1.5\n"))
    assert info.value.key == "eh_efficiency"
    assert info.value.line == 2
    assert "eh_efficiency" in str(info.value)


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "bandwidth_hz = 10000\nantennas = 4\n"))
    assert info.value.line == 2
    assert "antennas" in str(info.value)


def test_parse_error_has_line_number(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "\n\nbandwidth_hz 10000\n"))
    assert info.value.line == 3
    assert str(info.value).startswith("line 3:")


def test_bad_value_has_line_number(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "source_pos = 0\n"))
    assert info.value.line == 1
    assert info.value.key == "source_pos"


def test_duplicate_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "spreading_factor = 64\nspreading_factor = 32\n"))


def test_device_count_follows_positions(tmp_path):
    cfg, _ = load_config(write(tmp_path, "device_pos = 1, 0; 2, 0; 3, 0\n"))
    assert cfg.num_devices == 3


def test_device_count_mismatch(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "num_devices = 3\ndevice_pos = 1, 0; 2, 0\n"))


def test_optional_keys(tmp_path):
    text = "device_power_cap_w = 0.05\nbackscatter_combining = false\nmin_distance_m = 0.5\n"
    cfg, _ = load_config(write(tmp_path, text))
    assert cfg.device_power_cap_w == 0.05
    assert cfg.backscatter_combining is False
    assert cfg.min_distance_m == 0.5
    cfg, _ = load_config(write(tmp_path, "device_power_cap_w = none\n"))
    assert cfg.device_power_cap_w is None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.conf")


def test_calibration_header_names_placeholders(ref_cfg):
    header = "\n".join(calibration_header(ref_cfg))
    assert "spreading_factor = 128" in header
    assert "path_loss_ref_gain = 0.001" in header
    assert "path_loss_exponent = 2.7" in header


def test_config_digest_tracks_bytes(tmp_path):
    first = write(tmp_path, "bandwidth_hz = 10000\n")
    digest = config_digest(first)
    assert len(digest) == 64
    first.write_text("bandwidth_hz = 10001\n", encoding="utf-8")
    assert config_digest(first) != digest


@pytest.mark.parametrize("text, key, line", [
    ("source_pos = inf, 0\n", "source_pos", 1),
    ("bandwidth_hz = 10000\ndevice_pos = 1, 0; nan, 2\n", "device_pos", 2),
])
def test_non_finite_coordinates_name_the_key(tmp_path, text, key, line):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert info.value.key == key
    assert info.value.line == line
