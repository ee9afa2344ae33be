import math

import pytest
from pydantic import ValidationError

from errors import ChannelError
from phy_model import (NetworkConfig, Position, build_channels, distance, harvested_power, noise_power,
                       path_gain)


def test_distance_is_euclidean():
    assert distance(Position(x=0, y=0), Position(x=3, y=4)) == 5.0


@pytest.mark.parametrize("d, expected", [(1.0, 1e-3), (10.0, 1e-5), (0.5, 1e-3), (0.0, 1e-3)])
def test_path_gain_clamps_below_one_meter(d, expected):
    assert path_gain(d, 1e-3, 2.0) == pytest.approx(expected, rel=1e-12)


def test_path_gain_decreases_with_distance():
    gains = [path_gain(d, 1e-3, 2.7) for d in (1.0, 2.0, 10.0, 100.0)]
    assert all(b < a for a, b in zip(gains, gains[1:]))


def test_path_gain_flat_without_exponent():
    assert path_gain(250.0, 1e-3, 0.0) == 1e-3
    assert path_gain(0.0, 1e-3, 0.0, d_min=0.0) == 1e-3


def test_path_gain_zero_distance_unclamped():
    with pytest.raises(ChannelError):
        path_gain(0.0, 1e-3, 2.7, d_min=0.0)


def test_noise_power_reference_values():
    # -90 dBm/Hz over 10 kHz is -50 dBm
    assert noise_power(-90.0, 1e4) == pytest.approx(1e-8, rel=1e-12)


@pytest.mark.parametrize("bandwidth", [0.0, -1.0])
def test_noise_power_rejects_bad_bandwidth(bandwidth):
    with pytest.raises(ValueError):
        noise_power(-90.0, bandwidth)


def test_harvested_power_linear():
    assert harvested_power(2.0, 1e-3, 0.8, 0.5) == pytest.approx(8e-4, rel=1e-12)
    assert harvested_power(2.0, 1e-3, 0.8, 0.0) == 0.0


def test_harvested_power_rejects_bad_share():
    with pytest.raises(ValueError):
        harvested_power(1.0, 1e-3, 0.8, 1.5)


def test_ref_channels(ref_cfg, ref_channels):
    d_sr = math.hypot(100.0, 1.0)
    assert ref_channels.g_sr == pytest.approx(1e-3 * d_sr ** -2.7, rel=1e-12)
    # both devices sit within 1 m of the source
    assert ref_channels.g_sd == pytest.approx((1e-3, 1e-3), rel=1e-12)
    d_dr = (math.hypot(99.2, 1.0), math.hypot(100.0, 0.0))
    assert ref_channels.g_dr == pytest.approx(tuple(1e-3 * d ** -2.7 for d in d_dr), rel=1e-12)
    assert ref_channels.noise_w == pytest.approx(1e-8, rel=1e-12)
    assert ref_channels.cascade(0) == ref_channels.g_sd[0] * ref_channels.g_dr[0]
    assert ref_channels.num_devices == ref_cfg.num_devices == 2


def test_coincident_positions_without_clamping(ref_cfg):
    cfg = ref_cfg.model_copy(update={"min_distance_m": 0.0, "device_pos": (Position(x=0, y=0),)})
    with pytest.raises(ChannelError):
        build_channels(cfg)


def test_channels_are_deterministic(ref_cfg):
    assert build_channels(ref_cfg) == build_channels(ref_cfg)


@pytest.mark.parametrize("field, value", [
    ("eh_efficiency", 1.5),
    ("eh_efficiency", 0.0),
    ("bandwidth_hz", 0.0),
    ("spreading_factor", 0),
    ("path_loss_exponent", -1.0),
    ("device_pos", ()),
])
def test_network_config_ranges(ref_cfg, field, value):
    data = ref_cfg.model_dump()
    data[field] = value
    with pytest.raises(ValidationError):
        NetworkConfig(**data)


def test_network_config_is_frozen(ref_cfg):
    with pytest.raises(ValidationError):
        ref_cfg.bandwidth_hz = 1.0
