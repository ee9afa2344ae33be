import math

import numpy as np
import pytest

from allocator import STATUS_INFEASIBLE, ProblemSpec, max_rate_gain
from config import settings
from errors import ConfigError
from experiments import (SweepSpec, audit, chain_jobs, preset_spec, run_point, run_sweep, sweep_columns,
                         sweep_row)
from reports import format_cell, read_csv


@pytest.fixture(scope="module")
def power_sweep(ref_cfg):
    return run_sweep(SweepSpec(cfg=ref_cfg, axis="p_max", values=(0.1, 1.0, 10.0), fixed=(0.0,)), workers=1)


def column(frame, mode, name):
    return [float(v) for v in frame.loc[frame["mode"] == mode, name]]


# ----------------------------------------------------------------------------
# Sweep specification
# ----------------------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"values": ()},
    {"values": (1.0, 1.0)},
    {"values": (2.0, 1.0)},
    {"values": (-1.0, 1.0)},
    {"axis": "noise"},
    {"modes": ("hapc_sr", "oma")},
    {"modes": ()},
    {"fixed": ()},
])
def test_sweep_spec_validation(ref_cfg, kwargs):
    args = dict(cfg=ref_cfg, axis="p_max", values=(0.1, 1.0), fixed=(0.0,))
    args.update(kwargs)
    with pytest.raises(ConfigError):
        SweepSpec(**args)


def test_g_min_chains_run_from_the_strictest_point(ref_cfg):
    spec = SweepSpec(cfg=ref_cfg, axis="g_min", values=(0.0, 1.0, 2.0), fixed=(0.5, 1.0))
    jobs = chain_jobs(spec)
    assert len(jobs) == 2
    assert [p[0] for p in jobs[0].points] == [2, 1, 0]
    assert jobs[1].points[0] == (2, 1.0, 2.0)


def test_unknown_preset(ref_cfg):
    with pytest.raises(ConfigError):
        preset_spec("fig5", ref_cfg)


def test_fig4a_preset(ref_cfg):
    spec = preset_spec("fig4a", ref_cfg)
    assert spec.axis == "p_max"
    assert len(spec.values) == 10
    assert spec.values[0] == pytest.approx(0.01, rel=1e-12)
    assert spec.values[-1] == pytest.approx(10.0, rel=1e-12)
    assert np.allclose(np.diff(np.log10(spec.values)), 1.0 / 3.0)
    assert spec.fixed == (settings.G_MIN_FIXED,)
    assert spec.modes == ("hapc_sr", "sr_baseline")


def test_fig4b_preset_follows_reachable_gain(ref_cfg):
    spec = preset_spec("fig4b", ref_cfg)
    g_max = max_rate_gain(ProblemSpec.build(ref_cfg, settings.P_MAX_FIXED))
    assert spec.axis == "g_min"
    assert len(spec.values) == settings.G_MIN_POINTS
    assert spec.values[0] == 0.0
    assert spec.values[-1] == pytest.approx(settings.G_MIN_AUTO_FRACTION * g_max, rel=1e-12)
    assert spec.fixed == (settings.P_MAX_FIXED,)


def test_fig4b_preset_explicit_range(ref_cfg, monkeypatch):
    monkeypatch.setattr(settings, "G_MIN_RANGE_MAX", 3.5)
    assert preset_spec("fig4b", ref_cfg).values[-1] == 3.5


# ----------------------------------------------------------------------------
# Points
# ----------------------------------------------------------------------------

def test_zero_power_point_is_infeasible(ref_cfg):
    solution = run_point(ref_cfg, 0.0, 0.0, "hapc_sr")
    assert solution.status == STATUS_INFEASIBLE
    assert "C3" in solution.conflicts


def test_baseline_point_feasible_at_any_power(ref_cfg):
    for p_max in (0.01, 0.5):
        assert run_point(ref_cfg, p_max, 0.0, "sr_baseline").feasible


def test_point_matches_first_sweep_rows(ref_cfg, power_sweep):
    columns = sweep_columns(2)
    frame = power_sweep.frame
    for mode, index in (("hapc_sr", 0), ("sr_baseline", 1)):
        row = sweep_row(run_point(ref_cfg, 0.1, 0.0, mode), "p_max")
        assert [format_cell(row[c]) for c in columns] == list(frame.iloc[index][columns])


# ----------------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------------

def test_sweep_layout(power_sweep):
    frame = power_sweep.frame
    assert list(frame.columns) == sweep_columns(2)
    assert list(frame["mode"]) == ["hapc_sr", "sr_baseline"] * 3
    assert [float(v) for v in frame["p_max"]] == [0.1, 0.1, 1.0, 1.0, 10.0, 10.0]
    assert set(frame["axis"]) == {"p_max"}
    assert power_sweep.feasible_rows == 6
    assert not power_sweep.all_infeasible


def test_sweep_hapc_beats_traditional_sr(power_sweep):
    hapc = column(power_sweep.frame, "hapc_sr", "weighted_sum")
    baseline = column(power_sweep.frame, "sr_baseline", "weighted_sum")
    assert all(h >= b for h, b in zip(hapc, baseline))
    assert all(b >= a for a, b in zip(hapc, hapc[1:]))


def test_sweep_rows_pass_audit(ref_cfg, power_sweep):
    assert audit(power_sweep.frame, ref_cfg) == []


def test_audit_catches_tampering(ref_cfg, power_sweep):
    tampered = power_sweep.frame.copy()
    tampered.loc[0, "rate_1"] = format_cell(float(tampered.loc[0, "rate_1"]) * 1.5)
    problems = audit(tampered, ref_cfg)
    assert len(problems) == 1
    assert problems[0].startswith("row 0: rate_1")


def test_sweep_header_surfaces_calibration(power_sweep):
    text = power_sweep.to_csv()
    assert "# spreading_factor = 128" in text
    assert "# path_loss_exponent = 2.7" in text
    assert "# preset = custom" in text


def test_sweep_writes_csv(tmp_path, power_sweep):
    path = power_sweep.write(tmp_path / "sweep.csv")
    assert path.read_text(encoding="utf-8") == power_sweep.to_csv()
    assert read_csv(path).equals(power_sweep.frame)


def test_infeasible_points_stay_in_the_table(ref_cfg):
    result = run_sweep(SweepSpec(cfg=ref_cfg, axis="p_max", values=(0.0, 0.5), fixed=(0.0,),
                                 modes=("sr_baseline",)))
    statuses = list(result.frame["status"])
    assert statuses[0] == STATUS_INFEASIBLE
    assert statuses[1] != STATUS_INFEASIBLE
    assert result.frame.loc[0, "conflicts"].endswith("C4")


def test_all_infeasible_sweep(ref_cfg):
    result = run_sweep(SweepSpec(cfg=ref_cfg, axis="g_min", values=(1e6, 2e6), fixed=(1.0,),
                                 modes=("sr_baseline",)))
    assert result.all_infeasible


def test_sweep_is_deterministic(ref_cfg, power_sweep):
    again = run_sweep(SweepSpec(cfg=ref_cfg, axis="p_max", values=(0.1, 1.0, 10.0), fixed=(0.0,)), workers=1)
    assert again.to_csv() == power_sweep.to_csv()


@pytest.mark.slow
def test_parallel_sweep_matches_serial(ref_cfg, ref_spec):
    g_max = max_rate_gain(ref_spec)
    spec = SweepSpec(cfg=ref_cfg, axis="p_max", values=(0.5, 1.0), fixed=(0.0, 0.3 * g_max))
    assert run_sweep(spec, workers=2).to_csv() == run_sweep(spec, workers=1).to_csv()


@pytest.mark.slow
def test_gain_floor_sweep_is_non_increasing(ref_cfg, ref_spec):
    g_max = max_rate_gain(ref_spec)
    values = tuple(float(v) for v in np.linspace(0.0, 0.9 * g_max, 4))
    result = run_sweep(SweepSpec(cfg=ref_cfg, axis="g_min", values=values, fixed=(1.0,), modes=("hapc_sr",)))
    objective = [round(v, 9) for v in column(result.frame, "hapc_sr", "weighted_sum")]
    assert all(b <= a for a, b in zip(objective, objective[1:]))


# ----------------------------------------------------------------------------
# Preset acceptance sweeps
# ----------------------------------------------------------------------------

@pytest.mark.slow
def test_fig4a_trend(ref_cfg):
    result = run_sweep(preset_spec("fig4a", ref_cfg))
    hapc = column(result.frame, "hapc_sr", "weighted_sum")
    baseline = column(result.frame, "sr_baseline", "weighted_sum")
    assert len(hapc) == 10
    assert all(b >= a for a, b in zip(hapc, hapc[1:]))
    assert all(h > b for h, b in zip(hapc, baseline))
    assert hapc[-1] > 1.05 * baseline[-1]
    assert audit(result.frame, ref_cfg) == []


@pytest.mark.slow
def test_fig4a_runs_are_byte_identical(ref_cfg, tmp_path):
    first = run_sweep(preset_spec("fig4a", ref_cfg, output=tmp_path / "a.csv"))
    second = run_sweep(preset_spec("fig4a", ref_cfg, output=tmp_path / "b.csv"))
    assert first.spec.output.read_bytes() == second.spec.output.read_bytes()


@pytest.mark.slow
def test_fig4b_trend(ref_cfg):
    result = run_sweep(preset_spec("fig4b", ref_cfg))
    for mode in ("hapc_sr", "sr_baseline"):
        objective = [round(v, 9) for v in column(result.frame, mode, "weighted_sum")]
        assert all(b <= a for a, b in zip(objective, objective[1:]))


@pytest.mark.slow
def test_fig4c_gain_meets_floor(ref_cfg):
    result = run_sweep(preset_spec("fig4c", ref_cfg))
    frame = result.frame
    feasible = frame[frame["status"] != STATUS_INFEASIBLE]
    assert len(feasible) > 0
    for _, row in feasible.iterrows():
        g_min, gain = float(row["g_min"]), float(row["rate_gain"])
        assert gain >= g_min - settings.FEASIBILITY_TOL * max(1.0, float(row["rate_source"]), g_min)
        if math.isclose(float(row["p_max"]), settings.P_MAX_FIXED):
            assert gain - g_min <= max(0.01 * g_min, 1.0)
