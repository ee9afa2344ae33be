import numpy as np
import pytest

from allocator import ProblemSpec, report_for
from rate_model import Allocation
from reports import (allocation_from_row, allocation_row, format_cell, format_float, rate_report_row,
                     read_csv, render_csv, report_columns, to_frame, write_csv)


@pytest.fixture
def sample_report(ref_cfg):
    alloc = Allocation(tau_bc=(0.3, 0.2), tau_ac=(0.01, 0.02), alpha=(0.9, 0.6), q=(0.05, 0.01), p_src=1.0)
    return alloc, report_for(ProblemSpec.build(ref_cfg, 1.0, 0.5), alloc)


def test_report_column_order():
    assert report_columns(2) == [
        "p_max", "g_min", "weighted_sum", "rate_source", "rate_gain",
        "rate_1", "harvested_1", "consumed_1", "rate_2", "harvested_2", "consumed_2",
        "feasible", "c1", "c2", "c3", "c4", "envelope_1", "envelope_2",
    ]


def test_floats_round_trip():
    for value in (0.1, 1e-9, 4835.123456789012, 2.0 / 3.0, -0.0):
        assert float(format_float(value)) == value


def test_cell_formatting():
    assert format_cell(True) == "true"
    assert format_cell(False) == "false"
    assert format_cell(3) == "3"
    assert format_cell(0.5) == "0.5"
    assert format_cell("hapc_sr") == "hapc_sr"


def test_report_row_matches_report(sample_report):
    _, report = sample_report
    row = rate_report_row(report)
    assert list(row) == report_columns(2)
    assert row["p_max"] == 1.0
    assert row["g_min"] == 0.5
    assert row["rate_gain"] == report.rate_gain
    assert row["rate_2"] == report.rate_device[1]
    assert row["consumed_1"] == report.ledger.consumed_j[0]
    assert row["feasible"] is report.feasible
    assert row["c4"] is True


def test_allocation_row_round_trip(sample_report):
    alloc, _ = sample_report
    cells = {k: format_cell(v) for k, v in allocation_row(alloc).items()}
    cells["p_max"] = format_cell(alloc.p_src)
    assert allocation_from_row(cells, 2) == alloc


def test_csv_text_is_stable(sample_report):
    _, report = sample_report
    frame = to_frame([rate_report_row(report)], report_columns(2))
    text = render_csv(frame, ["spreading_factor = 128"])
    assert text.startswith("# spreading_factor = 128\np_max,g_min,")
    assert "\r" not in text
    assert text.endswith("\n")
    assert text == render_csv(to_frame([rate_report_row(report)], report_columns(2)), ["spreading_factor = 128"])


def test_csv_file_reads_back(tmp_path, sample_report):
    _, report = sample_report
    row = rate_report_row(report)
    frame = to_frame([row], report_columns(2))
    path = write_csv(frame, tmp_path / "out" / "report.csv", ["one", "two"])
    assert path.read_bytes().startswith(b"# one\n# two\n")
    back = read_csv(path)
    assert list(back.columns) == report_columns(2)
    assert float(back.loc[0, "weighted_sum"]) == report.weighted_sum
    assert back.loc[0, "feasible"] == format_cell(report.feasible)


def test_envelope_cells_use_the_boolean_dialect(sample_report):
    _, report = sample_report
    frame = to_frame([rate_report_row(report)], report_columns(2))
    for column in ("feasible", "c1", "c2", "c3", "c4", "envelope_1", "envelope_2"):
        assert frame.loc[0, column] in ("true", "false")


def test_numpy_bools_format_like_python_bools():
    assert format_cell(np.bool_(True)) == "true"
    assert format_cell(np.bool_(False)) == "false"
