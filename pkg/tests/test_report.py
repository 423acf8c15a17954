import csv
import json
import re

import pytest

from hardystein.core import IdentityReport
from hardystein.report import CSV_COLUMNS, emit_report, exhaustion_svg, report_row, write_plots


def _rep(**kw):
    base = dict(identity_id="H2U", lhs=1 / 3, rhs=1 / 3 + 1e-11, lhs_method="exact-kernel-integral",
                error_budget=[("lhs-quadrature", 1e-12), ("rhs-quadrature", 5e-10)], experiment_id="desk", d=1,
                alpha=1.0, p=2.0, runtime_ms=12.5, details={"exhaustion": [0.2, 0.3, 0.33], "n": 3})
    base.update(kw)
    return IdentityReport.from_sides(**base)


def test_csv_columns_and_one_row(tmp_path):
    path = emit_report([_rep()], "csv", tmp_path / "r.csv")
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS == ("experiment_id", "identity", "d", "alpha", "p", "lhs", "rhs",
                                             "abs_err", "rel_err", "budget", "lhs_method", "seed", "runtime_ms")
    assert len(rows) == 2
    row = dict(zip(rows[0], rows[1]))
    assert float(row["lhs"]) == 1 / 3 and row["seed"] == "" and row["runtime_ms"] == "12.5"


def test_csv_without_timing_is_blank(tmp_path):
    path = emit_report([_rep()], "csv", tmp_path / "r.csv", timing=False)
    row = list(csv.DictReader(open(path)))[0]
    assert row["runtime_ms"] == ""
    assert report_row(_rep(), timing=False)["runtime_ms"] is None


def test_json_round_trip(tmp_path):
    rep = _rep(seed=7)
    path = emit_report([rep, _rep(experiment_id="b")], "json", tmp_path / "r.json")
    data = json.loads(path.read_text())
    assert len(data) == 2
    rec = data[0]
    assert rec["lhs"] == rep.lhs and rec["rhs"] == rep.rhs and rec["seed"] == 7
    assert rec["error_budget"] == [[n, b] for n, b in rep.error_budget]
    assert rec["budget"] == rep.budget and rec["passed"] is True
    assert rec["details"] == {"exhaustion": [0.2, 0.3, 0.33], "n": 3}
    assert json.loads(json.dumps(data)) == data


def test_emit_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], "csv", tmp_path / "r.csv")
    with pytest.raises(ValueError):
        emit_report([_rep()], "xml", tmp_path / "r.xml")
    with pytest.raises(OSError):
        emit_report([_rep()], "csv", tmp_path / "missing" / "r.csv")


def test_svg_polyline_is_nondecreasing():
    vals = [0.2, 0.28, 0.31, 0.325, 0.331, 0.333]
    svg = exhaustion_svg(vals, "monotone", reference=1 / 3)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    pts = re.search(r'<polyline[^>]*points="([^"]+)"', svg).group(1).split()
    xs = [float(p.split(",")[0]) for p in pts]
    ys = [float(p.split(",")[1]) for p in pts]
    assert len(pts) == len(vals)
    assert all(b > a for a, b in zip(xs, xs[1:]))
    # screen y grows downward
    assert all(b <= a for a, b in zip(ys, ys[1:]))


def test_svg_errors_and_single_point():
    with pytest.raises(ValueError):
        exhaustion_svg([], "empty")
    with pytest.raises(ValueError):
        exhaustion_svg([1.0, float("nan")], "nan")
    assert "<polyline" in exhaustion_svg([1.0], "one & <two>")


def test_write_plots(tmp_path):
    reps = [_rep(), _rep(experiment_id="flat", details={}),
            _rep(identity_id="krickeberg", experiment_id="k",
                 details={"f_sequence_x0": [0.1, 0.2], "g_sequence_x0": [0.1, 0.2], "norm1": 2 / 3})]
    written = write_plots(reps, tmp_path)
    assert sorted(p.name for p in written) == ["desk_exhaustion.svg", "k_exhaustion.svg"]
