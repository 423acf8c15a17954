import csv
from pathlib import Path

import pytest

from hardystein import cli

CONFIGS = Path(__file__).resolve().parents[1] / "scripts" / "configs"

DESK = """schema_version = 1

[[experiment]]
id = "h2u-desk"
identity = "H2U"
alpha = 1.0
p = 2
domain = { center = [0.0], radius = 1.0 }
x0 = [0.0]
u = { kind = "poisson-extension", pieces = [[1.0, 2.0, 1.0]] }
"""

EXIT = """schema_version = 1

[defaults]
seed = 3

[[experiment]]
id = "cauchy"
identity = "exit-law"
alpha = 1.0
domain = { center = [0.0], radius = 1.0 }
n = 20000

[[experiment]]
id = "cauchy-wos"
identity = "exit-law"
alpha = 1.0
domain = { center = [0.0], radius = 1.0 }
x0 = [0.5]
n = 5000
ks_tol = 0.03
"""


def _write(tmp_path, text, name="c.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _run(tmp_path, sub, text, *extra, out="out"):
    cfg = _write(tmp_path, text)
    return cli.main([sub, "--config", str(cfg), "--out", str(tmp_path / out), *extra])


def test_verify_desk_case(tmp_path, capsys):
    assert _run(tmp_path, "verify", DESK) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "verify.csv")))
    assert len(rows) == 1
    row = rows[0]
    assert row["identity"] == "H2U" and row["experiment_id"] == "h2u-desk"
    assert float(row["abs_err"]) <= float(row["budget"])
    assert float(row["lhs"]) == pytest.approx(1 / 3) and row["runtime_ms"] == ""
    assert "PASS h2u-desk" in capsys.readouterr().out


def test_shipped_desk_config(tmp_path):
    assert cli.main(["verify", "--config", str(CONFIGS / "h2u_desk.toml"), "--out", str(tmp_path)]) == 0


def test_json_and_timing(tmp_path):
    import json
    assert _run(tmp_path, "verify", DESK, "--format", "json", "--timing") == 0
    rec = json.loads((tmp_path / "out" / "verify.json").read_text())[0]
    assert rec["runtime_ms"] > 0 and rec["error_budget"]


def test_sample_is_reproducible(tmp_path):
    outs = []
    for k, jobs in enumerate(("1", "1", "2")):
        assert _run(tmp_path, "sample", EXIT, "--seed", "7", "--jobs", jobs, out=f"o{k}") == 0
        outs.append([(tmp_path / f"o{k}" / n).read_bytes()
                     for n in ("sample.csv", "cauchy_samples.csv", "cauchy-wos_samples.csv")])
    assert outs[0] == outs[1] == outs[2]
    assert _run(tmp_path, "sample", EXIT, "--seed", "8", out="o9") == 0
    assert (tmp_path / "o9" / "cauchy_samples.csv").read_bytes() != outs[0][1]


def test_failed_report_exits_one(tmp_path):
    text = EXIT.replace("n = 20000", "n = 20000\nks_tol = 1e-9")
    assert _run(tmp_path, "sample", text) == 1
    rows = list(csv.DictReader(open(tmp_path / "out" / "sample.csv")))
    assert len(rows) == 2


def test_numerical_failure_is_flagged(tmp_path, monkeypatch):
    def boom(spec):
        raise FloatingPointError("overflow in the inner integral")
    monkeypatch.setattr(cli, "verify", boom)
    assert _run(tmp_path, "verify", DESK) == 1
    row = list(csv.DictReader(open(tmp_path / "out" / "verify.csv")))[0]
    assert row["lhs"] == "nan" and row["identity"] == "H2U"


@pytest.mark.parametrize("text,line,fragment", [
    (DESK.replace("alpha = 1.0", "alpha = 1.0\ncolour = 3"), 7, "unknown key 'colour'"),
    (DESK.replace("schema_version = 1", "schema_version = 2"), 1, "schema_version"),
    (DESK.replace("p = 2", "p = 3"), 7, "p must be 2"),
    (DESK.replace('identity = "H2U"', 'identity = "H9"'), 5, "unknown identity"),
    (DESK.replace("alpha = 1.0", "alpha = 2.5"), 6, "alpha"),
    (DESK.replace('kind = "poisson-extension"', 'kind = "spline"'), 10, "spline"),
    (DESK + "\n[defaults]\nsed = 1\n", 13, "unknown key 'sed'"),
    (DESK.replace("x0 = [0.0]", "x0 = [0.0"), 10, "invalid TOML"),
    ("schema_version = 1\n", 1, "no [[experiment]]"),
])
def test_invalid_config_exits_two(tmp_path, capsys, text, line, fragment):
    assert _run(tmp_path, "verify", text) == 2
    err = capsys.readouterr().err
    assert f"c.toml:{line}:" in err and fragment in err
    assert not (tmp_path / "out").exists()


def test_identity_not_run_by_subcommand(tmp_path, capsys):
    assert _run(tmp_path, "krickeberg", DESK) == 2
    assert "not run by 'krickeberg'" in capsys.readouterr().err


def test_validation_is_total_before_running(tmp_path, monkeypatch):
    calls = []
    monkeypatch.setattr(cli, "verify", lambda spec: calls.append(spec))
    bad = DESK + DESK.replace('id = "h2u-desk"', 'id = "second"').replace("schema_version = 1", "") \
        .replace("p = 2", "p = 0.5")
    assert _run(tmp_path, "verify", bad) == 2
    assert calls == []


def test_duplicate_ids_and_missing_file(tmp_path, capsys):
    dup = DESK + DESK.replace("schema_version = 1", "")
    assert _run(tmp_path, "verify", dup) == 2
    assert "duplicate" in capsys.readouterr().err
    assert cli.main(["verify", "--config", str(tmp_path / "none.toml")]) == 2


def test_bad_jobs_flag(tmp_path):
    assert _run(tmp_path, "verify", DESK, "--jobs", "0") == 2
