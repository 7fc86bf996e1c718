import json
import subprocess
import sys
from pathlib import Path

import pytest

from stratent.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
POINT_SEGMENT = str(CONFIGS / "point_segment.yaml")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_entropy_point_segment(capsys):
    code, out, _ = run(capsys, "entropy", POINT_SEGMENT)
    values = dict(line.split() for line in out.splitlines())
    assert code == 0
    assert float(values["total"]) == pytest.approx(1.0397207708, abs=1e-9)
    assert float(values["H_Y"]) == pytest.approx(0.6931471806, abs=1e-9)
    assert float(values["E_D"]) == pytest.approx(0.5)
    assert values["total"].startswith("1.0397")


def test_entropy_with_monte_carlo(capsys):
    code, out, _ = run(capsys, "entropy", POINT_SEGMENT, "--trials", "2000", "--format", "json-lines")
    row = json.loads(out)
    assert code == 0 and abs(row["mc_estimate"] - row["total"]) < 4 * row["mc_stderr"] + 1e-12


def test_aep_exit_zero_and_report_written(capsys, tmp_path):
    out = tmp_path / "aep.jsonl"
    code, _, err = run(capsys, "aep", POINT_SEGMENT, "--n", "12", "--out", str(out))
    assert code == 0 and err == ""
    lines = out.read_text().splitlines()
    assert json.loads(lines[0])["record"] == "header"
    assert json.loads(lines[1])["sandwich_pass"]


def test_sample_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(capsys, "sample", POINT_SEGMENT, "--seed", "7", "-n", "50", "--out", str(path))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert rows[0] == "index,stratum,label,dim,x0,t0" and len(rows) == 51
    c = tmp_path / "c.csv"
    run(capsys, "sample", POINT_SEGMENT, "--seed", "8", "-n", "50", "--out", str(c))
    assert c.read_bytes() != a.read_bytes()


def test_charts_lists_builtins(capsys):
    code, out, _ = run(capsys, "charts")
    names = [line.split()[0] for line in out.splitlines()]
    assert code == 0 and {"segment", "circle", "helix", "point"} <= set(names)


def test_chain_rule_rows(capsys):
    code, out, _ = run(capsys, "chain-rule", str(CONFIGS / "circle_patch.yaml"))
    assert code == 0 and out.startswith("stratified")
    residual = float(out.split()[2])
    assert residual < 1e-9


def test_config_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("measure:\n  components:\n    - chart: {name: torus}\n")
    code, _, err = run(capsys, "entropy", str(bad))
    assert code == 2
    assert err.count("\n") == 1 and err.startswith("stratent: error[config]: line 3")
    code, _, err = run(capsys, "entropy", str(tmp_path / "absent.yaml"))
    assert code == 2 and "not found" in err


def test_contract_error_exit_code(capsys):
    code, _, err = run(capsys, "aep", POINT_SEGMENT, "--xi", "0.7")
    assert code == 5 and err.startswith("stratent: error[contract]:")


def test_bound_failure_exit_code(capsys, monkeypatch):
    # the asserted bounds hold on every shipped config, so inject a failing report
    from stratent import cli, experiments

    def failing(config):
        return experiments.Report("theorem", {}, [{"n": 12, "item1_pass": False}], {})

    monkeypatch.setattr(cli, "run_theorem", failing)
    code, out, err = run(capsys, "theorem", POINT_SEGMENT)
    assert code == 4 and err == "stratent: error[bound]: asserted bounds failed (n=12:item1_pass)\n"
    assert out.startswith('{"config"')


def test_io_error_exit_code(capsys, tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    code, _, err = run(capsys, "entropy", POINT_SEGMENT, "--out", str(blocker / "x"))
    assert code == 1 and err.startswith("stratent: error[io]:")


def test_warning_line(capsys, tmp_path):
    cfg = tmp_path / "w.yaml"
    cfg.write_text("measure:\n  components:\n"
                   "    - chart: {name: point, coords: [0.0]}\n      weight: 0.5\n"
                   "    - chart: {name: segment, start: [0.0], end: [1.0]}\n      weight: 0.6\n")
    code, _, err = run(capsys, "entropy", str(cfg))
    assert code == 0 and err.startswith("stratent: warning:")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stratent", "entropy", POINT_SEGMENT, "--format", "csv"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout.startswith("total,mixture")
