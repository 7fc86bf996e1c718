import json
import math

import pytest

from stratent.errors import ContractError, StratentError
from stratent.experiments import ExperimentConfig, Report, emit_report, load_report, run_aep, run_theorem

LN2 = math.log(2)


def point_segment(length):
    return {"components": [
        {"chart": {"name": "point", "coords": [0.0]}, "weight": 0.5},
        {"chart": {"name": "segment", "start": [0.0], "end": [float(length)]}, "weight": 0.5},
    ]}


def tilted():
    # non-constant density, so every volume is importance-sampled
    return {"components": [
        {"chart": {"name": "point", "coords": [5.0]}, "weight": 0.4},
        {"chart": {"name": "segment", "start": [0.0], "end": [2.0]},
         "density": {"family": "truncated-exponential", "rate": 1.2}, "weight": 0.6},
    ]}


def without_time(text):
    head, *rest = text.splitlines()
    head = json.loads(head)
    head["provenance"].pop("wall_time")
    return [head] + rest


def test_constant_density_volume_is_power_of_two():
    report = run_aep(ExperimentConfig(point_segment(1), n_values=range(1, 21), delta=0.05, trials=200))
    for r in report.records:
        assert r["H"] == pytest.approx(LN2)
        assert r["p_w"] == 1.0
        assert r["mu_w"] == 2.0 ** r["n"]
        assert r["sandwich_pass"]


def test_point_segment_sandwich_at_twelve():
    r = run_aep(ExperimentConfig(point_segment(2), n_values=12, delta=0.15)).records[0]
    # W = {4 <= #segment <= 8}, each class of volume 2^k
    exact = sum(math.comb(12, k) * 2 ** k for k in range(4, 9))
    assert r["mu_w"] == pytest.approx(exact)
    assert r["H"] == pytest.approx(1.5 * LN2)
    assert abs(r["p_w"] - 3498 / 4096) < 4 * r["p_w_stderr"] + 1e-12
    assert r["prop1_lower"] <= r["mu_w"] <= r["prop1_upper"]
    assert r["sandwich_pass"]


def test_single_segment_weak_set_is_everything():
    one = {"components": [{"chart": {"name": "segment", "start": [0.0], "end": [3.0]}}]}
    for n in (1, 5, 9):
        r = run_aep(ExperimentConfig(one, n_values=n, delta=1e-9, trials=100)).records[0]
        assert r["p_w"] == 1.0 and r["mu_w"] == pytest.approx(3.0 ** n)


def test_theorem_examples():
    rep = run_theorem(ExperimentConfig(point_segment(1), n_values=12, delta=0.3))
    r = rep.records[0]
    assert r["H_X_given_Y"] == pytest.approx(0.0, abs=1e-12)
    assert r["item1_worst"] <= r["item1_bound"]
    rep = run_theorem(ExperimentConfig(point_segment(2), n_values=12, delta=0.15))
    r = rep.records[0]
    assert r["H_X_given_Y"] == pytest.approx(LN2 / 2)
    assert r["item1_pass"] and r["window_pass"]
    # the strongly typical words are those with 1..11 segment draws
    assert r["strongly_typical_words"] == 4096 - 2
    assert set(r["item2_fraction"]) == {"as_printed", "natural"}
    assert not any(k.startswith("item2") and k.endswith("_pass") for k in r)


def test_theorem_single_component():
    one = {"components": [{"chart": {"name": "segment", "start": [0.0], "end": [3.0]}}]}
    r = run_theorem(ExperimentConfig(one, n_values=7, delta=0.1, trials=100)).records[0]
    assert r["window"] == pytest.approx([7 - 7 ** 0.7, 7 + 7 ** 0.7])
    assert r["window_pass"] and r["item1_pass"] and r["mass_proxy"] == 1.0


def test_determinism():
    cfg = dict(n_values=(6, 8), delta=0.3, trials=500, volume_trials=500, seed=4)
    a = run_theorem(ExperimentConfig(tilted(), **cfg))
    b = run_theorem(ExperimentConfig(tilted(), **cfg))
    assert without_time(emit_report(a, None)) == without_time(emit_report(b, None))
    assert a.records == b.records


def test_brute_force_and_monte_carlo_agree():
    common = dict(n_values=6, delta=0.3, trials=4000, volume_trials=20_000, seed=2)
    bf = run_aep(ExperimentConfig(tilted(), mode="brute-force", **common)).records[0]
    mc = run_aep(ExperimentConfig(tilted(), mode="monte-carlo", **common)).records[0]
    assert abs(bf["mu_w"] - mc["mu_w"]) <= 4 * math.hypot(bf["mu_w_stderr"], mc["mu_w_stderr"])
    assert bf["p_w"] == mc["p_w"]


def test_weak_probability_monotone_in_delta():
    ps = [run_aep(ExperimentConfig(tilted(), n_values=8, delta=d, trials=2000, volume_trials=50,
                                   mode="monte-carlo")).records[0]["p_w"]
          for d in (0.05, 0.1, 0.2, 0.4, 0.8)]
    assert ps == sorted(ps)


def test_json_lines_round_trip(tmp_path):
    rep = run_aep(ExperimentConfig(point_segment(2), n_values=(4, 6), trials=300))
    path = emit_report(rep, tmp_path / "sub" / "r.jsonl")
    back = load_report(path)
    assert (back.experiment, back.config, back.records, back.provenance) == \
        (rep.experiment, rep.config, rep.records, rep.provenance)


def test_report_schema_and_formats():
    rep = run_aep(ExperimentConfig(point_segment(2), n_values=(3, 5), trials=300))
    keys = {"n", "p_w", "p_w_stderr", "mu_w", "mu_w_stderr", "prop1_lower", "prop1_upper",
            "H_Y", "H_X_given_Y", "sandwich_pass"}
    assert all(keys <= set(r) and all(v is not None for k, v in r.items() if k in keys)
               for r in rep.records)
    csv_text = emit_report(rep, None, "csv")
    body = [line for line in csv_text.splitlines() if not line.startswith("#")]
    assert len(body) == 1 + len(rep.records)
    assert emit_report(rep, None, "human-text").rstrip().endswith("overall: PASS")


def test_empty_report_has_header_only(tmp_path):
    rep = Report("aep", {"seed": 0}, [], {"seed": 0, "version": "x", "wall_time": 0.0})
    text = emit_report(rep, None)
    assert len(text.splitlines()) == 1 and json.loads(text)["record"] == "header"
    assert load_report(emit_report(rep, tmp_path / "e.jsonl")).records == []
    assert "# seed: 0" in emit_report(rep, None, "csv")
    assert rep.passed


def test_io_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    rep = Report("aep", {}, [], {})
    with pytest.raises(StratentError, match="file"):
        emit_report(rep, blocker / "r.jsonl")


def test_brute_force_cap():
    charts = [{"name": "point", "coords": [9.0, 9.0, 9.0]},
              {"name": "segment", "start": [0.0, 0.0, 5.0], "end": [1.0, 0.0, 5.0]},
              {"name": "planar-patch"},
              {"name": "box", "lo": [2.0, 2.0, 2.0], "hi": [3.0, 3.0, 3.0]}]
    many = {"components": [{"chart": c, "weight": 0.25} for c in charts]}
    with pytest.raises(ContractError, match="monte-carlo"):
        ExperimentConfig(many, n_values=200)
    ExperimentConfig(many, n_values=200, mode="monte-carlo")


def test_config_validation():
    with pytest.raises(ContractError):
        ExperimentConfig(point_segment(1), mode="exhaustive")
    with pytest.raises(ContractError):
        ExperimentConfig(point_segment(1), delta=0.0)
    with pytest.raises(ContractError):
        ExperimentConfig(point_segment(1), n_values=0)
