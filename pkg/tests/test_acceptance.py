"""Exit criteria of the package, one test per criterion.

The terminal summary prints one PASS/FAIL line per criterion. Two criteria
contain a claim that does not hold at the stated finite sizes; those tests
assert everything that does hold and then mark the remainder as an expected
failure with the measured numbers.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy.special import xlogy

from stratent import charts
from stratent.densities import Polynomial, TruncatedExponential, Uniform
from stratent.disintegration import (
    ProjectionSpec,
    chain_rule_residual,
    coarea_chain_rule_terms,
    disintegrate_product,
)
from stratent.experiments import ExperimentConfig, run_aep, run_theorem
from stratent.gmt_core import area_factor, chart_measure, coarea_factor, compose
from stratent.measures import (
    RectifiableComponent,
    StratifiedMeasure,
    component_entropy,
    expected_dimension,
    mc_entropy,
    stratified_entropy,
)
from stratent.typicality import counts_strongly_typical, dimension_window, schedule, type_classes

from test_measures import builtin_measures

LN2 = math.log(2)
CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def unif(chart):
    return RectifiableComponent(chart, Uniform(chart.domain))


def point_segment(length):
    return StratifiedMeasure([unif(charts.point([0.0])), unif(charts.segment(0, length))], [0.5, 0.5])


def _orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@pytest.mark.acceptance(1)
def test_geometry_oracles(detail):
    th, ph = (0.3, 2.1), (0.0, 1.7)
    cases = [
        (charts.segment([0.0, 1.0], [3.0, 5.0]), 5.0),
        (charts.circle(1.7), 2 * np.pi * 1.7),
        (charts.planar_patch(), 1.0),
        (charts.sphere_patch(2.0, th, ph), 4.0 * (ph[1] - ph[0]) * (math.cos(th[0]) - math.cos(th[1]))),
    ]
    slowest = 0.0
    for chart, exact in cases:
        t0 = time.perf_counter()
        value, _ = chart_measure(chart)
        slowest = max(slowest, time.perf_counter() - t0)
        assert abs(value - exact) <= 1e-6 * exact
    assert slowest < 1.0
    detail(f"slowest {slowest:.3f} s")


@pytest.mark.acceptance(2)
def test_jacobian_identities():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        m = rng.integers(1, 4)
        d = rng.integers(m, 5)
        L = rng.standard_normal((d, m))
        c = rng.uniform(0.1, 3.0)
        a = area_factor(L)
        assert abs(a - coarea_factor(L.T)) < 1e-12 * max(1.0, a)
        assert abs(area_factor(c * L) - c ** m * a) <= 1e-10 * max(1.0, c ** m * a)
    for _ in range(100):
        u, v = rng.standard_normal((2, 3))
        assert abs(area_factor(np.stack([u, v], axis=1)) - np.linalg.norm(np.cross(u, v))) < 1e-10


@pytest.mark.acceptance(3)
def test_entropy_closed_forms(detail):
    t0 = time.perf_counter()
    L, r = 2.5, 0.7
    cases = [
        (StratifiedMeasure([unif(charts.segment(0, L))], [1.0]), math.log(L)),
        (StratifiedMeasure([unif(charts.circle(r))], [1.0]), math.log(2 * np.pi * r)),
        (StratifiedMeasure([unif(charts.point([1.0, 2.0]))], [1.0]), 0.0),
        (point_segment(1.0), LN2),
        (point_segment(2.0), 1.5 * LN2),
    ]
    for measure, exact in cases:
        H = stratified_entropy(measure).total
        assert abs(H - exact) < 1e-6
        est = mc_entropy(measure, 10_000, seed=3)
        assert abs(est.estimate - H) <= 4 * est.stderr + 1e-12
    assert stratified_entropy(point_segment(2.0)).total == pytest.approx(1.0397, abs=1e-4)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    detail(f"{elapsed:.2f} s")


@pytest.mark.acceptance(4)
def test_chain_rules():
    for name, measure in builtin_measures().items():
        assert chain_rule_residual(measure).residual < 1e-9, name

    sq = charts.box([0, 0], [1, 2])
    pairs = [
        (unif(charts.segment(0, 2)), unif(charts.circle(1.0))),
        (RectifiableComponent(sq, TruncatedExponential(sq.domain, [1.0, -0.5])),
         RectifiableComponent(charts.helix(c=0.3), TruncatedExponential(charts.helix(c=0.3).domain, 0.4))),
    ]
    for a, b in pairs:
        r = disintegrate_product(a, b)
        assert abs(r.total_entropy - (component_entropy(a) + component_entropy(b))) < 1e-6

    # projection of a non-uniform density on [0, 1] x [0, 2]
    comp = RectifiableComponent(sq, Polynomial(sq.domain, [[0.5, 1.0], [1.0, 1.0]]))
    r = coarea_chain_rule_terms(comp, ProjectionSpec(2, (0,)))
    assert abs(r.total_entropy - r.base_entropy - r.conditional_entropy) < 1e-4
    # x + y on the unit square: the base law is triangular on [0, 2]
    r = coarea_chain_rule_terms(unif(charts.box([0, 0], [1, 1])), [[1.0, 1.0]])
    tri = lambda t: np.where(t < 1, t, 2 - t)
    base = sp_integrate.quad(lambda t: -xlogy(tri(t), tri(t)), 0, 2, points=[1.0])[0]
    assert abs(r.base_entropy - base) < 1e-4
    assert abs(r.total_entropy - r.base_entropy - r.conditional_entropy) < 1e-4


@pytest.mark.acceptance(5)
def test_weak_aep_at_desk_scale(detail):
    t0 = time.perf_counter()
    r = run_aep(ExperimentConfig(point_segment(2.0), n_values=12, delta=0.15)).records[0]
    assert r["p_w"] >= 1 - r["epsilon_observed"] - 1e-15
    assert r["sandwich_pass"] and r["prop1_lower"] <= r["mu_w"] <= r["prop1_upper"]
    rep = run_aep(ExperimentConfig(point_segment(1.0), n_values=range(1, 21), delta=0.1, trials=500))
    assert all(x["mu_w"] == 2.0 ** x["n"] for x in rep.records)
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    detail(f"mu(W) = {r['mu_w']:.6g} in [{r['prop1_lower']:.6g}, {r['prop1_upper']:.6g}], {elapsed:.2f} s")


@pytest.mark.acceptance(6)
def test_stratified_aep_at_desk_scale(detail):
    t0 = time.perf_counter()
    measure = point_segment(2.0)
    rep = run_theorem(ExperimentConfig(measure, n_values=12, delta=0.15, xi=0.2))
    r = rep.records[0]
    assert r["window_pass"] and r["item1_pass"]
    # every doubly typical class, checked directly against the window
    e_d, half = expected_dimension(measure), dimension_window(measure.dims, 12, 0.2)
    assert half == pytest.approx(12 ** 0.7)
    for d in map(int, r["dimension_histogram"]):
        assert abs(d - 12 * e_d) <= half
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    margin = 2 * r["mass_proxy_stderr"]
    if r["mass_proxy"] < 1 - (r["epsilon_n"] + margin):
        wide = run_theorem(ExperimentConfig(measure, n_values=12, delta=0.3, xi=0.2)).records[0]
        pytest.xfail(
            f"window and item 1 hold; at delta = 0.15 the mass proxy is {r['mass_proxy']:.4f} "
            f"(exact {3498 / 4096:.4f}) < 1 - eps_n = {1 - r['epsilon_n']:.4f}, since eps_n bounds only "
            f"the strong-typicality failure; at delta = 0.3 it is {wide['mass_proxy']:.4f}")
    detail(f"{elapsed:.2f} s")


@pytest.mark.acceptance(7)
def test_schedule_and_containment():
    # independent recomputation of the schedule
    n, xi, k = 100, 0.1, 2
    eta = math.exp((-0.5 + xi) * math.log(n))
    expected = (eta, k * eta * math.log(1 / eta), 2 * k * math.exp(-2 * n * eta * eta))
    got = schedule(n, xi, k)
    assert all(abs(a - b) < 1e-4 for a, b in zip(got, expected))
    assert all(abs(a - b) < 1e-4 for a, b in zip(got, (0.15849, 0.58399, 0.02630)))

    failures = {}
    for q0 in (0.5, 0.4, 0.3, 0.2, 0.1):
        Q = np.array([q0, 1 - q0])
        hq = -np.dot(Q, np.log(Q))
        for n in range(1, 15):
            eta, dprime, _ = schedule(n, 0.2, 2)
            for counts in type_classes(n, 2):
                if counts_strongly_typical(counts, Q, eta):
                    if not abs(-np.dot(counts, np.log(Q)) / n - hq) < dprime:
                        failures.setdefault(q0, set()).add(n)
    if failures:
        summary = ", ".join(f"Q0={q}: n in {sorted(ns)}" for q, ns in sorted(failures.items(), reverse=True))
        pytest.xfail("schedule matches; strong-implies-weak fails for " + summary +
                     " (delta'_1 = 0 makes n = 1 impossible)")


@pytest.mark.acceptance(8)
def test_lipschitz_images(detail):
    rng = np.random.default_rng(8)
    sources = [charts.sphere_patch(1.0), charts.helix(c=0.5), charts.circle(1.3),
               charts.planar_patch(), charts.graph("paraboloid", [0.0], [1.0])]
    worst = 0.0
    for i in range(20):
        src = sources[i % len(sources)]
        d = src.ambient_dim
        lip = rng.uniform(0.2, 1.0)
        q = _orthogonal(d, rng)

        def g(y, lip=lip, q=q):
            # scaled rotation, then a 1-Lipschitz squash of the first coordinate
            z = lip * y @ q.T
            return np.concatenate([np.sin(z[:, :1]), z[:, 1:]], axis=1)

        image, err = chart_measure(compose(src, g))
        source, src_err = chart_measure(src)
        bound = lip ** src.dim * source
        assert image <= bound + err + lip ** src.dim * src_err + 1e-8
        worst = max(worst, image / bound)
    detail(f"largest ratio image / bound = {worst:.8f}")


def _strip_wall_time(text, fmt):
    if fmt == "json-lines":
        lines = text.splitlines()
        head = json.loads(lines[0])
        head["provenance"].pop("wall_time")
        return [head] + lines[1:]
    return [line for line in text.splitlines() if not line.startswith("# wall_time:")]


@pytest.mark.acceptance(9)
def test_cli_determinism(tmp_path):
    jobs = [("aep", "point_segment.yaml", "json-lines"), ("theorem", "circle_patch.yaml", "json-lines"),
            ("theorem", "helix.yaml", "csv"), ("aep", "circle_patch.yaml", "csv")]
    for command, config, fmt in jobs:
        outputs = []
        for run in range(2):
            out = tmp_path / f"{command}-{config}-{run}"
            res = subprocess.run([sys.executable, "-m", "stratent", command, str(CONFIGS / config),
                                  "--seed", "11", "--format", fmt, "--out", str(out)],
                                 capture_output=True, text=True, check=False)
            assert res.returncode == 0, res.stderr
            outputs.append(_strip_wall_time(out.read_text(), fmt))
        assert outputs[0] == outputs[1]
    samples = []
    for run in range(2):
        out = tmp_path / f"sample-{run}.csv"
        subprocess.run([sys.executable, "-m", "stratent", "sample", str(CONFIGS / "circle_patch.yaml"),
                        "--seed", "7", "--out", str(out)], check=True)
        samples.append(out.read_bytes())
    assert samples[0] == samples[1]
