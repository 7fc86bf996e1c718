"""Desk-scale experiment runners for the AEP sandwich and the stratified AEP.

Both runners loop over sequence lengths ``n`` and work per type class: every
quantity attached to a label word ``y`` depends on ``y`` only through its
counts, so brute-force mode enumerates the ``C(n + k - 1, k - 1)`` count
vectors and weights each by its multinomial size. Monte Carlo mode replaces
the enumeration by sampling.

Each work item draws from its own stream, seeded by
``SeedSequence([seed, n, item])``, so results do not depend on execution order.
"""

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ContractError, StratentError
from .measures import (
    StratifiedMeasure,
    expected_dimension,
    log_density_at,
    measure_from_description,
    sample,
    stratified_entropy,
)
from .typicality import (
    TypicalityParams,
    counts_strongly_typical,
    dimension_window,
    item2_thresholds,
    prop1_bounds,
    type_class_count,
    type_class_size,
    type_classes,
    volume_from_counts,
)

BRUTE_FORCE_CAP = 10 ** 6
MODES = ("brute-force", "monte-carlo")
FORMATS = ("json-lines", "csv", "human-text")


@dataclass
class ExperimentConfig:
    """Inputs of :func:`run_aep` and :func:`run_theorem`.

    ``measure`` is a :class:`StratifiedMeasure` or a description accepted by
    :func:`measure_from_description`. ``volume_trials`` is the number of
    importance-sampling draws per type class; ``eps_user`` is the slack of the
    per-stratum lower threshold reported by :func:`run_theorem`.
    """

    measure: object
    n_values: tuple = (12,)
    delta: float = 0.15
    xi: float = 0.2
    trials: int = 10_000
    seed: int = 0
    mode: str = "brute-force"
    volume_trials: int = 4000
    eps_user: float = 0.1
    out: str = None
    format: str = "json-lines"

    def __post_init__(self):
        if not isinstance(self.measure, StratifiedMeasure):
            self.measure = measure_from_description(self.measure)
        self.n_values = tuple(int(n) for n in np.atleast_1d(self.n_values))
        if any(n < 1 for n in self.n_values):
            raise ContractError("sequence lengths must be positive")
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}")
        if self.format not in FORMATS:
            raise ContractError(f"format must be one of {FORMATS}")
        if self.trials < 2 or self.volume_trials < 2:
            raise ContractError("need at least 2 trials")
        if self.delta <= 0:
            raise ContractError("delta must be positive")
        if self.mode == "brute-force":
            for n in self.n_values:
                count = type_class_count(n, self.measure.k)
                if count > BRUTE_FORCE_CAP:
                    raise ContractError(
                        f"brute force at n = {n} needs {count} type classes (cap {BRUTE_FORCE_CAP}); "
                        "use mode 'monte-carlo'")

    def as_dict(self):
        return {
            "measure": self.measure.description,
            "n_values": list(self.n_values),
            "delta": self.delta,
            "xi": self.xi,
            "trials": self.trials,
            "seed": self.seed,
            "mode": self.mode,
            "volume_trials": self.volume_trials,
            "eps_user": self.eps_user,
        }


@dataclass
class Report:
    """Per-``n`` records plus the configuration and provenance that produced them.

    Every record is a flat-ish dict of JSON-native values. Keys ending in
    ``_pass`` are the asserted bound checks; :attr:`passed` is their conjunction.
    """

    experiment: str
    config: dict
    records: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v for r in self.records for k, v in r.items() if k.endswith("_pass"))

    def failures(self):
        return [(r.get("n"), k) for r in self.records for k, v in r.items()
                if k.endswith("_pass") and not v]


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def _rng(seed, n, item):
    return np.random.default_rng(np.random.SeedSequence([seed, n, item]))


def _log(x):
    return math.log(x) if x > 0 else -math.inf


def _sequence_logs(measure, n, trials, rng):
    """``ln drho/dmu`` for ``trials`` i.i.d. sequences, shape ``(trials, n)``, and labels."""
    draws = sample(measure, n * trials, rng)
    return log_density_at(measure, draws).reshape(trials, n), draws.labels.reshape(trials, n)


def _weak_fraction(logs, H, delta):
    inside = np.abs(-logs.mean(axis=1) - H) < delta
    p = float(inside.mean())
    return p, math.sqrt(max(p * (1 - p), 0.0) / len(logs)), inside


def _provenance(config, start):
    return {"seed": config.seed, "version": __version__, "wall_time": round(time.time() - start, 6)}


def run_aep(config):
    """Weak-typicality probability and the ``mu^n(W)`` sandwich for each ``n``.

    Records hold ``p_w`` (fraction of ``trials`` sequences in ``W``) with its
    standard error, the estimate ``mu_w`` of ``mu^{(x)n}(W)`` with standard error,
    and the bounds with ``eps = 1 - p_w``. ``sandwich_pass`` compares after
    inflating the estimate by two standard errors in the favourable direction.
    """
    start = time.time()
    m = config.measure
    terms = stratified_entropy(m)
    H = terms.total
    report = Report("aep", _jsonable(config.as_dict()))
    for n in config.n_values:
        params = TypicalityParams(n, config.delta, config.xi, m.k)
        logs, _ = _sequence_logs(m, n, config.trials, _rng(config.seed, n, 0))
        p_w, p_se, _ = _weak_fraction(logs, H, config.delta)
        if config.mode == "brute-force":
            mu_w, var = 0.0, 0.0
            for idx, counts in enumerate(type_classes(n, m.k)):
                # W inside the stratum over counts, with no strong-typicality filter
                est = volume_from_counts(m, counts, params, config.volume_trials,
                                         np.random.SeedSequence([config.seed, n, 2 + idx]), H,
                                         require_strong=False)
                size = type_class_size(counts)
                mu_w += size * est.estimate
                var += (size * est.stderr) ** 2
            mu_se = math.sqrt(var)
        else:
            # importance sampling from rho^n itself: mu^n(W) = E[1_W / prod drho/dmu]
            logs_v, _ = _sequence_logs(m, n, config.volume_trials, _rng(config.seed, n, 1))
            inside = np.abs(-logs_v.mean(axis=1) - H) < config.delta
            w = np.where(inside, np.exp(-logs_v.sum(axis=1)), 0.0)
            mu_w = float(w.mean())
            mu_se = float(w.std(ddof=1) / math.sqrt(len(w)))
        eps = 1.0 - p_w
        if eps < 1:
            lower, upper = prop1_bounds(H, config.delta, n, eps)
        else:
            lower, upper = 0.0, math.exp(n * (H + config.delta))
        report.records.append(_jsonable({
            "n": n,
            "H": H,
            "delta": config.delta,
            "mode": config.mode,
            "p_w": p_w,
            "p_w_stderr": p_se,
            "epsilon_observed": eps,
            "mu_w": mu_w,
            "mu_w_stderr": mu_se,
            "log_mu_w": _log(mu_w),
            "prop1_lower": lower,
            "prop1_upper": upper,
            "log_prop1_lower": _log(lower),
            "log_prop1_upper": n * (H + config.delta),
            "H_Y": terms.mixture_term,
            "H_X_given_Y": terms.conditional_term,
            "sandwich_pass": (mu_w + 2 * mu_se >= lower) and (mu_w - 2 * mu_se <= upper),
        }))
    report.provenance = _provenance(config, start)
    return report


def _class_records(m, n, params, H, config):
    """Per type class: size, strong typicality, dimension and volume of ``T(y)``."""
    out = []
    for idx, counts in enumerate(type_classes(n, m.k)):
        if not counts_strongly_typical(counts, m.q, params.eta):
            continue
        est = volume_from_counts(m, counts, params, config.volume_trials,
                                 np.random.SeedSequence([config.seed, n, 2 + idx]), H)
        out.append((counts, type_class_size(counts), int(np.dot(counts, m.dims)), est))
    return out


def run_theorem(config):
    """Mass proxy, dimension window and per-stratum volume bounds for each ``n``.

    Flags per record:

    ``mass_proxy_pass``
        fraction of sampled sequences in ``T`` plus two standard errors is
        at least ``1 - eps_n - P(W^c)``, the union bound at finite ``n``
        (``P(W^c)`` estimated from the same sequences).
    ``window_pass``
        every doubly typical class (and every sampled doubly typical
        sequence) lies inside :func:`~stratent.typicality.dimension_window`.
    ``item1_pass``
        every strongly typical class satisfies
        ``(1/n) ln(vol + 2 stderr) <= H(X|Y) + delta + delta'_n``.

    Reported without a flag: ``mass_proxy_above_1_minus_eps_n`` (the
    comparison with ``1 - eps_n`` alone, which ignores weak-typicality
    failures and so can fail at small ``n``), the item-2 fractions under both
    threshold readings and ``(1/n) ln |A^(n)|``. In Monte Carlo mode the
    classes checked are those of the sampled sequences.
    """
    start = time.time()
    m = config.measure
    terms = stratified_entropy(m)
    H, h_cond, h_y = terms.total, terms.conditional_term, terms.mixture_term
    e_d = expected_dimension(m)
    report = Report("theorem", _jsonable(config.as_dict()))
    for n in config.n_values:
        params = TypicalityParams(n, config.delta, config.xi, m.k)
        eta, dprime, eps_n = params.eta, params.delta_prime, params.epsilon_n
        half_width = dimension_window(m.dims, n, config.xi)

        logs, labels = _sequence_logs(m, n, config.trials, _rng(config.seed, n, 0))
        p_w, _, weak = _weak_fraction(logs, H, config.delta)
        counts = np.stack([np.bincount(row, minlength=m.k) for row in labels])
        strong = np.max(np.abs(counts / n - m.q), axis=1) < eta
        doubly = weak & strong
        p_t = float(doubly.mean())
        p_t_se = math.sqrt(max(p_t * (1 - p_t), 0.0) / config.trials)
        sample_dims = counts @ m.dims
        observed = sample_dims[doubly]
        sample_hist = {str(int(d)): int(c) for d, c in zip(*np.unique(observed, return_counts=True))}

        if config.mode == "brute-force":
            classes = _class_records(m, n, params, H, config)
        else:
            seen = {tuple(c) for c in counts[strong]}
            classes = []
            for idx, c in enumerate(sorted(seen)):
                c = np.array(c)
                est = volume_from_counts(m, c, params, config.volume_trials,
                                         np.random.SeedSequence([config.seed, n, 2 + idx]), H)
                classes.append((c, type_class_size(c), int(np.dot(c, m.dims)), est))

        bound = h_cond + config.delta + dprime
        thresholds = item2_thresholds(h_cond, config.eps_user, config.delta, dprime)
        a_size = sum(size for _, size, _, _ in classes)
        typical_hist, log_vols, item1_ok, window_ok = {}, [], True, True
        above = {key: 0 for key in thresholds}
        worst_item1 = -math.inf
        for c, size, dim, est in classes:
            lhs = _log(est.estimate + 2 * est.stderr) / n
            worst_item1 = max(worst_item1, lhs)
            item1_ok &= lhs <= bound
            if est.estimate > 0:
                typical_hist[str(dim)] = typical_hist.get(str(dim), 0) + size
                window_ok &= abs(dim - n * e_d) <= half_width
                log_vols.append(_log(est.estimate) / n)
            for key, thr in thresholds.items():
                if est.estimate > 0 and _log(est.estimate) / n > thr:
                    above[key] += size
        window_ok &= bool(np.all(np.abs(observed - n * e_d) <= half_width))
        report.records.append(_jsonable({
            "n": n,
            "mode": config.mode,
            "H": H,
            "H_X_given_Y": h_cond,
            "H_Y": h_y,
            "E_D": e_d,
            "delta": config.delta,
            "xi": config.xi,
            "eta": eta,
            "delta_prime": dprime,
            "epsilon_n": eps_n,
            "p_w": p_w,
            "mass_proxy": p_t,
            "mass_proxy_stderr": p_t_se,
            "union_bound": 1 - eps_n - (1 - p_w),
            "window": [n * e_d - half_width, n * e_d + half_width],
            "dimension_histogram": typical_hist,
            "sample_dimension_histogram": sample_hist,
            "strongly_typical_classes": len(classes),
            "strongly_typical_words": a_size,
            "log_A_over_n": _log(a_size) / n,
            "log_volume_over_n": {
                "min": min(log_vols) if log_vols else None,
                "mean": float(np.mean(log_vols)) if log_vols else None,
                "max": max(log_vols) if log_vols else None,
            },
            "item1_bound": bound,
            "item1_worst": worst_item1,
            "item2_thresholds": thresholds,
            "item2_fraction": {k: (v / a_size if a_size else None) for k, v in above.items()},
            "mass_proxy_above_1_minus_eps_n": p_t + 2 * p_t_se >= 1 - eps_n,
            "mass_proxy_pass": p_t + 2 * p_t_se >= 1 - eps_n - (1 - p_w),
            "window_pass": window_ok,
            "item1_pass": item1_ok,
        }))
    report.provenance = _provenance(config, start)
    return report


# serialization

def _header(report):
    return {"record": "header", "experiment": report.experiment, "config": report.config,
            "provenance": report.provenance}


def _flat(record, prefix=""):
    out = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flat(value, f"{name}."))
        elif isinstance(value, list):
            out[name] = json.dumps(value)
        else:
            out[name] = value
    return out


def _render(report, fmt):
    if fmt == "json-lines":
        lines = [json.dumps(_header(report), sort_keys=True)]
        lines += [json.dumps(r, sort_keys=True) for r in report.records]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# experiment: {report.experiment}\n")
        for key in sorted(report.provenance):
            buf.write(f"# {key}: {report.provenance[key]}\n")
        buf.write(f"# config: {json.dumps(report.config, sort_keys=True)}\n")
        rows = [_flat(r) for r in report.records]
        fields = sorted({k for row in rows for k in row})
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        if fields:
            writer.writeheader()
            writer.writerows(rows)
        return buf.getvalue()
    if fmt == "human-text":
        lines = [f"{report.experiment} report"]
        lines += [f"  {k}: {report.provenance[k]}" for k in sorted(report.provenance)]
        for r in report.records:
            lines.append("")
            lines.append(f"n = {r.get('n')}")
            for key in sorted(r):
                if key != "n":
                    lines.append(f"  {key:28s} {json.dumps(r[key], sort_keys=True)}")
        lines.append("")
        lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"
    raise ContractError(f"format must be one of {FORMATS}")


def emit_report(report, path, format="json-lines"):
    """Write ``report`` to ``path`` (or return the text when ``path`` is None)."""
    text = _render(report, format)
    if path is None:
        return text
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise StratentError(f"cannot write report to {path}: {exc.strerror}") from exc
    return path


def load_report(path):
    """Read a json-lines report back into a :class:`Report`."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ContractError(f"{path} is empty")
    head = json.loads(lines[0])
    if head.get("record") != "header":
        raise ContractError(f"{path} does not start with a report header")
    records = [json.loads(line) for line in lines[1:] if line.strip()]
    return Report(head["experiment"], head["config"], records, head["provenance"])
