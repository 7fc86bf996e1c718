"""Weak, strong and double typicality, and typical-stratum volumes.

A sequence ``x = (x_1, ..., x_n)`` is weakly ``delta``-typical for ``rho``
(relative to ``mu``) when

    | -(1/n) sum ln drho/dmu(x_i) - H_mu(rho) | < delta.

A label word ``y`` is strongly ``(Q, eta)``-typical when its empirical
frequencies are within ``eta`` of ``Q`` in every coordinate. The schedule
``eta_n = n^(-1/2 + xi)`` makes the strongly typical set carry probability at
least ``1 - eps_n`` with ``eps_n = 2 |E_Y| exp(-2 n eta_n^2)``; its members are
weakly ``delta'_n``-typical for the label law with
``delta'_n = -|E_Y| eta_n ln eta_n``.

Labels are integers ``0 .. |E_Y| - 1`` indexing ``Q`` unless an explicit
alphabet is given.
"""

import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import NamedTuple

import numpy as np

from .errors import ContractError
from .measures import stratified_entropy


def _check_xi(xi):
    if not 0 < xi < 0.5:
        raise ContractError(f"xi must lie in (0, 1/2), got {xi}")


def schedule(n, xi, alphabet_size):
    """Return ``(eta_n, delta'_n, eps_n)`` for sequence length ``n``."""
    if n < 1:
        raise ContractError("n must be at least 1")
    _check_xi(xi)
    if alphabet_size < 1:
        raise ContractError("alphabet_size must be at least 1")
    eta = n ** (-0.5 + xi)
    delta_prime = -alphabet_size * eta * math.log(eta)
    epsilon = 2 * alphabet_size * math.exp(-2 * n * eta ** 2)
    return eta, delta_prime, epsilon


@dataclass(frozen=True)
class TypicalityParams:
    """Sequence length, weak margin ``delta``, schedule exponent ``xi`` and ``|E_Y|``."""

    n: int
    delta: float
    xi: float
    alphabet_size: int

    def __post_init__(self):
        if self.delta <= 0:
            raise ContractError("delta must be positive")
        schedule(self.n, self.xi, self.alphabet_size)

    @property
    def eta(self):
        return schedule(self.n, self.xi, self.alphabet_size)[0]

    @property
    def delta_prime(self):
        return schedule(self.n, self.xi, self.alphabet_size)[1]

    @property
    def epsilon_n(self):
        return schedule(self.n, self.xi, self.alphabet_size)[2]

    def as_dict(self):
        return {"n": self.n, "delta": self.delta, "xi": self.xi, "alphabet_size": self.alphabet_size,
                "eta": self.eta, "delta_prime": self.delta_prime, "epsilon_n": self.epsilon_n}


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Symbol counts ``N(a; y)`` of a word of length ``n``."""

    counts: dict
    n: int

    def tau(self, a):
        return self.counts.get(a, 0) / self.n

    def vector(self, alphabet):
        return np.array([self.tau(a) for a in alphabet])


def empirical(y):
    y = list(y)
    if not y:
        raise ContractError("empirical distribution of an empty sequence")
    return EmpiricalDistribution(dict(Counter(y)), len(y))


def is_weakly_typical(density_values, H, delta, log=False):
    """Weak typicality from density values (or their logs, with ``log=True``)."""
    values = np.asarray(density_values, dtype=float)
    if not np.isfinite(H):
        raise ContractError("entropy must be finite")
    if log:
        logs = values
    else:
        if np.any(values <= 0):
            raise ContractError("density values must be strictly positive")
        logs = np.log(values)
    return bool(abs(-np.mean(logs) - H) < delta)


def _frequencies(y, size, alphabet=None):
    if alphabet is None:
        y = np.asarray(y, dtype=int)
        if y.size and (y.min() < 0 or y.max() >= size):
            raise ContractError("label outside the alphabet")
        return np.bincount(y, minlength=size) / len(y)
    emp = empirical(y)
    if set(emp.counts) - set(alphabet):
        raise ContractError("label outside the alphabet")
    return emp.vector(alphabet)


def is_strongly_typical(y, Q, eta, alphabet=None):
    """True iff ``max_a |tau_y(a) - Q(a)| < eta`` (strict, max norm)."""
    Q = np.asarray(Q, dtype=float)
    if np.any(Q <= 0):
        raise ContractError("Q must have strictly positive entries")
    tau = _frequencies(y, len(Q), alphabet)
    return bool(np.max(np.abs(tau - Q)) < eta)


def counts_strongly_typical(counts, Q, eta):
    counts = np.asarray(counts)
    return bool(np.max(np.abs(counts / counts.sum() - np.asarray(Q))) < eta)


def stratum_dimension(measure, y):
    """``m(y) = sum_j dim E_{y_j}``."""
    return int(np.sum(measure.dims[np.asarray(y, dtype=int)]))


def dimension_window(dims, n, xi):
    """Half-width of the window around ``n E[D]`` holding ``m(y)`` for strongly typical ``y``.

    Because ``sum_a (tau - Q)(a) = 0``, ``|m(y) - n E[D]| < n eta_n sum_a |d_a - c|``
    for any ``c``; the median of the dimensions minimises the sum. The factor
    is floored at 1, which is exact when the dimensions span a gap of one.
    """
    dims = np.asarray(dims, dtype=float)
    spread = float(np.sum(np.abs(dims - np.median(dims))))
    return n ** (0.5 + xi) * max(1.0, spread)


def is_doubly_typical(samples, measure, params, H=None):
    """Return ``(doubly typical?, m(y))`` for a :class:`SampleSet` of length ``n``."""
    from .measures import log_density_at

    y = samples.labels
    if H is None:
        H = stratified_entropy(measure).total
    strong = is_strongly_typical(y, measure.q, params.eta)
    weak = is_weakly_typical(log_density_at(measure, samples), H, params.delta, log=True)
    return strong and weak, stratum_dimension(measure, y)


def type_classes(n, k):
    """All count vectors of length ``k`` summing to ``n``, in lexicographic order."""
    for combo in combinations_with_replacement(range(k), n):
        yield np.bincount(np.asarray(combo, dtype=int), minlength=k)


def type_class_count(n, k):
    return math.comb(n + k - 1, k - 1)


def type_class_size(counts):
    """Number of words with the given counts (a multinomial coefficient)."""
    size, left = 1, int(np.sum(counts))
    for c in counts:
        size *= math.comb(left, int(c))
        left -= int(c)
    return size


def word_from_counts(counts):
    return np.repeat(np.arange(len(counts)), counts)


class VolumeEstimate(NamedTuple):
    estimate: float
    stderr: float
    rel_stderr: float
    ci95: tuple
    low_confidence: bool
    accepted: float
    method: str


def _exact_volume(measure, counts, H, delta):
    # constant densities: the weak test and ln(vol) depend on counts only
    c = np.array([s.constant_density() for s in measure.strata])
    n = int(np.sum(counts))
    mean_log = -np.dot(counts, np.log(measure.q) + np.log(c)) / n
    inside = abs(mean_log - H) < delta
    value = float(np.exp(-np.dot(counts, np.log(c)))) if inside else 0.0
    return VolumeEstimate(value, 0.0, 0.0, (value, value), False, float(inside), "exact")


def _is_stream(measure, counts, H, delta, trials, rng):
    """Log-scaled importance weights ``1_T / prod p`` for one random stream."""
    n = int(np.sum(counts))
    log_mix = np.zeros(trials)
    log_unmixed = np.zeros(trials)
    for i, stratum in enumerate(measure.strata):
        ci = int(counts[i])
        if not ci:
            continue
        pieces, params = stratum.sample(rng, ci * trials)
        lp = stratum.log_density(pieces, params).reshape(trials, ci).sum(axis=1)
        log_unmixed += lp
        log_mix += lp + ci * np.log(measure.q[i])
    inside = np.abs(-log_mix / n - H) < delta
    return np.where(inside, -log_unmixed, -np.inf)


def stratum_volume_estimate(measure, y, params, trials=2000, seed=0, H=None, streams=1):
    """Estimate ``H^{m(y)}(T(y))``, the volume of the doubly typical stratum over ``y``.

    Draws ``x ~ rho_{y_1} (x) ... (x) rho_{y_n}`` and averages
    ``1_T(x) / prod_j drho_{y_j}/dmu_{y_j}(x_j)`` (unmixed densities, no ``q``
    factors). Words that are not strongly typical give 0. When every stratum
    has constant density the volume is exact.

    The volume depends on ``y`` only through its counts; see
    :func:`volume_from_counts`.

    Returns
    -------
    VolumeEstimate
        ``estimate, stderr, rel_stderr, ci95, low_confidence, accepted, method``.
        ``accepted`` is the fraction of draws inside ``T``; zero acceptance gives
        estimate 0 with ``low_confidence`` set.
    """
    y = np.asarray(y, dtype=int)
    if len(y) != params.n:
        raise ContractError(f"word has length {len(y)}, expected n = {params.n}")
    counts = np.bincount(y, minlength=measure.k)
    return volume_from_counts(measure, counts, params, trials, seed, H, streams)


def volume_from_counts(measure, counts, params, trials=2000, seed=0, H=None, streams=1,
                       require_strong=True):
    """:func:`stratum_volume_estimate` for the type class with the given counts.

    With ``require_strong=False`` the result is the volume of the weakly typical
    set inside the stratum, whatever the counts.
    """
    counts = np.asarray(counts, dtype=int)
    if H is None:
        H = stratified_entropy(measure).total
    if require_strong and not counts_strongly_typical(counts, measure.q, params.eta):
        return VolumeEstimate(0.0, 0.0, 0.0, (0.0, 0.0), False, 0.0, "not-strongly-typical")
    if measure.is_constant_density():
        return _exact_volume(measure, counts, H, params.delta)
    if trials < 2:
        raise ContractError("need at least 2 trials")
    # independent streams, merged by trial-weighted averaging of their means
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seqs = root.spawn(streams)
    sizes = np.full(streams, trials // streams)
    sizes[: trials % streams] += 1
    logw = np.concatenate([_is_stream(measure, counts, H, params.delta, int(s), np.random.default_rng(q))
                           for s, q in zip(sizes, seqs)])
    accepted = float(np.mean(np.isfinite(logw)))
    if accepted == 0:
        return VolumeEstimate(0.0, 0.0, np.inf, (0.0, 0.0), True, 0.0, "importance-sampling")
    shift = np.max(logw)
    w = np.exp(logw - shift)
    mean = float(np.mean(w) * np.exp(shift))
    stderr = float(np.std(w, ddof=1) / math.sqrt(len(w)) * np.exp(shift))
    rel = stderr / mean
    ci = (max(0.0, mean - 1.96 * stderr), mean + 1.96 * stderr)
    low = accepted * len(w) < 10 or rel > 0.5
    return VolumeEstimate(mean, stderr, rel, ci, bool(low), accepted, "importance-sampling")


def prop1_bounds(H, delta, n, epsilon):
    """Sandwich ``((1 - eps) e^{n(H - delta)}, e^{n(H + delta)})`` for ``mu^n(W)``."""
    if not 0 <= epsilon < 1:
        raise ContractError("epsilon must lie in [0, 1)")
    return (1 - epsilon) * math.exp(n * (H - delta)), math.exp(n * (H + delta))


def item2_thresholds(h_cond, eps_user, delta, delta_prime):
    """The per-stratum lower threshold under both sign readings.

    ``as_printed`` is ``H(X|Y) - eps + (delta + delta')``; ``natural`` is
    ``H(X|Y) - eps - (delta + delta')``.
    """
    margin = delta + delta_prime
    return {"as_printed": h_cond - eps_user + margin, "natural": h_cond - eps_user - margin}
