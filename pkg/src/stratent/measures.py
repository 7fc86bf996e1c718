"""Rectifiable components and stratified probability measures.

A :class:`RectifiableComponent` is the pushforward ``f_*(r L^m)`` of a parameter
density ``r`` through a chart ``f``. Its density with respect to ``H^m`` on the
carrier ``f(A)`` is ``(r / J_m f) o f^{-1}``, and its entropy follows from the
area formula:

    H_{H^m}(f_* rho) = H_{L^m}(r) + E_r[ln J_m f].

A :class:`StratifiedMeasure` is a convex combination ``sum q_i rho_i`` of such
measures with strictly increasing dimensions (standard form). Its density with
respect to ``mu = sum H^{m_i}|_{E_i}`` is ``q_i drho_i/dmu_i`` on ``E_i``, which
gives the chain rule

    H_mu(rho) = H(q) + sum q_i H_{mu_i}(rho_i).

Components sharing a dimension are merged into one stratum whose conditional
law is a mixture over disjoint carriers.
"""

import warnings
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import xlogy

from .charts import make_chart
from .densities import ProductDensity, make_density
from .errors import (
    CarrierOverlapWarning,
    ConfigError,
    ContractError,
    NumericError,
    SingularPointError,
    WeightNormalizationWarning,
)
from .gmt_core import Chart, affine_image, chart_measure, product_chart
from .quadrature import FINE_SCHEME, integrate

WEIGHT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RectifiableComponent:
    """One rectifiable probability measure: a chart plus a parameter density."""

    chart: Chart
    density: object
    label: str = ""

    def __post_init__(self):
        if not self.density.domain.same_as(self.chart.domain):
            raise ContractError(f"component '{self.label}': density and chart domains differ")
        if not self.label:
            object.__setattr__(self, "label", self.chart.label)

    @property
    def dim(self):
        return self.chart.dim

    @property
    def ambient_dim(self):
        return self.chart.ambient_dim

    def log_hausdorff_density(self, params):
        """``ln(r / J)`` at parameters, i.e. the log density w.r.t. ``H^m``."""
        params = np.asarray(params, dtype=float)
        if params.ndim == 1:
            params = params.reshape(1, self.dim)
        if self.dim == 0:
            return np.zeros(len(params))
        J = np.atleast_1d(self.chart.area_factor_at(params))
        if np.any(J <= 0):
            raise SingularPointError(f"component '{self.label}': zero area factor at a sample parameter")
        return self.density.logpdf(params) - np.log(J)

    def hausdorff_density(self, params):
        return np.exp(self.log_hausdorff_density(params))

    def constant_hausdorff_density(self):
        """The density w.r.t. ``H^m`` when it is constant on the carrier, else None."""
        if self.dim == 0:
            return 1.0
        if self.density.is_uniform and self.chart.constant_jacobian:
            J = float(self.chart.area_factor_at(self.chart.domain.center))
            return 1.0 / (self.density.volume * J)
        return None


@dataclass(frozen=True, eq=False)
class Stratum:
    """Components of one dimension with conditional weights (disjoint carriers)."""

    dim: int
    components: tuple
    weights: np.ndarray

    def sample(self, rng, n):
        if len(self.components) == 1:
            pieces = np.zeros(n, dtype=int)
        else:
            pieces = rng.choice(len(self.components), size=n, p=self.weights)
        params = np.empty((n, self.dim))
        for j, comp in enumerate(self.components):
            idx = np.flatnonzero(pieces == j)
            if idx.size:
                params[idx] = comp.density.sample(rng, idx.size)
        return pieces, params

    def points(self, pieces, params):
        d = self.components[0].ambient_dim
        out = np.empty((len(pieces), d))
        for j, comp in enumerate(self.components):
            idx = np.flatnonzero(pieces == j)
            if idx.size:
                out[idx] = comp.chart(params[idx])
        return out

    def log_density(self, pieces, params):
        """``ln drho_i/dmu_i`` (no stratum weight) at the given draws."""
        out = np.empty(len(pieces))
        for j, comp in enumerate(self.components):
            idx = np.flatnonzero(pieces == j)
            if idx.size:
                out[idx] = np.log(self.weights[j]) + comp.log_hausdorff_density(params[idx])
        return out

    def constant_density(self):
        values = [c.constant_hausdorff_density() for c in self.components]
        if any(v is None for v in values):
            return None
        values = np.asarray(values) * self.weights
        if np.allclose(values, values[0], rtol=1e-12, atol=0):
            return float(values[0])
        return None

    def entropy(self, scheme=None):
        mix = float(-np.sum(xlogy(self.weights, self.weights)))
        return mix + sum(w * component_entropy(c, scheme) for w, c in zip(self.weights, self.components))

    def carrier_measure(self, scheme=None):
        return sum(chart_measure(c.chart, scheme)[0] for c in self.components)


class StratifiedMeasure:
    """A stratified probability measure in standard form.

    Parameters
    ----------
    components : sequence of RectifiableComponent
    weights : sequence of float
        Strictly positive, summing to one within ``1e-9``.
    check_disjoint : bool
        Spot-check carrier disjointness by sampling (warning on overlap).
    description : dict, optional
        The description the measure was built from, kept for reports.

    Attributes
    ----------
    strata : tuple of Stratum
        One per distinct dimension, in increasing dimension.
    q : ndarray
        Stratum weights, the law of the stratum label Y.
    dims : ndarray of int
    """

    def __init__(self, components, weights, check_disjoint=True, description=None, seed=0):
        components = tuple(components)
        weights = np.asarray(weights, dtype=float)
        if not components:
            raise ContractError("a stratified measure needs at least one component")
        if weights.shape != (len(components),):
            raise ContractError("need one weight per component")
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise ContractError("weights must be strictly positive (standard form)")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ContractError(f"weights sum to {weights.sum():.12g}, not 1")
        d = {c.ambient_dim for c in components}
        if len(d) != 1:
            raise ContractError(f"components live in different ambient dimensions {sorted(d)}")
        self.components = components
        self.weights = weights / weights.sum()
        self.ambient_dim = d.pop()
        self.description = description

        strata, q = [], []
        for m in sorted({c.dim for c in components}):
            idx = [i for i, c in enumerate(components) if c.dim == m]
            w = self.weights[idx]
            strata.append(Stratum(m, tuple(components[i] for i in idx), w / w.sum()))
            q.append(w.sum())
        self.strata = tuple(strata)
        self.q = np.asarray(q)
        self.dims = np.array([s.dim for s in strata], dtype=int)
        if check_disjoint and len(components) > 1:
            self._check_disjoint(seed)

    @property
    def k(self):
        return len(self.strata)

    def __repr__(self):
        parts = ", ".join(f"{qi:.4g}*[{s.dim}]" for qi, s in zip(self.q, self.strata))
        return f"StratifiedMeasure({parts})"

    def _check_disjoint(self, seed, n=1000, tol=1e-12):
        rng = np.random.default_rng(seed)
        clouds = [c.chart(c.density.sample(rng, n)) for c in self.components]
        for i in range(len(clouds)):
            tree = cKDTree(clouds[i])
            for j in range(i + 1, len(clouds)):
                dist, _ = tree.query(clouds[j], k=1)
                if dist.min() <= tol:
                    warnings.warn(
                        f"carriers of components '{self.components[i].label}' and "
                        f"'{self.components[j].label}' share sampled points",
                        CarrierOverlapWarning,
                        stacklevel=3,
                    )

    def is_constant_density(self):
        return all(s.constant_density() is not None for s in self.strata)


@dataclass(frozen=True)
class Sample:
    """One draw: ambient point, stratum index (the label Y), parameter, piece."""

    point: np.ndarray
    component_index: int
    param: np.ndarray
    piece: int = 0


class SampleSet(Sequence):
    """Batch of draws stored column-wise; iterates as :class:`Sample` objects.

    ``params`` is padded with NaN beyond each stratum's dimension.
    """

    def __init__(self, measure, labels, pieces, params, points):
        self.measure = measure
        self.labels = np.asarray(labels, dtype=int)
        self.pieces = np.asarray(pieces, dtype=int)
        self.params = np.asarray(params, dtype=float)
        self.points = np.asarray(points, dtype=float)

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return SampleSet(self.measure, self.labels[i], self.pieces[i], self.params[i], self.points[i])
        lab = int(self.labels[i])
        m = self.measure.strata[lab].dim
        return Sample(self.points[i], lab, self.params[i, :m], int(self.pieces[i]))


def _rng(seed):
    return np.random.default_rng(seed)


def sample_stratum(measure, index, n, rng):
    """Draw ``n`` parameters from stratum ``index``; returns ``(pieces, params)``."""
    return measure.strata[index].sample(rng, n)


def sample(measure, n, seed=0):
    """Draw ``n`` i.i.d. samples: label ``Y ~ q``, then the stratum's law.

    Deterministic given ``seed`` (an int or a ``numpy.random.Generator``).
    """
    if n < 1:
        raise ContractError("sample size must be at least 1")
    rng = _rng(seed)
    labels = rng.choice(measure.k, size=n, p=measure.q) if measure.k > 1 else np.zeros(n, dtype=int)
    m_max = int(measure.dims.max())
    params = np.full((n, m_max), np.nan)
    pieces = np.zeros(n, dtype=int)
    points = np.empty((n, measure.ambient_dim))
    for i, stratum in enumerate(measure.strata):
        idx = np.flatnonzero(labels == i)
        if not idx.size:
            continue
        pc, pr = stratum.sample(rng, idx.size)
        pieces[idx] = pc
        params[idx, :stratum.dim] = pr
        points[idx] = stratum.points(pc, pr)
    return SampleSet(measure, labels, pieces, params, points)


def make_samples(measure, labels, params, pieces=None):
    """Wrap explicit draws (labels and parameters) as a :class:`SampleSet`."""
    labels = np.asarray(labels, dtype=int)
    n = len(labels)
    pieces = np.zeros(n, dtype=int) if pieces is None else np.asarray(pieces, dtype=int)
    params = np.asarray(params, dtype=float).reshape(n, -1)
    points = np.empty((n, measure.ambient_dim))
    for i, stratum in enumerate(measure.strata):
        idx = np.flatnonzero(labels == i)
        if idx.size:
            points[idx] = stratum.points(pieces[idx], params[idx, :stratum.dim])
    return SampleSet(measure, labels, pieces, params, points)


def log_density_at(measure, samples):
    """``ln drho/dmu`` at each sample: ``ln q_i + ln drho_i/dmu_i``."""
    if isinstance(samples, Sample):
        samples = make_samples(measure, [samples.component_index],
                               np.atleast_2d(samples.param) if samples.param.size else np.zeros((1, 0)),
                               [samples.piece])
        return float(log_density_at(measure, samples)[0])
    labels = samples.labels
    if labels.size and (labels.min() < 0 or labels.max() >= measure.k):
        raise ContractError("sample component index out of range for this measure")
    out = np.empty(len(labels))
    for i, stratum in enumerate(measure.strata):
        idx = np.flatnonzero(labels == i)
        if idx.size:
            out[idx] = np.log(measure.q[i]) + stratum.log_density(
                samples.pieces[idx], samples.params[idx, :stratum.dim])
    return out


def density_at(measure, samples):
    """Density of the measure w.r.t. ``mu = sum H^{m_i}|_{E_i}`` at samples.

    A single :class:`Sample` gives a float; a :class:`SampleSet` an array.
    """
    out = log_density_at(measure, samples)
    return float(np.exp(out)) if np.ndim(out) == 0 else np.exp(out)


def component_entropy(component, scheme=None):
    """``H_{L^m}(r) + E_r[ln J_m f]``, the entropy relative to ``H^m`` on the carrier."""
    if component.dim == 0:
        return 0.0
    h_leb = component.density.entropy(scheme)
    if not np.isfinite(h_leb):
        raise NumericError(f"component '{component.label}': differential entropy term is not finite")
    chart = component.chart
    if chart.constant_jacobian:
        J = float(chart.area_factor_at(chart.domain.center))
        if J <= 0:
            raise NumericError(f"component '{component.label}': E[ln J] term diverges (J = 0)")
        return h_leb + float(np.log(J))

    def integrand(x):
        p = component.density.pdf(x)
        J = np.atleast_1d(chart.area_factor_at(x))
        with np.errstate(divide="ignore"):
            return np.where(p > 0, p * np.log(J), 0.0)

    try:
        e_lnj, _ = integrate(integrand, chart.domain.box, scheme, chart.domain.membership)
    except NumericError as exc:
        raise NumericError(f"component '{component.label}': E[ln J] term diverges") from exc
    return h_leb + e_lnj


class EntropyTerms(NamedTuple):
    total: float
    mixture_term: float
    conditional_term: float


class MarginalLaw(NamedTuple):
    q: np.ndarray
    entropy: float


class MCEstimate(NamedTuple):
    estimate: float
    stderr: float


def marginal_law(measure):
    """Law of the stratum label Y and its discrete entropy ``H(Y)``."""
    q = measure.q.copy()
    return MarginalLaw(q, float(-np.sum(xlogy(q, q))) + 0.0)


def stratified_entropy(measure, scheme=None):
    """Chain-rule decomposition ``H_mu(rho) = H(Y) + H(X|Y)``.

    ``conditional_term`` is ``H(X|Y) = sum q_i H_{mu_i}(rho_i)``.
    """
    mixture = marginal_law(measure).entropy
    conditional = float(sum(qi * s.entropy(scheme) for qi, s in zip(measure.q, measure.strata)))
    return EntropyTerms(mixture + conditional, mixture, conditional)


def direct_entropy(measure, scheme=None):
    """``-int ln(drho/dmu) drho`` by quadrature of the full density, no decomposition.

    Returns ``(value, error)``. Used as the independent side of chain-rule checks.
    """
    scheme = scheme or FINE_SCHEME
    total, error = 0.0, 0.0
    for qi, stratum in zip(measure.q, measure.strata):
        for wj, comp in zip(stratum.weights, stratum.components):
            c = qi * wj
            if comp.dim == 0:
                total -= c * np.log(c)
                continue
            chart, dens = comp.chart, comp.density

            def integrand(x, c=c, chart=chart, dens=dens):
                p = dens.pdf(x)
                J = np.atleast_1d(chart.area_factor_at(x))
                with np.errstate(divide="ignore", invalid="ignore"):
                    val = -c * p * (np.log(c * p) - np.log(J))
                return np.where(p > 0, val, 0.0)

            v, e = integrate(integrand, chart.domain.box, scheme, chart.domain.membership)
            total += v
            error += e
    return float(total), float(error)


def mc_entropy(measure, n=10_000, seed=0):
    """Monte Carlo mean and standard error of ``-ln drho/dmu`` over ``n`` draws."""
    if n < 2:
        raise ContractError("mc_entropy needs n >= 2")
    values = -log_density_at(measure, sample(measure, n, seed))
    spread = values.std(ddof=1)
    if spread < 1e-13 * max(1.0, abs(values.mean())):
        spread = 0.0
    return MCEstimate(float(values.mean()), float(spread / np.sqrt(n)))


def expected_dimension(measure):
    """``E(D) = sum q_i m_i``."""
    return float(np.dot(measure.q, measure.dims))


def product_component(first, second, label=None):
    """The product measure ``rho_1 (x) rho_2`` on the product chart."""
    chart = product_chart(first.chart, second.chart)
    density = ProductDensity(first.density, second.density, domain=chart.domain)
    return RectifiableComponent(chart, density, label or f"{first.label}x{second.label}")


def product_measure_check(first, second, scheme=None):
    """``|H^(m1+m2)(S1 x S2) - H^m1(S1) H^m2(S2)|`` with the product side by quadrature."""
    prod = product_component(first, second).chart
    if prod.dim == 0:
        lhs = 1.0
    else:
        lhs, _ = integrate(prod.area_factor_at, prod.domain.box, scheme, prod.domain.membership)
    rhs = chart_measure(first.chart, scheme)[0] * chart_measure(second.chart, scheme)[0]
    return abs(lhs - rhs)


def transform_component(component, matrix=None, offset=None, scale=1.0):
    chart = affine_image(component.chart, matrix, offset, scale)
    return RectifiableComponent(chart, component.density, component.label)


def transform_measure(measure, matrix=None, offset=None, scale=1.0):
    """Apply ``x -> scale * matrix @ x + offset`` to every carrier."""
    comps = [transform_component(c, matrix, offset, scale) for c in measure.components]
    return StratifiedMeasure(comps, measure.weights, check_disjoint=False)


_COMPONENT_KEYS = {"chart", "density", "weight", "label"}


def _component_from_description(entry, path):
    if not isinstance(entry, dict):
        raise ConfigError("component must be a mapping", path=path)
    for key in entry:
        if key not in _COMPONENT_KEYS:
            raise ConfigError(f"unknown key '{key}'", path=f"{path}.{key}")
    chart_desc = entry.get("chart")
    if not isinstance(chart_desc, dict) or "name" not in chart_desc:
        raise ConfigError("component needs a chart mapping with a 'name'", path=f"{path}.chart")
    params = {k: v for k, v in chart_desc.items() if k != "name"}
    chart = make_chart(chart_desc["name"], path=f"{path}.chart", **params)
    dens_desc = entry.get("density", {"family": "uniform"})
    if not isinstance(dens_desc, dict) or "family" not in dens_desc:
        raise ConfigError("density needs a 'family'", path=f"{path}.density")
    dparams = {k: v for k, v in dens_desc.items() if k != "family"}
    try:
        density = make_density(dens_desc["family"], chart.domain, **dparams)
    except ConfigError as exc:
        raise ConfigError(exc.message, path=f"{path}.{exc.path}" if exc.path else path) from exc
    if density.dim and density.dim <= 3 and chart.domain.membership is None:
        try:
            density.check_normalization()
        except ContractError as exc:
            raise ConfigError(str(exc), path=f"{path}.density") from exc
    return RectifiableComponent(chart, density, str(entry.get("label", "")))


def measure_from_description(desc, path="measure"):
    """Build a :class:`StratifiedMeasure` from a plain description.

    ``desc`` is ``{"components": [...]}`` or the list itself; each entry is
    ``{"chart": {"name": ..., **params}, "density": {"family": ..., **params},
    "weight": w, "label": optional}``. Weights are rescaled to sum to one, with a
    :class:`WeightNormalizationWarning` when they are off by more than ``1e-9``.
    """
    if isinstance(desc, dict):
        extra = set(desc) - {"components"}
        if extra:
            raise ConfigError(f"unknown key '{sorted(extra)[0]}'", path=f"{path}.{sorted(extra)[0]}")
        entries = desc.get("components")
        path = f"{path}.components"
    else:
        entries = desc
    if not isinstance(entries, list) or not entries:
        raise ConfigError("measure needs a nonempty list of components", path=path)
    comps, weights = [], []
    for i, entry in enumerate(entries):
        where = f"{path}[{i}]"
        comps.append(_component_from_description(entry, where))
        w = entry.get("weight", 1.0 if len(entries) == 1 else None)
        if w is None:
            raise ConfigError("component needs a 'weight'", path=f"{where}.weight")
        try:
            w = float(w)
        except (TypeError, ValueError):
            raise ConfigError("weight must be a number", path=f"{where}.weight") from None
        if not w > 0:
            raise ConfigError("weights must be strictly positive", path=f"{where}.weight")
        weights.append(w)
    weights = np.asarray(weights)
    total = weights.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        warnings.warn(f"component weights sum to {total:.12g}; rescaled to 1",
                      WeightNormalizationWarning, stacklevel=2)
    plain = desc if isinstance(desc, dict) else {"components": desc}
    return StratifiedMeasure(comps, weights / total, description=plain)
