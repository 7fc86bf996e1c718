"""Probability densities on chart parameter domains (w.r.t. Lebesgue measure).

The families form a closed set: uniform, truncated exponential, and normalized
polynomial. The last two are products of one-dimensional factors over the box
coordinates, so sampling is by coordinatewise inverse CDF. Uniform densities on
predicate-restricted domains are sampled by rejection from the box.
"""

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import xlogy
from scipy.stats import qmc

from .errors import ContractError, NumericError
from .gmt_core import ParamDomain
from .quadrature import integrate

NORMALIZATION_TOL = 1e-6


class ParamDensity:
    """Base class. Subclasses define ``pdf``, ``sample`` and ``family``."""

    family = "abstract"

    def __init__(self, domain):
        if not isinstance(domain, ParamDomain):
            raise ContractError("density domain must be a ParamDomain")
        self.domain = domain

    @property
    def dim(self):
        return self.domain.dim

    @property
    def is_uniform(self):
        return False

    def pdf(self, x):
        raise NotImplementedError

    def sample(self, rng, n):
        raise NotImplementedError

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def entropy(self, scheme=None):
        """Differential entropy -int p ln p, by quadrature unless overridden."""
        if self.dim == 0:
            return 0.0
        value, _ = integrate(lambda x: -xlogy(self.pdf(x), self.pdf(x)), self.domain.box,
                             scheme, self.domain.membership)
        return value

    def total_mass(self, scheme=None):
        if self.dim == 0:
            return 1.0
        value, _ = integrate(self.pdf, self.domain.box, scheme, self.domain.membership)
        return value

    def check_normalization(self, scheme=None):
        mass = self.total_mass(scheme)
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ContractError(f"{self.family} density integrates to {mass:.9g}, not 1")
        return mass

    def describe(self):
        return {"family": self.family}


class Uniform(ParamDensity):
    """Uniform density ``1 / vol(A)``."""

    family = "uniform"

    def __init__(self, domain, qmc_points=2 ** 16):
        super().__init__(domain)
        if domain.dim == 0:
            self.volume = 1.0
        elif domain.volume is not None:
            self.volume = float(domain.volume)
        else:
            self.volume = _restricted_volume(domain, qmc_points)
        if not self.volume > 0:
            raise ContractError("uniform density needs a domain of positive volume")

    @property
    def is_uniform(self):
        return True

    def pdf(self, x):
        x = np.atleast_2d(x)
        out = np.full(len(x), 1.0 / self.volume)
        if self.domain.membership is not None:
            out[~self.domain.contains(x)] = 0.0
        return out

    def logpdf(self, x):
        return np.full(len(np.atleast_2d(x)), -np.log(self.volume))

    def sample(self, rng, n):
        return self.domain.uniform(rng, n)

    def entropy(self, scheme=None):
        return float(np.log(self.volume))


def _restricted_volume(domain, n_points):
    sobol = qmc.Sobol(domain.dim, scramble=True, seed=0)
    x = qmc.scale(sobol.random(n_points), domain.lo, domain.hi)
    frac = np.mean(domain.contains(x))
    return float(frac * np.prod(domain.hi - domain.lo))


class _ProductOfFactors(ParamDensity):
    """Product of independent one-dimensional factors on a box."""

    def __init__(self, domain):
        super().__init__(domain)
        if domain.membership is not None:
            raise ContractError(f"{self.family} density requires a plain box domain")

    def _factor_pdf(self, i, t):
        raise NotImplementedError

    def _factor_ppf(self, i, u):
        raise NotImplementedError

    def _factor_entropy(self, i):
        raise NotImplementedError

    def pdf(self, x):
        x = np.atleast_2d(x)
        out = np.ones(len(x))
        for i in range(self.dim):
            out *= self._factor_pdf(i, x[:, i])
        inside = self.domain.contains(x)
        return np.where(inside, out, 0.0)

    def sample(self, rng, n):
        u = rng.random((n, self.dim))
        return np.stack([self._factor_ppf(i, u[:, i]) for i in range(self.dim)], axis=1) \
            if self.dim else np.zeros((n, 0))

    def entropy(self, scheme=None):
        return float(sum(self._factor_entropy(i) for i in range(self.dim)))


def _per_coordinate(value, m, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(m, float(arr))
    if arr.shape != (m,):
        raise ContractError(f"{name} must be a scalar or have one entry per coordinate")
    return arr


class TruncatedExponential(_ProductOfFactors):
    """Density proportional to ``exp(-rate_i (x_i - lo_i))`` in each coordinate.

    Negative rates tilt mass toward the upper end; rate 0 is uniform.
    """

    family = "truncated-exponential"

    def __init__(self, domain, rate=1.0):
        super().__init__(domain)
        self.rate = _per_coordinate(rate, domain.dim, "rate")
        if not np.all(np.isfinite(self.rate)):
            raise ContractError("rates must be finite")
        self.width = domain.hi - domain.lo

    def _log_norm(self, i):
        lam, w = self.rate[i], self.width[i]
        if lam == 0:
            return np.log(w)
        # Z = (1 - exp(-lam w)) / lam, positive for either sign of lam
        return np.log(-np.expm1(-lam * w) / lam)

    def _factor_pdf(self, i, t):
        lam = self.rate[i]
        return np.exp(-lam * (t - self.domain.lo[i]) - self._log_norm(i))

    def _factor_ppf(self, i, u):
        lam, w, lo = self.rate[i], self.width[i], self.domain.lo[i]
        if lam == 0:
            return lo + w * u
        return lo - np.log1p(u * np.expm1(-lam * w)) / lam

    def _factor_entropy(self, i):
        lam, w = self.rate[i], self.width[i]
        if lam == 0:
            return float(np.log(w))
        mean_offset = 1.0 / lam - w / np.expm1(lam * w)
        return float(self._log_norm(i) + lam * mean_offset)

    def describe(self):
        return {"family": self.family, "rate": self.rate.tolist()}


class Polynomial(_ProductOfFactors):
    """Normalized polynomial density, a product of per-coordinate factors.

    ``coefficients`` are in increasing degree in the raw coordinate; a single
    list applies to every coordinate, a list of lists gives one per coordinate.
    Each factor must be nonnegative on its interval.
    """

    family = "polynomial"

    def __init__(self, domain, coefficients=(1.0,)):
        super().__init__(domain)
        coeffs = coefficients
        if len(coeffs) and np.ndim(coeffs[0]) == 0:
            coeffs = [coeffs] * domain.dim
        if len(coeffs) != domain.dim:
            raise ContractError("need one coefficient list per coordinate")
        self.coefficients = [list(map(float, c)) for c in coeffs]
        self._polys, self._cdfs = [], []
        for i, c in enumerate(self.coefficients):
            a, b = domain.lo[i], domain.hi[i]
            p = np.polynomial.Polynomial(c)
            _check_nonnegative(p, a, b)
            P = p.integ(lbnd=a)
            z = P(b)
            if not z > 0:
                raise ContractError("polynomial factor has zero mass on its interval")
            self._polys.append(p / z)
            self._cdfs.append(P / z)

    def _factor_pdf(self, i, t):
        return self._polys[i](t)

    def _factor_ppf(self, i, u):
        a, b = self.domain.lo[i], self.domain.hi[i]
        lo = np.full_like(u, a)
        hi = np.full_like(u, b)
        cdf = self._cdfs[i]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def _factor_entropy(self, i):
        a, b = self.domain.lo[i], self.domain.hi[i]
        p = self._polys[i]
        roots = [r.real for r in p.roots() if abs(r.imag) < 1e-12 and a < r.real < b]
        value, err = sp_integrate.quad(lambda t: -xlogy(p(t), p(t)), a, b,
                                       points=roots or None, limit=200, epsabs=1e-12)
        if not np.isfinite(value):
            raise NumericError("polynomial entropy quadrature diverged")
        return float(value)

    def describe(self):
        return {"family": self.family, "coefficients": self.coefficients}


def _check_nonnegative(p, a, b):
    crit = [r.real for r in p.deriv().roots() if abs(r.imag) < 1e-12 and a <= r.real <= b] \
        if p.degree() > 1 else []
    probe = np.array([a, b] + crit + list(np.linspace(a, b, 257)))
    if np.min(p(probe)) < -1e-12 * max(1.0, np.max(np.abs(p(probe)))):
        raise ContractError("polynomial density is negative somewhere on its interval")


class ProductDensity(ParamDensity):
    """Density of independent parameters ``(x1, x2)`` on the concatenated domain.

    Its entropy is computed by quadrature of the joint density, not by summing
    the factor entropies, so that tensorization can be checked.
    """

    family = "product"

    def __init__(self, first, second, domain=None):
        if domain is None:
            domain = ParamDomain(np.concatenate([first.domain.box, second.domain.box]))
        super().__init__(domain)
        self.first, self.second = first, second
        self._m1 = first.dim

    @property
    def is_uniform(self):
        return self.first.is_uniform and self.second.is_uniform

    def pdf(self, x):
        x = np.atleast_2d(x)
        return self.first.pdf(x[:, :self._m1]) * self.second.pdf(x[:, self._m1:])

    def sample(self, rng, n):
        return np.concatenate([self.first.sample(rng, n), self.second.sample(rng, n)], axis=1)

    def describe(self):
        return {"family": self.family, "factors": [self.first.describe(), self.second.describe()]}


DENSITY_FAMILIES = {
    "uniform": (Uniform, ()),
    "truncated-exponential": (TruncatedExponential, ("rate",)),
    "polynomial": (Polynomial, ("coefficients",)),
}


def make_density(family, domain, **params):
    from .errors import ConfigError

    if family not in DENSITY_FAMILIES:
        raise ConfigError(f"unknown density family '{family}'; choose from {sorted(DENSITY_FAMILIES)}",
                          path="density.family")
    cls, allowed = DENSITY_FAMILIES[family]
    for key in params:
        if key not in allowed:
            raise ConfigError(f"unknown parameter '{key}' for density '{family}'", path=f"density.{key}")
    if domain.dim == 0:
        if family != "uniform":
            raise ConfigError("a zero-dimensional component only admits the uniform density",
                              path="density.family")
        return Uniform(domain)
    try:
        density = cls(domain, **params)
    except ContractError as exc:
        raise ConfigError(str(exc), path="density") from exc
    return density
