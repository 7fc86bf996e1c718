"""Numerical integration over parameter boxes.

Boxes of dimension at most ``QuadratureScheme.max_adaptive_dim`` are handled by
adaptive tensor-product Gauss-Kronrod cubature (``scipy.integrate.cubature``).
Higher dimensions, and domains restricted by a membership predicate, fall back
to plain Monte Carlo with a standard-error estimate.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cubature

from .errors import NumericError


@dataclass(frozen=True)
class QuadratureScheme:
    """Settings for :func:`integrate`.

    Parameters
    ----------
    atol, rtol : float
        Absolute and relative error targets of the adaptive rule.
    rule : str
        Any rule name accepted by ``scipy.integrate.cubature``.
    max_subdivisions : int
        Cap on adaptive refinements.
    max_adaptive_dim : int
        Boxes of larger dimension are integrated by Monte Carlo.
    mc_samples : int
        Sample count of the Monte Carlo fallback.
    seed : int
        Seed of the Monte Carlo fallback.
    """

    atol: float = 1e-8
    rtol: float = 1e-12
    rule: str = "gauss-kronrod"
    max_subdivisions: int = 10_000
    max_adaptive_dim: int = 3
    mc_samples: int = 200_000
    seed: int = 0


DEFAULT_SCHEME = QuadratureScheme()
# Used for identities that must hold to ~1e-9 or better.
FINE_SCHEME = QuadratureScheme(atol=1e-13, rtol=1e-13, max_subdivisions=50_000)


def integrate(func, box, scheme=None, membership=None):
    """Integrate a vectorized function over an axis-aligned box.

    Parameters
    ----------
    func : callable
        Maps an ``(N, m)`` array of points to an ``(N,)`` or ``(N, p)`` array.
    box : array_like, shape (m, 2)
        Lower and upper limits per coordinate. ``m = 0`` denotes a single
        point, where the integral is the value of ``func`` there.
    scheme : QuadratureScheme, optional
    membership : callable, optional
        Predicate ``(N, m) -> bool (N,)``; the integrand is set to zero outside.
        Forces the Monte Carlo route.

    Returns
    -------
    value, error : float or ndarray
        Estimate and error estimate (standard error for Monte Carlo).
    """
    scheme = scheme or DEFAULT_SCHEME
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    m = box.shape[0]
    if m == 0:
        value = np.asarray(func(np.zeros((1, 0))), dtype=float)[0]
        _check_finite(value)
        return _scalar(value), _scalar(np.zeros_like(value))
    if membership is not None or m > scheme.max_adaptive_dim:
        return _integrate_mc(func, box, scheme, membership)

    def wrapped(x):
        out = np.asarray(func(x), dtype=float)
        _check_finite(out)
        return out

    res = cubature(
        wrapped,
        box[:, 0],
        box[:, 1],
        rule=scheme.rule,
        atol=scheme.atol,
        rtol=scheme.rtol,
        max_subdivisions=scheme.max_subdivisions,
    )
    return _scalar(res.estimate), _scalar(res.error)


def _integrate_mc(func, box, scheme, membership):
    rng = np.random.default_rng(scheme.seed)
    lo, hi = box[:, 0], box[:, 1]
    volume = float(np.prod(hi - lo))
    x = lo + (hi - lo) * rng.random((scheme.mc_samples, box.shape[0]))
    vals = np.asarray(func(x), dtype=float)
    if membership is not None:
        inside = np.asarray(membership(x), dtype=bool)
        vals = np.where(inside.reshape((-1,) + (1,) * (vals.ndim - 1)), vals, 0.0)
    _check_finite(vals)
    mean = vals.mean(axis=0)
    stderr = vals.std(axis=0, ddof=1) / np.sqrt(len(vals))
    return _scalar(volume * mean), _scalar(volume * stderr)


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        raise NumericError("non-finite integrand values encountered")


def _scalar(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


@lru_cache(maxsize=32)
def gauss_legendre(order):
    """Nodes and weights of the ``order``-point Gauss-Legendre rule on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre_grid(box, order=32):
    """Fixed tensor-product Gauss-Legendre nodes and weights on a box.

    Returns ``(points, weights)`` with shapes ``(order**m, m)`` and
    ``(order**m,)``. For ``m = 0`` a single empty point with weight 1.
    """
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    m = box.shape[0]
    if m == 0:
        return np.zeros((1, 0)), np.ones(1)
    t, w = gauss_legendre(order)
    half = 0.5 * (box[:, 1] - box[:, 0])
    mid = 0.5 * (box[:, 1] + box[:, 0])
    axes = [mid[i] + half[i] * t for i in range(m)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    wts = np.ones(1)
    for i in range(m):
        wts = np.multiply.outer(wts, half[i] * w).ravel()
    return pts, wts
