"""Disintegrations and entropy chain rules.

If ``nu`` has a ``(T, xi)``-disintegration ``{nu_t}`` and ``rho = r nu``, then

    H_nu(rho) = H_xi(T_* rho) + int H_{nu_t}(rho_t) dT_* rho(t).

Two instances are computed here, each side by its own quadrature route:

* product carriers ``S_A x S_B`` projected onto one factor, where the fibers
  are copies of the other factor;
* full-dimensional boxes ``E`` in R^k pushed through a linear surjection ``f``
  onto R^d (coarea case). Then ``d^E f = f``, the coarea factor
  ``F = sqrt(det(f f^T))`` is constant, and the fiber reference measures are
  ``F^{-1} H^{k-d}|_{E cap f^{-1}(t)}``. Against plain ``H^{k-d}`` the fiber
  entropies shift by ``+ln F``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import xlogy

from .errors import ContractError, ScopeError
from .gmt_core import coarea_factor
from .measures import (
    component_entropy,
    direct_entropy,
    marginal_law,
    mc_entropy,
    product_component,
)
from .quadrature import QuadratureScheme, gauss_legendre, gauss_legendre_grid, integrate


@dataclass(frozen=True)
class ProjectionSpec:
    """Coordinate projection of R^k onto the coordinates ``kept_coords``."""

    ambient_dim: int
    kept_coords: tuple

    def __post_init__(self):
        kept = tuple(int(i) for i in self.kept_coords)
        if len(set(kept)) != len(kept):
            raise ContractError("projection indices must be distinct")
        if any(i < 0 or i >= self.ambient_dim for i in kept):
            raise ContractError("projection index out of range")
        if not kept:
            raise ContractError("projection must keep at least one coordinate")
        object.__setattr__(self, "kept_coords", kept)

    def matrix(self):
        return np.eye(self.ambient_dim)[list(self.kept_coords)]


@dataclass(frozen=True)
class DisintegrationResult:
    """The two terms of a chain rule, and the entropy they should add up to."""

    base_entropy: float
    conditional_entropy: float
    total_entropy: float
    fiber_description: dict = field(default_factory=dict)

    @property
    def residual(self):
        return abs(self.total_entropy - self.base_entropy - self.conditional_entropy)


def _fiber_order(m):
    return {0: 1, 1: 48, 2: 32}.get(m, 12)


def disintegrate_product(first, second, onto=0, scheme=None):
    """Chain rule for ``rho_A (x) rho_B`` disintegrated along the projection onto one factor.

    The base term is the entropy of the marginal obtained by integrating the
    joint parameter density over the fiber; the conditional term integrates the
    fiber entropies (w.r.t. the fiber's Hausdorff measure) against that
    marginal; the total is the entropy of the product component itself.
    """
    if onto not in (0, 1):
        raise ContractError("onto must be 0 (first factor) or 1 (second factor)")
    prod = product_component(first, second)
    base, fiber = (first, second) if onto == 0 else (second, first)
    mb, mf = base.dim, fiber.dim
    s_nodes, s_wts = gauss_legendre_grid(fiber.chart.domain.box, _fiber_order(mf))
    if fiber.chart.domain.membership is not None:
        s_wts = s_wts * fiber.chart.domain.contains(s_nodes)
    J_fiber = np.atleast_1d(fiber.chart.area_factor_at(s_nodes)) if mf else np.ones(1)

    def joint(t):
        nt, ns = len(t), len(s_nodes)
        tt = np.repeat(t, ns, axis=0)
        ss = np.tile(s_nodes, (nt, 1))
        x = np.concatenate([tt, ss] if onto == 0 else [ss, tt], axis=1)
        return prod.density.pdf(x).reshape(nt, ns)

    def terms(t):
        p = joint(t)
        marg = p @ s_wts
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = p / marg[:, None]
            fiber_h = -np.sum(s_wts * (xlogy(cond, cond) - cond * np.log(J_fiber)), axis=1)
            J_base = np.atleast_1d(base.chart.area_factor_at(t)) if mb else np.ones(len(t))
            base_h = -(xlogy(marg, marg) - marg * np.log(J_base))
        good = marg > 0
        return np.stack([np.where(good, base_h, 0.0), np.where(good, marg * fiber_h, 0.0)], axis=1)

    if mb == 0:
        vals = terms(np.zeros((1, 0)))[0]
    else:
        vals, _ = integrate(terms, base.chart.domain.box, scheme, base.chart.domain.membership)
    total = component_entropy(prod, scheme)
    return DisintegrationResult(
        base_entropy=float(vals[0]),
        conditional_entropy=float(vals[1]),
        total_entropy=float(total),
        fiber_description={
            "method": "product",
            "base": base.label,
            "fiber": fiber.label,
            "base_dim": mb,
            "fiber_dim": mf,
        },
    )


def _is_identity_chart(chart, seed=7):
    if chart.dim != chart.ambient_dim:
        return False
    rng = np.random.default_rng(seed)
    x = chart.domain.uniform(rng, 16)
    return np.allclose(chart(x), x, atol=1e-12) and np.allclose(
        chart.jacobian_at(x), np.eye(chart.dim), atol=1e-9)


class _LinearFibers:
    """Fibers ``f^{-1}(t)`` of a linear map restricted to a box, codimension <= 1."""

    def __init__(self, A, lo, hi, order=48):
        self.A, self.lo, self.hi = A, lo, hi
        d, k = A.shape
        self.codim = k - d
        self.pinv = np.linalg.pinv(A)
        if self.codim == 1:
            self.normal = np.linalg.svd(A)[2][-1]
        self.nodes, self.weights = gauss_legendre(order)

    def interval(self, t):
        """Parameter interval ``[s_lo, s_hi]`` of ``A^+ t + s n`` inside the box."""
        y0 = self.pinv @ t
        n = self.normal
        s_lo, s_hi = -np.inf, np.inf
        for i in range(len(n)):
            if abs(n[i]) < 1e-15:
                if not self.lo[i] <= y0[i] <= self.hi[i]:
                    return y0, 0.0, 0.0
                continue
            a = (self.lo[i] - y0[i]) / n[i]
            b = (self.hi[i] - y0[i]) / n[i]
            s_lo, s_hi = max(s_lo, min(a, b)), min(s_hi, max(a, b))
        return y0, s_lo, max(s_lo, s_hi)

    def fiber_values(self, pdf, t):
        """Density values and quadrature weights (w.r.t. ``H^{k-d}``) along the fiber."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.codim == 0:
            y = self.pinv @ t
            inside = np.all((y >= self.lo) & (y <= self.hi))
            return (pdf(y[None, :]) if inside else np.zeros(1)), np.ones(1)
        y0, a, b = self.interval(t)
        if b <= a:
            return np.zeros(1), np.zeros(1)
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        s = mid + half * self.nodes
        y = y0[None, :] + s[:, None] * self.normal[None, :]
        return pdf(y), half * self.weights

    def pushforward_batch(self, pdf, T):
        """Integral of ``pdf`` over each fiber ``f^{-1}(t)`` (w.r.t. ``H^{k-d}``), for rows of ``T``."""
        T = np.atleast_2d(T)
        Y0 = T @ self.pinv.T
        if self.codim == 0:
            inside = np.all((Y0 >= self.lo) & (Y0 <= self.hi), axis=1)
            return np.where(inside, pdf(Y0), 0.0)
        n = self.normal
        s_lo = np.full(len(T), -np.inf)
        s_hi = np.full(len(T), np.inf)
        empty = np.zeros(len(T), dtype=bool)
        for i in range(len(n)):
            if abs(n[i]) < 1e-15:
                empty |= (Y0[:, i] < self.lo[i]) | (Y0[:, i] > self.hi[i])
                continue
            a = (self.lo[i] - Y0[:, i]) / n[i]
            b = (self.hi[i] - Y0[:, i]) / n[i]
            s_lo = np.maximum(s_lo, np.minimum(a, b))
            s_hi = np.minimum(s_hi, np.maximum(a, b))
        half = np.where(empty, 0.0, np.maximum(0.5 * (s_hi - s_lo), 0.0))
        mid = 0.5 * (s_hi + s_lo)
        mid = np.where(np.isfinite(mid), mid, 0.0)
        s = mid[:, None] + half[:, None] * self.nodes[None, :]
        y = Y0[:, None, :] + s[:, :, None] * n[None, None, :]
        vals = pdf(y.reshape(-1, len(n))).reshape(s.shape)
        return half * (vals @ self.weights)




def coarea_chain_rule_terms(component, f, scheme=None):
    """Coarea chain rule for a full-dimensional component and a linear surjection.

    Parameters
    ----------
    component : RectifiableComponent
        Must use an identity (box) chart, so ``m = k`` and ``E`` is a box.
    f : array_like, shape (d, k)
        Full-rank matrix with ``d <= 2`` and ``k - d <= 1``; a
        :class:`ProjectionSpec` is accepted too.

    Returns
    -------
    DisintegrationResult
        ``fiber_description`` holds the coarea factor ``F``, the conditional
        term against plain ``H^{k-d}`` and the method used. For ``d = 1`` the
        base and conditional terms come from separate fiber quadratures; for
        ``d = 2`` the conditional term is ``total - base`` and, in codimension
        one, the base term is accurate to about 1e-6 only.
    """
    A = f.matrix() if isinstance(f, ProjectionSpec) else np.atleast_2d(np.asarray(f, dtype=float))
    chart = component.chart
    if not _is_identity_chart(chart):
        raise ScopeError("coarea chain rule is implemented for identity (box) charts only")
    d, k = A.shape
    if k != chart.dim:
        raise ContractError(f"map has {k} columns but the component lives in R^{chart.dim}")
    if d > k:
        raise ContractError("need d <= k for a surjection")
    if np.linalg.matrix_rank(A) < d:
        raise ContractError("linear map is rank deficient")
    if d > 2:
        raise ScopeError("pushforward quadrature supports d <= 2 only")
    if k - d > 1:
        raise ScopeError("fiber quadrature supports codimension <= 1 only")
    F = float(coarea_factor(A))
    lo, hi = chart.domain.lo, chart.domain.hi
    pdf = component.density.pdf
    fibers = _LinearFibers(A, lo, hi)
    total = component_entropy(component, scheme)
    ln_f = float(np.log(F))

    def pushforward(t):
        p, w = fibers.fiber_values(pdf, t)
        return float(np.dot(w, p)) / F

    if d == 1:
        corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)], indexing="ij")).reshape(k, -1).T
        images = np.unique(np.round(corners @ A[0], 14))
        t0, t1 = images[0], images[-1]
        inner_pts = list(images[1:-1]) or None
        quad_kw = dict(points=inner_pts, limit=400, epsabs=1e-11, epsrel=1e-11)

        def base_integrand(t):
            g = pushforward(t)
            return -xlogy(g, g)

        def cond_integrand(t, plain):
            p, w = fibers.fiber_values(pdf, t)
            g = float(np.dot(w, p)) / F
            if g <= 0:
                return 0.0
            if fibers.codim == 0:
                return 0.0 if plain else -g * ln_f
            if plain:
                # density of rho_t w.r.t. H^{k-d} on the fiber
                ratio = p / (F * g)
                return -g * float(np.dot(w, xlogy(ratio, ratio)))
            # density of rho_t w.r.t. F^{-1} H^{k-d}
            ratio = p / g
            return -g * float(np.dot(w, xlogy(ratio, ratio))) / F

        base, _ = sp_integrate.quad(base_integrand, t0, t1, **quad_kw)
        cond, _ = sp_integrate.quad(cond_integrand, t0, t1, args=(False,), **quad_kw)
        cond_h, _ = sp_integrate.quad(cond_integrand, t0, t1, args=(True,), **quad_kw)
        method = "fiber-quadrature"
    elif fibers.codim == 0:
        def base_integrand(y):
            p = pdf(y)
            g = fibers.pushforward_batch(pdf, y @ A.T) / F
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(p > 0, -p * np.log(g), 0.0)

        base, _ = integrate(base_integrand, chart.domain.box, scheme)
    else:
        corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)], indexing="ij")).reshape(k, -1).T
        images = corners @ A.T
        t_box = np.stack([images.min(axis=0), images.max(axis=0)], axis=1)
        # the pushforward density has kinks along images of box edges; the
        # adaptive rule is run at a tolerance it reaches in seconds
        loose = QuadratureScheme(atol=1e-6, rtol=1e-6, max_subdivisions=20000)

        def base_integrand(t):
            g = fibers.pushforward_batch(pdf, t) / F
            return -xlogy(g, g)

        base, _ = integrate(base_integrand, t_box, loose)
    if d == 2:
        cond = total - base
        cond_h = cond + ln_f
        method = "difference"
    return DisintegrationResult(
        base_entropy=float(base),
        conditional_entropy=float(cond),
        total_entropy=float(total),
        fiber_description={
            "method": method,
            "coarea_factor": F,
            "fiber_dim": k - d,
            "conditional_entropy_hausdorff": float(cond_h),
            "matrix": A.tolist(),
        },
    )


class ChainRuleResidual(NamedTuple):
    residual: float
    stderr: float
    left: float
    right: float
    method: str


def chain_rule_residual(measure, scheme=None, use_mc=False, n=10_000, seed=0):
    """Residual of ``H_mu(rho) = H(Y) + sum q_i H_{mu_i}(rho_i)``.

    The right side sums the marginal entropy and the per-component entropies
    from the area formula. The left side is evaluated independently: by direct
    quadrature of ``-ln drho/dmu`` against ``rho`` or, with ``use_mc``, by Monte
    Carlo (then ``stderr`` is nonzero and the residual is statistical).
    """
    right = marginal_law(measure).entropy + float(
        sum(qi * s.entropy(scheme) for qi, s in zip(measure.q, measure.strata)))
    if use_mc:
        left, stderr = mc_entropy(measure, n, seed)
        method = "monte-carlo"
    else:
        left, _ = direct_entropy(measure)
        stderr = 0.0
        method = "quadrature"
    return ChainRuleResidual(abs(left - right), float(stderr), float(left), float(right), method)
