"""Charts of rectifiable pieces, area/coarea factors, and Hausdorff measure.

A chart is an injective Lipschitz map ``f: A -> R^d`` on a bounded parameter
domain ``A`` of dimension ``m <= d``. The ``m``-dimensional Hausdorff measure of
its image is computed with the area formula,

    H^m(f(A)) = integral over A of J_m f(x) dx,   J_m L = sqrt(det(L^T L)),

never through covering infima. All chart maps are vectorized: they take an
``(N, m)`` array of parameters and return ``(N, d)`` points.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ContractError, LipschitzBoundWarning, NumericError
from .quadrature import integrate

DEFAULT_STEP = 1e-5
INJECTIVITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ParamDomain:
    """A box in R^m, optionally cut down by a membership predicate.

    ``m = 0`` encodes a single point (R^0). ``volume`` may be declared for
    predicate-restricted domains; otherwise it is estimated when needed.
    """

    box: np.ndarray
    membership: Optional[Callable[[np.ndarray], np.ndarray]] = None
    volume: Optional[float] = None

    def __post_init__(self):
        box = np.array(self.box, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(box)):
            raise ContractError("domain box must be finite")
        if np.any(box[:, 0] >= box[:, 1]):
            raise ContractError(f"domain box needs lo < hi in every coordinate, got {box.tolist()}")
        box.setflags(write=False)
        object.__setattr__(self, "box", box)
        if self.volume is None and self.membership is None:
            object.__setattr__(self, "volume", float(np.prod(box[:, 1] - box[:, 0])))

    @classmethod
    def point(cls):
        return cls(np.zeros((0, 2)))

    @property
    def dim(self):
        return self.box.shape[0]

    @property
    def lo(self):
        return self.box[:, 0]

    @property
    def hi(self):
        return self.box[:, 1]

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x):
        x = np.atleast_2d(x)
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=1)
        if self.membership is not None:
            inside &= np.asarray(self.membership(x), dtype=bool)
        return inside

    def same_as(self, other):
        return (
            self.box.shape == other.box.shape
            and np.array_equal(self.box, other.box)
            and self.membership is other.membership
        )

    def uniform(self, rng, n, min_acceptance=1e-4):
        """Draw ``n`` uniform points, by rejection from the box when restricted."""
        if self.dim == 0:
            return np.zeros((n, 0))
        width = self.hi - self.lo
        if self.membership is None:
            return self.lo + width * rng.random((n, self.dim))
        from .errors import SamplingError

        out, total, accepted = [], 0, 0
        batch = max(1024, 2 * n)
        while accepted < n:
            x = self.lo + width * rng.random((batch, self.dim))
            keep = x[np.asarray(self.membership(x), dtype=bool)]
            total += batch
            accepted += len(keep)
            out.append(keep)
            if total >= 10 / min_acceptance and accepted / total < min_acceptance:
                raise SamplingError(
                    f"rejection acceptance rate {accepted / total:.2e} is below "
                    f"{min_acceptance:g}; use a tighter box"
                )
        return np.concatenate(out)[:n]

    def interior(self, rng, n, margin):
        """Uniform points at least ``margin`` away from the box boundary."""
        lo = self.lo + margin
        hi = self.hi - margin
        return lo + (hi - lo) * rng.random((n, self.dim))


@dataclass(frozen=True, eq=False)
class Chart:
    """An injective Lipschitz parametrization of one rectifiable piece.

    Parameters
    ----------
    domain : ParamDomain
    map : callable
        ``(N, m) -> (N, d)``.
    ambient_dim : int
        ``d``; must satisfy ``d >= m``.
    jacobian : callable or "numeric"
        ``(N, m) -> (N, d, m)``, or "numeric" for central differences.
    lipschitz_bound : float, optional
        Declared upper bound on Lip(f).
    label : str
    constant_jacobian : bool
        The area factor is constant on the domain (affine charts, circles,
        helices); lets entropy terms skip quadrature.
    reference_measure : float, optional
        Known closed-form value of H^m(f(A)), used by tests.
    check : bool
        Run the injectivity and Jacobian spot checks at construction.
    """

    domain: ParamDomain
    map: Callable[[np.ndarray], np.ndarray]
    ambient_dim: int
    jacobian: Union[Callable[[np.ndarray], np.ndarray], str] = "numeric"
    lipschitz_bound: Optional[float] = None
    label: str = ""
    constant_jacobian: bool = False
    reference_measure: Optional[float] = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        m, d = self.dim, self.ambient_dim
        if d < 1:
            raise ContractError("ambient dimension must be at least 1")
        if d < m:
            raise ContractError(f"chart '{self.label}' has m = {m} > d = {d}")
        if self.lipschitz_bound is not None and not self.lipschitz_bound > 0:
            raise ContractError("lipschitz_bound must be positive")
        if not (callable(self.jacobian) or self.jacobian == "numeric"):
            raise ContractError("jacobian must be callable or 'numeric'")
        if self.check:
            self._spot_check()

    @property
    def dim(self):
        return self.domain.dim

    def __call__(self, x):
        x2, single = _batch(x, self.dim)
        out = np.asarray(self.map(x2), dtype=float)
        return out[0] if single else out

    def jacobian_at(self, x):
        """Jacobian matrices at parameters ``x``: ``(d, m)`` or ``(N, d, m)``."""
        x2, single = _batch(x, self.dim)
        if callable(self.jacobian):
            jac = np.asarray(self.jacobian(x2), dtype=float)
        else:
            jac, _ = _fd_jacobian(self, x2, DEFAULT_STEP)
        return jac[0] if single else jac

    def area_factor_at(self, x):
        return area_factor(self.jacobian_at(x))

    def _spot_check(self, n_pairs=256, n_jac=5, seed=12345):
        rng = np.random.default_rng(seed)
        probe = self.domain.uniform(rng, 2)
        out = np.asarray(self.map(probe), dtype=float)
        if out.shape != (2, self.ambient_dim):
            raise ContractError(
                f"chart '{self.label}' map returned shape {out.shape}, "
                f"expected (2, {self.ambient_dim})"
            )
        if self.dim == 0:
            return
        a = self.domain.uniform(rng, n_pairs)
        b = self.domain.uniform(rng, n_pairs)
        far = np.linalg.norm(a - b, axis=1) > 1e-6
        gap = np.linalg.norm(self.map(a[far]) - self.map(b[far]), axis=1)
        if np.any(gap <= INJECTIVITY_TOL):
            raise ContractError(f"chart '{self.label}' appears non-injective")
        if callable(self.jacobian):
            width = self.domain.hi - self.domain.lo
            x = self.domain.interior(rng, n_jac, 0.01 * width)
            analytic = np.asarray(self.jacobian(x), dtype=float)
            numeric, _ = _fd_jacobian(self, x, DEFAULT_STEP)
            scale = 1.0 + np.abs(analytic).max()
            if np.abs(analytic - numeric).max() > 1e-5 * scale:
                raise ContractError(
                    f"chart '{self.label}': analytic Jacobian disagrees with finite differences"
                )


def _batch(x, m):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x.reshape(1, m), True
    return x, False


def _as_matrix(J):
    J = np.asarray(J, dtype=float)
    if J.ndim < 2:
        raise ContractError(f"expected a matrix, got array of shape {J.shape}")
    if not np.all(np.isfinite(J)):
        raise ContractError("matrix entries must be finite")
    return J


def _singular_product(J):
    # sqrt(det(J^T J)) as a product of singular values: stays accurate near
    # rank deficiency, where the Gram determinant loses half the digits
    if min(J.shape[-2:]) == 0:
        return np.ones(J.shape[:-2]) if J.ndim > 2 else 1.0
    out = np.prod(np.linalg.svd(J, compute_uv=False), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def area_factor(J):
    """m-dimensional Jacobian sqrt(det(J^T J)) of a ``d x m`` matrix, ``m <= d``.

    Accepts stacks ``(..., d, m)``. Vanishes (to roundoff) when ``J`` is rank deficient.
    """
    J = _as_matrix(J)
    d, m = J.shape[-2:]
    if m > d:
        raise ContractError(f"area factor needs cols <= rows, got {d}x{m}")
    return _singular_product(J)


def coarea_factor(J):
    """d-dimensional coarea factor sqrt(det(J J^T)) of a ``d x k`` matrix, ``d <= k``."""
    J = _as_matrix(J)
    d, k = J.shape[-2:]
    if d > k:
        raise ContractError(f"coarea factor needs rows <= cols, got {d}x{k}")
    return _singular_product(J)


def _fd_jacobian(chart, x, h):
    """Batched finite-difference Jacobian, O(h^2) everywhere.

    Central differences in the interior; second-order one-sided stencils for
    coordinates within ``h`` of the box boundary.
    """
    n, m = x.shape
    d = chart.ambient_dim
    jac = np.empty((n, d, m))
    one_sided = np.zeros(n, dtype=bool)
    lo, hi = chart.domain.lo, chart.domain.hi
    central = np.array([[-1.0, 0.0, 1.0], [-0.5, 0.0, 0.5]])
    forward = np.array([[0.0, 1.0, 2.0], [-1.5, 2.0, -0.5]])
    backward = np.array([[-2.0, -1.0, 0.0], [0.5, -2.0, 1.5]])
    for i in range(m):
        fwd_ok = x[:, i] + h <= hi[i]
        bwd_ok = x[:, i] - h >= lo[i]
        if np.any(~fwd_ok & ~bwd_ok) or (hi[i] - lo[i]) < 2 * h:
            raise ContractError("finite-difference step exceeds the domain width")
        stencil = np.where((fwd_ok & bwd_ok)[:, None, None], central,
                           np.where(fwd_ok[:, None, None], forward, backward))
        one_sided |= ~(fwd_ok & bwd_ok)
        acc = np.zeros((n, d))
        for j in range(3):
            shifted = x.copy()
            shifted[:, i] += h * stencil[:, 0, j]
            coef = stencil[:, 1, j]
            if np.any(coef != 0):
                acc += coef[:, None] * chart.map(shifted)
        jac[:, :, i] = acc / h
    return jac, one_sided


def numeric_jacobian(chart, x, h=DEFAULT_STEP, full_output=False):
    """Central-difference Jacobian of ``chart`` at a parameter point ``x``.

    Coordinates closer than ``h`` to the box boundary use one-sided differences;
    with ``full_output=True`` the second return value is ``{"one_sided": bool}``.
    """
    x = np.asarray(x, dtype=float).reshape(1, chart.dim)
    jac, one_sided = _fd_jacobian(chart, x, h)
    if full_output:
        return jac[0], {"one_sided": bool(one_sided[0])}
    return jac[0]


def chart_measure(chart, scheme=None):
    """Hausdorff measure H^m of the chart image via the area formula.

    Returns ``(value, error_estimate)``. A zero-dimensional chart is a single
    point and has counting measure 1.
    """
    if chart.dim == 0:
        return 1.0, 0.0
    dom = chart.domain
    if chart.constant_jacobian and dom.membership is None:
        return float(chart.area_factor_at(dom.center)) * dom.volume, 0.0
    try:
        return integrate(chart.area_factor_at, dom.box, scheme, dom.membership)
    except NumericError as exc:
        raise NumericError(f"area factor of chart '{chart.label}' is not integrable: {exc}") from exc


def lipschitz_estimate(chart, trials=2000, seed=0):
    """Sampled lower bound on Lip(f) from difference quotients.

    Half of the pairs are drawn independently over the domain, half as close
    pairs (relative separation ~1e-4) to probe the local stretching. Emits
    :class:`LipschitzBoundWarning` if the estimate exceeds the declared bound.
    """
    if trials < 2:
        raise ContractError("lipschitz_estimate needs trials >= 2")
    if chart.dim == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    dom = chart.domain
    n_far = trials // 2
    n_near = trials - n_far
    a = dom.uniform(rng, n_far)
    b = dom.uniform(rng, n_far)
    c = dom.uniform(rng, n_near)
    step = 1e-4 * (dom.hi - dom.lo) * rng.standard_normal((n_near, chart.dim))
    e = np.clip(c + step, dom.lo, dom.hi)
    x = np.concatenate([a, c])
    y = np.concatenate([b, e])
    dx = np.linalg.norm(x - y, axis=1)
    keep = dx > 0
    ratios = np.linalg.norm(chart(x[keep]) - chart(y[keep]), axis=1) / dx[keep]
    estimate = float(ratios.max()) if ratios.size else 0.0
    bound = chart.lipschitz_bound
    if bound is not None and estimate > bound * (1 + 1e-9):
        warnings.warn(
            f"chart '{chart.label}': sampled Lipschitz ratio {estimate:.6g} exceeds "
            f"declared bound {bound:.6g}",
            LipschitzBoundWarning,
            stacklevel=2,
        )
    return estimate


def compose(chart, g, g_jacobian=None, lipschitz=None, label=None, preserves_constant=False):
    """Chart ``g o f`` for a map ``g: R^d -> R^d'`` (vectorized).

    ``g_jacobian`` maps ``(N, d) -> (N, d', d)``; without it the composite uses
    numeric differentiation. ``lipschitz`` is Lip(g), multiplied into the
    declared bound when both are known.
    """
    probe = np.asarray(g(np.zeros((1, chart.ambient_dim))), dtype=float)
    d_out = probe.shape[1]

    def mapped(x):
        return g(chart.map(x))

    jac = "numeric"
    if g_jacobian is not None:
        def jac(x):
            return g_jacobian(chart.map(x)) @ chart.jacobian_at(x)

    bound = None
    if lipschitz is not None and chart.lipschitz_bound is not None:
        bound = lipschitz * chart.lipschitz_bound
    return Chart(
        domain=chart.domain,
        map=mapped,
        ambient_dim=d_out,
        jacobian=jac,
        lipschitz_bound=bound,
        label=label or f"g({chart.label})",
        constant_jacobian=chart.constant_jacobian and preserves_constant,
    )


def affine_image(chart, matrix=None, offset=None, scale=1.0, label=None):
    """Chart ``x -> scale * matrix @ f(x) + offset``.

    With an orthogonal ``matrix`` the area factor scales by ``scale**m``.
    """
    d = chart.ambient_dim
    A = np.eye(d) if matrix is None else np.asarray(matrix, dtype=float)
    b = np.zeros(A.shape[0]) if offset is None else np.asarray(offset, dtype=float)
    A = scale * A
    lip = float(np.linalg.norm(A, 2))

    def g(y):
        return y @ A.T + b

    def g_jac(y):
        return np.broadcast_to(A, (len(y),) + A.shape)

    out = compose(chart, g, g_jac, lipschitz=lip, label=label or f"affine({chart.label})",
                  preserves_constant=True)
    if chart.reference_measure is not None and A.shape[0] == d and np.allclose(A.T @ A, (scale ** 2) * np.eye(d)):
        object.__setattr__(out, "reference_measure", chart.reference_measure * scale ** chart.dim)
    return out


def product_chart(first, second, label=None):
    """Chart of ``f1(A1) x f2(A2)`` in R^(d1+d2) on the concatenated domain."""
    m1, m2 = first.dim, second.dim
    d1, d2 = first.ambient_dim, second.ambient_dim
    m1_mem, m2_mem = first.domain.membership, second.domain.membership
    membership = None
    if m1_mem is not None or m2_mem is not None:
        def membership(x):
            ok = np.ones(len(x), dtype=bool)
            if m1_mem is not None:
                ok &= np.asarray(m1_mem(x[:, :m1]), dtype=bool)
            if m2_mem is not None:
                ok &= np.asarray(m2_mem(x[:, m1:]), dtype=bool)
            return ok
    vol = None
    if first.domain.volume is not None and second.domain.volume is not None:
        vol = first.domain.volume * second.domain.volume
    domain = ParamDomain(np.concatenate([first.domain.box, second.domain.box]), membership, vol)

    def mapped(x):
        return np.concatenate([first.map(x[:, :m1]), second.map(x[:, m1:])], axis=1)

    def jac(x):
        out = np.zeros((len(x), d1 + d2, m1 + m2))
        out[:, :d1, :m1] = first.jacobian_at(x[:, :m1])
        out[:, d1:, m1:] = second.jacobian_at(x[:, m1:])
        return out

    bound = None
    if first.lipschitz_bound is not None and second.lipschitz_bound is not None:
        bound = max(first.lipschitz_bound, second.lipschitz_bound)
    ref = None
    if first.reference_measure is not None and second.reference_measure is not None:
        ref = first.reference_measure * second.reference_measure
    return Chart(
        domain=domain,
        map=mapped,
        ambient_dim=d1 + d2,
        jacobian=jac,
        lipschitz_bound=bound,
        label=label or f"{first.label}x{second.label}",
        constant_jacobian=first.constant_jacobian and second.constant_jacobian,
        reference_measure=ref,
    )
