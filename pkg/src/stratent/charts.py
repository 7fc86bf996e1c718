"""Built-in charts, addressable by name from measure descriptions.

Every constructor returns a :class:`~stratent.gmt_core.Chart` with an analytic
Jacobian and, where one exists, the closed-form Hausdorff measure of its image.
"""

import inspect

import numpy as np

from .errors import ConfigError, ContractError
from .gmt_core import Chart, ParamDomain


def _vec(v, name):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.ndim != 1 or not np.all(np.isfinite(a)):
        raise ContractError(f"{name} must be a finite vector")
    return a


def point(coords):
    """Zero-dimensional chart: the single point ``coords``."""
    p = _vec(coords, "coords")
    d = len(p)

    def f(x):
        return np.broadcast_to(p, (len(x), d)).copy()

    def jac(x):
        return np.zeros((len(x), d, 0))

    return Chart(ParamDomain.point(), f, d, jac, label=f"point{tuple(p.tolist())}",
                 constant_jacobian=True, reference_measure=1.0)


def segment(start, end):
    """Unit-speed segment from ``start`` to ``end``, parametrized by arc length.

    Scalars give a segment of the real line; the parameter domain is
    ``[0, |end - start|]`` so the area factor is 1.
    """
    a, b = _vec(start, "start"), _vec(end, "end")
    if a.shape != b.shape:
        raise ContractError("segment endpoints must have the same dimension")
    length = float(np.linalg.norm(b - a))
    if length == 0:
        raise ContractError("segment endpoints coincide")
    u = (b - a) / length
    d = len(a)

    def f(x):
        return a + x[:, :1] * u

    def jac(x):
        return np.broadcast_to(u[:, None], (len(x), d, 1)).copy()

    return Chart(ParamDomain([[0.0, length]]), f, d, jac, lipschitz_bound=1.0,
                 label=f"segment[{length:g}]", constant_jacobian=True, reference_measure=length)


def box(lo, hi):
    """Identity chart of the box ``prod [lo_i, hi_i]`` in R^m (full-dimensional)."""
    lo, hi = _vec(lo, "lo"), _vec(hi, "hi")
    if lo.shape != hi.shape:
        raise ContractError("box corners must have the same dimension")
    m = len(lo)

    def f(x):
        return x.copy()

    def jac(x):
        return np.broadcast_to(np.eye(m), (len(x), m, m)).copy()

    vol = float(np.prod(hi - lo))
    return Chart(ParamDomain(np.stack([lo, hi], axis=1)), f, m, jac, lipschitz_bound=1.0,
                 label=f"box{m}", constant_jacobian=True, reference_measure=vol)


def _planar(r, center, name):
    c = _vec(center, "center")
    if len(c) < 2:
        raise ContractError(f"{name} needs an ambient dimension of at least 2")
    if not r > 0:
        raise ContractError(f"{name} radius must be positive")
    return c


def circle(r=1.0, center=(0.0, 0.0)):
    """Circle of radius ``r`` in the first two coordinates, ``t in [0, 1)``.

    ``t -> center + r (cos 2 pi t, sin 2 pi t, 0, ...)``, area factor ``2 pi r``.
    """
    r = float(r)
    c = _planar(r, center, "circle")
    d = len(c)
    w = 2 * np.pi

    def f(x):
        out = np.broadcast_to(c, (len(x), d)).copy()
        out[:, 0] += r * np.cos(w * x[:, 0])
        out[:, 1] += r * np.sin(w * x[:, 0])
        return out

    def jac(x):
        out = np.zeros((len(x), d, 1))
        out[:, 0, 0] = -r * w * np.sin(w * x[:, 0])
        out[:, 1, 0] = r * w * np.cos(w * x[:, 0])
        return out

    return Chart(ParamDomain([[0.0, 1.0]]), f, d, jac, lipschitz_bound=w * r,
                 label=f"circle[r={r:g}]", constant_jacobian=True, reference_measure=w * r)


def arc(r=1.0, center=(0.0, 0.0), angles=(0.0, np.pi)):
    """Circular arc ``t -> center + r (cos t, sin t)`` for ``t`` in ``angles``."""
    r = float(r)
    c = _planar(r, center, "arc")
    t0, t1 = (float(a) for a in angles)
    if not 0 < t1 - t0 < 2 * np.pi:
        raise ContractError("arc angles must span (0, 2 pi)")
    d = len(c)

    def f(x):
        out = np.broadcast_to(c, (len(x), d)).copy()
        out[:, 0] += r * np.cos(x[:, 0])
        out[:, 1] += r * np.sin(x[:, 0])
        return out

    def jac(x):
        out = np.zeros((len(x), d, 1))
        out[:, 0, 0] = -r * np.sin(x[:, 0])
        out[:, 1, 0] = r * np.cos(x[:, 0])
        return out

    return Chart(ParamDomain([[t0, t1]]), f, d, jac, lipschitz_bound=r,
                 label=f"arc[r={r:g}]", constant_jacobian=True, reference_measure=r * (t1 - t0))


def helix(c=1.0, turns=1.0, r=1.0):
    """Helix ``t -> (r cos t, r sin t, c t)``, ``t in [0, 2 pi turns]``."""
    c, turns, r = float(c), float(turns), float(r)
    if not (turns > 0 and r > 0):
        raise ContractError("helix needs positive turns and radius")
    speed = float(np.hypot(r, c))

    def f(x):
        t = x[:, 0]
        return np.stack([r * np.cos(t), r * np.sin(t), c * t], axis=1)

    def jac(x):
        t = x[:, 0]
        out = np.zeros((len(x), 3, 1))
        out[:, 0, 0] = -r * np.sin(t)
        out[:, 1, 0] = r * np.cos(t)
        out[:, 2, 0] = c
        return out

    t1 = 2 * np.pi * turns
    return Chart(ParamDomain([[0.0, t1]]), f, 3, jac, lipschitz_bound=speed,
                 label=f"helix[c={c:g}]", constant_jacobian=True, reference_measure=speed * t1)


# Scalar functions for graph charts: tag -> (g, grad g).
GRAPH_FUNCTIONS = {
    "paraboloid": (lambda x: np.sum(x ** 2, axis=1), lambda x: 2 * x),
    "sine": (lambda x: np.sum(np.sin(x), axis=1), lambda x: np.cos(x)),
    "gaussian": (
        lambda x: np.exp(-np.sum(x ** 2, axis=1)),
        lambda x: -2 * x * np.exp(-np.sum(x ** 2, axis=1))[:, None],
    ),
    "saddle": (lambda x: np.prod(x, axis=1), lambda x: _saddle_grad(x)),
}


def _saddle_grad(x):
    m = x.shape[1]
    return np.stack([np.prod(np.delete(x, i, axis=1), axis=1) for i in range(m)], axis=1)


def _paraboloid_arclength(a, b):
    def F(x):
        return 0.5 * x * np.sqrt(1 + 4 * x * x) + 0.25 * np.arcsinh(2 * x)

    return float(F(b) - F(a))


def graph(function="paraboloid", lo=(0.0,), hi=(1.0,)):
    """Graph ``x -> (x, g(x))`` of a scalar function over a box in R^m.

    ``function`` is one of :data:`GRAPH_FUNCTIONS`. The area factor is
    ``sqrt(1 + |grad g|^2)``.
    """
    if function not in GRAPH_FUNCTIONS:
        raise ContractError(f"unknown graph function '{function}'; choose from {sorted(GRAPH_FUNCTIONS)}")
    g, grad = GRAPH_FUNCTIONS[function]
    lo, hi = _vec(lo, "lo"), _vec(hi, "hi")
    m = len(lo)

    def f(x):
        return np.concatenate([x, g(x)[:, None]], axis=1)

    def jac(x):
        out = np.zeros((len(x), m + 1, m))
        out[:, :m, :] = np.eye(m)
        out[:, m, :] = grad(x)
        return out

    ref = _paraboloid_arclength(lo[0], hi[0]) if function == "paraboloid" and m == 1 else None
    return Chart(ParamDomain(np.stack([lo, hi], axis=1)), f, m + 1, jac,
                 label=f"graph[{function}]", reference_measure=ref)


def planar_patch(origin=(0.0, 0.0, 0.0), u=(1.0, 0.0, 0.0), v=(0.0, 1.0, 0.0),
                 lo=(0.0, 0.0), hi=(1.0, 1.0)):
    """Flat patch ``(s, t) -> origin + s u + t v`` over the box ``[lo, hi]``."""
    o, u, v = _vec(origin, "origin"), _vec(u, "u"), _vec(v, "v")
    if not (o.shape == u.shape == v.shape):
        raise ContractError("patch vectors must share one dimension")
    if len(o) < 2:
        raise ContractError("planar patch needs ambient dimension >= 2")
    basis = np.stack([u, v], axis=1)
    gram = basis.T @ basis
    J = float(np.sqrt(np.linalg.det(gram)))
    if J <= 0:
        raise ContractError("patch vectors are linearly dependent")
    d = len(o)
    lo, hi = _vec(lo, "lo"), _vec(hi, "hi")
    dom = ParamDomain(np.stack([lo, hi], axis=1))

    def f(x):
        return o + x @ basis.T

    def jac(x):
        return np.broadcast_to(basis, (len(x), d, 2)).copy()

    return Chart(dom, f, d, jac, lipschitz_bound=float(np.linalg.norm(basis, 2)),
                 label="planar-patch", constant_jacobian=True, reference_measure=J * dom.volume)


def sphere_patch(r=1.0, theta=(0.25 * np.pi, 0.75 * np.pi), phi=(0.0, np.pi), center=(0.0, 0.0, 0.0)):
    """Spherical patch in polar angle ``theta`` and azimuth ``phi``.

    ``(theta, phi) -> center + r (sin theta cos phi, sin theta sin phi, cos theta)``,
    area factor ``r^2 sin theta``. Angles must keep the map injective.
    """
    r = float(r)
    c = _vec(center, "center")
    if len(c) != 3:
        raise ContractError("sphere patch lives in R^3")
    th0, th1 = (float(a) for a in theta)
    ph0, ph1 = (float(a) for a in phi)
    if not (0 <= th0 < th1 <= np.pi and ph1 - ph0 <= 2 * np.pi and r > 0):
        raise ContractError("sphere patch angles out of range")

    def f(x):
        th, ph = x[:, 0], x[:, 1]
        s = np.sin(th)
        return c + r * np.stack([s * np.cos(ph), s * np.sin(ph), np.cos(th)], axis=1)

    def jac(x):
        th, ph = x[:, 0], x[:, 1]
        out = np.empty((len(x), 3, 2))
        out[:, 0, 0] = r * np.cos(th) * np.cos(ph)
        out[:, 1, 0] = r * np.cos(th) * np.sin(ph)
        out[:, 2, 0] = -r * np.sin(th)
        out[:, 0, 1] = -r * np.sin(th) * np.sin(ph)
        out[:, 1, 1] = r * np.sin(th) * np.cos(ph)
        out[:, 2, 1] = 0.0
        return out

    area = r * r * (ph1 - ph0) * (np.cos(th0) - np.cos(th1))
    return Chart(ParamDomain([[th0, th1], [ph0, ph1]]), f, 3, jac, lipschitz_bound=r,
                 label=f"sphere-patch[r={r:g}]", reference_measure=float(area))


BUILTIN_CHARTS = {
    "point": point,
    "segment": segment,
    "box": box,
    "circle": circle,
    "arc": arc,
    "helix": helix,
    "graph": graph,
    "planar-patch": planar_patch,
    "sphere-patch": sphere_patch,
}


def chart_parameters(name):
    """Parameter names and defaults of a built-in chart constructor."""
    sig = inspect.signature(BUILTIN_CHARTS[name])
    return {
        p.name: (None if p.default is inspect.Parameter.empty else p.default)
        for p in sig.parameters.values()
    }


def make_chart(name, path="chart", **params):
    """Build a named chart; unknown names or parameters raise :class:`ConfigError`."""
    if name not in BUILTIN_CHARTS:
        raise ConfigError(f"unknown chart '{name}'; choose from {sorted(BUILTIN_CHARTS)}",
                          path=f"{path}.name")
    allowed = chart_parameters(name)
    for key in params:
        if key not in allowed:
            raise ConfigError(f"unknown parameter '{key}' for chart '{name}'", path=f"{path}.{key}")
    sig = inspect.signature(BUILTIN_CHARTS[name])
    for p in sig.parameters.values():
        if p.default is inspect.Parameter.empty and p.name not in params:
            raise ConfigError(f"chart '{name}' requires parameter '{p.name}'", path=path)
    try:
        return BUILTIN_CHARTS[name](**params)
    except ContractError as exc:
        raise ConfigError(str(exc), path=path) from exc
