"""Sampled graph maps f: R^n -> R^k on uniform cube grids.

Everything downstream works on a :class:`GraphField`: an array of k-vectors
indexed by the nodes of a uniform grid over ``[-L, L]^n``.  The grid always has
an odd number of points per axis so the origin is a node.

Derivatives are centered second-order differences (no one-sided stencils), so
jets exist only at interior nodes.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GridError",
    "OutOfDomainError",
    "BoundaryNodeError",
    "GridSpec",
    "GraphField",
    "JetSample",
    "SphereSampling",
    "BallQuadrature",
    "build_field",
    "field_from_array",
    "jet_at",
    "field_jets",
    "interpolate",
    "interpolate_many",
    "sphere_area",
    "sphere_sampling",
    "sphere_rule",
    "ball_quadrature_nodes",
    "ball_polar_quadrature",
    "SplineJets",
    "field_to_json",
    "field_from_json",
    "save_field",
    "load_field",
]


class GridError(ValueError):
    """Invalid grid, field or query."""


class OutOfDomainError(GridError):
    def __init__(self, message, overshoot):
        super().__init__(message)
        self.overshoot = overshoot


class BoundaryNodeError(GridError):
    def __init__(self, message, axis):
        super().__init__(message)
        self.axis = axis


@dataclass(frozen=True)
class GridSpec:
    n: int
    k: int
    L: float
    h: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise GridError(f"n must be an integer >= 1, got {self.n!r}")
        if int(self.k) != self.k or self.k < 1:
            raise GridError(f"k must be an integer >= 1, got {self.k!r}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise GridError(f"half width L must be positive, got {self.L!r}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise GridError(f"spacing h must be positive, got {self.h!r}")
        if self.h > self.L:
            raise GridError(f"spacing h={self.h} exceeds half width L={self.L}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "h", float(self.h))

    @property
    def m(self) -> int:
        """Points per axis (odd)."""
        return 2 * round(self.L / self.h) + 1

    @property
    def center(self) -> int:
        return (self.m - 1) // 2

    @property
    def half_width(self) -> float:
        """Coordinate of the last node; equals L when L is a multiple of h."""
        return self.center * self.h

    @property
    def axis(self) -> np.ndarray:
        return self.h * (np.arange(self.m) - self.center)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(m,)*n + (n,)``."""
        grids = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.stack(grids, axis=-1)

    def interior_points(self) -> np.ndarray:
        return self.points()[(slice(1, -1),) * self.n]

    def node_point(self, node) -> np.ndarray:
        return self.h * (np.asarray(node, dtype=float) - self.center)

    def node_index(self, x) -> tuple[int, ...]:
        """Index of the node at coordinates ``x`` (must be a node)."""
        idx = np.rint(np.asarray(x, dtype=float) / self.h).astype(int) + self.center
        return tuple(int(i) for i in idx)

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "L": self.L, "h": self.h}


@dataclass(frozen=True, eq=False)
class GraphField:
    spec: GridSpec
    values: np.ndarray
    gradient_bound: float | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        expected = self.spec.shape + (self.spec.k,)
        if vals.shape == self.spec.shape and self.spec.k == 1:
            vals = vals[..., None]
        if vals.shape != expected:
            raise GridError(f"values have shape {vals.shape}, expected {expected}")
        bad = ~np.isfinite(vals)
        if bad.any():
            node = tuple(int(i) for i in np.argwhere(bad.any(axis=-1))[0])
            raise GridError(
                f"non-finite value at node {node} (x={self.spec.node_point(node).tolist()})"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if self.gradient_bound is not None and not self.gradient_bound >= 0:
            raise GridError("gradient bound must be nonnegative")

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def k(self) -> int:
        return self.spec.k

    def with_values(self, values, gradient_bound=None) -> "GraphField":
        return GraphField(self.spec, values, gradient_bound)

    def gradient_report(self) -> dict:
        """Measured sup of the centered-difference gradient norm vs declared C0."""
        grad, _ = field_jets(self, hessian=False)
        norms = np.linalg.norm(grad, ord=2, axis=(-2, -1))
        measured = float(norms.max()) if norms.size else 0.0
        declared = self.gradient_bound
        if declared is None:
            return {"measured": measured, "declared": None, "ok": None}
        tol = declared + self.spec.h * (1.0 + declared)
        return {"measured": measured, "declared": declared, "ok": measured <= tol}


@dataclass(frozen=True)
class JetSample:
    point: np.ndarray
    value: np.ndarray
    gradient: np.ndarray  # (k, n)
    hessian: np.ndarray  # (k, n, n)


@dataclass(frozen=True)
class SphereSampling:
    n: int
    radius: float
    nodes: np.ndarray  # (count, n)
    weights: np.ndarray  # (count,)
    scheme: str
    seed: int | None = None

    @property
    def count(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class BallQuadrature:
    indices: np.ndarray  # (N, n) grid indices
    points: np.ndarray  # (N, n)
    weights: np.ndarray  # (N,)


# ---------------------------------------------------------------- construction

def build_field(spec: GridSpec, generator: Callable, vectorized: bool = False,
                gradient_bound: float | None = None) -> GraphField:
    """Sample ``generator`` at every node.

    With ``vectorized=True`` the generator receives all nodes as an ``(N, n)``
    array and must return ``(N, k)`` (or ``(N,)`` when k == 1); otherwise it is
    called once per node with an n-vector.
    """
    pts = spec.points().reshape(-1, spec.n)
    if vectorized:
        vals = np.asarray(generator(pts), dtype=float)
    else:
        vals = np.array([np.atleast_1d(np.asarray(generator(p), dtype=float)) for p in pts])
    vals = vals.reshape(len(pts), -1)
    if vals.shape[1] != spec.k:
        raise GridError(f"generator returned {vals.shape[1]} components, expected k={spec.k}")
    bad = ~np.isfinite(vals).all(axis=1)
    if bad.any():
        i = int(np.argmax(bad))
        raise GridError(f"generator returned non-finite value at x={pts[i].tolist()}")
    return GraphField(spec, vals.reshape(spec.shape + (spec.k,)), gradient_bound)


def field_from_array(spec: GridSpec, values, gradient_bound=None) -> GraphField:
    return GraphField(spec, values, gradient_bound)


# ---------------------------------------------------------------- jets

def _shift(values: np.ndarray, n: int, offsets: Sequence[int]) -> np.ndarray:
    """View of ``values`` over interior nodes, displaced by ``offsets`` nodes."""
    sl = tuple(slice(1 + o, values.shape[a] - 1 + o) for a, o in enumerate(offsets))
    return values[sl]


def field_jets(field: GraphField, hessian: bool = True):
    """Centered-difference gradient and hessian at all interior nodes.

    Returns ``grad`` with shape ``(m-2,)*n + (k, n)`` and ``hess`` with shape
    ``(m-2,)*n + (k, n, n)`` (``None`` when ``hessian=False``).
    """
    return _jets_of(field.values, field.spec.n, field.spec.h, hessian)


def _jets_of(values, n, h, hessian=True):
    zero = (0,) * n

    def unit(*pairs):
        off = [0] * n
        for axis, s in pairs:
            off[axis] += s
        return off

    grads = []
    for i in range(n):
        grads.append((_shift(values, n, unit((i, 1))) - _shift(values, n, unit((i, -1)))) / (2 * h))
    grad = np.stack(grads, axis=-1)
    if not hessian:
        return grad, None
    center = _shift(values, n, zero)
    hess = np.empty(grad.shape + (n,))
    for i in range(n):
        hess[..., i, i] = (_shift(values, n, unit((i, 1))) - 2 * center
                           + _shift(values, n, unit((i, -1)))) / h**2
        for j in range(i + 1, n):
            d = (_shift(values, n, unit((i, 1), (j, 1)))
                 - _shift(values, n, unit((i, 1), (j, -1)))
                 - _shift(values, n, unit((i, -1), (j, 1)))
                 + _shift(values, n, unit((i, -1), (j, -1)))) / (4 * h**2)
            hess[..., i, j] = d
            hess[..., j, i] = d
    return grad, hess


def jet_at(field: GraphField, node) -> JetSample:
    spec = field.spec
    node = tuple(int(i) for i in node)
    if len(node) != spec.n:
        raise GridError(f"node index has {len(node)} entries, expected {spec.n}")
    for axis, i in enumerate(node):
        if not 1 <= i <= spec.m - 2:
            raise BoundaryNodeError(
                f"node {node} lies on the boundary along axis {axis}; jets need interior nodes",
                axis,
            )
    # 3^n block around the node, then reuse the array stencils on it
    block = field.values[tuple(slice(i - 1, i + 2) for i in node)]
    grad, hess = _jets_of(block, spec.n, spec.h)
    c = (0,) * spec.n
    return JetSample(
        point=spec.node_point(node),
        value=field.values[node].copy(),
        gradient=grad[c],
        hessian=hess[c],
    )


# ---------------------------------------------------------------- interpolation

def _check_domain(spec: GridSpec, X: np.ndarray):
    hw = spec.half_width
    over = np.abs(X).max(axis=-1) - hw
    tol = 1e-12 * max(hw, 1.0)
    if (over > tol).any():
        i = int(np.argmax(over))
        raise OutOfDomainError(
            f"query {X[i].tolist()} lies outside [-{hw}, {hw}]^{spec.n} by {over[i]:.3g}",
            float(over[i]),
        )


def interpolate_many(field: GraphField, X) -> np.ndarray:
    """Multilinear interpolation at points ``X`` of shape ``(N, n)``; returns ``(N, k)``."""
    spec = field.spec
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_domain(spec, X)
    u = X / spec.h + spec.center
    # queries within rounding of a node reproduce the node value exactly
    near = np.rint(u)
    u = np.where(np.abs(u - near) < 1e-9, near, u)
    base = np.clip(np.floor(u).astype(int), 0, spec.m - 2)
    t = u - base
    out = np.zeros((len(X), spec.k))
    for corner in itertools.product((0, 1), repeat=spec.n):
        c = np.array(corner)
        w = np.prod(np.where(c == 1, t, 1.0 - t), axis=1)
        idx = tuple((base + c).T)
        out += w[:, None] * field.values[idx]
    return out


def interpolate(field: GraphField, x) -> np.ndarray:
    return interpolate_many(field, np.asarray(x, dtype=float)[None, :])[0]


class SplineJets:
    """C^2 tensor-product cubic spline through the nodal values of a field.

    Used where derivatives along arbitrary rays must be consistent with the
    evaluated values (the chain-rule checks of the blow-down family).
    """

    def __init__(self, field: GraphField):
        from scipy.interpolate import NdBSpline, make_interp_spline

        spec = field.spec
        self.spec = spec
        x = spec.axis
        c = np.asarray(field.values, dtype=float)
        knots = None
        for axis in range(spec.n):
            bs = make_interp_spline(x, c, k=3, axis=axis)
            c = np.moveaxis(bs.c, 0, axis)  # BSpline puts the interpolated axis first
            knots = bs.t
        self._spline = NdBSpline((knots,) * spec.n, c, 3)

    def _eval(self, X, nu):
        return self._spline(X, nu=nu)

    def __call__(self, X, order: int = 2):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        _check_domain(self.spec, X)
        n = self.spec.n
        vals = self._eval(X, (0,) * n)
        if order == 0:
            return vals
        grad = np.empty(vals.shape + (n,))
        for i in range(n):
            nu = [0] * n
            nu[i] = 1
            grad[..., i] = self._eval(X, tuple(nu))
        if order == 1:
            return vals, grad
        hess = np.empty(grad.shape + (n,))
        for i in range(n):
            for j in range(i, n):
                nu = [0] * n
                nu[i] += 1
                nu[j] += 1
                d = self._eval(X, tuple(nu))
                hess[..., i, j] = d
                hess[..., j, i] = d
        return vals, grad, hess


# ---------------------------------------------------------------- quadrature

def sphere_area(n: int, r: float = 1.0) -> float:
    """(n-1)-dimensional area of the sphere of radius r in R^n (counting measure for n=1)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2) * r ** (n - 1)


_SCHEMES = ("uniform-angle", "fibonacci", "monte-carlo")


def sphere_sampling(n: int, r: float = 1.0, count: int = 64, scheme: str | None = None,
                    seed: int | None = None) -> SphereSampling:
    """Equal-weight node sets on the sphere ``r S^{n-1}``.

    Default scheme by dimension: uniform angles (n <= 2), Fibonacci lattice
    (n = 3), normalized Gaussian samples (n >= 4).
    """
    if n < 1 or count < 2:
        raise GridError(f"need n >= 1 and count >= 2 (got n={n}, count={count})")
    if scheme is None:
        scheme = {1: "uniform-angle", 2: "uniform-angle", 3: "fibonacci"}.get(n, "monte-carlo")
    if scheme not in _SCHEMES:
        raise GridError(f"unknown sphere scheme {scheme!r}")
    if scheme == "uniform-angle":
        if n == 1:
            if count != 2:
                raise GridError("S^0 has exactly two points; use count=2")
            pts = np.array([[-1.0], [1.0]])
        elif n == 2:
            theta = 2 * np.pi * np.arange(count) / count
            pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        else:
            raise GridError("uniform-angle sampling is only defined for n <= 2")
    elif scheme == "fibonacci":
        if n != 3:
            raise GridError("fibonacci sampling is only defined for n = 3")
        i = np.arange(count)
        z = 1.0 - (2 * i + 1) / count
        rho = np.sqrt(1.0 - z**2)
        phi = 2 * np.pi * i / ((1 + math.sqrt(5)) / 2)
        pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    else:
        if n < 2:
            raise GridError("monte-carlo sampling needs n >= 2")
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((count, n))
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    weights = np.full(count, sphere_area(n, r) / count)
    return SphereSampling(n, float(r), r * pts, weights, scheme,
                          seed if scheme == "monte-carlo" else None)


def sphere_rule(n: int, r: float, resolution: int):
    """Accurate product rule on ``r S^{n-1}`` for boundary integrals (n <= 3).

    Returns ``(points, weights)``.  n=1: the two endpoints with unit weight;
    n=2: uniform angles (spectrally accurate for periodic integrands); n=3:
    Gauss-Legendre in the polar cosine times uniform azimuth.
    """
    if n == 1:
        return np.array([[-r], [r]]), np.ones(2)
    if n == 2:
        theta = 2 * np.pi * (np.arange(resolution) + 0.5) / resolution
        pts = r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return pts, np.full(resolution, 2 * np.pi * r / resolution)
    if n == 3:
        nz = max(resolution // 2, 2)
        z, wz = np.polynomial.legendre.leggauss(nz)
        phi = 2 * np.pi * (np.arange(resolution) + 0.5) / resolution
        Z, P = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1 - Z**2)
        pts = r * np.stack([rho * np.cos(P), rho * np.sin(P), Z], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(resolution, 2 * np.pi / resolution)[None, :]).ravel() * r**2
        return pts, w
    raise GridError(f"boundary quadrature is implemented for n <= 3, got n={n}")


def ball_quadrature_nodes(spec: GridSpec, R: float) -> BallQuadrature:
    """Grid nodes with ``|x| <= R`` and midpoint weights ``h^n``, lexicographic order."""
    if R > spec.half_width + 1e-12 * spec.half_width:
        raise GridError(f"ball radius R={R} exceeds grid half width {spec.half_width}")
    if R < 0:
        raise GridError("ball radius must be nonnegative")
    pts = spec.points().reshape(-1, spec.n)
    idx = np.indices(spec.shape).reshape(spec.n, -1).T
    r2 = np.einsum("ij,ij->i", pts, pts)
    keep = r2 <= R * R * (1 + 1e-12)
    return BallQuadrature(idx[keep], pts[keep], np.full(int(keep.sum()), spec.h ** spec.n))


def ball_polar_quadrature(n: int, R: float, resolution: int):
    """Product Gauss rule on the ball ``B_R`` in R^n (n <= 3).

    Gauss-Legendre in the radius times :func:`sphere_rule` in the angles.
    Returns ``(points, weights)`` with weights summing to ``|B_R|``.
    """
    nr = max(resolution // 2, 4)
    if n == 1:
        s, w = np.polynomial.legendre.leggauss(2 * nr)
        return (R * s)[:, None], R * w
    s, ws = np.polynomial.legendre.leggauss(nr)
    rad = 0.5 * R * (s + 1)
    wr = 0.5 * R * ws * rad ** (n - 1)
    ang, wa = sphere_rule(n, 1.0, resolution)
    pts = (rad[:, None, None] * ang[None, :, :]).reshape(-1, n)
    w = (wr[:, None] * wa[None, :]).ravel()
    return pts, w


# ---------------------------------------------------------------- file format

def field_to_json(field: GraphField) -> str:
    doc = {
        "spec": field.spec.to_dict(),
        "values": field.values.reshape(-1, field.spec.k).tolist(),
    }
    if field.gradient_bound is not None:
        doc["gradient_bound"] = field.gradient_bound
    return json.dumps(doc)


def field_from_json(text: str) -> GraphField:
    doc = json.loads(text)
    try:
        s = doc["spec"]
        spec = GridSpec(s["n"], s["k"], s["L"], s["h"])
        vals = np.asarray(doc["values"], dtype=float)
    except KeyError as exc:
        raise GridError(f"field file is missing key {exc.args[0]!r}") from None
    if vals.shape != (spec.m ** spec.n, spec.k):
        raise GridError(f"field file has {vals.shape} values, expected {(spec.m ** spec.n, spec.k)}")
    return GraphField(spec, vals.reshape(spec.shape + (spec.k,)), doc.get("gradient_bound"))


def save_field(field: GraphField, path) -> None:
    Path(path).write_text(field_to_json(field), newline="\n")


def load_field(path) -> GraphField:
    return field_from_json(Path(path).read_text())
