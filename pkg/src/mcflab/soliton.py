"""Soliton equation H + F_perp = 0 for graphs, and a Dirichlet solver.

Two forms of the residual are computed from the same centered-difference jets:

* parametric: ``r_par = H + Q F`` in R^{n+k};
* scalar: ``r^a = g^{ij} D_ij f^a - x . Df^a + f^a`` in R^k.

Pairing ``r_par`` with the normal covectors ``nu^a = (Df^a, -e_a)`` gives
``<nu^a, r_par> = -r^a`` identically, which :func:`equivalence_check` tests.
The solver relaxes the scalar form in pseudo-time.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .geometry import field_geometry
from .gridfield import GraphField, GridError, GridSpec, _jets_of, _shift, build_field, field_jets

__all__ = [
    "SolitonResidual",
    "SolverConfig",
    "SolverReport",
    "residual_parametric",
    "residual_scalar",
    "soliton_residual",
    "equivalence_check",
    "residual_bounds",
    "boundary_band",
    "multilinear_extension",
    "solve_dirichlet",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolitonResidual:
    parametric: np.ndarray  # (..., n+k) over interior nodes
    scalar: np.ndarray  # (..., k)
    sup_parametric: float
    sup_scalar: float


def residual_parametric(field: GraphField) -> np.ndarray:
    geo = field_geometry(field)
    return geo.mean_curvature + geo.F_perp


def _elliptic_and_grad(values, n, h):
    """``g^{ij} D_ij f`` and ``Df`` over the interior of a full value array."""
    if values.shape[-1] == 1:
        ell, grad = _elliptic_k1(values[..., 0], n, h)
        return ell[..., None], grad[..., None, :]
    grad, hess = _jets_of(values, n, h)
    g = np.eye(n) + np.einsum("...ai,...aj->...ij", grad, grad)
    return np.einsum("...ij,...aij->...a", np.linalg.inv(g), hess), grad


def _elliptic_k1(u, n, h):
    # codim 1 hot path; g^{-1} = I - p p^T / (1 + |p|^2) by Sherman-Morrison
    inner = (slice(1, -1),) * n

    def sh(*pairs):
        off = [0] * n
        for axis, s in pairs:
            off[axis] += s
        return _shift(u, n, off)

    c = u[inner]
    p = [(sh((i, 1)) - sh((i, -1))) / (2 * h) for i in range(n)]
    w = 1.0 + sum(pi * pi for pi in p)
    num = 0.0
    for i in range(n):
        hii = (sh((i, 1)) - 2 * c + sh((i, -1))) / (h * h)
        num = num + hii * (w - p[i] * p[i])
        for j in range(i + 1, n):
            hij = (sh((i, 1), (j, 1)) - sh((i, 1), (j, -1))
                   - sh((i, -1), (j, 1)) + sh((i, -1), (j, -1))) / (4 * h * h)
            num = num - 2 * p[i] * p[j] * hij
    return num / w, np.stack(p, axis=-1)


def _drift(points, grad, n):
    inner = (slice(1, -1),) * n
    return np.einsum("...i,...ai->...a", points[inner], grad)


def _scalar_residual(values, points, n, h):
    """Scalar residual on the interior of a full value array."""
    ell, grad = _elliptic_and_grad(values, n, h)
    return ell - _drift(points, grad, n) + values[(slice(1, -1),) * n]


def residual_scalar(field: GraphField) -> np.ndarray:
    spec = field.spec
    return _scalar_residual(field.values, spec.points(), spec.n, spec.h)


def soliton_residual(field: GraphField) -> SolitonResidual:
    rp = residual_parametric(field)
    rs = residual_scalar(field)
    sup_p = float(np.linalg.norm(rp, axis=-1).max()) if rp.size else 0.0
    sup_s = float(np.abs(rs).max()) if rs.size else 0.0
    return SolitonResidual(rp, rs, sup_p, sup_s)


def _pairing(field, r_par):
    n = field.spec.n
    grad, _ = field_jets(field, hessian=False)
    # <nu^a, r_par> with nu^a = (Df^a, -e_a)
    return np.einsum("...ai,...i->...a", grad, r_par[..., :n]) - r_par[..., n:]


def equivalence_check(field: GraphField) -> float:
    """Max over interior nodes and components of ``|<nu^a, r_par> + r^a|``."""
    res = soliton_residual(field)
    defect = _pairing(field, res.parametric) + res.scalar
    return float(np.abs(defect).max()) if defect.size else 0.0


def residual_bounds(field: GraphField) -> dict:
    """Nodewise comparison of the two residual norms.

    ``r_par`` lies in the normal space spanned by the ``nu^a`` whose Gram
    matrix is ``I + Df Df^T >= I``, hence ``|r_par| <= |r|`` and
    ``|r| <= sqrt(1 + |Df|^2) |r_par|``.  Returns the worst ratios of both
    bounds (each must be <= 1 up to rounding).
    """
    res = soliton_residual(field)
    grad, _ = field_jets(field, hessian=False)
    c0 = np.linalg.norm(grad, ord=2, axis=(-2, -1))
    rp = np.linalg.norm(res.parametric, axis=-1)
    rs = np.linalg.norm(res.scalar, axis=-1)
    tiny = 1e-300
    return {
        "par_over_scalar": float(np.max(rp / np.maximum(rs, tiny), initial=0.0)),
        "scalar_over_par_scaled": float(
            np.max(rs / np.maximum(np.sqrt(1 + c0**2) * rp, tiny), initial=0.0)
        ),
        "C0": float(c0.max()),
    }


# ---------------------------------------------------------------- solver

@dataclass(frozen=True)
class SolverConfig:
    c_tau: float = 0.2
    eps: float = 1e-8
    max_iters: int = 200_000
    atol: float = 1e-11
    divergence_factor: float = 10.0
    damping: Callable[[int], float] | None = None

    def __post_init__(self):
        if not self.c_tau > 0:
            raise ValueError(f"c_tau must be positive, got {self.c_tau}")
        if self.c_tau > 0.5:
            warnings.warn(f"c_tau={self.c_tau} exceeds 0.5; the explicit relaxation is likely unstable")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class SolverReport:
    iterations: int = 0
    residual_sup: list = dc_field(default_factory=list)
    residual_l2: list = dc_field(default_factory=list)
    best_sup: list = dc_field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    c0: float = math.nan
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "diverged": self.diverged,
            "c0": self.c0,
            "message": self.message,
            "residual_history": {
                "sup": self.residual_sup,
                "l2": self.residual_l2,
                "best_sup": self.best_sup,
            },
        }


def boundary_band(spec: GridSpec) -> np.ndarray:
    """Boolean mask of the one-node-thick band on the cube faces."""
    idx = np.indices(spec.shape)
    return ((idx == 0) | (idx == spec.m - 1)).any(axis=0)


def multilinear_extension(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Transfinite (Coons) extension of face data into the cube.

    Boolean sum of the axis-wise linear interpolants between opposite faces;
    reads only band values and reproduces them on the band.
    """
    n = spec.n
    t = (spec.axis + spec.half_width) / (2 * spec.half_width)

    def face_interp(A, axis):
        shape = [1] * A.ndim
        shape[axis] = spec.m
        w = t.reshape(shape)
        lo = np.take(A, [0], axis=axis)
        hi = np.take(A, [spec.m - 1], axis=axis)
        return (1 - w) * lo + w * hi

    out = np.zeros_like(values, dtype=float)
    for size in range(1, n + 1):
        for axes in itertools.combinations(range(n), size):
            P = values
            for a in axes:
                P = face_interp(P, a)
            out += (-1) ** (size + 1) * P
    band = boundary_band(spec)
    out[band] = values[band]
    return out


def _as_values(spec, data):
    if isinstance(data, GraphField):
        if data.spec != spec:
            raise GridError("boundary/init field lives on a different grid")
        return np.array(data.values)
    return np.array(build_field(spec, data, vectorized=True).values)


def solve_dirichlet(spec: GridSpec, boundary, init=None, cfg: SolverConfig | None = None):
    """Relax ``f <- f + dtau * r(f)`` with the band values frozen.

    ``boundary`` is a GraphField (only band values are read) or a vectorized
    generator; ``init`` defaults to the multilinear extension of the band
    data.  Returns ``(field, report)``; on divergence the best iterate is
    returned and ``report.diverged`` is set.
    """
    cfg = cfg or SolverConfig()
    n, h = spec.n, spec.h
    if spec.half_width > 2 * math.sqrt(n):
        warnings.warn(f"domain half width {spec.half_width} exceeds 2 sqrt(n); relaxation may not converge")
    B = _as_values(spec, boundary)
    band = boundary_band(spec)
    if init is None:
        f = multilinear_extension(B, spec)
    else:
        f = _as_values(spec, init)
        scale = max(1.0, float(np.abs(B[band]).max()))
        if np.abs(f[band] - B[band]).max() > 1e-12 * scale:
            raise GridError("initial field does not match the boundary data on the band")
        f[band] = B[band]

    points = spec.points()
    inner = (slice(1, -1),) * n
    dtau = cfg.c_tau * h * h
    report = SolverReport()
    r = _scalar_residual(f, points, n, h)
    sup = float(np.abs(r).max())
    sup0 = sup
    target = max(cfg.eps * sup0, cfg.atol)
    best, best_sup = f.copy(), sup

    def record(sup, r):
        report.residual_sup.append(sup)
        report.residual_l2.append(float(np.sqrt(h**n * np.sum(r * r))))
        report.best_sup.append(best_sup)

    record(sup, r)
    it = 0
    while sup > target and it < cfg.max_iters:
        step = dtau if cfg.damping is None else dtau * cfg.damping(it)
        f[inner] += step * r
        it += 1
        r = _scalar_residual(f, points, n, h)
        sup = float(np.abs(r).max())
        if not math.isfinite(sup) or sup > cfg.divergence_factor * best_sup:
            report.diverged = True
            report.message = (f"residual grew to {sup:.3g} (best {best_sup:.3g}) at iteration {it}; "
                              "returning best iterate")
            if math.isfinite(sup):
                record(sup, r)
            break
        if sup < best_sup:
            best, best_sup = f.copy(), sup
        record(sup, r)

    report.iterations = it
    if not report.diverged:
        report.converged = sup <= target
        best = f if report.converged else best
        if not report.converged:
            report.message = f"max_iters={cfg.max_iters} reached with sup residual {sup:.3g}"
        else:
            report.message = f"converged: sup residual {sup:.3g} <= {target:.3g}"
    out = GraphField(spec, best)
    grad, _ = field_jets(out, hessian=False)
    report.c0 = float(np.linalg.norm(grad, ord=2, axis=(-2, -1)).max())
    log.info("solve_dirichlet: %s", report.message)
    return out, report
