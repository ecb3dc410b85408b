"""Extrinsic geometry of graphs F(x) = (x, f(x)) in R^{n+k}.

All kernels take jets (value, gradient, hessian) with arbitrary leading batch
dimensions, so the same code serves a single node and a whole grid.

Conventions: the coordinate tangent vectors are the columns of
``T = [I_n; Df]`` (shape ``(n+k, n)``), ``g = T^T T``, and the normal projector
is ``Q = I - T g^{-1} T^T``.  Ambient vector fields ``X`` are callables acting
on arrays of points with trailing dimension ``n+k``.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .gridfield import (
    BoundaryNodeError,
    GraphField,
    GridError,
    JetSample,
    _shift,
    field_jets,
    jet_at,
)

__all__ = [
    "GeometrySample",
    "tangent_frame",
    "induced_metric",
    "normal_projection",
    "second_fundamental_form",
    "mean_curvature",
    "geometry_from_jets",
    "geometry_at",
    "field_geometry",
    "surface_divergence",
    "surface_divergence_field",
    "tangential_gradient_norm",
    "scalar_mean_curvature",
    "geometry_csv_columns",
    "geometry_report_rows",
    "write_geometry_csv",
]

COND_WARN = 1e8


@dataclass(frozen=True)
class GeometrySample:
    point: np.ndarray  # (..., n)
    position: np.ndarray  # (..., n+k)
    tangent_frame: np.ndarray  # (..., n+k, n)
    metric: np.ndarray  # (..., n, n)
    metric_inv: np.ndarray
    det_metric: np.ndarray  # (...)
    area_element: np.ndarray
    projection: np.ndarray  # (..., n+k, n+k)
    second_fundamental_form: np.ndarray  # (..., n+k, n, n)
    mean_curvature: np.ndarray  # (..., n+k)
    F_perp: np.ndarray
    F_tan: np.ndarray


def tangent_frame(gradient) -> np.ndarray:
    """Columns ``tau_i = e_i + D_i f`` stacked into shape ``(..., n+k, n)``."""
    grad = np.asarray(gradient, dtype=float)
    n = grad.shape[-1]
    eye = np.broadcast_to(np.eye(n), grad.shape[:-2] + (n, n))
    return np.concatenate([eye, grad], axis=-2)


def _grad(jet):
    return jet.gradient if isinstance(jet, JetSample) else np.asarray(jet, dtype=float)


def induced_metric(jet) -> np.ndarray:
    """``g_ij = delta_ij + sum_a D_i f^a D_j f^a``; accepts a JetSample or a gradient array."""
    grad = _grad(jet)
    n = grad.shape[-1]
    return np.eye(n) + np.einsum("...ai,...aj->...ij", grad, grad)


def _projection(frame, ginv):
    N = frame.shape[-2]
    return np.eye(N) - np.einsum("...Ai,...ij,...Bj->...AB", frame, ginv, frame)


def normal_projection(jet) -> np.ndarray:
    grad = _grad(jet)
    g = induced_metric(grad)
    cond = np.linalg.cond(g)
    if np.any(cond > COND_WARN):
        warnings.warn(f"induced metric condition number {np.max(cond):.3g} exceeds {COND_WARN:g}")
    return _projection(tangent_frame(grad), np.linalg.inv(g))


def _second_fundamental_form(Q, hess, n):
    # II_ij = Q (0 (+) D^2_ij f): only the last k columns of Q act
    return np.einsum("...Aa,...aij->...Aij", Q[..., :, n:], hess)


def second_fundamental_form(jet: JetSample) -> np.ndarray:
    n = jet.gradient.shape[-1]
    return _second_fundamental_form(normal_projection(jet), jet.hessian, n)


def mean_curvature(jet: JetSample) -> np.ndarray:
    ginv = np.linalg.inv(induced_metric(jet))
    return np.einsum("...ij,...Aij->...A", ginv, second_fundamental_form(jet))


def geometry_from_jets(points, values, gradient, hessian) -> GeometrySample:
    """Full extrinsic package from (batched) jets."""
    points = np.asarray(points, dtype=float)
    n = points.shape[-1]
    frame = tangent_frame(gradient)
    g = induced_metric(gradient)
    ginv = np.linalg.inv(g)
    det = np.linalg.det(g)
    Q = _projection(frame, ginv)
    II = _second_fundamental_form(Q, hessian, n)
    H = np.einsum("...ij,...Aij->...A", ginv, II)
    F = np.concatenate([points, np.asarray(values, dtype=float)], axis=-1)
    Fp = np.einsum("...AB,...B->...A", Q, F)
    return GeometrySample(points, F, frame, g, ginv, det, np.sqrt(det), Q, II, H, Fp, F - Fp)


def geometry_at(field: GraphField, node) -> GeometrySample:
    jet = jet_at(field, node)
    return geometry_from_jets(jet.point, jet.value, jet.gradient, jet.hessian)


def field_geometry(field: GraphField) -> GeometrySample:
    """Geometry at every interior node; batch shape ``(m-2,)*n``."""
    n = field.spec.n
    grad, hess = field_jets(field)
    pts = field.spec.interior_points()
    vals = field.values[(slice(1, -1),) * n]
    return geometry_from_jets(pts, vals, grad, hess)


# ---------------------------------------------------------------- divergence

def _composite(X, field: GraphField):
    """Ambient field evaluated along the graph, shape ``(m,)*n + (n+k,)``."""
    F = np.concatenate([field.spec.points(), field.values], axis=-1)
    out = np.asarray(X(F), dtype=float)
    if out.shape != F.shape:
        out = np.broadcast_to(out, F.shape)
    return out


def _divergence_from_samples(XF, n, h, frame, ginv):
    """``g^{ij} <d_i (X o F), tau_j>`` with centered differences over interior nodes of XF."""
    dX = np.stack(
        [(_shift(XF, n, _unit(n, i, 1)) - _shift(XF, n, _unit(n, i, -1))) / (2 * h) for i in range(n)],
        axis=-1,
    )
    return np.einsum("...ij,...Ai,...Aj->...", ginv, dX, frame)


def _unit(n, axis, s):
    off = [0] * n
    off[axis] = s
    return off


def surface_divergence_field(X, field: GraphField) -> np.ndarray:
    """``div_Sigma X`` at every interior node (batch shape ``(m-2,)*n``)."""
    n, h = field.spec.n, field.spec.h
    grad, _ = field_jets(field, hessian=False)
    frame = tangent_frame(grad)
    ginv = np.linalg.inv(induced_metric(grad))
    return _divergence_from_samples(_composite(X, field), n, h, frame, ginv)


def surface_divergence(X, field: GraphField, node) -> float:
    spec = field.spec
    node = tuple(int(i) for i in node)
    for axis, i in enumerate(node):
        if not 1 <= i <= spec.m - 2:
            raise BoundaryNodeError(f"node {node} too close to the boundary along axis {axis}", axis)
    jet = jet_at(field, node)
    frame = tangent_frame(jet.gradient)
    ginv = np.linalg.inv(induced_metric(jet))
    block_sl = tuple(slice(i - 1, i + 2) for i in node)
    F = np.concatenate([spec.points()[block_sl], field.values[block_sl]], axis=-1)
    XF = np.broadcast_to(np.asarray(X(F), dtype=float), F.shape)
    div = _divergence_from_samples(XF, spec.n, spec.h, frame, ginv)
    return float(div[(0,) * spec.n])


def tangential_gradient_norm(phi, field: GraphField) -> np.ndarray:
    """Norm of the surface gradient of an ambient scalar ``phi`` at interior nodes.

    ``|grad_Sigma phi|^2 = d_i(phi o F) g^{ij} d_j(phi o F)``.
    """
    n, h = field.spec.n, field.spec.h
    F = np.concatenate([field.spec.points(), field.values], axis=-1)
    pf = np.asarray(phi(F), dtype=float)
    d = np.stack(
        [(_shift(pf, n, _unit(n, i, 1)) - _shift(pf, n, _unit(n, i, -1))) / (2 * h) for i in range(n)],
        axis=-1,
    )
    grad, _ = field_jets(field, hessian=False)
    ginv = np.linalg.inv(induced_metric(grad))
    return np.sqrt(np.einsum("...i,...ij,...j->...", d, ginv, d))


def scalar_mean_curvature(field: GraphField) -> np.ndarray:
    """Codimension-one oracle ``div(Df / sqrt(1 + |Df|^2))``.

    Computed in divergence form (flux first, then a second centered
    difference), independent of the projector route.  Defined on nodes at
    least two away from the boundary; batch shape ``(m-4,)*n``.
    """
    if field.spec.k != 1:
        raise GridError("scalar mean curvature is only defined for codimension 1")
    n, h = field.spec.n, field.spec.h
    grad, _ = field_jets(field, hessian=False)
    grad = grad[..., 0, :]
    flux = grad / np.sqrt(1.0 + np.einsum("...i,...i->...", grad, grad))[..., None]
    div = np.zeros(flux.shape[:-1])[(slice(1, -1),) * n]
    for i in range(n):
        comp = flux[..., i]
        div = div + (_shift(comp, n, _unit(n, i, 1)) - _shift(comp, n, _unit(n, i, -1))) / (2 * h)
    return div


# ---------------------------------------------------------------- report

def geometry_csv_columns(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)] + [
        "H_norm", "Fperp_norm", "residual_norm", "det_g", "lambda_min", "lambda_max",
    ]



def geometry_report_rows(field: GraphField) -> list[list[float]]:
    geo = field_geometry(field)
    n = field.spec.n
    eig = np.linalg.eigvalsh(geo.metric)
    cols = [
        np.linalg.norm(geo.mean_curvature, axis=-1),
        np.linalg.norm(geo.F_perp, axis=-1),
        np.linalg.norm(geo.mean_curvature + geo.F_perp, axis=-1),
        geo.det_metric,
        eig[..., 0],
        eig[..., -1],
    ]
    table = np.concatenate(
        [geo.point.reshape(-1, n)] + [c.reshape(-1, 1) for c in cols], axis=1
    )
    return table.tolist()


def write_geometry_csv(field: GraphField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(geometry_csv_columns(field.spec.n))
        for row in geometry_report_rows(field):
            w.writerow([f"{v:.17g}" for v in row])
