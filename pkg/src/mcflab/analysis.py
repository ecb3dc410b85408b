"""Numerical checks of the integral identities and estimates behind the blow-down.

Integrals over the ball ``B_R`` use a product Gauss rule in polar coordinates
applied to the multilinear interpolant of nodal integrands (node-masked
midpoint sums are staircase-limited).  Boundary integrals over ``dSigma_R``
(the graph over ``|x| = R``) use :func:`~mcflab.gridfield.sphere_rule` with
jets interpolated from the nodes.

Blow-down family: ``f_lam(x) = f(lam x) / lam`` sampled on a sphere for a
ladder of scales.  Sources are a GraphField (interpolated) or a vectorized
closed-form generator (evaluated exactly).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .geometry import field_geometry, geometry_from_jets, surface_divergence_field, tangent_frame
from .gridfield import (
    GraphField,
    GridError,
    GridSpec,
    OutOfDomainError,
    SphereSampling,
    SplineJets,
    _shift,
    ball_polar_quadrature,
    field_jets,
    interpolate_many,
    sphere_area,
    sphere_rule,
)

__all__ = [
    "MetricBoundError",
    "EstimateReport",
    "BoundaryQuadrature",
    "DivergenceCheck",
    "BlowdownSequence",
    "ConeProfile",
    "weighted_position_field",
    "boundary_quadrature",
    "ball_integral",
    "divergence_identity_check",
    "estimate_star",
    "estimate_K",
    "metric_bound_check",
    "sample_blowdown",
    "cauchy_bound_check",
    "estimate_cone",
    "homogeneity_defect",
    "dlambda_identity_check",
]


class MetricBoundError(ArithmeticError):
    def __init__(self, message, nodes):
        super().__init__(message)
        self.nodes = nodes


@dataclass
class EstimateReport:
    check: str
    rows: list = dc_field(default_factory=list)  # dicts with param, lhs, rhs, ratio
    C: float = 0.0
    flags: dict = dc_field(default_factory=dict)

    def csv_rows(self):
        for r in self.rows:
            yield [self.check, r["param"], r["lhs"], r["rhs"], r["ratio"]]


@dataclass(frozen=True)
class BoundaryQuadrature:
    points: np.ndarray  # (N, n) base points with |x| = R
    position: np.ndarray  # (N, n+k) lifted points F(x)
    conormal: np.ndarray  # (N, n+k)
    weights: np.ndarray  # (N,) induced (n-1)-measure
    boundary_tangents: np.ndarray  # (N, n+k, n-1) tangents of dSigma_R
    projection: np.ndarray  # (N, n+k, n+k) normal projector of Sigma


@dataclass(frozen=True)
class DivergenceCheck:
    pointwise_defect: float
    integral_defect: float
    relative_defect: float
    div_integral: float
    mean_curvature_integral: float
    flux_integral: float
    abs_flux: float


@dataclass(frozen=True)
class BlowdownSequence:
    lambdas: np.ndarray  # (L,)
    sampling: SphereSampling
    values: np.ndarray  # (L, count, k)
    source: object = None


@dataclass
class ConeProfile:
    sampling: SphereSampling
    values: np.ndarray  # (count, k) f_inf on the sampling sphere
    direction: Callable | None = None  # f_inf at arbitrary unit vectors

    def extend(self, r: float) -> np.ndarray:
        """Homogeneous extension at ``r * nodes``; odd convention for r < 0."""
        return r * self.values

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        norms = np.linalg.norm(X, axis=1)
        out = np.zeros((len(X), self.values.shape[1]))
        nz = norms > 0
        if nz.any():
            if self.direction is None:
                raise ValueError("profile has no direction evaluator")
            out[nz] = norms[nz, None] * self.direction(self.sampling.radius * X[nz] / norms[nz, None])
        return out


def weighted_position_field(s: float) -> Callable:
    """Ambient field ``X(p) = (1 + |p|)^{-s} p``."""

    def X(P):
        P = np.asarray(P, dtype=float)
        return (1.0 + np.linalg.norm(P, axis=-1, keepdims=True)) ** (-s) * P

    return X


# ---------------------------------------------------------------- quadrature helpers

def _interior_spec(spec: GridSpec, shrink: int, channels: int) -> GridSpec:
    return GridSpec(spec.n, channels, (spec.center - shrink) * spec.h, spec.h)


def _as_channels(arr, n):
    arr = np.asarray(arr, dtype=float)
    return arr[..., None] if arr.ndim == n else arr


def _resolution(spec, R):
    base = max(64, int(math.ceil(4 * R / spec.h)))
    return min(base, 64) if spec.n == 3 else base


def ball_integral(field: GraphField, nodal, R: float, shrink: int = 1, resolution=None) -> np.ndarray:
    """Integral over ``B_R`` of an array defined on nodes ``shrink`` rings inside the cube."""
    spec = field.spec
    vals = _as_channels(nodal, spec.n)
    ispec = _interior_spec(spec, shrink, vals.shape[-1])
    if R > ispec.half_width - spec.h + 1e-12:
        raise GridError(f"R={R} too large: integrand available only up to {ispec.half_width}")
    gf = GraphField(ispec, vals)
    pts, w = ball_polar_quadrature(spec.n, R, resolution or _resolution(spec, R))
    return w @ interpolate_many(gf, pts)


def boundary_quadrature(field: GraphField, R: float, resolution=None) -> BoundaryQuadrature:
    """Lifted sphere ``dSigma_R`` with exterior conormals and induced weights.

    The conormal is the tangential projection of the radial direction,
    orthogonalized against the tangents of ``dSigma_R`` and normalized.
    """
    spec = field.spec
    n, k = spec.n, spec.k
    if n > 3:
        raise GridError(f"boundary quadrature is implemented for n <= 3, got n={n}")
    if R <= 0:
        raise GridError("boundary radius must be positive")
    pts, w_sphere = sphere_rule(n, R, resolution or _resolution(spec, R))
    grad, _ = field_jets(field, hessian=False)
    gspec = _interior_spec(spec, 1, k * n)
    if R > gspec.half_width - 1e-12:
        raise GridError(f"R={R} exceeds the jet domain {gspec.half_width}")
    Df = interpolate_many(GraphField(gspec, grad.reshape(gspec.shape + (k * n,))), pts).reshape(-1, k, n)
    fv = interpolate_many(field, pts)
    frame = tangent_frame(Df)  # (N, n+k, n)
    g = np.eye(n) + np.einsum("...ai,...aj->...ij", Df, Df)
    ginv = np.linalg.inv(g)
    Q = np.eye(n + k) - np.einsum("...Ai,...ij,...Bj->...AB", frame, ginv, frame)
    er = pts / R
    # orthonormal basis of e_r^perp in R^n: trailing columns of a QR of [e_r | I]
    if n > 1:
        M = np.concatenate([er[:, :, None], np.broadcast_to(np.eye(n), (len(pts), n, n))], axis=2)
        V = np.linalg.qr(M)[0][:, :, 1:n]
        btan = frame @ V  # (N, n+k, n-1)
        gram = np.einsum("...Ai,...Aj->...ij", btan, btan)
        dsig = np.sqrt(np.linalg.det(gram))
        Ob = np.linalg.qr(btan)[0]
    else:
        btan = np.zeros((len(pts), n + k, 0))
        dsig = np.ones(len(pts))
        Ob = btan
    lift = np.concatenate([er, np.zeros((len(pts), k))], axis=1)
    u = lift - np.einsum("...AB,...B->...A", Q, lift)
    u = u - np.einsum("...Aj,...Bj,...B->...A", Ob, Ob, u)
    nu = u / np.linalg.norm(u, axis=1, keepdims=True)
    outward = np.einsum("...A,...A->...", nu, np.einsum("...Ai,...i->...A", frame, er))
    nu = np.where(outward[:, None] < 0, -nu, nu)
    F = np.concatenate([pts, fv], axis=1)
    return BoundaryQuadrature(pts, F, nu, w_sphere * dsig, btan, Q)


def _check_radius(spec, R, rings):
    limit = spec.half_width - rings * spec.h
    if R > limit + 1e-12:
        raise GridError(f"R={R} exceeds L - {rings}h = {limit}")


# ---------------------------------------------------------------- divergence theorem

def divergence_identity_check(field: GraphField, X: Callable, R: float, resolution=None) -> DivergenceCheck:
    """Pointwise ``div X^T = div X + <X, H>`` and the integrated Stokes identity on ``Sigma_R``."""
    spec = field.spec
    n, h = spec.n, spec.h
    if n not in (1, 2, 3):
        raise GridError(f"divergence checks support n in (1, 2, 3), got n={n}")
    _check_radius(spec, R, 2)
    geo = field_geometry(field)
    XF = np.asarray(X(geo.position), dtype=float)
    XF = np.broadcast_to(XF, geo.position.shape)
    divX = surface_divergence_field(X, field)
    XH = np.einsum("...A,...A->...", XF, geo.mean_curvature)

    # pointwise: differentiate X^T along Sigma on nodes two rings in
    Xt = XF - np.einsum("...AB,...B->...A", geo.projection, XF)
    dXt = np.stack(
        [(_shift(Xt, n, _unit(n, i, 1)) - _shift(Xt, n, _unit(n, i, -1))) / (2 * h) for i in range(n)],
        axis=-1,
    )
    inner = (slice(1, -1),) * n
    divXt = np.einsum("...ij,...Ai,...Aj->...", geo.metric_inv[inner], dXt, geo.tangent_frame[inner])
    pdef = np.abs(divXt - divX[inner] - XH[inner])
    pts2 = geo.point[inner]
    in_ball = np.linalg.norm(pts2, axis=-1) <= R * (1 + 1e-12)
    pointwise = float(pdef[in_ball].max()) if in_ball.any() else 0.0

    area = geo.area_element
    I_div = float(ball_integral(field, divX * area, R, 1, resolution)[0])
    I_H = float(ball_integral(field, XH * area, R, 1, resolution)[0])
    bq = boundary_quadrature(field, R, resolution)
    Xb = np.broadcast_to(np.asarray(X(bq.position), dtype=float), bq.position.shape)
    flux_density = np.einsum("...A,...A->...", Xb, bq.conormal)
    I_flux = float(bq.weights @ flux_density)
    abs_flux = float(bq.weights @ np.abs(flux_density))
    defect = abs(I_div + I_H - I_flux)
    scale = max(abs(I_div), abs(I_H), abs(I_flux), abs_flux)
    rel = defect / scale if scale > 0 else 0.0
    return DivergenceCheck(pointwise, defect, rel, I_div, I_H, I_flux, abs_flux)


def _unit(n, axis, s):
    off = [0] * n
    off[axis] = s
    return off


# ---------------------------------------------------------------- estimates (*) and (K)

def estimate_star(field: GraphField, R_list, soliton: bool = True, slack: float = 0.05,
                  resolution=None) -> EstimateReport:
    """``int_{Sigma_R} (1+|F|)^{-n} |H|^2`` versus ``int_{dSigma_R} (1+|F|)^{1-n}``.

    With ``soliton=False`` the table is reported without the inequality flag.
    """
    spec = field.spec
    n = spec.n
    geo = field_geometry(field)
    Fn = np.linalg.norm(geo.position, axis=-1)
    H2 = np.einsum("...A,...A->...", geo.mean_curvature, geo.mean_curvature)
    dens = (1 + Fn) ** (-n) * H2 * geo.area_element
    rep = EstimateReport("star")
    ok = True
    for R in R_list:
        _check_radius(spec, R, 2)
        lhs = float(ball_integral(field, dens, R, 1, resolution)[0])
        bq = boundary_quadrature(field, R, resolution)
        rhs = float(bq.weights @ (1 + np.linalg.norm(bq.position, axis=1)) ** (1 - n))
        ratio = lhs / rhs
        rep.rows.append({"param": R, "lhs": lhs, "rhs": rhs, "ratio": ratio})
        ok = ok and lhs <= rhs * (1 + slack)
    rep.C = max((r["ratio"] for r in rep.rows), default=0.0)
    rep.flags = {"holds": ok if soliton else None, "slack": slack}
    return rep


def estimate_K(field: GraphField, R_list, resolution=None) -> EstimateReport:
    """Weighted curvature integral in Lebesgue measure against the closed-form sphere term."""
    spec = field.spec
    n = spec.n
    geo = field_geometry(field)
    xn = np.linalg.norm(geo.point, axis=-1)
    H2 = np.einsum("...A,...A->...", geo.mean_curvature, geo.mean_curvature)
    dens = (1 + xn) ** (-n) * H2
    rep = EstimateReport("K")
    for R in R_list:
        _check_radius(spec, R, 2)
        lhs = float(ball_integral(field, dens, R, 1, resolution)[0])
        rhs = sphere_area(n) * R ** (n - 1) * (1 + R) ** (1 - n)
        rep.rows.append({"param": R, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
    lhs = [r["lhs"] for r in rep.rows]
    rep.C = max((r["ratio"] for r in rep.rows), default=0.0)
    sup_rhs = max((r["rhs"] for r in rep.rows), default=0.0)
    # det g bounds: transfer between dx (here) and the surface measure of (*)
    det = geo.det_metric
    rep.flags = {
        "nondecreasing": all(b >= a - 1e-14 * max(1.0, abs(a)) for a, b in zip(lhs, lhs[1:])),
        "bounded": all(v <= rep.C * sup_rhs * (1 + 1e-12) for v in lhs),
        "sqrt_det_min": float(np.sqrt(det.min())),
        "sqrt_det_max": float(np.sqrt(det.max())),
    }
    return rep


def metric_bound_check(field: GraphField, R: float | None = None) -> dict:
    """Measured ``C0 = sup|Df|`` and ``C_metric = sup lambda_max(g)`` with consistency checks."""
    geo = field_geometry(field)
    spec = field.spec
    grad, _ = field_jets(field, hessian=False)
    pts = geo.point
    mask = np.ones(pts.shape[:-1], bool)
    if R is not None:
        mask = np.linalg.norm(pts, axis=-1) <= R * (1 + 1e-12)
    gnorm = np.linalg.norm(grad, ord=2, axis=(-2, -1))[mask]
    eig = np.linalg.eigvalsh(geo.metric)[mask]
    C0 = float(gnorm.max())
    Cm = float(eig[:, -1].max())
    lam_min = float(eig[:, 0].min())
    bad = []
    if lam_min < 1 - 1e-10:
        bad.append(f"lambda_min(g) = {lam_min} < 1")
    if Cm > 1 + C0**2 + 1e-8:
        bad.append(f"lambda_max(g) = {Cm} > 1 + C0^2 = {1 + C0**2}")
    origin = (spec.center - 1,) * spec.n
    f0 = geo.position[origin][spec.n:]
    position_checked = bool(np.all(f0 == 0))
    viol_nodes = []
    if position_checked:
        xn = np.linalg.norm(pts, axis=-1)[mask]
        Fn = np.linalg.norm(geo.position, axis=-1)[mask]
        lo = (1 + xn) <= (1 + Fn) + 1e-12
        hi = (1 + Fn) <= math.sqrt(1 + C0**2) * (1 + xn) + 1e-8
        ok = lo & hi
        if not ok.all():
            viol_nodes = pts[mask][~ok].tolist()[:10]
            bad.append(f"(1+|x|) <= (1+|F|) <= sqrt(1+C0^2)(1+|x|) fails at {len(viol_nodes)}+ nodes")
    if bad:
        raise MetricBoundError("; ".join(bad), viol_nodes)
    return {"C0": C0, "C_metric": Cm, "lambda_min": lam_min, "position_bound_checked": position_checked}


# ---------------------------------------------------------------- blow-down

def _evaluator(source):
    """``(values(X), domain_half_width)`` for a GraphField or generator source."""
    if isinstance(source, GraphField):
        return (lambda X: interpolate_many(source, X)), source.spec.half_width
    return (lambda X: np.asarray(source(X), dtype=float).reshape(len(X), -1)), math.inf


def _coverage(hw, X):
    over = np.abs(X).max(axis=1) - hw
    if (over > 1e-12 * max(hw, 1.0)).any():
        i = int(np.argmax(over > 1e-12 * max(hw, 1.0)))
        raise OutOfDomainError(f"blow-down query {X[i].tolist()} leaves the domain [-{hw}, {hw}]^n",
                               float(over[i]))


def sample_blowdown(source, lambdas, sampling: SphereSampling) -> BlowdownSequence:
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or len(lam) < 1 or np.any(np.diff(lam) <= 0):
        raise ValueError("lambda ladder must be strictly increasing")
    ev, hw = _evaluator(source)
    X = sampling.nodes
    rows = []
    for l in lam:
        Q = l * X
        _coverage(hw, Q)
        rows.append(ev(Q) / l)
    vals = np.stack(rows)
    if not np.isfinite(vals).all():
        raise ValueError("non-finite blow-down samples")
    return BlowdownSequence(lam, sampling, vals, source)


def _l2sq(w, diff):
    return float(w @ np.einsum("ja,ja->j", diff, diff))


def cauchy_bound_check(seq: BlowdownSequence, atol: float = 1e-14, pointwise: bool = False) -> EstimateReport:
    """Pairwise ``int |f_lam - f_mu|^2`` against ``|mu^-2 - lam^-2|``.

    Rows run with the larger scale ``mu`` outer.  The ratios count as bounded
    when the mean of the last quarter is at most twice the mean of the first
    quarter; ratios below ``atol`` are treated as zero (a blow-down that is
    already constant in lambda only produces rounding noise there).
    ``pointwise=True`` adds ``sup_j |f_lam - f_mu|(x_j)`` to each row; no
    bound is attached to it.
    """
    lam = seq.lambdas
    if len(lam) < 3:
        raise ValueError("need at least three ladder entries")
    w = seq.sampling.weights
    rep = EstimateReport("cauchy")
    order = []
    for j in range(len(lam)):
        for i in range(j):
            denom = abs(lam[j] ** -2 - lam[i] ** -2)
            if denom == 0:
                continue
            d2 = _l2sq(w, seq.values[i] - seq.values[j])
            row = {"param": f"{lam[i]:.17g}:{lam[j]:.17g}", "lam": float(lam[i]),
                   "mu": float(lam[j]), "lhs": d2, "rhs": denom, "ratio": d2 / denom}
            if pointwise:
                row["sup_pointwise"] = float(np.linalg.norm(seq.values[i] - seq.values[j], axis=1).max())
            rep.rows.append(row)
            order.append((j, i))
    ratios = np.array([r["ratio"] for r in rep.rows])
    rep.C = float(ratios.max()) if len(ratios) else 0.0
    q = max(1, len(ratios) // 4)
    bottom, top = float(ratios[:q].mean()), float(ratios[-q:].mean())
    rep.flags = {
        "bottom_quartile_mean": bottom,
        "top_quartile_mean": top,
        "bounded": top <= 2 * bottom or top <= atol,
    }
    return rep


def estimate_cone(seq: BlowdownSequence, conical_tol: float = 1e-12):
    """Profile ``f_inf = f_{lam_max}`` plus convergence-rate diagnostics.

    The rate is the log-log slope of consecutive-scale distances
    ``||f_{lam_i} - f_{lam_{i+1}}||`` against ``lam_i``; a ``c/lam`` tail gives
    slope -1 exactly on a geometric ladder.
    """
    lam = seq.lambdas
    w = seq.sampling.weights
    vals = seq.values
    f_inf = vals[-1]
    dist = np.array([math.sqrt(_l2sq(w, v - f_inf)) for v in vals[:-1]])
    steps = np.array([math.sqrt(_l2sq(w, vals[i] - vals[i + 1])) for i in range(len(lam) - 1)])
    scale = max(1.0, math.sqrt(_l2sq(w, f_inf)))
    report = {"lambdas": lam.tolist(), "dist_to_limit": dist.tolist(), "consecutive": steps.tolist()}
    if np.all(steps <= conical_tol * scale):
        report.update(rate_slope=None, already_conical=True)
    else:
        use = steps > conical_tol * scale
        if use.sum() >= 2:
            slope = float(np.polyfit(np.log(lam[:-1][use]), np.log(steps[use]), 1)[0])
        else:
            slope = None
        report.update(rate_slope=slope, already_conical=False)
    mono = all(b <= a * (1 + 1e-6) + 1e-14 for a, b in zip(dist, dist[1:]))
    report["monotone"] = mono
    report["warning"] = None if mono else "distances to the limit are not monotone in lambda"

    ev, hw = _evaluator(seq.source) if seq.source is not None else (None, None)
    lmax = float(lam[-1])
    direction = None
    if ev is not None:
        def direction(U, _ev=ev, _l=lmax, _hw=hw):
            Q = _l * np.atleast_2d(U)
            _coverage(_hw, Q)
            return _ev(Q) / _l
        anti = direction(-seq.sampling.nodes)
        report["antipodal_defect"] = math.sqrt(_l2sq(w, anti + f_inf))
    else:
        report["antipodal_defect"] = None
    return ConeProfile(seq.sampling, f_inf.copy(), direction), report


def homogeneity_defect(profile: ConeProfile, source=None, r_list=(0.5, 2.0, -1.0),
                       sampling: SphereSampling | None = None) -> list:
    """``sum_j w_j |f(r x_j) - r f_inf(x_j)|^2 / r^2`` per r.

    Without a source the profile's own homogeneous extension is compared with
    itself, which vanishes by construction.
    """
    sampling = sampling or profile.sampling
    if sampling is not profile.sampling and sampling.nodes.shape != profile.sampling.nodes.shape:
        raise ValueError("sampling must match the profile nodes")
    w = sampling.weights
    out = []
    for r in r_list:
        if r == 0:
            raise ValueError("r must be nonzero")
        if source is None:
            vals = profile.extend(r)
        else:
            ev, hw = _evaluator(source)
            Q = r * sampling.nodes
            _coverage(hw, Q)
            vals = ev(Q)
        out.append({"r": r, "defect": _l2sq(w, vals - r * profile.values) / r**2})
    return out


def _closed_form_jets(gen, X, eta=1e-4):
    """Values, gradients and hessians of a generator by fine centered differences."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    f = lambda Y: np.asarray(gen(Y), dtype=float).reshape(len(Y), -1)
    v = f(X)
    k = v.shape[1]
    grad = np.empty((len(X), k, n))
    hess = np.empty((len(X), k, n, n))
    E = np.eye(n)
    eg = 1e-5
    for i in range(n):
        grad[:, :, i] = (f(X + eg * E[i]) - f(X - eg * E[i])) / (2 * eg)
        hess[:, :, i, i] = (f(X + eta * E[i]) - 2 * v + f(X - eta * E[i])) / eta**2
        for j in range(i + 1, n):
            d = (f(X + eta * (E[i] + E[j])) - f(X + eta * (E[i] - E[j]))
                 - f(X - eta * (E[i] - E[j])) + f(X - eta * (E[i] + E[j]))) / (4 * eta**2)
            hess[:, :, i, j] = d
            hess[:, :, j, i] = d
    return v, grad, hess


def dlambda_identity_check(source, lambdas, sampling: SphereSampling, rel_step: float = 1e-3) -> list:
    """Finite-difference ``d/dlam f_lam`` against the chain-rule and soliton forms.

    Defect A: ``lam^-2 (Df(lam x) . lam x - f(lam x))`` (valid for any f).
    Defect B: ``lam^-2 <(-Df^a(lam x), e_a), H(lam x)>`` (valid for solitons).
    GraphField sources use a C^2 cubic spline so that values and jets are
    mutually consistent along rays.  ``lam +- 2 rel_step lam`` must stay
    inside the grid.
    """
    X = sampling.nodes
    if isinstance(source, GraphField):
        spline = SplineJets(source)
        value = lambda Q: spline(Q, order=0)
        jets = lambda Q: spline(Q)
    else:
        value = lambda Q: np.asarray(source(Q), dtype=float).reshape(len(Q), -1)
        jets = lambda Q: _closed_form_jets(source, Q)
    out = []
    for lam in lambdas:
        d = rel_step * lam
        blow = lambda l: value(l * X) / l
        # five-point central difference, O(d^4)
        fd = (8 * (blow(lam + d) - blow(lam - d)) - (blow(lam + 2 * d) - blow(lam - 2 * d))) / (12 * d)
        Q = lam * X
        v, grad, hess = jets(Q)
        chain = (np.einsum("jai,ji->ja", grad, Q) - v) / lam**2
        geo = geometry_from_jets(Q, v, grad, hess)
        n = X.shape[1]
        # <(-Df^a, e_a), H>
        pair = -np.einsum("jai,ji->ja", grad, geo.mean_curvature[:, :n]) + geo.mean_curvature[:, n:]
        sol = pair / lam**2
        dA = np.abs(fd - chain)
        dB = np.abs(fd - sol)
        out.append({"lambda": float(lam), "defect_A": float(dA.max()), "defect_B": float(dB.max()),
                    "per_node_B": dB.max(axis=1)})
    return out
