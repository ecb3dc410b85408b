"""Explicit steppers for graphical mean curvature flow.

Plain flow:     ``d_t f = g^{ij} D_ij f``.
Rescaled flow:  ``d_s fh = 2 g^{ij} D_ij fh + x . D fh - fh`` for
``fh(x, s) = t^{-1/2} f(sqrt(t) x, t)`` with ``s = log(t) / 2``.

Both are forward Euler with centered differences; steps are pure maps from
one field to the next.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .gridfield import GraphField, GridError, GridSpec, build_field, field_jets, interpolate_many
from .soliton import _drift, _elliptic_and_grad, _scalar_residual

__all__ = [
    "FlowDivergenceError",
    "FlowConfig",
    "FlowState",
    "RescaledFlowState",
    "mcf_step",
    "rescaled_step",
    "run_flow",
    "run_rescaled",
    "normalize_snapshots",
    "scaling_invariance_test",
    "dual_route_check",
    "monitor_row",
]

BOUNDARY_POLICIES = ("frozen", "extrapolate")


class FlowDivergenceError(RuntimeError):
    """Non-finite values produced by a step."""


@dataclass(frozen=True)
class FlowConfig:
    c: float = 0.2
    t_end: float | None = None
    boundary: str = "frozen"
    snapshots: tuple = ()

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"CFL factor must be positive, got {self.c}")
        if self.c > 0.5:
            warnings.warn(f"CFL factor {self.c} exceeds 0.5; explicit steps are likely unstable")
        if self.boundary not in BOUNDARY_POLICIES:
            raise ValueError(f"boundary policy must be one of {BOUNDARY_POLICIES}")


@dataclass(frozen=True)
class FlowState:
    field: GraphField
    t: float = 0.0
    steps: int = 0
    boundary: str = "frozen"


@dataclass(frozen=True)
class RescaledFlowState:
    field: GraphField
    s: float = 0.0
    steps: int = 0
    missing: np.ndarray | None = None  # nodes not covered by a normalized snapshot

    @property
    def t(self) -> float:
        return math.exp(2.0 * self.s)


def _apply_boundary(values, n, policy):
    if policy == "frozen":
        return values
    # linear extrapolation from the two nearest interior layers, axis by axis
    for axis in range(n):
        v = np.moveaxis(values, axis, 0)
        v[0] = 2 * v[1] - v[2]
        v[-1] = 2 * v[-2] - v[-3]
    return values


def _checked(values, where):
    if not np.isfinite(values).all():
        node = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0][:-1])
        raise FlowDivergenceError(f"non-finite value at node {node} after {where}")
    return values


def mcf_step(state: FlowState, cfg: FlowConfig, dt: float | None = None) -> FlowState:
    spec = state.field.spec
    n, h = spec.n, spec.h
    dt_max = cfg.c * h * h
    dt = dt_max if dt is None else dt
    if dt > dt_max * (1 + 1e-12):
        raise ValueError(f"time step {dt} exceeds c h^2 = {dt_max}")
    vals = np.array(state.field.values)
    ell, _ = _elliptic_and_grad(vals, n, h)
    vals[(slice(1, -1),) * n] += dt * ell
    vals = _checked(_apply_boundary(vals, n, cfg.boundary), f"step {state.steps + 1}")
    return FlowState(GraphField(spec, vals), state.t + dt, state.steps + 1, cfg.boundary)


def _rescaled_rhs(vals, points, n, h):
    ell, grad = _elliptic_and_grad(vals, n, h)
    return 2 * ell + _drift(points, grad, n) - vals[(slice(1, -1),) * n]


def rescaled_step(state: RescaledFlowState, cfg: FlowConfig, ds: float | None = None,
                  _points=None) -> RescaledFlowState:
    spec = state.field.spec
    n, h = spec.n, spec.h
    ds_max = cfg.c * h * h / 2
    ds = ds_max if ds is None else ds
    if ds > ds_max * (1 + 1e-12):
        raise ValueError(f"rescaled step {ds} exceeds c h^2 / 2 = {ds_max}")
    points = spec.points() if _points is None else _points
    vals = np.array(state.field.values)
    vals[(slice(1, -1),) * n] += ds * _rescaled_rhs(vals, points, n, h)
    vals = _checked(_apply_boundary(vals, n, cfg.boundary), f"rescaled step {state.steps + 1}")
    return RescaledFlowState(GraphField(spec, vals), state.s + ds, state.steps + 1)


def monitor_row(field: GraphField, rescaled: bool = False) -> dict:
    """sup|Df|, sup of the step velocity, and sup of the matching soliton residual."""
    spec = field.spec
    grad, _ = field_jets(field, hessian=False)
    vals = np.asarray(field.values)
    if rescaled:
        vel = _rescaled_rhs(vals, spec.points(), spec.n, spec.h)
        # fixed points of the rescaled flow: 2 g D^2 f + x.Df - f = 0
        res = vel
    else:
        vel, _ = _elliptic_and_grad(vals, spec.n, spec.h)
        res = _scalar_residual(vals, spec.points(), spec.n, spec.h)
    return {
        "sup_grad": float(np.linalg.norm(grad, ord=2, axis=(-2, -1)).max()),
        "sup_velocity": float(np.abs(vel).max()),
        "sup_residual": float(np.abs(res).max()),
    }


def _schedule(start, end, stops, max_step):
    """Step sizes <= max_step from start to end landing exactly on each stop."""
    marks = sorted({float(x) for x in stops if start < x < end} | {float(end)})
    out = []
    cur = start
    for mark in marks:
        span = mark - cur
        nsteps = max(1, math.ceil(span / max_step - 1e-9))
        out.append((mark, nsteps, span / nsteps))
        cur = mark
    return out


def run_flow(state: FlowState, cfg: FlowConfig, t_end: float | None = None,
             snapshot_times=None):
    """Advance to ``t_end``, landing exactly on each snapshot time.

    Returns ``(final_state, snapshots, rows)`` where ``rows`` holds one
    monitor row per snapshot (the initial state included).
    """
    t_end = cfg.t_end if t_end is None else t_end
    if t_end is None:
        raise ValueError("no end time given")
    times = cfg.snapshots if snapshot_times is None else snapshot_times
    h = state.field.spec.h
    snaps = [state]
    rows = [{"t": state.t, **monitor_row(state.field)}]
    cur = state
    for mark, nsteps, dt in _schedule(state.t, t_end, times, cfg.c * h * h):
        for _ in range(nsteps):
            cur = mcf_step(cur, cfg, dt)
        cur = FlowState(cur.field, mark, cur.steps, cur.boundary)
        snaps.append(cur)
        rows.append({"t": cur.t, **monitor_row(cur.field)})
    return cur, snaps, rows


def run_rescaled(state: RescaledFlowState, cfg: FlowConfig, s_end: float, snapshot_s=()):
    spec = state.field.spec
    points = spec.points()
    snaps = [state]
    rows = [{"s": state.s, "t": state.t, **monitor_row(state.field, rescaled=True)}]
    cur = state
    for mark, nsteps, ds in _schedule(state.s, s_end, snapshot_s, cfg.c * spec.h**2 / 2):
        for _ in range(nsteps):
            cur = rescaled_step(cur, cfg, ds, _points=points)
        cur = RescaledFlowState(cur.field, mark, cur.steps)
        snaps.append(cur)
        rows.append({"s": cur.s, "t": cur.t, **monitor_row(cur.field, rescaled=True)})
    return cur, snaps, rows


def normalize_snapshots(snapshots, target: GridSpec | None = None):
    """``fh(x, s) = t^{-1/2} f(sqrt(t) x, t)`` for each snapshot with ``t >= 1``.

    Values are interpolated onto the nodes of ``target`` (default: the
    snapshot grid).  Nodes whose query ``sqrt(t) x`` leaves the stored domain
    are flagged in ``missing`` and hold 0.
    """
    out = []
    for snap in snapshots:
        if snap.t < 1.0 - 1e-12:
            raise ValueError(f"normalization needs t >= 1, got t={snap.t}")
        spec = snap.field.spec
        tgt = spec if target is None else target
        if tgt.n != spec.n or tgt.k != spec.k:
            raise GridError("target grid has a different dimension")
        s = 0.5 * math.log(snap.t)
        if snap.t == 1.0 and tgt == spec:
            out.append(RescaledFlowState(snap.field, 0.0, 0, np.zeros(spec.shape, bool)))
            continue
        X = tgt.points().reshape(-1, tgt.n)
        Q = math.sqrt(snap.t) * X
        ok = np.abs(Q).max(axis=1) <= spec.half_width * (1 + 1e-12)
        vals = np.zeros((len(X), tgt.k))
        vals[ok] = interpolate_many(snap.field, Q[ok]) / math.sqrt(snap.t)
        out.append(RescaledFlowState(
            GraphField(tgt, vals.reshape(tgt.shape + (tgt.k,))), s, 0, ~ok.reshape(tgt.shape)
        ))
    return out


def _evolve_to(field, cfg, t_total, nsteps):
    dt = t_total / nsteps
    st = FlowState(field, 0.0, 0, cfg.boundary)
    for _ in range(nsteps):
        st = mcf_step(st, cfg, dt)
    return st


def scaling_invariance_test(f0, spec: GridSpec, t: float, lam: float = 2.0,
                            cfg: FlowConfig | None = None, refine: bool = True) -> dict:
    """Compare the flow of ``f0`` with the flow of ``lam^-1 f0(lam .)``.

    The first run uses ``spec`` up to time ``t``; the second uses half width
    ``L/lam`` up to ``t/lam^2`` with spacing ``h/lam`` (``refine=True``) or
    ``h`` (``refine=False``).  Returns the sup defect over common nodes.
    """
    cfg = cfg or FlowConfig()
    n, k, L, h = spec.n, spec.k, spec.L, spec.h
    h_small = h / lam if refine else h
    small = GridSpec(n, k, L / lam, h_small)
    # small node x must map to a big node lam*x
    stride = lam * h_small / h
    if abs(stride - round(stride)) > 1e-9 or abs(small.half_width * lam - spec.half_width) > 1e-9 * L:
        raise GridError(f"grids incompatible for lambda={lam}: node map stride {stride}")
    stride = int(round(stride))

    big0 = build_field(spec, f0, vectorized=True)
    small0 = build_field(small, lambda X: f0(lam * np.asarray(X)) / lam, vectorized=True)
    n_big = max(1, math.ceil(t / (cfg.c * h * h) - 1e-9))
    if refine:
        n_small = n_big
    else:
        n_small = max(1, math.ceil(t / lam**2 / (cfg.c * h_small**2) - 1e-9))
    big = _evolve_to(big0, cfg, t, n_big)
    sm = _evolve_to(small0, cfg, t / lam**2, n_small)

    c = spec.center
    idx = c + stride * (np.arange(small.m) - small.center)
    sel = np.ix_(*([idx] * n))
    defect = float(np.abs(big.field.values[sel] / lam - sm.field.values).max())
    return {
        "defect": defect,
        "dt": t / n_big,
        "h": h,
        "steps": (n_big, n_small),
        "refine": refine,
        "bound": 8 * (t / n_big + h * h),
    }


def dual_route_check(f1, plain: GridSpec, rescaled: GridSpec, T: float,
                     cfg: FlowConfig | None = None, snapshot_times=None) -> dict:
    """Two routes to the normalized flow starting from ``f(., 1) = f1``.

    Route A steps the plain flow on ``plain`` from t=1 to T and normalizes the
    snapshots onto ``rescaled``.  Route B steps the rescaled equation on
    ``rescaled`` from s=0.  Both freeze their boundary values, so the far
    field of ``f1`` should be linear (planes are fixed by both flows).
    """
    cfg = cfg or FlowConfig()
    if snapshot_times is None:
        snapshot_times = [2.0 ** j for j in range(1, int(math.floor(math.log2(T))) + 1)]
    snapshot_times = sorted({float(x) for x in snapshot_times if 1 < x <= T} | {float(T)})
    start = FlowState(build_field(plain, f1, vectorized=True), 1.0, 0, cfg.boundary)
    _, snaps, _ = run_flow(start, cfg, T, snapshot_times)
    normalized = normalize_snapshots(snaps[1:], rescaled)

    r0 = RescaledFlowState(build_field(rescaled, f1, vectorized=True), 0.0)
    s_marks = [0.5 * math.log(t) for t in snapshot_times]
    _, rsnaps, _ = run_rescaled(r0, cfg, s_marks[-1], s_marks)

    rows = []
    for norm, stepped in zip(normalized, rsnaps[1:]):
        ok = ~norm.missing
        d = np.abs(norm.field.values - stepped.field.values)[ok]
        rows.append({"s": stepped.s, "t": stepped.t, "defect": float(d.max())})
    ds = cfg.c * rescaled.h**2 / 2
    return {
        "rows": rows,
        "defect": max(r["defect"] for r in rows),
        "ds": ds,
        "h": rescaled.h,
        "scale": ds + rescaled.h**2,
    }
