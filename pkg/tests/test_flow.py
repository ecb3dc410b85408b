import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcflab.fixtures import bump, linear, shrinking_sphere
from mcflab.gridfield import GraphField, GridSpec, build_field
from mcflab.flow import (
    FlowConfig,
    FlowDivergenceError,
    FlowState,
    RescaledFlowState,
    dual_route_check,
    mcf_step,
    monitor_row,
    normalize_snapshots,
    rescaled_step,
    run_flow,
    run_rescaled,
    scaling_invariance_test,
)


def _lin_bump(slope, amp, width):
    return lambda X: slope * np.asarray(X)[:, :1] + bump(amp, width)(X)


# ---------------------------------------------------------------- config

def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(c=0.0)
    with pytest.raises(ValueError):
        FlowConfig(boundary="periodic")
    with pytest.warns(UserWarning, match="exceeds 0.5"):
        FlowConfig(c=0.6)


def test_step_larger_than_cfl_rejected():
    s = GridSpec(1, 1, 1.0, 0.1)
    st0 = FlowState(build_field(s, linear([1.0]), vectorized=True))
    with pytest.raises(ValueError, match="exceeds"):
        mcf_step(st0, FlowConfig(), dt=0.3 * s.h**2)
    with pytest.raises(ValueError, match="exceeds"):
        rescaled_step(RescaledFlowState(st0.field), FlowConfig(), ds=0.2 * s.h**2)


def test_non_finite_values_abort():
    s = GridSpec(1, 1, 1.0, 0.1)
    vals = np.zeros(s.shape + (1,))
    vals[4, 0] = 1e308  # the second difference overflows
    with np.errstate(all="ignore"), pytest.raises(FlowDivergenceError, match="node"):
        mcf_step(FlowState(GraphField(s, vals)), FlowConfig())


# ---------------------------------------------------------------- plain flow

@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (2, 2)])
def test_planes_are_stationary(n, k):
    s = GridSpec(n, k, 1.0, 0.125)
    A = np.linspace(-2.0, 3.0, n * k).reshape(k, n)
    f0 = build_field(s, linear(A), vectorized=True)
    cur = FlowState(f0)
    rcur = RescaledFlowState(f0)
    for _ in range(200):
        cur = mcf_step(cur, FlowConfig())
        rcur = rescaled_step(rcur, FlowConfig())
    assert np.abs(cur.field.values - f0.values).max() <= 1e-12
    assert np.abs(rcur.field.values - f0.values).max() <= 1e-12


def test_small_sine_decays_like_heat():
    s = GridSpec(1, 1, math.pi, math.pi / 32)
    eps = 1e-3
    f0 = build_field(s, lambda X: eps * np.sin(X), vectorized=True)
    end, snaps, rows = run_flow(FlowState(f0), FlowConfig(), 1.0, [0.25, 0.5, 0.75])
    amps = [np.abs(sn.field.values).max() for sn in snaps]
    assert all(a > b for a, b in zip(amps, amps[1:]))
    # linearized equation is the heat equation; sin x decays as e^-t
    assert amps[-1] / amps[0] == pytest.approx(math.exp(-1.0), rel=5e-3)
    assert [r["t"] for r in rows] == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_grim_reaper_single_step():
    errs = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        s = GridSpec(1, 1, 1.0, h)
        f0 = build_field(s, lambda X: -np.log(np.cos(X)), vectorized=True)
        one = mcf_step(FlowState(f0), FlowConfig())
        dt = one.t
        exact = build_field(s, lambda X: dt - np.log(np.cos(X)), vectorized=True)
        err = np.abs(one.field.values - exact.values)[1:-1].max()
        assert err <= 10 * dt * (dt + h * h)
        errs.append(err / dt)
    # per-unit-time error is second order in h
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_time_and_steps_monotone():
    s = GridSpec(2, 1, 1.0, 0.125)
    cur = FlowState(build_field(s, shrinking_sphere(2), vectorized=True))
    ts = []
    for _ in range(5):
        cur = mcf_step(cur, FlowConfig())
        ts.append(cur.t)
    assert np.all(np.diff(ts) > 0) and cur.steps == 5


def test_extrapolate_boundary_is_linear_continuation():
    s = GridSpec(1, 1, 1.0, 0.125)
    cfg = FlowConfig(boundary="extrapolate")
    out = mcf_step(FlowState(build_field(s, lambda X: X**2, vectorized=True)), cfg)
    v = out.field.values[:, 0]
    assert v[0] == pytest.approx(2 * v[1] - v[2], abs=1e-15)
    assert v[-1] == pytest.approx(2 * v[-2] - v[-3], abs=1e-15)
    assert out.boundary == "extrapolate"


def test_gradient_bound_with_frozen_linear_boundary():
    s = GridSpec(2, 1, 1.0, 1 / 16)
    f0 = build_field(s, _lin_bump(0.7, 0.3, 0.5), vectorized=True)
    _, _, rows = run_flow(FlowState(f0), FlowConfig(), 0.1, np.linspace(0.01, 0.09, 9))
    g0 = rows[0]["sup_grad"]
    assert max(r["sup_grad"] for r in rows) <= 1.01 * g0


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-0.5, 0.5), st.floats(0.3, 0.8))
def test_gradient_bound_property(slope, amp, width):
    s = GridSpec(1, 1, 1.0, 1 / 16)
    f0 = build_field(s, _lin_bump(slope, amp, width), vectorized=True)
    _, _, rows = run_flow(FlowState(f0), FlowConfig(), 0.05, [0.01, 0.02, 0.03, 0.04])
    assert max(r["sup_grad"] for r in rows) <= 1.01 * rows[0]["sup_grad"]


# ---------------------------------------------------------------- rescaled flow

def test_rescaled_residual_decreases():
    s = GridSpec(1, 1, 1.0, 1 / 16)
    f0 = build_field(s, _lin_bump(0.5, 0.2, 0.5), vectorized=True)
    _, _, rows = run_rescaled(RescaledFlowState(f0), FlowConfig(), 1.0, np.linspace(0.1, 0.9, 9))
    res = [r["sup_residual"] for r in rows]
    assert all(a > b for a, b in zip(res, res[1:]))


def test_s_and_t_consistent():
    s = GridSpec(1, 1, 1.0, 0.125)
    f0 = build_field(s, linear([1.0]), vectorized=True)
    _, snaps, rows = run_rescaled(RescaledFlowState(f0), FlowConfig(), 0.3, [0.1, 0.2])
    for sn, row in zip(snaps, rows):
        assert abs(sn.t - math.exp(2 * sn.s)) <= 1e-12 * sn.t
        assert row["t"] == sn.t and row["s"] == sn.s
    assert [sn.s for sn in snaps] == [0.0, 0.1, 0.2, 0.3]


def test_monitor_row_on_plane():
    s = GridSpec(2, 1, 1.0, 0.25)
    row = monitor_row(build_field(s, linear([3.0, 4.0]), vectorized=True))
    assert row["sup_grad"] == pytest.approx(5.0, abs=1e-12)
    assert row["sup_velocity"] < 1e-12 and row["sup_residual"] < 1e-12


# ---------------------------------------------------------------- normalization

def test_normalization_at_unit_time_is_identity():
    s = GridSpec(2, 1, 1.0, 0.125)
    f = build_field(s, shrinking_sphere(2), vectorized=True)
    (out,) = normalize_snapshots([FlowState(f, 1.0)])
    assert out.s == 0.0
    np.testing.assert_array_equal(out.field.values, f.values)
    assert not out.missing.any()


def test_normalization_needs_late_times():
    s = GridSpec(1, 1, 1.0, 0.125)
    with pytest.raises(ValueError, match="t >= 1"):
        normalize_snapshots([FlowState(build_field(s, linear([1.0]), vectorized=True), 0.5)])


def test_self_similar_family_normalizes_to_profile():
    phi = lambda X: np.sqrt(3.0 + np.sum(np.asarray(X) ** 2, axis=1, keepdims=True))
    target = GridSpec(1, 1, 1.0, 1 / 16)
    errs = []
    for h in (1 / 32, 1 / 64):
        snaps = []
        for t in (1.0, 2.0, 4.0):
            big = GridSpec(1, 1, 2.0, h)
            vals = build_field(big, lambda X: math.sqrt(t) * phi(np.asarray(X) / math.sqrt(t)), vectorized=True)
            snaps.append(FlowState(vals, t))
        out = normalize_snapshots(snaps, target)
        ref = build_field(target, phi, vectorized=True).values
        for o, t in zip(out, (1.0, 2.0, 4.0)):
            assert o.s == pytest.approx(0.5 * math.log(t))
            assert not o.missing.any()
        errs.append(max(np.abs(o.field.values - ref).max() for o in out))
    assert errs[0] < 1e-4 and errs[1] < errs[0]


def test_normalization_flags_uncovered_nodes():
    s = GridSpec(1, 1, 1.0, 0.125)
    (out,) = normalize_snapshots([FlowState(build_field(s, linear([1.0]), vectorized=True), 4.0)])
    x = s.points()[..., 0]
    np.testing.assert_array_equal(out.missing, np.abs(x) > 0.5 + 1e-12)
    np.testing.assert_allclose(out.field.values[~out.missing, 0], x[~out.missing], atol=1e-15)


# ---------------------------------------------------------------- scaling and dual route

def test_scaling_invariance_linear_is_exact():
    r = scaling_invariance_test(linear([0.8]), GridSpec(1, 1, 2.0, 0.1), 0.2)
    assert r["defect"] <= 1e-14


def test_scaling_invariance_bump():
    f0 = _lin_bump(0.3, 0.5, 1.0)
    for h in (0.1, 0.05):
        r = scaling_invariance_test(f0, GridSpec(1, 1, 4.0, h), 0.5)
        assert r["defect"] <= r["bound"]


def test_scaling_invariance_unrefined_shrinks():
    f0 = _lin_bump(0.3, 0.5, 1.0)
    d = [scaling_invariance_test(f0, GridSpec(1, 1, 4.0, h), 0.5, refine=False)["defect"] for h in (0.1, 0.05)]
    assert d[0] / d[1] > 3.0


def test_dual_route_agrees():
    f1 = _lin_bump(0.5, 0.5, 1.0)
    out = [dual_route_check(f1, GridSpec(1, 1, 16, h), GridSpec(1, 1, 8, h), 4.0) for h in (0.1, 0.05)]
    for r in out:
        assert r["defect"] <= 8 * r["scale"]
        assert [row["t"] for row in r["rows"]] == pytest.approx([2.0, 4.0])
    assert out[0]["defect"] / out[1]["defect"] > 2 ** 0.8
