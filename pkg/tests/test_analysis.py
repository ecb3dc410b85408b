import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcflab.analysis import (
    MetricBoundError,
    ball_integral,
    boundary_quadrature,
    cauchy_bound_check,
    divergence_identity_check,
    dlambda_identity_check,
    estimate_K,
    estimate_cone,
    estimate_star,
    homogeneity_defect,
    metric_bound_check,
    sample_blowdown,
    weighted_position_field,
)
from mcflab.fixtures import abs_plus_one, abs_squared, bump, linear, random_smooth, shrinking_sphere
from mcflab.gridfield import GridError, GridSpec, OutOfDomainError, build_field, sphere_area, sphere_sampling

SPHERE = shrinking_sphere(2, clamp=1.35)
R_STAR = (0.4, 0.8, 1.2)


def _const(P):
    return np.broadcast_to([1.0, 0.0, 0.5], np.shape(P))


def _position(P):
    return np.asarray(P)


FIELDS = {"constant": _const, "position": _position, "weighted": weighted_position_field(2)}


def _sphere_field(h):
    return build_field(GridSpec(2, 1, 1.3125, h), SPHERE, vectorized=True)


# ---------------------------------------------------------------- boundary quadrature

@pytest.mark.parametrize("make,R", [
    (lambda: _sphere_field(1 / 32), 0.8),
    (lambda: build_field(GridSpec(2, 2, 1.0, 1 / 16), random_smooth(2, 2, seed=4, amplitude=1.0), vectorized=True), 0.7),
    (lambda: build_field(GridSpec(3, 1, 1.0, 1 / 8), random_smooth(3, 1, seed=5, amplitude=0.8), vectorized=True), 0.6),
])
def test_conormal_invariants(make, R):
    bq = boundary_quadrature(make(), R)
    nu = bq.conormal
    np.testing.assert_allclose(np.linalg.norm(nu, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("jAB,jB->jA", bq.projection, nu), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("jAt,jA->jt", bq.boundary_tangents, nu), 0.0, atol=1e-12)
    n = bq.points.shape[1]
    # outward: positive pairing with the base radial direction
    assert np.all(np.einsum("ji,ji->j", nu[:, :n], bq.points) > 0)


def test_sphere_boundary_length():
    bq = boundary_quadrature(_sphere_field(1 / 32), 0.8)
    # the lifted circle |x| = R is horizontal on the hemisphere
    assert bq.weights.sum() == pytest.approx(2 * math.pi * 0.8, rel=1e-8)


def test_radius_must_leave_two_rings():
    f = build_field(GridSpec(2, 1, 1.0, 0.125), linear([1.0, 0.0]), vectorized=True)
    with pytest.raises(GridError, match="exceeds"):
        divergence_identity_check(f, _position, 0.9)


# ---------------------------------------------------------------- divergence theorem

@pytest.mark.parametrize("name", sorted(FIELDS))
def test_divergence_identity_on_plane(name):
    f = build_field(GridSpec(2, 1, 1.0, 1 / 32), linear([0.5, -0.25]), vectorized=True)
    d = divergence_identity_check(f, FIELDS[name], 0.8)
    assert d.mean_curvature_integral == pytest.approx(0.0, abs=1e-12)
    assert d.relative_defect < 1e-3


def test_divergence_identity_on_sphere_converges():
    rel = {k: [] for k in FIELDS}
    for h in (1 / 32, 1 / 64):
        f = _sphere_field(h)
        for name, X in FIELDS.items():
            d = divergence_identity_check(f, X, 1.2)
            rel[name].append(d.relative_defect)
            assert d.pointwise_defect < 50 * h * h
    for name, (a, b) in rel.items():
        assert b < 1e-3
        assert 3.0 < a / b < 5.0, name


def test_position_flux_on_plane_matches_closed_form():
    # div_Sigma F = n on any graph, so the Stokes flux is n |Sigma_R| on a plane
    a = np.array([0.5, -0.25])
    f = build_field(GridSpec(2, 1, 1.0, 1 / 32), linear(a), vectorized=True)
    d = divergence_identity_check(f, _position, 0.8)
    area = math.pi * 0.64 * math.sqrt(1 + a @ a)
    assert d.div_integral == pytest.approx(2 * area, rel=1e-3)
    assert d.flux_integral == pytest.approx(2 * area, rel=1e-3)


# ---------------------------------------------------------------- (*) and (K)

def test_star_on_sphere():
    rep = estimate_star(_sphere_field(1 / 32), R_STAR)
    assert rep.flags["holds"]
    np.testing.assert_allclose([r["ratio"] for r in rep.rows], [0.1692, 0.3633, 0.6500], atol=5e-4)


def test_star_report_only_mode():
    f = build_field(GridSpec(2, 1, 1.0, 1 / 16), random_smooth(2, 1, seed=3), vectorized=True)
    rep = estimate_star(f, [0.3, 0.6], soliton=False)
    assert rep.flags["holds"] is None
    assert len(rep.rows) == 2 and all(r["rhs"] > 0 for r in rep.rows)


def test_K_on_plane_is_zero():
    rep = estimate_K(build_field(GridSpec(2, 1, 1.0, 1 / 16), linear([1.0, 2.0]), vectorized=True), [0.4, 0.8])
    assert rep.C == pytest.approx(0.0, abs=1e-20)


def test_K_rhs_closed_form():
    rep = estimate_K(_sphere_field(1 / 32), [1.0])
    assert rep.rows[0]["rhs"] == pytest.approx(math.pi, rel=1e-15)


def test_K_on_sphere_stable_under_refinement():
    reps = [estimate_K(_sphere_field(h), R_STAR) for h in (1 / 32, 1 / 64)]
    for r in reps:
        assert r.flags["nondecreasing"] and r.flags["bounded"]
        assert r.flags["sqrt_det_min"] >= 1.0
    assert reps[1].C == pytest.approx(reps[0].C, rel=0.1)
    assert reps[1].C == pytest.approx(0.8909, rel=1e-3)


def test_integrals_refinement_convergent():
    a, b = _sphere_field(1 / 32), _sphere_field(1 / 64)
    for R in R_STAR:
        for fn in (estimate_star, estimate_K):
            la = fn(a, [R]).rows[0]["lhs"]
            lb = fn(b, [R]).rows[0]["lhs"]
            assert abs(la - lb) <= 0.1 * abs(lb)


def test_ball_integral_of_one_is_disk_area():
    f = build_field(GridSpec(2, 1, 1.0, 1 / 32), linear([0.0, 0.0]), vectorized=True)
    one = np.ones((f.spec.m - 2,) * 2)  # nodal data lives on interior nodes
    assert ball_integral(f, one, 0.7)[0] == pytest.approx(math.pi * 0.49, rel=1e-10)


# ---------------------------------------------------------------- metric bounds

def test_metric_bounds_linear():
    out = metric_bound_check(build_field(GridSpec(2, 1, 1.0, 0.25), linear([1.0, 2.0]), vectorized=True))
    assert out["C0"] == pytest.approx(math.sqrt(5), abs=1e-12)
    assert out["C_metric"] == pytest.approx(6.0, abs=1e-12)
    assert out["lambda_min"] == pytest.approx(1.0, abs=1e-12)
    assert out["position_bound_checked"]


def test_metric_bounds_sphere_closed_form():
    R = 0.9 * math.sqrt(2)
    out = metric_bound_check(_sphere_field(1 / 64), R)
    # |Df| = r / sqrt(2 - r^2) is largest on the rim
    assert out["C0"] == pytest.approx(R / math.sqrt(2 - R * R), rel=2e-3)
    assert not out["position_bound_checked"]  # f(0) != 0


def test_metric_bound_violation_raises():
    from mcflab.gridfield import GraphField

    s = GridSpec(1, 1, 1.0, 0.25)
    v = np.zeros((s.m, 1))
    v[1::2, 0] = 1.0  # sawtooth: centered differences vanish, |F| does not
    with pytest.raises(MetricBoundError, match="fails"):
        metric_bound_check(GraphField(s, v))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 2.0))
def test_metric_bounds_property(seed, amplitude):
    s = GridSpec(2, 2, 1.0, 0.125)
    gen = random_smooth(2, 2, seed=seed, amplitude=amplitude)
    f = build_field(s, lambda X: gen(X) - gen(np.zeros((1, 2))), vectorized=True)
    out = metric_bound_check(f)
    assert 1 - 1e-12 <= out["lambda_min"] <= out["C_metric"] <= 1 + out["C0"] ** 2 + 1e-9


# ---------------------------------------------------------------- blow-down

def test_blowdown_commutes_with_rescaling():
    S = sphere_sampling(2, 1.0, 32)
    f = abs_plus_one()
    lam0 = 4.0
    pre = lambda X: f(lam0 * np.asarray(X)) / lam0
    lams = np.array([1.0, 2.0, 8.0])
    a = sample_blowdown(pre, lams, S).values
    b = sample_blowdown(f, lam0 * lams, S).values
    np.testing.assert_array_equal(a, b)


@settings(max_examples=20, deadline=None)
@given(st.integers(-3, 3), st.integers(0, 1000))
def test_blowdown_commutes_property(j, seed):
    S = sphere_sampling(3, 1.0, 20)
    gen = random_smooth(3, 2, seed=seed)
    lam0 = 2.0**j
    pre = lambda X: gen(lam0 * np.asarray(X)) / lam0
    lams = 2.0 ** np.arange(4)
    np.testing.assert_array_equal(sample_blowdown(pre, lams, S).values, sample_blowdown(gen, lam0 * lams, S).values)


def test_blowdown_ladder_and_domain_errors():
    S = sphere_sampling(2, 1.0, 16)
    with pytest.raises(ValueError, match="increasing"):
        sample_blowdown(abs_plus_one(), [2.0, 1.0], S)
    f = build_field(GridSpec(2, 1, 1.0, 0.125), linear([1.0, 0.0]), vectorized=True)
    with pytest.raises(OutOfDomainError):
        sample_blowdown(f, [0.5, 2.0], S)


def test_cauchy_ratios_for_abs_plus_one():
    S = sphere_sampling(2, 1.0, 64)
    lams = 2.0 ** np.arange(6)
    rep = cauchy_bound_check(sample_blowdown(abs_plus_one(), lams, S))
    for row in rep.rows:
        lam, mu = row["lam"], row["mu"]
        # |f_lam - f_mu| = |1/lam - 1/mu| pointwise
        expect = 2 * math.pi * (1 / lam - 1 / mu) / (1 / lam + 1 / mu)
        assert row["ratio"] == pytest.approx(expect, rel=1e-13)
    assert rep.C <= 2 * math.pi * 1.01
    assert rep.flags["bounded"]
    assert len(rep.rows) == 15


def test_cauchy_table_symmetric():
    S = sphere_sampling(2, 1.0, 40)
    gen = random_smooth(2, 1, seed=8)
    lams = np.array([1.0, 1.5, 3.0, 5.0])
    seq = sample_blowdown(gen, lams, S)
    rep = cauchy_bound_check(seq)
    rev = type(seq)(lams, S, seq.values, gen)
    for row in rep.rows:
        i = int(np.searchsorted(lams, row["lam"]))
        j = int(np.searchsorted(lams, row["mu"]))
        swapped = np.einsum("j,ja->", S.weights, (rev.values[j] - rev.values[i]) ** 2)
        assert row["lhs"] == pytest.approx(swapped, rel=1e-14)
        assert row["rhs"] == abs(row["lam"] ** -2 - row["mu"] ** -2)


def test_cauchy_pointwise_table():
    S = sphere_sampling(2, 1.0, 32)
    rep = cauchy_bound_check(sample_blowdown(abs_plus_one(), [1.0, 2.0, 4.0], S), pointwise=True)
    for row in rep.rows:
        assert row["sup_pointwise"] == pytest.approx(1 / row["lam"] - 1 / row["mu"], rel=1e-14)
    assert "sup_pointwise" not in cauchy_bound_check(sample_blowdown(abs_plus_one(), [1.0, 2.0, 4.0], S)).rows[0]


def test_cone_profile_stable_under_ladder_refinement():
    S = sphere_sampling(2, 1.0, 64)
    src = lambda X: abs_plus_one()(X) + 0.2 * np.asarray(X)[:, :1]
    coarse, _ = estimate_cone(sample_blowdown(src, 4.0 ** np.arange(7), S))
    fine, _ = estimate_cone(sample_blowdown(src, 2.0 ** np.arange(13), S))
    np.testing.assert_allclose(coarse.values, fine.values, atol=1e-15)


def test_cauchy_already_conical():
    S = sphere_sampling(2, 1.0, 16)
    rep = cauchy_bound_check(sample_blowdown(linear([0.3, 0.1]), [1.0, 2.0, 4.0, 8.0], S))
    assert rep.C < 1e-14 and rep.flags["bounded"]


def test_cone_of_abs_plus_one():
    S = sphere_sampling(2, 1.0, 512)
    lams = 2.0 ** np.arange(13)
    prof, rep = estimate_cone(sample_blowdown(abs_plus_one(), lams, S))
    np.testing.assert_allclose(prof.values, 1.0, atol=1e-3)
    assert rep["rate_slope"] == pytest.approx(-1.0, abs=1e-6)
    assert rep["monotone"] and not rep["already_conical"]
    # f_inf(-x) = f_inf(x) = 1 for this even cone; the antipodal sum is 2 on the circle
    assert rep["antipodal_defect"] == pytest.approx(2 * math.sqrt(2 * math.pi), rel=1e-3)


def test_cone_of_plane_is_already_conical():
    S = sphere_sampling(2, 1.0, 32)
    prof, rep = estimate_cone(sample_blowdown(linear([0.3, 0.1]), [1.0, 2.0, 4.0], S))
    assert rep["already_conical"] and rep["rate_slope"] is None
    assert rep["antipodal_defect"] < 1e-14


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-1.0, 1.0), st.integers(0, 500))
def test_cone_consistent_with_cauchy(c, slope, seed):
    S = sphere_sampling(2, 1.0, 48)
    wig = random_smooth(2, 1, seed=seed)
    gen = lambda X: c * abs_plus_one()(X) + slope * np.asarray(X)[:, :1] + wig(np.asarray(X) / (1 + np.linalg.norm(X, axis=1, keepdims=True)))
    lams = 2.0 ** np.arange(7)
    seq = sample_blowdown(gen, lams, S)
    C = cauchy_bound_check(seq).C
    prof, _ = estimate_cone(seq)
    for lam, v in zip(lams, seq.values):
        d2 = float(S.weights @ np.sum((v - prof.values) ** 2, axis=1))
        assert d2 <= C * lam**-2 + 1e-12


def test_homogeneity_of_abs_plus_one():
    S = sphere_sampling(2, 1.0, 64)
    lmax = 2.0**12
    prof, _ = estimate_cone(sample_blowdown(abs_plus_one(), [1.0, 2.0, lmax], S))
    rows = homogeneity_defect(prof, abs_plus_one(), r_list=(0.5, 2.0))
    for row in rows:
        r = row["r"]
        assert row["defect"] == pytest.approx(sphere_area(2) * (1 - r / lmax) ** 2 / r**2, rel=1e-12)
    assert all(row["defect"] == 0.0 for row in homogeneity_defect(prof))


def test_homogeneity_of_plane_includes_negative_r():
    S = sphere_sampling(2, 1.0, 32)
    src = linear([0.25, -0.5])
    prof, _ = estimate_cone(sample_blowdown(src, [1.0, 4.0], S))
    for row in homogeneity_defect(prof, src, r_list=(0.5, 2.0, -1.0)):
        assert row["defect"] < 1e-28
    with pytest.raises(ValueError):
        homogeneity_defect(prof, src, r_list=(0.0,))


# ---------------------------------------------------------------- d/dlambda identity

LADDER = (0.5, 0.7, 0.9)


def test_dlambda_plane():
    S = sphere_sampling(2, 1.0, 64)
    for row in dlambda_identity_check(linear([0.3, -0.7]), LADDER, S):
        assert row["defect_A"] < 1e-9 and row["defect_B"] < 1e-6


def test_dlambda_sphere_closed_form():
    S = sphere_sampling(2, 1.0, 64)
    for row in dlambda_identity_check(shrinking_sphere(2), LADDER, S):
        assert row["defect_A"] <= 1e-8
        assert row["defect_B"] <= 1e-6


def test_dlambda_sphere_grid():
    S = sphere_sampling(2, 1.0, 64)
    h = 1 / 32
    f = build_field(GridSpec(2, 1, 1.0, h), shrinking_sphere(2), vectorized=True)
    for row in dlambda_identity_check(f, LADDER, S):
        assert row["defect_A"] <= 1e-8
        assert row["defect_B"] <= 8 * h * h
        assert row["per_node_B"].shape == (64,)


def test_dlambda_soliton_form_fails_off_solitons():
    S = sphere_sampling(2, 1.0, 64)
    rows = dlambda_identity_check(abs_squared(), LADDER, S)
    assert all(r["defect_A"] <= 1e-8 for r in rows)
    assert min(r["defect_B"] for r in rows) > 2.0


def test_dlambda_bump_chain_rule_holds():
    S = sphere_sampling(3, 1.0, 30)
    gen = bump(0.4, 1.5, k=2)
    for row in dlambda_identity_check(gen, LADDER, S):
        assert row["defect_A"] <= 1e-8
