import math

import numpy as np
import pytest

from lorot.geodesics import (
    Curve,
    GeodesicError,
    GeodesicOracle,
    GeodesicPlan,
    build_plan,
    curve_tau_profile,
    density_estimate,
    interpolate,
    minkowski_oracle,
    oracle_t_points,
    reparametrize_proper_time,
    restrict_plan,
)
from lorot.spacetime import SpacetimeError, build_grid_space, minkowski_kernel
from lorot.transport import (
    DiscreteMeasure,
    TransportResult,
    lp_cost,
    make_coupling,
    solve_lp_optimal,
    uniform_measure,
)

KERNEL = minkowski_kernel(1)
ORACLE = minkowski_oracle(KERNEL)


def ladder_space():
    return build_grid_space([[0.0, 8.0], [-4.0, 4.0]], (16, 16))


def test_curve_validation_and_evaluate():
    with pytest.raises(GeodesicError):
        Curve([0.0], [[0.0, 0.0]])
    with pytest.raises(GeodesicError):
        Curve([0.0, 0.0], [[0.0, 0.0], [1.0, 0.0]])
    c = Curve([0.0, 1.0], [[0.0, 0.0], [2.0, 1.0]])
    assert np.allclose(c.evaluate(0.5), [1.0, 0.5])
    assert np.allclose(c.start, [0.0, 0.0]) and np.allclose(c.end, [2.0, 1.0])
    with pytest.raises(GeodesicError):
        c.evaluate(1.5)


def test_tau_profile_linear_on_geodesic():
    c = ORACLE.connect([0.0, 0.0], [4.0, 1.0])
    taus = curve_tau_profile(c, KERNEL)
    assert taus[-1] == pytest.approx(math.sqrt(15.0), abs=1e-12)
    assert np.allclose(taus, c.s * taus[-1], atol=1e-12)


def test_reparametrize_recovers_proper_time():
    # straight segment sampled unevenly: nodes bunch near the start
    s = np.array([0.0, 0.5, 1.0])
    pts = np.array([[0.0, 0.0], [0.8, 0.0], [1.0, 0.0]])
    fixed = reparametrize_proper_time(Curve(s, pts), KERNEL)
    assert np.allclose(fixed.evaluate(0.5), [0.5, 0.0], atol=1e-12)
    assert np.allclose(fixed.points[0], pts[0]) and np.allclose(fixed.points[-1], pts[-1])
    with pytest.raises(GeodesicError):
        reparametrize_proper_time(
            Curve([0.0, 1.0], [[0.0, 0.0], [1.0, 2.0]]), KERNEL
        )
    with pytest.raises(GeodesicError):
        # middle node spacelike to the start: tau-progress stalls at 0
        reparametrize_proper_time(
            Curve([0.0, 0.5, 1.0], [[0.0, 0.0], [0.2, 1.0], [3.0, 0.0]]), KERNEL
        )


def test_oracle_straight_lines():
    c = ORACLE.connect([0.0, 0.0], [2.0, 1.0], s_grid=[0.0, 0.25, 1.0])
    assert np.allclose(c.points[1], [0.5, 0.25])
    with pytest.raises(GeodesicError):
        ORACLE.connect([0.0, 0.0], [1.0, 2.0])
    A = np.array([[0.0, 0.0], [0.0, 1.0]])
    B = np.array([[2.0, 0.0], [2.0, 1.0]])
    batch = oracle_t_points(ORACLE, A, B, 0.25)
    assert np.allclose(batch, 0.75 * A + 0.25 * B)
    # fallback path builds curves one by one
    plain = GeodesicOracle(connect=ORACLE.connect, kernel=KERNEL)
    assert np.allclose(oracle_t_points(plain, A, B, 0.25), batch)


def _translation_plan(space, shift=6.0):
    # 2 x 2 block so every axis keeps a genuine lattice pitch under fitting
    lo = [
        space.index_of([0.25 + 0.5 * r, -0.25 + 0.5 * k])
        for r in range(2)
        for k in range(2)
    ]
    hi = [space.index_of(space.points[i] + [shift, 0.0]) for i in lo]
    mu0 = uniform_measure(space, lo)
    mu1 = uniform_measure(space, hi)
    result = solve_lp_optimal(mu0, mu1, 0.5, KERNEL)
    return mu0, mu1, build_plan(result, ORACLE)


def test_build_plan_translation():
    space = ladder_space()
    mu0, mu1, plan = _translation_plan(space)
    assert plan.n_pairs == 4
    assert plan.mass.sum() == pytest.approx(1.0)
    assert np.array_equal(np.sort(plan.src_support), mu0.support)
    assert np.array_equal(np.sort(plan.dst_support), mu1.support)
    # unique optimum is the pure translation: spatial coordinate fixed
    assert np.allclose(plan.src[:, 1], plan.dst[:, 1])


def test_build_plan_rejects_bad_results():
    space = ladder_space()
    infeasible = TransportResult(
        coupling=None,
        objective=None,
        feasible=False,
        monge_defect=0.0,
        p=0.5,
    )
    with pytest.raises(GeodesicError):
        build_plan(infeasible, ORACLE)
    # a feasible coupling resting on a null pair carries no timelike plan
    i = space.index_of([0.25, 0.25])
    j = space.index_of([2.25, 2.25])  # dt = dx = 2
    cp = make_coupling(space, [i], [j], [0], [0], [1.0], KERNEL)
    assert cp.is_causal and not cp.is_chronological
    null_result = TransportResult(
        coupling=cp,
        objective=lp_cost(cp, 0.5, KERNEL),
        feasible=True,
        monge_defect=0.0,
        p=0.5,
    )
    with pytest.raises(GeodesicError):
        build_plan(null_result, ORACLE)


def test_interpolate_endpoints_exact():
    space = ladder_space()
    mu0, mu1, plan = _translation_plan(space)
    left = interpolate(plan, 0.0)
    right = interpolate(plan, 1.0)
    assert left.space is space and right.space is space
    assert np.array_equal(left.support, mu0.support)
    assert np.allclose(left.weights, mu0.weights)
    assert np.array_equal(right.support, mu1.support)
    with pytest.raises(GeodesicError):
        interpolate(plan, -0.1)


def test_interpolate_translation_midpoint():
    space = ladder_space()
    mu0, _, plan = _translation_plan(space)
    mid = interpolate(plan, 0.5)
    # translation by (6, 0) at t = 1/2 shifts every atom by (3, 0)
    assert np.allclose(np.sort(mid.points[:, 0]), np.sort(mu0.points[:, 0]) + 3.0)
    assert np.allclose(np.sort(mid.points[:, 1]), np.sort(mu0.points[:, 1]))
    assert np.allclose(mid.weights, mu0.weights)
    # density is carried along: fitted lattice has the same pitch
    assert mid.sup_density == pytest.approx(mu0.sup_density, rel=1e-9)


def test_interpolate_into_given_space():
    space = ladder_space()
    _, _, plan = _translation_plan(space)
    mid = interpolate(plan, 0.5, space=space)
    assert mid.space is space
    assert mid.weights.sum() == pytest.approx(1.0)
    tight = build_grid_space([[0.0, 1.0], [-1.0, 1.0]], (2, 4))
    with pytest.raises(SpacetimeError):
        interpolate(plan, 0.5, space=tight)  # midpoint leaves the window


def test_interpolate_merges_crossing_atoms():
    space = ladder_space()
    i1 = space.index_of([0.25, -0.75])
    i2 = space.index_of([0.25, 0.75])
    j1 = space.index_of([2.25, 0.75])
    j2 = space.index_of([2.25, -0.75])
    cp = make_coupling(
        space, [i1, i2], [j1, j2], [0, 1], [0, 1], [0.5, 0.5], KERNEL
    )
    result = TransportResult(
        coupling=cp,
        objective=lp_cost(cp, 0.5, KERNEL),
        feasible=True,
        monge_defect=0.0,
        p=0.5,
    )
    plan = build_plan(result, ORACLE)
    mid = interpolate(plan, 0.5)
    assert mid.n_atoms == 1  # both curves pass through (1.25, 0)
    assert np.allclose(mid.points[0], [1.25, 0.0])
    assert mid.weights[0] == pytest.approx(1.0)


def test_restrict_plan_window():
    space = ladder_space()
    _, _, plan = _translation_plan(space)
    sub = restrict_plan(plan, 0.25, 0.75)
    assert np.allclose(sub.points_at(0.0), plan.points_at(0.25))
    assert np.allclose(sub.points_at(1.0), plan.points_at(0.75))
    assert sub.src_support is None and sub.dst_support is None
    head = restrict_plan(plan, 0.0, 0.5)
    assert head.src_support is not None and head.dst_support is None
    assert restrict_plan(plan, 0.0, 1.0) is plan
    with pytest.raises(GeodesicError):
        restrict_plan(plan, 0.5, 0.5)


def test_density_estimate():
    space = ladder_space()
    mu = uniform_measure(space, [0, 1, 2, 3])
    field = density_estimate(mu, space)
    assert np.array_equal(field.cells, [0, 1, 2, 3])
    assert np.allclose(field.density, 0.25 / space.masses[:4])
    assert field.singular_mass == 0.0
    dirac = DiscreteMeasure(space, [5], [1.0], is_ac=False)
    singular = density_estimate(dirac, space)
    assert singular.singular_mass == 1.0
    assert singular.ac_mass == 0.0
    shifted = build_grid_space([[100.0, 101.0], [0.0, 1.0]], (2, 2))
    with pytest.raises(SpacetimeError):
        density_estimate(mu, shifted)


def test_plan_mass_validation():
    space = ladder_space()
    c = ORACLE.connect([0.25, 0.0], [2.25, 0.0])
    with pytest.raises(GeodesicError):
        GeodesicPlan(
            space=space,
            src=np.array([[0.25, 0.0]]),
            dst=np.array([[2.25, 0.0]]),
            mass=np.array([0.5]),  # does not sum to 1
            curves=(c,),
            p=0.5,
        )


def test_plan_csv(tmp_path):
    space = ladder_space()
    _, _, plan = _translation_plan(space)
    path = tmp_path / "plan.csv"
    plan.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "pair,s,c0,c1"
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == 0.0
    assert len(lines) == 1 + plan.n_pairs * len(plan.curves[0].s)
