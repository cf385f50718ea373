import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorot.reporting import decode_value
from lorot.spacetime import (
    CAUSAL_NULL_CODE,
    CHRONOLOGICAL_CODE,
    UNRELATED_CODE,
    CausalChainError,
    SpaceConstructionError,
    SpacetimeError,
    build_grid_space,
    causal_diamond,
    check_reverse_triangle,
    chronological_future,
    fit_grid_to_points,
    kernel_relation_cross,
    kernel_relation_pairs,
    kernel_tau_cross,
    kernel_tau_pairs,
    minkowski_kernel,
    space_from_json,
    tau_ball,
)


def test_grid_geometry():
    space = build_grid_space([[0.0, 1.0], [0.0, 2.0]], (4, 8))
    assert space.n_points == 32
    assert space.dim == 1
    assert space.cell_volume == pytest.approx(0.25 * 0.25)
    assert np.allclose(space.h, [0.25, 0.25])
    assert space.total_mass == pytest.approx(2.0)
    # time-major ordering: first block shares the earliest time
    assert np.all(space.points[:8, 0] == 0.125)
    assert np.allclose(space.points[:8, 1], np.arange(8) * 0.25 + 0.125)


def test_grid_weighted_masses():
    V = lambda z: z[:, 0]  # noqa: E731
    space = build_grid_space([[0.0, 1.0], [0.0, 1.0]], (2, 2), V=V)
    assert np.allclose(space.masses, 0.25 * np.exp(space.points[:, 0]))


def test_grid_rejects_degenerate_windows():
    with pytest.raises(SpaceConstructionError):
        build_grid_space([[0.0, 1.0]], (4,))
    with pytest.raises(SpaceConstructionError):
        build_grid_space([[0.0, 0.0], [0.0, 1.0]], (4, 4))
    with pytest.raises(SpaceConstructionError):
        build_grid_space([[0.0, 1.0], [0.0, 1.0]], (4, 0))


def test_index_event_round_trip():
    space = build_grid_space([[0.0, 1.0], [-1.0, 1.0]], (5, 10))
    for i in (0, 7, 31, 49):
        assert space.index_of(space.points[i]) == i
    assert space.index_of([10.0, 0.0]) == -1
    assert space.index_of(space.points[3] + 0.02) == -1  # off the center
    assert space.event(7).coords == tuple(space.points[7])


def test_bin_points_floor_and_clip():
    space = build_grid_space([[0.0, 1.0], [0.0, 1.0]], (4, 4))
    inside = space.bin_points(np.array([[0.01, 0.01], [0.99, 0.99]]))
    assert inside[0] == 0 and inside[1] == 15
    clipped = space.bin_points(np.array([[-5.0, 0.5], [0.5, 5.0]]))
    assert clipped[0] == space.bin_points(np.array([[0.0, 0.5]]))[0]
    assert clipped[1] == space.bin_points(np.array([[0.5, 1.0 - 1e-12]]))[0]


def test_points_are_read_only():
    space = build_grid_space([[0.0, 1.0], [0.0, 1.0]], (2, 2))
    with pytest.raises(ValueError):
        space.points[0, 0] = 99.0


def test_fit_grid_recovers_lattice():
    base = build_grid_space([[0.0, 1.0], [0.0, 1.0]], (8, 8))
    sub = base.points[::3]
    fitted = fit_grid_to_points(sub)
    got = fitted.bin_points(sub)
    assert np.allclose(fitted.points[got], sub)
    # gaps must be integer multiples of the smallest one
    ragged = np.array([[0.0, 0.0], [1.0, 0.0], [2.6, 0.0]])
    with pytest.raises(SpaceConstructionError):
        fit_grid_to_points(ragged)


def test_fit_grid_single_coordinate_axis():
    pts = np.array([[0.5, 0.0], [0.5, 1.0], [0.5, 2.0]])
    fitted = fit_grid_to_points(pts)
    assert fitted.resolution[0] == 1
    assert np.allclose(fitted.points[fitted.bin_points(pts)], pts)


def test_space_from_json_matches_builder():
    doc = {
        "bounds": [[0.0, 5.0], [0.0, 1.0]],
        "resolution": [10, 4],
        "weight": {"kind": "zero", "coeffs": []},
    }
    space = space_from_json(doc)
    ref = build_grid_space([[0.0, 5.0], [0.0, 1.0]], (10, 4))
    assert np.allclose(space.points, ref.points)
    assert np.allclose(space.masses, ref.masses)

    quad = space_from_json(
        {
            "bounds": [[0.0, 1.0], [0.0, 1.0]],
            "resolution": [2, 2],
            "weight": {"kind": "quadratic", "coeffs": [1.0, -2.0]},
        }
    )
    z = quad.points
    expected = quad.cell_volume * np.exp(z[:, 0] ** 2 - 2.0 * z[:, 1] ** 2)
    assert np.allclose(quad.masses, expected)

    with pytest.raises(SpacetimeError):
        space_from_json({"bounds": [[0, 1], [0, 1]], "resolution": [2, 2],
                         "weight": {"kind": "cubic", "coeffs": []}})


def test_minkowski_relations():
    kernel = minkowski_kernel(1)
    x = np.array([0.0, 0.0])
    codes = kernel_relation_cross(
        kernel, x, np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [-1.0, 0.0]])
    )[0]
    assert codes[0] == CHRONOLOGICAL_CODE
    assert codes[1] == CAUSAL_NULL_CODE
    assert codes[2] == UNRELATED_CODE
    assert codes[3] == UNRELATED_CODE  # past, not future


def test_minkowski_tau_values():
    kernel = minkowski_kernel(2)
    taus = kernel_tau_cross(
        kernel,
        np.array([0.0, 0.0, 0.0]),
        np.array([[2.0, 1.0, 1.0], [1.0, 1.0, 0.0], [1.0, 3.0, 0.0]]),
    )[0]
    assert taus[0] == pytest.approx(math.sqrt(4.0 - 2.0), abs=1e-14)
    assert taus[1] == 0.0  # null separation carries no proper time
    assert taus[2] == 0.0  # tau vanishes off the chronology (kernel contract)


def test_pairs_agree_with_cross_diagonal():
    rng = np.random.default_rng(7)
    kernel = minkowski_kernel(1)
    A = rng.uniform(-1, 1, size=(40, 2))
    B = rng.uniform(-1, 1, size=(40, 2)) + np.array([1.5, 0.0])
    assert np.array_equal(
        kernel_tau_pairs(kernel, A, B), np.diag(kernel_tau_cross(kernel, A, B))
    )
    assert np.array_equal(
        kernel_relation_pairs(kernel, A, B),
        np.diag(kernel_relation_cross(kernel, A, B)),
    )
    with pytest.raises(SpacetimeError):
        kernel_tau_pairs(kernel, A, B[:-1])


coords = st.floats(-3.0, 3.0)
point = st.tuples(coords, coords).map(np.array)


@given(point, point)
def test_tau_positive_iff_chronological(a, b):
    kernel = minkowski_kernel(1)
    code = kernel_relation_cross(kernel, a, b)[0, 0]
    tau = kernel_tau_cross(kernel, a, b)[0, 0]
    assert (tau > 0.0) == (code == CHRONOLOGICAL_CODE)


@given(point, point)
def test_chronology_is_antisymmetric(a, b):
    kernel = minkowski_kernel(1)
    ab = kernel_relation_cross(kernel, a, b)[0, 0]
    ba = kernel_relation_cross(kernel, b, a)[0, 0]
    assert not (ab == CHRONOLOGICAL_CODE and ba == CHRONOLOGICAL_CODE)


@given(point, point, point)
def test_chronology_is_transitive(a, b, c):
    kernel = minkowski_kernel(1)
    ab = kernel_relation_cross(kernel, a, b)[0, 0]
    bc = kernel_relation_cross(kernel, b, c)[0, 0]
    ac = kernel_relation_cross(kernel, a, c)[0, 0]
    if ab == CHRONOLOGICAL_CODE and bc == CHRONOLOGICAL_CODE:
        assert ac == CHRONOLOGICAL_CODE


def test_chronological_future_on_grid():
    space = build_grid_space([[0.0, 4.0], [-2.0, 2.0]], (8, 8))
    kernel = minkowski_kernel(1)
    idx = space.index_of([0.25, 0.25])
    fut = chronological_future(space, [idx], kernel)
    pts = space.points
    dt = pts[:, 0] - 0.25
    dx = np.abs(pts[:, 1] - 0.25)
    expected = np.flatnonzero(dt - dx > 1e-12)
    assert np.array_equal(fut, expected)


def test_causal_diamond_flat():
    space = build_grid_space([[0.0, 4.0], [-2.0, 2.0]], (16, 16))
    kernel = minkowski_kernel(1)
    dia = causal_diamond(space, [0.0, 0.0], [4.0, 0.0], kernel)
    pts = space.points[dia]
    assert len(dia) > 0
    assert np.all(pts[:, 0] - np.abs(pts[:, 1]) >= -1e-12)
    assert np.all((4.0 - pts[:, 0]) - np.abs(pts[:, 1]) >= -1e-12)
    # unrelated tips give the empty diamond
    assert len(causal_diamond(space, [0.0, 0.0], [1.0, 3.0], kernel)) == 0


def test_tau_ball_open_vs_closed():
    space = build_grid_space([[0.0, 4.0], [-2.0, 2.0]], (16, 16))
    kernel = minkowski_kernel(1)
    x = [0.125, 0.125]
    r = 1.0
    open_ball = tau_ball(space, x, r, kernel)
    closed_ball = tau_ball(space, x, r, kernel, closed=True)
    assert set(open_ball) <= set(closed_ball)
    taus = kernel_tau_cross(kernel, np.asarray(x), space.points)[0]
    assert np.all(taus[open_ball] < r + 1e-12)
    on_sphere = np.flatnonzero(np.isclose(taus, r) & (taus > 0))
    assert set(on_sphere) <= set(closed_ball)
    assert space.index_of(x) in set(open_ball)
    with pytest.raises(SpacetimeError):
        tau_ball(space, x, 0.0, kernel)


def test_reverse_triangle_report():
    kernel = minkowski_kernel(1)
    # colinear timelike chain: equality; bent chain: strict
    triples = [
        ([0.0, 0.0], [1.0, 0.0], [2.0, 0.0]),
        ([0.0, 0.0], [1.0, 0.5], [2.0, 0.0]),
    ]
    report = check_reverse_triangle(kernel, triples)
    assert report.passed
    assert report.entries[0].margin == pytest.approx(0.0, abs=1e-12)
    assert report.entries[1].margin == pytest.approx(2.0 - math.sqrt(3.0), abs=1e-12)
    with pytest.raises(CausalChainError):
        check_reverse_triangle(kernel, [([0.0, 0.0], [0.0, 1.0], [2.0, 0.0])])


def test_report_json_round_trip(tmp_path):
    kernel = minkowski_kernel(1)
    report = check_reverse_triangle(kernel, [([0, 0], [1, 0], [2, 0])])
    path = tmp_path / "rt.json"
    report.write_json(path)
    import json

    doc = json.loads(path.read_text())
    assert set(doc) == {"spec", "entries", "pass", "discretization"}
    assert doc["pass"] is True
    assert decode_value(doc["entries"][0]["lhs"]) == pytest.approx(2.0)

    csv_path = tmp_path / "rt.csv"
    report.write_csv(csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "t,Nprime,lhs,rhs,margin"
    assert len(lines) == 2
