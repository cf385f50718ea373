"""Timelike geodesics, geodesic plans, and displacement interpolation.

Curves are sampled polylines on a dyadic parameter grid (65 nodes by
default); a plan attaches one curve to every positive entry of an
optimal chronological coupling.  The t-interpolant is the pushforward of
the plan masses through the evaluation map e_t, realized as a discrete
measure on a lattice fitted to the atom positions (so that affine images
of uniform grids recover their densities exactly); when no lattice fits,
atoms are binned into the plan's base grid.

Proper-time parametrization: every curve gamma satisfies
tau(gamma_s, gamma_t) = (t - s) tau(gamma_0, gamma_1) on its nodes.
reparametrize_proper_time enforces this for a geodesic sampled under any
monotone parametrization by inverting psi(s) = tau(gamma_0, gamma_s) /
tau(gamma_0, gamma_1) piecewise-linearly; node positions are
interpolated directly against psi, which is exact for collinear samples.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional

import numpy as np

from .entropy import DensityField
from .spacetime import (
    CHRONOLOGICAL_CODE,
    CausalKernel,
    SampledSpace,
    SpaceConstructionError,
    SpacetimeError,
    _coords,
    fit_grid_to_points,
    kernel_relation_pairs,
    kernel_tau_pairs,
)
from .transport import DiscreteMeasure, TransportResult

MERGE_TOL = 1e-12
DEFAULT_NODES = 65  # 2^6 + 1, dyadic


class GeodesicError(ValueError):
    """Invalid curve, plan, or interpolation request."""


@dataclasses.dataclass(frozen=True, eq=False)
class Curve:
    """A sampled timelike curve: parameters s (strictly increasing over
    [0, 1]) and the matching points, one row per node."""

    s: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64).ravel()
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if len(s) != len(pts) or len(s) < 2:
            raise GeodesicError("curve needs >= 2 matched (s, point) samples")
        if np.any(np.diff(s) <= 0.0):
            raise GeodesicError("curve parameters must be strictly increasing")
        s.setflags(write=False)
        pts.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "points", pts)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def evaluate(self, t) -> np.ndarray:
        """Piecewise-linear position(s) at parameter(s) t in [s_0, s_last]."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.s[0] - 1e-12) or np.any(t > self.s[-1] + 1e-12):
            raise GeodesicError("evaluation parameter outside the sample range")
        cols = [np.interp(t, self.s, self.points[:, c]) for c in range(self.points.shape[1])]
        return np.stack(cols, axis=-1)


def curve_tau_profile(curve: Curve, kernel: CausalKernel) -> np.ndarray:
    """tau from the start node to every node."""
    start = np.broadcast_to(curve.points[0], curve.points.shape)
    return kernel_tau_pairs(kernel, start, curve.points)


def reparametrize_proper_time(curve: Curve, kernel: CausalKernel) -> Curve:
    """Resample so tau(gamma_0, gamma_t) = t tau(gamma_0, gamma_1) on nodes.

    Requires a timelike curve whose tau-progress psi is strictly
    increasing over the samples (anything else is not a geodesic
    parametrization).  Node positions are interpolated against psi, so
    collinear geodesic samples come out exact; endpoints are unchanged.
    """
    taus = curve_tau_profile(curve, kernel)
    total = taus[-1]
    if total <= 0.0:
        raise GeodesicError("curve endpoints are not chronologically related")
    psi = taus / total
    if np.any(np.diff(psi) <= 0.0):
        raise GeodesicError("tau-progress is not strictly increasing on samples")
    targets = curve.s
    cols = [
        np.interp(targets, psi, curve.points[:, c])
        for c in range(curve.points.shape[1])
    ]
    pts = np.stack(cols, axis=-1)
    pts[0] = curve.points[0]
    pts[-1] = curve.points[-1]
    return Curve(curve.s, pts)


@dataclasses.dataclass(frozen=True, eq=False)
class GeodesicOracle:
    """connect(x, y, s_grid) -> Curve maximizing tau between x << y.

    t_points, when provided, evaluates whole batches without building
    curves: t_points(A, B, t) -> (k, d) positions of gamma_t for the
    aligned endpoint rows of A and B.
    """

    connect: Callable
    kernel: Optional[CausalKernel] = None
    t_points: Optional[Callable] = None


def oracle_t_points(oracle: GeodesicOracle, A, B, t: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if oracle.t_points is not None:
        return oracle.t_points(A, B, t)
    return np.stack([oracle.connect(a, b).evaluate(t) for a, b in zip(A, B)])


def minkowski_oracle(kernel: CausalKernel) -> GeodesicOracle:
    """Straight segments: gamma_s = (1 - s) x + s y, already proper-time."""

    def connect(x, y, s_grid=None) -> Curve:
        a = _coords(x)
        b = _coords(y)
        code = kernel_relation_pairs(kernel, a[np.newaxis], b[np.newaxis])[0]
        if code != CHRONOLOGICAL_CODE:
            raise GeodesicError("endpoints are not chronologically related")
        s = (
            np.linspace(0.0, 1.0, DEFAULT_NODES)
            if s_grid is None
            else np.asarray(s_grid, dtype=float)
        )
        pts = (1.0 - s)[:, np.newaxis] * a + s[:, np.newaxis] * b
        return Curve(s, pts)

    def t_points(A, B, t):
        return (1.0 - t) * A + t * B

    return GeodesicOracle(connect=connect, kernel=kernel, t_points=t_points)


@dataclasses.dataclass(frozen=True, eq=False)
class GeodesicPlan:
    """One curve per positive coupling entry; total mass 1.

    src/dst hold the endpoint coordinates, mass the plan weights, and p
    the transport exponent that selected the underlying coupling.
    src_support/dst_support keep the base-grid indices when the
    endpoints still live on plan.space (build_plan sets them; restriction
    clears them).
    """

    space: SampledSpace
    src: np.ndarray
    dst: np.ndarray
    mass: np.ndarray
    curves: tuple
    p: float
    mu0_is_ac: bool = True
    mu1_is_ac: bool = True
    src_support: Optional[np.ndarray] = None
    dst_support: Optional[np.ndarray] = None

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64).ravel()
        if len(mass) != len(self.curves) or len(mass) == 0:
            raise GeodesicError("plan needs one curve per mass entry")
        if np.any(mass <= 0.0):
            raise GeodesicError("plan masses must be positive")
        if abs(mass.sum() - 1.0) > 1e-9:
            raise GeodesicError(f"plan mass {mass.sum()} is not 1")
        object.__setattr__(self, "mass", mass)

    @property
    def n_pairs(self) -> int:
        return len(self.mass)

    def points_at(self, t: float) -> np.ndarray:
        """Evaluation map e_t over all curves, one row per pair."""
        return np.stack([c.evaluate(t) for c in self.curves])

    def write_csv(self, path) -> None:
        d = self.src.shape[1]
        header = "pair,s," + ",".join(f"c{k}" for k in range(d))
        lines = [header]
        for i, curve in enumerate(self.curves):
            for s, pt in zip(curve.s, curve.points):
                coords = ",".join(repr(float(c)) for c in pt)
                lines.append(f"{i},{float(s)!r},{coords}")
        from .reporting import _atomic_write

        _atomic_write(path, "\n".join(lines) + "\n")


def build_plan(
    result: TransportResult,
    oracle: GeodesicOracle,
    s_grid=None,
) -> GeodesicPlan:
    """Attach a maximizing curve to every positive entry of the optimal
    coupling; requires a feasible, chronological transport result."""
    if not result.feasible or result.coupling is None:
        raise GeodesicError("infeasible transport carries no geodesic plan")
    cp = result.coupling
    if not cp.is_chronological:
        raise GeodesicError(
            "coupling puts mass on a non-chronological pair; no timelike plan"
        )
    keep = cp.mass > 0.0
    src_sup = cp.rows[cp.src[keep]]
    dst_sup = cp.cols[cp.dst[keep]]
    A = cp.space.points[src_sup]
    B = cp.space.points[dst_sup]
    curves = tuple(oracle.connect(a, b, s_grid) for a, b in zip(A, B))
    return GeodesicPlan(
        space=cp.space,
        src=A,
        dst=B,
        mass=cp.mass[keep],
        curves=curves,
        p=result.p,
        src_support=src_sup,
        dst_support=dst_sup,
    )


def _merge_atoms(points: np.ndarray, mass: np.ndarray):
    """Merge atoms within MERGE_TOL; first occurrence wins the position."""
    keys = np.round(points / MERGE_TOL).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    k = len(uniq)
    merged_mass = np.zeros(k)
    np.add.at(merged_mass, inverse, mass)
    first = np.full(k, len(points), dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(len(points)))
    return points[first], merged_mass


def interpolate(
    plan: GeodesicPlan, t: float, space: Optional[SampledSpace] = None
) -> DiscreteMeasure:
    """The t-interpolant (e_t)-pushforward of the plan as a measure.

    With space=None the atoms get their own fitted lattice (falling back
    to the plan's base grid if they fit no lattice); passing a space bins
    the atoms into it instead.  t=0 and t=1 reproduce the endpoint
    measures on the base grid exactly when the plan still carries their
    support indices.
    """
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise GeodesicError(f"interpolation time {t} outside [0, 1]")
    if t == 0.0 and space is None and plan.src_support is not None:
        return DiscreteMeasure(plan.space, plan.src_support, plan.mass, plan.mu0_is_ac)
    if t == 1.0 and space is None and plan.dst_support is not None:
        return DiscreteMeasure(plan.space, plan.dst_support, plan.mass, plan.mu1_is_ac)
    is_ac = plan.mu0_is_ac if t < 1.0 else plan.mu1_is_ac
    pts, mass = _merge_atoms(plan.points_at(t), plan.mass)
    if space is not None:
        lo = space.bounds[:, 0]
        hi = space.bounds[:, 1]
        if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
            raise SpacetimeError("interpolant atom outside the measurement window")
        support = space.bin_points(pts)
        return DiscreteMeasure(space, support, mass, is_ac)
    try:
        fitted = fit_grid_to_points(pts, weight=plan.space.weight)
    except SpaceConstructionError:
        fitted = plan.space
    return DiscreteMeasure(fitted, fitted.bin_points(pts), mass, is_ac)


def restrict_plan(plan: GeodesicPlan, s: float, t: float) -> GeodesicPlan:
    """Re-index every curve by r -> gamma_{(1-r)s + rt}."""
    s = float(s)
    t = float(t)
    if not (0.0 <= s < t <= 1.0):
        raise GeodesicError(f"restriction window [{s}, {t}] is not increasing")
    if s == 0.0 and t == 1.0:
        return plan
    curves = []
    for c in plan.curves:
        params = (1.0 - c.s) * s + c.s * t
        curves.append(Curve(c.s, c.evaluate(params)))
    curves = tuple(curves)
    return GeodesicPlan(
        space=plan.space,
        src=np.stack([c.start for c in curves]),
        dst=np.stack([c.end for c in curves]),
        mass=plan.mass,
        curves=curves,
        p=plan.p,
        mu0_is_ac=plan.mu0_is_ac,
        mu1_is_ac=plan.mu1_is_ac if t == 1.0 else plan.mu0_is_ac,
        src_support=plan.src_support if s == 0.0 else None,
        dst_support=plan.dst_support if t == 1.0 else None,
    )


def density_estimate(mu: DiscreteMeasure, space: SampledSpace) -> DensityField:
    """Histogram density of mu in the cells of space.

    Atom mass lands in the nearest cell; densities divide by the cell
    reference mass.  A measure flagged non-absolutely-continuous is all
    singular mass instead.
    """
    pts = mu.points
    lo = space.bounds[:, 0]
    hi = space.bounds[:, 1]
    if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
        raise SpacetimeError("atom outside the density-estimation window")
    if not mu.is_ac:
        anchor = space.bin_points(pts[:1])
        return DensityField(
            cells=anchor,
            density=np.zeros(1),
            masses=space.masses[anchor],
            singular_mass=1.0,
        )
    idx = space.bin_points(pts)
    cells, inverse = np.unique(idx, return_inverse=True)
    binned = np.zeros(len(cells))
    np.add.at(binned, inverse, mu.weights)
    return DensityField(
        cells=cells,
        density=binned / space.masses[cells],
        masses=space.masses[cells],
        singular_mass=0.0,
    )
