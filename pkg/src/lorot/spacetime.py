"""Discrete Lorentzian measured spaces.

A `SampledSpace` is a cell-centered uniform grid over a bounded window of
R^{1+n} (component 0 is time), carrying one reference mass per cell:

    mass_i = cell_volume * exp(V(center_i))

which discretizes the weighted volume measure e^V vol.  Causality is
supplied separately by a `CausalKernel`; only Minkowski kernels ship
built-in, the kernel type is the extension point for other spacetimes.

Relations are classified deterministically: with dt the time difference
and dx the spatial distance, dt - dx > 1e-12 is chronological,
|dt - dx| <= 1e-12 is causal_null (ties land on the cone), anything else
is unrelated.  The time separation is

    tau(x, y) = sqrt((dt - dx)(dt + dx))   if chronological, else 0,

the factored form staying exact near the cone.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Callable, Optional

import numpy as np

from .reporting import CheckReport, Entry

# ties on dt - |dx| within this tolerance classify as causal_null
NULL_TIE_TOL = 1e-12


class SpacetimeError(ValueError):
    """Base class for causal-structure and discretization errors."""


class SpaceConstructionError(SpacetimeError):
    """Invalid grid construction parameters."""


class CausalChainError(SpacetimeError):
    """A claimed causal chain is not causally ordered."""


class Relation(enum.Enum):
    CHRONOLOGICAL = "chronological"
    CAUSAL_NULL = "causal_null"
    UNRELATED = "unrelated"


# integer codes used in batch relation matrices; causal <=> code >= 1
UNRELATED_CODE = 0
CAUSAL_NULL_CODE = 1
CHRONOLOGICAL_CODE = 2

_RELATION_BY_CODE = {
    UNRELATED_CODE: Relation.UNRELATED,
    CAUSAL_NULL_CODE: Relation.CAUSAL_NULL,
    CHRONOLOGICAL_CODE: Relation.CHRONOLOGICAL,
}


@dataclasses.dataclass(frozen=True)
class Event:
    """A point of the spacetime window; coords[0] is time."""

    coords: tuple

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if len(coords) < 2:
            raise SpacetimeError("an event needs a time and >= 1 spatial coordinate")
        if not all(math.isfinite(c) for c in coords):
            raise SpacetimeError(f"non-finite event coordinates {coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def time(self) -> float:
        return self.coords[0]

    @property
    def spatial(self) -> np.ndarray:
        return np.asarray(self.coords[1:], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def as_event(x) -> Event:
    if isinstance(x, Event):
        return x
    return Event(tuple(np.asarray(x, dtype=float).ravel()))


def _coords(x) -> np.ndarray:
    if isinstance(x, Event):
        return x.as_array()
    return np.asarray(x, dtype=float).ravel()


@dataclasses.dataclass(frozen=True, eq=False)
class CausalKernel:
    """Causal relation and time separation of a spacetime model.

    tau(x, y) is the maximal proper time from x to y (0 unless
    chronological); relation(x, y) classifies the ordered pair.  The
    batch maps, when provided, evaluate whole point-set products at
    once: tau_cross(A, B) -> (len(A), len(B)) float matrix, and
    relation_cross(A, B) -> int8 code matrix (0 unrelated, 1 null,
    2 chronological).  The pair maps evaluate aligned rows instead:
    tau_pairs(A, B) and relation_pairs(A, B) take (k, dim+1) stacks and
    return length-k vectors for (A[0], B[0]), ..., (A[k-1], B[k-1]).
    """

    dim: int
    tau: Callable
    relation: Callable
    tau_cross: Optional[Callable] = None
    relation_cross: Optional[Callable] = None
    tau_pairs: Optional[Callable] = None
    relation_pairs: Optional[Callable] = None
    name: str = "custom"


def kernel_tau_cross(kernel: CausalKernel, A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if kernel.tau_cross is not None:
        return kernel.tau_cross(A, B)
    out = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out[i, j] = kernel.tau(a, b)
    return out


def kernel_relation_cross(kernel: CausalKernel, A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if kernel.relation_cross is not None:
        return kernel.relation_cross(A, B)
    out = np.empty((len(A), len(B)), dtype=np.int8)
    code = {
        Relation.UNRELATED: UNRELATED_CODE,
        Relation.CAUSAL_NULL: CAUSAL_NULL_CODE,
        Relation.CHRONOLOGICAL: CHRONOLOGICAL_CODE,
    }
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out[i, j] = code[kernel.relation(a, b)]
    return out


def kernel_tau_pairs(kernel: CausalKernel, A, B) -> np.ndarray:
    """tau on aligned pairs: (k, d) x (k, d) -> (k,)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if len(A) != len(B):
        raise SpacetimeError("pair evaluation needs equally many rows")
    if kernel.tau_pairs is not None:
        return kernel.tau_pairs(A, B)
    return np.array([kernel.tau(a, b) for a, b in zip(A, B)])


def kernel_relation_pairs(kernel: CausalKernel, A, B) -> np.ndarray:
    """Relation codes on aligned pairs: (k, d) x (k, d) -> (k,) int8."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if len(A) != len(B):
        raise SpacetimeError("pair evaluation needs equally many rows")
    if kernel.relation_pairs is not None:
        return kernel.relation_pairs(A, B)
    code = {
        Relation.UNRELATED: UNRELATED_CODE,
        Relation.CAUSAL_NULL: CAUSAL_NULL_CODE,
        Relation.CHRONOLOGICAL: CHRONOLOGICAL_CODE,
    }
    return np.array([code[kernel.relation(a, b)] for a, b in zip(A, B)], dtype=np.int8)


def _minkowski_dt_dx(A: np.ndarray, B: np.ndarray):
    dt = B[np.newaxis, :, 0] - A[:, np.newaxis, 0]
    diff = B[np.newaxis, :, 1:] - A[:, np.newaxis, 1:]
    dx = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return dt, dx


def minkowski_kernel(n: int) -> CausalKernel:
    """Flat kernel on R^{1,n}: tau = sqrt(dt^2 - |dx|^2) on timelike pairs."""
    if n < 1:
        raise SpacetimeError(f"spatial dimension n={n} must be >= 1")

    def relation_cross(A, B):
        dt, dx = _minkowski_dt_dx(np.atleast_2d(A), np.atleast_2d(B))
        delta = dt - dx
        codes = np.zeros(delta.shape, dtype=np.int8)
        codes[np.abs(delta) <= NULL_TIE_TOL] = CAUSAL_NULL_CODE
        codes[delta > NULL_TIE_TOL] = CHRONOLOGICAL_CODE
        return codes

    def tau_cross(A, B):
        dt, dx = _minkowski_dt_dx(np.atleast_2d(A), np.atleast_2d(B))
        delta = dt - dx
        out = np.zeros(delta.shape)
        chron = delta > NULL_TIE_TOL
        out[chron] = np.sqrt(delta[chron] * (dt + dx)[chron])
        return out

    def _pairs_dt_dx(A, B):
        D = np.atleast_2d(B) - np.atleast_2d(A)
        return D[:, 0], np.sqrt(np.einsum("ij,ij->i", D[:, 1:], D[:, 1:]))

    def relation_pairs(A, B):
        dt, dx = _pairs_dt_dx(A, B)
        delta = dt - dx
        codes = np.zeros(delta.shape, dtype=np.int8)
        codes[np.abs(delta) <= NULL_TIE_TOL] = CAUSAL_NULL_CODE
        codes[delta > NULL_TIE_TOL] = CHRONOLOGICAL_CODE
        return codes

    def tau_pairs(A, B):
        dt, dx = _pairs_dt_dx(A, B)
        delta = dt - dx
        out = np.zeros(delta.shape)
        chron = delta > NULL_TIE_TOL
        out[chron] = np.sqrt(delta[chron] * (dt + dx)[chron])
        return out

    def tau(x, y) -> float:
        return float(tau_pairs(_coords(x)[np.newaxis], _coords(y)[np.newaxis])[0])

    def relation(x, y) -> Relation:
        code = relation_pairs(_coords(x)[np.newaxis], _coords(y)[np.newaxis])[0]
        return _RELATION_BY_CODE[int(code)]

    return CausalKernel(
        dim=n,
        tau=tau,
        relation=relation,
        tau_cross=tau_cross,
        relation_cross=relation_cross,
        tau_pairs=tau_pairs,
        relation_pairs=relation_pairs,
        name="minkowski",
    )


@dataclasses.dataclass(frozen=True, eq=False)
class SampledSpace:
    """Cell-centered uniform grid with reference masses.

    points      (M, 1+n) cell centers, time-major (C-order over axes)
    masses      (M,) positive reference masses, cell_volume * e^V(center)
    cell_volume product of per-axis cell widths
    dim         spatial dimension n
    weight      the V callable (None means V = 0); maps an (M, 1+n)
                coordinate array to (M,) values
    bounds      (1+n, 2) window, resolution (1+n,) cell counts
    axes        per-axis center coordinates
    """

    points: np.ndarray
    masses: np.ndarray
    cell_volume: float
    dim: int
    weight: Optional[Callable]
    bounds: np.ndarray
    resolution: np.ndarray
    axes: tuple

    def __post_init__(self):
        for name in ("points", "masses", "bounds", "resolution"):
            arr = getattr(self, name)
            arr.setflags(write=False)
        if np.any(self.masses <= 0.0):
            raise SpaceConstructionError("reference masses must be positive")

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def h(self) -> np.ndarray:
        """Per-axis cell widths."""
        spans = self.bounds[:, 1] - self.bounds[:, 0]
        return spans / self.resolution

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.h))

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def event(self, i: int) -> Event:
        return Event(tuple(self.points[i]))

    def index_of(self, x, tol: float = 1e-9) -> int:
        """Flat index of the sampled point at x, or -1 if none is within tol."""
        c = _coords(x)
        lo = self.bounds[:, 0]
        h = self.h
        idx = np.rint((c - lo) / h - 0.5).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.resolution):
            return -1
        center = lo + (idx + 0.5) * h
        if np.max(np.abs(center - c)) > tol:
            return -1
        return int(np.ravel_multi_index(idx, self.resolution))

    def bin_points(self, pts: np.ndarray) -> np.ndarray:
        """Flat cell indices containing each point (clipped to the window)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        lo = self.bounds[:, 0]
        h = self.h
        idx = np.floor((pts - lo) / h).astype(int)
        idx = np.clip(idx, 0, np.asarray(self.resolution) - 1)
        return np.ravel_multi_index(idx.T, self.resolution)


def build_grid_space(bounds, resolution, V: Optional[Callable] = None) -> SampledSpace:
    """Uniform cell-centered grid over the window, masses cell_volume * e^V.

    bounds is a (1+n, 2) array of [lo, hi] per axis, resolution the
    per-axis cell counts.  Point ordering is time-major: the time index
    varies slowest.
    """
    bounds = np.asarray(bounds, dtype=float)
    resolution = np.asarray(resolution, dtype=int)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or len(bounds) != len(resolution):
        raise SpaceConstructionError(
            f"bounds shape {bounds.shape} does not match resolution {resolution}"
        )
    if len(bounds) < 2:
        raise SpaceConstructionError("need a time axis and >= 1 spatial axis")
    if np.any(resolution < 1):
        raise SpaceConstructionError(f"resolution {resolution} must be >= 1 per axis")
    spans = bounds[:, 1] - bounds[:, 0]
    if np.any(spans <= 0.0) or not np.all(np.isfinite(bounds)):
        raise SpaceConstructionError(f"degenerate window {bounds.tolist()}")

    h = spans / resolution
    axes = tuple(
        bounds[k, 0] + (np.arange(resolution[k]) + 0.5) * h[k]
        for k in range(len(resolution))
    )
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    cell_volume = float(np.prod(h))
    if V is None:
        masses = np.full(len(points), cell_volume)
    else:
        masses = cell_volume * np.exp(np.asarray(V(points), dtype=float))
    return SampledSpace(
        points=points,
        masses=masses,
        cell_volume=cell_volume,
        dim=len(resolution) - 1,
        weight=V,
        bounds=bounds,
        resolution=resolution,
        axes=axes,
    )


def fit_grid_to_points(
    points: np.ndarray,
    weight: Optional[Callable] = None,
    rel_tol: float = 1e-9,
    fallback_spacing: float = 1.0,
) -> SampledSpace:
    """Smallest uniform grid whose cell centers contain the given points.

    Succeeds only when the points form a sublattice per axis (unique
    coordinates evenly spaced within rel_tol); raises
    SpaceConstructionError otherwise.  Axes with a single coordinate get
    fallback_spacing as their cell width.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts.shape[1]
    bounds = np.empty((d, 2))
    resolution = np.empty(d, dtype=int)
    for k in range(d):
        coords = np.unique(pts[:, k])
        span = coords[-1] - coords[0]
        tol = rel_tol * max(1.0, abs(coords[0]), abs(coords[-1]), span)
        # merge float-dust duplicates before measuring the lattice pitch
        keep = np.concatenate(([True], np.diff(coords) > tol))
        coords = coords[keep]
        if len(coords) == 1:
            spacing = fallback_spacing
        else:
            spacing = float(np.min(np.diff(coords)))
            steps = np.rint((coords - coords[0]) / spacing)
            if np.max(np.abs(coords - (coords[0] + steps * spacing))) > tol:
                raise SpaceConstructionError(
                    f"axis {k} coordinates are not a uniform lattice"
                )
        count = int(np.rint(span / spacing)) + 1 if len(coords) > 1 else 1
        if count > 1 << 22:
            raise SpaceConstructionError(
                f"axis {k} lattice needs {count} cells; refusing to fit"
            )
        bounds[k] = (coords[0] - spacing / 2.0, coords[-1] + spacing / 2.0)
        resolution[k] = count
    return build_grid_space(bounds, resolution, V=weight)


def space_from_json(doc: dict) -> SampledSpace:
    """Build a grid space from {"bounds", "resolution", "weight"} JSON."""
    try:
        bounds = doc["bounds"]
        resolution = doc["resolution"]
    except KeyError as exc:
        raise SpaceConstructionError(f"space document missing field {exc}") from exc
    weight_doc = doc.get("weight") or {"kind": "zero"}
    kind = weight_doc.get("kind", "zero")
    if kind == "zero":
        V = None
    elif kind == "quadratic":
        coeffs = np.asarray(weight_doc.get("coeffs", []), dtype=float)
        if len(coeffs) != len(resolution):
            raise SpaceConstructionError(
                f"quadratic weight needs {len(resolution)} coefficients, "
                f"got {len(coeffs)}"
            )

        def V(pts, _c=coeffs):
            return np.square(np.atleast_2d(pts)) @ _c

    else:
        raise SpaceConstructionError(f"unknown weight kind {kind!r}")
    return build_grid_space(bounds, resolution, V)


def _chunked_codes(kernel, A_pts, B_pts, chunk=2048):
    for start in range(0, len(A_pts), chunk):
        yield start, kernel_relation_cross(kernel, A_pts[start : start + chunk], B_pts)


def chronological_future(
    space: SampledSpace, A, kernel: Optional[CausalKernel] = None
) -> np.ndarray:
    """Indices of sampled points chronologically after some point of A."""
    A = np.asarray(sorted(set(int(i) for i in np.asarray(A).ravel())), dtype=int)
    if len(A) == 0:
        raise SpacetimeError("chronological_future needs a nonempty index set")
    kernel = kernel or minkowski_kernel(space.dim)
    mask = np.zeros(space.n_points, dtype=bool)
    for start, codes in _chunked_codes(kernel, space.points[A], space.points):
        mask |= np.any(codes == CHRONOLOGICAL_CODE, axis=0)
    return np.flatnonzero(mask)


def causal_diamond(
    space: SampledSpace, x, y, kernel: Optional[CausalKernel] = None
) -> np.ndarray:
    """Indices of sampled points z with x <= z <= y; empty unless x <= y."""
    kernel = kernel or minkowski_kernel(space.dim)
    x = _coords(x)
    y = _coords(y)
    xy_code = kernel_relation_cross(kernel, x[np.newaxis], y[np.newaxis])[0, 0]
    if xy_code == UNRELATED_CODE:
        return np.empty(0, dtype=int)
    after_x = kernel_relation_cross(kernel, x[np.newaxis], space.points)[0]
    before_y = kernel_relation_cross(kernel, space.points, y[np.newaxis])[:, 0]
    return np.flatnonzero((after_x >= CAUSAL_NULL_CODE) & (before_y >= CAUSAL_NULL_CODE))


def tau_ball(
    space: SampledSpace,
    x,
    r: float,
    kernel: Optional[CausalKernel] = None,
    closed: bool = False,
) -> np.ndarray:
    """Indices in {y in I+(x) : tau(x,y) < r} united with {x} if sampled.

    closed=True uses tau <= r instead (the closed ball of the volume
    comparison shells).
    """
    if not r > 0.0:
        raise SpacetimeError(f"tau_ball radius r={r} must be > 0")
    kernel = kernel or minkowski_kernel(space.dim)
    x = _coords(x)
    codes = kernel_relation_cross(kernel, x[np.newaxis], space.points)[0]
    taus = kernel_tau_cross(kernel, x[np.newaxis], space.points)[0]
    inside = taus <= r if closed else taus < r
    mask = (codes == CHRONOLOGICAL_CODE) & inside
    self_idx = space.index_of(x)
    if self_idx >= 0:
        mask[self_idx] = True
    return np.flatnonzero(mask)


def check_reverse_triangle(kernel: CausalKernel, triples) -> CheckReport:
    """Report tau(x,z) >= tau(x,y) + tau(y,z) over causal chains x<=y<=z."""
    entries = []
    for triple in triples:
        x, y, z = (_coords(p) for p in triple)
        for a, b, legs in ((x, y, "x<=y"), (y, z, "y<=z")):
            code = kernel_relation_cross(kernel, a[np.newaxis], b[np.newaxis])[0, 0]
            if code == UNRELATED_CODE:
                raise CausalChainError(
                    f"triple {tuple(map(tuple, (x, y, z)))} breaks {legs}"
                )
        lhs = kernel.tau(x, y) + kernel.tau(y, z)
        rhs = kernel.tau(x, z)
        entries.append(Entry(t=None, Nprime=None, lhs=lhs, rhs=rhs, label="triple"))
    return CheckReport(
        spec={"check": "reverse_triangle", "kernel": kernel.name, "n": len(entries)},
        entries=entries,
        tolerance=1e-12,
        discretization={"h": 0.0, "eps": 1e-12},
    )
