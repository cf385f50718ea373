"""l^p-optimal transport over causal couplings.

The cost of a coupling pi between discrete measures is

    l_p(pi) = ( sum_ij pi_ij tau(x_i, y_j)^p )^(1/p),   0 < p <= 1,

and l_p(mu0, mu1) is its supremum over couplings supported on causally
related pairs.  Conventions from the extended-real calculus: the
supremum over an empty set of couplings is -infinity, (-infinity)^p and
(-infinity)^(1/p) are -infinity, and a sum involving -infinity is
-infinity (so "infinity - infinity = -infinity" on the bound side of the
reverse triangle inequality).

The solver is a primal network simplex on the bipartite transportation
graph with non-causal arcs excluded from the arc pool; see _simplex_py
for the pivot rules.  Instances too large to materialize every arc are
solved by column generation: a pooled solve followed by pricing sweeps
over all pairs against the optimal node potentials, which terminates
only when no admissible arc has a reduced cost below the pivot
tolerance, certifying optimality over the full arc set.  Every returned
coupling is a vertex (spanning-tree basic solution).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional

import numpy as np

from ._backend import NetworkSimplex, SimplexStallError, active_backend
from .coeffs import ExtReal
from .reporting import CheckReport, Entry, _atomic_write
from .spacetime import (
    CHRONOLOGICAL_CODE,
    UNRELATED_CODE,
    CausalKernel,
    SampledSpace,
    kernel_relation_cross,
    kernel_relation_pairs,
    kernel_tau_cross,
    kernel_tau_pairs,
)

__all__ = [
    "DiscreteMeasure",
    "Coupling",
    "TransportResult",
    "TransportError",
    "lp_cost",
    "solve_lp_optimal",
    "is_strongly_dualizable_sufficient",
    "is_timelike_dualizable",
    "verify_lp_reverse_triangle",
    "ext_add",
    "uniform_measure",
    "measure_from_weights",
    "active_backend",
    "SimplexStallError",
]

PIVOT_TOL = 1e-11
MARGINAL_TOL = 1e-10
SPLIT_TOL = 1e-12
ARTIFICIAL_TOL = 1e-9

# instances with at most this many arcs materialize the full pool
DENSE_ARC_LIMIT = 2_000_000

# column-generation instances up to this many pairs keep the masked cost
# matrix in memory (float64) instead of re-streaming it each pricing round
STREAM_CACHE_LIMIT = 32_000_000


class TransportError(ValueError):
    """Invalid transport problem data."""


# ---------------------------------------------------------------------------
# measures and couplings


@dataclasses.dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """A probability measure on cells of a SampledSpace.

    support holds point indices, weights the probabilities (> 0, summing
    to 1); duplicate indices are merged and zero-weight atoms dropped at
    construction.  is_ac marks the measure as a discretization of an
    m-absolutely-continuous measure, with density weight/mass per cell;
    Dirac-like singular limits carry is_ac=False.
    """

    space: SampledSpace
    support: np.ndarray
    weights: np.ndarray
    is_ac: bool = True

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64).ravel()
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if len(support) != len(weights):
            raise TransportError("support and weights must have equal length")
        if len(support) == 0:
            raise TransportError("a measure needs at least one atom")
        if np.any(support < 0) or np.any(support >= self.space.n_points):
            raise TransportError("support index out of range")
        if np.any(weights < 0.0):
            raise TransportError("negative weight")
        uniq, inverse = np.unique(support, return_inverse=True)
        merged = np.zeros(len(uniq))
        np.add.at(merged, inverse, weights)
        keep = merged > 0.0
        uniq, merged = uniq[keep], merged[keep]
        if len(uniq) == 0:
            raise TransportError("all weights are zero")
        total = float(merged.sum())
        if abs(total - 1.0) > 1e-9:
            raise TransportError(f"weights sum to {total}, expected 1")
        merged = merged / total
        uniq.setflags(write=False)
        merged.setflags(write=False)
        object.__setattr__(self, "support", uniq)
        object.__setattr__(self, "weights", merged)

    @property
    def n_atoms(self) -> int:
        return len(self.support)

    @property
    def points(self) -> np.ndarray:
        return self.space.points[self.support]

    def densities(self) -> np.ndarray:
        """Per-atom density with respect to the reference masses."""
        return self.weights / self.space.masses[self.support]

    @property
    def sup_density(self) -> float:
        return float(np.max(self.densities()))


def uniform_measure(space: SampledSpace, indices, is_ac: bool = True) -> DiscreteMeasure:
    indices = np.asarray(indices, dtype=np.int64).ravel()
    w = np.full(len(indices), 1.0 / len(indices))
    return DiscreteMeasure(space, indices, w, is_ac)


def measure_from_weights(
    space: SampledSpace, indices, weights, is_ac: bool = True
) -> DiscreteMeasure:
    return DiscreteMeasure(space, indices, weights, is_ac)


@dataclasses.dataclass(frozen=True, eq=False)
class Coupling:
    """A nonnegative mass assignment between two supports, stored sparse.

    rows/cols are point-index lists; (src, dst, mass) are triplets with
    src/dst positions into rows/cols.  value_p caches the l^p value when
    the builder computed one.
    """

    space: SampledSpace
    rows: np.ndarray
    cols: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    mass: np.ndarray
    is_causal: bool
    is_chronological: bool
    value_p: Optional[ExtReal] = None

    def __post_init__(self):
        for name in ("rows", "cols", "src", "dst", "mass"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.mass < 0.0):
            raise TransportError("negative coupling mass")

    @property
    def shape(self):
        return (len(self.rows), len(self.cols))

    def mass_matrix(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.src, self.dst), self.mass)
        return out

    def row_marginal(self) -> np.ndarray:
        out = np.zeros(len(self.rows))
        np.add.at(out, self.src, self.mass)
        return out

    def col_marginal(self) -> np.ndarray:
        out = np.zeros(len(self.cols))
        np.add.at(out, self.dst, self.mass)
        return out

    def pair_points(self):
        return (
            self.space.points[self.rows[self.src]],
            self.space.points[self.cols[self.dst]],
        )

    def split_row_fraction(self, row_weights: np.ndarray) -> float:
        """Fraction of first-marginal mass on rows split across >= 2 targets."""
        counts = np.zeros(len(self.rows), dtype=np.int64)
        np.add.at(counts, self.src[self.mass > SPLIT_TOL], 1)
        return float(np.sum(row_weights[counts >= 2]))

    def write_csv(self, path) -> None:
        lines = ["i,j,mass"]
        for s, d, w in zip(self.src, self.dst, self.mass):
            lines.append(f"{int(self.rows[s])},{int(self.cols[d])},{float(w)!r}")
        _atomic_write(path, "\n".join(lines) + "\n")


def make_coupling(
    space: SampledSpace,
    rows,
    cols,
    src,
    dst,
    mass,
    kernel: CausalKernel,
    p: Optional[float] = None,
) -> Coupling:
    """Build a coupling and classify its causal structure pairwise."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    mass = np.asarray(mass, dtype=np.float64)
    codes = kernel_relation_pairs(kernel, space.points[rows[src]], space.points[cols[dst]])
    positive = mass > 0.0
    is_causal = bool(np.all(codes[positive] >= 1))
    is_chronological = bool(np.all(codes[positive] == CHRONOLOGICAL_CODE))
    coupling = Coupling(
        space, rows, cols, src, dst, mass, is_causal, is_chronological, None
    )
    if p is not None:
        object.__setattr__(coupling, "value_p", lp_cost(coupling, p, kernel))
    return coupling


# ---------------------------------------------------------------------------
# extended-real helpers


def ext_add(a: ExtReal, b: ExtReal) -> ExtReal:
    """Extended addition with -infinity absorbing: inf + (-inf) = -inf."""
    if a.is_neg_inf or b.is_neg_inf:
        return ExtReal.neg_inf()
    if a.is_inf or b.is_inf:
        return ExtReal.inf()
    return ExtReal(a.value + b.value)


def _ext_float(x: ExtReal) -> float:
    if x.is_inf:
        return math.inf
    if x.is_neg_inf:
        return -math.inf
    return x.value


# ---------------------------------------------------------------------------
# cost evaluation


def _check_p(p: float, allow_one: bool = True) -> float:
    p = float(p)
    hi_ok = p <= 1.0 if allow_one else p < 1.0
    if not (0.0 < p and hi_ok):
        raise TransportError(f"p={p} outside the admissible range")
    return p


def lp_cost(coupling: Coupling, p: float, kernel: CausalKernel) -> ExtReal:
    """( sum mass * tau^p )^(1/p), or -infinity off the causal relation."""
    p = _check_p(p)
    positive = coupling.mass > 0.0
    if not np.any(positive):
        return ExtReal(0.0)
    A, B = coupling.pair_points()
    codes = kernel_relation_pairs(kernel, A[positive], B[positive])
    if np.any(codes == UNRELATED_CODE):
        return ExtReal.neg_inf()
    taus = kernel_tau_pairs(kernel, A[positive], B[positive])
    total = float(np.dot(coupling.mass[positive], taus**p))
    return ExtReal(total ** (1.0 / p))


# ---------------------------------------------------------------------------
# the LP solver


@dataclasses.dataclass(frozen=True, eq=False)
class TransportResult:
    """Outcome of one l^p-optimal transport solve.

    objective is the l^p value ((sum tau^p dpi)^(1/p)) when feasible and
    -infinity when no causal coupling exists (coupling is then None).
    monge_defect is the fraction of first-marginal mass split across
    two or more targets.
    """

    coupling: Optional[Coupling]
    objective: ExtReal
    feasible: bool
    monge_defect: float
    p: float = 1.0
    objective_power_p: float = 0.0
    n_pivots: int = 0
    pricing_rounds: int = 0


def _cost_stream_from_kernel(kernel, points0, points1, p):
    def stream(lo: int, hi: int):
        codes = kernel_relation_cross(kernel, points0[lo:hi], points1)
        taus = kernel_tau_cross(kernel, points0[lo:hi], points1)
        return codes, taus**p

    return stream


def _row_chunk(n_cols: int) -> int:
    return max(1, 4_000_000 // max(1, n_cols))


def solve_lp_optimal(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    p: float,
    kernel: CausalKernel,
    pivot_tol: float = PIVOT_TOL,
) -> TransportResult:
    """Maximize the l^p cost over causal couplings of mu0 and mu1.

    Returns a vertex solution; infeasible instances (no causal coupling)
    report objective -infinity.
    """
    p = _check_p(p)
    if mu0.space is not mu1.space:
        raise TransportError("measures live on different spaces")
    if abs(mu0.weights.sum() - mu1.weights.sum()) > MARGINAL_TOL:
        raise TransportError("marginal mismatch")
    stream = _cost_stream_from_kernel(kernel, mu0.points, mu1.points, p)
    status = _solve_streamed(mu0.weights, mu1.weights, stream, pivot_tol)
    if not status["feasible"]:
        return TransportResult(
            coupling=None,
            objective=ExtReal.neg_inf(),
            feasible=False,
            monge_defect=0.0,
            p=p,
            n_pivots=status["n_pivots"],
            pricing_rounds=status["pricing_rounds"],
        )
    src, dst, mass = status["triplets"]
    coupling = make_coupling(
        mu0.space, mu0.support, mu1.support, src, dst, mass, kernel, p=None
    )
    object.__setattr__(coupling, "value_p", ExtReal(status["objective"] ** (1.0 / p)))
    _validate_marginals(coupling, mu0.weights, mu1.weights)
    return TransportResult(
        coupling=coupling,
        objective=ExtReal(status["objective"] ** (1.0 / p)),
        feasible=True,
        monge_defect=coupling.split_row_fraction(mu0.weights),
        p=p,
        objective_power_p=status["objective"],
        n_pivots=status["n_pivots"],
        pricing_rounds=status["pricing_rounds"],
    )


def _validate_marginals(coupling: Coupling, w0: np.ndarray, w1: np.ndarray) -> None:
    if np.max(np.abs(coupling.row_marginal() - w0)) > MARGINAL_TOL or np.max(
        np.abs(coupling.col_marginal() - w1)
    ) > MARGINAL_TOL:
        raise TransportError("solver returned infeasible marginals")


def _solve_streamed(
    w0: np.ndarray,
    w1: np.ndarray,
    stream: Callable,
    pivot_tol: float = PIVOT_TOL,
    topk: int = 4,
    max_rounds: int = 500,
) -> dict:
    """Network-simplex solve over the streamed cost/relation matrix.

    stream(lo, hi) returns the (hi-lo, n) relation-code and cost blocks
    for source rows [lo, hi).  Small instances add every admissible arc;
    large ones run column generation with per-row/per-column seeding and
    per-row pricing, terminating on a clean pricing pass (an exact
    optimality certificate for the full arc set).
    """
    m, n = len(w0), len(w1)
    chunk = _row_chunk(n)
    dense = m * n <= DENSE_ARC_LIMIT
    cache = None
    if not dense and m * n <= STREAM_CACHE_LIMIT:
        cache = np.empty((m, n))

    max_cost = 0.0
    row_feasible = np.zeros(m, dtype=bool)
    col_feasible = np.zeros(n, dtype=bool)
    dense_arcs = []
    seed_keys = []
    col_best_val = np.full(n, -np.inf)
    col_best_row = np.zeros(n, dtype=np.int64)

    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        codes, cost = stream(lo, hi)
        allowed = codes >= 1
        if np.any(allowed):
            max_cost = max(max_cost, float(np.max(cost[allowed])))
        row_feasible[lo:hi] |= np.any(allowed, axis=1)
        col_feasible |= np.any(allowed, axis=0)
        if dense:
            loc_i, loc_j = np.nonzero(allowed)
            dense_arcs.append((lo + loc_i, loc_j, cost[loc_i, loc_j]))
        else:
            masked = np.where(allowed, cost, -np.inf)
            if cache is not None:
                cache[lo:hi] = masked
            work = masked.copy()
            rows_loc = np.arange(hi - lo)
            for _ in range(min(topk, n)):
                jbest = np.argmax(work, axis=1)
                ok = work[rows_loc, jbest] > -np.inf
                seed_keys.append((lo + rows_loc[ok]) * n + jbest[ok])
                work[rows_loc[ok], jbest[ok]] = -np.inf
            cmax = masked.max(axis=0)
            better = cmax > col_best_val
            col_best_val[better] = cmax[better]
            col_best_row[better] = lo + np.argmax(masked, axis=0)[better]

    if not (np.all(row_feasible) and np.all(col_feasible)):
        return {"feasible": False, "n_pivots": 0, "pricing_rounds": 0}

    big_m = (m + n + 1) * (1.0 + max_cost)
    simplex = NetworkSimplex(w0, w1, big_m)

    if dense:
        for loc_i, loc_j, c in dense_arcs:
            simplex.add_arcs(loc_i, loc_j, -c)
        simplex.solve(pivot_tol)
        rounds = 0
    else:
        pool = np.zeros(0, dtype=np.int64)  # kept sorted

        def add_pool(keys: np.ndarray) -> int:
            nonlocal pool
            keys = np.unique(keys)
            fresh = keys[~np.isin(keys, pool, assume_unique=True)]
            if len(fresh) == 0:
                return 0
            srcs = fresh // n
            dsts = fresh % n
            if cache is not None:
                costs = cache[srcs, dsts]
            else:
                costs = _costs_for_pairs(stream, srcs, dsts, chunk)
            simplex.add_arcs(srcs, dsts, -costs)
            pool = np.union1d(pool, fresh)
            return len(fresh)

        add_pool(np.concatenate(seed_keys))
        add_pool(col_best_row * n + np.arange(n))
        simplex.solve(pivot_tol)
        for rounds in range(1, max_rounds + 1):
            pot = simplex.potentials()
            pot_src = pot[:m]
            pot_snk = pot[m : m + n]
            new_keys = []
            for lo in range(0, m, chunk):
                hi = min(lo + chunk, m)
                if cache is not None:
                    masked = cache[lo:hi]
                else:
                    codes, cost = stream(lo, hi)
                    masked = np.where(codes == UNRELATED_CODE, -np.inf, cost)
                viol = (masked - pot_src[lo:hi, np.newaxis]) + pot_snk[np.newaxis, :]
                # pool arcs already price out inside the simplex; mask them
                # so a toleranced re-detection cannot hide a fresh violator
                a = np.searchsorted(pool, lo * n)
                b = np.searchsorted(pool, hi * n)
                rel = pool[a:b] - lo * n
                viol[rel // n, rel % n] = -np.inf
                jbest = np.argmax(viol, axis=1)
                rows_loc = np.arange(hi - lo)
                hit = viol[rows_loc, jbest] > pivot_tol
                new_keys.append((lo + rows_loc[hit]) * n + jbest[hit])
            if add_pool(np.concatenate(new_keys)) == 0:
                break
            simplex.solve(pivot_tol)
        else:
            raise SimplexStallError(f"column generation hit {max_rounds} rounds")

    if simplex.artificial_mass() > ARTIFICIAL_TOL:
        return {
            "feasible": False,
            "n_pivots": simplex.n_pivots,
            "pricing_rounds": rounds,
        }
    srcs, dsts, flows = simplex.nonzero_real_arcs()
    order = np.lexsort((dsts, srcs))
    return {
        "feasible": True,
        "triplets": (srcs[order], dsts[order], flows[order]),
        "objective": max(0.0, -simplex.real_objective()),
        "n_pivots": simplex.n_pivots,
        "pricing_rounds": rounds,
    }


def _costs_for_pairs(stream, srcs, dsts, chunk) -> np.ndarray:
    """Costs of specific (src, dst) pairs via the row stream."""
    out = np.empty(len(srcs))
    order = np.argsort(srcs, kind="stable")
    srcs_o = srcs[order]
    dsts_o = dsts[order]
    pos = 0
    while pos < len(srcs_o):
        lo_row = int(srcs_o[pos])
        hi_row = min(lo_row + chunk, int(srcs_o[-1]) + 1)
        end = pos
        while end < len(srcs_o) and srcs_o[end] < hi_row:
            end += 1
        _, cost = stream(lo_row, hi_row)
        out[order[pos:end]] = cost[srcs_o[pos:end] - lo_row, dsts_o[pos:end]]
        pos = end
    return out


# ---------------------------------------------------------------------------
# dualizability and the reverse triangle inequality


def is_strongly_dualizable_sufficient(
    mu0: DiscreteMeasure, mu1: DiscreteMeasure, kernel: CausalKernel
) -> bool:
    """True iff every support pair is chronological (sufficient only)."""
    pts1 = mu1.points
    chunk = _row_chunk(len(pts1))
    pts0 = mu0.points
    for lo in range(0, len(pts0), chunk):
        codes = kernel_relation_cross(kernel, pts0[lo : lo + chunk], pts1)
        if np.any(codes != CHRONOLOGICAL_CODE):
            return False
    return True


def is_timelike_dualizable(result: TransportResult) -> bool:
    """True iff the solve produced a chronological optimal coupling."""
    return bool(result.feasible and result.coupling.is_chronological)


def verify_lp_reverse_triangle(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    sigma_m: DiscreteMeasure,
    p: float,
    kernel: CausalKernel,
) -> CheckReport:
    """Report l_p(mu, sigma) >= l_p(mu, nu) + l_p(nu, sigma)."""
    l_ms = solve_lp_optimal(mu, sigma_m, p, kernel).objective
    l_mn = solve_lp_optimal(mu, nu, p, kernel).objective
    l_ns = solve_lp_optimal(nu, sigma_m, p, kernel).objective
    bound = ext_add(l_mn, l_ns)
    entry = Entry(
        t=None,
        Nprime=None,
        lhs=_ext_float(bound),
        rhs=_ext_float(l_ms),
        label="lp_reverse_triangle",
    )
    return CheckReport(
        spec={
            "check": "lp_reverse_triangle",
            "p": p,
            "l_mu_sigma": _ext_float(l_ms),
            "l_mu_nu": _ext_float(l_mn),
            "l_nu_sigma": _ext_float(l_ns),
        },
        entries=[entry],
        tolerance=1e-9,
        discretization={"h": mu.space.cell_diameter, "eps": 1e-9},
    )


# ---------------------------------------------------------------------------
# JSON / CSV interfaces


def instance_to_json(mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: float) -> dict:
    def enc(mu):
        return [[int(i), float(w)] for i, w in zip(mu.support, mu.weights)]

    return {
        "schema": 1,
        "mu0": enc(mu0),
        "mu1": enc(mu1),
        "p": float(p),
        "is_ac": [bool(mu0.is_ac), bool(mu1.is_ac)],
    }


def instance_from_json(doc: dict, space: SampledSpace):
    try:
        pairs0 = doc["mu0"]
        pairs1 = doc["mu1"]
        p = float(doc["p"])
    except (KeyError, TypeError) as exc:
        raise TransportError(f"transport instance missing field: {exc}") from exc
    ac = doc.get("is_ac", [True, True])

    def dec(pairs, is_ac):
        idx = [int(i) for i, _ in pairs]
        w = [float(x) for _, x in pairs]
        return DiscreteMeasure(space, idx, w, bool(is_ac))

    return dec(pairs0, ac[0]), dec(pairs1, ac[1]), p
