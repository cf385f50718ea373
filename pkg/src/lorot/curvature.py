"""Synthetic timelike curvature-dimension checkers and their geometric
consequences on sampled spacetimes.

Every checker produces a CheckReport whose entries assert lhs <= rhs
with margin = rhs - lhs; a report fails when the worst margin drops
below -tolerance.  The convexity conditions (TCD and TMCP families,
midpoint and pathwise forms, good-geodesic thresholds) are existential
statements over geodesic plans: the checkers test the plan produced by
the deterministic solver (plus, for good geodesics, an excess-selected
alternative), so a failing report means "witness not found" at this
discretization, never a refutation.  The measure-comparison estimators
(timelike Brunn-Minkowski, Bonnet-Myers, Bishop-Gromov) compare sampled
volumes against the model profiles directly.

Reduced variants use sigma-coefficients sigma_{K,N'}, full variants the
distortion coefficients tau_{K,N'}; at K = 0 both collapse to the
affine coefficients and reduced/full reports coincide.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional, Sequence

import numpy as np

from .coeffs import (
    CoeffParams,
    ExtReal,
    _sigma_array,
    _tau_array,
    s_kappa,
    sigma,
    tau_coeff,
    vol_profile,
)
from .entropy import DensityField, excess_functional, renyi_entropy, u_n
from .geodesics import (
    GeodesicOracle,
    GeodesicPlan,
    build_plan,
    density_estimate,
    interpolate,
    oracle_t_points,
)
from .reporting import CheckReport, Entry
from .spacetime import (
    CHRONOLOGICAL_CODE,
    CausalKernel,
    SampledSpace,
    _coords,
    kernel_relation_cross,
    kernel_relation_pairs,
    kernel_tau_cross,
    kernel_tau_pairs,
)
from .transport import (
    DiscreteMeasure,
    TransportResult,
    _cost_stream_from_kernel,
    _solve_streamed,
    is_strongly_dualizable_sufficient,
    is_timelike_dualizable,
    make_coupling,
    solve_lp_optimal,
)

VARIANTS = (
    "TCD_reduced",
    "TCD_full",
    "TCD_entropic",
    "TMCP_reduced",
    "TMCP_full",
    "TMCP_entropic",
    "pathwise_reduced",
    "pathwise_full",
)

FAIL_MEANING = "witness not found"
EXCESS_BUDGET = 1e-6
OPTIMALITY_LOSS_TOL = 1e-8


class CurvatureError(ValueError):
    """Invalid condition parameters or non-dualizable instance."""


def _is_dyadic(t: float, max_level: int = 30) -> bool:
    scaled = t * (1 << max_level)
    return abs(scaled - round(scaled)) < 1e-9


@dataclasses.dataclass(frozen=True)
class ConditionSpec:
    """Parameters of one curvature-dimension check.

    variant picks the condition family and coefficient flavor; K is the
    curvature parameter, N >= 1 the dimension bound, p in (0, 1) the
    transport exponent.  Nprime_grid samples the "for every N' >= N"
    quantifier (default {N, N+1, 2N, 10N}); t_grid holds dyadic times
    and must contain 0, 1/2, and 1.
    """

    variant: str
    K: float
    N: float
    p: float
    Nprime_grid: tuple = ()
    t_grid: tuple = ()

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise CurvatureError(f"unknown variant {self.variant!r}")
        if self.N < 1.0:
            raise CurvatureError(f"N={self.N} must be >= 1")
        if not 0.0 < self.p < 1.0:
            raise CurvatureError(f"p={self.p} outside (0, 1)")
        nprimes = self.Nprime_grid or (self.N, self.N + 1.0, 2.0 * self.N, 10.0 * self.N)
        nprimes = tuple(float(v) for v in nprimes)
        if any(v < self.N for v in nprimes):
            raise CurvatureError("every N' must satisfy N' >= N")
        ts = self.t_grid or (0.0, 0.25, 0.5, 0.75, 1.0)
        ts = tuple(sorted(float(v) for v in ts))
        for t in ts:
            if not (0.0 <= t <= 1.0 and _is_dyadic(t)):
                raise CurvatureError(f"t={t} is not a dyadic time in [0, 1]")
        for needed in (0.0, 0.5, 1.0):
            if needed not in ts:
                raise CurvatureError(f"t_grid must contain {needed}")
        object.__setattr__(self, "Nprime_grid", nprimes)
        object.__setattr__(self, "t_grid", ts)

    @property
    def uses_tau_coeff(self) -> bool:
        return self.variant.endswith("_full")

    @property
    def is_entropic(self) -> bool:
        return self.variant.endswith("_entropic")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "K": self.K,
            "N": self.N,
            "p": self.p,
            "Nprime_grid": list(self.Nprime_grid),
            "t_grid": list(self.t_grid),
        }


def _coeff_array(use_tau: bool, K: float, Np: float, t: float, taus) -> np.ndarray:
    if use_tau:
        return _tau_array(K, Np, t, taus)
    return _sigma_array(K, Np, t, taus)


def _coeff_scalar(use_tau: bool, K: float, Np: float, t: float, theta: float) -> ExtReal:
    params = CoeffParams(K=K, N=Np, t=t, theta=theta)
    return tau_coeff(params) if use_tau else sigma(params)


def _ext_times(c: ExtReal, x: float) -> float:
    """c * x with the 0 * inf := 0 convention; c >= 0, x finite."""
    if c.is_inf:
        return 0.0 if x == 0.0 else math.copysign(math.inf, x)
    return c.value * x


def _default_eps(space: SampledSpace) -> float:
    return space.cell_diameter


def _density_by_cell(space: SampledSpace, mu: DiscreteMeasure) -> np.ndarray:
    out = np.zeros(space.n_points)
    out[mu.support] = mu.densities()
    return out


def _require_variant(spec: ConditionSpec, family: str) -> None:
    if not spec.variant.startswith(family):
        raise CurvatureError(
            f"variant {spec.variant!r} does not belong to the {family} family"
        )


def _spec_dict(spec, check: str, extra: Optional[dict] = None) -> dict:
    doc = {"check": check}
    doc.update(spec.to_dict() if isinstance(spec, ConditionSpec) else spec)
    doc["fail_meaning"] = FAIL_MEANING
    if extra:
        doc.update(extra)
    return doc


# ---------------------------------------------------------------------------
# TCD family


def check_tcd(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    spec: ConditionSpec,
    kernel: CausalKernel,
    oracle: GeodesicOracle,
    tolerance: Optional[float] = None,
) -> CheckReport:
    """Convexity of the N'-Renyi entropy along the optimal plan.

    Each (t, N') entry asserts S_{N'}(mu_t) <= -int [coeff^{(1-t)}(tau)
    rho_0^{-1/N'} + coeff^{(t)}(tau) rho_1^{-1/N'}] dpi with sigma- or
    tau-coefficients per the variant; the entropic variant instead
    asserts U_N(mu_t) >= sigma^{(1-t)}(||tau||_{L2}) U_N(mu_0) +
    sigma^{(t)}(...) U_N(mu_1), one entry per t at N' = N.  A +infinity
    coefficient makes the bound side infinite and the entry fail; it is
    reported, not raised.
    """
    _require_variant(spec, "TCD")
    if not (mu0.is_ac and mu1.is_ac):
        raise CurvatureError("TCD requires absolutely continuous endpoints")
    result = solve_lp_optimal(mu0, mu1, spec.p, kernel)
    if not is_timelike_dualizable(result):
        raise CurvatureError(
            "no chronological optimal coupling; instance is not timelike dualizable"
        )
    plan = build_plan(result, oracle)
    space = mu0.space
    taus = kernel_tau_pairs(kernel, plan.src, plan.dst)
    r0 = _density_by_cell(space, mu0)[plan.src_support]
    r1 = _density_by_cell(space, mu1)[plan.dst_support]

    entries = []
    if spec.is_entropic:
        theta2 = float(np.sqrt(np.dot(plan.mass, taus**2)))
        u0 = u_n(density_estimate(mu0, space), spec.N)
        u1 = u_n(density_estimate(mu1, space), spec.N)
        for t in spec.t_grid:
            mu_t = interpolate(plan, t)
            rhs = u_n(density_estimate(mu_t, mu_t.space), spec.N)
            c0 = sigma(CoeffParams(spec.K, spec.N, 1.0 - t, theta2))
            c1 = sigma(CoeffParams(spec.K, spec.N, t, theta2))
            lhs = _ext_times(c0, u0) + _ext_times(c1, u1)
            entries.append(Entry(t=t, Nprime=spec.N, lhs=lhs, rhs=rhs))
    else:
        for t in spec.t_grid:
            mu_t = interpolate(plan, t)
            field = density_estimate(mu_t, mu_t.space)
            for Np in spec.Nprime_grid:
                c0 = _coeff_array(spec.uses_tau_coeff, spec.K, Np, 1.0 - t, taus)
                c1 = _coeff_array(spec.uses_tau_coeff, spec.K, Np, t, taus)
                inv = -1.0 / Np
                integrand = c0 * r0**inv + c1 * r1**inv
                rhs_val = -float(np.dot(plan.mass, integrand))
                lhs = renyi_entropy(field, Np).value
                entries.append(Entry(t=t, Nprime=Np, lhs=lhs, rhs=rhs_val))
    eps = _default_eps(space) if tolerance is None else float(tolerance)
    return CheckReport(
        spec=_spec_dict(spec, "tcd"),
        entries=entries,
        tolerance=eps,
        discretization={"h": space.cell_diameter, "eps": eps},
    )


def check_pathwise(
    plan: GeodesicPlan,
    rho0: DensityField,
    rho1: DensityField,
    spec: ConditionSpec,
    space: SampledSpace,
    kernel: CausalKernel,
    tolerance: Optional[float] = None,
) -> CheckReport:
    """Pointwise density inequality along plan pairs, mass-aggregated.

    For each (t, N') the entry's lhs is the mass-weighted total
    violation of rho_t(gamma_t)^{-1/N'} >= coeff^{(1-t)}(tau)
    rho_0(gamma_0)^{-1/N'} + coeff^{(t)}(tau) rho_1(gamma_1)^{-1/N'}
    and the rhs is 0.
    """
    _require_variant(spec, "pathwise")
    d0 = np.zeros(space.n_points)
    d0[rho0.cells] = rho0.density
    d1 = np.zeros(space.n_points)
    d1[rho1.cells] = rho1.density
    r0 = d0[space.bin_points(plan.src)]
    r1 = d1[space.bin_points(plan.dst)]
    if np.any(r0 <= 0.0) or np.any(r1 <= 0.0):
        raise CurvatureError("zero density at a plan endpoint carrying mass")
    taus = kernel_tau_pairs(kernel, plan.src, plan.dst)

    entries = []
    for t in spec.t_grid:
        mu_t = interpolate(plan, t, space)
        field = density_estimate(mu_t, space)
        dt = np.zeros(space.n_points)
        dt[field.cells] = field.density
        rt = dt[space.bin_points(plan.points_at(t))]
        for Np in spec.Nprime_grid:
            inv = -1.0 / Np
            with np.errstate(divide="ignore"):
                lhs_pt = np.where(rt > 0.0, rt**inv, np.inf)
            c0 = _coeff_array(spec.uses_tau_coeff, spec.K, Np, 1.0 - t, taus)
            c1 = _coeff_array(spec.uses_tau_coeff, spec.K, Np, t, taus)
            rhs_pt = c0 * r0**inv + c1 * r1**inv
            viol = np.maximum(rhs_pt - lhs_pt, 0.0)
            total = float(np.dot(plan.mass, viol))
            entries.append(Entry(t=t, Nprime=Np, lhs=total, rhs=0.0))
    eps = _default_eps(space) if tolerance is None else float(tolerance)
    return CheckReport(
        spec=_spec_dict(spec, "pathwise"),
        entries=entries,
        tolerance=eps,
        discretization={"h": space.cell_diameter, "eps": eps},
    )


# ---------------------------------------------------------------------------
# TMCP family


def _product_plan(
    mu0: DiscreteMeasure,
    x1,
    p: float,
    kernel: CausalKernel,
    oracle: GeodesicOracle,
) -> GeodesicPlan:
    """Plan from mu0 to the Dirac at x1 (the product coupling)."""
    target = _coords(x1)
    pts = mu0.points
    codes = kernel_relation_pairs(
        kernel, pts, np.broadcast_to(target, pts.shape)
    )
    if np.any(codes != CHRONOLOGICAL_CODE):
        raise CurvatureError(
            "target point is not in the chronological future of the source support"
        )
    curves = tuple(oracle.connect(a, target) for a in pts)
    dst_idx = mu0.space.index_of(target)
    dst_support = (
        np.full(len(pts), dst_idx, dtype=np.int64) if dst_idx >= 0 else None
    )
    return GeodesicPlan(
        space=mu0.space,
        src=pts,
        dst=np.broadcast_to(target, pts.shape).copy(),
        mass=mu0.weights,
        curves=curves,
        p=p,
        mu0_is_ac=mu0.is_ac,
        mu1_is_ac=False,
        src_support=mu0.support,
        dst_support=dst_support,
    )


def check_tmcp(
    mu0: DiscreteMeasure,
    x1,
    spec: ConditionSpec,
    kernel: CausalKernel,
    oracle: GeodesicOracle,
    tolerance: Optional[float] = None,
) -> CheckReport:
    """Entropy convexity along the contraction of mu0 onto the point x1.

    Every coupling with a Dirac is the product coupling, so no transport
    solve is needed.  Entries run over t_grid minus {1}: the rho_1 term
    drops and the bound is -int coeff^{(1-t)}(tau(x, x1))
    rho_0(x)^{-1/N'} dmu_0; entropic uses the U_N form with only the
    mu_0 term.
    """
    _require_variant(spec, "TMCP")
    if not mu0.is_ac:
        raise CurvatureError("TMCP requires an absolutely continuous source")
    plan = _product_plan(mu0, x1, spec.p, kernel, oracle)
    space = mu0.space
    taus = kernel_tau_pairs(kernel, plan.src, plan.dst)
    r0 = mu0.densities()

    entries = []
    times = [t for t in spec.t_grid if t != 1.0]
    if spec.is_entropic:
        theta2 = float(np.sqrt(np.dot(plan.mass, taus**2)))
        u0 = u_n(density_estimate(mu0, space), spec.N)
        for t in times:
            mu_t = interpolate(plan, t)
            rhs = u_n(density_estimate(mu_t, mu_t.space), spec.N)
            c0 = sigma(CoeffParams(spec.K, spec.N, 1.0 - t, theta2))
            entries.append(
                Entry(t=t, Nprime=spec.N, lhs=_ext_times(c0, u0), rhs=rhs)
            )
    else:
        for t in times:
            mu_t = interpolate(plan, t)
            field = density_estimate(mu_t, mu_t.space)
            for Np in spec.Nprime_grid:
                c0 = _coeff_array(spec.uses_tau_coeff, spec.K, Np, 1.0 - t, taus)
                rhs_val = -float(np.dot(plan.mass, c0 * r0 ** (-1.0 / Np)))
                lhs = renyi_entropy(field, Np).value
                entries.append(Entry(t=t, Nprime=Np, lhs=lhs, rhs=rhs_val))
    eps = _default_eps(space) if tolerance is None else float(tolerance)
    return CheckReport(
        spec=_spec_dict(spec, "tmcp"),
        entries=entries,
        tolerance=eps,
        discretization={"h": space.cell_diameter, "eps": eps},
    )


# ---------------------------------------------------------------------------
# Brunn-Minkowski


def brunn_minkowski(
    A0,
    A1,
    t: float,
    K: float,
    N_grid: Sequence[float],
    kernel: CausalKernel,
    oracle: GeodesicOracle,
    space: SampledSpace,
    tolerance: Optional[float] = None,
) -> CheckReport:
    """m[A_t]^{1/N'} >= coeff^{(1-t)}(Theta) m[A_0]^{1/N'} + coeff^{(t)}(Theta) m[A_1]^{1/N'}.

    A_t is the set of t-points of oracle curves over all (chronological)
    pairs of A0 x A1, measured by covered-cell mass.  Theta is sup tau
    over A0 x A1 for K < 0 and inf tau otherwise.  Entries come in
    tau- and sigma-coefficient versions, labelled accordingly.
    """
    A0 = np.asarray(A0, dtype=np.int64).ravel()
    A1 = np.asarray(A1, dtype=np.int64).ravel()
    if len(A0) == 0 or len(A1) == 0:
        raise CurvatureError("Brunn-Minkowski needs nonempty endpoint sets")
    if not 0.0 <= t <= 1.0:
        raise CurvatureError(f"t={t} outside [0, 1]")
    P0 = space.points[A0]
    P1 = space.points[A1]
    covered = np.zeros(space.n_points, dtype=bool)
    tau_min = math.inf
    tau_max = 0.0
    lo_b, hi_b = space.bounds[:, 0], space.bounds[:, 1]
    chunk = max(1, 2_000_000 // max(1, len(A1)))
    for lo in range(0, len(A0), chunk):
        hi = min(lo + chunk, len(A0))
        block = hi - lo
        # tau > 0 iff chronological (kernel contract), so one pass covers
        # both the precondition and the Theta scan
        taus = kernel_tau_cross(kernel, P0[lo:hi], P1)
        tmin = float(taus.min())
        if tmin <= 0.0:
            raise CurvatureError("A0 x A1 contains a non-chronological pair")
        tau_min = min(tau_min, tmin)
        tau_max = max(tau_max, float(taus.max()))
        rep0 = np.broadcast_to(P0[lo:hi, np.newaxis, :], (block, len(A1), P0.shape[1]))
        rep1 = np.broadcast_to(P1[np.newaxis, :, :], (block, len(A1), P1.shape[1]))
        mids = oracle_t_points(
            oracle, rep0.reshape(-1, P0.shape[1]), rep1.reshape(-1, P1.shape[1]), t
        )
        if not np.all((mids >= lo_b - 1e-12) & (mids <= hi_b + 1e-12)):
            raise CurvatureError("a t-point of A0 x A1 leaves the sampled window")
        covered[space.bin_points(mids)] = True
    m_t = float(space.masses[covered].sum())
    m0 = float(space.masses[A0].sum())
    m1 = float(space.masses[A1].sum())
    theta = tau_max if K < 0.0 else tau_min

    entries = []
    for Np in N_grid:
        Np = float(Np)
        inv = 1.0 / Np
        rhs = m_t**inv
        for use_tau, label in ((True, "tau"), (False, "sigma")):
            c0 = _coeff_scalar(use_tau, K, Np, 1.0 - t, theta)
            c1 = _coeff_scalar(use_tau, K, Np, t, theta)
            lhs = _ext_times(c0, m0**inv) + _ext_times(c1, m1**inv)
            entries.append(Entry(t=t, Nprime=Np, lhs=lhs, rhs=rhs, label=label))
    eps = _default_eps(space) if tolerance is None else float(tolerance)
    return CheckReport(
        spec=_spec_dict(
            {"K": K, "t": t, "N_grid": [float(v) for v in N_grid]},
            "brunn_minkowski",
            extra={"theta": theta, "m0": m0, "m1": m1, "m_t": m_t},
        ),
        entries=entries,
        tolerance=eps,
        discretization={"h": space.cell_diameter, "eps": eps},
    )


# ---------------------------------------------------------------------------
# Bonnet-Myers


def bonnet_myers_bound(K: float, N: float):
    """Model diameter bounds (full, reduced): pi sqrt((N-1)/K), pi sqrt(N/K)."""
    if K <= 0.0:
        raise CurvatureError(f"Bonnet-Myers needs K > 0, got {K}")
    if N < 1.0:
        raise CurvatureError(f"N={N} must be >= 1")
    full = math.pi * math.sqrt((N - 1.0) / K)
    reduced = math.pi * math.sqrt(N / K)
    return full, reduced


def scan_sup_tau(space: SampledSpace, kernel: CausalKernel) -> float:
    """Maximum tau over all sampled point pairs (chunked full scan)."""
    pts = space.points
    chunk = max(1, 2_000_000 // max(1, len(pts)))
    best = 0.0
    for lo in range(0, len(pts), chunk):
        taus = kernel_tau_cross(kernel, pts[lo : lo + chunk], pts)
        best = max(best, float(taus.max()))
    return best


# ---------------------------------------------------------------------------
# Bishop-Gromov


def _refined_region_mass(
    space: SampledSpace, member: Callable, probe: int = 3, refine: int = 32
) -> float:
    """m[{member}] by per-cell quadrature.

    A probe x probe stencil classifies each cell as inside, outside, or
    straddling; straddling cells get a refine x refine midpoint
    quadrature of the indicator.  member maps (k, d) points to booleans.
    """
    h = space.h
    centers = space.points
    offsets = np.stack(
        np.meshgrid(
            *[(np.arange(probe) + 0.5) / probe - 0.5 for _ in range(len(h))],
            indexing="ij",
        ),
        axis=-1,
    ).reshape(-1, len(h)) * h
    stacked = (centers[:, np.newaxis, :] + offsets[np.newaxis, :, :]).reshape(
        -1, len(h)
    )
    inside = member(stacked).reshape(len(centers), -1)
    n_in = inside.sum(axis=1)
    full = n_in == inside.shape[1]
    straddle = (n_in > 0) & ~full
    total = float(space.masses[full].sum())
    if not np.any(straddle):
        return total
    fine = np.stack(
        np.meshgrid(
            *[(np.arange(refine) + 0.5) / refine - 0.5 for _ in range(len(h))],
            indexing="ij",
        ),
        axis=-1,
    ).reshape(-1, len(h)) * h
    idx = np.flatnonzero(straddle)
    for lo in range(0, len(idx), 256):
        sel = idx[lo : lo + 256]
        pts = (centers[sel, np.newaxis, :] + fine[np.newaxis, :, :]).reshape(
            -1, len(h)
        )
        frac = member(pts).reshape(len(sel), -1).mean(axis=1)
        total += float(np.dot(space.masses[sel], frac))
    return total


def _tau_to_point(kernel: CausalKernel, x: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return kernel_tau_cross(kernel, x[np.newaxis], pts)[0]


def bishop_gromov(
    x,
    E,
    r: float,
    R: float,
    K: float,
    N: float,
    delta: float,
    space: SampledSpace,
    kernel: CausalKernel,
    E_membership: Optional[Callable] = None,
    oracle: Optional[GeodesicOracle] = None,
    tolerance: Optional[float] = None,
) -> CheckReport:
    """Volume and shell monotonicity against the model profiles.

    v_r = m[closed tau-ball(x, r) cap E] and s_r the delta-shell
    average; the report compares v_r/v_R and s_r/s_R against the full
    profiles ([s_{K,N-1}] and [v_{K,N}]) and the reduced ones (shifted
    dimension), entries labelled v_full/v_reduced/s_full/s_reduced.
    E is a cell-index set; pass E_membership for sub-cell boundary
    accuracy (the quadrature is otherwise cell-resolution limited).
    Star-shapedness of E around x is verified on sampled curve points
    (oracle curves when given, else affine segments).
    """
    if not 0.0 < r < R:
        raise CurvatureError(f"radii (r, R)=({r}, {R}) out of order")
    if delta <= 0.0:
        raise CurvatureError(f"shell width delta={delta} must be positive")
    if N < 1.0:
        raise CurvatureError(f"N={N} must be >= 1")
    xc = _coords(x)
    E = np.asarray(E, dtype=np.int64).ravel()
    if len(E) == 0:
        raise CurvatureError("region E is empty")
    e_mask = np.zeros(space.n_points, dtype=bool)
    e_mask[E] = True

    if E_membership is None:
        def in_e(pts):
            return e_mask[space.bin_points(pts)]
    else:
        in_e = E_membership

    _verify_star_shape(xc, E, in_e, space, kernel, oracle)

    def ball_mass(radius, closed=True, minus_open=None):
        def member(pts):
            taus = _tau_to_point(kernel, xc, pts)
            ok = (taus <= radius) if closed else (taus < radius)
            ok &= taus > 0.0
            if minus_open is not None:
                ok &= taus >= minus_open
            return ok & in_e(pts)

        return _refined_region_mass(space, member)

    v_r = ball_mass(r)
    v_R = ball_mass(R)
    s_r = ball_mass(r + delta, minus_open=r) / delta
    s_R = ball_mass(R + delta, minus_open=R) / delta
    if v_R <= 0.0 or s_R <= 0.0:
        raise CurvatureError("outer ball or shell carries no mass")

    def v_profile_ratio(n_dim):
        if n_dim == 1.0:
            return r / R
        num = vol_profile(K, n_dim, r)
        den = vol_profile(K, n_dim, R)
        return (num / den) ** n_dim

    def s_profile_ratio(n_exp):
        # [s_{K,n_exp}(r) / s_{K,n_exp}(R)]^{n_exp} with kappa = K / n_exp
        kappa = K / n_exp
        return (s_kappa(kappa, r) / s_kappa(kappa, R)) ** n_exp

    entries = [
        Entry(t=None, Nprime=N, lhs=v_profile_ratio(N), rhs=v_r / v_R, label="v_full"),
        Entry(
            t=None,
            Nprime=N + 1.0,
            lhs=v_profile_ratio(N + 1.0),
            rhs=v_r / v_R,
            label="v_reduced",
        ),
    ]
    if N > 1.0:
        entries.append(
            Entry(
                t=None,
                Nprime=N,
                lhs=s_profile_ratio(N - 1.0),
                rhs=s_r / s_R,
                label="s_full",
            )
        )
    entries.append(
        Entry(t=None, Nprime=N + 1.0, lhs=s_profile_ratio(N), rhs=s_r / s_R, label="s_reduced")
    )
    eps = _default_eps(space) if tolerance is None else float(tolerance)
    return CheckReport(
        spec=_spec_dict(
            {"K": K, "N": N, "r": r, "R": R, "x": [float(c) for c in xc]},
            "bishop_gromov",
            extra={"v_r": v_r, "v_R": v_R, "s_r": s_r, "s_R": s_R},
        ),
        entries=entries,
        tolerance=eps,
        discretization={"h": space.cell_diameter, "eps": eps, "delta": delta},
    )


def _verify_star_shape(xc, E, in_e, space, kernel, oracle) -> None:
    pts = space.points[E]
    taus = _tau_to_point(kernel, xc, pts)
    chron = taus > 0.0
    if not np.any(chron):
        return
    targets = pts[chron]
    for s in (0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875):
        if oracle is not None:
            samples = oracle_t_points(
                oracle, np.broadcast_to(xc, targets.shape), targets, s
            )
        else:
            samples = (1.0 - s) * xc + s * targets
        ok = in_e(samples)
        if not np.all(ok):
            bad = targets[~ok][0]
            raise CurvatureError(
                f"E is not tau-star-shaped around x: segment to {bad.tolist()} exits E"
            )


# ---------------------------------------------------------------------------
# good geodesics


def _interpolant_field(plan: GeodesicPlan, t: float) -> DensityField:
    mu_t = interpolate(plan, t)
    return density_estimate(mu_t, mu_t.space)


def _sup_tau_pairs(kernel, mu0, mu1) -> float:
    pts1 = mu1.points
    chunk = max(1, 2_000_000 // max(1, len(pts1)))
    best = 0.0
    pts0 = mu0.points
    for lo in range(0, len(pts0), chunk):
        taus = kernel_tau_cross(kernel, pts0[lo : lo + chunk], pts1)
        best = max(best, float(taus.max()))
    return best


def good_geodesic_bisect(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    p: float,
    K: float,
    N: float,
    depth: int,
    kernel: CausalKernel,
    oracle: GeodesicOracle,
    tolerance: Optional[float] = None,
):
    """Select a plan with uniformly bounded interpolant densities.

    The density threshold is c = e^{D sqrt(K^- N)/2} max(||rho_0||,
    ||rho_1||) with D = sup tau over the supports.  Among optimal
    couplings the plan is chosen by minimizing the midpoint excess F_c,
    approximated by re-solving with a small excess-aligned cost
    perturbation and accepting the alternative only when its true
    objective loses at most 1e-8 (relative).  Entries: sup density of
    the interpolant at every interior dyadic time at the given depth
    against the threshold, plus one excess entry (lhs = F_c of the
    midpoint, rhs = the 1e-6 budget).

    Returns (plan, report).
    """
    if depth < 1:
        raise CurvatureError(f"depth={depth} must be >= 1")
    if not is_strongly_dualizable_sufficient(mu0, mu1, kernel):
        raise CurvatureError(
            "support pairs are not all chronological; strong dualizability unproven"
        )
    result = solve_lp_optimal(mu0, mu1, p, kernel)
    D = _sup_tau_pairs(kernel, mu0, mu1)
    kminus = max(-K, 0.0)
    c = math.exp(D * math.sqrt(kminus * N) / 2.0) * max(
        mu0.sup_density, mu1.sup_density
    )
    plan, fc_mid, selection = _select_by_excess(
        result, mu0, mu1, p, kernel, oracle, c
    )

    entries = [
        Entry(t=0.5, Nprime=None, lhs=fc_mid, rhs=EXCESS_BUDGET, label="excess")
    ]
    for k in range(1, 1 << depth):
        t = k / (1 << depth)
        field = _interpolant_field(plan, t)
        entries.append(
            Entry(t=t, Nprime=None, lhs=field.sup_density, rhs=c, label="density")
        )
    eps = 0.05 * c if tolerance is None else float(tolerance)
    report = CheckReport(
        spec=_spec_dict(
            {"K": K, "N": N, "p": p, "depth": depth},
            "good_geodesic",
            extra={"threshold": c, "sup_tau": D, "selection": selection},
        ),
        entries=entries,
        tolerance=eps,
        discretization={"h": mu0.space.cell_diameter, "eps": eps},
    )
    return plan, report


def _select_by_excess(result, mu0, mu1, p, kernel, oracle, c):
    """Approximate argmin of the midpoint excess over the optimal face."""
    plan = build_plan(result, oracle)
    mu_mid = interpolate(plan, 0.5)
    mid_space = mu_mid.space
    mid_field = density_estimate(mu_mid, mid_space)
    fc = excess_functional(mid_field, c)
    if fc <= 1e-12:
        return plan, fc, "primary"

    dens = np.zeros(mid_space.n_points)
    dens[mid_field.cells] = mid_field.density
    pts0 = mu0.points
    pts1 = mu1.points

    def penalty_block(lo, hi):
        block = hi - lo
        rep0 = np.repeat(pts0[lo:hi], len(pts1), axis=0)
        rep1 = np.tile(pts1, (block, 1))
        mids = oracle_t_points(oracle, rep0, rep1, 0.5)
        lo_b = mid_space.bounds[:, 0]
        hi_b = mid_space.bounds[:, 1]
        ok = np.all((mids >= lo_b - 1e-12) & (mids <= hi_b + 1e-12), axis=1)
        pen = np.zeros(len(mids))
        pen[ok] = np.maximum(dens[mid_space.bin_points(mids[ok])] - c, 0.0)
        return pen.reshape(block, len(pts1))

    base_stream = _cost_stream_from_kernel(kernel, pts0, pts1, p)
    pen_scale = 0.0
    for lo in range(0, len(pts0), 256):
        pen_scale = max(pen_scale, float(penalty_block(lo, min(lo + 256, len(pts0))).max()))
    if pen_scale <= 0.0:
        return plan, fc, "primary"
    obj_scale = max(result.objective_power_p, 1e-12)
    lam = 1e-6 * obj_scale / pen_scale

    def stream(lo, hi):
        codes, cost = base_stream(lo, hi)
        return codes, cost - lam * penalty_block(lo, hi)

    status = _solve_streamed(mu0.weights, mu1.weights, stream)
    if not status["feasible"]:
        return plan, fc, "primary"
    src, dst, mass = status["triplets"]
    alt_coupling = make_coupling(
        mu0.space, mu0.support, mu1.support, src, dst, mass, kernel, p=p
    )
    alt_obj_p = float(alt_coupling.value_p.value) ** p
    loss = result.objective_power_p - alt_obj_p
    if loss > OPTIMALITY_LOSS_TOL * max(1.0, result.objective_power_p):
        return plan, fc, "primary"
    alt_result = TransportResult(
        coupling=alt_coupling,
        objective=alt_coupling.value_p,
        feasible=True,
        monge_defect=alt_coupling.split_row_fraction(mu0.weights),
        p=p,
        objective_power_p=alt_obj_p,
    )
    alt_plan = build_plan(alt_result, oracle)
    fc_alt = excess_functional(_interpolant_field(alt_plan, 0.5), c)
    if fc_alt < fc:
        return alt_plan, fc_alt, "excess-selected"
    return plan, fc, "primary"


def tmcp_good_geodesic(
    mu0: DiscreteMeasure,
    x1,
    p: float,
    K: float,
    N: float,
    depth: int,
    kernel: CausalKernel,
    oracle: GeodesicOracle,
    tolerance: Optional[float] = None,
):
    """Contraction plan with density and entropy growth bounds.

    At each interior dyadic t: sup rho_t <= (1-t)^{-N} e^{D t sqrt(K^- N)}
    sup rho_0 (label "density") and S_N(mu_t) <= (1-t) e^{-D t
    sqrt(K^-/N)} S_N(mu_0) (label "entropy"), D = sup tau to the target.

    Returns (plan, report).
    """
    if depth < 1:
        raise CurvatureError(f"depth={depth} must be >= 1")
    plan = _product_plan(mu0, x1, p, kernel, oracle)
    taus = kernel_tau_pairs(kernel, plan.src, plan.dst)
    D = float(taus.max())
    kminus = max(-K, 0.0)
    sup0 = mu0.sup_density
    s0 = renyi_entropy(density_estimate(mu0, mu0.space), N).value

    entries = []
    for k in range(1, 1 << depth):
        t = k / (1 << depth)
        field = _interpolant_field(plan, t)
        dens_bound = (1.0 - t) ** (-N) * math.exp(D * t * math.sqrt(kminus * N)) * sup0
        ent_bound = (1.0 - t) * math.exp(-D * t * math.sqrt(kminus / N)) * s0
        entries.append(
            Entry(t=t, Nprime=N, lhs=field.sup_density, rhs=dens_bound, label="density")
        )
        entries.append(
            Entry(
                t=t,
                Nprime=N,
                lhs=renyi_entropy(field, N).value,
                rhs=ent_bound,
                label="entropy",
            )
        )
    eps = _default_eps(mu0.space) if tolerance is None else float(tolerance)
    report = CheckReport(
        spec=_spec_dict(
            {"K": K, "N": N, "p": p, "depth": depth},
            "tmcp_good_geodesic",
            extra={"sup_tau": D},
        ),
        entries=entries,
        tolerance=eps,
        discretization={"h": mu0.space.cell_diameter, "eps": eps},
    )
    return plan, report


# ---------------------------------------------------------------------------
# mutual singularity and midpoints


def mutual_singularity_probe(
    plans: Sequence[GeodesicPlan], t_grid: Sequence[float], space: SampledSpace
) -> CheckReport:
    """Cell-overlap mass between plan interpolants, asserted zero.

    Pass requires exact zero overlap (tolerance 0); a duplicated plan is
    the intended negative control.
    """
    if len(plans) < 2:
        raise CurvatureError("need at least two plans to probe singularity")
    entries = []
    for t in t_grid:
        t = float(t)
        if not 0.0 < t < 1.0:
            continue
        measures = [interpolate(plan, t, space) for plan in plans]
        for i in range(len(measures)):
            for j in range(i + 1, len(measures)):
                common, ia, ib = np.intersect1d(
                    measures[i].support,
                    measures[j].support,
                    assume_unique=True,
                    return_indices=True,
                )
                overlap = (
                    float(
                        np.minimum(
                            measures[i].weights[ia], measures[j].weights[ib]
                        ).sum()
                    )
                    if len(common)
                    else 0.0
                )
                entries.append(
                    Entry(t=t, Nprime=None, lhs=overlap, rhs=0.0, label=f"pair_{i}_{j}")
                )
    if not entries:
        raise CurvatureError("t_grid contains no interior times")
    return CheckReport(
        spec={"check": "mutual_singularity", "n_plans": len(plans)},
        entries=entries,
        tolerance=0.0,
        discretization={"h": space.cell_diameter, "eps": 0.0},
    )


def midpoint_check(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    p: float,
    K: float,
    N_grid: Sequence[float],
    kernel: CausalKernel,
    oracle: GeodesicOracle,
    tolerance: Optional[float] = None,
) -> CheckReport:
    """S_{N'}(mu_{1/2}) <= sigma_{K,N'}^{(1/2)}(theta) (S_{N'}(mu_0) + S_{N'}(mu_1)).

    theta is sup tau over the supports for K < 0 and inf tau otherwise.
    """
    if not is_strongly_dualizable_sufficient(mu0, mu1, kernel):
        raise CurvatureError(
            "support pairs are not all chronological; midpoint bound needs dualizability"
        )
    result = solve_lp_optimal(mu0, mu1, p, kernel)
    plan = build_plan(result, oracle)
    space = mu0.space
    mid_field = _interpolant_field(plan, 0.5)
    f0 = density_estimate(mu0, space)
    f1 = density_estimate(mu1, space)

    taus_min = math.inf
    taus_max = 0.0
    pts1 = mu1.points
    chunk = max(1, 2_000_000 // max(1, len(pts1)))
    for lo in range(0, len(mu0.points), chunk):
        taus = kernel_tau_cross(kernel, mu0.points[lo : lo + chunk], pts1)
        taus_min = min(taus_min, float(taus.min()))
        taus_max = max(taus_max, float(taus.max()))
    theta = taus_max if K < 0.0 else taus_min

    entries = []
    for Np in N_grid:
        Np = float(Np)
        coeff = sigma(CoeffParams(K, Np, 0.5, theta))
        s_sum = renyi_entropy(f0, Np).value + renyi_entropy(f1, Np).value
        rhs = _ext_times(coeff, s_sum)
        lhs = renyi_entropy(mid_field, Np).value
        entries.append(Entry(t=0.5, Nprime=Np, lhs=lhs, rhs=rhs))
    eps = _default_eps(space) if tolerance is None else float(tolerance)
    return CheckReport(
        spec=_spec_dict(
            {"K": K, "p": p, "N_grid": [float(v) for v in N_grid]},
            "midpoint",
            extra={"theta": theta},
        ),
        entries=entries,
        tolerance=eps,
        discretization={"h": space.cell_diameter, "eps": eps},
    )
