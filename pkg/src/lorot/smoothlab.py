"""Smooth verification lab on weighted flat backgrounds.

Everything here lives in Minkowski R^{1,n-1} with a weight e^V, where
the exponential map is affine and curvature terms vanish: Jacobian
evolution along straight-line transports, the flat Riccati flow, the
weighted Ricci form, and the distortion-concavity inequality are all
exactly evaluable, which makes this module the reference oracle for the
discrete checkers.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .coeffs import _tau_array
from .reporting import CheckReport, Entry, _atomic_write

FD_STEP = 1e-4
RICCATI_RTOL = 1e-11
RICCATI_ATOL = 1e-14
CROSS_CHECK_TOL = 1e-8
SINGULAR_TOL = 1e-12


class SmoothLabError(ValueError):
    """Invalid model data or a caustic/blowup on the requested grid."""


def lorentz_sq(v) -> float:
    """Signature (+,-,...,-) squared norm v_0^2 - |v_spatial|^2."""
    v = np.asarray(v, dtype=float).ravel()
    return float(v[0] ** 2 - np.dot(v[1:], v[1:]))


def _fd_gradient(V: Callable, x: np.ndarray) -> np.ndarray:
    h = FD_STEP * max(1.0, float(np.max(np.abs(x))))
    out = np.empty(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        out[i] = (V(x + e) - V(x - e)) / (2.0 * h)
    return out


def _fd_hessian(V: Callable, x: np.ndarray) -> np.ndarray:
    h = FD_STEP * max(1.0, float(np.max(np.abs(x))))
    n = len(x)
    out = np.empty((n, n))
    f0 = V(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        out[i, i] = (V(x + ei) - 2.0 * f0 + V(x - ei)) / (h * h)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            out[i, j] = out[j, i] = (
                V(x + ei + ej) - V(x + ei - ej) - V(x - ei + ej) + V(x - ei - ej)
            ) / (4.0 * h * h)
    return out


@dataclasses.dataclass(frozen=True)
class WeightedFlatModel:
    """Flat R^{1,n-1} carrying the weight e^V and dimension bound N >= n.

    V maps a length-n coordinate array to a scalar; grad_V and hess_V
    are its analytic derivative evaluators, replaced by central
    differences (step 1e-4 * scale) when omitted.  V=None means V == 0.
    At N == n the convention forces V constant, which is enforced
    pointwise where derivatives get evaluated.
    """

    n: int
    N: float
    V: Optional[Callable] = None
    grad_V: Optional[Callable] = None
    hess_V: Optional[Callable] = None

    def __post_init__(self):
        if self.n < 2:
            raise SmoothLabError(f"spacetime dimension n={self.n} must be >= 2")
        if self.N < self.n:
            raise SmoothLabError(f"N={self.N} must be >= n={self.n}")

    def weight(self, x) -> float:
        return 0.0 if self.V is None else float(self.V(np.asarray(x, dtype=float)))

    def weight_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.V is None:
            return np.zeros(self.n)
        if self.grad_V is not None:
            return np.asarray(self.grad_V(x), dtype=float)
        return _fd_gradient(self.V, x)

    def weight_hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.V is None:
            return np.zeros((self.n, self.n))
        if self.hess_V is not None:
            return np.asarray(self.hess_V(x), dtype=float)
        return _fd_hessian(self.V, x)


def bakry_emery_ricci(model: WeightedFlatModel, x, xi) -> float:
    """Weighted Ricci form Hess V(xi, xi) - (DV . xi)^2 / (N - n).

    The flat background contributes Ric = 0.  xi must be timelike; at
    N == n the weight must be (locally) constant and the form is 0.
    """
    x = np.asarray(x, dtype=float).ravel()
    xi = np.asarray(xi, dtype=float).ravel()
    if len(x) != model.n or len(xi) != model.n:
        raise SmoothLabError(f"point and vector must have dimension n={model.n}")
    if lorentz_sq(xi) <= 0.0:
        raise SmoothLabError("xi is not timelike (Lorentzian norm^2 <= 0)")
    grad = model.weight_gradient(x)
    if model.N == model.n:
        if float(np.max(np.abs(grad))) > 1e-8:
            raise SmoothLabError("N = n requires a constant weight, but DV != 0")
        return 0.0
    hess = model.weight_hessian(x)
    return float(xi @ hess @ xi - (grad @ xi) ** 2 / (model.N - model.n))


@dataclasses.dataclass(frozen=True)
class TransportField:
    """Straight-line transport T_t(x) = x + t X(x).

    X evaluates the displacement field, jacobian its differential DX
    (an (n, n) matrix).  t_grid holds the evaluation times in [0, 1].
    """

    X: Callable
    jacobian: Callable
    t_grid: tuple

    def __post_init__(self):
        ts = tuple(float(t) for t in self.t_grid)
        if len(ts) < 2 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise SmoothLabError("t_grid must be strictly increasing with >= 2 nodes")
        if ts[0] < 0.0 or ts[-1] > 1.0:
            raise SmoothLabError("t_grid must lie within [0, 1]")
        object.__setattr__(self, "t_grid", ts)


@dataclasses.dataclass(frozen=True)
class TransportJacobian:
    """Per-t record of the transport differential along one line.

    A[k] = I + t_k DX(x); j[k] = |det A[k]| e^{V(T_{t_k}(x))};
    phi = log j; theta is the (constant) proper speed |X(x)|.
    """

    t: np.ndarray
    A: np.ndarray
    j: np.ndarray
    phi: np.ndarray
    theta: float

    def write_csv(self, path, line: int = 0) -> None:
        rows = ["line,t,j,phi"]
        for tk, jk, pk in zip(self.t, self.j, self.phi):
            rows.append(f"{line},{float(tk)!r},{float(jk)!r},{float(pk)!r}")
        _atomic_write(path, "\n".join(rows) + "\n")


def jacobian_along_transport(
    model: WeightedFlatModel, field: TransportField, x
) -> TransportJacobian:
    """Exact Jacobian evolution j_t = |det(I + t DX)| e^{V(x + tX)}.

    Raises on a caustic, reporting the first grid time where the
    differential degenerates.
    """
    x = np.asarray(x, dtype=float).ravel()
    if len(x) != model.n:
        raise SmoothLabError(f"point must have dimension n={model.n}")
    disp = np.asarray(field.X(x), dtype=float).ravel()
    if disp[0] <= 0.0 or lorentz_sq(disp) <= 0.0:
        raise SmoothLabError("X(x) must be future timelike")
    DX = np.asarray(field.jacobian(x), dtype=float)
    if DX.shape != (model.n, model.n):
        raise SmoothLabError(f"DX must be an ({model.n}, {model.n}) matrix")
    ts = np.asarray(field.t_grid)
    eye = np.eye(model.n)
    A = eye[np.newaxis, :, :] + ts[:, np.newaxis, np.newaxis] * DX[np.newaxis, :, :]
    dets = np.linalg.det(A)
    bad = np.abs(dets) < SINGULAR_TOL
    if np.any(bad):
        t_bad = float(ts[np.argmax(bad)])
        raise SmoothLabError(f"transport differential is singular at t={t_bad}")
    weights = np.array([model.weight(x + tk * disp) for tk in ts])
    j = np.abs(dets) * np.exp(weights)
    return TransportJacobian(
        t=ts, A=A, j=j, phi=np.log(np.abs(dets)) + weights,
        theta=math.sqrt(lorentz_sq(disp)),
    )


def transport_lines_csv(records, path) -> None:
    """CSV of (line, t, j, phi) rows over several transport lines."""
    rows = ["line,t,j,phi"]
    for line, rec in enumerate(records):
        for tk, jk, pk in zip(rec.t, rec.j, rec.phi):
            rows.append(f"{line},{tk!r},{jk!r},{pk!r}")
    _atomic_write(path, "\n".join(rows) + "\n")


def riccati_flat(B0, t_grid) -> np.ndarray:
    """Flat Riccati flow B_t = B0 (I + t B0)^{-1} on the grid.

    The closed form is cross-checked against direct integration of
    B' = -B^2; disagreement beyond 1e-8 (or a singular I + t B0)
    raises, since both indicate blowup inside the grid.
    """
    B0 = np.asarray(B0, dtype=float)
    if B0.ndim != 2 or B0.shape[0] != B0.shape[1]:
        raise SmoothLabError("B0 must be a square matrix")
    ts = np.asarray([float(t) for t in t_grid])
    if len(ts) == 0 or np.any(np.diff(ts) <= 0.0) or ts[0] < 0.0:
        raise SmoothLabError("t_grid must be nonempty, increasing, and >= 0")
    n = B0.shape[0]
    eye = np.eye(n)
    out = np.empty((len(ts), n, n))
    for k, tk in enumerate(ts):
        M = eye + tk * B0
        if abs(np.linalg.det(M)) < SINGULAR_TOL:
            raise SmoothLabError(f"Riccati blowup: I + t B0 singular at t={tk}")
        out[k] = B0 @ np.linalg.inv(M)

    def rhs(_t, y):
        B = y.reshape(n, n)
        return (-(B @ B)).ravel()

    sol = solve_ivp(
        rhs,
        (0.0, float(ts[-1])),
        B0.ravel(),
        t_eval=ts,
        rtol=RICCATI_RTOL,
        atol=RICCATI_ATOL,
        method="RK45",
    )
    if not sol.success:
        raise SmoothLabError(f"Riccati integrator failed: {sol.message}")
    numeric = sol.y.T.reshape(len(ts), n, n)
    err = float(np.max(np.abs(numeric - out)))
    if err > CROSS_CHECK_TOL:
        raise SmoothLabError(
            f"closed form and integrator disagree by {err:.3e}; grid too close to blowup"
        )
    return out


def comparison_ode_profile(K: float, Nprime: float, theta: float, t_grid) -> np.ndarray:
    """Equality-family Jacobian j_t = t * s_{K/(N'-1)}(t theta)^{N'-1} by ODE.

    Integrates the split system a'' = 0, g'' = -(K theta^2/(N'-1)) g
    from (a, a', g, g') = (0, 1, 0, theta) and returns j = a g^{N'-1}
    on the grid; j_t^{1/N'} then equals tau_{K,N'}^{(t)}(theta) j_1^{1/N'}
    exactly, which makes this the reference trajectory for the
    distortion-inequality equality case.
    """
    if Nprime < 1.0:
        raise SmoothLabError(f"Nprime={Nprime} must be >= 1")
    if theta <= 0.0:
        raise SmoothLabError(f"theta={theta} must be positive")
    ts = np.asarray([float(t) for t in t_grid])
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        raise SmoothLabError("t_grid must lie within [0, 1]")
    if Nprime == 1.0:
        return ts.copy()
    kappa = K / (Nprime - 1.0)
    if K > 0.0 and kappa * theta * theta >= math.pi**2:
        raise SmoothLabError("theta outside the K > 0 comparison domain")

    def rhs(_t, y):
        a, da, g, dg = y
        return [da, 0.0, dg, -kappa * theta * theta * g]

    order = np.argsort(ts)
    sol = solve_ivp(
        rhs,
        (0.0, float(ts[order][-1]) if len(ts) else 1.0),
        [0.0, 1.0, 0.0, theta],
        t_eval=ts[order],
        rtol=RICCATI_RTOL,
        atol=RICCATI_ATOL,
        method="RK45",
    )
    if not sol.success:
        raise SmoothLabError(f"comparison integrator failed: {sol.message}")
    a = sol.y[0]
    g = sol.y[2]
    j = np.empty(len(ts))
    j[order] = a * np.sign(g) * np.abs(g) ** (Nprime - 1.0)
    return j


def verify_distortion_concavity(
    j_samples,
    theta: float,
    K: float,
    Nprime: float,
    t_grid=None,
    tolerance: float = 1e-8,
    hypothesis_tol: Optional[float] = None,
) -> CheckReport:
    """Differential hypothesis plus endpoint distortion inequality.

    (a) at interior nodes: phi'' + phi'^2/N' <= -K theta^2 by second
    finite differences of phi = log j; the rhs carries the hypothesis
    slack (an O(h^2) finite-difference allowance), so these entries hold
    exactly when the hypothesis is accepted.  (b) at interior nodes:
    tau_{K,N'}^{(1-t)}(theta) j_0^{1/N'} + tau^{(t)} j_1^{1/N'} <=
    j_t^{1/N'}.  The check is conditional: when (a) fails beyond the
    slack at any node, (b) is vacuous and the report carries a single
    zero-margin entry with the violation recorded in spec.
    """
    j = np.asarray(j_samples, dtype=float).ravel()
    if len(j) < 3:
        raise SmoothLabError("need at least 3 samples")
    if np.any(j <= 0.0):
        raise SmoothLabError("j samples must be positive")
    if theta <= 0.0:
        raise SmoothLabError(f"theta={theta} must be positive")
    if Nprime < 1.0:
        raise SmoothLabError(f"Nprime={Nprime} must be >= 1")
    ts = (
        np.linspace(0.0, 1.0, len(j))
        if t_grid is None
        else np.asarray([float(t) for t in t_grid])
    )
    if len(ts) != len(j) or np.any(np.diff(ts) <= 0.0):
        raise SmoothLabError("t_grid must be increasing and match j_samples")
    if ts[0] != 0.0 or ts[-1] != 1.0:
        raise SmoothLabError("t_grid must span [0, 1]; the inequality uses j_0 and j_1")
    phi = np.log(j)
    hl = np.diff(ts)[:-1]
    hr = np.diff(ts)[1:]
    # nonuniform 3-point first and second derivative stencils
    d1 = (
        phi[2:] * hl / (hr * (hl + hr))
        - phi[:-2] * hr / (hl * (hl + hr))
        + phi[1:-1] * (hr - hl) / (hl * hr)
    )
    d2 = 2.0 * (
        phi[:-2] / (hl * (hl + hr))
        - phi[1:-1] / (hl * hr)
        + phi[2:] / (hr * (hl + hr))
    )
    hyp_lhs = d2 + d1 * d1 / Nprime
    bound = -K * theta * theta
    if hypothesis_tol is None:
        hmax = float(np.max(np.diff(ts)))
        hypothesis_tol = max(1e-8, 100.0 * hmax * hmax * max(1.0, abs(bound)))
    hyp_margin = (bound + hypothesis_tol) - hyp_lhs
    hyp_ok = bool(np.min(hyp_margin) >= 0.0)

    spec = {
        "check": "distortion_concavity",
        "K": K,
        "Nprime": Nprime,
        "theta": theta,
        "hypothesis_holds": hyp_ok,
        "hypothesis_tol": hypothesis_tol,
    }
    if not hyp_ok:
        worst = int(np.argmin(hyp_margin))
        spec["hypothesis_violation"] = {
            "t": float(ts[1 + worst]),
            "lhs": float(hyp_lhs[worst]),
            "bound": bound,
        }
        entries = [Entry(t=None, Nprime=Nprime, lhs=0.0, rhs=0.0, label="vacuous")]
        return CheckReport(
            spec=spec,
            entries=entries,
            tolerance=tolerance,
            discretization={"h": float(np.max(np.diff(ts))), "eps": tolerance},
        )

    inv = 1.0 / Nprime
    u = j**inv
    entries = [
        Entry(
            t=float(ts[1 + i]),
            Nprime=Nprime,
            lhs=float(hyp_lhs[i]),
            rhs=bound + hypothesis_tol,
            label="hypothesis",
        )
        for i in range(len(hyp_lhs))
    ]
    for i in range(1, len(ts) - 1):
        t = float(ts[i])
        c_back = float(_tau_array(K, Nprime, 1.0 - t, np.array([theta]))[0])
        c_fwd = float(_tau_array(K, Nprime, t, np.array([theta]))[0])
        lhs = c_back * u[0] + c_fwd * u[-1]
        entries.append(Entry(t=t, Nprime=Nprime, lhs=lhs, rhs=float(u[i]), label="tau"))
    return CheckReport(
        spec=spec,
        entries=entries,
        tolerance=tolerance,
        discretization={"h": float(np.max(np.diff(ts))), "eps": tolerance},
    )
