import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorot.coeffs import (
    CoeffDomainError,
    CoeffParams,
    ExtReal,
    _sigma_array,
    _tau_array,
    g_t,
    h_t,
    s_kappa,
    sigma,
    tau_coeff,
    vol_profile,
)

PI2 = math.pi * math.pi


def test_s_kappa_branches():
    assert s_kappa(0.0, 2.5) == 2.5
    # mpmath 40-digit references
    assert s_kappa(PI2, 0.5) == pytest.approx(0.3183098861837907, abs=1e-15)
    assert s_kappa(-1.0, 1.0) == pytest.approx(1.1752011936438014, abs=1e-15)


def test_s_kappa_continuous_at_zero():
    for kappa in (1e-9, -1e-9):
        assert s_kappa(kappa, 1.7) == pytest.approx(1.7, rel=1e-8)


def test_s_kappa_rejects_negative_theta():
    with pytest.raises(CoeffDomainError):
        s_kappa(1.0, -0.1)


def test_sigma_zero_curvature_is_t():
    assert sigma(CoeffParams(0.0, 3.0, 0.3, 7.0)).value == 0.3


def test_sigma_blowup_branch():
    v = sigma(CoeffParams(10.0, 1.0, 0.5, 1.0))
    assert v.is_inf
    with pytest.raises(CoeffDomainError):
        v.value


def test_sigma_hyperbolic_value():
    v = sigma(CoeffParams(-2.0, 2.0, 0.5, 2.0))
    assert v.value == pytest.approx(0.3240271368319427, abs=1e-15)
    assert v.value == pytest.approx(math.sinh(1.0) / math.sinh(2.0), abs=1e-15)


def test_tau_collapses_to_t():
    assert tau_coeff(CoeffParams(0.0, 4.0, 0.25, 3.0)).value == 0.25
    assert tau_coeff(CoeffParams(5.0, 1.0, 0.7, 0.1)).value == 0.7


def test_tau_hyperbolic_value():
    # t^{1/N} sigma_{K,N-1}^{(t)}(theta)^{1-1/N}; frozen against mpmath
    v = tau_coeff(CoeffParams(-2.0, 2.0, 0.5, 2.0))
    assert v.value == pytest.approx(0.338783902763039, abs=1e-14)
    closed = math.sqrt(0.5 * math.sinh(math.sqrt(2.0)) / math.sinh(2.0 * math.sqrt(2.0)))
    assert v.value == pytest.approx(closed, abs=1e-15)


def test_tau_blowup_propagates():
    assert tau_coeff(CoeffParams(30.0, 2.0, 0.5, 1.0)).is_inf


def test_extreal_contract():
    x = ExtReal(1.5)
    assert x.is_finite and float(x) == 1.5
    assert ExtReal.inf().is_inf and ExtReal.neg_inf().is_neg_inf
    assert ExtReal.wrap(math.inf).is_inf
    assert ExtReal.wrap(-math.inf).is_neg_inf
    assert ExtReal(2.0) > 1.9 and ExtReal(2.0) <= 2.0
    with pytest.raises(CoeffDomainError):
        ExtReal(math.nan)
    with pytest.raises(CoeffDomainError):
        ExtReal.inf().value


def test_params_validation():
    with pytest.raises(CoeffDomainError):
        CoeffParams(0.0, 0.5, 0.5, 1.0)
    with pytest.raises(CoeffDomainError):
        CoeffParams(0.0, 2.0, 1.5, 1.0)
    with pytest.raises(CoeffDomainError):
        CoeffParams(0.0, 2.0, 0.5, -1.0)


def test_g_t_values():
    assert g_t(0.0, 0.0, 0.0, 0.5).value == pytest.approx(0.0, abs=1e-15)
    assert g_t(math.log(2), math.log(2), 0.0, 0.25).value == pytest.approx(
        math.log(2), abs=1e-14
    )
    # frozen: log[sigma_1^{(1/2)}(1) (e + 1)]
    assert g_t(1.0, 0.0, 1.0, 0.5).value == pytest.approx(
        0.7506987474020002, abs=1e-14
    )
    with pytest.raises(CoeffDomainError):
        g_t(0.0, 0.0, PI2, 0.5)


def test_h_t_values():
    assert h_t(0.0, 0.0, 0.3) == pytest.approx(math.log(0.7), abs=1e-15)
    assert h_t(2.0, 0.0, 0.0) == pytest.approx(2.0, abs=1e-15)
    assert h_t(0.0, -4.0, 0.5) == pytest.approx(-1.1269280110429725, abs=1e-14)
    assert h_t(1.0, 0.0, 1.0) == -math.inf


def test_vol_profile_values():
    assert vol_profile(0.0, 2.0, 3.0) == pytest.approx(2.1213203435596426, rel=1e-10)
    # K=0 closed form (r^N / N)^{1/N}
    assert vol_profile(0.0, 3.0, 2.0) == pytest.approx(
        (2.0**3 / 3.0) ** (1.0 / 3.0), rel=1e-10
    )
    assert vol_profile(-1.0, 3.0, 1.0) == pytest.approx(0.7168035203881429, rel=1e-10)
    assert vol_profile(1.0, 2.0, 0.0) == 0.0


def test_vol_profile_domain():
    with pytest.raises(CoeffDomainError):
        vol_profile(0.0, 1.0, 1.0)
    with pytest.raises(CoeffDomainError):
        vol_profile(4.0, 2.0, math.pi)  # kappa r^2 = 4 pi^2 / 1 beyond the zero


finite_K = st.floats(-10.0, 10.0)
finite_N = st.floats(1.0, 20.0)
unit_t = st.floats(0.0, 1.0)
pos_theta = st.floats(0.01, 5.0)


@given(finite_K, finite_N, unit_t, pos_theta)
def test_scaling_identity(K, N, t, theta):
    # sigma_kappa^{(t)}(theta) = sigma_{kappa theta^2}^{(t)}(1)
    lhs = sigma(CoeffParams(K, N, t, theta))
    rhs = sigma(CoeffParams(K * theta * theta, N, t, 1.0))
    assert lhs.is_inf == rhs.is_inf
    if lhs.is_finite:
        assert lhs.value == pytest.approx(rhs.value, abs=1e-12, rel=1e-12)


@given(finite_K, finite_N, unit_t, pos_theta)
def test_exponential_lower_bound(K, N, t, theta):
    v = sigma(CoeffParams(K, N, t, theta))
    bound = t * math.exp(-(1.0 - t) * theta * math.sqrt(max(-K, 0.0) / N))
    if v.is_finite:
        assert v.value >= bound - 1e-12
    # the +infinity branch satisfies any finite bound


@given(finite_K, finite_N, unit_t, pos_theta)
def test_tau_dominates_sigma(K, N, t, theta):
    # the N = 1 convention tau := t breaks the ordering when K > 0
    # (sigma_{K,1} >= t there); the claim's honest domain excludes it
    if N == 1.0 and K > 0.0:
        return
    s = sigma(CoeffParams(K, N, t, theta))
    tau = tau_coeff(CoeffParams(K, N, t, theta))
    if tau.is_finite and s.is_finite:
        assert tau.value >= s.value - 1e-12
    elif s.is_inf:
        assert tau.is_inf


@given(st.floats(0.1, 8.0), st.floats(1.5, 20.0), unit_t, st.floats(0.01, 0.9))
def test_k_star_ordering(K, N, t, theta):
    # tau_{K*,N} <= sigma_{K,N} for K > 0, K* = K(N-1)/N
    k_star = K * (N - 1.0) / N
    s = sigma(CoeffParams(K, N, t, theta))
    tau = tau_coeff(CoeffParams(k_star, N, t, theta))
    if s.is_finite:
        assert tau.is_finite
        assert tau.value <= s.value + 1e-12


@given(finite_K, finite_N, pos_theta)
def test_sigma_endpoints(K, N, theta):
    v0 = sigma(CoeffParams(K, N, 0.0, theta))
    v1 = sigma(CoeffParams(K, N, 1.0, theta))
    if v0.is_finite:
        assert v0.value == 0.0
    if v1.is_finite:
        assert v1.value == pytest.approx(1.0, abs=1e-12)


@given(finite_K, st.floats(1.0, 20.0), st.floats(0.05, 0.95), pos_theta)
def test_sigma_monotone_in_K(K, N, t, theta):
    lo = sigma(CoeffParams(K, N, t, theta))
    hi = sigma(CoeffParams(K + 0.5, N, t, theta))
    if hi.is_finite:
        assert lo.is_finite
        assert hi.value >= lo.value - 1e-12


@given(st.floats(-10.0, 10.0), st.floats(1.0, 19.0), st.floats(0.05, 0.95), pos_theta)
def test_sigma_monotone_in_N_by_curvature_sign(K, N, t, theta):
    # kappa = K/N moves toward 0 as N grows, and sigma increases in kappa:
    # nonincreasing in N holds for K >= 0 only; the order flips for K <= 0
    a = sigma(CoeffParams(K, N, t, theta))
    b = sigma(CoeffParams(K, N + 1.0, t, theta))
    if a.is_inf or b.is_inf:
        assert K > 0.0
        return
    if K >= 0.0:
        assert b.value <= a.value + 1e-12
    if K <= 0.0:
        assert b.value >= a.value - 1e-12


triple = st.tuples(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.floats(-5.0, 9.0))


@given(triple, triple, st.floats(0.0, 1.0), st.floats(0.05, 0.95))
def test_g_t_jointly_convex(pa, pb, lam, t):
    xa, ya, ka = pa
    xb, yb, kb = pb
    mid = (
        lam * xa + (1 - lam) * xb,
        lam * ya + (1 - lam) * yb,
        lam * ka + (1 - lam) * kb,
    )
    left = g_t(*mid, t).value
    right = lam * g_t(xa, ya, ka, t).value + (1 - lam) * g_t(xb, yb, kb, t).value
    assert left <= right + 1e-10


@given(
    st.tuples(st.floats(-3.0, 3.0), st.floats(-5.0, 9.0)),
    st.tuples(st.floats(-3.0, 3.0), st.floats(-5.0, 9.0)),
    st.floats(0.0, 1.0),
    st.floats(0.05, 0.95),
)
def test_h_t_jointly_convex(pa, pb, lam, t):
    mid = (lam * pa[0] + (1 - lam) * pb[0], lam * pa[1] + (1 - lam) * pb[1])
    left = h_t(mid[0], mid[1], t)
    right = lam * h_t(*pa, t) + (1 - lam) * h_t(*pb, t)
    assert left <= right + 1e-10


def test_array_routes_match_scalar():
    thetas = np.linspace(0.05, 4.0, 37)
    for K, N, t in [(-2.0, 2.0, 0.5), (0.0, 3.0, 0.25), (1.5, 4.0, 0.75)]:
        sig = _sigma_array(K, N, t, thetas)
        tau = _tau_array(K, N, t, thetas)
        for k, th in enumerate(thetas):
            s_ref = sigma(CoeffParams(K, N, t, th))
            t_ref = tau_coeff(CoeffParams(K, N, t, th))
            if s_ref.is_inf:
                assert np.isinf(sig[k])
            else:
                assert sig[k] == pytest.approx(s_ref.value, abs=1e-14)
            if t_ref.is_inf:
                assert np.isinf(tau[k])
            else:
                assert tau[k] == pytest.approx(t_ref.value, abs=1e-14)


def test_array_blowup_is_inf_not_nan():
    out = _sigma_array(20.0, 1.0, 0.5, np.array([0.1, 1.0, 2.0]))
    assert np.isfinite(out[0])
    assert np.isinf(out[1]) and np.isinf(out[2])
    assert not np.any(np.isnan(out))
