"""Distortion coefficients for timelike curvature-dimension comparisons.

Scalar comparison functions shared by every curvature checker in the
package.  Conventions (ASCII):

    s_kappa(theta)  = sin(sqrt(kappa) theta)/sqrt(kappa)    if kappa > 0
                    = theta                                  if kappa = 0
                    = sinh(sqrt(-kappa) theta)/sqrt(-kappa)  if kappa < 0

    sigma_kappa^(t)(theta) = +infinity                      if kappa theta^2 >= pi^2
                           = t                              if kappa theta^2 = 0
                           = s_kappa(t theta)/s_kappa(theta) otherwise

    sigma_{K,N}^(t)(theta) = sigma_{K/N}^(t)(theta)
    tau_{K,N}^(t)(theta)   = t^(1/N) * sigma_{K,N-1}^(t)(theta)^(1-1/N)   (N > 1)
    tau_{K,1}^(t)(theta)   = t

    g_t(x, y, kappa) = log[sigma_kappa^(1-t)(1) e^x + sigma_kappa^(t)(1) e^y]
    h_t(x, kappa)    = log sigma_kappa^(1-t)(1) + x

    vol_profile(K, N, r) = [ integral_0^r s_{K/(N-1)}(s)^(N-1) ds ]^(1/N)

The infinite branch (kappa theta^2 >= pi^2) is represented by a tagged
``ExtReal``, never by a bare float infinity, so it cannot silently take
part in downstream arithmetic; callers must branch on ``is_inf``.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import integrate

PI_SQUARED = math.pi * math.pi

# |kappa * theta^2| below this uses the kappa = 0 branch; both branches
# agree to machine precision there and the quotient form would be 0/0.
ZERO_SWITCH = 1e-14


class CoeffDomainError(ValueError):
    """Parameter outside the domain of a distortion coefficient."""


class ExtReal:
    """An extended real: finite float or a tagged +/-infinity.

    ``ExtReal(x)`` wraps a finite float; ``ExtReal.inf()`` and
    ``ExtReal.neg_inf()`` are the two infinite values.  ``float()`` and
    ``.value`` raise on the infinite values, which forces explicit
    ``is_inf`` branches at use sites; an infinity can never flow
    silently through downstream arithmetic.  The coefficient functions
    only ever produce +infinity (the kappa*theta^2 >= pi^2 branch);
    -infinity belongs to the transport cost conventions (sup over the
    empty set of couplings).
    """

    __slots__ = ("_key",)

    def __init__(self, value: float):
        value = float(value)
        if math.isinf(value) or math.isnan(value):
            raise CoeffDomainError(
                "ExtReal wraps finite values; use ExtReal.inf()/neg_inf()"
            )
        self._key = value

    @classmethod
    def inf(cls) -> "ExtReal":
        obj = object.__new__(cls)
        obj._key = math.inf
        return obj

    @classmethod
    def neg_inf(cls) -> "ExtReal":
        obj = object.__new__(cls)
        obj._key = -math.inf
        return obj

    @classmethod
    def wrap(cls, value: float) -> "ExtReal":
        """Finite values wrap; float infinities become the tagged ones."""
        value = float(value)
        if math.isinf(value):
            return cls.inf() if value > 0 else cls.neg_inf()
        return cls(value)

    @property
    def is_finite(self) -> bool:
        return not math.isinf(self._key)

    @property
    def is_inf(self) -> bool:
        return self._key == math.inf

    @property
    def is_neg_inf(self) -> bool:
        return self._key == -math.inf

    @property
    def value(self) -> float:
        if math.isinf(self._key):
            raise CoeffDomainError("infinity has no finite value")
        return self._key

    def __float__(self) -> float:
        return self.value

    @staticmethod
    def _other_key(other):
        if isinstance(other, ExtReal):
            return other._key
        if isinstance(other, (int, float)):
            return float(other)
        return None

    def __eq__(self, other) -> bool:
        key = self._other_key(other)
        return NotImplemented if key is None else self._key == key

    def __lt__(self, other) -> bool:
        key = self._other_key(other)
        return NotImplemented if key is None else self._key < key

    def __le__(self, other) -> bool:
        key = self._other_key(other)
        return NotImplemented if key is None else self._key <= key

    def __gt__(self, other) -> bool:
        key = self._other_key(other)
        return NotImplemented if key is None else self._key > key

    def __ge__(self, other) -> bool:
        key = self._other_key(other)
        return NotImplemented if key is None else self._key >= key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        if self._key == math.inf:
            return "ExtReal.inf()"
        if self._key == -math.inf:
            return "ExtReal.neg_inf()"
        return f"ExtReal({self._key!r})"


@dataclasses.dataclass(frozen=True)
class CoeffParams:
    """Arguments (K, N, t, theta) of the coefficient families.

    K is the curvature lower bound, N >= 1 the dimension parameter,
    t in [0, 1] the interpolation time, theta >= 0 the time separation.
    """

    K: float
    N: float
    t: float
    theta: float

    def __post_init__(self):
        if not self.N >= 1.0:
            raise CoeffDomainError(f"dimension parameter N={self.N} must be >= 1")
        if not 0.0 <= self.t <= 1.0:
            raise CoeffDomainError(f"time t={self.t} must lie in [0, 1]")
        if not self.theta >= 0.0:
            raise CoeffDomainError(f"time separation theta={self.theta} must be >= 0")


def s_kappa(kappa: float, theta: float) -> float:
    """Solution of f'' + kappa f = 0 with f(0)=0, f'(0)=1, at theta >= 0."""
    if not theta >= 0.0:
        raise CoeffDomainError(f"theta={theta} must be >= 0")
    if kappa > 0.0:
        root = math.sqrt(kappa)
        return math.sin(root * theta) / root
    if kappa < 0.0:
        root = math.sqrt(-kappa)
        return math.sinh(root * theta) / root
    return theta


def _sigma_base(kappa: float, t: float, theta: float):
    """sigma_kappa^(t)(theta) as a plain float, or None for +infinity."""
    scaled = kappa * theta * theta
    if scaled >= PI_SQUARED:
        return None
    if abs(scaled) < ZERO_SWITCH:
        return t
    return s_kappa(kappa, t * theta) / s_kappa(kappa, theta)


def sigma(params: CoeffParams) -> ExtReal:
    """sigma_{K,N}^(t)(theta) = sigma_{K/N}^(t)(theta)."""
    base = _sigma_base(params.K / params.N, params.t, params.theta)
    return ExtReal.inf() if base is None else ExtReal(base)


def tau_coeff(params: CoeffParams) -> ExtReal:
    """tau_{K,N}^(t)(theta) = t^(1/N) sigma_{K,N-1}^(t)(theta)^(1-1/N).

    For N = 1 the exponent on sigma vanishes and sigma_{K,0} is undefined;
    the value is t, the continuous limit as N decreases to 1.  When the
    sigma factor takes its kappa*theta^2 = 0 branch the product is t by
    the exponent identity, returned without the float round trip so that
    the K = 0 reduction is exact.
    """
    if params.N == 1.0:
        return ExtReal(params.t)
    kappa = params.K / (params.N - 1.0)
    base = _sigma_base(kappa, params.t, params.theta)
    if base is None:
        return ExtReal.inf()
    if base == params.t and abs(kappa * params.theta * params.theta) < ZERO_SWITCH:
        return ExtReal(params.t)
    inv_n = 1.0 / params.N
    return ExtReal(params.t**inv_n * base ** (1.0 - inv_n))


def g_t(x: float, y: float, kappa: float, t: float) -> ExtReal:
    """log[sigma_kappa^(1-t)(1) e^x + sigma_kappa^(t)(1) e^y].

    Evaluated as a log-sum-exp so large x, y do not overflow.  kappa is
    the already-scaled curvature kappa*theta^2 of the unit-theta form and
    must satisfy kappa < pi^2.
    """
    if kappa >= PI_SQUARED:
        raise CoeffDomainError(f"kappa={kappa} must be < pi^2 for g_t")
    if not 0.0 <= t <= 1.0:
        raise CoeffDomainError(f"time t={t} must lie in [0, 1]")
    left = _sigma_base(kappa, 1.0 - t, 1.0)
    right = _sigma_base(kappa, t, 1.0)
    term_left = -math.inf if left == 0.0 else math.log(left) + x
    term_right = -math.inf if right == 0.0 else math.log(right) + y
    return ExtReal(float(np.logaddexp(term_left, term_right)))


def h_t(x: float, kappa: float, t: float) -> float:
    """log sigma_kappa^(1-t)(1) + x, with kappa < pi^2 as in g_t.

    At t = 1 the coefficient vanishes and the value is -infinity (the
    degenerate limit); all interior t give finite values.
    """
    if kappa >= PI_SQUARED:
        raise CoeffDomainError(f"kappa={kappa} must be < pi^2 for h_t")
    if not 0.0 <= t <= 1.0:
        raise CoeffDomainError(f"time t={t} must lie in [0, 1]")
    coeff = _sigma_base(kappa, 1.0 - t, 1.0)
    if coeff == 0.0:
        return -math.inf
    return math.log(coeff) + x


def vol_profile(K: float, N: float, r: float) -> float:
    """[ integral_0^r s_{K/(N-1)}(s)^(N-1) ds ]^(1/N), N > 1, r >= 0.

    Adaptive quadrature, relative error <= 1e-10.  For K > 0 the radius
    must stay below pi sqrt((N-1)/K), where the integrand hits zero.
    """
    if not N > 1.0:
        raise CoeffDomainError(f"vol_profile needs N > 1, got N={N}")
    if not r >= 0.0:
        raise CoeffDomainError(f"radius r={r} must be >= 0")
    kappa = K / (N - 1.0)
    if K > 0.0 and kappa * r * r >= PI_SQUARED:
        raise CoeffDomainError(
            f"radius r={r} outside the K>0 domain r < pi*sqrt((N-1)/K)"
        )
    if r == 0.0:
        return 0.0
    value, _ = integrate.quad(
        lambda s: s_kappa(kappa, s) ** (N - 1.0),
        0.0,
        r,
        epsabs=1e-14,
        epsrel=1e-12,
        limit=200,
    )
    return value ** (1.0 / N)


def _sigma_array(K: float, N: float, t: float, theta) -> np.ndarray:
    """Vectorized sigma_{K,N}^(t) over an array of theta values.

    Returns a float array in which the kappa*theta^2 >= pi^2 branch is
    np.inf; callers must mask infinite entries before any arithmetic.
    """
    theta = np.asarray(theta, dtype=float)
    kappa = K / N
    scaled = kappa * theta * theta
    out = np.full(theta.shape, float(t))
    if kappa > 0.0:
        root = math.sqrt(kappa)
        infinite = scaled >= PI_SQUARED
        generic = ~infinite & (np.abs(scaled) >= ZERO_SWITCH)
        out[generic] = np.sin(root * t * theta[generic]) / np.sin(root * theta[generic])
        out[infinite] = np.inf
    elif kappa < 0.0:
        root = math.sqrt(-kappa)
        generic = np.abs(scaled) >= ZERO_SWITCH
        out[generic] = np.sinh(root * t * theta[generic]) / np.sinh(
            root * theta[generic]
        )
    return out


def _tau_array(K: float, N: float, t: float, theta) -> np.ndarray:
    """Vectorized tau_{K,N}^(t) over an array of theta values.

    Same infinity convention as _sigma_array.
    """
    theta = np.asarray(theta, dtype=float)
    if N == 1.0:
        return np.full(theta.shape, float(t))
    base = _sigma_array(K, N - 1.0, t, theta)
    out = np.full(theta.shape, float(t))
    generic = base != t
    inv_n = 1.0 / N
    with np.errstate(invalid="ignore"):
        out[generic] = t**inv_n * base[generic] ** (1.0 - inv_n)
    out[np.isinf(base)] = np.inf
    return out
