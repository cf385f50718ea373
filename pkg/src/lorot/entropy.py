"""Entropy functionals against the reference measure.

S_N is the N-Renyi entropy -integral rho^{-1/N} dmu = -sum rho^{1-1/N} m,
always in [-m[supp]^{1/N}, 0]; Ent is the Boltzmann entropy
sum rho log rho m, +infinity when the measure has a singular part; and
U_N = exp(-Ent/N) its exponentiated form.  The excess functional
F_c = ||(rho - c)^+||_{L^1} + (singular mass) measures how far a measure
exceeds the density ceiling c.  Continuous extensions 0 log 0 := 0 and
0^{1-1/N} := 0 apply throughout.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np


class EntropyError(ValueError):
    """Invalid density field or entropy order."""


@dataclasses.dataclass(frozen=True, eq=False)
class DensityField:
    """Lebesgue decomposition of a measure against cell masses.

    cells indexes a SampledSpace, density holds the per-cell densities of
    the absolutely continuous part, masses snapshots the reference masses
    of those cells, and singular_mass is whatever the density part does
    not represent.  sum(density * masses) + singular_mass = 1 to 1e-10.
    """

    cells: np.ndarray
    density: np.ndarray
    masses: np.ndarray
    singular_mass: float = 0.0

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).ravel()
        density = np.asarray(self.density, dtype=np.float64).ravel()
        masses = np.asarray(self.masses, dtype=np.float64).ravel()
        if not (len(cells) == len(density) == len(masses)):
            raise EntropyError("cells, density, masses must have equal length")
        if np.any(density < 0.0) or np.any(masses <= 0.0):
            raise EntropyError("densities must be >= 0 on cells of positive mass")
        if self.singular_mass < 0.0:
            raise EntropyError("negative singular mass")
        total = float(np.dot(density, masses)) + self.singular_mass
        if abs(total - 1.0) > 1e-10:
            raise EntropyError(f"field carries total mass {total}, expected 1")
        for name, arr in (("cells", cells), ("density", density), ("masses", masses)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def ac_mass(self) -> float:
        return float(np.dot(self.density, self.masses))

    @property
    def sup_density(self) -> float:
        return float(np.max(self.density)) if len(self.density) else 0.0

    def support_mass(self) -> float:
        """Reference mass of {rho > 0}."""
        return float(self.masses[self.density > 0.0].sum())


@dataclasses.dataclass(frozen=True)
class EntropyValue:
    """A possibly infinite entropy; value uses math.inf for the poles."""

    value: float

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self) -> float:
        return self.value


def renyi_entropy(field: DensityField, N: float) -> EntropyValue:
    """S_N = -sum density^{1-1/N} mass over {density > 0}."""
    N = float(N)
    if N < 1.0:
        raise EntropyError(f"Renyi order N={N} must be >= 1")
    pos = field.density > 0.0
    # the N=1 exponent is 0; restricting to the support realizes 0^0 := 0
    integrand = field.density[pos] ** (1.0 - 1.0 / N)
    return EntropyValue(-float(np.dot(integrand, field.masses[pos])))


def boltzmann_entropy(field: DensityField) -> EntropyValue:
    """Ent = sum rho log rho m, +infinity if any mass is singular."""
    if field.singular_mass > 0.0:
        return EntropyValue(math.inf)
    pos = field.density > 0.0
    rho = field.density[pos]
    return EntropyValue(float(np.dot(rho * np.log(rho), field.masses[pos])))


def u_n(field: DensityField, N: float) -> float:
    """Exponentiated Boltzmann entropy exp(-Ent/N); 0 at Ent = +infinity."""
    N = float(N)
    if N <= 0.0:
        raise EntropyError(f"order N={N} must be positive")
    ent = boltzmann_entropy(field).value
    if math.isinf(ent):
        return 0.0
    return math.exp(-ent / N)


def excess_functional(field: DensityField, c: float) -> float:
    """F_c = sum (rho - c)^+ m + singular mass."""
    c = float(c)
    if c <= 0.0:
        raise EntropyError(f"density ceiling c={c} must be positive")
    excess = np.maximum(field.density - c, 0.0)
    return float(np.dot(excess, field.masses)) + field.singular_mass
