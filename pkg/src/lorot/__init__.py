"""Lorentzian optimal transport on sampled spacetimes.

Subpackages:

    coeffs     distortion coefficients and auxiliary convex functions
    spacetime  sampled causal spaces, time separation, balls and diamonds
    transport  l^p transport costs and causal couplings (network simplex)
    geodesics  proper-time parametrized plans, interpolation, densities
    entropy    Renyi and Boltzmann entropies of discrete measures
    curvature  timelike curvature-dimension checks and inequalities
    smoothlab  weighted-flat Jacobian comparison lab
    cli        command-line front end
"""

__version__ = "0.1.0"

__all__ = [
    "coeffs",
    "spacetime",
    "transport",
    "geodesics",
    "entropy",
    "curvature",
    "smoothlab",
    "cli",
]
