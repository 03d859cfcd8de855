"""Closed-form coupling thresholds and Bakry-Emery constants.

Both functions accept ``fractions.Fraction`` arguments and then return exact
rationals; with floats they return floats.
"""
from __future__ import annotations

from fractions import Fraction

from .errors import UnsupportedFamily
from .groups import Family


def beta_threshold(family, n: int, d: int, exact: bool = False):
    """Largest beta (exclusive) for which the curvature constant is positive.

    U(N), SU(N): 1 / (8 (d - 1)).  SO(N): 1 / (16 (d - 1)) - 1 / (8 N (d - 1)).
    """
    family = Family(family)
    if d < 2:
        raise ValueError("need d >= 2")
    one = Fraction(1) if exact else 1.0
    if family in (Family.U, Family.SU):
        return one / (8 * (d - 1))
    return one / (16 * (d - 1)) - one / (8 * n * (d - 1))


def bakry_emery_constant(family, n: int, beta, d: int):
    """K = Ric - Hessian bound for the slab sigma model.

    SU(N): (N + 2)/2 - 1 - 4 N beta (d - 1);  SO(N): (N + 2)/4 - 1 - 4 N beta (d - 1).
    U(N) has no uniform Ricci lower bound and is handled through SU(N).
    """
    family = Family(family)
    if family is Family.U:
        raise UnsupportedFamily("U(N) is reduced to SU(N); no direct curvature constant")
    if isinstance(beta, Fraction):
        ricci = Fraction(n + 2, 2 if family is Family.SU else 4) - 1
    else:
        ricci = (n + 2) / (2 if family is Family.SU else 4) - 1
    return ricci - 4 * n * beta * (d - 1)


def hessian_constant(n: int, beta, m: int):
    """Upper bound 4 m N beta on |Hess S(v, v)| / |v|^2 for an m-dimensional slice."""
    return 4 * m * n * beta
