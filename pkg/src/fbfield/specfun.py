"""Gamma function and the normalization constants of the fractional fields.

All functions are pure and operate on Python floats.

Constants
---------
``coef_c``      nonanticipating normalization c_H
``coef_d``      well-balanced normalization d_H (``d_{1/2} = pi``)
``coef_k``      Fourier coefficient k_H of the well-balanced kernel (``k_{1/2} = pi``)
``coef_cc``     cross constant c_{H,H'}
``coef_a``      amplitude a_{H,H'} of the symmetrized field covariance
``coef_alpha``  normalization alpha_H of the fundamental-martingale kernels
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, PoleError

__all__ = [
    "DUAL_BAND",
    "DUAL_EXACT",
    "DualPair",
    "check_hurst",
    "coef_a",
    "coef_alpha",
    "coef_c",
    "coef_cc",
    "coef_d",
    "coef_k",
    "gamma_real",
    "is_dual",
]

# Width of the band around H + H' = 1 where removable singularities are
# evaluated through reflection-formula rewrites instead of Gamma(-(H+H')).
DUAL_BAND = 1e-3

# Tolerance for "exactly on the dual line" (a few units of rounding in H + H').
DUAL_EXACT = 4.0 * 2.220446049250313e-16


def gamma_real(x: float) -> float:
    """Gamma function of a real argument.

    Negative non-integer arguments are handled through the reflection
    formula (the C library routine behind :func:`math.gamma` already does
    this).  Zero and negative integers raise :class:`PoleError`.
    """
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise PoleError(f"gamma has a pole at {x!r}")
    return math.gamma(x)


def check_hurst(h: float) -> float:
    """Return ``h`` as a float, rejecting values outside the open interval (0, 1)."""
    try:
        value = float(h)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"Hurst index must be a real number, got {h!r}") from exc
    if not 0.0 < value < 1.0:
        raise DomainError(f"Hurst index must lie in (0, 1), got {value!r}")
    return value


def is_dual(h: float, h2: float) -> bool:
    """True when ``h + h2`` equals 1 up to a few units of rounding."""
    return abs(h + h2 - 1.0) <= DUAL_EXACT


@dataclass(frozen=True)
class DualPair:
    """A Hurst index together with its dual ``1 - h``."""

    h: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "h", check_hurst(self.h))

    @property
    def h_dual(self) -> float:
        return 1.0 - self.h


def _radical(h: float) -> float:
    # sqrt(Gamma(2H+1) sin(pi H)), recurring in c_H and c_{H,H'}
    return math.sqrt(gamma_real(2.0 * h + 1.0) * math.sin(math.pi * h))


def coef_c(h: float) -> float:
    """c_H = Gamma(H + 1/2) / sqrt(Gamma(2H + 1) sin(pi H))."""
    h = check_hurst(h)
    return gamma_real(h + 0.5) / _radical(h)


def coef_d(h: float) -> float:
    """Well-balanced normalization d_H; equals ``pi`` at H = 1/2.

    The factor ``1 - sin(pi H)`` is evaluated as ``2 sin^2((H - 1/2) pi / 2)``
    so that d_H stays accurate as H approaches 1/2 (where it tends to 0).
    """
    h = check_hurst(h)
    if h == 0.5:
        return math.pi
    one_minus_sin = 2.0 * math.sin((h - 0.5) * math.pi / 2.0) ** 2
    sin_h = math.sin(math.pi * h)
    return gamma_real(h + 0.5) / math.sqrt(gamma_real(2.0 * h + 1.0)) * math.sqrt(
        2.0 * one_minus_sin / sin_h
    )


def coef_k(h: float) -> float:
    """k_H = -2 Gamma(H + 1/2) sin((H - 1/2) pi / 2); equals ``pi`` at H = 1/2."""
    h = check_hurst(h)
    if h == 0.5:
        return math.pi
    return -2.0 * gamma_real(h + 0.5) * math.sin((h - 0.5) * math.pi / 2.0)


def coef_cc(h: float, h2: float) -> float:
    """c_{H,H'} = sqrt(Gamma(2H+1) sin pi H) sqrt(Gamma(2H'+1) sin pi H') / pi."""
    h = check_hurst(h)
    h2 = check_hurst(h2)
    return _radical(h) * _radical(h2) / math.pi


def coef_a(h: float, h2: float) -> float:
    """Amplitude a_{H,H'} of the fractional Brownian field covariance.

    Off the dual line this is
    ``-2 c_{H,H'} Gamma(-(H+H')) cos((H'-H) pi/2) cos((H+H') pi/2)``,
    normalized so that ``a_{H,H} = 1``.  On the dual line H + H' = 1 it is
    ``sqrt(Gamma(2H+1) Gamma(3-2H)) sin^2(pi H)``.

    Near the dual line the pole of Gamma(-(H+H')) cancels the zero of the
    cosine.  Inside :data:`DUAL_BAND` the product is rewritten with the
    reflection formula as ``pi / (Gamma(1+m) sin(m pi/2))`` (m = H + H'),
    which is smooth across the line.
    """
    h = check_hurst(h)
    h2 = check_hurst(h2)
    m = h + h2
    if is_dual(h, h2):
        # invariant under H -> 1 - H; evaluating at the smaller index keeps it bitwise symmetric
        lo = min(h, h2)
        return math.sqrt(gamma_real(2.0 * lo + 1.0) * gamma_real(3.0 - 2.0 * lo)) * math.sin(math.pi * lo) ** 2
    cc = coef_cc(h, h2)
    cos_diff = math.cos((h2 - h) * math.pi / 2.0)
    if abs(m - 1.0) < DUAL_BAND:
        return cc * cos_diff * math.pi / (gamma_real(1.0 + m) * math.sin(m * math.pi / 2.0))
    return -2.0 * cc * gamma_real(-m) * cos_diff * math.cos(m * math.pi / 2.0)


def coef_alpha(h: float) -> float:
    """alpha_H = 2^(2H-1) sqrt(Gamma(3-2H)) sin(pi H) / (Gamma(3/2-H) sqrt(Gamma(2H+1)))."""
    h = check_hurst(h)
    return (
        2.0 ** (2.0 * h - 1.0)
        * math.sqrt(gamma_real(3.0 - 2.0 * h))
        * math.sin(math.pi * h)
        / (gamma_real(1.5 - h) * math.sqrt(gamma_real(2.0 * h + 1.0)))
    )
