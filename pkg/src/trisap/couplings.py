"""Trap geometry and the separation-dependent tunneling rate.

Natural units throughout: hbar = m = omega = 1, so alpha = sqrt(m omega / hbar) = 1.
Lengths are in units of 1/alpha, rates in units of omega.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class TrapLayout:
    """Three traps: B at the origin, C on the +x axis, A at angle beta below.

    beta is the angle between the BA direction and the -x axis, so the
    interior angle of the triangle at B is pi - beta.
    """
    beta: float
    d_AB: float
    d_BC: float

    def __post_init__(self):
        if not (self.d_AB > 0 and self.d_BC > 0):
            raise ValueError(f"trap separations must be positive, got d_AB={self.d_AB}, d_BC={self.d_BC}")
        if not (0.0 <= self.beta < math.pi):
            raise ValueError(f"beta must lie in [0, pi), got {self.beta}")

    @property
    def pos_A(self) -> tuple[float, float]:
        return (-self.d_AB * math.cos(self.beta), -self.d_AB * math.sin(self.beta))

    @property
    def pos_B(self) -> tuple[float, float]:
        return (0.0, 0.0)

    @property
    def pos_C(self) -> tuple[float, float]:
        return (self.d_BC, 0.0)

    @property
    def d_AC(self) -> float:
        return distance_AC(self)

    def centers(self) -> np.ndarray:
        """(3, 2) array of trap centers in A, B, C order."""
        return np.array([self.pos_A, self.pos_B, self.pos_C])


@dataclass(frozen=True)
class CouplingTriple:
    J_AB: float
    J_BC: float
    J_AC: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.J_AB, self.J_BC, self.J_AC)


def distance_AC(layout: TrapLayout) -> float:
    d1, d2 = layout.d_AB, layout.d_BC
    d2_ac = d1 * d1 + d2 * d2 + 2.0 * d1 * d2 * math.cos(layout.beta)
    return math.sqrt(max(d2_ac, 0.0))


def coupling_rate(d, alpha: float = 1.0):
    """Tunneling rate J/omega between two identical truncated harmonic traps.

    Evaluated in a form scaled by exp(-(alpha d)^2 / 2) top and bottom, with
    erfc written through erfcx, so nothing overflows for large separations and
    the small-separation limit keeps full precision. Accepts scalars or arrays.
    """
    x = alpha * np.asarray(d, dtype=float)
    if np.any(x < 0):
        raise ValueError("separation must be non-negative")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.ones_like(x)
    tiny = (x > 0) & (x < 1e-5)
    xt = x[tiny]
    out[tiny] = 1.0 - xt / (2.0 * _SQRT_PI) + xt ** 3 / (48.0 * _SQRT_PI)  # series, error O(x^4)
    nz = x >= 1e-5
    xs = x[nz]
    q = xs * xs / 4.0
    num = np.exp(-q) * -np.expm1(-q) + 0.5 * _SQRT_PI * xs * erfcx(xs / 2.0) * np.exp(-2.0 * q)
    den = _SQRT_PI * -np.expm1(-2.0 * q)
    out[nz] = xs * num / den
    return float(out[0]) if scalar else out


def couplings_of(layout: TrapLayout, alpha: float = 1.0) -> CouplingTriple:
    return CouplingTriple(
        float(coupling_rate(layout.d_AB, alpha)),
        float(coupling_rate(layout.d_BC, alpha)),
        float(coupling_rate(layout.d_AC, alpha)),
    )
