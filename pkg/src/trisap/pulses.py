"""Counterintuitive trap-motion schedules.

The B-C pair is brought together first and the A-B pair follows after a
delay. Each separation follows a cos^2 dip of half-width T/2 from ``d_max``
down to ``d_min``; the two dips are centred at (T - delay)/2 and (T + delay)/2.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

SHAPES = ("cos2",)


@dataclass(frozen=True)
class PulseSchedule:
    T: float
    delay: float
    d_min: float = 3.0
    d_max: float = 10.0
    shape: str = "cos2"
    shake_amp: float = 0.0
    shake_freq: float = 0.0
    reversed: bool = False

    def __post_init__(self):
        if not (self.T > 0):
            raise ValueError(f"total time must be positive, got {self.T}")
        if not (0.0 <= self.delay < self.T):
            raise ValueError(f"delay must lie in [0, T), got {self.delay}")
        if not (0.0 < self.d_min < self.d_max):
            raise ValueError(f"need 0 < d_min < d_max, got {self.d_min}, {self.d_max}")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown pulse shape {self.shape!r}; expected one of {SHAPES}")
        if self.shake_amp != 0.0 and self.d_min - abs(self.shake_amp) <= 0.0:
            raise ValueError("shaking amplitude would drive a separation to zero")

    @classmethod
    def counterintuitive(cls, T: float, delay_frac: float = 0.2, **kw) -> "PulseSchedule":
        return cls(T=T, delay=delay_frac * T, **kw)

    @property
    def center_BC(self) -> float:
        return 0.5 * (self.T - self.delay)

    @property
    def center_AB(self) -> float:
        return 0.5 * (self.T + self.delay)

    def _dip(self, t, center):
        u = t - center
        prof = np.cos(math.pi * u / self.T) ** 2
        prof = np.where(np.abs(u) <= 0.5 * self.T, prof, 0.0)
        return self.d_max - (self.d_max - self.d_min) * prof

    def _base(self, t):
        return self._dip(t, self.center_AB), self._dip(t, self.center_BC)

    def distances_at(self, t):
        """Return (d_AB, d_BC) at time(s) ``t`` in [0, T].

        For a reversed schedule the couplings are played backwards in time,
        while the shaking keeps running on the lab clock, which continues
        from T (the reversed leg is the second half of a 2T protocol).
        """
        t = np.asarray(t, dtype=float)
        eps = 1e-9 * self.T
        if np.any(t < -eps) or np.any(t > self.T + eps):
            raise ValueError(f"time outside [0, {self.T}]")
        if self.reversed:
            d_ab, d_bc = self._base(self.T - t)
            lab_t = self.T + t
        else:
            d_ab, d_bc = self._base(t)
            lab_t = t
        if self.shake_amp != 0.0:
            s = np.sin(self.shake_freq * lab_t)
            # positive amplitude: in phase; negative: d_BC moves opposite to d_AB
            d_ab = d_ab + self.shake_amp * s
            d_bc = d_bc + abs(self.shake_amp) * s
        if t.ndim == 0:
            return float(d_ab), float(d_bc)
        return d_ab, d_bc

    def reverse(self) -> "PulseSchedule":
        return dataclasses.replace(self, reversed=not self.reversed)

    def with_shaking(self, amp: float, freq: float) -> "PulseSchedule":
        return dataclasses.replace(self, shake_amp=amp, shake_freq=freq)
