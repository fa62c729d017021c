"""Cyclic level shifts X_m^d as transpositions with level 0 (juggling construction)."""

from dataclasses import dataclass
from math import gcd

import numpy as np


def normalize_shift(d, m):
    """Reduce ``m`` modulo ``d`` into the window ``(-d/2, d/2]``."""
    if d < 2:
        raise ValueError("qudit dimension must be at least 2")
    m = m % d
    if 2 * m > d:
        m -= d
    return m


@dataclass(frozen=True)
class SwapSequence:
    """Swaps applied left to right; entry ``s`` exchanges levels 0 and ``s``."""

    d: int
    m: int
    swaps: tuple

    def __len__(self):
        return len(self.swaps)

    def reversed(self):
        return SwapSequence(self.d, normalize_shift(self.d, -self.m), self.swaps[::-1])


def expected_length(d, m):
    m = normalize_shift(d, m)
    return 0 if m == 0 else d + gcd(abs(m), d) - 2


def _positive_shift(d, m):
    g = gcd(m, d)
    cycle = d // g
    swaps = [(k * m) % d for k in range(1, cycle)]
    for c in range(1, g):
        # level 0 acts as the buffer: load element c, walk its cycle, put it back
        swaps.append(c)
        swaps.extend((c + k * m) % d for k in range(1, cycle))
        swaps.append(c)
    return swaps


def cyclic_shift_swaps(d, m):
    """Transpositions with level 0 whose product is the shift ``j -> (j + m) mod d``."""
    m = normalize_shift(d, m)
    if m == 0:
        return SwapSequence(d, 0, ())
    if m > 0:
        return SwapSequence(d, m, tuple(_positive_shift(d, m)))
    return SwapSequence(d, m, tuple(_positive_shift(d, -m)[::-1]))


def apply_swaps(seq):
    """Compose the swaps; returns ``perm`` with ``perm[j]`` the level that ``j`` ends on."""
    slots = list(range(seq.d))  # slots[level] = original level now stored there
    for s in seq.swaps:
        if not 1 <= s < seq.d:
            raise ValueError(f"swap index {s} outside [1, {seq.d - 1}]")
        slots[0], slots[s] = slots[s], slots[0]
    perm = np.empty(seq.d, dtype=int)
    perm[slots] = np.arange(seq.d)
    return perm


@dataclass(frozen=True)
class Rotation:
    """Resonant pi pulse between levels 0 and ``level`` about the +x or -x axis."""

    level: int
    axis: str = "+x"
    ion: int = None

    def text(self):
        return f"ROT 0 {self.level} {self.axis} pi"

    def matrix(self, d):
        sign = 1.0 if self.axis == "+x" else -1.0
        u = np.eye(d, dtype=complex)
        u[0, 0] = u[self.level, self.level] = 0.0
        u[0, self.level] = u[self.level, 0] = -1j * sign
        return u


def to_native_rotations(seq, axis="+x", ion=None):
    return [Rotation(s, axis, ion) for s in seq.swaps]
