"""Truncated discrete Gaussians over Z_q^m and the distance toolbox.

The m-dimensional density is the product of identical 1-D factors, each
proportional to exp(-pi x^2 / B^2) on the centered lifts with |x| <= B.
Because |x_i| <= B per coordinate already forces ||x|| <= B*sqrt(m), the
per-coordinate truncation is the binding one; the ball condition is
implied and no extra renormalization is needed.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .zq import Modulus, ZqVector, lift_value

DEFAULT_TABLE_CAP = 10**6


@functools.lru_cache(maxsize=64)
def _table_1d_cached(q: int, width: float):
    r = min(int(math.floor(width)), (q - 1) // 2)
    lifts = np.arange(-r, r + 1, dtype=np.int64)
    w = np.exp(-math.pi * lifts.astype(np.float64) ** 2 / width**2)
    probs = w / w.sum()
    lifts.setflags(write=False)
    probs.setflags(write=False)
    return lifts, probs


class TableTooLarge(RuntimeError):
    """Raised when an exact density table would exceed the configured cap."""


def _kahan_sum(values) -> float:
    total = 0.0
    comp = 0.0
    for v in values:
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


@dataclass(frozen=True)
class Density:
    """A finite probability table keyed by support point (tuple of residues)."""

    table: dict

    def __post_init__(self):
        s = _kahan_sum(self.table.values())
        if any(p < 0 for p in self.table.values()):
            raise ValueError("negative probability")
        if abs(s - 1.0) > 1e-12:
            raise ValueError(f"density sums to {s}, not 1")

    def support(self):
        return self.table.keys()

    def __getitem__(self, point) -> float:
        return self.table.get(point, 0.0)

    def to_canonical_text(self) -> str:
        lines = []
        for point in sorted(self.table):
            coords = " ".join(str(c) for c in point)
            lines.append(f"{coords} -> {self.table[point]!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TruncatedGaussian:
    """D_{Z_q^m, B}: product of 1-D truncated Gaussians on centered lifts."""

    modulus: Modulus
    width: float
    dim: int

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def radius(self) -> int:
        """Largest integer lift magnitude inside the 1-D truncation."""
        return min(int(math.floor(self.width)), (self.modulus.q - 1) // 2)

    def _table_1d(self) -> tuple[np.ndarray, np.ndarray]:
        return _table_1d_cached(self.modulus.q, self.width)

    def eval_1d(self, residue: int) -> float:
        lift = lift_value(residue, self.modulus.q)
        if abs(lift) > self.radius:
            return 0.0
        lifts, probs = self._table_1d()
        return float(probs[lift + self.radius])

    def density_eval(self, x: ZqVector) -> float:
        """Probability of x; 0 outside the truncated support."""
        if len(x) != self.dim:
            raise ValueError(f"expected length {self.dim}")
        p = 1.0
        for v in x.entries:
            p *= self.eval_1d(int(v))
            if p == 0.0:
                return 0.0
        return p

    def support_size(self) -> int:
        return (2 * self.radius + 1) ** self.dim

    def table(self, cap: int = DEFAULT_TABLE_CAP) -> Density:
        """Materialize the exact density table (residue tuples -> prob)."""
        if self.support_size() > cap:
            raise TableTooLarge(
                f"support has {self.support_size()} points, cap is {cap}"
            )
        q = self.modulus.q
        lifts, probs = self._table_1d()
        residues = [int(v) % q for v in lifts]
        t: dict = {}
        for combo in product(range(len(lifts)), repeat=self.dim):
            point = tuple(residues[i] for i in combo)
            p = 1.0
            for i in combo:
                p *= float(probs[i])
            t[point] = p
        return Density(t)

    def sample(self, rng: np.random.Generator) -> ZqVector:
        """Draw one vector by per-coordinate inverse-CDF sampling."""
        lifts, probs = self._table_1d()
        cdf = np.cumsum(probs)
        u = rng.random(self.dim)
        idx = np.searchsorted(cdf, u, side="right")
        idx = np.minimum(idx, len(lifts) - 1)
        return ZqVector(lifts[idx], self.modulus)


def hellinger_sq(f0: Density, f1: Density) -> float:
    """H^2(f0, f1) = 1 - sum_x sqrt(f0(x) f1(x))."""
    common = f0.table.keys() & f1.table.keys()
    bc = _kahan_sum(math.sqrt(f0.table[x] * f1.table[x]) for x in common)
    return min(max(1.0 - bc, 0.0), 1.0)


def tv_distance(f0: Density, f1: Density) -> float:
    """(1/2) sum_x |f0(x) - f1(x)|."""
    keys = f0.table.keys() | f1.table.keys()
    s = _kahan_sum(abs(f0[x] - f1[x]) for x in keys)
    return min(max(0.5 * s, 0.0), 1.0)


def trace_distance_from_h2(h2: float) -> float:
    """Trace distance between the square-root amplitude states of two
    densities at Hellinger-squared distance h2."""
    if not 0.0 <= h2 <= 1.0:
        raise ValueError(f"h2 must be in [0, 1], got {h2}")
    return math.sqrt(max(0.0, 1.0 - (1.0 - h2) ** 2))


def shifted_density(g: TruncatedGaussian, shift: ZqVector) -> Density:
    """Table of the distribution of (X + shift) mod q for X ~ g."""
    if len(shift) != g.dim:
        raise ValueError("shift dimension mismatch")
    q = g.modulus.q
    base = g.table()
    sh = shift.as_tuple()
    return Density(
        {
            tuple((p + s) % q for p, s in zip(point, sh)): prob
            for point, prob in base.table.items()
        }
    )


def hellinger_shift_bound(B: float, m: int, shift_norm: float) -> float:
    """Upper bound 1 - exp(-2 pi sqrt(m) ||e|| / B) on H^2(D, D+e)."""
    if shift_norm < 0:
        raise ValueError("shift norm must be nonnegative")
    return 1.0 - math.exp(-2.0 * math.pi * math.sqrt(m) * shift_norm / B)
