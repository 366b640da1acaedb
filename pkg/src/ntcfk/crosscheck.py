"""Side-by-side comparison of the analytic prover and the sparse-state
oracle on the full sampling circuit.

Both sides produce the exact joint distribution over (y, b, x): the
image measurement outcome together with a computational-basis
measurement of the BX registers. The analytic side uses the closed form
P(y, b, x) = D_{B_P}(y - Ax - b t) / (kappa * q^n); the oracle side runs
uniform B,X + Gaussian E + U_f and reads the marginal off the state.
"""
from __future__ import annotations

import itertools

import numpy as np

from .gaussian import Density, TruncatedGaussian, tv_distance
from .ntcf import NtcfKey
from .oracle import (
    RegisterSpec,
    apply_ufkb,
    full_distribution,
    init_uniform_full,
    load_gaussian_register,
)

ANALYTIC_CAP = 2**20


def analytic_joint(k: NtcfKey, mis_shift: int = 0) -> Density:
    """Exact joint over flattened (y..., b, x...) tuples.

    mis_shift deliberately offsets the y coordinates; it exists as a
    fault-injection hook so the comparison's sensitivity is testable.
    """
    p = k.params
    g = TruncatedGaussian(p.modulus, p.b_p, p.m)
    total = p.kappa * p.q**p.n * g.support_size()
    if total > ANALYTIC_CAP:
        raise ValueError(f"joint support {total} exceeds cap {ANALYTIC_CAP}")
    support = list(g.table().table.items())
    A = k.A.entries
    t = k.t.entries
    q = p.q
    base = 1.0 / (p.kappa * q**p.n)
    table: dict[tuple, float] = {}
    for b in range(p.kappa):
        for x in itertools.product(range(q), repeat=p.n):
            xv = np.array(x, dtype=np.int64)
            center = (A @ xv + b * t) % q
            for e0, prob in support:
                y = tuple(
                    int(v) for v in (center + np.array(e0, dtype=np.int64) + mis_shift) % q
                )
                key = y + (b,) + x
                table[key] = table.get(key, 0.0) + base * prob
    return Density(table)


def oracle_joint(k: NtcfKey, rng_unused=None) -> Density:
    """The same joint, from the brute-force circuit simulation."""
    p = k.params
    specs = (
        RegisterSpec("b", "modq", 1, p.kappa),
        RegisterSpec("x", "modq", p.n, p.q),
    )
    state = init_uniform_full(specs)
    g = TruncatedGaussian(p.modulus, p.b_p, p.m)
    state = load_gaussian_register(state, RegisterSpec("y", "modq", p.m, p.q), g)
    state = apply_ufkb(state, k)
    return full_distribution(state, ("y", "b", "x"))


def compare_joint(k: NtcfKey, mis_shift: int = 0) -> float:
    """Total variation distance between the two joints."""
    return tv_distance(analytic_joint(k, mis_shift=mis_shift), oracle_joint(k))
