"""The kappa-to-1 noisy trapdoor claw-free function family over LWE.

A key is k = (A, t) with t = A s + e mod q. The evaluated branch density is

    f'_{k,b}(x)(y) = D_{Z_q^m, B_P}(y - A x - b t)

for b in {0, ..., kappa-1}, computable from the public key alone. The
ideal branch f_{k,b}(x)(y) = D(y - A x - b A s) needs the secret s. The
kappa preimages of an honest image form a claw x_b = x_0 - b s mod q.

Parameter validation splits into hard conditions (prime q, the B_P
formula, the width ordering) and desk-mode warnings (dimension growth
and ratio conditions, which have no meaning at toy sizes and are
replaced by configurable numeric floors).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import trapdoor as td
from .gaussian import Density, TruncatedGaussian, hellinger_sq, shifted_density
from .serialize import HEADER_KEY, HEADER_SK, LineReader, LineWriter
from .zq import Modulus, ZqMatrix, ZqVector, euclidean_norm, mat_vec_mul


def compute_bp(q: int, n: int, m: int, kappa: int, c_t: float) -> float:
    """B_P = q / (kappa * C_T * sqrt(m * n * ceil(log2 q)))."""
    logq = Modulus(q).bits
    return q / (kappa * c_t * math.sqrt(m * n * logq))


@dataclass(frozen=True)
class NtcfParams:
    q: int
    n: int
    m: int
    ell: int
    kappa: int
    b_l: float
    b_v: float
    b_p: float
    c_t: float
    mode: str = "desk"  # "desk" | "asymptotic"
    ratio_floor: float = 8.0
    growth_const: float = 1.0

    @property
    def modulus(self) -> Modulus:
        return Modulus(self.q)

    @property
    def logq(self) -> int:
        return self.modulus.bits

    @property
    def d_len(self) -> int:
        """Bit length of the equation-test string d."""
        return self.n * self.logq


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_params(p: NtcfParams) -> ValidationReport:
    """Check the family's parameter conditions.

    Hard failures: q not prime, kappa < 2, stored B_P off the defining
    formula, or a broken ordering 0 < B_L < B_V < B_P < q. The dimension
    growth conditions (n vs ell*log q, m vs n*log q), the lower bound
    2*sqrt(n) <= B_L, and the width-ratio conditions are warnings in desk
    mode and failures in asymptotic mode.
    """
    hard: list[str] = []
    soft: list[str] = []
    if not p.modulus.is_prime:
        hard.append(f"q={p.q} is not prime")
    if p.kappa < 2:
        hard.append(f"kappa={p.kappa} must be >= 2")
    if p.mode not in ("desk", "asymptotic"):
        hard.append(f"unknown mode {p.mode!r}")
    expect_bp = compute_bp(p.q, p.n, p.m, p.kappa, p.c_t)
    if not math.isclose(p.b_p, expect_bp, rel_tol=1e-12, abs_tol=0.0):
        hard.append(f"B_P={p.b_p!r} does not match the formula value {expect_bp!r}")
    if not (0 < p.b_l < p.b_v < p.b_p < p.q):
        hard.append(
            f"width ordering violated: need 0 < B_L={p.b_l} < B_V={p.b_v} "
            f"< B_P={p.b_p} < q"
        )

    growth = [
        (p.n >= p.growth_const * p.ell * p.logq, f"n={p.n} < ell*log2(q)={p.ell * p.logq}"),
        (p.m >= p.growth_const * p.n * p.logq, f"m={p.m} < n*log2(q)={p.n * p.logq}"),
        (2 * math.sqrt(p.n) <= p.b_l, f"2*sqrt(n)={2 * math.sqrt(p.n):.3f} > B_L={p.b_l}"),
        (
            p.b_p / p.b_v >= p.ratio_floor,
            f"B_P/B_V={p.b_p / p.b_v:.3f} below floor {p.ratio_floor}",
        ),
        (
            p.b_v / p.b_l >= p.ratio_floor,
            f"B_V/B_L={p.b_v / p.b_l:.3f} below floor {p.ratio_floor}",
        ),
    ]
    sink = soft if p.mode == "desk" else hard
    for ok, msg in growth:
        if not ok:
            sink.append(msg)
    return ValidationReport(tuple(hard), tuple(soft))


@dataclass(frozen=True)
class NtcfKey:
    params: NtcfParams
    A: ZqMatrix
    t: ZqVector

    def __post_init__(self):
        if len(self.t) != self.params.m:
            raise ValueError(f"t must have length m={self.params.m}")


@dataclass(frozen=True)
class NtcfTrapdoor:
    t_a: td.TrapdoorKey
    s: ZqVector
    e: ZqVector


@dataclass(frozen=True)
class Claw:
    xs: tuple[ZqVector, ...]

    def __getitem__(self, b: int) -> ZqVector:
        return self.xs[b]

    def __len__(self) -> int:
        return len(self.xs)


def gen(p: NtcfParams, rng: np.random.Generator) -> tuple[NtcfKey, NtcfTrapdoor]:
    """Sample a key k = (A, As+e) and its trapdoor (t_A, s, e)."""
    report = validate_params(p)
    if not report.ok:
        raise ValueError("invalid parameters: " + "; ".join(report.violations))
    A, t_a = td.gen_trap(p.n, p.m, p.q, rng)
    s = ZqVector(rng.integers(0, p.q, size=p.n, dtype=np.int64), p.modulus)
    e = TruncatedGaussian(p.modulus, p.b_v, p.m).sample(rng)
    t = mat_vec_mul(A, s) + e
    return NtcfKey(p, A, t), NtcfTrapdoor(t_a, s, e)


def _check_branch(p: NtcfParams, b: int):
    if not 0 <= b < p.kappa:
        raise ValueError(f"branch b={b} out of range [0, {p.kappa})")


def _image_gaussian(p: NtcfParams) -> TruncatedGaussian:
    return TruncatedGaussian(p.modulus, p.b_p, p.m)


def f_prime_density(k: NtcfKey, b: int, x: ZqVector) -> Density:
    """Exact table of f'_{k,b}(x): the image Gaussian shifted to Ax + b*t.

    Public: uses only the key. Desk scale only (materializes the table).
    """
    _check_branch(k.params, b)
    shift = mat_vec_mul(k.A, x) + k.t.scale(b)
    return shifted_density(_image_gaussian(k.params), shift)


def f_density(k: NtcfKey, t: NtcfTrapdoor, b: int, x: ZqVector) -> Density:
    """Exact table of the ideal branch f_{k,b}(x), centered at Ax + b*As.

    Needs the trapdoor because the shift references As rather than As+e.
    """
    _check_branch(k.params, b)
    shift = mat_vec_mul(k.A, x) + mat_vec_mul(k.A, t.s).scale(b)
    return shifted_density(_image_gaussian(k.params), shift)


def f_prime_eval(k: NtcfKey, b: int, x: ZqVector, y: ZqVector) -> float:
    """Point evaluation of f'_{k,b}(x)(y); works at any scale."""
    _check_branch(k.params, b)
    return _image_gaussian(k.params).density_eval(y - mat_vec_mul(k.A, x) - k.t.scale(b))


def inv(k: NtcfKey, t: NtcfTrapdoor, b: int, y: ZqVector) -> ZqVector:
    """Recover x from y in the support of f'_{k,b}(x).

    Inverts y = A(x + b s) + (e0 + b e) with the trapdoor and subtracts
    b*s. The residual noise bound B_P*sqrt(m) + b*B_V*sqrt(m) is enforced
    so a decode outside the honest support fails loudly.
    """
    p = k.params
    _check_branch(p, b)
    bound = (p.b_p + b * p.b_v) * math.sqrt(p.m)
    s_shift, _e = td.invert(t.t_a, y, max_error_norm=bound)
    return s_shift - t.s.scale(b)


def chk(k: NtcfKey, b: int, x: ZqVector, y: ZqVector) -> int:
    """Public support check: 1 iff ||y - Ax - b*t|| <= B_P*sqrt(m)."""
    p = k.params
    if not 0 <= b < p.kappa:
        return 0
    resid = y - mat_vec_mul(k.A, x) - k.t.scale(b)
    return int(euclidean_norm(resid) <= p.b_p * math.sqrt(p.m))


def claw_enumerate(k: NtcfKey, t: NtcfTrapdoor, y: ZqVector) -> Claw:
    """All kappa preimages of y, one per branch; x_b = x_0 - b*s mod q."""
    xs = tuple(inv(k, t, b, y) for b in range(k.params.kappa))
    for b in range(1, len(xs)):
        if xs[b] != xs[0] - t.s.scale(b):
            raise ValueError(f"branch {b} preimage breaks the claw identity")
    return Claw(xs)


def hellinger_branch(
    k: NtcfKey, t: NtcfTrapdoor, b: int, x: ZqVector
) -> tuple[float, float]:
    """Exact H^2 between f_{k,b}(x) and f'_{k,b}(x), with the family's
    display bound 1 - exp(-2*pi*m*b*B_V/B_P).

    The two branch densities are shifts of each other by b*e, so the
    exact value only depends on b and e. Both are products of 1-D
    factors, so the Hellinger affinity factorizes per coordinate; this
    stays exact while avoiding the q^m joint table.
    """
    p = k.params
    _check_branch(p, b)
    g1 = TruncatedGaussian(p.modulus, p.b_p, 1)
    base = g1.table()
    affinity = 1.0
    for ei in t.e.entries:
        shift = ZqVector(np.array([(b * int(ei)) % p.q]), p.modulus)
        affinity *= 1.0 - hellinger_sq(base, shifted_density(g1, shift))
    exact = 1.0 - affinity
    bound = 1.0 - math.exp(-2.0 * math.pi * p.m * b * p.b_v / p.b_p)
    return exact, bound


# serialization -------------------------------------------------------------

def _params_fields(w: LineWriter, p: NtcfParams) -> None:
    w.field("q", p.q)
    w.field("n", p.n)
    w.field("m", p.m)
    w.field("ell", p.ell)
    w.field("kappa", p.kappa)
    w.float_field("b_l", p.b_l)
    w.float_field("b_v", p.b_v)
    w.float_field("b_p", p.b_p)
    w.float_field("c_t", p.c_t)
    w.field("mode", p.mode)


def _params_read(r: LineReader) -> NtcfParams:
    return NtcfParams(
        q=r.int_field("q"),
        n=r.int_field("n"),
        m=r.int_field("m"),
        ell=r.int_field("ell"),
        kappa=r.int_field("kappa"),
        b_l=r.float_field("b_l"),
        b_v=r.float_field("b_v"),
        b_p=r.float_field("b_p"),
        c_t=r.float_field("c_t"),
        mode=r.field("mode"),
    )


def key_to_text(k: NtcfKey) -> str:
    w = LineWriter(HEADER_KEY)
    _params_fields(w, k.params)
    w.matrix("A", k.A)
    w.vector("t", k.t)
    return w.text()


def key_from_text(text: str) -> NtcfKey:
    r = LineReader(text, HEADER_KEY)
    p = _params_read(r)
    A = ZqMatrix(r.matrix("A"), p.modulus)
    t = r.vector("t", p.modulus)
    r.done()
    return NtcfKey(p, A, t)


def trapdoor_to_text(k: NtcfKey, t: NtcfTrapdoor) -> str:
    w = LineWriter(HEADER_SK)
    _params_fields(w, k.params)
    w.matrix("A", k.A)
    w.vector("t", k.t)
    w.field("trap_mode", t.t_a.mode)
    w.field("n_bar", t.t_a.n_bar)
    if t.t_a.mode == "gadget":
        w.field("gadget_base", t.t_a.gadget.base)
        w.matrix("R", t.t_a.R)
    w.vector("s", t.s)
    w.vector("e", t.e)
    return w.text()


def trapdoor_from_text(text: str) -> tuple[NtcfKey, NtcfTrapdoor]:
    r = LineReader(text, HEADER_SK)
    p = _params_read(r)
    A = ZqMatrix(r.matrix("A"), p.modulus)
    tvec = r.vector("t", p.modulus)
    mode = r.field("trap_mode")
    n_bar = r.int_field("n_bar")
    if mode == "gadget":
        base = r.int_field("gadget_base")
        R = r.matrix("R")
        t_a = td.TrapdoorKey(
            A=A, mode="gadget", R=R, gadget=td.GadgetParams(base, p.q), n_bar=n_bar
        )
    else:
        t_a = td.TrapdoorKey(A=A, mode="exhaustive", R=None, gadget=None, n_bar=0)
    s = r.vector("s", p.modulus)
    e = r.vector("e", p.modulus)
    r.done()
    return NtcfKey(p, A, tvec), NtcfTrapdoor(t_a, s, e)
