"""Deterministic separating examples with known structure.

Everything built here carries construction-time records (class, rank,
indecomposability) so that tests can re-derive them through the analysis
modules instead of trusting the factory.  The conjugation helpers produce
alternative presentations of the same group together with a unimodular
certificate matrix, which is what the invariance suites shuffle over.
"""

from __future__ import annotations

import functools
import math
import random
from dataclasses import dataclass
from fractions import Fraction

import sympy

from tfdecomp.arith import INF
from tfdecomp.chartypes import Characteristic
from tfdecomp.errors import BadModulus, BadPrime, PrimeNotInP0, RankMismatch, RankTooSmall, TfError
from tfdecomp.exactla import identity_int, matmul
from tfdecomp.groups import (
    FamilyGlue,
    FiniteGlue,
    PruferGlue,
    TfGroup,
    direct_sum,
    make_group,
    rank_one,
)
from tfdecomp.localdata import group_equal
from tfdecomp.padics import RationalPadic, StreamPadic, combine
from tfdecomp.padics import scale as pscale
from tfdecomp.primesets import PrimeSet
from tfdecomp.torsion import QuotientClass


@dataclass(frozen=True)
class PrimePartition:
    """A split of all primes into n+1 infinite parts P_0 .. P_n."""

    n: int
    parts: tuple[PrimeSet, ...]

    def __post_init__(self) -> None:
        if len(self.parts) != self.n + 1:
            raise BadModulus(f"need {self.n + 1} parts, got {len(self.parts)}")
        seen = PrimeSet.none()
        for i, P in enumerate(self.parts):
            if P.is_finite:
                raise BadModulus(f"part {i} is finite")
            if not seen.isdisjoint(P):
                raise BadModulus(f"part {i} overlaps an earlier part")
            seen = seen | P
        if not (~seen).is_empty:
            raise BadModulus("parts do not cover all primes")


def prime_partition(n: int, modulus: int | None = None) -> PrimePartition:
    """Split the primes into n+1 infinite parts by residue class.

    The default modulus is the smallest prime m with m - 1 >= n + 1.  The
    unit residue r mod m goes to part (r - 1) mod (n + 1); primes dividing
    m join P_0.  Every part is a finite union of unit residue classes, so
    it is infinite.
    """
    if n < 1:
        raise RankTooSmall("a prime partition needs n >= 1")
    m = sympy.nextprime(n + 1) if modulus is None else int(modulus)
    if m < 2:
        raise BadModulus(f"modulus {m} is too small")
    units = [r for r in range(1, m) if math.gcd(r, m) == 1]
    if len(units) < n + 1:
        raise BadModulus(f"modulus {m} has {len(units)} unit residues, need {n + 1}")
    buckets: list[list[int]] = [[] for _ in range(n + 1)]
    for r in units:
        buckets[(r - 1) % (n + 1)].append(r)
    parts = []
    for i, rs in enumerate(buckets):
        if not rs:
            raise BadModulus(f"modulus {m} leaves part {i} without a residue class")
        P = PrimeSet.none()
        for r in rs:
            P = P | PrimeSet.residue_class(r, m)
        if i == 0:
            P = P | PrimeSet.of(*sympy.primefactors(m))
        parts.append(P)
    return PrimePartition(n, tuple(parts))


def _witness_chars(n: int, part: PrimePartition) -> list[Characteristic]:
    if part.n != n:
        raise RankMismatch(f"partition has {part.n + 1} parts, the witness needs {n + 1}")
    return [Characteristic.from_pieces([(part.parts[i + 1], INF)]) for i in range(n)]


def witness_rq(n: int, partition: PrimePartition | None = None) -> TfGroup:
    """Rank-n group with an infinite reduced quotient over its frame.

    Coordinate i is infinitely divisible exactly on P_i, and the all-ones
    line picks up one extra division by every prime of the infinite set
    P_0; no finite-index subgroup absorbs that.
    """
    if n < 2:
        raise RankTooSmall("separating witnesses need rank >= 2")
    part = partition or prime_partition(n)
    glue = FamilyGlue(part.parts[0], 1, (1,) * n)
    return make_group(_witness_chars(n, part), [glue], label=f"rq{n}")


def witness_dq(n: int, partition: PrimePartition | None = None, q: int | None = None) -> TfGroup:
    """Rank-n group whose quotient over its frame has a divisible summand.

    Same frame as witness_rq, but the all-ones line is divided by every
    power of the single prime q in P_0, contributing one Prufer layer.
    """
    if n < 2:
        raise RankTooSmall("separating witnesses need rank >= 2")
    part = partition or prime_partition(n)
    if q is None:
        q = part.parts[0].min_member()
    if q not in part.parts[0]:
        raise PrimeNotInP0(f"{q} is not in P_0 of the partition")
    glue = PruferGlue(q, tuple(RationalPadic(q, 1) for _ in range(n)))
    return make_group(_witness_chars(n, part), [glue], label=f"dq{n}q{q}")


def acd_indecomposable(p: int = 5) -> TfGroup:
    """Rank 2, finite index over its frame, no strongly indecomposable summand.

    The two coordinate types are incomparable, so any direct summand would
    have to split along them, and the mod-p diagonal glue blocks that.
    """
    if not sympy.isprime(p):
        raise BadPrime(f"{p} is not prime")
    if p in (2, 3):
        raise BadPrime("the glue prime must avoid the frame primes 2 and 3")
    t1 = Characteristic.from_pieces([(PrimeSet.of(2), INF)])
    t2 = Characteristic.from_pieces([(PrimeSet.of(3), INF)])
    return make_group([t1, t2], [FiniteGlue(p, 1, (1, 1))], label=f"acd{p}")


def pathology_padic(p: int, seed: int) -> TfGroup:
    """Homogeneous rank 2 glued along a stream-sourced p-adic chain.

    Classification still works (a coherent chain contributes a divisible
    layer whatever its digits), but any analysis that needs the exact
    chain direction must answer Unknown rather than guess.
    """
    if not sympy.isprime(p):
        raise BadPrime(f"{p} is not prime")
    z = Characteristic.zero()
    glue = PruferGlue(p, (RationalPadic(p, 1), StreamPadic(p, seed)))
    return make_group([z, z], [glue], label=f"padic{p}s{seed}")


# -- alternative presentations ----------------------------------------------------

_MAX_ENTRY = 5


def _perm_moved(G: TfGroup, sigma: list[int], signs: list[int]):
    """Presentation of G in coordinates y[sigma[i]] = signs[i] * x[i]."""
    n = G.rank
    chars = [None] * n
    for i in range(n):
        chars[sigma[i]] = G.chars[i]
    glues = []
    for g in G.glues:
        if isinstance(g, PruferGlue):
            alpha = [None] * n
            for i in range(n):
                a = g.alpha[i]
                alpha[sigma[i]] = a if signs[i] == 1 else pscale(a, -1)
            glues.append(PruferGlue(g.prime, tuple(alpha)))
        else:
            w = [0] * n
            for i in range(n):
                w[sigma[i]] = signs[i] * int(g.coeffs[i])
            if isinstance(g, FiniteGlue):
                glues.append(FiniteGlue(g.prime, g.power, tuple(w)))
            else:
                glues.append(FamilyGlue(g.primes, g.power, tuple(w)))
    T = [[0] * n for _ in range(n)]
    for i in range(n):
        T[i][sigma[i]] = signs[i]
    return chars, glues, T


def _shear_moved(G: TfGroup, i: int, j: int, c: int):
    """Presentation candidate for G under x -> x @ (I + c E_ij).

    Only valid when c * (axis i line) lies inside the axis j line; the
    caller verifies with group_equal and discards the move otherwise.
    """
    n = G.rank
    glues = []
    for g in G.glues:
        if isinstance(g, PruferGlue):
            alpha = list(g.alpha)
            alpha[j] = combine(g.prime, [(Fraction(1), g.alpha[j]), (Fraction(c), g.alpha[i])])
            glues.append(PruferGlue(g.prime, tuple(alpha)))
        else:
            w = [int(a) for a in g.coeffs]
            w[j] += c * w[i]
            if isinstance(g, FiniteGlue):
                glues.append(FiniteGlue(g.prime, g.power, tuple(w)))
            else:
                glues.append(FamilyGlue(g.primes, g.power, tuple(w)))
    T = identity_int(n)
    T[i][j] = c
    return list(G.chars), glues, T


def random_conjugate(G: TfGroup, rng: random.Random, max_moves: int = 3):
    """A different presentation of the same group, with its certificate.

    Returns (H, M) with M unimodular, |entries| <= 5, and x -> x @ M
    carrying G onto H.  Moves that would leave the representable class
    (shears against the divisibility order) are detected by verification
    and skipped.
    """
    n = G.rank
    H, M = G, identity_int(n)
    if n == 0:
        return H, M
    for _ in range(rng.randint(1, max_moves)):
        kind = rng.choice(("perm", "shear", "shear")) if n >= 2 else "perm"
        if kind == "perm":
            sigma = list(range(n))
            rng.shuffle(sigma)
            signs = [rng.choice((1, -1)) for _ in range(n)]
            chars, glues, T = _perm_moved(H, sigma, signs)
        else:
            i, j = rng.sample(range(n), 2)
            chars, glues, T = _shear_moved(H, i, j, rng.choice((1, -1, 2, -2)))
        M2 = matmul(M, T)
        if max(abs(e) for row in M2 for e in row) > _MAX_ENTRY:
            continue
        try:
            cand = make_group(chars, glues, H.label)
        except TfError:
            continue
        if group_equal(H, cand, T=T):
            H, M = cand, M2
    return H, M


def conjugate_presentations(G: TfGroup, seed: int, count: int = 3):
    """The group itself plus `count` seeded conjugate presentations.

    Each entry is (H, M) with x -> x @ M carrying G onto H.
    """
    rng = random.Random(seed)
    out = [(G, identity_int(G.rank))]
    for _ in range(count):
        out.append(random_conjugate(G, rng))
    return out


# -- seeded composites -------------------------------------------------------------


@dataclass(frozen=True)
class Assembly:
    """A seeded composite group with its construction record."""

    group: TfGroup
    plain: TfGroup
    atoms: tuple[TfGroup, ...]
    atom_classes: tuple[QuotientClass, ...]
    atom_si: tuple[bool, ...]
    certificate: list
    expected_class: QuotientClass


_RANK1_CHARS = (
    Characteristic.zero(),
    Characteristic.from_pieces([(PrimeSet.residue_class(1, 4), INF)]),
    Characteristic.from_pieces([(PrimeSet.residue_class(3, 4), INF)]),
    Characteristic.from_pieces([(PrimeSet.of(2), INF)]),
    Characteristic.from_pieces([(PrimeSet.residue_class(1, 3), 1)]),
    Characteristic.from_pieces([(PrimeSet.of(3), 2), (PrimeSet.of(7), 1)]),
)


@functools.lru_cache(maxsize=1)
def _atom_pool() -> tuple[tuple[TfGroup, QuotientClass, bool, bool], ...]:
    """(group, class, is si, carries glue) for every available atom kind."""
    pool = [(rank_one(ch, label=f"line{k}"), QuotientClass.FQ, True, False)
            for k, ch in enumerate(_RANK1_CHARS)]
    for p in (5, 7, 11):
        pool.append((acd_indecomposable(p), QuotientClass.FQ, False, True))
    pool.append((witness_rq(2), QuotientClass.RQ, True, True))
    pool.append((witness_rq(3), QuotientClass.RQ, True, True))
    pool.append((witness_dq(2, q=5), QuotientClass.DQ, True, True))
    pool.append((witness_dq(2, q=11), QuotientClass.DQ, True, True))
    return tuple(pool)


def random_group(
    seed: int,
    max_rank: int = 6,
    glue_budget: int = 3,
    class_target: QuotientClass | None = None,
    conjugate: bool = True,
) -> Assembly:
    """Deterministic composite: shuffled direct sum of pool atoms.

    The emitted group is an optionally conjugated presentation of the sum;
    the certificate maps the plain sum onto it.  Ground-truth records come
    straight from the construction.
    """
    rng = random.Random(seed)
    pool = list(_atom_pool())
    if class_target is not None:
        pool = [e for e in pool if e[1] <= class_target]
    chosen: list[tuple[TfGroup, QuotientClass, bool, bool]] = []
    rank = glued = 0
    want = rng.randint(1, 4)
    for _ in range(32):
        if len(chosen) >= want or rank >= max_rank:
            break
        g, cls, si, has_glue = rng.choice(pool)
        if rank + g.rank > max_rank or (has_glue and glued >= glue_budget):
            continue
        chosen.append((g, cls, si, has_glue))
        rank += g.rank
        glued += has_glue
    if class_target is not None and not any(c[1] == class_target for c in chosen):
        for g, cls, si, has_glue in pool:
            if cls == class_target:
                chosen.append((g, cls, si, has_glue))
                break
    if not chosen:
        chosen = [(rank_one(_RANK1_CHARS[0], label="line0"), QuotientClass.FQ, True, False)]
    rng.shuffle(chosen)
    atoms = tuple(g for g, _, _, _ in chosen)
    plain = direct_sum(*atoms, label=f"rand{seed}")
    if conjugate and rng.random() < 0.75:
        group, cert = random_conjugate(plain, rng)
    else:
        group, cert = plain, identity_int(plain.rank)
    return Assembly(
        group=group,
        plain=plain,
        atoms=atoms,
        atom_classes=tuple(c for _, c, _, _ in chosen),
        atom_si=tuple(s for _, _, s, _ in chosen),
        certificate=cert,
        expected_class=max((c for _, c, _, _ in chosen), default=QuotientClass.FQ),
    )
