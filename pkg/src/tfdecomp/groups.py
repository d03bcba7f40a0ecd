"""The central group representation: a completely decomposable frame (one
characteristic per ambient coordinate) extended by glue data.

A TfGroup of rank n lives on ambient Q^n with basis v_1..v_n.  Its elements
are generated by

  * the frame: all x * v_i with v_p(x) >= -chars[i](p) at every prime, and
  * glue elements:
      FiniteGlue(p, k, a)   adjoins p^-k * sum(a_i v_i)
      FamilyGlue(P, k, a)   adjoins p^-k * sum(a_i v_i) for every p in P
      PruferGlue(p, alpha)  adjoins p^-m * sum((alpha_i mod p^m) v_i) for all m

Groups built through make_group are canonical: heights are the true
divisibilities of the coordinate axes (so each axis line is pure), no glue is
supported on a single coordinate, ineffective glue is gone, and family sets
are shrunk to where they act.  Internal operations (scale_by in particular)
may produce raw forms with negative heights and rational glue coefficients;
all semantic operations accept those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from tfdecomp.arith import (
    INF,
    Height,
    factorize,
    frac_mod,
    is_inf,
    is_prime,
    pval,
)
from tfdecomp.chartypes import Characteristic
from tfdecomp.errors import (
    BadGlue,
    BadPrime,
    NotABasis,
    NotMember,
    RankMismatch,
    UnrepresentableSubgroup,
    ZeroElement,
    ZeroScalar,
)
from tfdecomp.exactla import det_q, qmat, solve_q, transpose
from tfdecomp.padics import PadicInt, RationalPadic, rational_value, scale as pscale
from tfdecomp.primesets import PrimeSet

Vector = list[Fraction]


@dataclass(frozen=True)
class FiniteGlue:
    prime: int
    power: int
    coeffs: tuple[Fraction | int, ...]

    def element(self) -> Vector:
        d = Fraction(1, self.prime ** self.power)
        return [Fraction(a) * d for a in self.coeffs]

    def sort_key(self) -> tuple:
        return (0, self.prime, self.power, tuple(Fraction(a) for a in self.coeffs))


@dataclass(frozen=True)
class FamilyGlue:
    primes: PrimeSet
    power: int
    coeffs: tuple[Fraction | int, ...]

    def element_at(self, p: int) -> Vector:
        d = Fraction(1, p ** self.power)
        return [Fraction(a) * d for a in self.coeffs]

    def sort_key(self) -> tuple:
        return (1, self.primes.sort_key(), self.power, tuple(Fraction(a) for a in self.coeffs))


@dataclass(frozen=True, eq=False)
class PruferGlue:
    prime: int
    alpha: tuple[PadicInt, ...]

    def chain_element(self, m: int) -> Vector:
        d = Fraction(1, self.prime ** m)
        return [a.residue(m) * d for a in self.alpha]

    @property
    def exact(self) -> bool:
        return all(a.exact for a in self.alpha)

    def sort_key(self) -> tuple:
        return (2, self.prime, tuple(a.residue(8) for a in self.alpha))


Glue = FiniteGlue | FamilyGlue | PruferGlue


class TfGroup:
    """Immutable; computed local data is cached on the instance."""

    __slots__ = ("chars", "glues", "label", "flags", "_cache")

    def __init__(
        self,
        chars: tuple[Characteristic, ...],
        glues: tuple[Glue, ...] = (),
        label: str | None = None,
        flags: tuple[str, ...] = (),
    ):
        self.chars = tuple(chars)
        self.glues = tuple(glues)
        self.label = label
        self.flags = tuple(flags)
        self._cache = {}

    @property
    def rank(self) -> int:
        return len(self.chars)

    def char(self, i: int) -> Characteristic:
        return self.chars[i]

    def height(self, i: int, p: int) -> Height:
        return self.chars[i].value(p)

    def finite_glues(self) -> list[FiniteGlue]:
        return [g for g in self.glues if isinstance(g, FiniteGlue)]

    def family_glues(self) -> list[FamilyGlue]:
        return [g for g in self.glues if isinstance(g, FamilyGlue)]

    def prufer_glues(self) -> list[PruferGlue]:
        return [g for g in self.glues if isinstance(g, PruferGlue)]

    @property
    def exact(self) -> bool:
        """False when stream-sourced p-adic data is present."""
        return all(g.exact for g in self.prufer_glues())

    def contains(self, x: list) -> bool:
        from tfdecomp import localdata

        return localdata.contains(self, [Fraction(c) for c in x])

    def with_label(self, label: str) -> "TfGroup":
        g = TfGroup(self.chars, self.glues, label, self.flags)
        g._cache.update(self._cache)
        return g

    def __repr__(self) -> str:
        name = f" {self.label!r}" if self.label else ""
        return f"TfGroup(rank={self.rank}{name}, glues={len(self.glues)})"


def zero_group(label: str | None = None) -> TfGroup:
    return TfGroup((), (), label)


def rank_one(char: Characteristic, label: str | None = None) -> TfGroup:
    return make_group([char], [], label)


def free_group(n: int, label: str | None = None) -> TfGroup:
    return TfGroup(tuple(Characteristic.zero() for _ in range(n)), (), label)


def make_group(
    chars,
    glues=(),
    label: str | None = None,
) -> TfGroup:
    """Validate and canonicalize.  See normalize module for the pipeline."""
    from tfdecomp import normalize

    return normalize.normalized_group(tuple(chars), tuple(glues), label)


def raw_group(chars, glues=(), label=None, flags=("raw",)) -> TfGroup:
    """Internal constructor without canonicalization."""
    return TfGroup(tuple(chars), tuple(glues), label, flags)


# -- direct sums -----------------------------------------------------------


def _shift_glue(g: Glue, offset: int, total: int) -> Glue:
    def pad(vec, zero):
        return tuple([zero] * offset + list(vec) + [zero] * (total - offset - len(vec)))

    if isinstance(g, FiniteGlue):
        return FiniteGlue(g.prime, g.power, pad(g.coeffs, 0))
    if isinstance(g, FamilyGlue):
        return FamilyGlue(g.primes, g.power, pad(g.coeffs, 0))
    zero = RationalPadic(g.prime, 0)
    return PruferGlue(g.prime, pad(g.alpha, zero))


def direct_sum(*groups: TfGroup, label: str | None = None) -> TfGroup:
    groups = [g for g in groups if g.rank > 0]
    if not groups:
        return zero_group(label)
    total = sum(g.rank for g in groups)
    chars: list[Characteristic] = []
    glues: list[Glue] = []
    flags: list[str] = []
    offset = 0
    for g in groups:
        chars.extend(g.chars)
        glues.extend(_shift_glue(gl, offset, total) for gl in g.glues)
        for f in g.flags:
            if f not in flags:
                flags.append(f)
        offset += g.rank
    glues.sort(key=lambda gl: gl.sort_key())
    return TfGroup(tuple(chars), tuple(glues), label, tuple(flags))


# -- scaling ----------------------------------------------------------------


def scale_by(G: TfGroup, r) -> TfGroup:
    """The group rG on the same ambient.  Output is a raw form: heights may
    go negative and glue coefficients may pick up rational unit factors."""
    r = Fraction(r)
    if r == 0:
        raise ZeroScalar("cannot scale a group by 0")
    if r == 1:
        return G
    rfac: dict[int, int] = {}
    for p, e in factorize(r.numerator).items():
        rfac[p] = rfac.get(p, 0) + e
    for p, e in factorize(r.denominator).items():
        rfac[p] = rfac.get(p, 0) - e
    rfac = {p: e for p, e in rfac.items() if e}

    chars = tuple(ch.shift_at({p: -e for p, e in rfac.items()}) for ch in G.chars)

    glues: list[Glue] = []
    for g in G.glues:
        if isinstance(g, FiniteGlue):
            glues.append(_scale_finite(g, r))
        elif isinstance(g, FamilyGlue):
            inside = sorted(p for p in rfac if p in g.primes)
            if inside:
                rest = g.primes.without(*inside)
                for p in inside:
                    glues.append(
                        _scale_finite(FiniteGlue(p, g.power, g.coeffs), r)
                    )
                if not rest.is_empty:
                    glues.append(FamilyGlue(rest, g.power, tuple(Fraction(a) * r for a in g.coeffs)))
            else:
                glues.append(FamilyGlue(g.primes, g.power, tuple(Fraction(a) * r for a in g.coeffs)))
        else:
            p = g.prime
            e = rfac.get(p, 0)
            if e > 0:
                # p^e * (frame + chain) is only frame + chain again when the
                # frame absorbs the carry digits, i.e. e <= every finite height
                # on the chain's support; past that the congruence depth of rG
                # outruns its denominators and no coefficient vector expresses
                # the set on this basis.
                for i, a in enumerate(g.alpha):
                    h = G.chars[i].value(p)
                    if rational_value(a) != 0 and not is_inf(h) and h < e:
                        raise UnrepresentableSubgroup(
                            f"{r} * group has no frame+glue form on this basis: "
                            f"the {p}-adic chain outruns coordinate {i} (height {h} < {e})"
                        )
            unit = r / Fraction(p) ** e
            glues.append(PruferGlue(p, tuple(pscale(a, unit) for a in g.alpha)))
    glues.sort(key=lambda gl: gl.sort_key())
    label = None if G.label is None else f"({G.label})*{r}"
    return TfGroup(chars, tuple(glues), label, ("raw",))


def _scale_finite(g: FiniteGlue, r: Fraction) -> FiniteGlue:
    p = g.prime
    e = pval(r, p)
    unit = r / Fraction(p) ** e
    k = g.power - e
    if k < 1:
        # no p-denominator left: keep power 1 and push the p-part into coeffs
        unit *= Fraction(p) ** (1 - k)
        k = 1
    return FiniteGlue(p, k, tuple(Fraction(a) * unit for a in g.coeffs))


# -- quasi-equality ----------------------------------------------------------


def quasi_equal(G: TfGroup, H: TfGroup):
    """A rational r with scale_by(G, r) = H, or None.

    The candidate is forced by the height differences (a scaling shifts every
    coordinate's height by -v_p(r) at each prime of r); the candidate is then
    verified semantically, so representation drift cannot produce a false
    positive.
    """
    from tfdecomp import localdata

    if G.rank != H.rank:
        raise RankMismatch(f"ranks {G.rank} vs {H.rank}")
    if G.rank == 0:
        return Fraction(1)
    deltas: dict[int, int] = {}
    for i in range(G.rank):
        a, b = G.chars[i], H.chars[i]
        if a.infinite_part() != b.infinite_part():
            return None
        for ps1, h1 in a.pieces:
            for ps2, h2 in b.pieces:
                if h1 == h2:
                    continue
                cell = ps1 & ps2
                if cell.is_empty:
                    continue
                if not cell.is_finite or is_inf(h1) or is_inf(h2):
                    return None
                for p in cell.explicit_members():
                    d = h1 - h2  # v_p(r)
                    if deltas.setdefault(p, d) != d:
                        return None
    r = Fraction(1)
    for p, d in deltas.items():
        r *= Fraction(p) ** d
    T = [[r if i == j else Fraction(0) for j in range(G.rank)] for i in range(G.rank)]
    return r if localdata.group_equal(G, H, T=T) else None


# -- element representation over a basis -------------------------------------


def canonical_rep(G: TfGroup, basis: list[list], a: list) -> tuple[int, tuple[int, ...]]:
    """Write a = (1/k) * sum(n_b * b) with gcd(k, n_1, ..., n_n) = 1."""
    from tfdecomp import localdata

    a = [Fraction(c) for c in a]
    if len(a) != G.rank:
        raise RankMismatch(f"element length {len(a)} vs rank {G.rank}")
    if all(c == 0 for c in a):
        raise ZeroElement("zero element has no canonical representation")
    B = [[Fraction(c) for c in row] for row in basis]
    if len(B) != G.rank or det_q(B) == 0:
        raise NotABasis("basis must be a linearly independent family of full rank")
    for row in B:
        if not localdata.contains(G, row):
            raise NotABasis(f"basis vector {row} lies outside the group")
    if not localdata.contains(G, a):
        raise NotMember(f"{a} is not a member")
    x = solve_q(qmat(transpose(B)), a)
    k = 1
    for c in x:
        k = math.lcm(k, c.denominator)
    coeffs = [int(c * k) for c in x]
    g = k
    for c in coeffs:
        g = math.gcd(g, c)
    return k // g, tuple(c // g for c in coeffs)
