"""Sets of primes closed under Boolean operations, in canonical form.

A PrimeSet is stored as a congruence part plus finite corrections:

    members = {p prime : p does not divide modulus, p % modulus in residues}
              union plus, minus minus

with residues a set of unit classes, `plus` and `minus` finite sets of primes,
plus disjoint from the congruence part, minus contained in it.  The modulus is
reduced to its conductor, so two PrimeSets are semantically equal exactly when
their four fields coincide.  The congruence part is infinite whenever residues
is nonempty (Dirichlet), which makes is_finite trivial to read off.

Modulus 1 encodes "all primes" as residues == {0}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

from tfdecomp.arith import factorize, is_prime, iter_primes, primes_upto
from tfdecomp.errors import BadPrime


def _units(m: int) -> list[int]:
    return [a for a in range(m) if math.gcd(a, m) == 1]


def _reduce_conductor(modulus: int, residues: frozenset[int]) -> tuple[int, frozenset[int]]:
    """Smallest modulus presenting the same union of unit classes."""
    while modulus > 1:
        for q in sorted(factorize(modulus)):
            m2 = modulus // q
            proj: dict[int, bool] = {}
            ok = True
            for a in _units(modulus):
                key = a % m2
                hit = a in residues
                if proj.setdefault(key, hit) != hit:
                    ok = False
                    break
            if ok:
                modulus = m2
                residues = frozenset(k for k, v in proj.items() if v)
                break
        else:
            break
    return modulus, residues


@dataclass(frozen=True)
class PrimeSet:
    modulus: int = 1
    residues: frozenset[int] = frozenset()
    plus: frozenset[int] = frozenset()
    minus: frozenset[int] = frozenset()

    # -- construction ---------------------------------------------------

    @staticmethod
    def _make(modulus: int, residues: frozenset[int], plus: frozenset[int], minus: frozenset[int]) -> "PrimeSet":
        # precondition: residues consists of unit classes mod modulus
        def raw_member(p: int) -> bool:
            if p in minus:
                return False
            if p in plus:
                return True
            return modulus % p != 0 and p % modulus in residues

        exceptional = set(plus) | set(minus) | set(factorize(modulus) if modulus > 1 else ())
        m2, r2 = _reduce_conductor(modulus, frozenset(residues))

        def cong_member(p: int) -> bool:
            return m2 % p != 0 and p % m2 in r2

        plus2 = frozenset(p for p in exceptional if raw_member(p) and not cong_member(p))
        minus2 = frozenset(p for p in exceptional if not raw_member(p) and cong_member(p))
        return PrimeSet(m2, r2, plus2, minus2)

    @staticmethod
    def all_primes() -> "PrimeSet":
        return PrimeSet(1, frozenset({0}))

    @staticmethod
    def none() -> "PrimeSet":
        return PrimeSet(1, frozenset())

    @staticmethod
    def of(*primes: int) -> "PrimeSet":
        for p in primes:
            if not is_prime(p):
                raise BadPrime(f"{p} is not prime")
        return PrimeSet(1, frozenset(), frozenset(primes))

    @staticmethod
    def residue_class(a: int, m: int) -> "PrimeSet":
        """Primes congruent to a mod m."""
        if m < 1:
            raise BadPrime(f"modulus must be >= 1, got {m}")
        a %= m
        if m == 1:
            return PrimeSet.all_primes()
        if math.gcd(a, m) == 1:
            return PrimeSet._make(m, frozenset({a}), frozenset(), frozenset())
        # non-unit class: every member is divisible by gcd(a, m), so at most
        # one prime fits, and only when it is the residue itself
        if a == 0:
            return PrimeSet.of(m) if is_prime(m) else PrimeSet.none()
        if a == math.gcd(a, m) and is_prime(a):
            return PrimeSet.of(a)
        return PrimeSet.none()

    # -- queries ----------------------------------------------------------

    def __contains__(self, p: int) -> bool:
        if p in self.minus:
            return False
        if p in self.plus:
            return True
        if self.modulus % p == 0 or p % self.modulus not in self.residues:
            return False
        return is_prime(p)

    @property
    def is_finite(self) -> bool:
        return not self.residues

    @property
    def is_empty(self) -> bool:
        return not self.residues and not self.plus

    def explicit_members(self) -> list[int]:
        """Sorted members; only valid on finite sets."""
        if not self.is_finite:
            raise ValueError("explicit_members on an infinite PrimeSet")
        return sorted(self.plus)

    def members_upto(self, bound: int) -> list[int]:
        return [p for p in primes_upto(bound) if p in self]

    def iter_members(self) -> Iterator[int]:
        for p in iter_primes():
            if p in self:
                yield p

    def sample(self, k: int) -> list[int]:
        """First k members in increasing order (k capped for finite sets)."""
        out: list[int] = []
        if self.is_finite:
            return self.explicit_members()[:k]
        for p in self.iter_members():
            out.append(p)
            if len(out) == k:
                break
        return out

    def min_member(self) -> int | None:
        if self.is_empty:
            return None
        return self.sample(1)[0]

    def sort_key(self) -> tuple:
        return (self.modulus, tuple(sorted(self.residues)), tuple(sorted(self.plus)), tuple(sorted(self.minus)))

    def __repr__(self) -> str:
        if self.is_empty:
            return "PrimeSet<none>"
        bits = []
        if self.modulus == 1 and self.residues:
            bits.append("all")
        elif self.residues:
            bits.append(f"p%{self.modulus} in {{{','.join(map(str, sorted(self.residues)))}}}")
        if self.plus:
            bits.append("+{" + ",".join(map(str, sorted(self.plus))) + "}")
        if self.minus:
            bits.append("-{" + ",".join(map(str, sorted(self.minus))) + "}")
        return f"PrimeSet<{' '.join(bits)}>"

    # -- Boolean algebra --------------------------------------------------

    def _binary(self, other: "PrimeSet", op) -> "PrimeSet":
        L = math.lcm(self.modulus, other.modulus)

        def cong(ps: "PrimeSet", a: int) -> bool:
            return a % ps.modulus in ps.residues

        residues = frozenset(a for a in _units(L) if op(cong(self, a), cong(other, a)))
        exceptional = (
            set(self.plus) | set(self.minus) | set(other.plus) | set(other.minus)
            | set(factorize(L) if L > 1 else ())
        )
        plus: set[int] = set()
        minus: set[int] = set()
        for p in exceptional:
            here = op(p in self, p in other)
            by_cong = L % p != 0 and p % L in residues
            if here and not by_cong:
                plus.add(p)
            elif not here and by_cong:
                minus.add(p)
        return PrimeSet._make(L, residues, frozenset(plus), frozenset(minus))

    def __or__(self, other: "PrimeSet") -> "PrimeSet":
        return self._binary(other, lambda a, b: a or b)

    def __and__(self, other: "PrimeSet") -> "PrimeSet":
        return self._binary(other, lambda a, b: a and b)

    def __sub__(self, other: "PrimeSet") -> "PrimeSet":
        return self._binary(other, lambda a, b: a and not b)

    def __invert__(self) -> "PrimeSet":
        return PrimeSet.all_primes() - self

    def without(self, *primes: int) -> "PrimeSet":
        return self - PrimeSet.of(*primes)

    def isdisjoint(self, other: "PrimeSet") -> bool:
        return (self & other).is_empty

    def __le__(self, other: "PrimeSet") -> bool:
        return (self - other).is_empty
