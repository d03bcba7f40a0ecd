"""Lazy p-adic integers.

Every value answers residue(m) = the class mod p^m, and residues are coherent
by construction (residue(m) reduces to residue(k) mod p^k for k < m).  Three
sources:

  RationalPadic  an exact rational with denominator prime to p
  StreamPadic    digits drawn from a keyed hash stream; deterministic per
                 (prime, seed) but with no closed form, so equality against
                 other values is never certified
  DerivedPadic   Z_p-linear combination of other values, optionally divided
                 by a unit

Rationals admit exact arithmetic and comparison; anything touching a stream
stays lazy and only ever reveals finitely many digits.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction

from tfdecomp.arith import frac_mod, is_prime, pval
from tfdecomp.errors import BadPrime, ZeroScalar


class PadicInt:
    """Base class; subclasses implement _residue."""

    __slots__ = ("prime",)

    def __init__(self, prime: int):
        if not is_prime(prime):
            raise BadPrime(f"{prime} is not prime")
        self.prime = prime

    def residue(self, m: int) -> int:
        if m < 0:
            raise ValueError("negative precision")
        if m == 0:
            return 0
        r = self._residue(m)
        return r % self.prime ** m

    def _residue(self, m: int) -> int:
        raise NotImplementedError

    def digits(self, m: int) -> list[int]:
        """Base-p digits d_0..d_{m-1}."""
        r = self.residue(m)
        out = []
        for _ in range(m):
            r, d = divmod(r, self.prime)
            out.append(d)
        return out

    def valuation_upto(self, cap: int) -> int | None:
        """Index of the first nonzero digit, or None if zero mod p^cap."""
        r = self.residue(cap)
        if r == 0:
            return None
        return pval(r, self.prime)

    def is_unit(self) -> bool:
        return self.residue(1) != 0

    @property
    def exact(self) -> bool:
        """True when the value has a closed rational form."""
        return False

    def __repr__(self) -> str:
        head = self.digits(8)
        return f"{type(self).__name__}(p={self.prime}, digits={head}...)"


class RationalPadic(PadicInt):
    __slots__ = ("value",)

    def __init__(self, prime: int, value: Fraction | int):
        super().__init__(prime)
        value = Fraction(value)
        if value.denominator % prime == 0:
            raise ZeroScalar(f"{value} is not a p-adic integer at p={prime}")
        self.value = value

    def _residue(self, m: int) -> int:
        return frac_mod(self.value, self.prime ** m)

    @property
    def exact(self) -> bool:
        return True

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, RationalPadic)
            and other.prime == self.prime
            and other.value == self.value
        )

    def __hash__(self) -> int:
        return hash((self.prime, self.value))

    def __repr__(self) -> str:
        return f"RationalPadic(p={self.prime}, {self.value})"


class StreamPadic(PadicInt):
    __slots__ = ("seed", "_digit_cache")

    def __init__(self, prime: int, seed: int):
        super().__init__(prime)
        self.seed = int(seed)
        self._digit_cache: list[int] = []

    def _digit(self, i: int) -> int:
        cache = self._digit_cache
        while len(cache) <= i:
            j = len(cache)
            h = hashlib.sha256(f"{self.seed}:{j}".encode()).digest()
            cache.append(int.from_bytes(h, "big") % self.prime)
        return cache[i]

    def _residue(self, m: int) -> int:
        out = 0
        for i in range(m - 1, -1, -1):
            out = out * self.prime + self._digit(i)
        return out

    def __repr__(self) -> str:
        return f"StreamPadic(p={self.prime}, seed={self.seed})"


class DerivedPadic(PadicInt):
    """sum of c_i * x_i, divided by a unit y if given.

    Coefficients must be p-adic integers themselves (denominator prime to p,
    nonnegative valuation), which keeps every residue exact with no slack.
    """

    __slots__ = ("terms", "divisor")

    def __init__(
        self,
        prime: int,
        terms: list[tuple[Fraction, PadicInt]],
        divisor: PadicInt | None = None,
    ):
        super().__init__(prime)
        norm: list[tuple[Fraction, PadicInt]] = []
        for c, x in terms:
            c = Fraction(c)
            if x.prime != prime:
                raise BadPrime(f"mixed primes {x.prime} vs {prime}")
            if c == 0:
                continue
            if c.denominator % prime == 0:
                raise ZeroScalar(f"coefficient {c} is not a p-adic integer at p={prime}")
            norm.append((c, x))
        if divisor is not None:
            if divisor.prime != prime:
                raise BadPrime(f"mixed primes {divisor.prime} vs {prime}")
            if not divisor.is_unit():
                raise ZeroScalar("division by a non-unit p-adic")
        self.terms = tuple(norm)
        self.divisor = divisor

    def _residue(self, m: int) -> int:
        mod = self.prime ** m
        acc = 0
        for c, x in self.terms:
            acc = (acc + frac_mod(c, mod) * x.residue(m)) % mod
        if self.divisor is not None:
            acc = acc * pow(self.divisor.residue(m), -1, mod) % mod
        return acc

    @property
    def exact(self) -> bool:
        return all(x.exact for _, x in self.terms) and (
            self.divisor is None or self.divisor.exact
        )


def combine(prime: int, terms: list[tuple[Fraction, PadicInt]]) -> PadicInt:
    """Z_p-linear combination, collapsed to a rational when possible.

    Divisor-free derived terms are flattened and repeated atoms have their
    coefficients collected, so differences of the same stream cancel exactly.
    """
    flat: list[tuple[Fraction, PadicInt]] = []
    rat = Fraction(0)

    def push(c: Fraction, x: PadicInt) -> None:
        nonlocal rat
        if c == 0:
            return
        if isinstance(x, RationalPadic):
            rat += c * x.value
        elif isinstance(x, DerivedPadic) and x.divisor is None:
            for cc, xx in x.terms:
                push(c * cc, xx)
        else:
            flat.append((c, x))

    for c, x in terms:
        push(Fraction(c), x)
    acc: dict[int, list] = {}
    order: list[int] = []
    for c, x in flat:
        k = id(x)
        if k in acc:
            acc[k][0] += c
        else:
            acc[k] = [c, x]
            order.append(k)
    out = [(acc[k][0], acc[k][1]) for k in order if acc[k][0] != 0]
    if not out:
        return RationalPadic(prime, rat)
    if rat == 0 and len(out) == 1 and out[0][0] == 1:
        return out[0][1]
    if rat:
        out.append((rat, RationalPadic(prime, 1)))
    return DerivedPadic(prime, out)


def unit_quotient(x: PadicInt, y: PadicInt) -> PadicInt:
    """x / y for unit y."""
    if isinstance(y, RationalPadic):
        if y.value == 0 or y.value.numerator % y.prime == 0:
            raise ZeroScalar("division by a non-unit p-adic")
        return scale(x, 1 / y.value)
    return DerivedPadic(x.prime, [(Fraction(1), x)], divisor=y)


def scale(x: PadicInt, c: Fraction | int) -> PadicInt:
    return combine(x.prime, [(Fraction(c), x)])


class ShiftedPadic(PadicInt):
    """x / p^s for an x known to be divisible by p^s."""

    __slots__ = ("base", "shift")

    def __init__(self, base: PadicInt, shift: int):
        super().__init__(base.prime)
        if shift < 0:
            raise ValueError("negative shift")
        self.base = base
        self.shift = int(shift)

    def _residue(self, m: int) -> int:
        r = self.base.residue(m + self.shift)
        q, rem = divmod(r, self.prime ** self.shift)
        if rem:
            raise ZeroScalar(
                f"value not divisible by {self.prime}^{self.shift}"
            )
        return q

    @property
    def exact(self) -> bool:
        return self.base.exact


def p_shift(x: PadicInt, s: int) -> PadicInt:
    """Exact division by p^s.  The caller must know v_p(x) >= s."""
    if s == 0:
        return x
    if isinstance(x, RationalPadic):
        v = Fraction(x.value, x.prime ** s)
        if v != 0 and v.denominator % x.prime == 0:
            raise ZeroScalar(f"{x.value} not divisible by {x.prime}^{s}")
        return RationalPadic(x.prime, v)
    return ShiftedPadic(x, s)


class ProductPadic(PadicInt):
    __slots__ = ("left", "right")

    def __init__(self, left: PadicInt, right: PadicInt):
        super().__init__(left.prime)
        if left.prime != right.prime:
            raise BadPrime(f"mixed primes {left.prime} vs {right.prime}")
        self.left = left
        self.right = right

    def _residue(self, m: int) -> int:
        return self.left.residue(m) * self.right.residue(m) % self.prime ** m

    @property
    def exact(self) -> bool:
        return self.left.exact and self.right.exact


def pmul(x: PadicInt, y: PadicInt) -> PadicInt:
    if isinstance(x, RationalPadic):
        return scale(y, x.value)
    if isinstance(y, RationalPadic):
        return scale(x, y.value)
    return ProductPadic(x, y)


def rational_value(x: PadicInt) -> Fraction | None:
    """The exact rational value of x, when one is structurally available."""
    if isinstance(x, RationalPadic):
        return x.value
    if isinstance(x, ShiftedPadic):
        v = rational_value(x.base)
        return None if v is None else v / Fraction(x.prime) ** x.shift
    if isinstance(x, ProductPadic):
        a, b = rational_value(x.left), rational_value(x.right)
        return None if a is None or b is None else a * b
    if isinstance(x, DerivedPadic):
        acc = Fraction(0)
        for c, t in x.terms:
            v = rational_value(t)
            if v is None:
                return None
            acc += c * v
        if x.divisor is not None:
            d = rational_value(x.divisor)
            if d is None or d == 0:
                return None
            acc /= d
        return acc
    return None
