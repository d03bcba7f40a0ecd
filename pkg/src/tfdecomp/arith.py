"""Small exact-arithmetic utilities: the infinite height value, p-adic
valuations, factorization with an explicit work bound, prime iteration and
modular arithmetic on rationals."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterator

from tfdecomp.errors import FactorLimit, ZeroScalar


class _Inf:
    """The single infinite height.  Compares above every int, absorbs
    addition, and INF - n stays INF.  INF - INF is undefined."""

    _instance = None

    def __new__(cls) -> "_Inf":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __eq__(self, other: object) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("tfdecomp.INF")

    def __lt__(self, other: object) -> bool:
        return False

    def __le__(self, other: object) -> bool:
        return other is self

    def __gt__(self, other: object) -> bool:
        if isinstance(other, int) or other is self:
            return other is not self
        return NotImplemented

    def __ge__(self, other: object) -> bool:
        if isinstance(other, int) or other is self:
            return True
        return NotImplemented

    def __add__(self, other: object) -> "_Inf":
        if isinstance(other, int) or other is self:
            return self
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other: object) -> "_Inf":
        if other is self:
            raise ArithmeticError("INF - INF is undefined")
        if isinstance(other, int):
            return self
        return NotImplemented

    def __neg__(self) -> "_Inf":
        raise ArithmeticError("-INF is not a height")


INF = _Inf()

# A height: int (possibly negative, for internally scaled frames) or INF.
Height = object


def is_inf(h: Height) -> bool:
    return h is INF


def height_key(h: Height) -> tuple[int, int]:
    """Sort key putting INF above all integers."""
    if h is INF:
        return (1, 0)
    return (0, h)


def hmin(a: Height, b: Height) -> Height:
    if a is INF:
        return b
    if b is INF:
        return a
    return a if a <= b else b


def hmax(a: Height, b: Height) -> Height:
    if a is INF or b is INF:
        return INF
    return a if a >= b else b


def hshift(h: Height, d: int) -> Height:
    """h + d, absorbing on INF."""
    if h is INF:
        return INF
    return h + d


def pval(x: int | Fraction, p: int) -> Height:
    """p-adic valuation.  pval(0, p) is INF."""
    if x == 0:
        return INF
    if isinstance(x, Fraction):
        return pval(x.numerator, p) - pval(x.denominator, p)
    v = 0
    x = abs(x)
    while x % p == 0:
        x //= p
        v += 1
    return v


_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for all 64-bit inputs and reliable
    well beyond (the fixed witness set covers every n < 3.3e24)."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _SMALL_PRIMES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_upto(bound: int) -> list[int]:
    """All primes <= bound (simple sieve)."""
    if bound < 2:
        return []
    sieve = bytearray([1]) * (bound + 1)
    sieve[0] = sieve[1] = 0
    for i in range(2, math.isqrt(bound) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
    return [i for i, b in enumerate(sieve) if b]


def iter_primes() -> Iterator[int]:
    """2, 3, 5, 7, ... without end."""
    yield 2
    for n in itertools.count(3, 2):
        if is_prime(n):
            yield n


def first_primes(k: int) -> list[int]:
    return list(itertools.islice(iter_primes(), k))


# Work bound for trial division: factorize refuses inputs whose unfactored
# part exceeds the square of this many candidate divisors.
FACTOR_TRIAL_BOUND = 10**6


def factorize(n: int) -> dict[int, int]:
    """Prime factorization of |n| as {p: multiplicity}.

    Raises FactorLimit if a cofactor survives trial division up to
    FACTOR_TRIAL_BOUND and is not itself prime: group data with such scalars
    is out of scope and silently mis-factoring would corrupt every height
    downstream.
    """
    if n == 0:
        raise ZeroScalar("cannot factorize 0")
    n = abs(n)
    out: dict[int, int] = {}
    for p in (2, 3, 5):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    d = 7
    # wheel mod 30 offsets
    wheel = (4, 2, 4, 2, 4, 6, 2, 6)
    w = 0
    while d * d <= n and d <= FACTOR_TRIAL_BOUND:
        if n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        else:
            d += wheel[w]
            w = (w + 1) % 8
    if n > 1:
        if d * d > n or is_prime(n):
            out[n] = out.get(n, 0) + 1
        else:
            raise FactorLimit(f"cofactor {n} exceeds the factorization work bound")
    return out


def frac_mod(q: int | Fraction, m: int) -> int:
    """The residue of a rational with denominator coprime to m, in [0, m)."""
    if m <= 0:
        raise ValueError(f"modulus must be positive, got {m}")
    if m == 1:
        return 0
    q = Fraction(q)
    den = q.denominator % m
    if math.gcd(den, m) != 1:
        raise ZeroScalar(f"denominator of {q} is not invertible mod {m}")
    return q.numerator * pow(den, -1, m) % m


def lcm_list(xs: list[int]) -> int:
    out = 1
    for x in xs:
        out = math.lcm(out, x)
    return out


def denominator_lcm(v: list[Fraction]) -> int:
    return lcm_list([Fraction(x).denominator for x in v]) if v else 1


def primitive_vector(v: list[Fraction | int]) -> list[int]:
    """Primitive integer vector parallel to v, leading nonzero entry positive.

    Zero vectors come back unchanged (as integer zeros).
    """
    vf = [Fraction(x) for x in v]
    if all(x == 0 for x in vf):
        return [0] * len(vf)
    d = denominator_lcm(vf)
    w = [int(x * d) for x in vf]
    g = 0
    for x in w:
        g = math.gcd(g, x)
    w = [x // g for x in w]
    if next(x for x in w if x != 0) < 0:
        w = [-x for x in w]
    return w
