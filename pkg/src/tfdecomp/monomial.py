"""Exact linear algebra over the localization Z_(p) with p treated as a
generic prime of a cell.

Scalars are monomials c * p^e with c a nonzero rational: for every prime p
not dividing the numerator or denominator of c, the valuation is exactly e.
Vectors of the form p^e * w (w rational) are closed under the elimination
step used here,

    p^f u  -  (u_i / w_i) p^(f-e) * p^e w  =  p^f (u - (u_i/w_i) w),

so a module generated by monomial vectors has a monomial echelon basis
computable by exact rational arithmetic.  Every division and every claim
"this coefficient is a p-unit" deposits the finitely many primes that could
break it into an exception set; callers re-check those primes explicitly.
Over-recording is harmless, under-recording would be unsound, so recording
is aggressive.
"""

from __future__ import annotations

from fractions import Fraction

from tfdecomp.arith import factorize
from tfdecomp.errors import NotABasis

Mono = tuple[int, tuple[Fraction, ...]]


class ExcSet:
    """Collects primes at which a generic-cell computation may be invalid."""

    __slots__ = ("primes",)

    def __init__(self) -> None:
        self.primes: set[int] = set()

    def add_int(self, n: int) -> None:
        n = abs(int(n))
        if n > 1:
            self.primes.update(factorize(n))

    def add_frac(self, q: Fraction | int) -> None:
        q = Fraction(q)
        if q == 0:
            return
        self.add_int(q.numerator)
        self.add_int(q.denominator)

    def add_vec(self, w) -> None:
        for c in w:
            self.add_frac(c)

    def update(self, other: "ExcSet") -> None:
        self.primes.update(other.primes)


def mono(e: int, w) -> Mono:
    return (e, tuple(Fraction(c) for c in w))


def mono_nonzero(m: Mono) -> bool:
    return any(m[1])


def echelon_monomials(
    gens: list[Mono], ncols: int, exc: ExcSet
) -> list[tuple[int, tuple[Fraction, ...], int]]:
    """Echelon basis of the Z_(p)-module generated by monomial vectors.

    Returns (exponent, vector, pivot column) triples with distinct pivots, in
    the order chosen (ascending exponent, so pivots are minimal-valuation).
    The module equals the span of the returned monomials at every prime of
    the cell outside the exception set.
    """
    work = [m for m in gens if mono_nonzero(m)]
    out: list[tuple[int, tuple[Fraction, ...], int]] = []
    while work:
        e, w = min(work, key=lambda m: (m[0], [(c.numerator, c.denominator) for c in m[1]]))
        work.remove((e, w))
        piv = next(i for i, c in enumerate(w) if c)
        exc.add_frac(w[piv])
        out.append((e, w, piv))
        nxt: list[Mono] = []
        for f, u in work:
            if u[piv]:
                exc.add_frac(u[piv])
                ratio = u[piv] / w[piv]
                u = tuple(a - ratio * b for a, b in zip(u, w))
            if any(u):
                nxt.append((f, u))
        work = nxt
    return out


def reduce_monomial(
    ech: list[tuple[int, tuple[Fraction, ...], int]],
    x: Mono,
    exc: ExcSet,
) -> int | None:
    """Reduce x against an echelon basis; None if x is not even in the span.

    Returns the membership slack: min over used pivots of
    (exponent of x) - (pivot exponent), so x lies in the module at a generic
    cell prime iff slack >= 0.  Exact valuations of the coefficients actually
    used are claimed generic, with their primes recorded.
    """
    e, w = x
    w = list(w)
    slack: int | None = 10**9
    for f, v, piv in ech:
        c = w[piv]
        if c == 0:
            continue
        exc.add_frac(c)
        exc.add_frac(v[piv])
        slack = min(slack, e - f)
        ratio = c / v[piv]
        for i in range(len(w)):
            w[i] -= ratio * v[i]
    if any(w):
        return None
    return 0 if slack == 10**9 else slack


def module_rank(ech) -> int:
    return len(ech)


def tropical_lattice_basis(
    rows: list[list[Fraction]], exps: list[int], exc: ExcSet
) -> list[Mono]:
    """Monomial basis of V intersect L, where V = row span of `rows` inside
    Q^T and L = direct sum of p^exps[t] Z_(p) over the coordinates.

    Method: reduced row echelon over Q with the coordinates visited in order
    of decreasing exponent and pivots normalized to 1.  A pivot row w with
    pivot at coordinate t then satisfies: p^exps[t] * w has valuation
    >= exps[j] at every later coordinate j generically, and the collection
    spans the intersection because the pivot coordinates of any member have
    valuations at least their own exponents.
    """
    T = len(exps)
    order = sorted(range(T), key=lambda t: (-exps[t], t))
    R = [list(map(Fraction, r)) for r in rows if any(r)]
    pivots: list[tuple[int, int]] = []  # (row index, column)
    r = 0
    for col in order:
        piv = next((i for i in range(r, len(R)) if R[i][col] != 0), None)
        if piv is None:
            continue
        R[r], R[piv] = R[piv], R[r]
        exc.add_frac(R[r][col])
        inv = 1 / R[r][col]
        R[r] = [inv * c for c in R[r]]
        for i in range(len(R)):
            if i != r and R[i][col] != 0:
                coef = R[i][col]
                R[i] = [a - coef * b for a, b in zip(R[i], R[r])]
        pivots.append((r, col))
        r += 1
        if r == len(R):
            break
    for i in range(r, len(R)):
        if any(R[i]):
            raise NotABasis("echelon missed a nonzero row")
    out: list[Mono] = []
    for i, col in pivots:
        for c in R[i]:
            exc.add_frac(c)
        out.append((exps[col], tuple(R[i])))
    return out
