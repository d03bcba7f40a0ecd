"""Characteristics (height functions on all primes) and type comparisons.

A characteristic is stored as a finite partition of the primes into PrimeSet
cells, one cell per distinct height.  Heights live in Z union {INF}; negative
values are legal (they appear when a frame is rescaled) even though group
data entered by a user normally stays nonnegative.

Because the cells form a partition with exactly one cell per height, two
characteristics are equal as functions iff their piece lists coincide, and
the piece list doubles as a hashable fingerprint.

Type-level comparisons (equality and order up to finite differences with
finite values) reduce to finiteness checks on cell intersections.
"""

from __future__ import annotations

from dataclasses import dataclass

from tfdecomp.arith import INF, Height, height_key, hmax, hmin, hshift, is_inf
from tfdecomp.errors import BadPrime
from tfdecomp.primesets import PrimeSet


def _canonical(buckets: dict, drop_empty: bool = True) -> tuple:
    items = [(ps, h) for h, ps in buckets.items() if not (drop_empty and ps.is_empty)]
    items.sort(key=lambda it: height_key(it[1]))
    return tuple(items)


@dataclass(frozen=True)
class Characteristic:
    pieces: tuple[tuple[PrimeSet, Height], ...]

    # -- construction --------------------------------------------------

    @staticmethod
    def constant(h: Height) -> "Characteristic":
        return Characteristic(((PrimeSet.all_primes(), h),))

    @staticmethod
    def zero() -> "Characteristic":
        return Characteristic.constant(0)

    @staticmethod
    def from_pieces(items: list[tuple[PrimeSet, Height]], default: Height = 0) -> "Characteristic":
        """First matching piece wins; uncovered primes get the default."""
        claimed = PrimeSet.none()
        buckets: dict[Height, PrimeSet] = {}
        for ps, h in items:
            eff = ps - claimed
            if not eff.is_empty:
                buckets[h] = buckets.get(h, PrimeSet.none()) | eff
            claimed = claimed | ps
        rest = ~claimed
        if not rest.is_empty:
            buckets[default] = buckets.get(default, PrimeSet.none()) | rest
        return Characteristic(_canonical(buckets))

    # -- queries --------------------------------------------------------

    def value(self, p: int) -> Height:
        for ps, h in self.pieces:
            if p in ps:
                return h
        raise BadPrime(f"{p} (is it prime?) not covered by characteristic")

    def heights(self) -> list[Height]:
        return [h for _, h in self.pieces]

    def infinite_part(self) -> PrimeSet:
        for ps, h in self.pieces:
            if is_inf(h):
                return ps
        return PrimeSet.none()

    def support(self) -> PrimeSet:
        """Primes with nonzero height."""
        out = PrimeSet.none()
        for ps, h in self.pieces:
            if h != 0:
                out = out | ps
        return out

    def negative_part(self) -> PrimeSet:
        out = PrimeSet.none()
        for ps, h in self.pieces:
            if not is_inf(h) and h < 0:
                out = out | ps
        return out

    def is_nonnegative(self) -> bool:
        return all(is_inf(h) or h >= 0 for _, h in self.pieces)

    def sort_key(self) -> tuple:
        return tuple((ps.sort_key(), height_key(h)) for ps, h in self.pieces)

    def __repr__(self) -> str:
        body = ", ".join(f"{ps!r}:{h}" for ps, h in self.pieces)
        return f"Char[{body}]"

    # -- rewriting -------------------------------------------------------

    def with_value(self, p: int, h: Height) -> "Characteristic":
        return Characteristic.from_pieces([(PrimeSet.of(p), h)] + list(self.pieces))

    def shift_at(self, deltas: dict[int, int]) -> "Characteristic":
        """Add deltas[p] to the height at each prime p (INF absorbs)."""
        out = self
        for p, d in sorted(deltas.items()):
            out = out.with_value(p, hshift(out.value(p), d))
        return out

    def _pointwise(self, other: "Characteristic", op) -> "Characteristic":
        buckets: dict[Height, PrimeSet] = {}
        for ps1, h1 in self.pieces:
            for ps2, h2 in other.pieces:
                cell = ps1 & ps2
                if cell.is_empty:
                    continue
                h = op(h1, h2)
                buckets[h] = buckets.get(h, PrimeSet.none()) | cell
        return Characteristic(_canonical(buckets))

    def meet(self, other: "Characteristic") -> "Characteristic":
        return self._pointwise(other, hmin)

    def join(self, other: "Characteristic") -> "Characteristic":
        return self._pointwise(other, hmax)


# -- type-level comparisons ---------------------------------------------


def char_equal(a: Characteristic, b: Characteristic) -> bool:
    return a.pieces == b.pieces


def type_equal(a: Characteristic, b: Characteristic) -> bool:
    """Equal up to finitely many primes, with finite values wherever they
    differ."""
    for ps1, h1 in a.pieces:
        for ps2, h2 in b.pieces:
            if h1 == h2:
                continue
            cell = ps1 & ps2
            if cell.is_empty:
                continue
            if not cell.is_finite:
                return False
            if is_inf(h1) or is_inf(h2):
                return False
    return True


def type_leq(a: Characteristic, b: Characteristic) -> bool:
    """a <= b up to finitely many violations, each with a(p) finite."""
    for ps1, h1 in a.pieces:
        for ps2, h2 in b.pieces:
            if height_key(h1) <= height_key(h2):
                continue
            cell = ps1 & ps2
            if cell.is_empty:
                continue
            if not cell.is_finite or is_inf(h1):
                return False
    return True


def type_meet(a: Characteristic, b: Characteristic) -> Characteristic:
    return a.meet(b)


def type_join(a: Characteristic, b: Characteristic) -> Characteristic:
    return a.join(b)


def type_fingerprint(a: Characteristic) -> tuple:
    """Invariant of the type class: the pieces after squashing finite cells
    and finite height differences cannot be read off directly, so we keep
    (infinite cells with their heights) which IS a type invariant: changing
    finitely many finite values never moves an infinite cell."""
    inf_pieces = []
    for ps, h in a.pieces:
        if not ps.is_finite:
            # strip the finite corrections: they are type-irrelevant unless
            # the height is infinite
            core = PrimeSet(ps.modulus, ps.residues)
            inf_pieces.append((core.sort_key(), height_key(h)))
    inf_primes = a.infinite_part()
    return (tuple(sorted(inf_pieces)), inf_primes.sort_key())


# -- common refinement ---------------------------------------------------


@dataclass(frozen=True)
class Cell:
    """A refinement cell: heights of every coordinate are constant on it,
    and membership in every extra set is constant on it."""

    primes: PrimeSet
    heights: tuple[Height, ...]
    in_sets: tuple[bool, ...]


def refine_cells(
    chars: list[Characteristic], extra_sets: list[PrimeSet] = ()
) -> list[Cell]:
    """Partition all primes so each characteristic and each extra set is
    constant per part.  Deterministic order."""
    cells: list[tuple[PrimeSet, tuple]] = [(PrimeSet.all_primes(), ())]
    for ch in chars:
        nxt = []
        for ps, vec in cells:
            for piece, h in ch.pieces:
                cut = ps & piece
                if not cut.is_empty:
                    nxt.append((cut, vec + (h,)))
        cells = nxt
    tagged: list[tuple[PrimeSet, tuple, tuple]] = [(ps, vec, ()) for ps, vec in cells]
    for xs in extra_sets:
        nxt2 = []
        for ps, vec, tags in tagged:
            inside = ps & xs
            outside = ps - xs
            if not inside.is_empty:
                nxt2.append((inside, vec, tags + (True,)))
            if not outside.is_empty:
                nxt2.append((outside, vec, tags + (False,)))
        tagged = nxt2
    out = [Cell(ps, vec, tags) for ps, vec, tags in tagged]
    out.sort(key=lambda c: c.primes.sort_key())
    return out
