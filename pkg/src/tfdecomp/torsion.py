"""Torsion quotients relative to the coordinate range.

The range of a group G on Q^n is the completely decomposable subgroup
R = (e_1)_* + ... + (e_n)_* cut out by the coordinate frame; G/R is a
torsion group because both sides have full rank.  Its structure is
reported as a profile with three layers:

  * exact cyclic parts at finitely many primes,
  * symbolic families (P, k, m), one copy of Z(p^k)^m for every p in an
    infinite prime set P,
  * Prufer parts where chain glue makes the quotient divisible.

Family layers are computed once per cell with the prime treated as a
generic unknown; primes where a division performed along the way could
be invalid are moved to the exact layer, so nothing is ever sampled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from tfdecomp.arith import is_inf, primitive_vector, pval
from tfdecomp.errors import NotABasis, OracleUndecided
from tfdecomp.exactla import hnf_basis, invariant_factors, inv_q, qmat, rank_q
from tfdecomp.groups import TfGroup
from tfdecomp.localdata import (
    _cell_echelon,
    _cell_slack,
    _depth,
    _divisible_rows,
    _finite_gen_rows,
    _glue_cols,
    _hat,
    _ppow,
    _reduce_with_coeffs,
    _zero_div,
    cells,
    element_height_at,
    local_data,
)
from tfdecomp.monomial import ExcSet
from tfdecomp.primesets import PrimeSet


class QuotientClass(enum.IntEnum):
    """Coarse class of a torsion quotient, ordered FQ < RQ < DQ."""

    FQ = 0
    RQ = 1
    DQ = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class TorsionProfile:
    """Structure of G/range as finite, family and Prufer layers.

    finite_parts: ((p, (k_1 >= k_2 >= ...)), ...) meaning sum of Z(p^k_j).
    family_parts: ((P, k, m), ...) meaning Z(p^k)^m for every p in P.
    prufer_parts: ((p, m), ...) meaning Z(p^inf)^m.
    """

    finite_parts: tuple[tuple[int, tuple[int, ...]], ...] = ()
    family_parts: tuple[tuple[PrimeSet, int, int], ...] = ()
    prufer_parts: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        for p, exps in self.finite_parts:
            if not exps or any(k < 1 for k in exps):
                raise ValueError(f"finite part at {p} needs exponents >= 1")
        if len({p for p, _ in self.finite_parts}) != len(self.finite_parts):
            raise ValueError("finite part primes must be distinct")
        for P, k, m in self.family_parts:
            if P.is_finite:
                raise ValueError("family part over a finite prime set")
            if k < 1 or m < 1:
                raise ValueError("family part needs k >= 1 and m >= 1")
        for p, m in self.prufer_parts:
            if m < 1:
                raise ValueError(f"Prufer part at {p} needs multiplicity >= 1")

    @property
    def is_trivial(self) -> bool:
        return not (self.finite_parts or self.family_parts or self.prufer_parts)

    @property
    def is_finite(self) -> bool:
        return not (self.family_parts or self.prufer_parts)

    @property
    def has_divisible(self) -> bool:
        return bool(self.prufer_parts)


def class_of_profile(t: TorsionProfile) -> QuotientClass:
    if t.prufer_parts:
        return QuotientClass.DQ
    if t.family_parts:
        return QuotientClass.RQ
    return QuotientClass.FQ


def range_of(G: TfGroup) -> TfGroup:
    """The completely decomposable subgroup spanned purely by the frame."""
    label = None if G.label is None else f"{G.label}.range"
    return TfGroup(tuple(G.chars), (), label=label)


# -- generic Smith normal form over monomial entries --------------------------
#
# Entries are Laurent polynomials in the cell prime, stored as maps
# exponent -> nonzero Fraction.  The generic valuation is the least
# exponent; it is the true valuation at every cell prime not dividing the
# coefficient sitting there, which is why every coefficient ever produced
# is deposited into the exception set.

_LP = dict[int, Fraction]


def _lp_mono(e: int, c: Fraction) -> _LP:
    return {e: c} if c else {}


def _lp_val(a: _LP) -> int | None:
    return min(a) if a else None


def _lp_shift(a: _LP, d: int) -> _LP:
    return {e + d: c for e, c in a.items()}


def _lp_mul(a: _LP, b: _LP) -> _LP:
    out: _LP = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = ea + eb
            c = out.get(e, Fraction(0)) + ca * cb
            if c:
                out[e] = c
            elif e in out:
                del out[e]
    return out


def _lp_sub(a: _LP, b: _LP) -> _LP:
    out = dict(a)
    for e, c in b.items():
        d = out.get(e, Fraction(0)) - c
        if d:
            out[e] = d
        elif e in out:
            del out[e]
    return out


def _generic_snf_exponents(M: list[list[_LP]], exc: ExcSet) -> list[int]:
    """Valuations of the invariant factors of M at a generic cell prime.

    M must be square and generically nonsingular.  Row and column
    operations only ever multiply by polynomials of valuation zero whose
    leading coefficient has been recorded, so the result is exact at
    every cell prime outside the exception set.
    """
    size = len(M)
    W = [[dict(a) for a in row] for row in M]
    for row in W:
        for a in row:
            for c in a.values():
                exc.add_frac(c)
    rows = set(range(size))
    cols = set(range(size))
    out: list[int] = []
    while rows:
        best: tuple[int, int, int] | None = None
        for i in sorted(rows):
            for j in sorted(cols):
                v = _lp_val(W[i][j])
                if v is not None and (best is None or (v, i, j) < best):
                    best = (v, i, j)
        if best is None:
            raise AssertionError("relative lattice matrix lost rank")
        v, pi, pj = best
        piv = W[pi][pj]
        u = _lp_shift(piv, -v)
        for r in rows:
            if r == pi or not W[r][pj]:
                continue
            w = _lp_shift(W[r][pj], -v)
            for c in cols:
                W[r][c] = _lp_sub(_lp_mul(u, W[r][c]), _lp_mul(w, W[pi][c]))
                for cf in W[r][c].values():
                    exc.add_frac(cf)
            if W[r][pj]:
                raise AssertionError("pivot column did not clear")
        for c in cols:
            if c == pj or not W[pi][c]:
                continue
            w = _lp_shift(W[pi][c], -v)
            for r in rows:
                W[r][c] = _lp_sub(_lp_mul(u, W[r][c]), _lp_mul(w, W[r][pj]))
                for cf in W[r][c].values():
                    exc.add_frac(cf)
        out.append(v)
        rows.remove(pi)
        cols.remove(pj)
    return out


# -- per-cell quotient structure ----------------------------------------------


def _cell_relative_exponents(
    G: TfGroup, idx: int, mod_rows: list[tuple[int, tuple[Fraction, ...]]], exc: ExcSet
) -> list[int]:
    """Invariant exponents of (cell module of G) / (module of mod_rows).

    mod_rows are monomials (exponent, vector) with div coordinates
    already zeroed; they must generate a full-rank submodule of the cell
    module at a generic cell prime.
    """
    ech, exc0 = _cell_echelon(G, idx)
    exc.update(exc0)
    if len(mod_rows) != len(ech):
        raise AssertionError("relative cell computation needs equal ranks")
    M: list[list[_LP]] = []
    for e, w in mod_rows:
        coeffs, clean = _reduce_with_coeffs(ech, w, exc)
        if not clean:
            raise AssertionError("modulus row leaves the cell module")
        row = [_lp_mono(e - f, c) for c, (f, _, _) in zip(coeffs, ech)]
        if min((_lp_val(a) for a in row if a), default=0) < 0:
            raise AssertionError("modulus lattice exceeds the cell module")
        M.append(row)
    return _generic_snf_exponents(M, exc)


def _ambient_cell_mod_rows(G: TfGroup, idx: int) -> list[tuple[int, tuple[Fraction, ...]]]:
    cell = cells(G)[0][idx]
    n = G.rank
    rows = []
    for i in cell.fin:
        e = [Fraction(0)] * n
        e[i] = Fraction(1)
        rows.append((-int(cell.heights[i]), tuple(e)))
    return rows


# -- exact local structure at one prime ---------------------------------------


def _local_level(G: TfGroup, p: int, extra_depth: int) -> int:
    ld = local_data(G, p)
    hmax = max([0] + [abs(int(h)) for h in ld.heights if not is_inf(h)])
    return _depth(p, _glue_cols(ld)) + 2 * hmax + extra_depth + 2


def _relative_invariants(G: TfGroup, p: int, mod_rows: list[list[Fraction]], level: int) -> list[int]:
    """Exponents of the p-part of (local module of G) / (mod_rows module)."""
    ld = local_data(G, p)
    if not ld.fin:
        return []
    rows_g = _finite_gen_rows(G, p, level)
    hat_g = [_hat(ld, r) for r in rows_g]
    hat_m = [_hat(ld, r) for r in mod_rows]
    D = max(_depth(p, hat_g + hat_m), level)

    def integerize(rows: list[list[Fraction]]) -> list[list[int]]:
        out = []
        for row in rows:
            # denominators coprime to p are units and do not move the lattice
            unit = 1
            for c in row:
                unit = unit * c.denominator // gcd(unit, c.denominator)
            unit //= p ** pval(unit, p)
            scaled = [c * unit * p**D for c in row]
            if any(c.denominator != 1 for c in scaled):
                raise AssertionError("hat lattice rows must clear to integers")
            out.append([int(c) for c in scaled])
        return out

    BG = hnf_basis(integerize(hat_g))
    BM = hnf_basis(integerize(hat_m))
    if len(BM) != len(BG) or len(BG) != len(ld.fin):
        raise AssertionError("relative local lattices must have full rank")
    Gi = inv_q(qmat(BG))
    exps = []
    X: list[list[int]] = []
    for row in BM:
        img = [sum(Fraction(row[t]) * Gi[t][j] for t in range(len(row))) for j in range(len(row))]
        if any(c.denominator != 1 for c in img):
            raise AssertionError("modulus lattice leaves the group locally")
        X.append([int(c) for c in img])
    for d in invariant_factors(X):
        # only the p-part belongs to this prime; any other factor of the
        # index is accounted for at its own prime
        e = pval(abs(d), p)
        if e >= 1:
            exps.append(e)
    return sorted(exps, reverse=True)


def _ambient_local_mod_rows(G: TfGroup, p: int, level: int) -> list[list[Fraction]]:
    # the range plus every chain to the same depth as the group side
    ld = local_data(G, p)
    n = G.rank
    rows: list[list[Fraction]] = []
    for i in ld.fin:
        e = [Fraction(0)] * n
        e[i] = _ppow(p, -int(ld.heights[i]))
        rows.append(e)
    for alpha in ld.chains:
        for m in range(1, level + 1):
            rows.append([Fraction(a.residue(m)) * _ppow(p, -m) for a in alpha])
    return rows


# -- profile assembly ----------------------------------------------------------


def _emit_family(parts: list, primes: PrimeSet, drop: list[int], exps: list[int]) -> None:
    kept = [a for a in exps if a >= 1]
    if not kept:
        return
    P = primes
    for q in drop:
        P = P.without(q)
    for a in sorted(set(kept), reverse=True):
        parts.append((P, a, kept.count(a)))


def _ambient_profile(G: TfGroup) -> TorsionProfile:
    cls, explicit = cells(G)
    cell_out: list[tuple[int, list[int], ExcSet]] = []
    exact: set[int] = set(explicit)
    for idx, cell in enumerate(cls):
        if not cell.fams:
            continue
        exc = ExcSet()
        exps = _cell_relative_exponents(G, idx, _ambient_cell_mod_rows(G, idx), exc)
        cell_out.append((idx, exps, exc))
        exact |= {q for q in exc.primes if q in cell.primes}
    fam_parts: list[tuple[PrimeSet, int, int]] = []
    for idx, exps, _ in cell_out:
        cell = cls[idx]
        drop = sorted(q for q in exact if q in cell.primes)
        _emit_family(fam_parts, cell.primes, drop, exps)
    fin_parts: list[tuple[int, tuple[int, ...]]] = []
    pruf_parts: list[tuple[int, int]] = []
    for p in sorted(exact):
        ld = local_data(G, p)
        if not ld.glue and not ld.chains:
            continue
        level = _local_level(G, p, 0)
        exps = _relative_invariants(G, p, _ambient_local_mod_rows(G, p, level), level)
        if exps:
            fin_parts.append((p, tuple(exps)))
        if ld.chains:
            pruf_parts.append((p, len(ld.chains)))
    return TorsionProfile(tuple(fin_parts), tuple(fam_parts), tuple(pruf_parts))


def _check_basis(G: TfGroup, basis) -> list[list[int]]:
    n = G.rank
    rows = [[Fraction(c) for c in b] for b in basis]
    if len(rows) != n:
        raise NotABasis(f"expected {n} vectors, got {len(rows)}")
    if any(len(r) != n for r in rows):
        raise NotABasis("basis vectors must live in the ambient space")
    if any(not any(r) for r in rows):
        raise NotABasis("zero vector in a basis")
    if n and rank_q(qmat(rows)) < n:
        raise NotABasis("basis vectors are dependent")
    for r in rows:
        if not G.contains(r):
            raise NotABasis("basis vector outside the group")
    return [list(primitive_vector(r)) for r in rows]


def _is_monomial(rows: list[list[int]]) -> bool:
    return all(sum(1 for c in r if c) == 1 for r in rows)


def _basis_profile(G: TfGroup, prim: list[list[int]]):
    """(profile or None, divisible-overflow flag) for a non-coordinate basis."""
    n = G.rank
    cls, explicit = cells(G)
    exact: set[int] = set(explicit)
    for r in prim:
        for c in r:
            e = ExcSet()
            e.add_frac(Fraction(c))
            exact |= e.primes
    cell_out: list[tuple[int, list[int]]] = []
    overflow = False
    for idx, cell in enumerate(cls):
        exc = ExcSet()
        slacks = [_cell_slack(G, idx, [Fraction(c) for c in b], exc) for b in prim]
        if any(s is None for s in slacks):
            raise AssertionError("cell module must contain every integer vector")
        inf_rows = sum(1 for s in slacks if is_inf(s))
        if inf_rows < len(cell.div):
            # the quotient picks up a divisible summand at every cell prime
            overflow = True
            exact |= {q for q in exc.primes if q in cell.primes}
            continue
        mod_rows = [
            (-int(s), _zero_div([Fraction(c) for c in b], cell.div))
            for s, b in zip(slacks, prim)
            if not is_inf(s)
        ]
        exps = _cell_relative_exponents(G, idx, mod_rows, exc)
        cell_out.append((idx, exps))
        exact |= {q for q in exc.primes if q in cell.primes}
    if overflow:
        return None, True
    fam_parts: list[tuple[PrimeSet, int, int]] = []
    for idx, exps in cell_out:
        cell = cls[idx]
        drop = sorted(q for q in exact if q in cell.primes)
        _emit_family(fam_parts, cell.primes, drop, exps)
    fin_parts: list[tuple[int, tuple[int, ...]]] = []
    pruf_parts: list[tuple[int, int]] = []
    for p in sorted(exact):
        ld = local_data(G, p)
        if any(not all(a.exact for a in alpha) for alpha in ld.chains):
            raise OracleUndecided(
                "torsion profile relative to a non-coordinate basis needs exact chain data",
                group=G,
            )
        heights = []
        for b in prim:
            h, ok = element_height_at(G, p, [Fraction(c) for c in b])
            if not ok:
                raise OracleUndecided(
                    f"height of a basis vector at {p} is precision limited", group=G
                )
            heights.append(h)
        div = _divisible_rows(G, p)
        inf_rows = sum(1 for h in heights if is_inf(h))
        m = (rank_q(qmat(div)) if div else 0) - inf_rows
        if m < 0:
            raise AssertionError("more infinite basis heights than divisible directions")
        fin_heights = [int(h) for h in heights if not is_inf(h)]
        level = _local_level(G, p, max(fin_heights, default=0))
        mod_rows: list[list[Fraction]] = []
        for b, h in zip(prim, heights):
            d = level if is_inf(h) else int(h)
            mod_rows.append([Fraction(c) * _ppow(p, -d) for c in b])
        for w in div:
            mod_rows.append([Fraction(c) * _ppow(p, -level) for c in w])
        exps = _relative_invariants(G, p, mod_rows, level)
        if exps:
            fin_parts.append((p, tuple(exps)))
        if m:
            pruf_parts.append((p, m))
    return TorsionProfile(tuple(fin_parts), tuple(fam_parts), tuple(pruf_parts)), False


def torsion_profile(G: TfGroup, basis=None) -> TorsionProfile:
    """Exact structure of G divided by the range of the given basis.

    Raises OracleUndecided when the quotient has divisible summands at
    infinitely many primes; such a quotient has no finite profile.
    """
    if basis is None or G.rank == 0:
        return _ambient_profile(G)
    prim = _check_basis(G, basis)
    if _is_monomial(prim):
        return _ambient_profile(G)
    profile, overflow = _basis_profile(G, prim)
    if overflow:
        raise OracleUndecided(
            "quotient has divisible summands at infinitely many primes", group=G
        )
    return profile


def classify(G: TfGroup, basis=None) -> QuotientClass:
    """Quotient class of G: FQ, RQ or DQ."""
    if basis is None or G.rank == 0:
        return class_of_profile(_ambient_profile(G))
    prim = _check_basis(G, basis)
    if _is_monomial(prim):
        return class_of_profile(_ambient_profile(G))
    profile, overflow = _basis_profile(G, prim)
    if overflow:
        return QuotientClass.DQ
    return class_of_profile(profile)


def range_is_finite_index(G: TfGroup, basis=None) -> bool:
    """Does the range of the basis (default: the frame) have finite index?"""
    if basis is None or G.rank == 0:
        return _ambient_profile(G).is_finite
    prim = _check_basis(G, basis)
    if _is_monomial(prim):
        return _ambient_profile(G).is_finite
    profile, overflow = _basis_profile(G, prim)
    return (not overflow) and profile.is_finite
