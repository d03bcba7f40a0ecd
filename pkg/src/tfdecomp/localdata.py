"""Per-prime structure of represented groups.

A group determines, at every prime p, a Z_(p)-submodule of Q^n.  For the
finitely many primes carrying finite glue, a p-adic chain, or a flagged
exception, that module is handled by exact integer arithmetic (Hermite forms
and modular solving at a provably sufficient depth).  All remaining primes
are covered cell by cell: within one cell every coordinate height and every
family-glue membership is constant, so a single computation with the
monomial machinery settles almost all primes at once and deposits the
stragglers into an exception set that is then re-checked explicitly.

Vectors are rows throughout; a transform T acts by x -> x @ T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from tfdecomp.arith import (
    INF,
    factorize,
    is_inf,
    pval,
    primitive_vector,
)
from tfdecomp.chartypes import Characteristic, refine_cells
from tfdecomp.config import CONFIG
from tfdecomp.errors import (
    NotContained,
    NotReduced,
    RankMismatch,
    TfError,
    UnrepresentableSubgroup,
)
from tfdecomp.exactla import (
    det_q,
    hnf_basis,
    inv_q,
    kernel_int,
    kernel_q,
    lattice_index,
    lattice_of_subspace,
    mat_eq,
    qmat,
    rank_q,
    rref,
    solve_mod,
    solve_q,
    transpose,
)
from tfdecomp.groups import (
    FamilyGlue,
    FiniteGlue,
    PruferGlue,
    TfGroup,
    make_group,
    zero_group,
)
from tfdecomp.monomial import (
    ExcSet,
    echelon_monomials,
    reduce_monomial,
    tropical_lattice_basis,
)
from tfdecomp.padics import DerivedPadic, PadicInt, RationalPadic, rational_value
from tfdecomp.primesets import PrimeSet

Vec = list[Fraction]


def _fprimes(n: int) -> set[int]:
    n = abs(int(n))
    return set(factorize(n)) if n > 1 else set()


def _frac_primes(q: Fraction) -> set[int]:
    q = Fraction(q)
    if q == 0:
        return set()
    return _fprimes(q.numerator) | _fprimes(q.denominator)


def _ppow(p: int, e: int) -> Fraction:
    return Fraction(p) ** e


# -- cells and explicit primes --------------------------------------------


@dataclass(frozen=True)
class CellInfo:
    primes: PrimeSet
    heights: tuple
    fams: tuple            # (power, coeffs) pairs active on the cell
    div: tuple[int, ...]   # coordinates with infinite height
    fin: tuple[int, ...]


def cells(G: TfGroup) -> tuple[list[CellInfo], list[int]]:
    """Cell decomposition and the explicitly handled primes, cached."""
    hit = G._cache.get("cells")
    if hit is not None:
        return hit
    fams = G.family_glues()
    explicit: set[int] = set()
    for g in G.finite_glues():
        explicit.add(g.prime)
    for g in G.prufer_glues():
        explicit.add(g.prime)
    for f in fams:
        for a in f.coeffs:
            explicit |= _frac_primes(Fraction(a))
    out: list[CellInfo] = []
    for cell in refine_cells(list(G.chars), [f.primes for f in fams]):
        if cell.primes.is_finite:
            explicit.update(cell.primes.explicit_members())
            continue
        fam_here = tuple(
            (fams[j].power, tuple(Fraction(a) for a in fams[j].coeffs))
            for j, inside in enumerate(cell.in_sets)
            if inside
        )
        div = tuple(i for i, h in enumerate(cell.heights) if is_inf(h))
        fin = tuple(i for i, h in enumerate(cell.heights) if not is_inf(h))
        out.append(CellInfo(cell.primes, cell.heights, fam_here, div, fin))
    res = (out, sorted(explicit))
    G._cache["cells"] = res
    return res


def _cell_gens(G: TfGroup, cell: CellInfo) -> list[tuple[int, tuple[Fraction, ...]]]:
    n = G.rank
    gens = []
    for i in cell.fin:
        e = [Fraction(0)] * n
        e[i] = Fraction(1)
        gens.append((-int(cell.heights[i]), tuple(e)))
    for k, coeffs in cell.fams:
        vec = [Fraction(0) if i in cell.div else Fraction(c) for i, c in enumerate(coeffs)]
        gens.append((-int(k), tuple(vec)))
    return gens


def _cell_echelon(G: TfGroup, idx: int):
    key = ("ech", idx)
    hit = G._cache.get(key)
    if hit is not None:
        return hit
    cell = cells(G)[0][idx]
    exc = ExcSet()
    ech = echelon_monomials(_cell_gens(G, cell), G.rank, exc)
    G._cache[key] = (ech, exc)
    return ech, exc


def _zero_div(x: Vec, div: tuple[int, ...]) -> tuple[Fraction, ...]:
    return tuple(Fraction(0) if i in div else Fraction(c) for i, c in enumerate(x))


def _reduce_with_coeffs(ech, x: tuple[Fraction, ...], exc: ExcSet):
    """Coefficients of x against a monomial echelon basis.

    Returns (coeff list aligned with ech, residual-is-zero).  The t-th entry
    is the rational part c_t of the reduction x = sum c_t p^(-f_t) (p^f_t s_t).
    """
    w = list(x)
    coeffs = [Fraction(0)] * len(ech)
    for t, (f, v, piv) in enumerate(ech):
        c = w[piv]
        if c == 0:
            continue
        exc.add_frac(c)
        exc.add_frac(v[piv])
        ratio = c / v[piv]
        coeffs[t] = ratio
        for i in range(len(w)):
            w[i] -= ratio * v[i]
    return coeffs, not any(w)


def _cell_slack(G: TfGroup, idx: int, x: Vec, exc: ExcSet):
    """Generic membership slack of x on cell idx: x is in the local module
    at almost every cell prime iff slack >= 0; INF means x sits inside the
    divisible directions; None means x is not even in the rational span."""
    cell = cells(G)[0][idx]
    xx = _zero_div(x, cell.div)
    if not any(xx):
        return INF
    ech, exc0 = _cell_echelon(G, idx)
    exc.update(exc0)
    coeffs, clean = _reduce_with_coeffs(ech, xx, exc)
    if not clean:
        return None
    used = [ech[t][0] for t, c in enumerate(coeffs) if c != 0]
    return -max(used) if used else 0


# -- exact local data -------------------------------------------------------


@dataclass
class LocalData:
    p: int
    heights: list
    fin: list[int]
    glue: list[tuple[int, tuple[Fraction, ...]]]
    chains: list[tuple[PadicInt, ...]]


def local_data(G: TfGroup, p: int) -> LocalData:
    key = ("loc", p)
    hit = G._cache.get(key)
    if hit is not None:
        return hit
    heights = [ch.value(p) for ch in G.chars]
    fin = [i for i, h in enumerate(heights) if not is_inf(h)]
    glue: list[tuple[int, tuple[Fraction, ...]]] = []
    for g in G.finite_glues():
        if g.prime == p:
            glue.append((g.power, tuple(Fraction(a) for a in g.coeffs)))
    for g in G.family_glues():
        if p in g.primes:
            glue.append((g.power, tuple(Fraction(a) for a in g.coeffs)))
    chains = [g.alpha for g in G.prufer_glues() if g.prime == p]
    ld = LocalData(p, heights, fin, glue, chains)
    G._cache[key] = ld
    return ld


def _hat(ld: LocalData, x: Vec) -> list[Fraction]:
    return [Fraction(x[i]) * _ppow(ld.p, int(ld.heights[i])) for i in ld.fin]


def _glue_cols(ld: LocalData) -> list[list[Fraction]]:
    cols = []
    for k, coeffs in ld.glue:
        col = [Fraction(coeffs[i]) * _ppow(ld.p, int(ld.heights[i]) - k) for i in ld.fin]
        if any(col):
            cols.append(col)
    return cols


def _depth(p: int, vecs) -> int:
    d = 0
    for v in vecs:
        for c in v:
            val = pval(c, p)
            if not is_inf(val) and val < -d:
                d = -val
    return d


def _chain_cols(ld: LocalData, level: int) -> list[list[Fraction]]:
    """Hat columns of every chain element up to `level`.

    All levels are kept: with nothing but the ambient integer lattice to
    bridge, a single deep column does not generate the shallower ones when
    some height is negative, and the cost is small.
    """
    cols = []
    for alpha in ld.chains:
        for m in range(1, level + 1):
            col = [
                Fraction(alpha[i].residue(m)) * _ppow(ld.p, int(ld.heights[i]) - m)
                for i in ld.fin
            ]
            cols.append(col)
    return cols


def _member_cols(p: int, xh: list[Fraction], cols: list[list[Fraction]]) -> bool:
    """Is xh in Z_(p)^d + sum Z_(p) col?  Exact."""
    E = _depth(p, [xh] + cols)
    if E == 0:
        return True
    mod = p ** E
    d = len(xh)

    def clear(v: list[Fraction]) -> list[int]:
        scaled = [c * mod for c in v]
        den = 1
        for c in scaled:
            den = math.lcm(den, c.denominator)
        # den is prime to p by the choice of E, so it scales by a unit
        return [int(c * den) for c in scaled]

    X = clear(xh)
    if not cols:
        return all(c % mod == 0 for c in X)
    C = [clear(col) for col in cols]
    A = [[C[j][i] for j in range(len(C))] for i in range(d)]
    b = [X[i] % mod for i in range(d)]
    return solve_mod(A, b, mod) is not None


def _chain_level(ld: LocalData, extra_depth: int) -> int:
    hs = [int(h) for h in ld.heights if not is_inf(h)]
    maxh = max([0] + [h for h in hs if h > 0])
    dip = max([0] + [-h for h in hs if h < 0])
    return extra_depth + maxh + dip + 2


def local_member(G: TfGroup, p: int, x: Vec) -> bool:
    """Exact membership of x in the local module at p.  Valid at any prime."""
    ld = local_data(G, p)
    if not ld.fin:
        return True
    xh = _hat(ld, x)
    cols = _glue_cols(ld)
    if ld.chains:
        cols = cols + _chain_cols(ld, _chain_level(ld, _depth(p, [xh] + cols)))
    return _member_cols(p, xh, cols)


# -- membership -------------------------------------------------------------


def contains(G: TfGroup, x: Vec) -> bool:
    n = G.rank
    if len(x) != n:
        raise RankMismatch(f"element has length {len(x)}, group has rank {n}")
    xs = [Fraction(c) for c in x]
    if n == 0 or not any(xs):
        return True
    check: set[int] = set()
    for c in xs:
        if c:
            check |= _fprimes(c.denominator)
    cls, explicit = cells(G)
    for idx, cell in enumerate(cls):
        if all(is_inf(h) or h >= 0 for h in cell.heights):
            continue
        # negative heights (raw scaled forms): the generic obligation bites
        exc = ExcSet()
        slack = _cell_slack(G, idx, xs, exc)
        if slack is None or (not is_inf(slack) and slack < 0):
            return False
        check |= exc.primes
        for c in xs:
            if c:
                check |= _fprimes(c.numerator)
    for p in explicit:
        if any(not is_inf(h) and h < 0 for h in (ch.value(p) for ch in G.chars)):
            check.add(p)
    for p in sorted(check):
        if not local_member(G, p, xs):
            return False
    return True


# -- element heights and types ---------------------------------------------


def _rational_chain_rows(ld: LocalData, n: int) -> list[Vec]:
    # an exact chain is divisibility along a rational line: the union of its
    # level elements differs from Q . alpha by a bounded lattice part
    rows = []
    for alpha in ld.chains:
        vals = [rational_value(a) for a in alpha]
        if all(v is not None for v in vals):
            rows.append([Fraction(v) for v in vals])
    return rows


def _divisible_rows(G: TfGroup, p: int) -> list[Vec]:
    ld = local_data(G, p)
    n = G.rank
    rows = []
    for i, h in enumerate(ld.heights):
        if is_inf(h):
            e = [Fraction(0)] * n
            e[i] = Fraction(1)
            rows.append(e)
    rows.extend(_rational_chain_rows(ld, n))
    return rows


def _span_contains(rows: list[Vec], x: Vec) -> bool:
    if not any(x):
        return True
    if not rows:
        return False
    return solve_q(qmat(transpose(rows)), list(x)) is not None


def element_height_at(G: TfGroup, p: int, x: Vec, cap: int | None = None):
    """(max e with p^-e x in the local module, exactness flag)."""
    xs = [Fraction(c) for c in x]
    if not any(xs):
        return INF, True
    ld = local_data(G, p)
    div = _divisible_rows(G, p)
    if _span_contains(div, xs):
        return INF, True
    streams = any(not all(a.exact for a in alpha) for alpha in ld.chains)
    # a functional vanishing on the divisible span bounds the height
    ann = kernel_q(qmat(div)) if div else [[Fraction(int(i == j)) for j in range(len(xs))] for i in range(len(xs))]
    phi = next(r for r in ann if sum(a * b for a, b in zip(r, xs)) != 0)
    phix = sum(a * b for a, b in zip(phi, xs))
    worst = 0
    for k, coeffs in ld.glue:
        v = sum(Fraction(c) * f for c, f in zip(coeffs, phi))
        val = pval(Fraction(v, p ** k), p)
        if not is_inf(val):
            worst = max(worst, -val)
    for i in ld.fin:
        if phi[i]:
            worst = max(worst, int(ld.heights[i]) - pval(phi[i], p))
    if ld.chains:
        # phi kills the limit of an exact chain, so phi of a level element is
        # a tail term whose valuation is bounded by phi's own denominators
        worst = max(worst, max(0, -min(pval(c, p) for c in phi if c)))
    bound = pval(phix, p) + worst
    if streams:
        bound = max(bound, cap if cap is not None else CONFIG.padic_precision)
    lo = min(
        (int(ld.heights[i]) + pval(xs[i], p))
        for i in range(len(xs))
        if xs[i] and not is_inf(ld.heights[i])
    )
    # x / p^lo is a sum of single-coordinate members, so membership holds
    e = lo
    while e <= bound:
        if local_member(G, p, [c / _ppow(p, e + 1) for c in xs]):
            e += 1
        else:
            return e, True
    if streams:
        return e, False
    raise AssertionError("height exceeded its certified bound")


def element_type(G: TfGroup, x: Vec):
    """(Characteristic of x in G, exactness flag).  x must be nonzero."""
    n = G.rank
    xs = [Fraction(c) for c in x]
    cls, explicit = cells(G)
    pieces: list[tuple[PrimeSet, object]] = []
    extra: set[int] = set(explicit)
    for c in xs:
        if c:
            extra |= _fprimes(c.numerator) | _fprimes(c.denominator)
    cell_pieces = []
    for idx, cell in enumerate(cls):
        exc = ExcSet()
        slack = _cell_slack(G, idx, xs, exc)
        extra |= exc.primes
        cell_pieces.append((cell.primes, INF if (slack is None or is_inf(slack)) else slack))
        if slack is None:
            raise AssertionError("cell module must have full rank")
    exact = True
    for p in sorted(extra):
        h, ok = element_height_at(G, p, xs)
        exact = exact and ok
        pieces.append((PrimeSet.of(p), h))
    char = Characteristic.from_pieces(pieces + cell_pieces, default=0)
    return char, exact


# -- rational span utilities -------------------------------------------------


def _span_basis(rows: list[Vec]) -> list[Vec]:
    live = [list(map(Fraction, r)) for r in rows if any(r)]
    if not live:
        return []
    R, piv = rref(live)
    return [R[i] for i in range(len(piv))]


def _span_eq(A: list[Vec], B: list[Vec]) -> bool:
    ra, rb = rank_q(qmat(A)) if A else 0, rank_q(qmat(B)) if B else 0
    if ra != rb:
        return False
    both = rank_q(qmat(A + B)) if A + B else 0
    return both == ra


def _span_leq(A: list[Vec], B: list[Vec]) -> bool:
    rb = rank_q(qmat(B)) if B else 0
    both = rank_q(qmat(A + B)) if A + B else 0
    return both == rb


def _intersect_spans(A: list[Vec], B: list[Vec], n: int) -> list[Vec]:
    if not A or not B:
        return []
    annA = kernel_q(qmat(A))
    annB = kernel_q(qmat(B))
    stacked = annA + annB
    if not stacked:
        return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    return kernel_q(qmat(stacked))


# -- group equality (with optional rational transform) -----------------------


def _apply_T(v: Vec, T) -> Vec:
    if T is None:
        return list(map(Fraction, v))
    m = len(T[0])
    return [sum(Fraction(v[i]) * T[i][j] for i in range(len(v))) for j in range(m)]


def _finite_gen_rows(G: TfGroup, p: int, level: int) -> list[Vec]:
    """Generators of the local module at p, chains included up to `level`."""
    ld = local_data(G, p)
    n = G.rank
    rows: list[Vec] = []
    for i in ld.fin:
        e = [Fraction(0)] * n
        e[i] = _ppow(p, -int(ld.heights[i]))
        rows.append(e)
    for k, coeffs in ld.glue:
        rows.append([Fraction(c) * _ppow(p, -k) for c in coeffs])
    for alpha in ld.chains:
        for m in range(1, level + 1):
            rows.append([Fraction(a.residue(m)) * _ppow(p, -m) for a in alpha])
    return rows


def _chain_residue_rows(alpha, T, p: int, m: int) -> list[Fraction]:
    v = [Fraction(a.residue(m)) for a in alpha]
    return _apply_T(v, T)


def _same_line(ra: list[Fraction], rb: list[Fraction], p: int, m: int) -> bool:
    """Do two residue rows span the same line mod p^m (up to a unit)?"""
    mod = p ** m

    def norm(r):
        vals = [pval(c, p) for c in r]
        fin = [v for v in vals if not is_inf(v)]
        if not fin:
            return None
        s = min(fin)
        scaled = [c * _ppow(p, -s) for c in r]
        piv = next(i for i, c in enumerate(scaled) if not is_inf(pval(c, p)) and pval(c, p) == 0)
        return scaled, piv

    na, nb = norm(ra), norm(rb)
    if (na is None) != (nb is None):
        return False
    if na is None:
        return True
    (sa, _), (sb, _) = na, nb
    # cross-multiply to avoid division: same line iff sa_i sb_j == sa_j sb_i mod p^m
    for i in range(len(sa)):
        for j in range(i + 1, len(sa)):
            lhs = sa[i] * sb[j] - sa[j] * sb[i]
            if lhs == 0:
                continue
            if pval(lhs, p) < m:
                return False
    return True


def _local_equal(A: TfGroup, B: TfGroup, p: int, T, Ti) -> bool:
    n = A.rank
    ldA, ldB = local_data(A, p), local_data(B, p)
    divA = [_apply_T(r, T) for r in _divisible_rows(A, p)]
    divB = _divisible_rows(B, p)
    if not _span_eq(divA, divB):
        return False
    # inexact chains must pair up as lines
    prec = CONFIG.padic_precision
    inexA = [al for al in ldA.chains if not all(a.exact for a in al)]
    inexB = [al for al in ldB.chains if not all(a.exact for a in al)]
    if len(inexA) != len(inexB):
        return False
    unmatched = list(inexB)
    for al in inexA:
        ra = _chain_residue_rows(al, T, p, prec)
        mcmp = max(1, prec - _depth(p, [ra]) - 1)
        hit = next(
            (bl for bl in unmatched if _same_line(ra, _chain_residue_rows(bl, None, p, prec), p, mcmp)),
            None,
        )
        if hit is None:
            return False
        unmatched.remove(hit)
    level = (
        _depth(p, _glue_cols(ldA)) + _depth(p, _glue_cols(ldB))
        + max([0] + [int(h) for h in ldA.heights + ldB.heights if not is_inf(h)])
        + 2
    )
    for v in _finite_gen_rows(A, p, level):
        if not local_member(B, p, _apply_T(v, T)):
            return False
    for v in _finite_gen_rows(B, p, level):
        if not local_member(A, p, _apply_T(v, Ti)):
            return False
    return True


def group_equal(A: TfGroup, B: TfGroup, T=None) -> bool:
    """Exact equality of (T applied to A) and B as subgroups of Q^n.

    T, when given, is a rational matrix acting on rows: x -> x @ T.  Stream
    chains are compared to the configured precision.
    """
    if A.rank != B.rank:
        return False
    n = A.rank
    if n == 0:
        return True
    Ti = None
    explicit: set[int] = set(cells(A)[1]) | set(cells(B)[1])
    if T is not None:
        T = [[Fraction(c) for c in row] for row in T]
        Ti = inv_q(T)
        for M in (T, Ti):
            for row in M:
                for c in row:
                    explicit |= _frac_primes(c)
    famsA, famsB = A.family_glues(), B.family_glues()
    joint = refine_cells(
        list(A.chars) + list(B.chars),
        [f.primes for f in famsA] + [f.primes for f in famsB],
    )
    for cell in joint:
        if cell.primes.is_finite:
            explicit.update(cell.primes.explicit_members())
            continue
        hA, hB = cell.heights[:n], cell.heights[n:]
        divA_idx = [i for i, h in enumerate(hA) if is_inf(h)]
        divB_idx = [i for i, h in enumerate(hB) if is_inf(h)]
        rowsA = []
        for i in divA_idx:
            e = [Fraction(0)] * n
            e[i] = Fraction(1)
            rowsA.append(_apply_T(e, T))
        rowsB = []
        for i in divB_idx:
            e = [Fraction(0)] * n
            e[i] = Fraction(1)
            rowsB.append(e)
        if not _span_eq(rowsA, rowsB):
            return False
        famA_here = [
            (famsA[j].power, tuple(Fraction(a) for a in famsA[j].coeffs))
            for j, inside in enumerate(cell.in_sets[: len(famsA)])
            if inside
        ]
        famB_here = [
            (famsB[j].power, tuple(Fraction(a) for a in famsB[j].coeffs))
            for j, inside in enumerate(cell.in_sets[len(famsA):])
            if inside
        ]
        exc = ExcSet()
        cellA = CellInfo(cell.primes, hA, tuple(famA_here), tuple(divA_idx), tuple(i for i in range(n) if i not in divA_idx))
        cellB = CellInfo(cell.primes, hB, tuple(famB_here), tuple(divB_idx), tuple(i for i in range(n) if i not in divB_idx))
        echA = echelon_monomials(_cell_gens(A, cellA), n, exc)
        echB = echelon_monomials(_cell_gens(B, cellB), n, exc)
        for e, w in _cell_gens(A, cellA):
            img = _zero_div(_apply_T(list(w), T), cellB.div)
            slack = reduce_monomial(echB, (e, img), exc)
            if slack is None or slack < 0:
                return False
        for e, w in _cell_gens(B, cellB):
            img = _zero_div(_apply_T(list(w), Ti), cellA.div)
            slack = reduce_monomial(echA, (e, img), exc)
            if slack is None or slack < 0:
                return False
        explicit |= exc.primes
    return all(_local_equal(A, B, p, T, Ti) for p in sorted(explicit))


# -- purification ------------------------------------------------------------


@dataclass
class PurePart:
    group: TfGroup
    embedding: list[list[int]]  # rows span the subspace; coordinates of the part
    exact: bool

    @property
    def rank(self) -> int:
        return len(self.embedding)


def _adapted_basis(W: list[Vec], subspaces: list[list[Vec]], n: int) -> list[Vec]:
    """A basis of span(W) containing a basis of every listed subspace.

    Raises UnrepresentableSubgroup when no common adapted basis exists (the
    subspace family is not distributive enough to diagonalize jointly).
    """
    closure: list[list[Vec]] = []

    def key(rows):
        return tuple(tuple(r) for r in _span_basis(rows))

    seen = set()
    queue = [s for s in subspaces if s]
    while queue:
        s = _span_basis(queue.pop())
        if not s or key(s) in seen:
            continue
        seen.add(key(s))
        for other in list(closure):
            inter = _intersect_spans(s, other, n)
            if inter and key(inter) not in seen:
                queue.append(inter)
        closure.append(s)
    closure.sort(key=lambda s: (len(s), key(s)))
    basis: list[Vec] = []

    def in_span(rows, v):
        return _span_contains(rows, v)

    for V in closure:
        have = [b for b in basis if in_span(V, b)]
        need = len(V) - len(have)
        for v in V:
            if need == 0:
                break
            if not in_span(basis, v):
                basis.append(v)
                need -= 1
        if need > 0:
            # V is not spanned by basis vectors available inside it
            raise UnrepresentableSubgroup(
                "divisible directions cannot be simultaneously aligned"
            )
    for v in W:
        if not _span_contains(basis, v):
            basis.append(v)
    for V in closure:
        inside = [b for b in basis if in_span(V, b)]
        if len(inside) != len(V) or not _span_eq(inside, V):
            raise UnrepresentableSubgroup(
                "divisible directions cannot be simultaneously aligned"
            )
    return basis


def _stream_chain_pullback(alpha, U, div_rows: list[Vec], p: int):
    """A chain in part coordinates whose image tracks alpha modulo the
    divisible span, scaled by the p-power needed to keep it p-integral.

    None when alpha provably leaves span(U) + span(div_rows) p-adically; the
    failing congruence is exact, so a None is a certificate.
    """
    prec = CONFIG.padic_precision
    r, n = len(U), len(U[0])
    gens: list[tuple[int | None, list[Fraction]]] = []
    for a, u in enumerate(U):
        gens.append((a, [Fraction(c) for c in u]))
    for drow in div_rows:
        gens.append((None, [Fraction(c) for c in drow]))
    # maximal independent subset, part rows first so the chain lands on them
    R: list[tuple[int | None, list[Fraction]]] = []
    for tag, row in gens:
        if any(row) and not _span_contains([g[1] for g in R], row):
            R.append((tag, row))
    Rm = [row for _, row in R]
    gram = [[sum(a * b for a, b in zip(x, y)) for y in Rm] for x in Rm]
    inv = inv_q(gram)
    # pseudo[i][a]: coefficient of R[a] in the least-squares expression of e_i
    pseudo = [
        [sum(Rm[b][i] * inv[b][a] for b in range(len(R))) for a in range(len(R))]
        for i in range(n)
    ]
    s = 0
    for row in pseudo:
        for c in row:
            v = pval(c, p)
            if not is_inf(v) and v < -s:
                s = -v
    den = 1
    for _, row in gens:
        for c in row:
            den = math.lcm(den, c.denominator)
    if den % p == 0:
        raise AssertionError("divisible rows must be p-integral at p")
    for m in sorted({s + 2, max(prec // 2, s + 2), max(prec, s + 2)}):
        mod = p ** m
        A = [[int(row[i] * den) % mod for _, row in gens] for i in range(n)]
        b = [alpha[i].residue(m - s) * p ** s % mod for i in range(n)]
        if solve_mod(A, b, mod) is None:
            return None
    beta: list[PadicInt] = []
    for a in range(r):
        col = next((idx for idx, (tag, _) in enumerate(R) if tag == a), None)
        if col is None:
            beta.append(RationalPadic(p, 0))
            continue
        terms = []
        for i in range(n):
            c = pseudo[i][col] * p ** s
            if c:
                terms.append((c, alpha[i]))
        beta.append(DerivedPadic(p, terms) if terms else RationalPadic(p, 0))
    return tuple(beta)


def _explicit_sub_lattice(
    G: TfGroup, p: int, U, off_div: list[int], chain_betas: list[tuple]
):
    """Rows spanning {y supported on off_div : y @ U in M_p}, exactly.

    Returned rows are rational with p-power denominators only.  chain_betas
    are the inherited chains in part coordinates; the lattice grows along
    them forever, so stabilization is tested modulo their level elements.
    """
    ld = local_data(G, p)
    r = len(U)
    if not ld.fin or not off_div:
        rows = []
        for j in off_div:
            e = [Fraction(0)] * r
            e[j] = Fraction(1)
            rows.append(e)
        return rows
    heights = [int(ld.heights[i]) for i in ld.fin]
    glue_cols = _glue_cols(ld)

    def integerize(vec: list[Fraction]) -> list[int]:
        out = []
        for c in vec:
            if c.denominator != 1:
                raise AssertionError("entry not cleared to an integer")
            out.append(int(c))
        return out

    def lattice_at(N: int):
        level = _chain_level(ld, N)
        cols = glue_cols + _chain_cols(ld, level)
        D0 = max(N + max([0] + [-h for h in heights]), _depth(p, cols)) + 1
        mod = p ** D0
        rows_m1 = []
        for j in off_div:
            hatu = _hat(ld, [Fraction(c) for c in U[j]])
            rows_m1.append(integerize([c * _ppow(p, D0 - N) for c in hatu]))
        rows_b = [integerize([c * mod for c in col]) for col in cols]
        fincount = len(ld.fin)
        stacked = (
            rows_m1
            + [[-c for c in row] for row in rows_b]
            + [[-(mod if i == j else 0) for j in range(fincount)] for i in range(fincount)]
        )
        ker = kernel_int(transpose(stacked))
        proj = [row[: len(off_div)] for row in ker]
        proj = [row for row in proj if any(row)]
        return hnf_basis(proj) if proj else []

    def chain_zrows(m: int) -> list[list[int]]:
        return [[int(beta[j].residue(m)) for j in off_div] for beta in chain_betas]

    N = max([0] + [h for h in heights if h > 0]) + sum(k for k, _ in ld.glue) + 3
    cur = lattice_at(N)
    while True:
        nxt = lattice_at(N + 1)
        expect = [[p * c for c in row] for row in cur] + chain_zrows(N + 1)
        expect = hnf_basis([row for row in expect if any(row)]) if any(any(r) for r in expect) else []
        if mat_eq(expect, nxt):
            break
        cur = nxt
        N += 1
        if N > 4 * CONFIG.padic_precision + 200:
            raise AssertionError("local lattice failed to stabilize")
    rows = []
    for zrow in cur:
        y = [Fraction(0)] * r
        for pos, j in enumerate(off_div):
            y[j] = Fraction(zrow[pos], p ** N)
        rows.append(y)
    return rows


def purify(G: TfGroup, span_rows: list[Vec], label: str | None = None) -> PurePart:
    """The pure subgroup [span] intersect G, with its own coordinates and an
    integer embedding matrix whose rows express those coordinates in G."""
    n = G.rank
    for row in span_rows:
        if len(row) != n:
            raise RankMismatch("span row length differs from the ambient rank")
    if "raw" in G.flags or not all(ch.is_nonnegative() for ch in G.chars):
        raise NotReduced("purification requires a fully reduced group")
    W = _span_basis([[Fraction(c) for c in row] for row in span_rows])
    r = len(W)
    if r == 0:
        return PurePart(zero_group(label), [], True)
    U0 = lattice_of_subspace([primitive_vector(row) for row in W], n)
    cls, explicit = cells(G)
    # only infinite prime families force basis alignment: depth there lives in
    # the characteristics, while a tower at a single prime can always be
    # re-expressed as chain glue on whatever basis comes out
    subspaces: list[list[Vec]] = []
    for cell in cls:
        D = []
        for i in cell.div:
            e = [Fraction(0)] * n
            e[i] = Fraction(1)
            D.append(e)
        V = _intersect_spans(W, D, n)
        if V:
            subspaces.append(V)
    adapted = _adapted_basis(W, subspaces, n)
    U = [primitive_vector(b) for b in adapted]
    # index of Z-span(U) inside the saturated lattice flags extra primes
    C = [solve_q(qmat(transpose(U0)), list(map(Fraction, u))) for u in U]
    d = abs(det_q(qmat(C)))
    explicitH = set(explicit) | _frac_primes(Fraction(d))
    exact = True
    piece_rows: list[list[tuple[PrimeSet, object]]] = [[] for _ in range(r)]
    cell_piece_rows: list[list[tuple[PrimeSet, object]]] = [[] for _ in range(r)]
    glues: list[tuple] = []
    for idx, cell in enumerate(cls):
        exc = ExcSet()
        heights_here = []
        for j in range(r):
            slack = _cell_slack(G, idx, list(map(Fraction, U[j])), exc)
            heights_here.append(INF if (slack is None or is_inf(slack)) else slack)
        # joint divisibilities of the part on this cell, beyond the axes
        ech, exc0 = _cell_echelon(G, idx)
        exc.update(exc0)
        A = []
        for j in range(r):
            xx = _zero_div(list(map(Fraction, U[j])), cell.div)
            coeffs, clean = _reduce_with_coeffs(ech, xx, exc)
            if not clean:
                raise AssertionError("cell echelon must span the finite part")
            A.append(coeffs)
        exps = [f for f, _, _ in ech]
        basisY = tropical_lattice_basis(A, exps, exc) if any(any(row) for row in A) else []
        for g, v in basisY:
            if g >= 0:
                continue
            y = solve_q(qmat(transpose(A)), list(v))
            if y is None:
                raise AssertionError("tropical basis row left the image")
            w = primitive_vector(y)
            i0 = next(i for i, c in enumerate(w) if c)
            exc.add_frac(Fraction(y[i0]) / w[i0])
            if sum(1 for c in w if c) == 1:
                continue  # single-coordinate rows are height information
            glues.append(("fam", cell.primes, -g, tuple(w)))
        for j in range(r):
            cell_piece_rows[j].append((cell.primes, heights_here[j]))
        explicitH |= exc.primes
    # explicit primes: exact heights, inherited chains, then the lattice
    for p in sorted(explicitH):
        ld = local_data(G, p)
        div_p = _divisible_rows(G, p)
        Vdiv = _intersect_spans(W, div_p, n)
        off_div = [j for j in range(r) if not _span_contains(Vdiv, list(map(Fraction, U[j])))]
        for j in range(r):
            h, ok = element_height_at(G, p, list(map(Fraction, U[j])))
            exact = exact and ok
            piece_rows[j].append((PrimeSet.of(p), h))
        betas: list[tuple] = []
        # divisible directions of the part beyond its own rows become exact
        # chains in part coordinates
        covered = [list(map(Fraction, U[j])) for j in range(r) if j not in set(off_div)]
        for v in Vdiv:
            vv = list(map(Fraction, v))
            if _span_contains(covered, vv):
                continue
            beta = solve_q(qmat(transpose(U)), vv)
            if beta is None:
                raise AssertionError("divisible direction left the part span")
            s = max([0] + [-pval(c, p) for c in beta if c])
            beta_p = tuple(RationalPadic(p, c * _ppow(p, s)) for c in beta)
            betas.append(beta_p)
            glues.append(("pru", p, beta_p))
            covered.append(vv)
        for alpha in ld.chains:
            if all(rational_value(a) is not None for a in alpha):
                continue  # exact chains are covered by the divisible span above
            beta = _stream_chain_pullback(alpha, U, div_p, p)
            if beta is None:
                continue  # provably not inherited; bounded part caught below
            betas.append(beta)
            glues.append(("pru", p, beta))
            exact = False
        rows = _explicit_sub_lattice(G, p, U, off_div, betas)
        for y in rows:
            v = min((pval(c, p) for c in y if c), default=0)
            if is_inf(v) or v >= 0:
                continue
            coeffs = [c * _ppow(p, -v) for c in y]
            if any(c.denominator != 1 for c in coeffs):
                raise AssertionError("sub-lattice rows must be p-monomial")
            glues.append(("fin", p, -v, tuple(int(c) for c in coeffs)))
    chars = []
    for j in range(r):
        chars.append(Characteristic.from_pieces(piece_rows[j] + cell_piece_rows[j], default=0))
    glue_objs = []
    for item in glues:
        if item[0] == "fam":
            _, ps, k, coeffs = item
            drop = [p for p in explicitH if p in ps]
            ps = ps.without(*drop)
            if ps.is_empty:
                continue
            if ps.is_finite:
                for p in ps.explicit_members():
                    glue_objs.append(FiniteGlue(p, k, coeffs))
                continue
            glue_objs.append(FamilyGlue(ps, k, coeffs))
        elif item[0] == "fin":
            _, p, k, coeffs = item
            glue_objs.append(FiniteGlue(p, k, coeffs))
        else:
            _, p, beta = item
            glue_objs.append(PruferGlue(p, beta))
    H = make_group(chars, glue_objs, label)
    return PurePart(H, [list(u) for u in U], exact)


# -- purity and indices -------------------------------------------------------


def is_pure(G: TfGroup, H: TfGroup, emb: list[list[int]]) -> bool:
    """Is the image of H (embedded by rows emb) a pure subgroup of G?

    Requires the embedding to already be a subgroup embedding.
    """
    P = purify(G, [list(map(Fraction, row)) for row in emb])
    if P.rank != H.rank:
        return False
    Tr = [solve_q(qmat(transpose(P.embedding)), list(map(Fraction, row))) for row in emb]
    if any(t is None for t in Tr):
        return False
    return group_equal(H, P.group, T=Tr)


def _part_local_rows(H: TfGroup, emb, p: int, level: int) -> list[Vec]:
    return [_apply_T(v, emb) for v in _finite_gen_rows(H, p, level)]


def index_of_parts(G: TfGroup, parts: list[tuple[TfGroup, list[list[int]]]]):
    """[G : sum of the embedded parts], a positive int or INF.

    Raises NotContained when some part is not inside G.
    """
    n = G.rank
    if n == 0:
        return 1
    embs = [[[Fraction(c) for c in row] for row in emb] for _, emb in parts]
    stacked = [row for emb in embs for row in emb]
    if not stacked or rank_q(qmat(stacked)) < n:
        return INF
    explicit: set[int] = set(cells(G)[1])
    for (H, _), emb in zip(parts, embs):
        explicit |= set(cells(H)[1])
        for row in emb:
            for c in row:
                explicit |= _frac_primes(c)
    all_chars = list(G.chars)
    offsets = []
    fam_sets = [f.primes for f in G.family_glues()]
    fam_owner = [(-1, f) for f in G.family_glues()]
    for pi, (H, _) in enumerate(parts):
        offsets.append(len(all_chars))
        all_chars.extend(H.chars)
        for f in H.family_glues():
            fam_sets.append(f.primes)
            fam_owner.append((pi, f))
    joint = refine_cells(all_chars, fam_sets)
    for cell in joint:
        if cell.primes.is_finite:
            explicit.update(cell.primes.explicit_members())
            continue
        hG = cell.heights[:n]
        divG_idx = [i for i, h in enumerate(hG) if is_inf(h)]
        finG_idx = tuple(i for i in range(n) if i not in divG_idx)
        famG_here = []
        famS_here = [[] for _ in parts]
        for (owner, f), inside in zip(fam_owner, cell.in_sets):
            if not inside:
                continue
            entry = (f.power, tuple(Fraction(a) for a in f.coeffs))
            if owner < 0:
                famG_here.append(entry)
            else:
                famS_here[owner].append(entry)
        cellG = CellInfo(cell.primes, hG, tuple(famG_here), tuple(divG_idx), finG_idx)
        exc = ExcSet()
        gensG = _cell_gens(G, cellG)
        echG = echelon_monomials(gensG, n, exc)
        # the parts' generators on this cell, mapped into G coordinates
        gensS: list[tuple[int, tuple[Fraction, ...]]] = []
        divS_rows: list[Vec] = []
        for pi, ((H, _), emb) in enumerate(zip(parts, embs)):
            off = offsets[pi]
            hH = cell.heights[off : off + H.rank]
            for j, h in enumerate(hH):
                img = _apply_T(
                    [Fraction(int(t == j)) for t in range(H.rank)], emb
                )
                if is_inf(h):
                    divS_rows.append(img)
                else:
                    gensS.append((-int(h), tuple(img)))
            for k, coeffs in famS_here[pi]:
                img = _apply_T(list(coeffs), emb)
                gensS.append((-int(k), tuple(img)))
        divG_rows = []
        for i in divG_idx:
            e = [Fraction(0)] * n
            e[i] = Fraction(1)
            divG_rows.append(e)
        if not _span_leq(divS_rows, divG_rows):
            raise NotContained("a divisible direction of the sum leaves the group")
        if not _span_eq(divS_rows, divG_rows):
            return INF
        from tfdecomp.monomial import reduce_monomial

        gensS = [(e, _zero_div(list(w), cellG.div)) for e, w in gensS]
        for e, w in gensS:
            slack = reduce_monomial(echG, (e, w), exc)
            if slack is None or slack < 0:
                raise NotContained("a summand generator leaves the group on a cell")
        echS = echelon_monomials(gensS, n, exc)
        if len(echS) < len(echG):
            return INF
        # the generic cell index is p^(sum f_G - sum f_S) at every cell prime,
        # so anything but exponent 0 makes the total infinite
        eC = sum(f for f, _, _ in echS) - sum(f for f, _, _ in echG)
        if eC > 0:
            return INF
        if eC < 0:
            raise AssertionError("summand lattice exceeds the group on a cell")
        explicit |= exc.primes
    total = 1
    for p in sorted(explicit):
        e = _local_index_at(G, parts, embs, p)
        if is_inf(e):
            return INF
        total *= p ** e
    return total


def _local_index_at(G: TfGroup, parts, embs, p: int):
    n = G.rank
    ldG = local_data(G, p)
    divG = _divisible_rows(G, p)
    divS: list[Vec] = []
    chainsS: list[list[Fraction]] = []
    prec = CONFIG.padic_precision
    for (H, _), emb in zip(parts, embs):
        ldH = local_data(H, p)
        for row in _divisible_rows(H, p):
            divS.append(_apply_T(row, emb))
        for alpha in ldH.chains:
            if not all(a.exact for a in alpha):
                chainsS.append(_chain_residue_rows(alpha, emb, p, prec))
    if not _span_leq(divS, divG):
        raise NotContained(f"divisible directions at {p} leave the group")
    if not _span_eq(divS, divG):
        return INF
    inexG = [al for al in ldG.chains if not all(a.exact for a in al)]
    un = list(chainsS)
    for al in inexG:
        ra = _chain_residue_rows(al, None, p, prec)
        hit = next((rb for rb in un if _same_line(ra, rb, p, prec - 1)), None)
        if hit is None:
            return INF
        un.remove(hit)
    if un:
        raise NotContained(f"a p-adic chain at {p} leaves the group")
    if not ldG.fin:
        return 0
    level = 0
    for (H, _), emb in zip(parts, embs):
        ldH = local_data(H, p)
        level = max(level, _depth(p, _glue_cols(ldH)))
        level = max(level, max([0] + [abs(int(h)) for h in ldH.heights if not is_inf(h)]))
    level += _depth(p, _glue_cols(ldG)) + max(
        [0] + [abs(int(h)) for h in ldG.heights if not is_inf(h)]
    ) + 2
    rowsS: list[Vec] = []
    for (H, _), emb in zip(parts, embs):
        rowsS.extend(_part_local_rows(H, emb, p, level))
    rowsG = _finite_gen_rows(G, p, level)
    # one common scale for both lattices, else the index picks up p factors
    hatS = [_hat(ldG, row) for row in rowsS]
    hatG = [_hat(ldG, row) for row in rowsG]
    D = max(_depth(p, hatS + hatG), level)

    def integerize(rows):
        out = []
        for row in rows:
            scaled = [c * p ** D for c in row]
            if any(c.denominator != 1 for c in scaled):
                raise AssertionError("hat lattice rows must clear to integers")
            out.append([int(c) for c in scaled])
        return out

    BS = hnf_basis(integerize(hatS))
    BG = hnf_basis(integerize(hatG))
    if len(BS) < len(BG):
        return INF
    idx = lattice_index(BS, BG)
    if idx is None:
        raise NotContained(f"summand lattice at {p} leaves the group")
    return pval(idx, p)


def index_in(sub: TfGroup, sup: TfGroup):
    """[sup : sub] for two groups on the same ambient space."""
    if sub.rank != sup.rank:
        raise RankMismatch("index requires equal ambient ranks")
    n = sub.rank
    ident = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    return index_of_parts(sup, [(sub, ident)])


# -- split correction ---------------------------------------------------------


def _local_in_part(P: PurePart, p: int, x: Vec) -> bool:
    emb = [[Fraction(c) for c in row] for row in P.embedding]
    y = solve_q(qmat(transpose(emb)), list(map(Fraction, x)))
    return y is not None and local_member(P.group, p, y)


def _obstruction_level(G: TfGroup, parts: list[TfGroup], p: int, idx) -> int:
    level = pval(idx, p) + 2
    for H in [G] + parts:
        ld = local_data(H, p)
        level += _depth(p, _glue_cols(ld))
        level += max([0] + [abs(int(h)) for h in ld.heights if not is_inf(h)])
    return level


def _graph_rows(G: TfGroup, A: PurePart, B: PurePart, idx) -> list[Vec] | None:
    """Rows of the A span shifted into the B span so that the shifted pure
    hull absorbs the local generators the plain sum misses.

    The shift is assembled one obstruction prime at a time and made integral
    away from that prime by a unit congruent to one modulo a deep enough
    p power, so fixing one prime cannot disturb another."""
    n = G.rank
    spanA = [[Fraction(c) for c in row] for row in A.embedding]
    spanB = [[Fraction(c) for c in row] for row in B.embedding]
    ra = len(spanA)
    full = qmat(transpose(spanA + spanB))
    shift = [[Fraction(0)] * n for _ in range(ra)]
    hit = False
    for p in sorted(_fprimes(idx)):
        level = _obstruction_level(G, [A.group, B.group], p, idx)
        cmat: list[Vec] = []
        wmat: list[Vec] = []
        for g in _finite_gen_rows(G, p, level):
            y = solve_q(full, list(g))
            if y is None:
                raise AssertionError("parts of a finite index split must span")
            gv = [sum(y[i] * spanA[i][j] for i in range(ra)) for j in range(n)]
            gw = [g[j] - gv[j] for j in range(n)]
            if _local_in_part(A, p, gv) and _local_in_part(B, p, gw):
                continue
            cv = [Fraction(c) for c in y[:ra]]
            if rank_q(qmat(cmat + [cv])) == len(cmat):
                continue  # dependent direction, absorbed up to a sum member
            cmat.append(cv)
            wmat.append(gw)
        if not cmat:
            continue
        for k in range(ra):
            e = [Fraction(int(i == k)) for i in range(ra)]
            if rank_q(qmat(cmat + [e])) > len(cmat):
                cmat.append(e)
                wmat.append([Fraction(0)] * n)
        cols = []
        for j in range(n):
            col = solve_q(qmat(cmat), [w[j] for w in wmat])
            if col is None:
                return None
            cols.append(col)
        phi = [[cols[j][k] for j in range(n)] for k in range(ra)]
        d = 1
        for row in phi:
            for c in row:
                d = math.lcm(d, c.denominator)
        dp = d // p ** pval(d, p)
        if dp > 1:
            u = dp * pow(dp, -1, p ** (level + 2))
            phi = [[c * u for c in row] for row in phi]
        for k in range(ra):
            for j in range(n):
                shift[k][j] += phi[k][j]
        hit = True
    if not hit:
        return None
    return [[spanA[k][j] + shift[k][j] for j in range(n)] for k in range(ra)]


def corrected_split(G: TfGroup, PL: PurePart, PM: PurePart, idx, rounds: int = 4):
    """Move a finite index pair of pure hulls towards an index one split.

    A quasi-splitting subspace pair is not unique: shifting one side onto
    the graph of a map into the other leaves a valid pair, and the right
    shift absorbs the missed local generators.  Every candidate is
    re-purified and re-indexed, so a returned pair is exactly certified;
    None only means the bounded search gave up.
    """
    for _ in range(rounds):
        if idx == 1:
            return PL, PM
        if is_inf(idx):
            return None
        best = None
        for flip in (False, True):
            A, B = (PM, PL) if flip else (PL, PM)
            rows2 = _graph_rows(G, A, B, idx)
            if rows2 is None:
                continue
            try:
                A2 = purify(G, rows2)
            except TfError:
                continue
            if A2.rank != A.rank:
                continue
            idx2 = index_of_parts(G, [(A2.group, A2.embedding), (B.group, B.embedding)])
            if is_inf(idx2) or idx2 >= idx:
                continue
            best = (((B, A2) if flip else (A2, B)), idx2)
            break
        if best is None:
            return None
        (PL, PM), idx = best
    return (PL, PM) if idx == 1 else None
