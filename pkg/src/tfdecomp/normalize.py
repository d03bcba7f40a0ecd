"""Validation and canonicalization behind `make_group`.

Input is an arbitrary (characteristics, glue list) presentation.  Output is
the same group in reduced form:

  * chain glue in echelon form, single-coordinate chains folded into the
    characteristic as an infinite height,
  * family glue canonicalized cell by cell, with the finitely many primes
    where the generic picture breaks demoted to explicit finite glue,
  * axis heights trued up at every explicitly handled prime,
  * finite glue re-extracted from the local lattice it generates, so that
    equal groups on the same basis produce identical data,
  * ineffective glue dropped (recorded in the group's flags),
  * groups with a divisible subgroup rejected.

Everything here works on one fixed basis.  Basis changes are a separate
concern and never enter normalization.
"""

from __future__ import annotations

import math
from fractions import Fraction

from tfdecomp.arith import INF, factorize, is_inf, is_prime, primitive_vector, pval
from tfdecomp.chartypes import Characteristic, refine_cells
from tfdecomp.config import CONFIG
from tfdecomp.errors import (
    BadGlue,
    BadPrime,
    NotReduced,
    OracleUndecided,
    RankMismatch,
)
from tfdecomp.exactla import hnf_basis
from tfdecomp.groups import FamilyGlue, FiniteGlue, PruferGlue, TfGroup
from tfdecomp.monomial import ExcSet, echelon_monomials, reduce_monomial
from tfdecomp.padics import (
    PadicInt,
    RationalPadic,
    combine,
    p_shift,
    pmul,
    rational_value,
    unit_quotient,
)

Alpha = list[PadicInt]


def normalized_group(
    chars: tuple[Characteristic, ...],
    glues: tuple,
    label: str | None = None,
) -> TfGroup:
    chars = list(chars)
    n = len(chars)
    _check_chars(chars)
    flags: set[str] = set()
    fins, fams, chains = _sort_glues(n, chars, glues, flags)
    if n == 0:
        return TfGroup((), (), label)

    chain_rows = _settle_chains(n, chars, chains, flags)
    out_fams, demoted = _settle_family(n, chars, fams, flags)
    fins = fins + demoted

    base: list = list(out_fams)
    for p in sorted(chain_rows):
        for alpha in chain_rows[p]:
            base.append(PruferGlue(p, tuple(alpha)))

    out_fins = _settle_finite(n, chars, fins, base)

    final = TfGroup(
        tuple(chars),
        tuple(sorted(base + out_fins, key=lambda g: g.sort_key())),
        label,
        tuple(sorted(flags)),
    )
    _check_reduced(final)
    return final


# -- validation ---------------------------------------------------------------


def _check_chars(chars: list) -> None:
    for ch in chars:
        if not isinstance(ch, Characteristic):
            raise BadGlue(f"expected a Characteristic, got {type(ch).__name__}")
        for _, h in ch.pieces:
            if is_inf(h):
                continue
            if not isinstance(h, int) or h < 0:
                raise NotReduced("heights must be nonnegative integers or infinite")


def _int_coeffs(g, n: int) -> list[int]:
    if len(g.coeffs) != n:
        raise RankMismatch(f"glue vector has length {len(g.coeffs)}, rank is {n}")
    out = []
    for c in g.coeffs:
        q = Fraction(c)
        if q.denominator != 1:
            raise BadGlue(f"glue coefficients must be integers, got {c}")
        out.append(int(q))
    return out


def _sort_glues(
    n: int, chars: list[Characteristic], glues, flags: set[str]
) -> tuple[list[FiniteGlue], list[FamilyGlue], list[PruferGlue]]:
    fins: list[FiniteGlue] = []
    fams: list[FamilyGlue] = []
    chains: list[PruferGlue] = []
    prec = CONFIG.padic_precision
    for g in glues:
        if isinstance(g, FiniteGlue):
            if not is_prime(g.prime):
                raise BadPrime(f"{g.prime} is not prime")
            if g.power < 1:
                raise BadGlue("glue power must be at least 1")
            row = _prepare_finite(g.prime, g.power, _int_coeffs(g, n), chars, flags)
            if row is not None:
                fins.append(row)
        elif isinstance(g, FamilyGlue):
            if g.power < 1:
                raise BadGlue("glue power must be at least 1")
            coeffs = _int_coeffs(g, n)
            if not any(coeffs):
                flags.add("ineffective-glue")
                continue
            if g.primes.is_empty:
                flags.add("ineffective-glue")
                continue
            if g.primes.is_finite:
                for q in g.primes.explicit_members():
                    row = _prepare_finite(q, g.power, coeffs, chars, flags)
                    if row is not None:
                        fins.append(row)
                continue
            fams.append(FamilyGlue(g.primes, int(g.power), tuple(coeffs)))
        elif isinstance(g, PruferGlue):
            p = g.prime
            if not is_prime(p):
                raise BadPrime(f"{p} is not prime")
            if len(g.alpha) != n:
                raise RankMismatch(f"chain vector has length {len(g.alpha)}, rank is {n}")
            for a in g.alpha:
                if not isinstance(a, PadicInt):
                    raise BadGlue(f"chain coordinates must be p-adic integers, got {a!r}")
                if a.prime != p:
                    raise BadGlue(f"chain at {p} has a {a.prime}-adic coordinate")
            live = [a for i, a in enumerate(g.alpha) if not is_inf(chars[i].value(p))]
            if all(rational_value(a) == 0 for a in live):
                raise BadGlue(f"chain at {p} is supported on divisible coordinates only")
            if all(a.residue(prec) == 0 for a in live):
                raise BadGlue(f"chain at {p} vanishes to working precision")
            chains.append(g)
        else:
            raise BadGlue(f"unrecognized glue datum {g!r}")
    return fins, fams, chains


def _prepare_finite(
    p: int, k: int, a: list[int], chars: list[Characteristic], flags: set[str]
) -> FiniteGlue | None:
    """Canonical p-free primitive row, or None when the glue adjoins nothing."""
    if not any(a):
        flags.add("ineffective-glue")
        return None
    shift = min(int(pval(c, p)) for c in a if c)
    k = int(k) - shift
    if k <= 0:
        flags.add("ineffective-glue")
        return None
    aa = primitive_vector([c // p**shift for c in a])
    # effective order against the stated heights
    depth = None
    for i, c in enumerate(aa):
        h = chars[i].value(p)
        if c == 0 or is_inf(h):
            continue
        d = int(pval(c, p)) + int(h)
        depth = d if depth is None else min(depth, d)
    if depth is None or k - depth <= 0:
        flags.add("ineffective-glue")
        return None
    return FiniteGlue(p, k, tuple(aa))


# -- chain glue ---------------------------------------------------------------


def _pzero(p: int) -> RationalPadic:
    return RationalPadic(p, 0)


def _collapse(x: PadicInt) -> PadicInt:
    rv = rational_value(x)
    return RationalPadic(x.prime, rv) if rv is not None else x


def _eliminate(p: int, alpha: Alpha, lead: int, beta: Alpha) -> Alpha:
    """alpha - alpha[lead] * beta, exact zero at the lead coordinate."""
    c = alpha[lead]
    out: Alpha = []
    for i, a in enumerate(alpha):
        if i == lead:
            out.append(_pzero(p))
        else:
            out.append(_collapse(combine(p, [(Fraction(1), a), (Fraction(-1), pmul(c, beta[i]))])))
    return out


def _chain_step(
    p: int, alpha: Alpha, rows: list[tuple[int, Alpha]], chars: list[Characteristic], prec: int
) -> tuple[int, Alpha] | None:
    n = len(alpha)
    alpha = [
        _pzero(p) if is_inf(chars[i].value(p)) else _collapse(a) for i, a in enumerate(alpha)
    ]
    for lead_j, beta in rows:
        if rational_value(alpha[lead_j]) == 0:
            continue
        alpha = _eliminate(p, alpha, lead_j, beta)
    vals = []
    for a in alpha:
        rv = rational_value(a)
        if rv is not None:
            vals.append(INF if rv == 0 else int(pval(rv, p)))
        else:
            v = a.valuation_upto(prec)
            vals.append(INF if v is None else v)
    v = min(vals, key=lambda h: prec + 1 if is_inf(h) else h)
    if is_inf(v):
        if all(rational_value(a) == 0 for a in alpha):
            return None
        raise OracleUndecided(
            f"chain at {p} vanishes to working precision but is not exactly zero"
        )
    if v > 0:
        alpha = [_pzero(p) if rational_value(a) == 0 else _collapse(p_shift(a, v)) for a in alpha]
    lead = next(i for i in range(n) if alpha[i].residue(1) != 0)
    u = alpha[lead]
    out: Alpha = []
    for i, a in enumerate(alpha):
        if i == lead:
            out.append(RationalPadic(p, 1))
        elif rational_value(a) == 0:
            out.append(_pzero(p))
        else:
            out.append(_collapse(unit_quotient(a, u)))
    return lead, out


def _chain_backsub(p: int, rows: list[tuple[int, Alpha]]) -> list[tuple[int, Alpha]]:
    # rows are triangular in processing order; one reverse pass finishes RREF
    for i in range(len(rows) - 1, -1, -1):
        li, ai = rows[i]
        for j in range(len(rows) - 1, i, -1):
            lj, aj = rows[j]
            if rational_value(ai[lj]) != 0:
                ai = _eliminate(p, ai, lj, aj)
        rows[i] = (li, ai)
    rows.sort(key=lambda r: r[0])
    return rows


def _settle_chains(
    n: int, chars: list[Characteristic], chains: list[PruferGlue], flags: set[str]
) -> dict[int, list[Alpha]]:
    prec = CONFIG.padic_precision
    by_p: dict[int, list[Alpha]] = {}
    for g in chains:
        by_p.setdefault(g.prime, []).append(list(g.alpha))
    out: dict[int, list[Alpha]] = {}
    for p in sorted(by_p):
        for _ in range(8 * (n + len(by_p[p])) + 8):
            rows: list[tuple[int, Alpha]] = []
            fold = None
            dropped = False
            for alpha0 in by_p[p]:
                r = _chain_step(p, alpha0, rows, chars, prec)
                if r is None:
                    dropped = True
                    continue
                lead, alpha = r
                if all(i == lead or rational_value(alpha[i]) == 0 for i in range(n)):
                    fold = lead
                    break
                rows.append((lead, alpha))
            if fold is not None:
                # the chain is the lead axis itself: fold as an infinite height
                chars[fold] = chars[fold].with_value(p, INF)
                continue
            if dropped:
                flags.add("ineffective-glue")
            break
        else:
            raise AssertionError("chain normalization did not stabilize")
        rows = _chain_backsub(p, rows)
        if rows:
            out[p] = [alpha for _, alpha in rows]
    return out


# -- family glue --------------------------------------------------------------


def _hnf_reduce(row: list[int], basis: list[list[int]]) -> list[int]:
    """Canonical representative of row modulo the lattice with HNF basis."""
    r = list(row)
    for b in basis:
        j = next(t for t in range(len(b)) if b[t])
        q = r[j] // b[j]
        if q:
            r = [x - q * y for x, y in zip(r, b)]
    return r


def _settle_family(
    n: int, chars: list[Characteristic], fams: list[FamilyGlue], flags: set[str]
) -> tuple[list[FamilyGlue], list[FiniteGlue]]:
    if not fams:
        return [], []
    demoted: set[int] = set()
    out_fams: list[FamilyGlue] = []
    updates: list[tuple] = []
    effective: set[int] = set()
    for _ in range(200):
        live: list[tuple[int, FamilyGlue]] = []
        for idx, f in enumerate(fams):
            s = f.primes.without(*sorted(demoted))
            if s.is_empty:
                continue
            live.append((idx, FamilyGlue(s, f.power, f.coeffs)))
        grow: set[int] = set()
        for _, f in live:
            content = math.gcd(*[abs(c) for c in f.coeffs])
            for q in factorize(content):
                if q in f.primes:
                    grow.add(q)
        if grow - demoted:
            demoted |= grow
            continue
        cls = refine_cells(chars, [f.primes for _, f in live])
        out_fams = []
        updates = []
        effective = set()
        pend: set[int] = set()
        for cell in cls:
            acting = [live[j] for j in range(len(live)) if cell.in_sets[j]]
            if not acting:
                continue
            if cell.primes.is_finite:
                pend.update(cell.primes.explicit_members())
                continue
            hts = list(cell.heights)
            exc = ExcSet()
            gens = []
            for i in range(n):
                if is_inf(hts[i]):
                    continue
                e = [Fraction(0)] * n
                e[i] = Fraction(1)
                gens.append((-int(hts[i]), tuple(e)))
            for _, f in acting:
                t = math.gcd(*[abs(c) for c in f.coeffs])
                w = [
                    Fraction(0) if is_inf(hts[i]) else Fraction(c, t)
                    for i, c in enumerate(f.coeffs)
                ]
                if any(w):
                    gens.append((-int(f.power), tuple(w)))
            ech = echelon_monomials(gens, n, exc)
            newh = []
            for i in range(n):
                if is_inf(hts[i]):
                    newh.append(INF)
                    continue
                e = [Fraction(0)] * n
                e[i] = Fraction(1)
                s = reduce_monomial(ech, (0, tuple(e)), exc)
                assert s is not None and s >= 0
                newh.append(int(s))
            by_k: dict[int, list[list[int]]] = {}
            for fexp, w, piv in ech:
                k = -fexp
                if k <= 0:
                    continue
                cc = primitive_vector(list(w))
                j = next(t for t in range(n) if cc[t])
                exc.add_frac(Fraction(cc[j]) / w[j])
                by_k.setdefault(int(k), []).append(cc)
            # canonical rows per power: a deeper row divided down is available
            # at every shallower power, so it reduces the shallower block
            emitted = False
            higher: list[list[int]] = []
            for k in sorted(by_k, reverse=True):

                def proj(w: list[int]) -> list[int]:
                    return [
                        0 if (not is_inf(newh[i]) and newh[i] >= k) else w[i]
                        for i in range(n)
                    ]

                red = hnf_basis([proj(h) for h in higher]) if higher else []
                block = hnf_basis([proj(w) for w in by_k[k]] + [proj(h) for h in higher])
                for row in block:
                    r = _hnf_reduce(row, red)
                    if not any(r):
                        continue
                    g = math.gcd(*[abs(x) for x in r])
                    exc.add_int(g)
                    out_fams.append(FamilyGlue(cell.primes, int(k), tuple(primitive_vector(r))))
                    emitted = True
                higher = higher + by_k[k]
            updates.append((cell.primes, newh))
            if emitted or any(
                not is_inf(h) and nh != h for h, nh in zip(hts, newh)
            ):
                effective.update(idx for idx, _ in acting)
            for q in exc.primes:
                if q in cell.primes:
                    pend.add(q)
        if pend - demoted:
            demoted |= pend
            continue
        break
    else:
        raise AssertionError("family demotion did not stabilize")
    for i in range(n):
        fresh = [(cs, hs[i]) for cs, hs in updates if not is_inf(hs[i])]
        if fresh:
            chars[i] = Characteristic.from_pieces(fresh + list(chars[i].pieces))
    out_fins: list[FiniteGlue] = []
    for q in sorted(demoted):
        for idx, f in enumerate(fams):
            if q in f.primes:
                row = _prepare_finite(q, f.power, list(f.coeffs), chars, set())
                if row is not None:
                    out_fins.append(row)
                    effective.add(idx)
    if any(idx not in effective for idx in range(len(fams))):
        flags.add("ineffective-glue")
    return out_fams, out_fins


# -- finite glue --------------------------------------------------------------


def _settle_finite(
    n: int, chars: list[Characteristic], fins: list[FiniteGlue], base: list
) -> list[FiniteGlue]:
    from tfdecomp import localdata

    by_p: dict[int, list[FiniteGlue]] = {}
    for g in fins:
        by_p.setdefault(g.prime, []).append(g)
    explicit = sorted(set(by_p) | {g.prime for g in base if isinstance(g, PruferGlue)})
    if not explicit:
        return []

    # true axis heights: glue can push an axis deeper than its stated height
    work = TfGroup(tuple(chars), tuple(base + fins), None, ("raw",))
    for p in explicit:
        for i in range(n):
            h = chars[i].value(p)
            if is_inf(h):
                continue
            e = [Fraction(0)] * n
            e[i] = Fraction(1)
            hh, ok = localdata.element_height_at(work, p, e)
            if not ok:
                raise OracleUndecided(f"axis height at {p} undecided at working precision")
            if is_inf(hh):
                raise AssertionError("finite glue data produced an infinite axis height")
            if hh > int(h):
                chars[i] = chars[i].with_value(p, int(hh))

    base_group = TfGroup(tuple(chars), tuple(base), None, ("raw",))
    out: list[FiniteGlue] = []
    for p in sorted(by_p):
        c = [chars[i].value(p) for i in range(n)]
        fin_idx = [i for i in range(n) if not is_inf(c[i])]
        if not fin_idx:
            continue
        hats: list[list[Fraction]] = []
        K = 0
        for g in by_p[p]:
            hat = [Fraction(g.coeffs[i]) * Fraction(p) ** (int(c[i]) - g.power) for i in fin_idx]
            mu = max((-int(pval(x, p)) for x in hat if x), default=0)
            if mu > 0:
                hats.append(hat)
                K = max(K, mu)
        fam_hats: list[list[Fraction]] = []
        for g in base:
            if isinstance(g, FamilyGlue) and p in g.primes:
                hat = [
                    Fraction(g.coeffs[i]) * Fraction(p) ** (int(c[i]) - g.power) for i in fin_idx
                ]
                mu = max((-int(pval(x, p)) for x in hat if x), default=0)
                fam_hats.append(hat)
                K = max(K, mu)
        if not hats:
            continue
        maxc = max(int(c[i]) for i in fin_idx)
        chain_hats: list[list[Fraction]] = []
        for g in base:
            if isinstance(g, PruferGlue) and g.prime == p:
                for m in range(1, K + maxc + 3):
                    hat = [
                        Fraction(g.alpha[i].residue(m)) * Fraction(p) ** (int(c[i]) - m)
                        for i in fin_idx
                    ]
                    if all(int(pval(x, p)) >= -K for x in hat if x):
                        chain_hats.append(hat)
        rows_int: list[list[int]] = []
        for hat in hats + fam_hats + chain_hats:
            scaled = [x * p**K for x in hat]
            den = 1
            for x in scaled:
                den = math.lcm(den, x.denominator)
            rows_int.append([int(x * den) for x in scaled])
        for j in range(len(fin_idx)):
            row = [0] * len(fin_idx)
            row[j] = p**K
            rows_int.append(row)
        for hrow in hnf_basis(rows_int):
            kp = max(
                (K + int(c[fin_idx[j]]) - int(pval(v, p)) for j, v in enumerate(hrow) if v),
                default=0,
            )
            if kp <= 0:
                continue
            x = [Fraction(0)] * n
            for j, v in enumerate(hrow):
                x[fin_idx[j]] = Fraction(v, p ** (K + int(c[fin_idx[j]])))
            if localdata.local_member(base_group, p, x):
                continue
            a = [Fraction(0)] * n
            for j, v in enumerate(hrow):
                a[fin_idx[j]] = Fraction(v, p ** (K + int(c[fin_idx[j]]) - kp))
            out.append(FiniteGlue(p, int(kp), tuple(primitive_vector(a))))
    return out


# -- reducedness --------------------------------------------------------------


def _check_reduced(G: TfGroup) -> None:
    from tfdecomp import localdata

    n = G.rank
    if n == 0:
        return
    cur = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    cls, explicit = localdata.cells(G)
    for cell in cls:
        rows = []
        for i in cell.div:
            e = [Fraction(0)] * n
            e[i] = Fraction(1)
            rows.append(e)
        cur = localdata._intersect_spans(cur, rows, n)
        if not cur:
            return
    for p in explicit:
        cur = localdata._intersect_spans(cur, localdata._divisible_rows(G, p), n)
        if not cur:
            return
    raise NotReduced("the data describes a group with a divisible subgroup")
