"""Grouping decompositions over a pluggable decomposition oracle.

The generic layer knows nothing about groups: it takes an oracle that
splits objects into atoms, a finite labelling of those atoms, and a way
to rebuild objects from atom lists.  The grouping decomposition collects
the atoms of each label into one part.  That is canonical exactly when
the labels cut the atoms into summand-disjoint families, which is what
check_summand_disjoint probes by decomposing shuffled presentations.

The torsion-free instance plugs in complete_decompose and the three
label schemes used throughout: strongly-indecomposable vs not, torsion
quotient class, and rank one vs higher.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable

from tfdecomp.errors import OracleUndecided
from tfdecomp.groups import TfGroup, direct_sum, zero_group
from tfdecomp.structure import (
    complete_decompose,
    find_iso,
    is_strongly_indecomposable,
    iso_certify,
    nonneg_model,
)
from tfdecomp.torsion import classify
from tfdecomp.witnesses import conjugate_presentations


@dataclass(frozen=True)
class CategoryInstance:
    """An additive category with an effective atom oracle.

    decompose returns (atoms, flag); an atom may be any value as long as
    atom_object turns it into a summable object.  certify, when present,
    receives the input and the atoms in final label order and must return
    evidence that they reassemble it (raising if they do not).
    """

    rank_of: Callable[[Any], int]
    decompose: Callable[[Any], tuple[list, str]]
    iso_test: Callable[[Any, Any], Any]
    sum: Callable[[Any, Any], Any]
    zero: Any
    atom_object: Callable[[Any], Any] = lambda a: a
    variants: Callable[[Any, int], list] | None = None
    certify: Callable[[Any, list], Any] | None = None

    def sum_atoms(self, atoms: list) -> Any:
        objs = [self.atom_object(a) for a in atoms]
        if not objs:
            return self.zero
        out = objs[0]
        for o in objs[1:]:
            out = self.sum(out, o)
        return out


@dataclass(frozen=True)
class AtomClassifier:
    labels: tuple[str, ...]
    classify: Callable[[Any], str]


@dataclass(frozen=True)
class CanonicalDecomposition:
    labels: tuple[str, ...]
    parts: dict[str, Any]
    atom_lists: dict[str, list]
    certificate: Any
    flag: str


def canonical_decomposition(obj, classifier: AtomClassifier, instance: CategoryInstance) -> CanonicalDecomposition:
    """Decompose, then group the atoms of each label into one part.

    Rank additivity across the parts is asserted; a boundedSearch flag
    from the oracle is passed through on the result.
    """
    atoms, flag = instance.decompose(obj)
    buckets: dict[str, list] = {lab: [] for lab in classifier.labels}
    for a in atoms:
        lab = classifier.classify(a)
        assert lab in buckets, f"classifier produced unknown label {lab!r}"
        buckets[lab].append(a)
    parts = {lab: instance.sum_atoms(b) for lab, b in buckets.items()}
    total = sum(instance.rank_of(p) for p in parts.values())
    assert total == instance.rank_of(obj), "part ranks do not add up to the input rank"
    ordered = [a for lab in classifier.labels for a in buckets[lab]]
    cert = instance.certify(obj, ordered) if instance.certify else None
    return CanonicalDecomposition(tuple(classifier.labels), parts, buckets, cert, flag)


@dataclass(frozen=True)
class Violation:
    kind: str
    where: Any
    first: Any
    second: Any


@dataclass(frozen=True)
class DisjointReport:
    ok: bool
    runs: int
    violations: tuple[Violation, ...]


def check_summand_disjoint(
    instance: CategoryInstance,
    classifier: AtomClassifier,
    test_objects: list,
    seed: int = 0,
) -> DisjointReport:
    """Probe the label partition for summand-disjointness on a corpus.

    Two failure shapes are detected: the label multiset of an object's
    atoms changing between presentations (the grouping would not be
    well defined), and a pair of isomorphic atoms wearing different
    labels (one isomorphism class exhibited on two sides of the
    partition).
    """
    violations: list[Violation] = []
    runs = 0
    seen: list[tuple[Any, str, int]] = []
    for k, obj in enumerate(test_objects):
        if instance.variants is not None:
            presentations = instance.variants(obj, seed + k)
        else:
            presentations = [obj]
        base = None
        for pres in presentations:
            atoms, _ = instance.decompose(pres)
            labeled = [(a, classifier.classify(a)) for a in atoms]
            counts = Counter(lab for _, lab in labeled)
            runs += 1
            if base is None:
                base = counts
            elif counts != base:
                violations.append(Violation("grouping", k, dict(base), dict(counts)))
            seen.extend((a, lab, k) for a, lab in labeled)
    for i in range(len(seen)):
        for j in range(i + 1, len(seen)):
            a, la, ka = seen[i]
            b, lb, kb = seen[j]
            if la != lb and instance.iso_test(a, b):
                violations.append(Violation("mixed-class-atoms", (ka, kb), a, b))
    return DisjointReport(not violations, runs, tuple(violations))


# -- toy and mock instances --------------------------------------------------------


def _toy_variants(t: tuple, seed: int) -> list[tuple]:
    rng = random.Random(seed)
    out = [t]
    for _ in range(3):
        s = list(t)
        rng.shuffle(s)
        out.append(tuple(s))
    return out


def toy_category(classes: dict[str, str]) -> tuple[CategoryInstance, AtomClassifier]:
    """Multisets of tokens, presented as tuples; atoms are the tokens.

    classes maps each token to its label; grouping a multiset is then
    literally partitioning it, which makes the toy a ground-truth check
    for the generic layer.
    """

    def certify(obj, ordered):
        assert Counter(obj) == Counter(ordered), "atoms do not recount to the object"
        return tuple(ordered)

    instance = CategoryInstance(
        rank_of=len,
        decompose=lambda t: (list(t), "complete"),
        iso_test=lambda a, b: a == b,
        sum=lambda x, y: x + y,
        zero=(),
        atom_object=lambda a: (a,),
        variants=_toy_variants,
        certify=certify,
    )
    labels = tuple(sorted(set(classes.values())))
    return instance, AtomClassifier(labels, lambda a: classes[a])


def mock_nondisjoint_category() -> tuple[CategoryInstance, AtomClassifier, list]:
    """A rigged oracle whose labels are not isomorphism-invariant.

    The object X splits as x + y in one presentation and u + w in the
    other, with x iso w and y iso u, but labels A on {x, u} and B on
    {y, w}.  One isomorphism class is exhibited under both labels, so
    the partition is not summand-disjoint and the checker must say so.
    """
    iso = {frozenset({t}) for t in "xyuw"} | {frozenset({"x", "w"}), frozenset({"y", "u"})}

    instance = CategoryInstance(
        rank_of=lambda obj: 2 if obj and obj[0] == "X" else len(obj),
        decompose=lambda obj: (["x", "y"] if obj[1] == 0 else ["u", "w"], "complete"),
        iso_test=lambda a, b: frozenset({a, b}) in iso,
        sum=lambda x, y: x + y,
        zero=(),
        atom_object=lambda a: (a,),
        variants=lambda obj, seed: [(obj[0], 0), (obj[0], 1)],
    )
    classifier = AtomClassifier(("A", "B"), lambda a: "A" if a in ("x", "u") else "B")
    return instance, classifier, [("X", 0)]


# -- the torsion-free instance ------------------------------------------------------


def _tf_certify(G: TfGroup, ordered_atoms: list) -> list:
    """Stacked embedding rows, verified to carry the atom sum onto G."""
    M = [list(r) for _, U in ordered_atoms for r in U]
    A = direct_sum(*[H for H, _ in ordered_atoms])
    if not iso_certify(A, G, M):
        raise AssertionError("atom embeddings do not reassemble the input")
    return M


def tf_category() -> CategoryInstance:
    """complete_decompose as the oracle; atoms are (group, embedding rows)."""

    def decompose(G: TfGroup):
        C = complete_decompose(G)
        return list(C.atoms), C.flag

    return CategoryInstance(
        rank_of=lambda G: G.rank,
        decompose=decompose,
        iso_test=lambda a, b: find_iso(a[0], b[0]),
        sum=lambda x, y: direct_sum(x, y),
        zero=zero_group(),
        atom_object=lambda a: a[0],
        variants=lambda G, seed: [H for H, _ in conjugate_presentations(G, seed)],
        certify=_tf_certify,
    )


def principal_classifier() -> AtomClassifier:
    def lab(atom) -> str:
        v = is_strongly_indecomposable(atom[0])
        if v.is_unknown:
            raise OracleUndecided(v.report or "strong indecomposability undecided")
        return "si" if v.is_yes else "nonsi"

    return AtomClassifier(("si", "nonsi"), lab)


def tq_classifier() -> AtomClassifier:
    def lab(atom) -> str:
        return classify(nonneg_model(atom[0])[0]).label

    return AtomClassifier(("fq", "rq", "dq"), lab)


def main_classifier() -> AtomClassifier:
    return AtomClassifier(("cd", "cl"), lambda atom: "cd" if atom[0].rank == 1 else "cl")


def principal_decomposition(G: TfGroup) -> tuple[TfGroup, TfGroup]:
    """(G_sd, G_ni): the strongly indecomposable summands versus the rest."""
    D = canonical_decomposition(G, principal_classifier(), tf_category())
    return D.parts["si"], D.parts["nonsi"]


def torsion_quotient_decomposition(G: TfGroup) -> tuple[TfGroup, TfGroup, TfGroup]:
    """(G_fq, G_rq, G_dq) by the torsion quotient class of each atom."""
    D = canonical_decomposition(G, tq_classifier(), tf_category())
    return D.parts["fq"], D.parts["rq"], D.parts["dq"]


def main_decomposition(G: TfGroup) -> tuple[TfGroup, TfGroup]:
    """(G_cd, G_cl): the completely decomposable part versus the rest."""
    D = canonical_decomposition(G, main_classifier(), tf_category())
    return D.parts["cd"], D.parts["cl"]


@dataclass(frozen=True)
class CompatibilityReport:
    verdicts: dict[tuple[str, str], bool]
    ok: bool


def _certified_iso(A: TfGroup, B: TfGroup) -> bool:
    M = find_iso(A, B)
    return M is not None and iso_certify(A, B, M)


def compatibility_check(G: TfGroup) -> CompatibilityReport:
    """Do the principal and class groupings commute on G?

    For each class label the part of that class inside G_sd, the
    strongly-indecomposable part of the class part, and the product
    grouping straight from the atoms must all agree up to certified
    isomorphism; one verdict per (class, route).
    """
    inst = tf_category()
    pc, tc = principal_classifier(), tq_classifier()
    atoms, _ = inst.decompose(G)
    stars = ("fq", "rq", "dq")
    X = {
        star: inst.sum_atoms([a for a in atoms if pc.classify(a) == "si" and tc.classify(a) == star])
        for star in stars
    }
    Dp = canonical_decomposition(G, pc, inst)
    Dsd = canonical_decomposition(Dp.parts["si"], tc, inst)
    Dt = canonical_decomposition(G, tc, inst)
    verdicts: dict[tuple[str, str], bool] = {}
    for star in stars:
        inner = canonical_decomposition(Dt.parts[star], pc, inst)
        verdicts[(star, "class-of-sd")] = _certified_iso(X[star], Dsd.parts[star])
        verdicts[(star, "sd-of-class")] = _certified_iso(X[star], inner.parts["si"])
    return CompatibilityReport(verdicts, all(verdicts.values()))
