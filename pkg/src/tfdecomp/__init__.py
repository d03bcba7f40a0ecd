"""Exact decomposition toolkit for torsion-free abelian groups of finite rank.

The package represents a group as a completely decomposable frame (one
characteristic per ambient coordinate) together with finitely many glue
data that adjoin extra divisibility across coordinates.  All arithmetic
is exact; answers that depend on stream-sourced p-adic data are flagged
rather than silently truncated.
"""

from tfdecomp.arith import INF
from tfdecomp.groups import (
    FamilyGlue,
    FiniteGlue,
    PruferGlue,
    TfGroup,
    canonical_rep,
    direct_sum,
    make_group,
    quasi_equal,
    scale_by,
)

__all__ = [
    "INF",
    "TfGroup",
    "FiniteGlue",
    "FamilyGlue",
    "PruferGlue",
    "make_group",
    "direct_sum",
    "scale_by",
    "quasi_equal",
    "canonical_rep",
]

__version__ = "0.1.0"
