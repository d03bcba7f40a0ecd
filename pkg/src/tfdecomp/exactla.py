"""Exact linear algebra over Z and Q.

Matrices are lists of rows.  Integer routines return unimodular transforms so
callers can track bases; all lattice bases produced here are row bases.

Conventions:
  row_hnf(M) -> (H, U) with U @ M = H, H in row Hermite form (positive pivots,
  entries above a pivot reduced into [0, pivot), zero rows at the bottom).
  smith_normal_form(M) -> (D, U, V) with U @ M @ V = D and d1 | d2 | ...
  kernel_int(M) -> row basis of {x : M x = 0}, automatically saturated.
"""

from __future__ import annotations

from fractions import Fraction

from tfdecomp.errors import SingularMatrix

IntMatrix = list[list[int]]
QMatrix = list[list[Fraction]]


def identity_int(n: int) -> IntMatrix:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def zeros(m: int, n: int) -> IntMatrix:
    return [[0] * n for _ in range(m)]


def transpose(M: list[list]) -> list[list]:
    return [list(col) for col in zip(*M)] if M else []


def matmul(A: list[list], B: list[list]) -> list[list]:
    if not A:
        return []
    if not B:
        return [[] for _ in A]
    Bt = transpose(B)
    return [[sum(a * b for a, b in zip(row, col)) for col in Bt] for row in A]


def matvec(A: list[list], x: list) -> list:
    return [sum(a * b for a, b in zip(row, x)) for row in A]


def vecmat(x: list, A: list[list]) -> list:
    if not A:
        return []
    return [sum(x[i] * A[i][j] for i in range(len(A))) for j in range(len(A[0]))]


def mat_eq(A: list[list], B: list[list]) -> bool:
    return len(A) == len(B) and all(tuple(r) == tuple(s) for r, s in zip(A, B))


def scale_row(row: list, c) -> list:
    return [c * x for x in row]


def add_scaled(r1: list, r2: list, c) -> list:
    return [a + c * b for a, b in zip(r1, r2)]


# -- integer routines --------------------------------------------------------


def row_hnf(M: IntMatrix) -> tuple[IntMatrix, IntMatrix]:
    """Row Hermite normal form with transform: U @ M = H, U unimodular."""
    m = len(M)
    n = len(M[0]) if m else 0
    H = [list(map(int, row)) for row in M]
    U = identity_int(m)
    r = 0
    for c in range(n):
        nz = [i for i in range(r, m) if H[i][c] != 0]
        if not nz:
            continue
        while len(nz) > 1:
            i0 = min(nz, key=lambda i: abs(H[i][c]))
            for i in nz:
                if i == i0:
                    continue
                q = H[i][c] // H[i0][c]
                if q:
                    H[i] = add_scaled(H[i], H[i0], -q)
                    U[i] = add_scaled(U[i], U[i0], -q)
            nz = [i for i in range(r, m) if H[i][c] != 0]
        i0 = nz[0]
        H[r], H[i0] = H[i0], H[r]
        U[r], U[i0] = U[i0], U[r]
        if H[r][c] < 0:
            H[r] = scale_row(H[r], -1)
            U[r] = scale_row(U[r], -1)
        for i in range(r):
            q = H[i][c] // H[r][c]
            if q:
                H[i] = add_scaled(H[i], H[r], -q)
                U[i] = add_scaled(U[i], U[r], -q)
        r += 1
        if r == m:
            break
    return H, U


def hnf_basis(rows: IntMatrix) -> IntMatrix:
    """Canonical row basis of the lattice generated by the given rows."""
    H, _ = row_hnf(rows)
    return [row for row in H if any(row)]


def kernel_int(M: IntMatrix) -> IntMatrix:
    """Row basis of the right kernel {x in Z^n : M x = 0}."""
    m = len(M)
    n = len(M[0]) if m else 0
    if n == 0:
        return []
    if m == 0:
        return identity_int(n)
    H, U = row_hnf(transpose(M))
    return [U[i] for i in range(n) if not any(H[i])]


def smith_normal_form(M: IntMatrix) -> tuple[IntMatrix, IntMatrix, IntMatrix]:
    """(D, U, V) with U @ M @ V = D diagonal, d_i | d_{i+1}, d_i >= 0."""
    m = len(M)
    n = len(M[0]) if m else 0
    D = [list(map(int, row)) for row in M]
    U = identity_int(m)
    V = identity_int(n)

    def col_op(j: int, t: int, q: int) -> None:
        for row in D:
            row[j] -= q * row[t]
        for row in V:
            row[j] -= q * row[t]

    def col_swap(j: int, t: int) -> None:
        for row in D:
            row[j], row[t] = row[t], row[j]
        for row in V:
            row[j], row[t] = row[t], row[j]

    t = 0
    while t < min(m, n):
        entries = [(abs(D[i][j]), i, j) for i in range(t, m) for j in range(t, n) if D[i][j]]
        if not entries:
            break
        _, pi, pj = min(entries)
        D[t], D[pi] = D[pi], D[t]
        U[t], U[pi] = U[pi], U[t]
        if pj != t:
            col_swap(pj, t)
        while True:
            dirty = False
            for i in range(t + 1, m):
                if D[i][t]:
                    q = D[i][t] // D[t][t]
                    if q:
                        D[i] = add_scaled(D[i], D[t], -q)
                        U[i] = add_scaled(U[i], U[t], -q)
                    if D[i][t]:
                        D[t], D[i] = D[i], D[t]
                        U[t], U[i] = U[i], U[t]
                        dirty = True
            if dirty:
                continue
            for j in range(t + 1, n):
                if D[t][j]:
                    q = D[t][j] // D[t][t]
                    if q:
                        col_op(j, t, q)
                    if D[t][j]:
                        col_swap(j, t)
                        dirty = True
            if dirty:
                continue
            bad = next(
                ((i, j) for i in range(t + 1, m) for j in range(t + 1, n) if D[i][j] % D[t][t]),
                None,
            )
            if bad is None:
                break
            D[t] = add_scaled(D[t], D[bad[0]], 1)
            U[t] = add_scaled(U[t], U[bad[0]], 1)
        if D[t][t] < 0:
            D[t] = scale_row(D[t], -1)
            U[t] = scale_row(U[t], -1)
        t += 1
    return D, U, V


def invariant_factors(M: IntMatrix) -> list[int]:
    D, _, _ = smith_normal_form(M)
    return [D[i][i] for i in range(min(len(D), len(D[0]) if D else 0)) if D[i][i]]


def solve_int(M: IntMatrix, b: list[int]) -> list[int] | None:
    """One integer solution of M x = b, or None."""
    m = len(M)
    if m == 0:
        return []
    n = len(M[0])
    D, U, V = smith_normal_form(M)
    c = matvec(U, b)
    y = [0] * n
    for i in range(m):
        d = D[i][i] if i < min(m, n) else 0
        if d:
            if c[i] % d:
                return None
            y[i] = c[i] // d
        elif c[i]:
            return None
    return matvec(V, y)


def solve_mod(A: IntMatrix, b: list[int], mod: int) -> list[int] | None:
    """One solution of A x = b (mod m), reduced into [0, m)."""
    m = len(A)
    if m == 0:
        return []
    n = len(A[0])
    aug = [list(A[i]) + [mod if j == i else 0 for j in range(m)] for i in range(m)]
    sol = solve_int(aug, b)
    if sol is None:
        return None
    return [x % mod for x in sol[:n]]


def lattice_of_subspace(rows: IntMatrix, n: int) -> IntMatrix:
    """Row basis of span_Q(rows) intersected with Z^n (the saturation)."""
    rows = [row for row in rows if any(row)]
    if not rows:
        return []
    ann = kernel_int(rows)
    if not ann:
        return identity_int(n)
    return kernel_int(ann)


def lattice_contains(basis: IntMatrix, x: list[int]) -> bool:
    """Is x in the row lattice?"""
    if not basis:
        return not any(x)
    return solve_int(transpose(basis), list(x)) is not None


def lattice_index(sub: IntMatrix, sup: IntMatrix) -> int | None:
    """[sup-lattice : sub-lattice] for row bases of equal rank.

    None if sub is not contained in sup or the ranks differ.
    """
    sub = hnf_basis(sub)
    sup = hnf_basis(sup)
    if len(sub) != len(sup):
        return None
    X: list[list[Fraction]] = []
    for row in sub:
        y = solve_q([[Fraction(v) for v in r] for r in transpose(sup)], [Fraction(v) for v in row])
        if y is None or any(v.denominator != 1 for v in y):
            return None
        X.append(y)
    d = det_q(X)
    return abs(int(d)) if d else None


# -- rational routines -------------------------------------------------------


def qmat(M: list[list]) -> QMatrix:
    return [[Fraction(x) for x in row] for row in M]


def rref(M: QMatrix) -> tuple[QMatrix, list[int]]:
    """Reduced row echelon form and pivot column indices."""
    R = [list(row) for row in M]
    m = len(R)
    n = len(R[0]) if m else 0
    pivots: list[int] = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if R[i][c] != 0), None)
        if piv is None:
            continue
        R[r], R[piv] = R[piv], R[r]
        inv = Fraction(1) / R[r][c]
        R[r] = scale_row(R[r], inv)
        for i in range(m):
            if i != r and R[i][c] != 0:
                R[i] = add_scaled(R[i], R[r], -R[i][c])
        pivots.append(c)
        r += 1
        if r == m:
            break
    return R, pivots


def rank_q(M: QMatrix) -> int:
    return len(rref(M)[1])


def kernel_q(M: QMatrix) -> QMatrix:
    """Row basis of {x in Q^n : M x = 0}."""
    m = len(M)
    n = len(M[0]) if m else 0
    if n == 0:
        return []
    if m == 0:
        return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    R, pivots = rref(M)
    free = [j for j in range(n) if j not in pivots]
    out: QMatrix = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for r, c in enumerate(pivots):
            v[c] = -R[r][f]
        out.append(v)
    return out


def solve_q(M: QMatrix, b: list[Fraction]) -> list[Fraction] | None:
    """One rational solution of M x = b, or None."""
    m = len(M)
    n = len(M[0]) if m else 0
    aug = [list(M[i]) + [Fraction(b[i])] for i in range(m)]
    R, pivots = rref(aug)
    if n in pivots:
        return None
    x = [Fraction(0)] * n
    for r, c in enumerate(pivots):
        x[c] = R[r][n]
    return x


def inv_q(M: QMatrix) -> QMatrix:
    n = len(M)
    aug = [list(M[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    R, pivots = rref(aug)
    if pivots != list(range(n)):
        raise SingularMatrix(f"matrix of size {n} is singular")
    return [row[n:] for row in R]


def det_q(M: QMatrix) -> Fraction:
    n = len(M)
    A = [list(map(Fraction, row)) for row in M]
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if A[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        inv = Fraction(1) / A[c][c]
        for i in range(c + 1, n):
            if A[i][c] != 0:
                A[i] = add_scaled(A[i], A[c], -A[i][c] * inv)
    return det
