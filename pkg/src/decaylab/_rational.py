"""Small exact linear-algebra kernel over :class:`fractions.Fraction`.

Matrices are plain lists of row lists. Entries that arrive as ``int``,
``Fraction`` or numeric strings are treated as exact; ``float`` entries are
kept as floats and switch callers to the tolerance-based code path.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Integral, Rational

import numpy as np


def to_exact(x):
    """Convert ``x`` to a Fraction if it is exactly representable input, else float."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (Integral, np.integer)) and not isinstance(x, bool):
        return Fraction(int(x))
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, str):
        return Fraction(x)
    return float(x)


def all_exact(values) -> bool:
    return all(isinstance(v, Fraction) for v in values)


def dot(a, b):
    return sum((x * y for x, y in zip(a, b)), Fraction(0) if all_exact(list(a) + list(b)) else 0.0)


def matmul(A, B):
    Bt = list(zip(*B))
    return [[dot(row, col) for col in Bt] for row in A]


def transpose(A):
    return [list(r) for r in zip(*A)]


def _rref(A):
    """Reduced row echelon form of an exact matrix; returns (R, pivot_columns)."""
    R = [list(r) for r in A]
    if not R:
        return R, []
    nrows, ncols = len(R), len(R[0])
    pivots = []
    row = 0
    for col in range(ncols):
        pr = next((i for i in range(row, nrows) if R[i][col] != 0), None)
        if pr is None:
            continue
        R[row], R[pr] = R[pr], R[row]
        piv = R[row][col]
        R[row] = [v / piv for v in R[row]]
        for i in range(nrows):
            if i != row and R[i][col] != 0:
                f = R[i][col]
                R[i] = [a - f * b for a, b in zip(R[i], R[row])]
        pivots.append(col)
        row += 1
        if row == nrows:
            break
    return R, pivots


def rank(A) -> int:
    return len(_rref(A)[1])


def inverse(A):
    n = len(A)
    aug = [list(A[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    R, piv = _rref(aug)
    if piv[:n] != list(range(n)):
        raise np.linalg.LinAlgError("singular matrix")
    return [r[n:] for r in R]


def det(A):
    n = len(A)
    M = [list(r) for r in A]
    d = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if M[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            M[c], M[p] = M[p], M[c]
            d = -d
        d *= M[c][c]
        for i in range(c + 1, n):
            f = M[i][c] / M[c][c]
            M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return d


def nullspace(A, ncols: int | None = None):
    """Basis (list of vectors) of the right nullspace of an exact matrix."""
    if not A:
        n = ncols or 0
        return [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    ncols = len(A[0])
    R, piv = _rref(A)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for r, pc in enumerate(piv):
            v[pc] = -R[r][f]
        basis.append(v)
    return basis
