"""Small dense linear algebra over ``Fraction`` (or float) entries."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def det(rows: Sequence[Sequence]):
    """Determinant by Gaussian elimination; exact for Fraction input."""
    a = [list(r) for r in rows]
    n = len(a)
    if any(len(r) != n for r in a):
        raise ValueError("matrix must be square")
    exact = all(isinstance(x, (int, Fraction)) for r in a for x in r)
    if exact:
        a = [[Fraction(x) for x in r] for r in a]
    result = Fraction(1) if exact else 1.0
    for col in range(n):
        if exact:
            pivot = next((i for i in range(col, n) if a[i][col] != 0), None)
        else:
            pivot = max(range(col, n), key=lambda i: abs(a[i][col]))
            if a[pivot][col] == 0:
                pivot = None
        if pivot is None:
            return Fraction(0) if exact else 0.0
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            result = -result
        p = a[col][col]
        result *= p
        for i in range(col + 1, n):
            f = a[i][col] / p
            if f:
                row_i, row_c = a[i], a[col]
                for j in range(col, n):
                    row_i[j] -= f * row_c[j]
    return result


def matvec(m: Sequence[Sequence], v: Sequence) -> list:
    return [sum((mij * vj for mij, vj in zip(row, v)), 0 * v[0] if v else 0) for row in m]


def back_substitute_unit_upper(m: Sequence[Sequence], b: Sequence) -> list:
    """Solve ``m x = b`` for unit upper triangular ``m``."""
    n = len(b)
    x = list(b)
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(i + 1, n):
            if m[i][j]:
                s = s - m[i][j] * x[j]
        x[i] = s
    return x


def to_strings(m: Sequence[Sequence]) -> list[list[str]]:
    return [[str(x) for x in row] for row in m]
