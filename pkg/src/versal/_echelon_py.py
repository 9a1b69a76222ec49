"""Pure-Python reduced row echelon kernel over exact rationals.

This is the fallback implementation; `_echelon.pyx` provides the same
contract compiled. Pivot choice is deterministic (first nonzero row),
so both kernels return identical output for identical input.
"""

from __future__ import annotations

from fractions import Fraction

_ZERO = Fraction(0)


def rref_rows(rows):
    """Reduced row echelon form.

    Takes a list of equal-length lists of Fractions; returns a fresh
    (rref_rows, pivot_columns) pair. Rows of the result are fully reduced
    (zeros above and below every pivot, pivots normalized to 1).
    """
    m = len(rows)
    out = [list(r) for r in rows]
    if m == 0:
        return out, ()
    n = len(out[0])
    pivots = []
    r = 0
    for c in range(n):
        pr = -1
        for i in range(r, m):
            if out[i][c]:
                pr = i
                break
        if pr < 0:
            continue
        if pr != r:
            out[pr], out[r] = out[r], out[pr]
        row = out[r]
        inv = row[c]
        if inv != 1:
            inv = 1 / inv
            for j in range(c, n):
                if row[j]:
                    row[j] *= inv
        for i in range(m):
            if i == r:
                continue
            f = out[i][c]
            if f:
                oi = out[i]
                for j in range(c, n):
                    if row[j]:
                        oi[j] -= f * row[j]
        pivots.append(c)
        r += 1
        if r == m:
            break
    return out, tuple(pivots)
