"""Determinants in the two scalar modes, plus a modular variant.

Exact mode works on ``int``/``Fraction`` entries with Bareiss fraction-free
elimination. Float mode uses LAPACK's partially pivoted LU through numpy.
"""

from fractions import Fraction
from math import lcm

import numpy as np


def is_exact_scalar(x):
    return isinstance(x, (int, Fraction, np.integer)) and not isinstance(x, bool)


def to_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"not an exact scalar: {x!r}")


def bareiss_det(rows):
    """Determinant of a square integer matrix (list of lists), exactly."""
    a = [[int(v) for v in row] for row in rows]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        akk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) // prev
        prev = akk
    return sign * a[n - 1][n - 1]


def det_exact(matrix):
    """Exact determinant of a matrix with int or Fraction entries."""
    rows = [[to_fraction(v) for v in row] for row in np.asarray(matrix, dtype=object)]
    n = len(rows)
    if n == 0:
        return Fraction(1)
    scale = 1
    for row in rows:
        scale = lcm(scale, *(v.denominator for v in row))
    ints = [[int(v * scale) for v in row] for row in rows]
    return Fraction(bareiss_det(ints), scale**n)


def det_float(matrix):
    return float(np.linalg.det(np.asarray(matrix, dtype=float)))


def det(matrix):
    """Determinant in the mode implied by the entries."""
    arr = np.asarray(matrix)
    if arr.dtype == object:
        return det_exact(arr)
    if np.issubdtype(arr.dtype, np.integer):
        return Fraction(bareiss_det(arr.tolist()))
    return det_float(arr)


def batch_det(mats):
    """Determinants of a stack of float matrices with shape (..., n, n)."""
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[-1]
    if n == 1:
        return mats[..., 0, 0].copy()
    if n == 2:
        return mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
    if n == 3:
        a = mats
        return (
            a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
            - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
            + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
        )
    return np.linalg.det(mats)


# Primes below 2**31 keep every product of residues inside int64.
PRIMES = (2147483629, 2147483587)


def det_mod_p(matrix, p=PRIMES[0]):
    """Determinant of an integer matrix modulo a prime below 2**31."""
    a = np.array(matrix, dtype=np.int64) % p
    n = a.shape[0]
    result = 1
    for c in range(n):
        nz = np.flatnonzero(a[c:, c])
        if nz.size == 0:
            return 0
        r = c + int(nz[0])
        if r != c:
            a[[c, r]] = a[[r, c]]
            result = -result
        piv = int(a[c, c])
        result = (result * piv) % p
        inv = pow(piv, -1, p)
        if c + 1 < n:
            factors = (a[c + 1 :, c] * inv) % p
            a[c + 1 :, c:] = (a[c + 1 :, c:] - (factors[:, None] * a[c, c:][None, :]) % p) % p
    return result % p


def det_is_nonzero(int_matrix):
    """Exact test of det != 0 for an integer matrix.

    A nonzero residue modulo any prime certifies a nonzero determinant, so
    the exact Bareiss computation only runs when both residues vanish.
    """
    for p in PRIMES:
        if det_mod_p(int_matrix, p) != 0:
            return True
    return bareiss_det(np.asarray(int_matrix).tolist()) != 0
