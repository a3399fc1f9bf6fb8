"""Sparse real polynomials with log-space evaluation.

The F-integral estimators need ``|p(z)|`` at points whose coordinates can be
as small as ``exp(-1e9)``. Coordinates are therefore carried as a sign and a
log-magnitude, and ``p`` is evaluated monomial by monomial with a signed
log-sum-exp.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np


def _mul(a, b):
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return out


def _perm_sign(p):
    sign, seen = 1, [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True, eq=False)
class SparsePoly:
    """``sum_t coeffs[t] * prod_v z_v ** exps[t, v]``."""

    exps: np.ndarray
    coeffs: np.ndarray

    @property
    def nvars(self):
        return self.exps.shape[1]

    @classmethod
    def from_dict(cls, terms, nvars):
        items = [(e, c) for e, c in sorted(terms.items()) if c != 0.0]
        exps = np.array([e for e, _ in items], dtype=np.int64).reshape(len(items), nvars)
        coeffs = np.array([c for _, c in items], dtype=float)
        return cls(exps, coeffs)

    def to_dict(self):
        return {tuple(int(x) for x in e): float(c) for e, c in zip(self.exps, self.coeffs)}

    def __call__(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return (np.prod(z[:, None, :] ** self.exps[None], axis=2) @ self.coeffs)

    def log_abs(self, signs, logs):
        """Signed log-magnitude of ``p`` at points given as ``z = signs * exp(logs)``.

        Returns ``(sign, log|p|)`` arrays; an exact zero gives ``log|p| = -inf``.
        """
        size = logs.shape[0]
        if self.coeffs.size == 0:
            return np.zeros(size), np.full(size, -np.inf)
        with np.errstate(invalid="ignore"):
            # 0 * (-inf) must count as log(1) for variables absent from a term
            safe = np.where(np.isneginf(logs), -1e300, logs)
            lm = safe @ self.exps.T.astype(float)
        lm = np.where(lm < -1e299, -np.inf, lm) + np.log(np.abs(self.coeffs))
        neg = (signs < 0).astype(np.int64) @ self.exps.T
        sm = np.where(neg % 2 == 1, -1.0, 1.0) * np.sign(self.coeffs)
        top = np.max(lm, axis=1, keepdims=True)
        finite_top = np.where(np.isfinite(top), top, 0.0)
        total = np.sum(sm * np.exp(lm - finite_top), axis=1)
        with np.errstate(divide="ignore"):
            out = np.log(np.abs(total)) + finite_top[:, 0]
        out = np.where(np.isfinite(top[:, 0]), out, -np.inf)
        return np.sign(total), out


def linear_form(coeffs, nvars):
    """The polynomial ``sum_v coeffs[v] * z_v`` as a term dictionary."""
    out = {}
    for v, c in enumerate(coeffs):
        if c != 0:
            e = [0] * nvars
            e[v] = 1
            out[tuple(e)] = float(c)
    return out


def det_poly(entries, nvars):
    """Leibniz expansion of the determinant of a matrix of term dictionaries."""
    n = len(entries)
    total = {}
    for p in permutations(range(n)):
        term = {(0,) * nvars: float(_perm_sign(p))}
        for i in range(n):
            term = _mul(term, entries[i][p[i]])
            if not term:
                break
        for e, c in term.items():
            total[e] = total.get(e, 0.0) + c
    return SparsePoly.from_dict(total, nvars)


def det_of_contraction(coeffs, perturb=False):
    """``det N(t)`` (variables ``t``), or ``det N_u(t)`` in variables ``(t, u)``.

    ``N_u(t) = N(t) + diag(u_i t_i)`` is the contraction of the diagonally
    perturbed map.
    """
    c = np.asarray(coeffs, dtype=float)
    n = c.shape[1]
    nvars = 2 * n if perturb else n
    entries = []
    for i in range(n):
        row = []
        for j in range(n):
            lin = np.zeros(nvars)
            lin[:n] = c[i, j]
            cell = linear_form(lin, nvars)
            if perturb and i == j:
                e = [0] * nvars
                e[i] += 1
                e[n + i] += 1
                cell[tuple(e)] = cell.get(tuple(e), 0.0) + 1.0
            row.append(cell)
        entries.append(row)
    return det_poly(entries, nvars)
