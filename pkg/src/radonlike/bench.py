"""Discretized T_Q on grids and restricted-type ratios.

``T_Q f(x, x') = int_{[-1,1]^n} f(x + t, x' + Q(x, t)) dt`` is approximated by
a midpoint rule in ``t``. Output points are cell centres of a grid on
``[-L, L]^{2n}``; the ``x`` and ``x'`` directions may use different spacings
because Knapp sets are much thinner in ``x'``.

Full-grid norms of box indicators use a column sweep: for fixed ``x`` and
``t`` the admissible ``x'`` form a box, so each column is a sum of box
indicators accumulated with difference arrays. ``apply_operator`` is the
direct point-by-point evaluation and serves as the cross-check.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as streams
from .bilinear import contract_right, eval_q, inflation_jacobian, is_symmetric
from .errors import DomainError, ResolutionError
from .linalg import det

MAX_BENCH_DIM = 2

# Boxes are half-open, [lo, hi) in every coordinate, so a face aligned with
# grid nodes is counted once. Faces are moved down by this amount, so that
# rounding in x + t or Q(x, t) cannot flip a node lying on a face.
FACE_TOL = 1e-9


def _steps(length, spacing, name):
    k = length / spacing
    if k < 1 or abs(k - round(k)) > 1e-9 * max(1.0, k):
        raise DomainError(f"{name} must divide {length:g} evenly, got {spacing:g}")
    return int(round(k))


@dataclass(frozen=True)
class GridSpec:
    """Grid on ``[-L, L]^{2n}`` with x-spacing ``h`` and x'-spacing ``h_prime``."""

    n: int
    half_width: float
    h: float
    t_spacing: float
    h_prime: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be positive")
        if not (self.h > 0 and self.t_spacing > 0 and self.half_width > 0):
            raise DomainError("spacings and half-width must be positive")
        if self.h_prime is not None and not self.h_prime > 0:
            raise DomainError("h_prime must be positive")
        _steps(2 * self.half_width, self.h, "h")
        _steps(2 * self.half_width, self.hp, "h_prime")
        _steps(2.0, self.t_spacing, "t_spacing")

    @property
    def hp(self):
        return self.h if self.h_prime is None else self.h_prime

    @property
    def cell_volume(self):
        return self.h**self.n * self.hp**self.n

    def axis(self, prime=False):
        step = self.hp if prime else self.h
        k = _steps(2 * self.half_width, step, "spacing")
        return -self.half_width + step * (np.arange(k) + 0.5)

    def t_nodes(self):
        k = _steps(2.0, self.t_spacing, "t_spacing")
        ax = -1.0 + self.t_spacing * (np.arange(k) + 0.5)
        return np.stack(np.meshgrid(*[ax] * self.n, indexing="ij"), axis=-1).reshape(-1, self.n)

    def x_nodes(self):
        ax = self.axis()
        return np.stack(np.meshgrid(*[ax] * self.n, indexing="ij"), axis=-1).reshape(-1, self.n)

    def points(self):
        """Every grid point as rows ``(x, x')``."""
        ax, axp = self.axis(), self.axis(prime=True)
        mesh = np.meshgrid(*([ax] * self.n + [axp] * self.n), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, 2 * self.n)

    def size(self):
        return len(self.axis()) ** self.n * len(self.axis(prime=True)) ** self.n

    def to_json(self):
        return {
            "n": self.n,
            "half_width": self.half_width,
            "h": self.h,
            "h_prime": self.hp,
            "t_spacing": self.t_spacing,
        }


def bench_cost(grid):
    """Rough count of elementary updates for one full-grid norm."""
    nx = len(grid.axis()) ** grid.n
    nxp = len(grid.axis(prime=True)) ** grid.n
    nt = round(2.0 / grid.t_spacing) ** grid.n
    return nx * (nt + nxp)


def _check_bench_dim(n, grid=None):
    if n > MAX_BENCH_DIM:
        extra = ""
        if grid is not None:
            extra = f"; this grid would need about {bench_cost(grid):.3g} updates per norm"
        raise DomainError(f"benches support n <= {MAX_BENCH_DIM}, got n = {n}{extra}")


@dataclass(frozen=True, eq=False)
class IndicatorSet:
    """A set F in R^{2n}: a union of disjoint half-open boxes, a 2-D mask, or everything.

    Boxes are ``(lo, hi)`` pairs of length-2n arrays with ``x`` coordinates
    first.
    """

    dim: int
    boxes: tuple = ()
    mask: np.ndarray | None = None
    grid: GridSpec | None = None
    full: bool = False

    @classmethod
    def from_boxes(cls, boxes, dim=None):
        out = []
        for lo, hi in boxes:
            lo, hi = np.asarray(lo, float), np.asarray(hi, float)
            if lo.shape != hi.shape or lo.ndim != 1 or np.any(hi < lo):
                raise DomainError("each box needs lo <= hi of equal length")
            out.append((lo, hi))
        dim = dim or (len(out[0][0]) if out else None)
        if dim is None or dim % 2:
            raise DomainError("boxes must live in an even-dimensional space R^{2n}")
        if any(len(lo) != dim for lo, _ in out):
            raise DomainError("boxes of different dimensions")
        for i in range(len(out)):
            for j in range(i):
                a, b = out[i], out[j]
                overlap = np.minimum(a[1], b[1]) - np.maximum(a[0], b[0])
                if np.all(overlap > 0):
                    raise DomainError(f"boxes {j} and {i} overlap")
        return cls(dim, tuple(out))

    @classmethod
    def from_mask(cls, mask, grid):
        mask = np.asarray(mask, dtype=bool)
        if grid.n != 1:
            raise DomainError("masks are only supported for n = 1 (2-D grids)")
        shape = (len(grid.axis()), len(grid.axis(prime=True)))
        if mask.shape != shape:
            raise DomainError(f"mask shape {mask.shape} does not match grid {shape}")
        return cls(2, (), mask, grid)

    @classmethod
    def everything(cls, n):
        return cls(2 * n, full=True)

    @classmethod
    def empty(cls, n):
        return cls(2 * n)

    @property
    def n(self):
        return self.dim // 2

    @property
    def volume(self):
        if self.full:
            return math.inf
        if self.mask is not None:
            return float(self.mask.sum()) * self.grid.cell_volume
        return float(sum(np.prod(hi - lo) for lo, hi in self.boxes))

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        if self.full:
            return np.ones(len(pts), dtype=bool)
        if self.mask is not None:
            g = self.grid
            i = np.floor((pts[:, 0] + g.half_width) / g.h).astype(np.int64)
            j = np.floor((pts[:, 1] + g.half_width) / g.hp).astype(np.int64)
            ok = (i >= 0) & (i < self.mask.shape[0]) & (j >= 0) & (j < self.mask.shape[1])
            out = np.zeros(len(pts), dtype=bool)
            out[ok] = self.mask[i[ok], j[ok]]
            return out
        out = np.zeros(len(pts), dtype=bool)
        for lo, hi in self.boxes:
            out |= np.all((pts >= lo - FACE_TOL) & (pts < hi - FACE_TOL), axis=1)
        return out

    def translate(self, shift):
        shift = np.asarray(shift, float)
        if self.mask is not None or self.full:
            raise DomainError("only box sets can be translated")
        return IndicatorSet(self.dim, tuple((lo + shift, hi + shift) for lo, hi in self.boxes))

    def to_json(self):
        if self.full:
            return {"kind": "everything", "n": self.n}
        if self.mask is not None:
            return {"kind": "mask", "n": 1, "cells": int(self.mask.sum())}
        return {"kind": "boxes", "boxes": [[lo.tolist(), hi.tolist()] for lo, hi in self.boxes]}


def _check_inside(F, grid):
    """Boxes must lie in the grid domain, otherwise |F| and the norm disagree."""
    L = grid.half_width + 1e-12
    for lo, hi in F.boxes:
        if np.any(lo < -L) or np.any(hi > L):
            raise DomainError("F extends outside the grid domain [-L, L]^{2n}")


def _check_square(Q):
    if not Q.square:
        raise DomainError(f"needs n_out == n_in, got {Q.n_out} != {Q.n_in}")


def apply_operator(Q, F, points, grid):
    """Midpoint-rule values of ``T_Q chi_F`` at the given ``(x, x')`` rows."""
    _check_square(Q)
    n = Q.n_in
    if grid.n != n or F.dim != 2 * n:
        raise DomainError("map, set and grid dimensions disagree")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 2 * n:
        raise DomainError(f"points must have {2 * n} coordinates")
    if F.full:
        return np.full(len(pts), 2.0**n)
    t = grid.t_nodes()
    coeffs = Q.as_float()
    w = grid.t_spacing**n
    L = grid.half_width
    out = np.empty(len(pts))
    for a, p in enumerate(pts):
        x, xp = p[:n], p[n:]
        y = x + t
        yp = xp + np.einsum("ijk,j,sk->si", coeffs, x, t)
        img = np.hstack([y, yp])
        inside = np.all(np.abs(img) <= L, axis=1)
        out[a] = w * np.count_nonzero(F.contains(img) & inside)
    return out


def _interval_indices(lo, hi, shift, grid):
    """Index ranges ``[a, b)`` of x' nodes with ``lo <= x' + shift < hi`` per coordinate."""
    L, hp = grid.half_width, grid.hp
    m = len(grid.axis(prime=True))
    a = np.ceil((lo - FACE_TOL - shift + L) / hp - 0.5).astype(np.int64)
    b = np.ceil((hi - FACE_TOL - shift + L) / hp - 0.5).astype(np.int64)
    return np.clip(a, 0, m), np.clip(b, 0, m)


def _column_counts(boxes, x, t, shift_fn, grid):
    """Number of t nodes hitting F for every x' node of the column at ``x``."""
    n = grid.n
    m = len(grid.axis(prime=True))
    diff = np.zeros((m + 1,) * n, dtype=np.int64)
    y = x + t
    for lo, hi in boxes:
        ok = np.all((y >= lo[:n] - FACE_TOL) & (y < hi[:n] - FACE_TOL) & (np.abs(y) <= grid.half_width), axis=1)
        if not ok.any():
            continue
        s = shift_fn(x, t[ok])
        a, b = _interval_indices(lo[n:], hi[n:], s, grid)
        keep = np.all(b > a, axis=1)
        a, b = a[keep], b[keep]
        if n == 1:
            diff += np.bincount(a[:, 0], minlength=m + 1) - np.bincount(b[:, 0], minlength=m + 1)
        else:
            for ci, cj, sign in ((a, a, 1), (a, b, -1), (b, a, -1), (b, b, 1)):
                idx = ci[:, 0] * (m + 1) + cj[:, 1]
                diff += sign * np.bincount(idx, minlength=(m + 1) ** 2).reshape(m + 1, m + 1)
    counts = diff
    for axis in range(n):
        counts = np.cumsum(counts, axis=axis)
    return counts[(slice(0, m),) * n]


def _grid_norm(F, grid, q, shift_fn):
    """``||T chi_F||_q`` over the whole grid for a box set, via column sweeps."""
    n = grid.n
    if F.full:
        return (grid.size() * grid.cell_volume * (2.0**n) ** q) ** (1.0 / q)
    if F.mask is not None:
        vals = _brute_values(F, grid, shift_fn)
        return lq_norm(vals, q, grid)
    t = grid.t_nodes()
    w = grid.t_spacing**n
    total = 0.0
    for x in grid.x_nodes():
        counts = _column_counts(F.boxes, x, t, shift_fn, grid)
        nz = counts[counts > 0].astype(float)
        total += float(np.sum((w * nz) ** q))
    return (grid.cell_volume * total) ** (1.0 / q)


def _brute_values(F, grid, shift_fn):
    """Point-by-point values in the same order as ``grid.points()``."""
    n = grid.n
    t = grid.t_nodes()
    w = grid.t_spacing**n
    L = grid.half_width
    axp = grid.axis(prime=True)
    xps = np.stack(np.meshgrid(*[axp] * n, indexing="ij"), axis=-1).reshape(-1, n)
    out = []
    for x in grid.x_nodes():
        y = x + t
        s = shift_fn(x, t)
        col = np.empty(len(xps))
        for j, xp in enumerate(xps):
            img = np.hstack([y, xp + s])
            inside = np.all(np.abs(img) <= L, axis=1)
            col[j] = w * np.count_nonzero(F.contains(img) & inside)
        out.append(col)
    return np.concatenate(out)


def _direct_shift(coeffs):
    return lambda x, t: np.einsum("ijk,j,sk->si", coeffs, x, t)


def _sheared_shift(coeffs):
    # C chi_{S(F)}(x, x') reads F at S^{-1}(x + t, x' - Q(t,t)/2), S^{-1}(y, y') = (y, y' + Q(y,y)/2)
    def shift(x, t):
        y = x + t
        return 0.5 * (np.einsum("ijk,sj,sk->si", coeffs, y, y) - np.einsum("ijk,sj,sk->si", coeffs, t, t))

    return shift


def operator_norm(Q, F, q, grid):
    """``||T_Q chi_F||_q`` on the grid."""
    _check_square(Q)
    _check_bench_dim(Q.n_in, grid)
    if q < 1:
        raise DomainError("q must be at least 1")
    if F.dim != 2 * Q.n_in or grid.n != Q.n_in:
        raise DomainError("map, set and grid dimensions disagree")
    _check_inside(F, grid)
    return _grid_norm(F, grid, q, _direct_shift(Q.as_float()))


def lq_norm(values, q, grid):
    """``(cell volume * sum |v|^q)^{1/q}``."""
    if q < 1:
        raise DomainError("q must be at least 1")
    v = np.abs(np.asarray(values, dtype=float))
    return float((grid.cell_volume * np.sum(v**q)) ** (1.0 / q))


def restricted_ratio(Q, F, p, q, grid):
    """``||T_Q chi_F||_q / |F|^{1/p}``."""
    vol = F.volume
    if not vol > 0:
        raise DomainError("F must have positive measure")
    if not math.isfinite(vol):
        raise DomainError("F must have finite measure")
    if p < 1:
        raise DomainError("p must be at least 1")
    return operator_norm(Q, F, q, grid) / vol ** (1.0 / p)


# ----------------------------------------------------------------- Knapp


def knapp_set(delta, n):
    """``{|y| <= delta} x {|y'| <= delta^2}`` componentwise."""
    if not 0 < delta <= 1:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    lo = np.array([-delta] * n + [-(delta**2)] * n)
    return IndicatorSet.from_boxes([(lo, -lo)])


def _reach(Q, radius):
    """Upper bound of ``|Q(x, t)|_inf`` for ``|x|_inf <= radius``, ``t`` in the cube."""
    return float(np.max(np.sum(np.abs(Q.as_float()), axis=(1, 2)))) * radius


def _dyadic_at_most(v):
    return 2.0 ** math.floor(math.log2(v))


def knapp_grid(Q, deltas, h=1 / 256):
    """A grid that resolves every Knapp set in the sweep and never clips.

    ``h_prime`` resolves the thinnest ``delta^2`` slab and ``t_spacing``
    keeps the ``x'`` displacement of one t-step below a quarter of it.
    """
    d = min(deltas)
    dmax = max(deltas)
    x_reach = 1.0 + dmax
    L = math.ceil(max(x_reach, dmax**2 + _reach(Q, x_reach)) / h + 1) * h
    hp = min(h, _dyadic_at_most(d * d / 4))
    # 2L must be a multiple of hp; L is a multiple of h and hp divides h
    lip = max(_reach(Q, x_reach), 1.0)
    ts = min(h, _dyadic_at_most(d * d / (4 * lip)))
    return GridSpec(Q.n_in, L, h, ts, hp)


@dataclass(frozen=True)
class BenchReport:
    ratios: tuple
    p: float
    q: float
    grid: GridSpec
    seed: int = 0
    summary: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "ratios": [dict(r) for r in self.ratios],
            "p": self.p,
            "q": self.q,
            "grid": self.grid.to_json(),
            "seed": self.seed,
            "summary": dict(self.summary),
        }

    def csv_rows(self):
        rows = [("delta", "norm", "volume", "ratio")]
        return rows + [(r["delta"], r["norm"], r["volume"], r["ratio"]) for r in self.ratios]


def knapp_sweep(Q, deltas, p=1.5, q=3.0, grid=None, h=1 / 256, seed=0):
    """Restricted ratios on Knapp sets ``F_delta`` across ``deltas``.

    ``summary`` records the spread max/min of the ratios, the least-squares
    slope of log ratio against log delta, and whether the ratios move
    monotonically with delta.
    """
    _check_square(Q)
    _check_bench_dim(Q.n_in)
    deltas = sorted({float(d) for d in deltas}, reverse=True)
    if not deltas:
        raise DomainError("no deltas given")
    for d in deltas:
        if not 0 < d <= 1:
            raise DomainError(f"delta must lie in (0, 1], got {d}")
    grid = grid or knapp_grid(Q, deltas, h)
    _check_bench_dim(Q.n_in, grid)
    need = max(1.0 + deltas[0], deltas[0] ** 2 + _reach(Q, 1.0 + deltas[0]))
    if grid.half_width < need:
        raise DomainError(f"grid half-width {grid.half_width} clips the support (need {need:.4g})")
    rows = []
    for d in deltas:
        if d < 2 * grid.h or d * d < 2 * grid.hp:
            raise ResolutionError(f"delta = {d} is below the grid resolution (h = {grid.h}, h' = {grid.hp})")
        F = knapp_set(d, Q.n_in)
        norm = operator_norm(Q, F, q, grid)
        vol = F.volume
        rows.append({"delta": d, "norm": norm, "volume": vol, "ratio": norm / vol ** (1.0 / p)})
    r = np.array([row["ratio"] for row in rows])
    summary = {"spread": float(r.max() / r.min())}
    if len(rows) >= 2:
        diffs = np.diff(r)
        summary["monotone"] = bool(np.all(diffs > 0) or np.all(diffs < 0))
        summary["log_slope"] = float(np.polyfit(np.log(deltas), np.log(r), 1)[0])
    return BenchReport(tuple(rows), float(p), float(q), grid, int(seed), summary)


# --------------------------------------------------------- other checks


def multiplicity_check(Q, c, v, trials=0, seed=0):
    """Number of nondegenerate solutions ``x`` of ``Q(x, v) = c``.

    The equation is linear in ``x``: one solution when ``N(v)`` is
    invertible, otherwise no nondegenerate ones. ``trials`` random base
    points re-check that the two-point inflation Jacobian equals
    ``|det N(v)|`` there.
    """
    _check_square(Q)
    N = contract_right(Q, v)
    vec = np.asarray(v, dtype=object if N.dtype == object else float)
    if all(x == 0 for x in vec):
        raise DomainError("v must be nonzero")
    d = det(N)
    if Q.exact and N.dtype == object:
        invertible = d != 0
    else:
        invertible = np.linalg.cond(np.asarray(N, float)) < 1e12
    if not invertible:
        return 0
    Nf = np.asarray(N, dtype=float)
    cf = np.asarray(c, dtype=float)
    x = np.linalg.solve(Nf, cf)
    if not np.allclose(eval_q(Q, x, np.asarray(v, float)), cf, rtol=1e-9, atol=1e-9):
        raise DomainError("linear solve did not reproduce c")
    gen = streams.substream(seed, streams.RANDOM_MAPS, 1)
    zero = np.zeros(Q.n_in)
    for _ in range(int(trials)):
        base = gen.uniform(-1, 1, Q.n_in)
        jac = inflation_jacobian(Q, base, [zero, np.asarray(v, float)])
        if not math.isclose(float(jac), abs(float(d)), rel_tol=1e-9, abs_tol=1e-12):
            raise DomainError("inflation Jacobian depends on the base point")
    return 1


@dataclass(frozen=True)
class ShearCheck:
    direct: float
    sheared: float
    passed: bool
    rel_tol: float

    def to_json(self):
        return {"direct": self.direct, "sheared": self.sheared, "pass": self.passed, "rel_tol": self.rel_tol}


def shear_check(Q, F, q, grid, rel_tol=0.05):
    """``||T_Q chi_F||_q`` directly and through the convolution form.

    For symmetric ``Q`` the shear ``S(x, x') = (x, x' - Q(x, x)/2)``
    conjugates ``T_Q`` to ``C f(x, x') = int f(x + t, x' - Q(t, t)/2) dt``
    and preserves Lebesgue measure, so ``||T_Q chi_F||_q = ||C chi_{S(F)}||_q``.
    """
    _check_square(Q)
    if not is_symmetric(Q):
        raise DomainError("shear_check needs a symmetric map")
    direct = operator_norm(Q, F, q, grid)
    sheared = _grid_norm(F, grid, q, _sheared_shift(Q.as_float()))
    denom = max(abs(direct), abs(sheared))
    ok = denom == 0 or abs(direct - sheared) <= rel_tol * denom
    return ShearCheck(direct, sheared, bool(ok), rel_tol)
