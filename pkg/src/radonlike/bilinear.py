"""Bilinear maps Q : R^n x R^n -> R^n' and their algebraic primitives.

A map is stored as a dense coefficient tensor ``coeffs[i, j, k]`` so that
``Q(x, y)_i = sum_jk coeffs[i, j, k] * x_j * y_k``. Two scalar modes exist:
exact (``Fraction`` entries in an object array) and float64. The mode is a
property of the value, fixed when the map is built.
"""

from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

import numpy as np

from .errors import DimensionError, DomainError, SchemaError
from .linalg import det, is_exact_scalar, to_fraction


def _parse_scalar(v, path):
    if isinstance(v, bool):
        raise SchemaError("booleans are not scalars", path)
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            raise SchemaError(f"cannot parse rational {v!r}", path) from None
    if is_exact_scalar(v):
        return Fraction(int(v))
    if isinstance(v, Fraction):
        return v
    if isinstance(v, Real):
        return float(v)
    raise SchemaError(f"expected a number or 'p/q' string, got {type(v).__name__}", path)


def _as_vector(v, exact, n, name):
    """Coerce ``v`` to a 1-d array of length ``n``, exact when possible."""
    if isinstance(v, np.ndarray) and v.dtype.kind in "fc":
        items = None
    else:
        items = list(np.asarray(v, dtype=object).ravel())
    if exact and items is not None and all(is_exact_scalar(x) or isinstance(x, Fraction) for x in items):
        out = np.empty(len(items), dtype=object)
        out[:] = [to_fraction(x) for x in items]
    else:
        out = np.asarray(v, dtype=float).ravel()
    if out.shape != (n,):
        raise DimensionError(f"{name} must have length {n}, got {out.shape[0]}")
    return out


@dataclass(frozen=True, eq=False)
class BilinearMap:
    """Coefficient tensor of shape ``(n_out, n_in, n_in)``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 3 or c.shape[1] != c.shape[2] or 0 in c.shape:
            raise DimensionError(f"coeffs must have shape (n_out, n_in, n_in), got {c.shape}")
        if c.dtype == object:
            c = np.vectorize(to_fraction, otypes=[object])(c)
        else:
            c = c.astype(float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_in(self):
        return self.coeffs.shape[1]

    @property
    def n_out(self):
        return self.coeffs.shape[0]

    @property
    def exact(self):
        return self.coeffs.dtype == object

    @property
    def square(self):
        return self.n_in == self.n_out

    def as_float(self):
        return self.coeffs.astype(float)

    def slices(self):
        """The matrices ``(Q_i)_{jk}``, one per output coordinate."""
        return [self.coeffs[i] for i in range(self.n_out)]

    def __eq__(self, other):
        if not isinstance(other, BilinearMap) or other.coeffs.shape != self.coeffs.shape:
            return NotImplemented
        return bool(np.all(self.coeffs == other.coeffs))

    def __hash__(self):
        return hash((self.coeffs.shape, tuple(self.coeffs.ravel().tolist())))

    def __call__(self, x, y):
        return eval_q(self, x, y)

    @classmethod
    def from_nested(cls, nested, n_in=None, n_out=None):
        """Build from nested lists; exact unless some entry is a float."""
        path = ("coeffs",)
        if not isinstance(nested, (list, tuple)) or not nested:
            raise SchemaError("coeffs must be a non-empty nested array", path)
        rows = []
        for i, plane in enumerate(nested):
            if not isinstance(plane, (list, tuple)):
                raise SchemaError("expected an array", path + (i,))
            rows.append([])
            for j, row in enumerate(plane):
                if not isinstance(row, (list, tuple)):
                    raise SchemaError("expected an array", path + (i, j))
                rows[-1].append([_parse_scalar(v, path + (i, j, k)) for k, v in enumerate(row)])
        d_out = len(rows)
        d_in = len(rows[0])
        for i, plane in enumerate(rows):
            if len(plane) != d_in:
                raise SchemaError(f"expected {d_in} rows, got {len(plane)}", path + (i,))
            for j, row in enumerate(plane):
                if len(row) != d_in:
                    raise SchemaError(f"expected {d_in} entries, got {len(row)}", path + (i, j))
        if n_in is not None and n_in != d_in:
            raise SchemaError(f"n_in={n_in} but coeffs imply {d_in}", ("n_in",))
        if n_out is not None and n_out != d_out:
            raise SchemaError(f"n_out={n_out} but coeffs imply {d_out}", ("n_out",))
        flat = [v for plane in rows for row in plane for v in row]
        if all(isinstance(v, Fraction) for v in flat):
            arr = np.empty((d_out, d_in, d_in), dtype=object)
            arr[...] = rows
            return cls(arr)
        return cls(np.array(rows, dtype=float))

    def to_nested(self):
        def enc(v):
            if isinstance(v, Fraction):
                return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
            return float(v)

        return [[[enc(v) for v in row] for row in plane] for plane in self.coeffs]

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict):
            raise SchemaError("tensor document must be an object")
        for key in ("n_in", "n_out", "coeffs"):
            if key not in doc:
                raise SchemaError(f"missing key {key!r}")
        for key in ("n_in", "n_out"):
            if not isinstance(doc[key], int) or isinstance(doc[key], bool) or doc[key] < 1:
                raise SchemaError(f"{key} must be a positive integer", (key,))
        return cls.from_nested(doc["coeffs"], n_in=doc["n_in"], n_out=doc["n_out"])

    def to_json(self):
        return {"n_in": self.n_in, "n_out": self.n_out, "coeffs": self.to_nested()}


def complex_multiplication():
    """Q(x, y) = (x1 y1 - x2 y2, x1 y2 + x2 y1)."""
    c = np.empty((2, 2, 2), dtype=object)
    c[...] = [[[1, 0], [0, -1]], [[0, 1], [1, 0]]]
    return BilinearMap(c)


def product_type(n=2):
    """Q(x, t) = (x1 t1, ..., xn tn)."""
    c = np.zeros((n, n, n), dtype=object)
    c[...] = 0
    for i in range(n):
        c[i, i, i] = 1
    return BilinearMap(c)


def zero_map(n, n_out=None):
    c = np.empty((n_out or n, n, n), dtype=object)
    c[...] = Fraction(0)
    return BilinearMap(c)


def random_integer_map(rng, n, n_out=None, low=-3, high=3):
    c = rng.integers(low, high + 1, size=(n_out or n, n, n))
    return BilinearMap(np.vectorize(Fraction, otypes=[object])(c))


def eval_q(Q, x, y):
    x = _as_vector(x, Q.exact, Q.n_in, "x")
    y = _as_vector(y, Q.exact, Q.n_in, "y")
    c = Q.coeffs if (x.dtype == object and y.dtype == object) else Q.as_float()
    return np.einsum("ijk,j,k->i", c, x, y)


def contract_right(Q, v):
    """Matrix N(v) of the linear map x -> Q(x, v)."""
    v = _as_vector(v, Q.exact, Q.n_in, "v")
    c = Q.coeffs if v.dtype == object else Q.as_float()
    return np.einsum("ijk,k->ij", c, v)


def contract_left(Q, lam):
    """Matrix M(lam) with entries sum_i lam_i Q_ijk, so x^T M y = lam . Q(x, y)."""
    lam = _as_vector(lam, Q.exact, Q.n_out, "lambda")
    c = Q.coeffs if lam.dtype == object else Q.as_float()
    return np.einsum("ijk,i->jk", c, lam)


def contract_right_batch(coeffs, vs):
    """N(v) for every row of ``vs`` (float path used by the estimators)."""
    n_out, n_in, _ = coeffs.shape
    flat = np.moveaxis(coeffs, 2, 0).reshape(n_in, n_out * n_in)
    return (vs @ flat).reshape(len(vs), n_out, n_in)


def perturb_u(Q, u):
    """Q_u(x, y) = Q(x, y) + (u_i x_i y_i)_i."""
    if not Q.square:
        raise DomainError(f"perturbation needs n_out == n_in, got {Q.n_out} != {Q.n_in}")
    u = _as_vector(u, Q.exact, Q.n_in, "u")
    c = Q.coeffs.copy() if u.dtype == object else Q.as_float()
    for i in range(Q.n_in):
        c[i, i, i] = c[i, i, i] + u[i]
    return BilinearMap(c)


def adjoint(Q):
    """Q*(x, t) = Q(t, x)."""
    return BilinearMap(np.ascontiguousarray(np.swapaxes(Q.coeffs, 1, 2)))


def symmetrize(Q):
    half = Fraction(1, 2) if Q.exact else 0.5
    return BilinearMap((Q.coeffs + np.swapaxes(Q.coeffs, 1, 2)) * half)


def is_symmetric(Q, atol=1e-12):
    swapped = np.swapaxes(Q.coeffs, 1, 2)
    if Q.exact:
        return bool(np.all(Q.coeffs == swapped))
    return bool(np.allclose(Q.coeffs, swapped, rtol=0.0, atol=atol))


def inflation_jacobian(Phi, x, ts):
    """|det| of the Jacobian of (x, x', t1..tk) -> (x + ti, x' + Phi(x, ti))_i.

    After column reduction the matrix has block rows
    ``[(d/dx - d/dt) Phi(x, t_i) | I_{n'}]``; for bilinear ``Phi`` the first
    block is ``N(t_i) - (d/dt) Phi(x, .)`` with ``(d/dt Phi)_{ab} = sum_j
    Phi_{ajb} x_j``.
    """
    k = len(ts)
    if k < 2:
        raise DimensionError("the inflation map needs at least two t-vectors")
    n, m = Phi.n_in, Phi.n_out
    if n != m * (k - 1):
        raise DimensionError(f"need n_in = n_out * (k - 1); got {n} != {m} * {k - 1}")
    x = _as_vector(x, Phi.exact, n, "x")
    ts = [_as_vector(t, Phi.exact, n, f"t[{i}]") for i, t in enumerate(ts)]
    exact = x.dtype == object and all(t.dtype == object for t in ts)
    one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
    d_dt = contract_right(adjoint(Phi), x)
    rows = []
    for t in ts:
        block = contract_right(Phi, t) - d_dt
        ident = np.full((m, m), zero, dtype=object if exact else float)
        for a in range(m):
            ident[a, a] = one
        rows.append(np.hstack([block, ident]))
    mat = np.vstack(rows)
    value = det(mat if exact else mat.astype(float))
    return abs(value)
