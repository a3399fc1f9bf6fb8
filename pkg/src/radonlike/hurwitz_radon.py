"""Feasibility of nonvanishing rotational curvature and explicit matrix families.

Nondegeneracy in dimension d and codimension n' needs n' real matrices of
size n = d - n' whose nontrivial linear combinations are all invertible.
Such families exist exactly when n' <= rho(n) = 8q + 2^r, where
n = 2^(4q + r) * s with s odd and 0 <= r <= 3.

Families are built from left-multiplication tables of the Cayley-Dickson
algebras (reals, complexes, quaternions, octonions) and the period-8
doubling ``K_i (x) I, omega (x) J_j`` on R^16 (x) R^m.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import lcm

import numpy as np

from . import rng as streams
from .bilinear import BilinearMap
from .errors import DimensionError, DomainError, InfeasibleError, SchemaError
from .linalg import det_is_nonzero, to_fraction


@dataclass(frozen=True)
class FeasibilityReport:
    dim: int
    codim: int
    n: int
    q: int
    r: int
    s: int
    bound: int
    feasible: bool

    def to_json(self):
        return {
            "dim": self.dim,
            "codim": self.codim,
            "n": self.n,
            "q": self.q,
            "r": self.r,
            "s": self.s,
            "bound": self.bound,
            "feasible": self.feasible,
        }


@dataclass(frozen=True, eq=False)
class MatrixFamily:
    """A list of square matrices of one size (the candidate pencil)."""

    n: int
    members: tuple

    def __post_init__(self):
        members = []
        for i, a in enumerate(self.members):
            arr = np.array(a, dtype=object if np.asarray(a).dtype == object else None)
            if arr.ndim != 2 or arr.shape != (self.n, self.n):
                raise DimensionError(
                    f"member {i} has shape {arr.shape}, expected ({self.n}, {self.n})"
                )
            arr.setflags(write=False)
            members.append(arr)
        if not members:
            raise DimensionError("a matrix family needs at least one member")
        object.__setattr__(self, "members", tuple(members))

    def __len__(self):
        return len(self.members)

    def __eq__(self, other):
        if not isinstance(other, MatrixFamily):
            return NotImplemented
        return self.n == other.n and len(self) == len(other) and all(
            np.array_equal(a, b) for a, b in zip(self.members, other.members)
        )

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict) or "n" not in doc or "members" not in doc:
            raise SchemaError("family document needs keys 'n' and 'members'")
        n = doc["n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise SchemaError("n must be a positive integer", ("n",))
        members = doc["members"]
        if not isinstance(members, list) or not members:
            raise SchemaError("members must be a non-empty array", ("members",))
        out = []
        for i, m in enumerate(members):
            if not isinstance(m, list) or len(m) != n:
                raise SchemaError(f"member must have {n} rows", ("members", i))
            for j, row in enumerate(m):
                if not isinstance(row, list) or len(row) != n:
                    raise SchemaError(f"row must have {n} entries", ("members", i, j))
                for k, v in enumerate(row):
                    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
                        raise SchemaError("entries must be numbers", ("members", i, j, k))
            if all(isinstance(v, int) for row in m for v in row):
                out.append(np.array(m, dtype=np.int64))
            else:
                try:
                    out.append(np.array([[to_fraction(v) if not isinstance(v, float) else Fraction(v)
                                          for v in row] for row in m], dtype=object))
                except (ValueError, ZeroDivisionError):
                    raise SchemaError("unparseable entry", ("members", i)) from None
        return cls(n, tuple(out))

    def to_json(self):
        def enc(v):
            if isinstance(v, Fraction):
                return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
            if isinstance(v, (int, np.integer)):
                return int(v)
            return float(v)

        return {"n": self.n, "members": [[[enc(v) for v in row] for row in a] for a in self.members]}


def dyadic_factor(n):
    """Return ``(q, r, s)`` with ``n = 2**(4q + r) * s``, ``s`` odd, ``0 <= r <= 3``."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    a = (n & -n).bit_length() - 1
    q, r = divmod(a, 4)
    return q, r, n >> a


def rho_bound(n):
    q, r, _ = dyadic_factor(n)
    return 8 * q + 2**r


def feasible(dim, codim):
    if codim < 1 or dim < 1:
        raise DomainError("dim and codim must be positive")
    if codim >= dim:
        raise DomainError(f"codim must be smaller than dim, got codim={codim} >= dim={dim}")
    n = dim - codim
    q, r, s = dyadic_factor(n)
    bound = 8 * q + 2**r
    return FeasibilityReport(dim, codim, n, q, r, s, bound, codim <= bound)


# --- construction -----------------------------------------------------------


def _cd_conj(a):
    out = -a
    out[0] = a[0]
    return out


def _cd_mul(a, b):
    """Cayley-Dickson product (p, q)(r, s) = (pr - s*q, sp + qr*)."""
    m = len(a)
    if m == 1:
        return a * b
    h = m // 2
    p, q = a[:h], a[h:]
    r, s = b[:h], b[h:]
    return np.concatenate([_cd_mul(p, r) - _cd_mul(_cd_conj(s), q), _cd_mul(s, p) + _cd_mul(q, _cd_conj(r))])


def division_algebra_units(size):
    """Left multiplication by e_1..e_{size-1} in the algebra of dimension ``size``.

    ``size`` is 1, 2, 4 or 8. Each matrix is a signed permutation that squares
    to ``-I``, and distinct ones anticommute.
    """
    if size not in (1, 2, 4, 8):
        raise DomainError("division algebras exist only in dimensions 1, 2, 4, 8")
    basis = np.eye(size, dtype=np.int64)
    units = []
    for i in range(1, size):
        cols = [_cd_mul(basis[i], basis[j]) for j in range(size)]
        units.append(np.stack(cols, axis=1))
    return units


_TAU = np.array([[1, 0], [0, -1]], dtype=np.int64)
_EPS = np.array([[0, -1], [1, 0]], dtype=np.int64)


def _period_eight_generators():
    """Eight anticommuting complex structures on R^16."""
    octo = division_algebra_units(8)
    gens = [np.kron(a, _TAU) for a in octo]
    gens.append(np.kron(np.eye(8, dtype=np.int64), _EPS))
    return gens


def complex_structures(power):
    """rho(2**power) - 1 anticommuting signed permutations J with J^2 = -I on R^(2**power)."""
    q, r = divmod(power, 4)
    gens = division_algebra_units(2**r)
    if q == 0:
        return gens
    big = _period_eight_generators()
    omega = np.eye(16, dtype=np.int64)
    for k in big:
        omega = omega @ k
    for _ in range(q):
        m = gens[0].shape[0] if gens else 2**r
        eye_m = np.eye(m, dtype=np.int64)
        gens = [np.kron(k, eye_m) for k in big] + [np.kron(omega, j) for j in gens]
    return gens


def construct_family(n, m):
    """``m`` integer matrices of size ``n`` whose nonzero combinations are invertible.

    Members are orthogonal with entries in {-1, 0, 1}, the first is the
    identity and ``(sum l_i A_i)^T (sum l_i A_i) = |l|^2 I``.
    """
    bound = rho_bound(n)
    if m < 1:
        raise DomainError("a family needs at least one member")
    if m > bound:
        raise InfeasibleError(n, m, bound)
    a = (n & -n).bit_length() - 1
    odd = n >> a
    blocks = [np.eye(2**a, dtype=np.int64)] + complex_structures(a)
    eye_odd = np.eye(odd, dtype=np.int64)
    return MatrixFamily(n, tuple(np.kron(eye_odd, b) for b in blocks[:m]))


# --- verification -----------------------------------------------------------


@dataclass(frozen=True)
class FamilyCheck:
    ok: bool
    orthogonal: bool
    anticommuting: bool
    det_trials: int
    det_failures: int
    bad_pair: tuple | None = None
    witness_lambda: tuple | None = None
    messages: tuple = field(default_factory=tuple)

    def __bool__(self):
        return self.ok

    def to_json(self):
        return {
            "ok": self.ok,
            "orthogonal": self.orthogonal,
            "anticommuting": self.anticommuting,
            "det_trials": self.det_trials,
            "det_failures": self.det_failures,
            "bad_pair": list(self.bad_pair) if self.bad_pair is not None else None,
            "witness_lambda": list(self.witness_lambda) if self.witness_lambda is not None else None,
            "messages": list(self.messages),
        }


def _integerize(members):
    """Scale a family to a common integer matrix form (exactly)."""
    if all(np.issubdtype(a.dtype, np.integer) for a in members):
        return [a.astype(object) for a in members], 1
    fr = [np.vectorize(lambda v: Fraction(v) if isinstance(v, float) else to_fraction(v), otypes=[object])(a)
          for a in members]
    scale = 1
    for a in fr:
        for v in a.ravel():
            scale = lcm(scale, v.denominator)
    return [np.vectorize(lambda v: int(v * scale), otypes=[object])(a) for a in fr], scale


def _lambda_candidates(m, trials, seed):
    """Small {0, +-1} combinations first (sign-normalized), then random integers."""
    out = []
    if trials <= 0:
        return out
    for lam in product((0, 1, -1), repeat=m):
        nz = [v for v in lam if v != 0]
        if not nz or nz[0] < 0:
            continue
        out.append(lam)
        if len(out) >= min(trials, 64):
            break
    g = streams.substream(seed, streams.FAMILY_LAMBDA)
    while len(out) < trials:
        lam = tuple(int(v) for v in g.integers(-9, 10, size=m))
        if any(lam):
            out.append(lam)
    return out


def verify_family(fam, trials=1000, seed=0):
    """Check the orthogonality/anticommutation certificate and sample determinants.

    All arithmetic is exact. The certificate ``A_i^T A_i = I`` and
    ``A_i^T A_j + A_j^T A_i = 0`` implies every nontrivial combination is
    invertible; determinant sampling also runs, since user families need not
    be orthogonal.
    """
    members = list(fam.members)
    shapes = {a.shape for a in members}
    if len(shapes) != 1 or members[0].shape[0] != members[0].shape[1]:
        raise DimensionError(f"ragged family: shapes {sorted(shapes)}")
    ints, scale = _integerize(members)
    n, m = fam.n, len(members)
    ident = np.eye(n, dtype=np.int64).astype(object) * (scale * scale)
    messages = []
    orthogonal = True
    anticommuting = True
    bad_pair = None
    for i, a in enumerate(ints):
        if not np.array_equal(a.T.dot(a), ident):
            orthogonal = False
            bad_pair = bad_pair or (i, i)
            messages.append(f"member {i} is not orthogonal")
            break
    for i in range(m):
        for j in range(i + 1, m):
            s = ints[i].T.dot(ints[j]) + ints[j].T.dot(ints[i])
            if np.any(s != 0):
                anticommuting = False
                bad_pair = bad_pair or (i, j)
                messages.append(f"members {i} and {j} violate A_i^T A_j + A_j^T A_i = 0")
                break
        if not anticommuting:
            break

    witness = None
    failures = 0
    lams = _lambda_candidates(m, trials, seed)
    stacked = np.stack([a.astype(np.int64) for a in ints]) if max(
        abs(int(v)) for a in ints for v in a.ravel()) < 2**20 else None
    for lam in lams:
        if stacked is not None:
            combo = np.tensordot(np.array(lam, dtype=np.int64), stacked, axes=1)
        else:
            combo = sum(int(l) * a for l, a in zip(lam, ints))
        if not det_is_nonzero(combo):
            failures += 1
            if witness is None:
                witness = lam
                messages.append(f"det(sum l_i A_i) = 0 at l = {lam}")
    ok = orthogonal and anticommuting and failures == 0
    return FamilyCheck(ok, orthogonal, anticommuting, len(lams), failures, bad_pair, witness, tuple(messages))


def family_to_bilinear(fam):
    """Q with Q_ijk = (A_i)_jk, i.e. Q(x, t)_i = x^T A_i t."""
    members = fam.members
    if all(np.issubdtype(a.dtype, np.integer) for a in members) or all(a.dtype == object for a in members):
        c = np.empty((len(members), fam.n, fam.n), dtype=object)
        for i, a in enumerate(members):
            c[i] = np.vectorize(to_fraction, otypes=[object])(a)
        return BilinearMap(c)
    return BilinearMap(np.stack([np.asarray(a, dtype=float) for a in members]))
