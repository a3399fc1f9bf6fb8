"""Rotational-curvature verdicts for bilinear maps.

For the class T_Q the incidence relation is ``Phi(x, x'; y, y') = Q(x, y - x)
+ x' - y' = 0``, and nondegeneracy reduces to invertibility of
``sum_i lam_i Q_i`` for every ``lam != 0``. Equivalently ``det N(v) != 0`` for
every ``v != 0``, where ``N(v)`` is the matrix of ``x -> Q(x, v)``. Verdicts
come from a numerical search of the unit sphere (or a parity argument for
odd n) and are not certificates.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng as streams
from .bilinear import contract_left, contract_right_batch
from .errors import DomainError
from .hurwitz_radon import MatrixFamily
from .linalg import batch_det, det


@dataclass(frozen=True)
class SearchConfig:
    seeds_per_dim: int = 4096
    iterations: int = 200
    refine: int = 16
    initial_step: float = 0.25
    seed: int = 0
    workers: int = 1

    def to_json(self):
        return {
            "seeds_per_dim": self.seeds_per_dim,
            "iterations": self.iterations,
            "refine": self.refine,
            "initial_step": self.initial_step,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CurvatureReport:
    verdict: str
    min_abs_det: float
    witness: tuple
    method: str
    tolerance: float
    seed: int
    numerical: bool = True

    def to_json(self):
        return {
            "verdict": self.verdict,
            "min_abs_det": self.min_abs_det,
            "witness": list(self.witness),
            "method": self.method,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "numerical": self.numerical,
        }


@dataclass(frozen=True, eq=False)
class MongeAmpereAssembly:
    """The (d + n') x (d + n') Monge-Ampere matrix as an affine function of lambda.

    Coordinates are ordered ``(x, x')`` for rows and ``(y, y')`` for
    columns, with the Phi-derivative border last.
    """

    lambda_dim: int
    hessians: tuple
    dphi_dx: np.ndarray
    dphi_dy: np.ndarray
    point: tuple = field(default=())

    def evaluate(self, lam):
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.lambda_dim,):
            raise DomainError(f"lambda must have length {self.lambda_dim}")
        d = self.dphi_dx.shape[0]
        size = d + self.lambda_dim
        out = np.zeros((size, size))
        out[:d, :d] = sum(l * h for l, h in zip(lam, self.hessians))
        out[:d, d:] = self.dphi_dx
        out[d:, :d] = self.dphi_dy
        return out

    def det(self, lam):
        return float(np.linalg.det(self.evaluate(lam)))


def _require_square(Q):
    if not Q.square:
        raise DomainError(f"curvature needs n_out == n_in, got {Q.n_out} != {Q.n_in}")


def assemble_monge_ampere(Q, point=None):
    """Monge-Ampere data for ``Phi(x, x'; y, y') = Q(x, y - x) + x' - y'``."""
    _require_square(Q)
    n = Q.n_in
    c = Q.as_float()
    if point is None:
        x = np.zeros(n)
        y = np.zeros(n)
    else:
        x, y = np.asarray(point[0], float), np.asarray(point[1], float)
    d = 2 * n
    hessians = []
    for i in range(n):
        h = np.zeros((d, d))
        h[:n, :n] = c[i]
        hessians.append(h)
    # dPhi_i/dx_a = sum_k Q_iak (y - x)_k - sum_j Q_ija x_j ; dPhi_i/dx'_a = delta_ia
    dx = np.zeros((d, n))
    dx[:n, :] = (np.einsum("iak,k->ai", c, y - x) - np.einsum("ija,j->ai", c, x))
    dx[n:, :] = np.eye(n)
    # dPhi_i/dy_b = sum_j Q_ijb x_j ; dPhi_i/dy'_b = -delta_ib
    dy = np.zeros((n, d))
    dy[:, :n] = np.einsum("ijb,j->ib", c, x)
    dy[:, n:] = -np.eye(n)
    return MongeAmpereAssembly(n, tuple(hessians), dx, dy, (tuple(x), tuple(y)))


def reduced_pencil(Q):
    _require_square(Q)
    return MatrixFamily(Q.n_in, tuple(Q.slices()))


def _abs_det_on(coeffs, side):
    if side == "right":
        return lambda vs: np.abs(batch_det(contract_right_batch(coeffs, vs)))
    return lambda vs: np.abs(batch_det(np.einsum("ijk,si->sjk", coeffs, vs)))


def _signed_det_on(coeffs, side):
    if side == "right":
        return lambda vs: batch_det(contract_right_batch(coeffs, vs))
    return lambda vs: batch_det(np.einsum("ijk,si->sjk", coeffs, vs))


def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _descend(f, starts, iterations, step0):
    """Projected coordinate descent with step halving, vectorized over starts."""
    v = starts.copy()
    fv = f(v)
    k, n = v.shape
    step = np.full(k, step0)
    moves = np.concatenate([np.eye(n), -np.eye(n)])
    for _ in range(iterations):
        trial = _normalize(v[:, None, :] + step[:, None, None] * moves[None, :, :])
        ft = f(trial.reshape(-1, n)).reshape(k, 2 * n)
        best = np.argmin(ft, axis=1)
        fbest = ft[np.arange(k), best]
        better = fbest < fv
        v[better] = trial[np.arange(k), best][better]
        fv[better] = fbest[better]
        step[~better] *= 0.5
    return v, fv


def _bisect_arc(g, v, w, steps=200):
    """Locate a sign change of ``g`` on the great circle from ``v`` towards ``w``."""
    cosang = float(np.clip(v @ w, -1.0, 1.0))
    u = w - cosang * v
    if np.linalg.norm(u) < 1e-12:
        # w is antipodal: go around through any orthogonal direction
        e = np.eye(len(v))[np.argmin(np.abs(v))]
        u = e - (e @ v) * v
    u = u / np.linalg.norm(u)
    ang = float(np.arccos(cosang)) if np.linalg.norm(w + v) > 1e-12 else np.pi

    def point(a):
        return np.cos(a) * v + np.sin(a) * u

    lo, hi = 0.0, ang
    glo = g(point(lo)[None])[0]
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        gm = g(point(mid)[None])[0]
        if gm == 0.0:
            return point(mid)
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    a, b = point(lo), point(hi)
    return a if abs(g(a[None])[0]) <= abs(g(b[None])[0]) else b


def sphere_min_abs_det(Q, config=SearchConfig(), side="right"):
    """Smallest |det| found on the unit sphere, with its location.

    ``side="right"`` minimizes ``|det N(v)|``; ``side="left"`` minimizes
    ``|det sum_i lam_i Q_i|``. The value is an evaluated point, hence an
    upper bound for the true minimum.
    """
    _require_square(Q)
    n = Q.n_in
    coeffs = Q.as_float()
    f = _abs_det_on(coeffs, side)
    g = _signed_det_on(coeffs, side)

    def sample(gen, size, _):
        v = _normalize(gen.standard_normal((size, n)))
        return v, g(v)

    total = max(config.seeds_per_dim * n, 1)
    parts = streams.map_chunks(sample, config.seed, streams.SPHERE, total, config.workers, chunk=4096)
    seeds = np.concatenate([p[0] for p in parts])
    signed = np.concatenate([p[1] for p in parts])
    order = np.argsort(np.abs(signed), kind="stable")
    starts = seeds[order[: max(1, min(config.refine, len(seeds)))]]
    refined, fr = _descend(f, starts, config.iterations, config.initial_step)

    candidates = [refined[i] for i in range(len(refined))]
    best = refined[int(np.argmin(fr))]
    gb = g(best[None])[0]
    if gb != 0.0:
        opposite = np.flatnonzero(np.sign(signed) == -np.sign(gb))
        if opposite.size:
            w = seeds[opposite[int(np.argmax(seeds[opposite] @ best))]]
            candidates.append(_bisect_arc(g, best, w))
    cand = _normalize(np.array(candidates))
    vals = f(cand)
    i = int(np.argmin(vals))
    return float(vals[i]), cand[i]


def curvature_verdict(Q, tolerance=1e-8, config=SearchConfig()):
    """Classify T_Q as nondegenerate, degenerate or inconclusive.

    Odd n >= 3 is degenerate by parity: ``det N(-v) = -det N(v)`` forces a
    zero on the sphere. The search still runs to produce a witness. Values
    within a factor 10 above the tolerance are reported inconclusive.
    """
    _require_square(Q)
    if tolerance <= 0:
        raise DomainError("tolerance must be positive")
    value, witness = sphere_min_abs_det(Q, config)
    if Q.n_in % 2 == 1 and Q.n_out >= 2:
        verdict, method = "degenerate", "parity"
    else:
        method = "search"
        if value <= tolerance:
            verdict = "degenerate"
        elif value <= 10 * tolerance:
            verdict = "inconclusive"
        else:
            verdict = "nondegenerate"
    return CurvatureReport(verdict, value, tuple(float(x) for x in witness), method, tolerance, config.seed)


def pencil_det(Q, lam):
    """det of sum_i lam_i Q_i in the mode of the inputs."""
    return det(contract_left(Q, lam))
