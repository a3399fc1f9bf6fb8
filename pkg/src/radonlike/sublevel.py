"""Sublevel-set measures of ``|det N(t)|`` and the F-integral machinery.

Measures are plain Monte-Carlo estimates over ``t`` uniform in ``[-1, 1]^n``.
The F-integrals have integrands that blow up like ``1 / (s log(1/s)^{2n+1})``
near the zero set, which gives plain Monte-Carlo an infinite variance. They
use importance sampling of every coordinate's magnitude from a defensive
mixture with a logarithmic tail, and evaluate everything in log space.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaln, hyp1f1

from . import rng as streams
from .bilinear import contract_right_batch, perturb_u
from .curvature import SearchConfig, curvature_verdict
from .errors import DomainError, FitError, HypothesisError
from .linalg import batch_det
from .polynomial import SparsePoly, det_of_contraction

MIN_SAMPLES = 1000


def q_reference(Q):
    """Short content hash identifying a map in reports."""
    blob = json.dumps(Q.to_json(), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- measures


@dataclass(frozen=True)
class SublevelProfile:
    q_ref: str
    eps: tuple
    measure: tuple
    ci_halfwidth: tuple
    hits: tuple
    samples: int
    seed: int
    n: int

    @property
    def full_measure(self):
        return float(2**self.n)

    def to_json(self):
        return {
            "q_ref": self.q_ref,
            "n": self.n,
            "eps": list(self.eps),
            "measure": list(self.measure),
            "ci_halfwidth": list(self.ci_halfwidth),
            "hits": list(self.hits),
            "samples": self.samples,
            "seed": self.seed,
        }

    def csv_rows(self):
        return [("eps", "measure", "ci")] + list(zip(self.eps, self.measure, self.ci_halfwidth))


def _check_square(Q):
    if not Q.square:
        raise DomainError(f"needs n_out == n_in, got {Q.n_out} != {Q.n_in}")


def _check_samples(samples):
    if int(samples) < MIN_SAMPLES:
        raise DomainError(f"samples must be at least {MIN_SAMPLES}, got {samples}")


def _hit_counts(Q, eps_ascending, samples, seed, workers):
    coeffs = Q.as_float()
    n = Q.n_in

    def chunk(gen, size, _):
        t = gen.uniform(-1.0, 1.0, size=(size, n))
        d = np.sort(np.abs(batch_det(contract_right_batch(coeffs, t))))
        return np.searchsorted(d, eps_ascending, side="right")

    parts = streams.map_chunks(chunk, seed, streams.SUBLEVEL, samples, workers)
    return np.sum(parts, axis=0)


def _measure_and_ci(hits, samples, n):
    p = hits / samples
    scale = 2.0**n
    return scale * p, 3.0 * scale * np.sqrt(p * (1.0 - p) / samples)


def sublevel_measure(Q, eps, samples=1_000_000, seed=0, workers=1):
    """Estimate ``|{t in [-1,1]^n : |det N(t)| <= eps}|`` with a 3-sigma half-width."""
    _check_square(Q)
    _check_samples(samples)
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    hits = _hit_counts(Q, np.array([float(eps)]), int(samples), seed, workers)
    m, ci = _measure_and_ci(hits.astype(float), int(samples), Q.n_in)
    return float(m[0]), float(ci[0])


def sublevel_profile(Q, eps_grid, samples=1_000_000, seed=0, workers=1, q_ref=None):
    """Measures for a whole eps grid from one shared sample stream."""
    _check_square(Q)
    _check_samples(samples)
    eps = np.asarray(sorted({float(e) for e in eps_grid}), dtype=float)
    if eps.size < 4:
        raise DomainError("the eps grid needs at least 4 distinct points")
    if eps[0] <= 0:
        raise DomainError("eps values must be positive")
    hits = _hit_counts(Q, eps, int(samples), seed, workers)
    m, ci = _measure_and_ci(hits.astype(float), int(samples), Q.n_in)
    order = slice(None, None, -1)
    return SublevelProfile(
        q_ref or q_reference(Q),
        tuple(eps[order].tolist()),
        tuple(m[order].tolist()),
        tuple(ci[order].tolist()),
        tuple(int(h) for h in hits[order]),
        int(samples),
        int(seed),
        Q.n_in,
    )


@dataclass(frozen=True)
class ExponentFit:
    theta_hat: float
    window: tuple
    c_theta: dict
    points: int
    residuals: tuple
    notes: tuple = ()

    def to_json(self):
        return {
            "theta_hat": self.theta_hat,
            "window": list(self.window),
            "c_theta": {repr(float(k)): v for k, v in self.c_theta.items()},
            "points": self.points,
            "residuals": list(self.residuals),
            "notes": list(self.notes),
        }


def _check_thetas(thetas, closed_left=True):
    out = []
    for th in thetas:
        th = float(th)
        ok = (0.0 <= th < 1.0) if closed_left else (0.0 < th < 1.0)
        if not ok:
            raise DomainError(f"theta must lie in {'[0' if closed_left else '(0'}, 1), got {th}")
        out.append(th)
    return out


def fit_exponent(profile, thetas=(), min_hits=100, max_fraction=0.5):
    """Least-squares slope of log measure against log eps.

    Points with fewer than ``min_hits`` hits, or measure at or above
    ``max_fraction`` of the full measure, are left out of the window.
    """
    thetas = _check_thetas(thetas)
    eps = np.asarray(profile.eps, dtype=float)
    meas = np.asarray(profile.measure, dtype=float)
    hits = np.asarray(profile.hits)
    full = profile.full_measure
    if np.all(hits == profile.samples):
        # det vanishes identically on the samples: the measure does not depend on eps
        window = (float(eps.min()), float(eps.max()))
        c = {th: float(np.max(meas / eps**th)) for th in thetas}
        return ExponentFit(0.0, window, c, len(eps), tuple(0.0 for _ in eps), ("every point saturated",))
    usable = (hits >= min_hits) & (meas < max_fraction * full)
    if usable.sum() < 4:
        raise FitError(
            f"only {int(usable.sum())} usable points (need 4); extend the eps grid or raise samples"
        )
    x, y = np.log(eps[usable]), np.log(meas[usable])
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    e, m = eps[usable], meas[usable]
    c = {th: float(np.max(m / e**th)) for th in thetas}
    window = (float(e.min()), float(e.max()))
    return ExponentFit(float(slope), window, c, int(usable.sum()), tuple(residuals.tolist()))


# ------------------------------------------------------------- F function


def log_F(b, n):
    """``log F(exp(-b))`` for ``F(s) = int_0^1 rho^{2n} |s|^{rho - 1} d rho``.

    ``b = -log|s|`` may be any real or ``+inf`` (``s = 0``). Large ``b`` uses
    the incomplete-gamma form, which stays accurate where ``F`` overflows.
    """
    b = np.asarray(b, dtype=float)
    k = 2 * n + 1
    big = b >= 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        bb = np.where(big & np.isfinite(b), b, 2.0)
        tail = bb + np.log(gammainc(k, bb)) + gammaln(k) - k * np.log(bb)
        small = np.log(hyp1f1(1.0, k + 1.0, np.where(big, 0.0, b)) / k)
    out = np.where(big, tail, small)
    out = np.where(np.isposinf(b), np.inf, out)
    return out


def eval_F(s, n):
    s = abs(float(s))
    if s == 0.0:
        return math.inf
    return float(np.exp(log_F(-math.log(s), n)))


def _lower_constant(theta, n):
    a = (1.0 - theta) ** (2 * n + 1)
    return min(a, 1.0 - a)


def f_lower_bound(theta, s, n):
    """``min{(1-theta)^{2n+1}, 1-(1-theta)^{2n+1}} / (2n+1) * |s|^{-theta}``."""
    (theta,) = _check_thetas([theta], closed_left=False)
    s = abs(float(s))
    if s == 0.0:
        return math.inf
    return _lower_constant(theta, n) / (2 * n + 1) * s**-theta


def tchebyshev_constant(integral, theta, n):
    """C with ``|{|det| <= eps}| <= C eps^theta`` given ``int F(|det|) <= integral``."""
    (theta,) = _check_thetas([theta], closed_left=False)
    if not math.isfinite(integral) or integral < 0:
        raise DomainError("the F-integral must be finite and nonnegative")
    return integral * (2 * n + 1) / _lower_constant(theta, n)


# ---------------------------------------------------- importance sampling


# Cap on L = -log|z| for the heavy-tailed component. Beyond it the float
# cancellation between log F and the log weight loses all precision, while the
# integrand mass with |z| < exp(-LOG_CAP) is below 1e-8.
LOG_CAP = 1e9


def _defensive_coordinates(gen, size, dim):
    """Signed coordinates in [-1, 1]^dim, as (sign, log|z|, log weight).

    Each magnitude ``r`` comes from ``1/2 uniform + 1/2 (a-1) / (c r (1 + L)^a)``
    with ``L = -log r``, ``a = 1 + 1/dim`` and the heavy part truncated at
    ``L <= LOG_CAP`` (``c`` its normalizer). The weight ``1/g(r)`` keeps
    ``F * weight`` bounded near the coordinate hyperplanes.
    """
    a = 1.0 + 1.0 / dim
    c = -math.expm1(-(a - 1.0) * math.log1p(LOG_CAP))
    pick = gen.random((size, dim)) < 0.5
    v = gen.random((size, dim))
    signs = np.where(gen.random((size, dim)) < 0.5, -1.0, 1.0)
    s = np.where(pick, -np.log1p(-v), np.expm1(-np.log1p(-c * v) / (a - 1.0)))
    heavy = math.log(0.5) + math.log(a - 1.0) - math.log(c) + s - a * np.log1p(s)
    logw = -np.logaddexp(math.log(0.5), np.where(s <= LOG_CAP, heavy, -np.inf))
    return signs, -s, logw.sum(axis=1)


def _f_estimate_chunks(poly, n_f, half_widths, samples, seed, stream, workers, lead=None):
    """Per-sample values of ``F(|poly(z)|) / g(z)`` (and the paired ``lead`` values)."""
    dim = poly.nvars
    log_a = np.log(np.asarray(half_widths, dtype=float))

    def chunk(gen, size, _):
        signs, logs, logw = _defensive_coordinates(gen, size, dim)
        logs = logs + log_a
        out = []
        for p in (poly,) if lead is None else (poly, lead):
            _, lp = p.log_abs(signs, logs)
            with np.errstate(over="ignore"):
                out.append(np.exp(log_F(-lp, n_f) + logw))
        return out

    parts = streams.map_chunks(chunk, seed, stream, samples, workers)
    volume = float(np.prod(2.0 * np.asarray(half_widths, dtype=float)))
    return [volume * np.concatenate([p[i] for p in parts]) for i in range(len(parts[0]))]


def _mean_ci(x):
    m = float(np.mean(x))
    if not math.isfinite(m):
        return m, math.inf
    with np.errstate(over="ignore"):
        return m, float(3.0 * np.std(x) / math.sqrt(x.size))


@dataclass(frozen=True)
class FIntegral:
    estimate: float
    ci_halfwidth: float
    finite: bool
    batch_means: tuple
    samples: int
    seed: int

    def to_json(self):
        return {
            "estimate": self.estimate,
            "ci_halfwidth": self.ci_halfwidth,
            "finite": self.finite,
            "batch_means": list(self.batch_means),
            "samples": self.samples,
            "seed": self.seed,
        }


def _stability(values, batches=10, rel=0.05):
    means = [float(np.mean(b)) for b in np.array_split(values, batches)]
    if not all(math.isfinite(m) for m in means):
        return False, means
    running = np.cumsum(means) / np.arange(1, batches + 1)
    final = running[-1]
    if final == 0.0:
        return True, means
    return bool((running.max() - running.min()) / abs(final) < rel), means


def integral_F(Q, samples=1_000_000, seed=0, workers=1):
    """``int_{[-1,1]^n} F(|det N(t)|) dt`` with a divergence flag.

    The estimate is declared finite when the running mean over 10 sample
    batches varies by less than 5%.
    """
    _check_square(Q)
    _check_samples(samples)
    n = Q.n_in
    poly = det_of_contraction(Q.as_float())
    (x,) = _f_estimate_chunks(poly, n, [1.0] * n, int(samples), seed, streams.F_INTEGRAL, workers)
    est, ci = _mean_ci(x)
    finite, means = _stability(x)
    if not math.isfinite(est):
        est, ci, finite = math.inf, math.inf, False
    return FIntegral(est, ci, finite, tuple(means), int(samples), int(seed))


@dataclass(frozen=True)
class DoubleIntegralCheck:
    estimate: float
    ci_halfwidth: float
    bound: float
    passed: bool
    samples: int
    seed: int

    def to_json(self):
        return {
            "estimate": self.estimate,
            "ci_halfwidth": self.ci_halfwidth,
            "bound": self.bound,
            "pass": self.passed,
            "samples": self.samples,
            "seed": self.seed,
        }


def double_integral_check(Q, samples=1_000_000, seed=0, workers=1):
    """Joint estimate of ``int int F(|det N_u(t)|) dt du`` against ``2^{2n}``."""
    _check_square(Q)
    _check_samples(samples)
    n = Q.n_in
    poly = det_of_contraction(Q.as_float(), perturb=True)
    (x,) = _f_estimate_chunks(poly, n, [1.0] * (2 * n), int(samples), seed, streams.DOUBLE_INTEGRAL, workers)
    est, ci = _mean_ci(x)
    bound = float(4**n)
    return DoubleIntegralCheck(est, ci, bound, bool(est <= bound + ci), int(samples), int(seed))


# -------------------------------------------------------- rearrangement


def multiaffine(terms, nvars=None):
    """Validate a polynomial given as ``{exponent tuple: coeff}`` and return it.

    Raises HypothesisError if some variable appears squared.
    """
    items = {tuple(int(e) for e in k): float(v) for k, v in dict(terms).items()}
    if not items:
        raise DomainError("phi has no terms")
    lengths = {len(k) for k in items}
    if len(lengths) != 1 or (nvars is not None and lengths != {nvars}):
        raise DomainError("exponent tuples must all have the same length")
    for k, v in items.items():
        if any(e < 0 for e in k):
            raise DomainError(f"negative exponent in {k}")
        if v != 0.0 and any(e > 1 for e in k):
            raise HypothesisError(f"phi is not multiaffine: term {k} has a repeated variable")
    return SparsePoly.from_dict(items, lengths.pop())


def det_multiaffine(Q, t):
    """``u -> det N_u(t)`` as a multiaffine term dictionary in ``u``."""
    _check_square(Q)
    n = Q.n_in
    t = np.asarray(t, dtype=float)
    full = det_of_contraction(Q.as_float(), perturb=True).to_dict()
    out = {}
    for e, c in full.items():
        ue = e[n:]
        out[ue] = out.get(ue, 0.0) + c * float(np.prod(t ** np.array(e[:n])))
    return out


@dataclass(frozen=True)
class RearrangementCheck:
    lhs: float
    rhs: float
    ci_halfwidth: float
    passed: bool
    equality: bool
    samples: int
    seed: int

    def to_json(self):
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ci_halfwidth": self.ci_halfwidth,
            "pass": self.passed,
            "equality": self.equality,
            "samples": self.samples,
            "seed": self.seed,
        }


def rearrangement_check(phi, box, F_dim, samples=200_000, seed=0, workers=1):
    """Compare ``int_B F(|phi|)`` with ``int_B F(|c u_1...u_n|)``.

    ``c`` is the coefficient of ``u_1...u_n`` in ``phi``. Both sides use the
    same samples, and the 3-sigma half-width is that of the paired
    difference.
    """
    poly = phi if isinstance(phi, SparsePoly) else multiaffine(phi)
    if np.any(poly.exps > 1):
        raise HypothesisError("phi is not multiaffine")
    dim = poly.nvars
    box = [float(b) for b in box]
    if len(box) != dim or min(box) <= 0:
        raise DomainError(f"box must list {dim} positive half-widths")
    _check_samples(samples)
    top = tuple([1] * dim)
    c = poly.to_dict().get(top, 0.0)
    lead = SparsePoly.from_dict({top: c}, dim)
    lhs_x, rhs_x = _f_estimate_chunks(poly, F_dim, box, int(samples), seed, streams.REARRANGE, workers, lead)
    lhs, rhs = float(np.mean(lhs_x)), float(np.mean(rhs_x))
    if math.isinf(rhs):
        return RearrangementCheck(lhs, rhs, math.inf, True, False, int(samples), int(seed))
    diff = lhs_x - rhs_x
    with np.errstate(over="ignore"):
        ci = float(3.0 * np.std(diff) / math.sqrt(diff.size))
    return RearrangementCheck(lhs, rhs, ci, bool(lhs <= rhs + ci), bool(abs(lhs - rhs) <= ci), int(samples), int(seed))


# ---------------------------------------------------------- perturbation


@dataclass(frozen=True)
class PerturbationTrial:
    index: int
    u: tuple
    theta_hat: float | None
    verdict: str
    min_abs_det: float
    good_theta: bool

    def to_json(self):
        return {
            "index": self.index,
            "u": list(self.u),
            "theta_hat": self.theta_hat,
            "verdict": self.verdict,
            "min_abs_det": self.min_abs_det,
            "good_theta": self.good_theta,
        }


@dataclass(frozen=True)
class PerturbationReport:
    q_ref: str
    trials: int
    radius: float
    theta_target: float
    good_theta_fraction: float | None
    nondegenerate_fraction: float | None
    records: tuple = field(default=())
    settings: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "q_ref": self.q_ref,
            "trials": self.trials,
            "radius": self.radius,
            "theta_target": self.theta_target,
            "good_theta_fraction": self.good_theta_fraction,
            "nondegenerate_fraction": self.nondegenerate_fraction,
            "records": [r.to_json() for r in self.records],
            "settings": dict(self.settings),
        }

    def csv_rows(self):
        rows = [("index", "theta_hat", "verdict", "min_abs_det")]
        return rows + [(r.index, r.theta_hat, r.verdict, r.min_abs_det) for r in self.records]


DEFAULT_PERTURB_EPS = tuple(np.logspace(-10, 1, 89).tolist())


def perturbation_experiment(
    Q,
    trials=100,
    radius=1.0,
    theta_target=0.9,
    eps_grid=DEFAULT_PERTURB_EPS,
    samples=1 << 26,
    seed=0,
    min_hits=100,
    max_fraction=0.002,
    tolerance=1e-8,
    search=None,
    workers=1,
):
    """Fraction of random ``u`` for which ``Q_u`` looks good.

    ``u`` is uniform in ``[-radius, radius]^n``. Each trial fits the
    sublevel exponent of ``Q_u`` and runs the curvature search; a trial
    whose fit fails counts as not reaching ``theta_target``.
    """
    _check_square(Q)
    if trials < 0:
        raise DomainError("trials must be nonnegative")
    if not radius > 0:
        raise DomainError("radius must be positive")
    (theta_target,) = _check_thetas([theta_target], closed_left=False)
    search = search or SearchConfig(seed=seed)
    n = Q.n_in
    records = []
    for i in range(int(trials)):
        u = streams.substream(seed, streams.PERTURB_U, i).uniform(-radius, radius, size=n)
        Qu = perturb_u(Q, u)
        trial_seed = streams.derive_seed(seed, streams.PERTURB_TRIAL, i)
        prof = sublevel_profile(Qu, eps_grid, samples, trial_seed, workers)
        try:
            theta = fit_exponent(prof, (), min_hits, max_fraction).theta_hat
        except FitError:
            theta = None
        rep = curvature_verdict(Qu, tolerance, search)
        good = theta is not None and theta >= theta_target
        records.append(PerturbationTrial(i, tuple(u.tolist()), theta, rep.verdict, rep.min_abs_det, good))
    if records:
        good_frac = sum(r.good_theta for r in records) / len(records)
        nondeg = sum(r.verdict == "nondegenerate" for r in records) / len(records)
    else:
        good_frac = nondeg = None
    settings = {
        "eps_grid": [float(e) for e in eps_grid],
        "samples": int(samples),
        "seed": int(seed),
        "min_hits": int(min_hits),
        "max_fraction": float(max_fraction),
        "tolerance": float(tolerance),
        "search": search.to_json(),
    }
    return PerturbationReport(
        q_reference(Q), int(trials), float(radius), theta_target, good_frac, nondeg, tuple(records), settings
    )

