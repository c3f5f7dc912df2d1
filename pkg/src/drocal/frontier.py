"""Robust mean-variance frontiers and calibration of the robustness parameter.

Three ways to trace ``delta -> (mu(delta), sigma2(delta))``:

* :func:`bootstrap_frontier` -- resample the data, solve robustly on each
  replicate, evaluate every solution under the original empirical
  distribution, and pool (law of total variance);
* :func:`oos_frontier` -- Monte-Carlo out-of-sample performance under a
  known data-generating model;
* :func:`true_frontier` -- solutions under the data-generating model itself.

:func:`calibrate` turns a frontier into a single ``delta`` by one of four
rules.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.stats import chi2

from .divergence import divergence
from .empirical import EmpiricalDistribution, bootstrap_indices, replicate_rng
from .exceptions import ConfigError, DataError, SolverError
from .rewards import model_reward_stats
from .robust import robust_optimize, worst_case

MAX_DROP_FRACTION = 0.10
CSV_HEADER = ("delta", "mu", "sigma2", "mu_sd", "sigma2_sd")


@dataclass
class Frontier:
    """Frontier points on a strictly increasing grid of ``delta`` values."""

    delta: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    mu_sd: np.ndarray
    sigma2_sd: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = {}
        for name in CSV_HEADER:
            arrays[name] = np.asarray(getattr(self, name), dtype=float).ravel()
            setattr(self, name, arrays[name])
        sizes = {a.size for a in arrays.values()}
        if len(sizes) != 1:
            raise ValueError("frontier columns have different lengths")
        if self.delta.size and np.any(np.diff(self.delta) <= 0):
            raise ValueError("frontier deltas must be strictly increasing")
        if np.any(self.sigma2 < 0):
            raise ValueError("frontier variances must be nonnegative")

    def __len__(self):
        return self.delta.size

    @property
    def points(self):
        return list(zip(*(getattr(self, name).tolist() for name in CSV_HEADER)))

    def index_of(self, delta) -> int:
        hits = np.flatnonzero(self.delta == float(delta))
        if hits.size == 0:
            raise KeyError(f"delta {delta!r} not on the frontier grid")
        return int(hits[0])


def _check_grid(delta_grid):
    grid = np.asarray(delta_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("delta grid is empty")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise ValueError("delta grid must be finite and nonnegative")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("delta grid must be strictly increasing")
    return grid


def _solve_path(model, dist, phi, grid, tol, method, warm_start):
    """Robust solutions along the grid, warm-starting each from the previous one."""
    xs = []
    x0 = None
    for delta in grid:
        sol = robust_optimize(model, dist, float(delta), phi, method=method, x0=x0, tol=tol)
        xs.append(sol.x)
        if warm_start:
            x0 = sol.x
    return xs


def _check_drops(dropped, total, what):
    if len(dropped) > MAX_DROP_FRACTION * total:
        raise SolverError(f"{len(dropped)} of {total} {what} failed (limit {MAX_DROP_FRACTION:.0%})")


def _sample_sd(values, centre):
    k = len(values)
    if k < 2:
        return 0.0
    return math.sqrt(math.fsum((v - centre) ** 2 for v in values) / (k - 1))


# ---------------------------------------------------------------------------
# bootstrap frontier
# ---------------------------------------------------------------------------


def bootstrap_frontier(model, dist, phi, delta_grid, k=50, seed=0, *, method="auto",
                       tol=1e-9, warm_start=True, allow_single=False) -> Frontier:
    """Bootstrap estimate of the out-of-sample robust mean-variance frontier.

    For each replicate ``j`` the data are resampled with the stream
    ``(seed, j)``, robust solutions ``x_j(delta)`` are computed on the
    resample, and their reward mean ``m_j`` and variance ``v_j`` are
    evaluated under the original distribution. Then

        mu = mean_j m_j,
        sigma2 = mean_j v_j + sum_j (m_j - mu)^2 / (k - 1).

    All sums are exactly rounded, so the result does not depend on
    summation order. ``mu_sd`` and ``sigma2_sd`` are the across-replicate
    standard deviations of ``m_j`` and ``v_j``.

    Replicates whose solve fails are dropped; more than 10% dropped raises.

    Args:
        k: number of replicates (``k >= 2`` unless ``allow_single``).
        seed: base seed.
        warm_start: start each solve from the previous grid point.
    """
    grid = _check_grid(delta_grid)
    if k < 1 or (k < 2 and not allow_single):
        raise ValueError("bootstrap needs k >= 2 replicates")
    if not dist.is_uniform:
        raise ValueError("bootstrap_frontier expects uniform weights")

    means = [[] for _ in grid]
    variances = [[] for _ in grid]
    dropped = []
    for j in range(k):
        rng = replicate_rng(seed, j)
        replicate = dist.subset(bootstrap_indices(dist.n, rng))
        try:
            xs = _solve_path(model, replicate, phi, grid, tol, method, warm_start)
        except SolverError:
            dropped.append(j)
            continue
        for i, x in enumerate(xs):
            m_j, v_j = model_reward_stats(model, x, dist)
            means[i].append(m_j)
            variances[i].append(v_j)
    _check_drops(dropped, k, "bootstrap replicates")

    kept = k - len(dropped)
    cols = {name: [] for name in CSV_HEADER}
    for i, delta in enumerate(grid):
        mu = math.fsum(means[i]) / kept
        within = math.fsum(variances[i]) / kept
        between = math.fsum((m - mu) ** 2 for m in means[i]) / (kept - 1) if kept > 1 else 0.0
        vbar = within
        cols["delta"].append(float(delta))
        cols["mu"].append(mu)
        cols["sigma2"].append(within + between)
        cols["mu_sd"].append(_sample_sd(means[i], mu))
        cols["sigma2_sd"].append(_sample_sd(variances[i], vbar))
    meta = {"method": "bootstrap", "k": kept, "k_requested": k, "n": dist.n,
            "seed": int(seed), "dropped": dropped, "phi": phi.kind}
    return Frontier(**cols, meta=meta)


# ---------------------------------------------------------------------------
# out-of-sample and true frontiers
# ---------------------------------------------------------------------------


def oos_frontier(model, dgm_sampler: Callable, n, K, phi, delta_grid, seed=0, *,
                 moments: Optional[Callable] = None, method="auto", tol=1e-9,
                 warm_start=True) -> Frontier:
    """Monte-Carlo out-of-sample frontier under a known data-generating model.

    Each repeat draws ``n`` training points and one test point from
    ``dgm_sampler(rng, size)``, solves on the training data for every
    ``delta`` and records the test reward. ``mu``/``sigma2`` are the sample
    mean and (unbiased) variance over the ``K`` repeats.

    If ``moments(x) -> (mean, variance)`` gives the exact reward moments of a
    fixed decision under the model, the test draw is integrated out:
    ``mu`` is the mean of the conditional means and ``sigma2`` adds their
    spread to the mean conditional variance. This estimates the same
    quantities with far less noise.

    ``mu_sd``/``sigma2_sd`` are across-repeat standard deviations of the
    recorded reward (or conditional mean) and of the squared deviation
    (or conditional variance).
    """
    grid = _check_grid(delta_grid)
    if K < 2:
        raise ValueError("oos_frontier needs K >= 2 repeats")
    if n < 1:
        raise ValueError("n must be at least 1")
    first = [[] for _ in grid]
    second = [[] for _ in grid]
    dropped = []
    for rep in range(K):
        rng = replicate_rng(seed, rep)
        train = EmpiricalDistribution(dgm_sampler(rng, n))
        test = np.asarray(dgm_sampler(rng, 1))
        try:
            xs = _solve_path(model, train, phi, grid, tol, method, warm_start)
        except SolverError:
            dropped.append(rep)
            continue
        for i, x in enumerate(xs):
            if moments is None:
                first[i].append(float(model.reward(x, test)[0]))
            else:
                m_x, v_x = moments(x)
                first[i].append(float(m_x))
                second[i].append(float(v_x))
    _check_drops(dropped, K, "out-of-sample repeats")

    kept = K - len(dropped)
    cols = {name: [] for name in CSV_HEADER}
    for i, delta in enumerate(grid):
        mu = math.fsum(first[i]) / kept
        spread = math.fsum((v - mu) ** 2 for v in first[i]) / (kept - 1)
        if moments is None:
            sigma2 = spread
            sq = [(v - mu) ** 2 for v in first[i]]
            sigma2_sd = _sample_sd(sq, math.fsum(sq) / kept)
        else:
            within = math.fsum(second[i]) / kept
            sigma2 = within + spread
            sigma2_sd = _sample_sd(second[i], within)
        cols["delta"].append(float(delta))
        cols["mu"].append(mu)
        cols["sigma2"].append(sigma2)
        cols["mu_sd"].append(math.sqrt(spread))
        cols["sigma2_sd"].append(sigma2_sd)
    meta = {"method": "oos_simulation", "k": kept, "K_requested": K, "n": int(n),
            "seed": int(seed), "dropped": dropped, "phi": phi.kind,
            "evaluation": "sampled" if moments is None else "conditional_moments"}
    return Frontier(**cols, meta=meta)


def true_frontier(model, ref_dist, phi, delta_grid, *, moments: Optional[Callable] = None,
                  method="auto", tol=1e-10) -> Frontier:
    """Frontier of the robust solutions under the data-generating model.

    The model is represented by a large sample ``ref_dist``; rewards are
    evaluated under the same sample unless exact ``moments`` are supplied.
    """
    grid = _check_grid(delta_grid)
    xs = _solve_path(model, ref_dist, phi, grid, tol, method, warm_start=True)
    mus, variances = [], []
    for x in xs:
        m_x, v_x = moments(x) if moments is not None else model_reward_stats(model, x, ref_dist)
        mus.append(float(m_x))
        variances.append(float(v_x))
    zeros = np.zeros(grid.size)
    meta = {"method": "true_frontier", "k": 1, "n": ref_dist.n, "phi": phi.kind,
            "decisions": [np.asarray(x).tolist() for x in xs]}
    return Frontier(grid, mus, variances, zeros, zeros, meta=meta)


# ---------------------------------------------------------------------------
# normalization and comparison
# ---------------------------------------------------------------------------


def normalize_frontier(f: Frontier) -> Frontier:
    """Affine rescaling sending the first point to (1, 1) and the last to (0, 0).

    Raises:
        ValueError: fewer than two points, or zero range along an axis.
    """
    if len(f) < 2:
        raise ValueError("normalization needs at least two points")
    mu_range = f.mu[0] - f.mu[-1]
    s2_range = f.sigma2[0] - f.sigma2[-1]
    if mu_range == 0 or s2_range == 0:
        raise ValueError("frontier is degenerate along one axis; cannot normalize")
    mu = (f.mu - f.mu[-1]) / mu_range
    s2 = (f.sigma2 - f.sigma2[-1]) / s2_range
    meta = dict(f.meta, normalized=True)
    return _unchecked_frontier(f.delta, mu, s2, f.mu_sd / abs(mu_range),
                               f.sigma2_sd / abs(s2_range), meta)


def _unchecked_frontier(delta, mu, sigma2, mu_sd, sigma2_sd, meta):
    # normalized variances may be negative, which the public constructor forbids
    obj = object.__new__(Frontier)
    obj.delta, obj.mu, obj.sigma2 = np.asarray(delta), np.asarray(mu), np.asarray(sigma2)
    obj.mu_sd, obj.sigma2_sd, obj.meta = np.asarray(mu_sd), np.asarray(sigma2_sd), meta
    return obj


def frontier_gap(candidate: Frontier, reference: Frontier) -> float:
    """Largest distance between matching points of two frontiers.

    Each axis is scaled by the range of ``reference`` along that axis, so
    the gap is unit-free and comparable across sample sizes.
    """
    if candidate.delta.shape != reference.delta.shape or np.any(candidate.delta != reference.delta):
        raise ValueError("frontiers must share the same delta grid")
    mu_scale = abs(reference.mu[0] - reference.mu[-1]) or 1.0
    s2_scale = abs(reference.sigma2[0] - reference.sigma2[-1]) or 1.0
    d_mu = (candidate.mu - reference.mu) / mu_scale
    d_s2 = (candidate.sigma2 - reference.sigma2) / s2_scale
    return float(np.max(np.hypot(d_mu, d_s2)))


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaxMean:
    """Largest out-of-sample mean."""


@dataclass(frozen=True)
class MeanVarTradeoff:
    """Largest ``mu - lam * sigma2``."""

    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("trade-off weight must be nonnegative")


@dataclass(frozen=True)
class Satisficing:
    """Largest grid ``delta`` whose worst-case objective still reaches ``target``."""

    target: float
    model: object
    dist: EmpiricalDistribution
    phi: object
    method: str = "auto"
    tol: float = 1e-9


@dataclass(frozen=True)
class HighConfidence:
    """``delta`` whose worst case sits on the ``(1 - alpha)`` divergence quantile.

    ``estimator`` is ``"bootstrap"`` (quantile of divergences between
    resampled and original empirical distributions) or ``"chi2"`` (the
    asymptotic ``2 n H / phi''(1) ~ chi2(n - 1)`` law).
    """

    alpha: float
    model: object
    dist: EmpiricalDistribution
    phi: object
    k: int = 1000
    seed: int = 0
    estimator: str = "bootstrap"
    lo: float = 1e-6
    hi: float = 1e4
    rtol: float = 1e-4
    method: str = "auto"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.estimator not in ("bootstrap", "chi2"):
            raise ValueError(f"unknown estimator {self.estimator!r}")


def _first_argmax(score):
    score = np.asarray(score, dtype=float)
    if not np.any(np.isfinite(score)):
        raise ValueError("no finite score on the frontier")
    return int(np.flatnonzero(score == np.nanmax(score))[0])


def divergence_quantile(dist, phi, alpha, k=1000, seed=0, estimator="bootstrap"):
    """Radius ``Q_n(alpha)`` of the divergence ball around ``P_n``."""
    n = dist.n
    if estimator == "chi2":
        return float(phi.d2_at_one * chi2.ppf(1.0 - alpha, max(n - 1, 1)) / (2.0 * n))
    p = dist.weights
    values = np.empty(k)
    for j in range(k):
        counts = np.bincount(bootstrap_indices(n, replicate_rng(seed, j)), minlength=n)
        values[j] = divergence(counts / n, p, phi)
    return float(np.quantile(values, 1.0 - alpha))


def realized_divergence(model, dist, phi, delta, x0=None, method="auto", tol=1e-10):
    """Divergence of the worst-case weights at the robust solution for ``delta``."""
    sol = robust_optimize(model, dist, delta, phi, method=method, x0=x0, tol=tol)
    wc = worst_case(model, sol.x, dist, delta, phi, method)
    return divergence(wc.weights, dist.weights, phi), sol.x


def high_confidence_delta(rule: HighConfidence):
    """Bisection in ``log delta`` matching the realized divergence to ``Q_n(alpha)``.

    Returns:
        tuple: ``(delta, radius)``.

    Raises:
        SolverError: if the radius is not bracketed by ``[lo, hi]``.
    """
    radius = divergence_quantile(rule.dist, rule.phi, rule.alpha, rule.k, rule.seed, rule.estimator)
    model, dist, phi = rule.model, rule.dist, rule.phi
    d_lo, x_lo = realized_divergence(model, dist, phi, rule.lo, method=rule.method)
    d_hi, x_hi = realized_divergence(model, dist, phi, rule.hi, x0=x_lo, method=rule.method)
    if not d_lo < d_hi:
        raise SolverError("realized divergence is not increasing across the bracket")
    if not d_lo <= radius <= d_hi:
        raise SolverError(
            f"radius {radius:.4g} outside realized divergences [{d_lo:.4g}, {d_hi:.4g}] "
            f"on delta in [{rule.lo:g}, {rule.hi:g}]"
        )
    a, b = math.log(rule.lo), math.log(rule.hi)
    x0 = x_lo
    mid = 0.5 * (a + b)
    for _ in range(200):
        mid = 0.5 * (a + b)
        d_mid, x0 = realized_divergence(model, dist, phi, math.exp(mid), x0=x0, method=rule.method)
        if abs(d_mid - radius) <= rule.rtol * radius:
            break
        if d_mid < radius:
            a = mid
        else:
            b = mid
        if b - a < 1e-14:
            break
    return math.exp(mid), radius


def satisficing_delta(grid, rule: Satisficing):
    objective0 = robust_optimize(rule.model, rule.dist, 0.0, rule.phi, tol=rule.tol).objective
    if objective0 < rule.target:
        raise SolverError(
            f"target {rule.target!r} unattainable: empirical optimum is {objective0!r}"
        )
    best = 0.0
    x0 = None
    for delta in grid:
        sol = robust_optimize(rule.model, rule.dist, float(delta), rule.phi,
                              method=rule.method, x0=x0, tol=rule.tol)
        x0 = sol.x
        if sol.objective >= rule.target:
            best = float(delta)
    return best


def calibrate(f: Frontier, rule) -> float:
    """Pick ``delta`` from a frontier by a calibration rule.

    Ties are broken toward the smaller ``delta``.
    """
    if isinstance(rule, MaxMean):
        return float(f.delta[_first_argmax(f.mu)])
    if isinstance(rule, MeanVarTradeoff):
        return float(f.delta[_first_argmax(f.mu - rule.lam * f.sigma2)])
    if isinstance(rule, Satisficing):
        return satisficing_delta(f.delta, rule)
    if isinstance(rule, HighConfidence):
        return high_confidence_delta(rule)[0]
    raise ConfigError(f"unknown calibration rule {rule!r}")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _sidecar(path):
    path = Path(path)
    return path.with_suffix(".json")


def write_frontier(f: Frontier, path, extra_meta=None):
    """Write ``delta,mu,sigma2,mu_sd,sigma2_sd`` rows plus a JSON sidecar.

    Floats are written with ``repr`` so reading back is bit-exact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in f.points:
            writer.writerow([repr(float(v)) for v in row])
    meta = dict(f.meta)
    if extra_meta:
        meta.update(extra_meta)
    with open(_sidecar(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_frontier(path) -> Frontier:
    """Inverse of :func:`write_frontier`."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise DataError(f"{path}: expected header {','.join(CSV_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    meta = {}
    side = _sidecar(path)
    if side.exists():
        with open(side) as fh:
            meta = json.load(fh)
    cols = np.array(rows, dtype=float).reshape(-1, len(CSV_HEADER)).T
    if meta.get("normalized"):
        return _unchecked_frontier(*cols, meta)
    return Frontier(*cols, meta=meta)
