"""Empirical distributions, bootstrap resampling and sample-average optimization."""

from dataclasses import dataclass

import numpy as np

from .optimize import OptResult, maximize_concave

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Weighted sample ``{(Y_i, p_i)}``; weights default to uniform.

    ``samples`` has the observation index on its leading axis. Samples may be
    scalars (shape ``(n,)``) or vectors (shape ``(n, d)``).
    """

    samples: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 0:
            samples = samples.reshape(1)
        n = samples.shape[0]
        if n == 0:
            raise ValueError("empirical distribution needs at least one sample")
        if self.weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.asarray(self.weights, dtype=float).ravel()
            if weights.size != n:
                raise ValueError(f"{weights.size} weights for {n} samples")
            if np.any(weights < 0):
                raise ValueError("weights must be nonnegative")
            if abs(weights.sum() - 1.0) > WEIGHT_TOL * max(1, n):
                raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def subset(self, idx):
        """Uniformly weighted distribution on ``samples[idx]`` (repeats allowed)."""
        return EmpiricalDistribution(self.samples[np.asarray(idx)])


def replicate_rng(seed, j=None):
    """Generator for replicate ``j`` derived from a base seed.

    The stream depends only on ``(seed, j)``, so replicates can be generated
    in any order or in parallel and still reproduce.
    """
    entropy = [int(seed)] if j is None else [int(seed), int(j)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def bootstrap_indices(n, rng):
    return rng.integers(0, n, size=n)


def bootstrap_resample(dist: EmpiricalDistribution, seed) -> EmpiricalDistribution:
    """Draw ``n`` points i.i.d. with replacement from a uniform empirical distribution.

    Args:
        dist: source distribution (uniform weights).
        seed: integer seed or a ``numpy.random.Generator``.
    """
    if dist.n < 1:
        raise ValueError("cannot resample an empty distribution")
    if not dist.is_uniform:
        raise ValueError("bootstrap_resample expects uniform weights")
    rng = seed if isinstance(seed, np.random.Generator) else replicate_rng(seed)
    return dist.subset(bootstrap_indices(dist.n, rng))


def empirical_objective(model, dist):
    """Value and derivative callables for x -> sum_i p_i f(x, Y_i)."""
    p = dist.weights
    ys = dist.samples

    def value(x):
        return float(p @ model.reward(x, ys))

    def derivs(x):
        f, g, H = model.all_derivs(x, ys)
        return float(p @ f), p @ g, (p @ H.reshape(H.shape[0], -1)).reshape(H.shape[1:])

    return value, derivs


def empirical_solve(model, dist, x0=None, tol=1e-8, max_iter=10_000):
    """Full optimizer output for the sample-average problem.

    Models with a non-smooth reward may supply ``exact_empirical(dist)``,
    which is used instead of the iterative solver when it returns a point.
    """
    value, derivs = empirical_objective(model, dist)
    exact = getattr(model, "exact_empirical", None)
    x_exact = exact(dist) if exact is not None else None
    if x_exact is not None:
        v, g, _ = derivs(x_exact)
        return OptResult(x_exact, float(v), np.asarray(g), 0, 0.0)
    if x0 is None:
        x0 = model.initial_point(dist.samples)
    return maximize_concave(value, derivs, x0, model.feasible, tol=tol, max_iter=max_iter)


def empirical_optimize(model, dist, x0=None, tol=1e-8, max_iter=10_000):
    """Maximizer of the weighted sample-average reward.

    Raises:
        SolverError: if the optimizer does not converge; the error carries
            the last iterate.
    """
    return empirical_solve(model, dist, x0=x0, tol=tol, max_iter=max_iter).x
