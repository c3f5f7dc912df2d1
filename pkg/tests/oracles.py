"""Independent reference implementations used as test oracles.

These are deliberately naive and share no code paths with the package
beyond the public reward/divergence callables they are checking against.
They are frozen: change them only when the quantity they define changes.
"""

from fractions import Fraction

import numpy as np
from scipy.optimize import minimize


# ---------------------------------------------------------------------------
# penalized worst case by direct minimization over the simplex
# ---------------------------------------------------------------------------


def simplex_worst_case(f, p, delta, phi_fn, starts=6, seed=0):
    """min_q  sum q_i f_i + (1/delta) sum p_i phi(q_i / p_i)  over the simplex.

    Multi-start SLSQP on the primal; ``phi_fn`` is the scalar divergence
    generator evaluated elementwise.
    """
    f = np.asarray(f, dtype=float)
    p = np.asarray(p, dtype=float)
    n = f.size

    def obj(q):
        q = np.clip(q, 0.0, None)
        return float(q @ f + np.sum(p * phi_fn(q / p)) / delta)

    rng = np.random.default_rng(seed)
    candidates = [p.copy()] + [rng.dirichlet(np.ones(n)) for _ in range(starts)]
    best = None
    for q0 in candidates:
        res = minimize(obj, q0, method="SLSQP", bounds=[(0.0, 1.0)] * n,
                       constraints=[{"type": "eq", "fun": lambda q: q.sum() - 1.0}],
                       options={"ftol": 1e-15, "maxiter": 500})
        if best is None or res.fun < best.fun:
            best = res
    q = np.clip(best.x, 0.0, None)
    return obj(q), q / q.sum()


def grid_worst_case_two_point(f, p, delta, phi_fn, points=10_001):
    """Same minimization for n = 2 by brute-force grid over q_1."""
    q1 = np.linspace(0.0, 1.0, points)
    q = np.column_stack([q1, 1.0 - q1])
    vals = q @ np.asarray(f, dtype=float) + (np.asarray(p) * phi_fn(q / np.asarray(p))).sum(axis=1) / delta
    i = int(np.argmin(vals))
    return float(vals[i]), q[i]


# ---------------------------------------------------------------------------
# finite-difference derivative checks
# ---------------------------------------------------------------------------


def fd_grad(fun, x, h=1e-6):
    """Central differences of a vector-valued ``fun(x) -> (n,)``; returns ``(n, m)``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        cols.append((fun(x + e) - fun(x - e)) / (2 * e[i]))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# sandwich covariance from the estimating function, Jacobian by differences
# ---------------------------------------------------------------------------


def sandwich_by_differences(model, samples, weights, phi, delta, x, c, h=1e-6):
    """``A^{-1} B A^{-1}'`` with ``A = -d E[psi] / d(x, c)`` by central differences.

    ``psi_x = phi*'(zeta) grad f`` and ``psi_c = -(phi''(1)/delta)(phi*'(zeta) - 1)``
    with ``zeta = -delta (f + c)``.
    """
    p = np.asarray(weights, dtype=float)
    d2 = phi.d2_at_one
    m = np.asarray(x).size

    def psi(theta):
        xx, cc = theta[:m], theta[m]
        f = model.reward(xx, samples)
        zeta = -delta * (f + cc)
        g = phi.conj_d1(zeta)
        cols = [g[:, None] * model.grad(xx, samples), (-(d2 / delta) * (g - 1.0))[:, None]]
        return np.hstack(cols)

    theta0 = np.concatenate([np.asarray(x, dtype=float), [float(c)]])
    J = np.empty((m + 1, m + 1))
    for j in range(m + 1):
        e = np.zeros(m + 1)
        e[j] = h * max(1.0, abs(theta0[j]))
        J[:, j] = (p @ psi(theta0 + e) - p @ psi(theta0 - e)) / (2 * e[j])
    P = psi(theta0)
    B = (P.T * p) @ P
    Ainv = np.linalg.inv(-J)
    return Ainv @ B @ Ainv.T


# ---------------------------------------------------------------------------
# bootstrap frontier, written out literally
# ---------------------------------------------------------------------------


def naive_bootstrap_frontier(samples, k, seed, grid, solve, stats):
    """Nested-loop bootstrap frontier.

    ``solve(resampled_samples, delta) -> x`` and
    ``stats(x) -> (mean, variance)`` under the original data. Sums are
    exact (``Fraction``) before a single rounding, then divided by the
    count, matching "sum then divide".
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    m = [[None] * k for _ in grid]
    v = [[None] * k for _ in grid]
    for j in range(k):
        rng = np.random.default_rng(np.random.SeedSequence([seed, j]))
        idx = rng.integers(0, n, size=n)
        resampled = samples[idx]
        for i, delta in enumerate(grid):
            x = solve(resampled, delta)
            m[i][j], v[i][j] = stats(x)
    out = []
    for i, delta in enumerate(grid):
        mu = float(sum(Fraction(a) for a in m[i])) / k
        within = float(sum(Fraction(b) for b in v[i])) / k
        between = float(sum(Fraction((a - mu) ** 2) for a in m[i])) / (k - 1)
        out.append((float(delta), mu, within + between))
    return out


# ---------------------------------------------------------------------------
# pooled two-stage sampling variance by enumeration
# ---------------------------------------------------------------------------


def pooled_variance(rewards_per_replicate, weights):
    """Variance of R where J ~ uniform{replicates}, Y ~ weights, R = rewards[J][Y].

    Exact rational arithmetic.
    """
    k = len(rewards_per_replicate)
    w = [Fraction(x) for x in weights]
    first = Fraction(0)
    second = Fraction(0)
    for row in rewards_per_replicate:
        for wi, r in zip(w, row):
            first += wi * Fraction(r) / k
            second += wi * Fraction(r) ** 2 / k
    return float(first), float(second - first**2)
