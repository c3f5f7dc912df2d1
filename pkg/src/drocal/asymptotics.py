"""Large-sample expansions of robust solutions and their out-of-sample reward.

All population expectations are weighted sums over a reference distribution.
A known data-generating model is represented by a large i.i.d. sample; an
observed data set is used as is.

Notation (all evaluated at the empirical optimizer ``x*(0)`` of the
reference distribution):

* ``mu_f = Cov[grad f, f]`` and ``sigma_f = E[hess f]``;
* ``pi = sigma_f^{-1} mu_f / phi''(1)``, the first-order drift of the
  robust optimizer, ``x*(delta) = x*(0) + pi delta + o(delta)``;
* ``V(delta) = A^{-1} B A^{-1}'``, the sandwich covariance of the stacked
  estimating equations in ``(x, c)``, with blocks ``xi``, ``kappa``, ``eta``;
* ``rho`` and ``theta``, the ``delta / n`` corrections to the out-of-sample
  mean and variance.
"""

from dataclasses import dataclass

import numpy as np

from .empirical import empirical_solve
from .exceptions import SolverError
from .rewards import model_reward_stats
from .robust import robust_optimize


@dataclass(frozen=True)
class AsymptoticSummary:
    """Expansion constants for one model, reference distribution and divergence."""

    x_star: np.ndarray
    mu_f: np.ndarray
    sigma_f: np.ndarray
    pi: np.ndarray
    xi0: np.ndarray
    eta0: float
    kappa0: np.ndarray
    rho: float
    theta: float
    mean0: float
    var_hessian: np.ndarray
    phi_d2: float
    phi_d3: float
    xi_prime: np.ndarray

    @property
    def curvature_term(self) -> float:
        """``mu_f' sigma_f^{-1} mu_f`` (nonpositive for concave rewards)."""
        if self.mu_f.size == 0:
            return 0.0
        return float(self.mu_f @ np.linalg.solve(self.sigma_f, self.mu_f))

    def c_star(self, delta):
        """First-order expansion of the dual scalar ``c*(delta)``."""
        return -self.mean0 - 0.5 * delta * self.phi_d3 / self.phi_d2**2 * self.eta0


# ---------------------------------------------------------------------------
# weighted moments
# ---------------------------------------------------------------------------


def _moments(model, x, dist):
    f, G, H = model.all_derivs(np.asarray(x, dtype=float), dist.samples)
    p = dist.weights
    mean = float(p @ f)
    gbar = p @ G
    df = f - mean
    dG = G - gbar
    return p, f, G, H, mean, gbar, df, dG


def _wmean_matrix(p, H):
    m = H.shape[1]
    return (p @ H.reshape(H.shape[0], -1)).reshape(m, m)


def variance_gradient(model, x, dist):
    """``grad_x Var[f(x, Y)] = 2 Cov[f, grad f]``."""
    p, _, _, _, _, _, df, dG = _moments(model, x, dist)
    return 2.0 * ((p * df) @ dG)


def variance_hessian(model, x, dist):
    """``hess_x Var[f(x, Y)] = 2 Var[grad f] + 2 Cov[f, hess f]``."""
    p, _, _, H, _, _, df, dG = _moments(model, x, dist)
    var_grad = (dG.T * p) @ dG
    cov_fh = _wmean_matrix(p * df, H)
    out = 2.0 * var_grad + 2.0 * cov_fh
    return 0.5 * (out + out.T)


def expected_hessian(model, x, dist):
    p, _, _, H, *_ = _moments(model, x, dist)
    return _wmean_matrix(p, H)


# ---------------------------------------------------------------------------
# sandwich covariance
# ---------------------------------------------------------------------------


def _solve_reference(model, ref_dist, phi, delta, x0=None, tol=1e-11):
    """``(x*(delta), c*(delta))`` under the reference distribution."""
    if delta == 0:
        res = empirical_solve(model, ref_dist, x0=x0, tol=tol)
        mean, _ = model_reward_stats(model, res.x, ref_dist)
        return res.x, -mean
    sol = robust_optimize(model, ref_dist, delta, phi, x0=x0, tol=tol, allow_negative=True)
    return sol.x, sol.c


def sandwich_at(model, ref_dist, phi, delta, x, c):
    """``A^{-1} B A^{-1}'`` for the stacked estimating function at a given ``(x, c)``.

    The second coordinate carries the ``-phi''(1)/delta`` scaling, which
    makes it ``f + c`` in the ``delta -> 0`` limit.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    p = ref_dist.weights
    d2 = phi.d2_at_one
    if m:
        f, G, H = model.all_derivs(x, ref_dist.samples)
    else:
        f = np.asarray(model.reward(x, ref_dist.samples), dtype=float)
        G = np.zeros((f.size, 0))
        H = np.zeros((f.size, 0, 0))

    if delta == 0:
        d1 = np.ones_like(f)
        dd = np.full_like(f, 1.0 / d2)
        psi2 = f + c
    else:
        zeta = -delta * (f + c)
        d1 = phi.conj_d1(zeta)
        dd = phi.conj_second(zeta)
        psi2 = -(d2 / delta) * phi.conj_first_minus_one(zeta)

    psi = np.column_stack([d1[:, None] * G, psi2])
    B = (psi.T * p) @ psi

    # mean Jacobian of psi in (x, c)
    J = np.empty((m + 1, m + 1))
    J[:m, :m] = _wmean_matrix(p * d1, H) - delta * (G.T * (p * dd)) @ G
    J[:m, m] = -delta * ((p * dd) @ G)
    J[m, :m] = d2 * ((p * dd) @ G)
    J[m, m] = d2 * float(p @ dd)
    A = -J
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        raise SolverError("sandwich matrix A is singular") from None
    if not np.all(np.isfinite(Ainv)) or np.linalg.cond(A) > 1e14:
        raise SolverError(f"sandwich matrix A is ill-conditioned (cond={np.linalg.cond(A):.2e})")
    V = Ainv @ B @ Ainv.T
    return 0.5 * (V + V.T)


def sandwich_covariance(model, ref_dist, phi, delta, x0=None, allow_negative=False):
    """Asymptotic covariance ``V(delta)`` of ``sqrt(n) (x_n(delta), c_n(delta))``.

    Solves the robust problem on ``ref_dist`` first. Negative ``delta`` is
    accepted with ``allow_negative=True`` for central differences at 0.

    Returns:
        ``(m+1, m+1)`` array; the decision block comes first, ``c`` last.

    Raises:
        SolverError: if ``A`` is singular or the solve fails.
    """
    if delta < 0 and not allow_negative:
        raise ValueError("delta must be nonnegative")
    x, c = _solve_reference(model, ref_dist, phi, delta, x0=x0)
    return sandwich_at(model, ref_dist, phi, delta, x, c)


# ---------------------------------------------------------------------------
# summary
# ---------------------------------------------------------------------------


def _fd_gradient(fun, x, x_step):
    x = np.asarray(x, dtype=float)
    grad = np.zeros(x.size)
    for i in range(x.size):
        h = x_step * max(1.0, abs(x[i]))
        e = np.zeros(x.size)
        e[i] = h
        grad[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return grad


def summarize(model, ref_dist, phi, delta_step=1e-3, x_step=1e-3, x_star=None) -> AsymptoticSummary:
    """Expansion constants under a reference distribution.

    Args:
        model: reward model.
        ref_dist: reference distribution (a large Monte-Carlo sample from a
            known model, or observed data).
        phi: divergence.
        delta_step: step for the central difference of ``V`` in ``delta``.
        x_step: relative step for the central differences in ``x``.
        x_star: optional precomputed optimizer (skips the solve).

    Raises:
        SolverError: if ``E[hess f]`` or the sandwich matrix is singular.
    """
    if x_star is None:
        x_star = empirical_solve(model, ref_dist, tol=1e-11).x
    x_star = np.asarray(x_star, dtype=float)
    m = x_star.size
    d2 = phi.d2_at_one
    p, f, G, H, mean, gbar, df, dG = _moments(model, x_star, ref_dist)
    eta0 = float(p @ (df * df))
    sigma_f = _wmean_matrix(p, H)
    sigma_f = 0.5 * (sigma_f + sigma_f.T)
    mu_f = (p * df) @ dG

    if m and np.linalg.cond(sigma_f) > 1e14:
        raise SolverError("E[hess f] is singular at the optimizer")
    sinv = np.linalg.inv(sigma_f) if m else np.zeros((0, 0))
    kappa0 = sinv @ mu_f
    pi = kappa0 / d2
    xi0 = sinv @ ((dG.T * p) @ dG) @ sinv.T
    xi0 = 0.5 * (xi0 + xi0.T)
    var_hess = variance_hessian(model, x_star, ref_dist) if m else np.zeros((0, 0))

    if m:
        h = delta_step
        v_plus = sandwich_covariance(model, ref_dist, phi, h, x0=x_star)
        v_minus = sandwich_covariance(model, ref_dist, phi, -h, x0=x_star, allow_negative=True)
        xi_prime = (v_plus[:m, :m] - v_minus[:m, :m]) / (2 * h)

        def tr_mean(x):
            return float(np.trace(xi0 @ expected_hessian(model, x, ref_dist)))

        def tr_var(x):
            return float(np.trace(xi0 @ variance_hessian(model, x, ref_dist)))

        rho = float(np.trace(xi_prime @ sigma_f) + pi @ _fd_gradient(tr_mean, x_star, x_step))
        theta = float(np.trace(xi_prime @ var_hess) + pi @ _fd_gradient(tr_var, x_star, x_step))
    else:
        xi_prime = np.zeros((0, 0))
        rho = theta = 0.0

    return AsymptoticSummary(
        x_star=x_star, mu_f=mu_f, sigma_f=sigma_f, pi=pi, xi0=xi0, eta0=eta0,
        kappa0=kappa0, rho=rho, theta=theta, mean0=mean, var_hessian=var_hess,
        phi_d2=d2, phi_d3=phi.d3_at_one, xi_prime=xi_prime,
    )


def baseline_moments(summary: AsymptoticSummary, n):
    """Predicted out-of-sample mean and variance of the empirical optimizer."""
    if n < 1:
        raise ValueError("n must be at least 1")
    mean = summary.mean0 + np.trace(summary.xi0 @ summary.sigma_f) / (2.0 * n)
    var = summary.eta0 + np.trace(summary.xi0 @ summary.var_hessian) / (2.0 * n)
    return float(mean), float(var)


def predicted_curves(summary: AsymptoticSummary, n, delta_grid):
    """Predicted out-of-sample mean and variance along a grid of ``delta``.

    Returns:
        list of ``(delta, mean_pred, var_pred)`` tuples.
    """
    mean0, var0 = baseline_moments(summary, n)
    q = summary.curvature_term
    d2 = summary.phi_d2
    out = []
    for delta in delta_grid:
        delta = float(delta)
        mean = mean0 + 0.5 * delta**2 / d2**2 * q + delta * summary.rho / (2.0 * n)
        var = var0 + 2.0 * delta / d2 * q + delta * summary.theta / (2.0 * n)
        out.append((delta, mean, var))
    return out
