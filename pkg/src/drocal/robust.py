"""Penalty-form worst-case evaluation and robust optimization.

For fixed x the adversary solves

    min_Q  E_Q[f(x, Y)] + (1/delta) H_phi(Q | P_n),

whose dual is a scalar problem in c:

    -min_c { c + (1/delta) sum_i p_i phi*(delta (-f_i - c)) }.

The robust decision jointly minimizes the same expression over (x, c). We
eliminate c exactly (it solves a monotone scalar equation) and maximize the
resulting concave function of x, whose gradient is the tilted average
``sum_i q_i grad f_i`` by the envelope theorem.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .empirical import empirical_solve
from .exceptions import SolverError
from .optimize import maximize_concave
from .rewards import model_reward_stats

EXP_ARG_CAP = 700.0


@dataclass(frozen=True)
class WorstCase:
    value: float
    weights: np.ndarray


@dataclass(frozen=True)
class RobustSolution:
    x: np.ndarray
    c: float
    delta: float
    objective: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class Tilt:
    """Inner solution for one reward vector: value, weights, dual c, curvature weights."""

    value: float
    q: np.ndarray
    c: float
    w2: np.ndarray


def _kl_tilt(vals, p, delta):
    a = -delta * vals
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("non-finite exponent in relative-entropy tilt")
    fbar = float(p @ vals)
    centred = a + delta * fbar
    if np.max(np.abs(centred[p > 0])) <= 1.0:
        # small exponents: log E exp(centred) = log1p(E expm1(centred)) keeps
        # full relative accuracy, which matters once it is divided by delta
        em1 = np.expm1(centred)
        excess = float(p @ em1)
        value = fbar - np.log1p(excess) / delta
        q = p * (1.0 + em1) / (1.0 + excess)
        return Tilt(value=float(value), q=q, c=float(-value), w2=q)
    shift = float(np.max(a[p > 0]))
    e = p * np.exp(a - shift)
    total = float(e.sum())
    lse = shift + np.log(total)
    q = e / total
    return Tilt(value=float(-lse / delta), q=q, c=float(lse / delta), w2=q)


def _dual_c(vals, p, delta, phi):
    """Root of 1 - sum_i p_i phi*'(-delta (f_i + c)) = 0."""

    def slope(c):
        zeta = -delta * (vals + c)
        # bracket ends may overflow to inf, which still has the right sign
        with np.errstate(over="ignore"):
            return 1.0 - float(p @ phi.conj_d1(zeta))

    support = p > 0
    lo, hi = -float(np.max(vals[support])), -float(np.min(vals[support]))
    if hi - lo <= 0:
        return lo
    s_lo, s_hi = slope(lo), slope(hi)
    if s_lo == 0:
        return lo
    if s_hi == 0:
        return hi
    if np.sign(s_lo) == np.sign(s_hi):
        raise SolverError("dual variable c could not be bracketed")
    scale = 1.0 + max(abs(lo), abs(hi))
    return brentq(slope, lo, hi, xtol=1e-15 * scale, rtol=4 * np.finfo(float).eps, maxiter=500)


def _dual_tilt(vals, p, delta, phi):
    c = _dual_c(vals, p, delta, phi)
    zeta = -delta * (vals + c)
    if np.max(zeta) > EXP_ARG_CAP:
        raise FloatingPointError(f"conjugate argument {np.max(zeta):.1f} exceeds {EXP_ARG_CAP}")
    q = p * phi.conj_d1(zeta)
    value = -(c + float(p @ phi.conj(zeta)) / delta)
    return Tilt(value=value, q=q, c=c, w2=p * phi.conj_second(zeta))


def tilt(vals, p, delta, phi, method="auto"):
    """Solve the inner problem for a vector of rewards.

    ``delta`` may be negative (the optimistic counterpart); callers that
    expose the worst case enforce ``delta > 0`` themselves.

    Args:
        method: ``"closed_form"`` (relative entropy only), ``"dual"`` or
            ``"auto"`` (closed form when available).
    """
    vals = np.asarray(vals, dtype=float)
    p = np.asarray(p, dtype=float)
    if delta == 0:
        raise ValueError("tilt is undefined at delta = 0")
    if method == "auto":
        method = "closed_form" if phi.is_relative_entropy else "dual"
    if method == "closed_form":
        if not phi.is_relative_entropy:
            raise ValueError("closed form is only available for relative entropy")
        return _kl_tilt(vals, p, delta)
    if method == "dual":
        return _dual_tilt(vals, p, delta, phi)
    raise ValueError(f"unknown method {method!r}")


def worst_case(model, x, dist, delta, phi, method="auto") -> WorstCase:
    """Penalized worst-case expected reward at a fixed decision.

    Raises:
        ValueError: if ``delta <= 0``.
    """
    if not delta > 0:
        raise ValueError("worst_case requires delta > 0")
    vals = model.reward(np.asarray(x, dtype=float), dist.samples)
    t = tilt(vals, dist.weights, delta, phi, method)
    return WorstCase(value=t.value, weights=t.q)


def robust_objective(model, dist, delta, phi, method="auto"):
    """Value and derivative callables for the reduced robust objective W(x)."""
    p = dist.weights
    ys = dist.samples

    def value(x):
        return tilt(model.reward(x, ys), p, delta, phi, method).value

    def derivs(x):
        f, G, H = model.all_derivs(x, ys)
        t = tilt(f, p, delta, phi, method)
        grad = t.q @ G
        hw = t.w2 @ G
        total_w2 = float(t.w2.sum())
        hess = (t.q @ H.reshape(H.shape[0], -1)).reshape(H.shape[1:]) - delta * (G.T * t.w2) @ G
        if total_w2 > 0:
            hess = hess + delta * np.outer(hw, hw) / total_w2
        return t.value, grad, 0.5 * (hess + hess.T)

    return value, derivs


def robust_optimize(model, dist, delta, phi, method="auto", x0=None, tol=1e-9,
                    max_iter=10_000, allow_negative=False) -> RobustSolution:
    """Robust decision and dual scalar for penalty parameter ``delta``.

    ``delta = 0`` is plain sample-average optimization, with ``c`` set to
    minus the empirical mean reward. Negative ``delta`` (the optimistic
    problem) is accepted only with ``allow_negative=True``; it exists for
    finite-difference stencils around zero.

    Raises:
        ValueError: negative ``delta`` without ``allow_negative``.
        SolverError: non-convergence, with the last iterate attached.
    """
    if delta < 0 and not allow_negative:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        res = empirical_solve(model, dist, x0=x0, tol=tol, max_iter=max_iter)
        mean, _ = model_reward_stats(model, res.x, dist)
        return RobustSolution(res.x, -mean, 0.0, mean, res.iterations, res.residual)

    value, derivs = robust_objective(model, dist, delta, phi, method)
    if x0 is None:
        x0 = empirical_solve(model, dist, tol=tol, max_iter=max_iter).x
    res = maximize_concave(value, derivs, x0, model.feasible, tol=tol, max_iter=max_iter)
    t = tilt(model.reward(res.x, dist.samples), dist.weights, delta, phi, method)
    resid = foc_residual(model, res.x, t.c, dist, delta, phi)
    return RobustSolution(res.x, t.c, float(delta), t.value, res.iterations, resid)


def foc_residual(model, x, c, dist, delta, phi) -> float:
    """Norm of the stacked first-order conditions at ``(x, c)``.

    The x-block is the tilted gradient projected onto the tangent cone of
    the feasible set; the c-block is ``sum_i p_i (phi*'(zeta_i) - 1)``.
    """
    if delta == 0:
        raise ValueError("foc_residual requires delta != 0")
    x = np.asarray(x, dtype=float)
    p = dist.weights
    f = model.reward(x, dist.samples)
    zeta = -delta * (f + c)
    d1 = phi.conj_d1(zeta)
    gx = (p * d1) @ model.grad(x, dist.samples) if x.size else np.zeros(0)
    gx = model.feasible.tangent_project(x, gx) if x.size else gx
    gc = float(p @ phi.conj_first_minus_one(zeta))
    return float(np.sqrt(gx @ gx + gc * gc))
