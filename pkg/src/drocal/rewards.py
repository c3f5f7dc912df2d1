"""Concave reward models f(x, Y) with analytic derivatives.

Every model evaluates a whole sample at once: ``reward(x, y)`` returns an
``(n,)`` array, ``grad`` an ``(n, m)`` array and ``hess`` an ``(n, m, m)``
array, where ``n`` is the leading axis of ``y`` and ``m`` the decision
dimension.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# ---------------------------------------------------------------------------
# feasible sets
# ---------------------------------------------------------------------------

_FEAS_TOL = 1e-12


class Unconstrained:
    """x ranges over all of R^m."""

    def project(self, v):
        return np.array(v, dtype=float)

    def tangent_project(self, x, g, tol=1e-10):
        return np.array(g, dtype=float)

    def active_mask(self, x, g, tol=1e-10):
        return np.zeros(np.shape(x), dtype=bool)

    def bounds(self, m):
        return np.full(m, -np.inf), np.full(m, np.inf)

    @property
    def has_budget(self):
        return False

    def __repr__(self):
        return "Unconstrained()"


def project_bounded_hyperplane(v, lo, hi, total, tol=_FEAS_TOL):
    """Euclidean projection of ``v`` onto {lo <= x <= hi, sum(x) = total}.

    The projection is ``clip(v - lam, lo, hi)`` where ``lam`` zeroes the
    nonincreasing, piecewise-linear excess ``sum(clip(v - lam)) - total``.
    The excess is evaluated at every breakpoint and ``lam`` is found by
    linear interpolation on the bracketing segment, so the result is exact
    up to rounding. ``lo``/``hi`` may contain infinities.
    """
    v = np.asarray(v, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), v.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), v.shape)
    if np.any(lo > hi) or lo.sum() > total + tol or hi.sum() < total - tol:
        raise ValueError("box and budget constraints are infeasible")
    if v.size == 0:
        return v.copy()
    bps = np.unique(np.concatenate([(v - hi)[np.isfinite(hi)], (v - lo)[np.isfinite(lo)]]))
    if bps.size == 0:
        lam = (v.sum() - total) / v.size
        return v - lam
    ex = np.clip(v[None, :] - bps[:, None], lo, hi).sum(axis=1) - total
    if ex[0] < 0:
        # root lies left of every breakpoint; only coordinates without an upper bound move
        slope = -float(np.sum(~np.isfinite(hi)))
        lam = bps[0] - ex[0] / slope if slope else bps[0]
    elif ex[-1] > 0:
        slope = -float(np.sum(~np.isfinite(lo)))
        lam = bps[-1] - ex[-1] / slope if slope else bps[-1]
    else:
        k = int(np.argmax(ex <= 0))
        if ex[k] == 0 or k == 0:
            lam = bps[k]
        else:
            b0, b1, e0, e1 = bps[k - 1], bps[k], ex[k - 1], ex[k]
            lam = b0 + e0 * (b1 - b0) / (e0 - e1)
    return np.clip(v - lam, lo, hi)


@dataclass(frozen=True)
class BoxBudget:
    """{x : lo <= x_i <= hi, sum(x) = total}."""

    lo: float
    hi: float
    total: float

    def project(self, v):
        return project_bounded_hyperplane(v, self.lo, self.hi, self.total)

    def bounds(self, m):
        return np.full(m, float(self.lo)), np.full(m, float(self.hi))

    def _bounds_for_tangent(self, x, tol):
        lo_t = np.full(x.shape, -np.inf)
        hi_t = np.full(x.shape, np.inf)
        lo_t[x <= self.lo + tol] = 0.0
        hi_t[x >= self.hi - tol] = 0.0
        return lo_t, hi_t

    def tangent_project(self, x, g, tol=1e-10):
        """Projection of ``g`` onto the tangent cone at ``x``."""
        x = np.asarray(x, dtype=float)
        lo_t, hi_t = self._bounds_for_tangent(x, tol)
        if np.all(np.isfinite(lo_t) & np.isfinite(hi_t)):
            return np.zeros_like(x)
        return project_bounded_hyperplane(g, lo_t, hi_t, 0.0)

    def active_mask(self, x, g, tol=1e-10):
        """Coordinates pinned at a bound with the ascent direction pointing outward."""
        x = np.asarray(x, dtype=float)
        d = self.tangent_project(x, g, tol)
        at_lo = (x <= self.lo + tol) & (d <= 0)
        at_hi = (x >= self.hi - tol) & (d >= 0)
        return at_lo | at_hi

    @property
    def has_budget(self):
        return True


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class RewardModel:
    """Base class. Subclasses set ``dim_x`` and ``feasible``."""

    dim_x: int = 1
    feasible = Unconstrained()

    def reward(self, x, y):
        raise NotImplementedError

    def grad(self, x, y):
        raise NotImplementedError

    def hess(self, x, y):
        raise NotImplementedError

    def initial_point(self, y):
        x0 = np.zeros(self.dim_x)
        return self.feasible.project(x0)

    def all_derivs(self, x, y):
        return self.reward(x, y), self.grad(x, y), self.hess(x, y)


def smoothed_min(x, y, eps):
    """Soft minimum ``-eps * log(exp(-x/eps) + exp(-y/eps))``; exact min at eps=0."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if eps == 0:
        out = np.minimum(x, y)
    else:
        out = -eps * np.logaddexp(-x / eps, -y / eps)
    return float(out) if out.ndim == 0 else out


class QuadraticModel(RewardModel):
    """f(x, Y) = -|x - Y|^2 / 2; the sample mean is the empirical optimizer."""

    def __init__(self, dim_x=1):
        self.dim_x = dim_x
        self.feasible = Unconstrained()

    def _diff(self, x, y):
        y = np.asarray(y, dtype=float).reshape(-1, self.dim_x)
        return np.asarray(x, dtype=float)[None, :] - y

    def reward(self, x, y):
        d = self._diff(x, y)
        return -0.5 * np.einsum("ij,ij->i", d, d)

    def grad(self, x, y):
        return -self._diff(x, y)

    def hess(self, x, y):
        n = np.asarray(y).shape[0]
        return np.broadcast_to(-np.eye(self.dim_x), (n, self.dim_x, self.dim_x)).copy()

    def initial_point(self, y):
        return np.asarray(y, dtype=float).reshape(-1, self.dim_x).mean(axis=0)


class NewsvendorModel(RewardModel):
    """f(x, Y) = r * min(x, Y) - c * x with an optional soft-min.

    With ``smoothing > 0`` the min is replaced by a log-sum-exp soft minimum,
    which makes f infinitely differentiable and strictly concave near the
    data. The smoothing error is at most ``r * smoothing * ln 2``.
    """

    def __init__(self, r=30.0, c=2.0, smoothing=0.0):
        if not r > c > 0:
            raise ValueError("newsvendor requires r > c > 0")
        if smoothing < 0:
            raise ValueError("smoothing must be nonnegative")
        self.r = float(r)
        self.c = float(c)
        self.smoothing = float(smoothing)
        self.dim_x = 1
        self.feasible = Unconstrained()

    @classmethod
    def with_default_smoothing(cls, r, c, demand_scale):
        return cls(r, c, smoothing=1e-3 * demand_scale)

    def _split(self, x, y):
        return float(np.asarray(x).ravel()[0]), np.asarray(y, dtype=float).ravel()

    def reward(self, x, y):
        xs, ys = self._split(x, y)
        return self.r * np.asarray(smoothed_min(xs, ys, self.smoothing)) - self.c * xs

    def _share(self, xs, ys):
        # d/dx of the soft min
        if self.smoothing == 0:
            return (xs < ys).astype(float)
        return expit((ys - xs) / self.smoothing)

    def grad(self, x, y):
        xs, ys = self._split(x, y)
        return (self.r * self._share(xs, ys) - self.c)[:, None]

    def hess(self, x, y):
        xs, ys = self._split(x, y)
        if self.smoothing == 0:
            return np.zeros((ys.size, 1, 1))
        s = self._share(xs, ys)
        return (-self.r * s * (1.0 - s) / self.smoothing)[:, None, None]

    def all_derivs(self, x, y):
        xs, ys = self._split(x, y)
        eps = self.smoothing
        if eps == 0:
            return self.reward(x, y), self.grad(x, y), self.hess(x, y)
        u = (ys - xs) / eps
        # soft min(x, y) = x - eps * log(1 + exp(-(y - x)/eps))
        f = self.r * (xs - eps * np.logaddexp(0.0, -u)) - self.c * xs
        s = expit(u)
        g = self.r * s - self.c
        h = -self.r * s * (1.0 - s) / eps
        return f, g[:, None], h[:, None, None]

    def initial_point(self, y):
        return np.array([newsvendor_saa_order(y, self.r, self.c)])

    def exact_empirical(self, dist):
        """Closed-form sample-average optimizer of the unsmoothed model (else ``None``)."""
        if self.smoothing > 0:
            return None
        return np.array([newsvendor_saa_order(dist.samples, self.r, self.c, dist.weights)])

    def critical_fractile(self):
        return (self.r - self.c) / self.r


def newsvendor_saa_order(y, r, c, weights=None):
    """Exact maximizer of the unsmoothed (weighted) empirical newsvendor objective.

    The objective is piecewise linear with kinks at the sorted samples; just
    left of ``Y_(j)`` its slope is ``r P(Y >= Y_(j)) - c``. Returns the
    largest sample reached with a nonnegative slope, i.e. the right end of
    the optimal interval when the objective is flat.
    """
    ys = np.asarray(y, dtype=float).ravel()
    n = ys.size
    if n == 0:
        raise ValueError("empty sample")
    if weights is None:
        ys = np.sort(ys)
        j = math.floor(n + 1 - n * c / r + 1e-12)
        j = min(max(j, 1), n)
        return float(ys[j - 1])
    w = np.asarray(weights, dtype=float).ravel()
    order = np.argsort(ys, kind="stable")
    ys, w = ys[order], w[order]
    tail = np.cumsum(w[::-1])[::-1]
    ok = np.flatnonzero((tail > 0) & (r * tail - c >= -1e-12 * r))
    return float(ys[ok[-1]]) if ok.size else float(ys[0])


class ExpUtilityModel(RewardModel):
    """f(x, R) = -exp(-gamma * R'x), optionally under a box + budget set."""

    def __init__(self, dim_x, gamma=1.0, feasible=None):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.dim_x = int(dim_x)
        self.gamma = float(gamma)
        self.feasible = feasible if feasible is not None else Unconstrained()

    @classmethod
    def budget_constrained(cls, dim_x, gamma=1.0, lo=-1.0, hi=1.0, total=1.0):
        return cls(dim_x, gamma, BoxBudget(lo, hi, total))

    def _returns(self, y):
        return np.asarray(y, dtype=float).reshape(-1, self.dim_x)

    def _expo(self, x, R):
        return np.exp(-self.gamma * (R @ np.asarray(x, dtype=float)))

    def reward(self, x, y):
        return -self._expo(x, self._returns(y))

    def grad(self, x, y):
        R = self._returns(y)
        return (self.gamma * self._expo(x, R))[:, None] * R

    def hess(self, x, y):
        R = self._returns(y)
        w = -(self.gamma**2) * self._expo(x, R)
        return w[:, None, None] * R[:, :, None] * R[:, None, :]

    def initial_point(self, y):
        if isinstance(self.feasible, BoxBudget):
            return self.feasible.project(np.full(self.dim_x, self.feasible.total / self.dim_x))
        return np.zeros(self.dim_x)


class LogisticModel(RewardModel):
    """Per-sample log-likelihood of a logistic classifier.

    Samples are rows ``(label, z_1, ..., z_p)`` with labels in {-1, +1}; the
    decision is ``(coefficients, intercept)`` so ``dim_x = p + 1``. The
    reward ``-log(1 + exp(-label * (x'z + x0)))`` is nonpositive and
    concave.
    """

    def __init__(self, n_covariates):
        self.n_covariates = int(n_covariates)
        self.dim_x = self.n_covariates + 1
        self.feasible = Unconstrained()

    def _design(self, y):
        y = np.asarray(y, dtype=float).reshape(-1, self.n_covariates + 1)
        labels = y[:, 0]
        design = np.column_stack([y[:, 1:], np.ones(y.shape[0])])
        return labels, design

    def _margin(self, x, y):
        labels, design = self._design(y)
        return labels, design, labels * (design @ np.asarray(x, dtype=float))

    def reward(self, x, y):
        _, _, u = self._margin(x, y)
        return -np.logaddexp(0.0, -u)

    def grad(self, x, y):
        labels, design, u = self._margin(x, y)
        return (labels * expit(-u))[:, None] * design

    def hess(self, x, y):
        _, design, u = self._margin(x, y)
        w = -expit(u) * expit(-u)
        return w[:, None, None] * design[:, :, None] * design[:, None, :]


def model_reward_stats(model, x, dist):
    """Weighted mean and variance of f(x, Y) under an empirical distribution.

    Sums are exactly rounded (``math.fsum``) so results do not depend on
    summation order.
    """
    vals = np.asarray(model.reward(x, dist.samples), dtype=float)
    p = dist.weights
    mean = math.fsum((p * vals).tolist())
    var = math.fsum((p * (vals - mean) ** 2).tolist())
    return mean, var
