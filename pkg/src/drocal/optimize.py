"""Maximization of smooth concave functions over the built-in feasible sets.

Three strategies, chosen by problem shape:

* one unconstrained coordinate: safeguarded Newton on the derivative
  (Newton steps inside a sign-change bracket, then Illinois false
  position, then bisection);
* several unconstrained coordinates: damped Newton with Armijo backtracking;
* box + budget: Newton steps from the exact solution of the local
  quadratic model over the feasible set (a small active-set QP), with
  backtracking, falling back to projected gradient steps.

Convergence is declared when the gradient projected onto the tangent cone
has norm at most ``tol * (1 + |x|)``.
"""

from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from .exceptions import SolverError
from .rewards import Unconstrained

_ARMIJO = 1e-4
_MAX_HALVINGS = 60


@dataclass
class OptResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    iterations: int
    residual: float
    trace: List[float] = field(default_factory=list)


def _stationarity(feasible, x, g):
    return float(np.linalg.norm(feasible.tangent_project(x, g)))


def _near_roundoff(v_new, v_old):
    return abs(v_new - v_old) <= 1e-13 * (1.0 + abs(v_old))


def maximize_concave(
    value_fn: Callable,
    derivs_fn: Callable,
    x0,
    feasible=None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> OptResult:
    """Maximize a concave function.

    Args:
        value_fn: ``x -> W(x)``.
        derivs_fn: ``x -> (W(x), grad, hess)``.
        x0: starting point; projected onto the feasible set first.
        feasible: feasible set (default unconstrained).
        tol: relative stationarity tolerance.
        max_iter: iteration cap.

    Raises:
        SolverError: iteration cap reached or no ascent possible; carries the
            last iterate.
    """
    feasible = feasible if feasible is not None else Unconstrained()
    x = feasible.project(np.asarray(x0, dtype=float).ravel())
    if x.size == 0:
        v, g, _ = derivs_fn(x)
        return OptResult(x, float(v), np.asarray(g), 0, 0.0)
    if x.size == 1 and isinstance(feasible, Unconstrained):
        return _newton_1d(value_fn, derivs_fn, x, tol, max_iter)
    if isinstance(feasible, Unconstrained):
        return _damped_newton(value_fn, derivs_fn, x, tol, max_iter)
    return _projected_newton(value_fn, derivs_fn, x, feasible, tol, max_iter)


def _newton_1d(value_fn, derivs_fn, x, tol, max_iter):
    def d1d2(t):
        v, g, h = derivs_fn(np.array([t]))
        return float(v), float(np.ravel(g)[0]), float(np.ravel(h)[0])

    def done(t, v, g, it, trace):
        return OptResult(np.array([t]), v, np.array([g]), it, abs(g), trace)

    t = float(x[0])
    v, g, h = d1d2(t)
    trace = [abs(g)]
    if abs(g) <= tol * (1 + abs(t)):
        return done(t, v, g, 0, trace)

    # bracket the root of the nonincreasing derivative
    # a near-flat curvature would send the first probe arbitrarily far, where the
    # relative tolerance becomes meaningless; probes grow by doubling instead
    step = abs(g / h) if h < 0 else 1.0
    step = min(max(step, 1e-8 * (1 + abs(t))), 1.0 + abs(t))
    direction = 1.0 if g > 0 else -1.0
    it = 0
    other = None
    for _ in range(200):
        it += 1
        trial = t + direction * step
        vt, gt, ht = d1d2(trial)
        trace.append(abs(gt))
        if abs(gt) <= tol * (1 + abs(trial)):
            return done(trial, vt, gt, it, trace)
        if np.sign(gt) != np.sign(g):
            other = (trial, vt, gt, ht)
            break
        t, v, g, h = trial, vt, gt, ht
        step *= 2.0
    if other is None:
        raise SolverError("could not bracket a stationary point (objective unbounded?)",
                          x=np.array([t]), iterations=it, residual=abs(g), trace=trace)
    # bracket ends carry derivative values: g(a) > 0 > g(b)
    (a, ga), (b, gb) = sorted([(t, g), (other[0], other[2])])
    if abs(other[2]) < abs(g):
        t, v, g, h = other

    prev_width = b - a
    slow = 0
    side = 0
    while it < max_iter:
        it += 1
        cand = None
        if h < 0 and slow == 0:
            cand = t - g / h
            if not a < cand < b:
                cand = None
        if cand is None and slow < 2:
            # false position with the Illinois down-weighting of a stale end
            cand = (a * gb - b * ga) / (gb - ga)
            if not a < cand < b:
                cand = None
        if cand is None:
            cand = 0.5 * (a + b)
        t = cand
        v, g, h = d1d2(t)
        trace.append(abs(g))
        if abs(g) <= tol * (1 + abs(t)):
            return done(t, v, g, it, trace)
        if g > 0:
            a, ga = t, g
            if side == 1:
                gb *= 0.5
            side = 1
        else:
            b, gb = t, g
            if side == -1:
                ga *= 0.5
            side = -1
        width = b - a
        if width <= 4 * np.finfo(float).eps * (1 + abs(t)):
            # bracket collapsed to adjacent floats; the root is pinned to machine precision
            return done(t, v, g, it, trace)
        slow = slow + 1 if width > 0.5 * prev_width else 0
        if slow > 2:
            slow = 0
        prev_width = width
    raise SolverError("iteration cap reached", x=np.array([t]), iterations=it,
                      residual=abs(g), trace=trace)


def _newton_direction(g, H):
    """Ascent direction -H^{-1} g, regularized if H is not negative definite."""
    m = g.size
    negH = -H
    shift = 0.0
    scale = max(1e-300, float(np.max(np.abs(np.diag(negH)))) if m else 1.0)
    for _ in range(60):
        try:
            L = np.linalg.cholesky(negH + shift * np.eye(m))
            y = np.linalg.solve(L, g)
            return np.linalg.solve(L.T, y)
        except np.linalg.LinAlgError:
            shift = max(2 * shift, 1e-10 * scale)
    return g.copy()


def _damped_newton(value_fn, derivs_fn, x, tol, max_iter):
    v, g, H = derivs_fn(x)
    trace = []
    for it in range(1, max_iter + 1):
        res = float(np.linalg.norm(g))
        trace.append(res)
        if res <= tol * (1 + np.linalg.norm(x)):
            return OptResult(x, float(v), g, it - 1, res, trace)
        d = _newton_direction(g, H)
        slope = float(g @ d)
        if slope <= 0:
            d, slope = g.copy(), float(g @ g)
        t = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS):
            xt = x + t * d
            vt = value_fn(xt)
            if np.isfinite(vt) and vt >= v + _ARMIJO * t * slope:
                accepted = True
                break
            if np.isfinite(vt) and _near_roundoff(vt, v):
                vt2, gt, Ht = derivs_fn(xt)
                if np.linalg.norm(gt) < np.linalg.norm(g):
                    x, v, g, H = xt, vt2, gt, Ht
                    accepted = None
                    break
            t *= 0.5
        if accepted is None:
            continue
        if not accepted:
            raise SolverError("line search failed", x=x, iterations=it, residual=res, trace=trace)
        x = xt
        v, g, H = derivs_fn(x)
    res = float(np.linalg.norm(g))
    raise SolverError("iteration cap reached", x=x, iterations=max_iter, residual=res, trace=trace)


def _regularized(H):
    """-H shifted until positive definite (for the quadratic model)."""
    Q = -0.5 * (H + H.T)
    m = Q.shape[0]
    scale = max(1e-300, float(np.max(np.abs(np.diag(Q)))) if m else 1.0)
    shift = 0.0
    for _ in range(60):
        try:
            np.linalg.cholesky(Q + shift * np.eye(m))
            return Q + shift * np.eye(m)
        except np.linalg.LinAlgError:
            shift = max(2 * shift, 1e-10 * scale)
    return Q + scale * np.eye(m)


def _eq_step(Q, r, free, has_budget):
    """Minimizer of 0.5 p'Qp + r'p over free coordinates (and sum(p) = 0)."""
    m = r.size
    p = np.zeros(m)
    idx = np.flatnonzero(free)
    k = idx.size
    if k == 0 or (has_budget and k == 1):
        nu = -float(r[idx[0]]) if k == 1 else None
        return p, nu
    QF = Q[np.ix_(idx, idx)]
    if not has_budget:
        p[idx] = np.linalg.solve(QF, -r[idx])
        return p, 0.0
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = QF
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    sol = np.linalg.solve(kkt, np.concatenate([-r[idx], [0.0]]))
    p[idx] = sol[:k]
    return p, float(sol[k])


def box_qp_step(g, H, lo_d, hi_d, has_budget, max_iter=None):
    """Primal active-set solve of the local quadratic model.

    Maximizes ``g'd + 0.5 d'Hd`` subject to ``lo_d <= d <= hi_d`` and, with a
    budget, ``sum(d) = 0``. ``H`` is regularized to be negative definite.
    ``d = 0`` must be feasible.
    """
    m = g.size
    Q = _regularized(H)
    tol = 1e-13
    at_lo = lo_d >= -tol
    at_hi = hi_d <= tol
    # working set: +1 fixed at upper bound, -1 at lower bound, 0 free
    work = np.where(at_hi, 1, np.where(at_lo, -1, 0))
    d = np.zeros(m)
    max_iter = max_iter or 10 * m + 50
    for _ in range(max_iter):
        r = Q @ d - g
        p, nu = _eq_step(Q, r, work == 0, has_budget)
        scale = 1.0 + float(np.max(np.abs(d)))
        if np.max(np.abs(p), initial=0.0) <= 1e-14 * scale:
            # stationary on the working set: check multiplier signs
            fixed = np.flatnonzero(work != 0)
            if fixed.size == 0:
                return d
            if nu is None:
                if has_budget:
                    lo_fixed = -r[work == -1]
                    hi_fixed = -r[work == 1]
                    nu_lo = float(np.max(lo_fixed)) if lo_fixed.size else -np.inf
                    nu_hi = float(np.min(hi_fixed)) if hi_fixed.size else np.inf
                    nu = 0.5 * (nu_lo + nu_hi) if np.isfinite(nu_lo + nu_hi) else (
                        nu_lo if np.isfinite(nu_lo) else nu_hi)
                else:
                    nu = 0.0
            mult = (r[fixed] + nu) * -work[fixed]
            worst = int(np.argmin(mult))
            if mult[worst] >= -1e-12 * (1.0 + float(np.max(np.abs(g)))):
                return d
            work[fixed[worst]] = 0
            continue
        alpha = 1.0
        block = -1
        for i in np.flatnonzero((work == 0) & (p != 0)):
            limit = (hi_d[i] - d[i]) / p[i] if p[i] > 0 else (lo_d[i] - d[i]) / p[i]
            if limit < alpha:
                alpha, block = max(limit, 0.0), i
        d = d + alpha * p
        if block >= 0:
            if p[block] > 0:
                d[block], work[block] = hi_d[block], 1
            else:
                d[block], work[block] = lo_d[block], -1
    return d


def _projected_newton(value_fn, derivs_fn, x, feasible, tol, max_iter):
    v, g, H = derivs_fn(x)
    trace = []
    lo, hi = feasible.bounds(x.size)
    for it in range(1, max_iter + 1):
        pg = feasible.tangent_project(x, g)
        res = float(np.linalg.norm(pg))
        trace.append(res)
        if res <= tol * (1 + np.linalg.norm(x)):
            return OptResult(x, float(v), g, it - 1, res, trace)
        d = box_qp_step(g, H, lo - x, hi - x, feasible.has_budget)
        step = None
        if float(g @ d) > 0:
            step = _line_search(value_fn, derivs_fn, feasible, x, v, g, d)
        if step is None:
            lip = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (H + H.T))))) if H.size else 1.0
            t0 = 1.0 / lip if lip > 0 else 1.0
            step = _arc_search(value_fn, derivs_fn, feasible, x, v, g, pg, t0)
        if step is None:
            raise SolverError("projected line search failed", x=x, iterations=it,
                              residual=res, trace=trace)
        x, v, g, H = step
    pg = feasible.tangent_project(x, g)
    raise SolverError("iteration cap reached", x=x, iterations=max_iter,
                      residual=float(np.linalg.norm(pg)), trace=trace)


def _line_search(value_fn, derivs_fn, feasible, x, v, g, d):
    """Backtracking along a feasible direction (x + t d stays feasible for t <= 1)."""
    slope = float(g @ d)
    res0 = np.linalg.norm(feasible.tangent_project(x, g))
    t = 1.0
    for _ in range(_MAX_HALVINGS):
        xt = x + t * d
        vt = value_fn(xt)
        if np.isfinite(vt) and vt >= v + _ARMIJO * t * slope:
            return (xt,) + tuple(derivs_fn(xt))
        if np.isfinite(vt) and _near_roundoff(vt, v):
            vt2, gt, Ht = derivs_fn(xt)
            if np.linalg.norm(feasible.tangent_project(xt, gt)) < res0:
                return xt, vt2, gt, Ht
        t *= 0.5
    return None


def _arc_search(value_fn, derivs_fn, feasible, x, v, g, d, t0):
    t = t0
    for _ in range(_MAX_HALVINGS):
        xt = feasible.project(x + t * d)
        move = xt - x
        gain = float(g @ move)
        if gain <= 0 and np.linalg.norm(move) == 0:
            return None
        vt = value_fn(xt)
        if np.isfinite(vt) and vt >= v + _ARMIJO * gain and gain > 0:
            vt2, gt, Ht = derivs_fn(xt)
            return xt, vt2, gt, Ht
        if np.isfinite(vt) and _near_roundoff(vt, v):
            vt2, gt, Ht = derivs_fn(xt)
            if np.linalg.norm(feasible.tangent_project(xt, gt)) < np.linalg.norm(
                feasible.tangent_project(x, g)
            ):
                return xt, vt2, gt, Ht
        t *= 0.5
    return None
