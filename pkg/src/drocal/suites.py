"""Experiment suites: newsvendor simulation, portfolio and logistic out-of-sample tests, quadratic toy.

Every suite is a pure function of its configuration: all randomness flows
from ``cfg.seed`` through named streams, aggregates are exactly rounded,
and no timestamps are written, so reruns produce byte-identical output
directories.
"""

import json
import logging
import math
from pathlib import Path

import numpy as np

from .asymptotics import predicted_curves, summarize
from .config import ExperimentConfig, bundled_returns_path
from .data import ingest_csv
from .divergence import get_divergence
from .empirical import EmpiricalDistribution, replicate_rng
from .exceptions import ConfigError, DataError
from .frontier import (
    Frontier, HighConfidence, MaxMean, bootstrap_frontier, calibrate, frontier_gap,
    high_confidence_delta, normalize_frontier, oos_frontier, true_frontier, write_frontier,
)
from .rewards import ExpUtilityModel, LogisticModel, NewsvendorModel, QuadraticModel, model_reward_stats
from .robust import robust_optimize

log = logging.getLogger(__name__)

# stream ids kept clear of replicate indices
DATA_STREAM = 1 << 40
REF_STREAM = (1 << 40) + 1


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def write_rows(path, header, rows):
    """CSV with ``repr`` floats so values round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return path


def divergence_for(cfg):
    try:
        return get_divergence(cfg.phi)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _solutions(model, dist, phi, grid, tol):
    xs, x0 = [], None
    for delta in grid:
        sol = robust_optimize(model, dist, float(delta), phi, x0=x0, tol=tol)
        xs.append(sol.x)
        x0 = sol.x
    return xs


def evaluate_path(model, train, test, phi, grid, tol, meta):
    """Solve on ``train`` along ``grid`` and report reward mean/variance on ``test``."""
    grid = np.asarray(grid, dtype=float)
    xs = _solutions(model, train, phi, grid, tol)
    stats = [model_reward_stats(model, x, test) for x in xs]
    zeros = np.zeros(grid.size)
    meta = dict(meta, decisions=[x.tolist() for x in xs])
    return Frontier(grid, [s[0] for s in stats], [s[1] for s in stats], zeros, zeros, meta=meta)


# ---------------------------------------------------------------------------
# problem builders
# ---------------------------------------------------------------------------


def mixture_sampler(mean_low, mean_high, mix_low):
    """Sampler ``(rng, size) -> demands`` for a two-component exponential mixture."""

    def sample(rng, size):
        low = rng.random(size) < mix_low
        scale = np.where(low, mean_low, mean_high)
        return rng.exponential(1.0, size) * scale

    return sample


def newsvendor_moments(r, c, means, weights):
    """Exact mean and variance of ``r min(x, Y) - c x`` under an exponential mixture.

    For ``Y ~ Exp`` with mean ``b`` and ``x >= 0``:
    ``E min = b (1 - e^{-x/b})`` and ``E min^2 = 2 b^2 (1 - e^{-x/b} (1 + x/b))``.
    """
    means = np.asarray(means, dtype=float)
    weights = np.asarray(weights, dtype=float)

    def moments(x):
        x = float(np.asarray(x).ravel()[0])
        if x <= 0:
            return r * x - c * x, 0.0
        e = np.exp(-x / means)
        m1 = math.fsum((weights * means * (1.0 - e)).tolist())
        m2 = math.fsum((weights * 2.0 * means**2 * (1.0 - e * (1.0 + x / means))).tolist())
        return r * m1 - c * x, max(r * r * (m2 - m1 * m1), 0.0)

    return moments


def newsvendor_problem(cfg):
    mean_demand = cfg.mix_low * cfg.mean_low + (1.0 - cfg.mix_low) * cfg.mean_high
    smoothing = cfg.smoothing if cfg.smoothing is not None else 1e-3 * mean_demand
    model = NewsvendorModel(cfg.r, cfg.c, smoothing=smoothing)
    sampler = mixture_sampler(cfg.mean_low, cfg.mean_high, cfg.mix_low)
    moments = newsvendor_moments(cfg.r, cfg.c, [cfg.mean_low, cfg.mean_high],
                                 [cfg.mix_low, 1.0 - cfg.mix_low])
    return model, sampler, moments


def toy_problem(cfg):
    support = np.asarray(cfg.toy_support, dtype=float)
    model = QuadraticModel(1)
    law = EmpiricalDistribution(support)

    def sampler(rng, size):
        return support[rng.integers(0, support.size, size=size)]

    def moments(x):
        return model_reward_stats(model, x, law)

    return model, sampler, moments, law


def _returns_table(cfg):
    path = cfg.returns_path or bundled_returns_path()
    return ingest_csv(path, "returns", columns=cfg.asset_columns,
                      percent_to_decimal=cfg.percent_to_decimal)


def portfolio_model(cfg, d):
    if not cfg.lo * d <= cfg.budget <= cfg.hi * d:
        raise ConfigError(f"budget {cfg.budget} infeasible for {d} assets in [{cfg.lo}, {cfg.hi}]")
    return ExpUtilityModel.budget_constrained(d, cfg.gamma, cfg.lo, cfg.hi, cfg.budget)


def logistic_data(cfg):
    """Training and test distributions over ``(label, covariates)`` rows.

    Raises:
        DataError: a training half with a single class, or a constant covariate.
    """
    table = ingest_csv(cfg.labeled_path, "labeled", columns=cfg.covariates,
                       label_column=cfg.label_column, positive_label=cfg.positive_label)
    train, test = table.split_halves()
    if np.unique(train.labels).size < 2:
        raise DataError("training half contains a single class")
    z_train, z_test = train.covariates, test.covariates
    if cfg.standardize:
        centre = z_train.mean(axis=0)
        scale = z_train.std(axis=0)
        if np.any(scale == 0):
            bad = [n for n, s in zip(table.covariate_names, scale) if s == 0]
            raise DataError(f"constant covariate(s) in the training half: {', '.join(bad)}")
        z_train = (z_train - centre) / scale
        z_test = (z_test - centre) / scale
    model = LogisticModel(table.covariates.shape[1])
    train_dist = EmpiricalDistribution(np.column_stack([train.labels, z_train]))
    test_dist = EmpiricalDistribution(np.column_stack([test.labels, z_test]))
    return model, train_dist, test_dist, table.covariate_names


def dataset(cfg: ExperimentConfig):
    """Model and observed data set for the single-frontier subcommands."""
    if cfg.experiment == "newsvendor":
        model, sampler, _ = newsvendor_problem(cfg)
        return model, EmpiricalDistribution(sampler(replicate_rng(cfg.seed, DATA_STREAM), cfg.n))
    if cfg.experiment == "toy":
        model, sampler, _, _ = toy_problem(cfg)
        return model, EmpiricalDistribution(sampler(replicate_rng(cfg.seed, DATA_STREAM), cfg.n))
    if cfg.experiment == "portfolio":
        train = _returns_table(cfg).window(cfg.train_start, cfg.train_length)
        return portfolio_model(cfg, train.n_assets), EmpiricalDistribution(train.returns)
    model, train, _, _ = logistic_data(cfg)
    return model, train


def known_law(cfg: ExperimentConfig):
    """``(model, sampler, moments)`` for experiments with a known data-generating model."""
    if cfg.experiment == "newsvendor":
        return newsvendor_problem(cfg)
    if cfg.experiment == "toy":
        return toy_problem(cfg)[:3]
    raise ConfigError(f"experiment {cfg.experiment!r} has no known data-generating model")


def _meta(cfg, **extra):
    return dict(extra, config=cfg.to_dict())


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def _gap_sweep(cfg, out, model, sampler, moments, reference, phi, grid):
    """Out-of-sample frontiers per n, their gaps to ``reference``, and bootstrap pairs."""
    gaps = []
    pairs = {}
    for n in cfg.n_values:
        oos = oos_frontier(model, sampler, n, cfg.K, phi, grid, cfg.seed, moments=moments, tol=cfg.tol)
        write_frontier(oos, out / f"oos_n{n}.csv", _meta(cfg))
        gap = frontier_gap(oos, reference)
        gaps.append((int(n), gap))
        log.info("n=%d gap=%.4g", n, gap)

        data = EmpiricalDistribution(sampler(replicate_rng(cfg.seed, DATA_STREAM + n), n))
        boot = bootstrap_frontier(model, data, phi, grid, cfg.k, cfg.seed, tol=cfg.tol)
        write_frontier(boot, out / f"bootstrap_n{n}.csv", _meta(cfg))
        try:
            write_frontier(normalize_frontier(boot), out / f"bootstrap_n{n}_normalized.csv", _meta(cfg))
            write_frontier(normalize_frontier(oos), out / f"oos_n{n}_normalized.csv", _meta(cfg))
            pairs[int(n)] = True
        except ValueError as exc:
            log.warning("n=%d: frontier not normalizable (%s)", n, exc)
            pairs[int(n)] = False
    write_rows(out / "gap_vs_n.csv", ("n", "gap"), gaps)
    values = [g for _, g in gaps]
    decreasing = all(b < a for a, b in zip(values, values[1:]))
    return gaps, decreasing, pairs


def run_newsvendor_suite(cfg: ExperimentConfig, out) -> dict:
    """True frontier, out-of-sample frontiers per n, gap table and normalized pairs."""
    out = Path(out)
    phi = divergence_for(cfg)
    grid = cfg.delta_grid
    model, sampler, moments = newsvendor_problem(cfg)
    ref = EmpiricalDistribution(sampler(replicate_rng(cfg.seed, REF_STREAM), cfg.ref_size))
    truth = true_frontier(model, ref, phi, grid, moments=moments, tol=min(cfg.tol, 1e-10))
    write_frontier(truth, out / "true_frontier.csv", _meta(cfg))
    gaps, decreasing, pairs = _gap_sweep(cfg, out, model, sampler, moments, truth, phi, grid)
    summary = {"experiment": "newsvendor", "gaps": dict(gaps), "gap_decreasing": decreasing,
               "normalized_pairs": pairs, "smoothing": model.smoothing,
               "evaluation": "exact moments of the unsmoothed reward"}
    if not decreasing:
        log.warning("frontier gap is not decreasing in n: %s", gaps)
    write_json(_meta(cfg, summary=summary), out / "meta.json")
    return summary


def run_toy_suite(cfg: ExperimentConfig, out) -> dict:
    """Quadratic toy: asymptotic summary, predicted curves, simulated and bootstrap frontiers."""
    out = Path(out)
    phi = divergence_for(cfg)
    grid = cfg.delta_grid
    model, sampler, moments, law = toy_problem(cfg)
    s = summarize(model, law, phi)
    truth = true_frontier(model, law, phi, grid, tol=min(cfg.tol, 1e-10))
    write_frontier(truth, out / "true_frontier.csv", _meta(cfg))
    for n in cfg.n_values:
        write_rows(out / f"predicted_n{n}.csv", ("delta", "mean", "variance"),
                   predicted_curves(s, n, grid))
    gaps, decreasing, pairs = _gap_sweep(cfg, out, model, sampler, moments, truth, phi, grid)
    asym = {"x_star": s.x_star, "pi": s.pi, "rho": s.rho, "theta": s.theta, "xi0": s.xi0,
            "eta0": s.eta0, "mean0": s.mean0, "curvature_term": s.curvature_term}
    summary = {"experiment": "toy", "asymptotics": asym, "gaps": dict(gaps),
               "gap_decreasing": decreasing, "normalized_pairs": pairs}
    write_json(_meta(cfg, summary=summary), out / "meta.json")
    return summary


def run_portfolio_suite(cfg: ExperimentConfig, out) -> dict:
    """Bootstrap frontier on the training window, delta_alpha table, test-window frontiers."""
    out = Path(out)
    phi = divergence_for(cfg)
    table = _returns_table(cfg)
    train_table = table.window(cfg.train_start, cfg.train_length)
    tests = {start: table.window(start, cfg.test_length) for start in cfg.test_windows}
    model = portfolio_model(cfg, train_table.n_assets)
    train = EmpiricalDistribution(train_table.returns)

    boot = bootstrap_frontier(model, train, phi, cfg.delta_grid, cfg.k, cfg.seed, tol=cfg.tol)
    write_frontier(boot, out / "bootstrap.csv", _meta(cfg))
    delta_max_mean = calibrate(boot, MaxMean())

    rows = []
    for alpha in cfg.alphas:
        rule = HighConfidence(alpha, model, train, phi, k=cfg.hc_k, seed=cfg.seed,
                              estimator=cfg.hc_estimator)
        delta, radius = high_confidence_delta(rule)
        rows.append((float(alpha), radius, delta))
    write_rows(out / "delta_alpha.csv", ("alpha", "radius", "delta"), rows)
    by_alpha = sorted(rows, key=lambda t: -t[0])
    monotone = all(b[2] > a[2] for a, b in zip(by_alpha, by_alpha[1:]))
    if not monotone:
        log.warning("delta_alpha is not increasing as alpha decreases: %s", rows)
    comparison = None
    if cfg.reference_deltas is not None:
        comparison = [{"alpha": a, "delta": d, "reference": ref, "ratio": d / ref}
                      for (a, _, d), ref in zip(rows, cfg.reference_deltas)]

    grid = sorted(set(cfg.delta_grid) | {d for _, _, d in rows})
    test_summary = {}
    for start, window in tests.items():
        f = evaluate_path(model, train, EmpiricalDistribution(window.returns), phi, grid, cfg.tol,
                          {"method": "out_of_sample_test", "window_start": start,
                           "window_length": cfg.test_length, "n": train.n, "phi": phi.kind})
        write_frontier(f, out / f"test_{start}.csv", _meta(cfg))
        test_summary[start] = {"best_mean_delta": calibrate(f, MaxMean())}
    summary = {"experiment": "portfolio", "assets": train_table.assets,
               "train_dates": [train_table.dates[0], train_table.dates[-1]],
               "max_mean_delta": delta_max_mean, "delta_alpha": rows,
               "delta_alpha_monotone": monotone, "reference_comparison": comparison,
               "tests": test_summary}
    write_json(_meta(cfg, summary=summary), out / "meta.json")
    return summary


def run_logistic_suite(cfg: ExperimentConfig, out) -> dict:
    """Bootstrap frontier on the first half, test frontier on the second half."""
    out = Path(out)
    phi = divergence_for(cfg)
    model, train, test, names = logistic_data(cfg)
    boot = bootstrap_frontier(model, train, phi, cfg.delta_grid, cfg.k, cfg.seed, tol=cfg.tol)
    write_frontier(boot, out / "bootstrap.csv", _meta(cfg))
    delta_star = calibrate(boot, MaxMean())
    i = boot.index_of(delta_star)
    f = evaluate_path(model, train, test, phi, cfg.delta_grid, cfg.tol,
                      {"method": "out_of_sample_test", "n": train.n, "n_test": test.n,
                       "phi": phi.kind})
    write_frontier(f, out / "test.csv", _meta(cfg))
    summary = {"experiment": "logistic", "covariates": names, "n_train": train.n,
               "n_test": test.n, "max_mean_delta": delta_star,
               "variance_ratio_at_max_mean": float(boot.sigma2[i] / boot.sigma2[0]),
               "test_max_mean_delta": calibrate(f, MaxMean())}
    write_json(_meta(cfg, summary=summary), out / "meta.json")
    return summary


SUITES = {
    "newsvendor": run_newsvendor_suite,
    "portfolio": run_portfolio_suite,
    "logistic": run_logistic_suite,
    "toy": run_toy_suite,
}


def run_suite(cfg: ExperimentConfig, out) -> dict:
    return SUITES[cfg.experiment](cfg, out)
