"""Flat ``key = value`` experiment configuration with typed validation.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment. Lists are comma separated. Command-line ``--set key=value``
overrides are applied on top, then every value is parsed and checked.
Keys left unset take experiment-specific defaults.
"""

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Optional

from .exceptions import ConfigError

EXPERIMENTS = ("newsvendor", "portfolio", "logistic", "toy")
RULES = ("maxmean", "tradeoff", "satisficing", "highconfidence")


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _list(conv):
    def parse(text):
        items = [t.strip() for t in text.split(",")]
        if items == [""]:
            return []
        if any(t == "" for t in items):
            raise ValueError(f"empty list item in {text!r}")
        return [conv(t) for t in items]

    return parse


def _str(text):
    return text.strip()


def _opt_str(text):
    text = text.strip()
    return text or None


def _int(text):
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _column(text):
    text = text.strip()
    return int(text) if text.isdigit() else text


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any
    help: str


# experiment-specific defaults come from ``_EXPERIMENT_DEFAULTS``
SCHEMA: Dict[str, _Key] = {
    "experiment": _Key(_str, "toy", "newsvendor | portfolio | logistic | toy"),
    "seed": _Key(_int, 0, "base seed for every random stream"),
    "phi": _Key(_str, "kl", "divergence: kl | chi2"),
    "delta_grid": _Key(_list(float), None, "strictly increasing robustness grid"),
    "k": _Key(_int, 50, "bootstrap replicates"),
    "K": _Key(_int, 10_000, "Monte-Carlo repeats for out-of-sample frontiers"),
    "n": _Key(_int, None, "data size for single-n runs"),
    "n_values": _Key(_list(_int), None, "data sizes for the out-of-sample sweep"),
    "tol": _Key(float, 1e-9, "solver stationarity tolerance"),
    # newsvendor
    "r": _Key(float, 30.0, "unit revenue"),
    "c": _Key(float, 2.0, "unit cost"),
    "mean_low": _Key(float, 10.0, "mean of the low-demand exponential"),
    "mean_high": _Key(float, 100.0, "mean of the high-demand exponential"),
    "mix_low": _Key(float, 0.7, "probability of the low-demand component"),
    "smoothing": _Key(float, None, "soft-min width (default 1e-3 x mean demand)"),
    "ref_size": _Key(_int, 1_000_000, "sample size standing in for the demand law"),
    # portfolio
    "gamma": _Key(float, 1.0, "risk aversion"),
    "lo": _Key(float, -1.0, "lower bound on each weight"),
    "hi": _Key(float, 1.0, "upper bound on each weight"),
    "budget": _Key(float, 1.0, "sum of weights"),
    "returns_path": _Key(_opt_str, None, "returns CSV (default: bundled synthetic file)"),
    "percent_to_decimal": _Key(_bool, True, "divide returns by 100"),
    "asset_columns": _Key(_list(_column), None, "asset subset (names or 1-based numbers)"),
    "train_start": _Key(_str, "196804", "first date of the training window"),
    "train_length": _Key(_int, 50, "training window length"),
    "test_windows": _Key(_list(_str), ["197207", "197610", "198101"], "test window start dates"),
    "test_length": _Key(_int, 50, "test window length"),
    "alphas": _Key(_list(float), [0.10, 0.05, 0.01], "significance levels for high confidence"),
    "hc_k": _Key(_int, 1000, "bootstrap draws for the divergence quantile"),
    "hc_estimator": _Key(_str, "bootstrap", "bootstrap | chi2"),
    "reference_deltas": _Key(_list(float), None, "externally reported delta_alpha values to compare"),
    # quadratic toy
    "toy_support": _Key(_list(float), [0.0, 0.0, 3.0], "equally likely outcomes of the toy law"),
    # logistic
    "labeled_path": _Key(_opt_str, None, "labeled CSV"),
    "label_column": _Key(_column, None, "label column (default: first)"),
    "positive_label": _Key(_opt_str, None, "label value mapped to +1"),
    "covariates": _Key(_list(_column), None, "covariate subset (names or 1-based numbers)"),
    "standardize": _Key(_bool, True, "centre and scale covariates by training statistics"),
    # calibrate subcommand
    "rule": _Key(_str, "maxmean", "maxmean | tradeoff | satisficing | highconfidence"),
    "lambda": _Key(float, 0.0, "mean-variance trade-off weight"),
    "target": _Key(float, None, "satisficing target"),
    "alpha": _Key(float, 0.05, "high-confidence significance level"),
    "frontier_path": _Key(_opt_str, None, "existing frontier CSV to calibrate"),
}

_EXPERIMENT_DEFAULTS = {
    "newsvendor": {"delta_grid": [0.0, 2e-4, 5e-4, 1e-3, 2e-3, 4e-3], "n": 30,
                   "n_values": [10, 30, 50]},
    "portfolio": {"delta_grid": [0.0, 1.0, 2.0, 3.0, 5.0, 10.0, 55.0, 58.0, 63.0], "n": 50,
                  "n_values": [50]},
    "logistic": {"delta_grid": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
                 "covariates": list(range(1, 11)), "k": 25},
    "toy": {"delta_grid": [0.0, 0.1, 0.2, 0.5, 1.0], "n": 50, "n_values": [10, 30, 50],
            "K": 2000},
}


def bundled_returns_path() -> Path:
    """Path of the synthetic 10-asset returns file shipped with the package."""
    return Path(str(resources.files("drocal") / "data" / "synthetic_10_assets.csv"))


def parse_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Raw ``key -> value`` strings from flat config text."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_overrides(items: Iterable[str]) -> Dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        out[key] = value
    return out


class ExperimentConfig:
    """Validated experiment settings, readable as attributes or via :meth:`to_dict`."""

    def __init__(self, values: Dict[str, Any]):
        object.__setattr__(self, "_values", dict(values))

    def __getattr__(self, name):
        try:
            return self._values[name]
        except KeyError:
            raise AttributeError(name) from None

    def __setattr__(self, name, value):
        raise AttributeError("ExperimentConfig is immutable")

    def to_dict(self) -> Dict[str, Any]:
        return dict(self._values)

    @classmethod
    def from_raw(cls, raw: Dict[str, str], base_dir: Optional[Path] = None) -> "ExperimentConfig":
        """Parse and validate raw strings.

        Raises:
            ConfigError: unknown key, unparsable value, or invalid setting.
        """
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values = {}
        for key, spec in SCHEMA.items():
            if key in raw:
                try:
                    values[key] = spec.parse(raw[key])
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key!r}: {exc}") from None
            else:
                values[key] = spec.default
        exp = values["experiment"]
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
        for key, default in _EXPERIMENT_DEFAULTS[exp].items():
            if key not in raw:
                values[key] = default
        for key in ("returns_path", "labeled_path", "frontier_path"):
            if values[key] is not None and base_dir is not None:
                path = Path(values[key])
                if not path.is_absolute():
                    values[key] = str(base_dir / path)
        _validate(values)
        return cls(values)

    @classmethod
    def load(cls, path=None, overrides: Iterable[str] = (), seed: Optional[int] = None):
        """Read a config file (optional), apply ``key=value`` overrides and a seed."""
        raw = {}
        base_dir = None
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"config file {path} not found")
            raw = parse_text(path.read_text(), str(path))
            base_dir = path.parent
        raw.update(parse_overrides(overrides))
        if seed is not None:
            raw["seed"] = str(seed)
        return cls.from_raw(raw, base_dir)


def _validate(v):
    for key in ("k", "K", "n", "ref_size", "train_length", "test_length", "hc_k"):
        if v[key] is not None and v[key] < 1:
            raise ConfigError(f"{key} must be at least 1")
    if v["n_values"] is not None:
        if not v["n_values"] or any(n < 1 for n in v["n_values"]):
            raise ConfigError("n_values must be a nonempty list of positive integers")
    if v["seed"] < 0:
        raise ConfigError("seed must be nonnegative")
    if v["phi"] not in ("kl", "chi2", "relative_entropy", "modified_chi_square"):
        raise ConfigError(f"unknown divergence {v['phi']!r}")
    grid = v["delta_grid"]
    if not grid:
        raise ConfigError("delta_grid must not be empty")
    if any(d < 0 for d in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("delta_grid must be nonnegative and strictly increasing")
    if not v["r"] > v["c"] > 0:
        raise ConfigError("newsvendor needs r > c > 0")
    if not (v["mean_low"] > 0 and v["mean_high"] > 0 and 0 <= v["mix_low"] <= 1):
        raise ConfigError("mixture means must be positive and mix_low in [0, 1]")
    if v["smoothing"] is not None and v["smoothing"] < 0:
        raise ConfigError("smoothing must be nonnegative")
    if v["gamma"] <= 0:
        raise ConfigError("gamma must be positive")
    if v["lo"] > v["hi"]:
        raise ConfigError("lo must not exceed hi")
    if v["reference_deltas"] is not None and len(v["reference_deltas"]) != len(v["alphas"]):
        raise ConfigError("reference_deltas must match alphas in length")
    if not v["toy_support"]:
        raise ConfigError("toy_support must not be empty")
    if not v["alphas"] or any(not 0 < a < 1 for a in v["alphas"]):
        raise ConfigError("alphas must lie in (0, 1)")
    if not 0 < v["alpha"] < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if v["hc_estimator"] not in ("bootstrap", "chi2"):
        raise ConfigError("hc_estimator must be bootstrap or chi2")
    if v["rule"] not in RULES:
        raise ConfigError(f"rule must be one of {', '.join(RULES)}")
    if v["lambda"] < 0:
        raise ConfigError("lambda must be nonnegative")
    if v["tol"] <= 0:
        raise ConfigError("tol must be positive")
    for key in ("returns_path", "labeled_path", "frontier_path"):
        if v[key] is not None and not Path(v[key]).is_file():
            raise ConfigError(f"{key}: file {v[key]} does not exist")
    if v["experiment"] == "logistic" and v["labeled_path"] is None:
        raise ConfigError("logistic experiment needs labeled_path")
