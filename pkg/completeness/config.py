"""Run configuration: UTF-8 ``key = value`` lines with ``#`` comments.

    domain = sequences
    loss = mse
    folds = 10
    models = urn, rv
    bounds.rv.alpha = 0, 1.5

Command-line flags override file values.
"""
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

from completeness.core import CompletenessError, ProblemKind, loss_for
from completeness.evaluation import OBSERVATION, UNWEIGHTED
from completeness.fitting import FitConfig
from completeness.filter import CELLS, POSITIONS
from completeness.hetero import HeteroPlan
from completeness.lookup import PROJECTIONS
from completeness.models import (
    DEFAULT_MODELS,
    MODEL_NAMES,
    SIGN_PRESERVING,
    STRICT,
    ModelOptions,
)
from completeness.models.games import CHAIN, DEFAULT_K_MAX, HIERARCHY
from completeness.models.sequences import FORCE, PLUGIN, POSTERIOR, ZERO
from completeness.trees import TreeConfig

logger = logging.getLogger("completeness")

DEFAULT_LOSS = {
    ProblemKind.RISK: "mse",
    ProblemKind.GAMES: "miscls",
    ProblemKind.SEQUENCES: "mse",
}


class ConfigError(CompletenessError):
    """Raised for an unknown key or a malformed value; ``line`` is 1-based,
    0 when the problem is not tied to a line."""

    def __init__(self, error: str, line: int = 0):
        self.line: int = line
        super(ConfigError, self).__init__(error, "config", {"line": line})

    def __str__(self):
        if self.line:
            return "line %d: %s" % (self.line, self.error)
        return str(self.error)


def _bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean, got '%s'" % value)


def _list(value: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _choice(*allowed):
    def parse(value: str) -> str:
        value = value.strip()
        if value not in allowed:
            raise ValueError("expected one of %s, got '%s'" % (", ".join(allowed), value))
        return value

    return parse


def _optional_int(value: str) -> Optional[int]:
    return None if value.strip().lower() in ("", "none") else int(value)


def _bounds(value: str) -> Tuple[float, float]:
    parts = _list(value)
    if len(parts) != 2:
        raise ValueError("bounds need 'lo, hi'")
    lo, hi = float(parts[0]), float(parts[1])
    if lo > hi:
        raise ValueError("lower bound exceeds upper bound")
    return lo, hi


# file key -> (RunConfig attribute, parser)
KEYS = {
    "domain": ("domain", _choice("risk", "games", "sequences")),
    "loss": ("loss", _choice("mse", "miscls")),
    "folds": ("folds", int),
    "seed": ("seed", int),
    "models": ("models", _list),
    "naive": ("naive", _choice("default", "mean")),
    "lookup": ("lookup", _choice(*PROJECTIONS)),
    "stratify": ("stratify", _bool),
    "weighting": ("weighting", _choice(UNWEIGHTED, OBSERVATION)),
    "threads": ("threads", _optional_int),
    "out": ("out", str.strip),
    "data": ("data", str.strip),
    "fit.grid_points": ("grid_points", int),
    "fit.refine": ("refine", _bool),
    "fit.refine_max_iters": ("refine_max_iters", int),
    "fit.refine_tolerance": ("refine_tolerance", float),
    "trees.enabled": ("trees_enabled", _bool),
    "trees.n_trees": ("n_trees", int),
    "trees.max_depth": ("max_depth", _optional_int),
    "trees.min_leaf": ("min_leaf", int),
    "pchm.k_max": ("k_max", int),
    "pchm.opponents": ("opponents", _choice(HIERARCHY, CHAIN)),
    "urn.depletion": ("depletion", _choice(FORCE, ZERO)),
    "urn.likelihood": ("likelihood", _choice(POSTERIOR, PLUGIN)),
    "eu.losses": ("eu_losses", _choice(SIGN_PRESERVING, STRICT)),
    "hetero.groups": ("hetero_groups", int),
    "hetero.test_subjects": ("hetero_test_subjects", int),
    "hetero.train_lotteries": ("hetero_train_lotteries", int),
    "hetero.lotteries": ("hetero_lotteries", _list),
    "chi2.method": ("chi2_method", _choice(POSITIONS, CELLS)),
}


@dataclass(frozen=True)
class RunConfig:
    domain: Optional[str] = None
    loss: Optional[str] = None
    folds: int = 10
    seed: int = 0
    models: Optional[Tuple[str, ...]] = None
    naive: str = "default"
    lookup: str = "full"
    stratify: bool = False
    weighting: str = UNWEIGHTED
    threads: Optional[int] = None
    out: str = "."
    data: Optional[str] = None
    grid_points: int = 11
    refine: bool = True
    refine_max_iters: int = 200
    refine_tolerance: float = 1e-7
    trees_enabled: bool = False
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_leaf: int = 5
    k_max: int = DEFAULT_K_MAX
    opponents: str = HIERARCHY
    depletion: str = FORCE
    likelihood: str = POSTERIOR
    eu_losses: str = SIGN_PRESERVING
    hetero_groups: int = 3
    hetero_test_subjects: int = 71
    hetero_train_lotteries: int = 5
    hetero_lotteries: Tuple[str, ...] = ()
    chi2_method: str = POSITIONS
    bounds: Dict[str, Dict[str, Tuple[float, float]]] = field(default_factory=dict)

    @property
    def problem_kind(self) -> ProblemKind:
        if self.domain is None:
            raise ConfigError("domain is required")
        return ProblemKind(self.domain)

    @property
    def loss_name(self) -> str:
        return self.loss or DEFAULT_LOSS[self.problem_kind]

    @property
    def model_names(self) -> Tuple[str, ...]:
        if self.models is None:
            return DEFAULT_MODELS[self.problem_kind]
        return self.models

    def loss_function(self):
        return loss_for(self.loss_name)

    def fit_config(self) -> FitConfig:
        return FitConfig(
            grid_points_per_dim=self.grid_points,
            refine=self.refine,
            refine_max_iters=self.refine_max_iters,
            refine_tolerance=self.refine_tolerance,
            seed=self.seed,
        )

    def tree_config(self) -> TreeConfig:
        return TreeConfig(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            seed=self.seed,
            threads=self.threads,
        )

    def model_options(self) -> ModelOptions:
        return ModelOptions(
            k_max=self.k_max,
            opponents=self.opponents,
            depletion=self.depletion,
            likelihood=self.likelihood,
            eu_losses=self.eu_losses,
            bounds=self.bounds,
        )

    def hetero_plan(self) -> HeteroPlan:
        return HeteroPlan(
            n_groups=self.hetero_groups,
            n_test_subjects=self.hetero_test_subjects,
            n_train_lotteries=self.hetero_train_lotteries,
            seed=self.seed,
            train_lotteries=tuple(self.hetero_lotteries) or None,
        )

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with every non-None override applied."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError("Unknown settings: %s" % ", ".join(sorted(unknown)))
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def validate(self) -> "RunConfig":
        kind = self.problem_kind
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in self.model_names:
            if name not in MODEL_NAMES[kind]:
                raise ConfigError(
                    "Unknown model '%s' for domain '%s'" % (name, kind.value)
                )
        for name in self.bounds:
            if name not in MODEL_NAMES[kind]:
                raise ConfigError("Bounds given for unknown model '%s'" % name)
        return self

    def as_dict(self) -> Dict[str, Any]:
        """Fully resolved settings, as echoed into reports."""
        out = asdict(self)
        out["models"] = list(self.model_names) if self.domain else self.models
        out["loss"] = self.loss_name if self.domain else self.loss
        out["hetero_lotteries"] = list(self.hetero_lotteries)
        out["bounds"] = {
            m: {p: list(b) for p, b in params.items()} for m, params in self.bounds.items()
        }
        return out


def parse_config(text: str) -> RunConfig:
    values: Dict[str, Any] = {}
    bounds: Dict[str, Dict[str, Tuple[float, float]]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("expected 'key = value'", number)
        try:
            if key.startswith("bounds."):
                parts = key.split(".")
                if len(parts) != 3:
                    raise ConfigError("expected bounds.<model>.<param>", number)
                bounds.setdefault(parts[1], {})[parts[2]] = _bounds(value)
                continue
            if key not in KEYS:
                logger.error("Unknown configuration key '%s' on line %d", key, number)
                raise ConfigError("unknown key '%s'" % key, number)
            attribute, parse = KEYS[key]
            values[attribute] = parse(value)
        except ValueError as exc:
            raise ConfigError("bad value for '%s': %s" % (key, exc), number)
    return RunConfig(bounds=bounds, **values)


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())
