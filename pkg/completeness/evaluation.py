"""K-fold cross-validation, standard errors, completeness and subsample curves."""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from completeness.core import (
    CompletenessError,
    Dataset,
    LossFunction,
    ModelClass,
    PredictionRule,
    observation_losses,
    parallel_map,
)
from completeness.fitting import FitConfig, fit_for_loss
from completeness.lookup import LookupSpec, LookupTable, train_lookup
from completeness.trees import BaggedTrees, TreeConfig, train_bagged

logger = logging.getLogger("completeness")

DEFAULT_FOLDS = 10
MAX_SEED = 2 ** 64

UNWEIGHTED = "unweighted"
OBSERVATION = "observation"

Learner = Union[ModelClass, PredictionRule, LookupSpec, TreeConfig]


class PlanError(CompletenessError):
    """Raised when folds cannot be formed, e.g. fewer observations than folds."""


class SubsampleTooSmallError(PlanError):
    """Raised when a subsample has fewer observations than folds."""


class FoldError(CompletenessError):
    """Raised when training or scoring fails in a fold. ``fold`` names the fold."""

    def __init__(self, error: str, fold: int, details: Optional[Dict[str, Any]] = None):
        self.fold: int = fold
        details = dict(details or {})
        details["fold"] = fold
        super(FoldError, self).__init__(error, "fold", details)


class DegenerateBenchmarkError(CompletenessError):
    """Raised when the naive error does not exceed the lookup error."""


@dataclass(frozen=True, eq=False)
class FoldPlan:
    K: int
    assignment: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return int(self.assignment.shape[0])

    @property
    def fold_sizes(self) -> List[int]:
        return [int(c) for c in np.bincount(self.assignment, minlength=self.K)]

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def make_folds(
    n: int,
    K: int = DEFAULT_FOLDS,
    seed: int = 0,
    instances: Optional[Sequence[Any]] = None,
) -> FoldPlan:
    """Seeded permutation split into K folds whose sizes differ by at most 1.

    With ``instances`` the permutation is taken within each instance and the
    instances are dealt out in sorted order, so every instance is spread
    across the folds as evenly as possible.
    """
    if K < 2:
        raise PlanError("K must be at least 2", "folds", {"K": K})
    if n < K:
        logger.error("Cannot split %d observations into %d folds", n, K)
        raise PlanError(
            "Fewer observations than folds", "folds", {"n": n, "K": K}
        )
    if not 0 <= seed < MAX_SEED:
        raise PlanError("Seed must be an unsigned 64-bit integer", "seed")
    rng = np.random.default_rng(seed)
    if instances is None:
        order = rng.permutation(n)
    else:
        labels = np.asarray([str(i) for i in instances], dtype=object)
        if labels.shape[0] != n:
            raise PlanError("One instance label per observation is required", "folds")
        order = np.concatenate(
            [rng.permutation(np.flatnonzero(labels == label)) for label in sorted(set(labels))]
        )
    assignment = np.empty(n, dtype=int)
    assignment[order] = np.arange(n) % K
    assignment.setflags(write=False)
    return FoldPlan(K, assignment, seed)


def std_error(per_fold_errors: Sequence[float]) -> float:
    """``sqrt(Var(errors) / K)`` with the population variance."""
    errors = np.asarray(per_fold_errors, dtype=float)
    if errors.shape[0] < 2:
        raise ValueError("std_error needs at least two folds")
    if errors.max() == errors.min():
        return 0.0
    mean = errors.sum() / errors.shape[0]
    variance = float(((errors - mean) ** 2).sum() / errors.shape[0])
    return math.sqrt(variance / errors.shape[0])


@dataclass(frozen=True)
class CvResult:
    name: str
    per_fold_errors: Tuple[float, ...]
    mean_error: float
    std_error: float
    fitted_parameters: Tuple[Dict[str, float], ...] = ()
    diagnostics: Dict[str, int] = field(default_factory=dict)
    weighting: str = UNWEIGHTED

    @classmethod
    def from_fold_errors(
        cls,
        name: str,
        errors: Sequence[float],
        fold_sizes: Optional[Sequence[int]] = None,
        weighting: str = UNWEIGHTED,
        fitted_parameters: Sequence[Dict[str, float]] = (),
        diagnostics: Optional[Dict[str, int]] = None,
    ) -> "CvResult":
        errors = tuple(float(e) for e in errors)
        if weighting == OBSERVATION and fold_sizes is not None:
            total = float(sum(fold_sizes))
            mean = sum(e * s for e, s in zip(errors, fold_sizes)) / total
        elif weighting in (UNWEIGHTED, OBSERVATION):
            mean = sum(errors) / len(errors)
        else:
            raise ValueError("Unknown weighting '%s'" % weighting)
        return cls(
            name=name,
            per_fold_errors=errors,
            mean_error=mean,
            std_error=std_error(errors),
            fitted_parameters=tuple(dict(p) for p in fitted_parameters),
            diagnostics=dict(diagnostics or {}),
            weighting=weighting,
        )

    @property
    def K(self) -> int:
        return len(self.per_fold_errors)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "per_fold_errors": list(self.per_fold_errors),
            "mean_error": self.mean_error,
            "std_error": self.std_error,
            "fitted_parameters": [dict(p) for p in self.fitted_parameters],
            "diagnostics": dict(self.diagnostics),
            "weighting": self.weighting,
        }


def learner_name(learner: Learner) -> str:
    if isinstance(learner, TreeConfig):
        return "bagged_trees"
    return learner.name


def train_rule(
    learner: Learner,
    train: Dataset,
    loss: LossFunction,
    fit_config: Optional[FitConfig] = None,
) -> Tuple[PredictionRule, Dict[str, float], Optional[Union[LookupTable, BaggedTrees]]]:
    """Train ``learner`` on ``train``: the rule, its parameters, and the
    trained table or ensemble when there is one."""
    if isinstance(learner, PredictionRule):
        return learner, {}, None
    if isinstance(learner, ModelClass):
        result = fit_for_loss(learner, train, loss, fit_config or FitConfig())
        return learner.build(result.parameters), dict(result.parameters), None
    if isinstance(learner, LookupSpec):
        if not learner.matches(loss):
            raise ValueError(
                "Lookup cell statistic '%s' does not match loss '%s'"
                % (learner.statistic.value, loss.kind.value)
            )
        table = train_lookup(train, learner)
        return table.as_rule(), {}, table
    if isinstance(learner, TreeConfig):
        ensemble = train_bagged(train, loss, learner)
        return ensemble.as_rule(), {}, ensemble
    raise TypeError("Cannot cross-validate %r" % (learner,))


def _fold_diagnostics(rule, trained, test: Dataset) -> Dict[str, int]:
    unique, inverse = test.unique_rows
    ties = rule.ties(unique)[inverse]
    out = {"test_rows": len(test), "ties": int(ties.sum())}
    if isinstance(trained, LookupTable):
        out["unseen_keys"] = int(trained.unseen(unique)[inverse].sum())
    return out


def cross_validate(
    learner: Learner,
    data: Dataset,
    loss: LossFunction,
    plan: FoldPlan,
    fit_config: Optional[FitConfig] = None,
    threads: Optional[int] = None,
    weighting: str = UNWEIGHTED,
    name: Optional[str] = None,
) -> CvResult:
    """Train on the complement of each fold, score on the fold, aggregate.

    Fixed prediction rules skip training.
    """
    if plan.n != len(data):
        raise PlanError(
            "Fold plan size does not match the dataset",
            "folds",
            {"plan": plan.n, "data": len(data)},
        )
    label = name or learner_name(learner)

    def run(fold: int):
        train = data.subset(plan.train_indices(fold))
        test = data.subset(plan.test_indices(fold))
        try:
            rule, params, trained = train_rule(learner, train, loss, fit_config)
            error = float(np.mean(observation_losses(rule, test, loss)))
        except Exception as exc:
            logger.error("Fold %d of %s failed: %s", fold, label, exc)
            raise FoldError(
                "Fold %d failed: %s" % (fold, exc), fold, {"learner": label}
            ) from exc
        logger.debug("%s fold %d error %.6g", label, fold, error)
        return error, params, _fold_diagnostics(rule, trained, test)

    outcomes = parallel_map(run, plan.K, threads)
    diagnostics: Dict[str, int] = {}
    for _, _, diag in outcomes:
        for key, value in diag.items():
            diagnostics[key] = diagnostics.get(key, 0) + value
    result = CvResult.from_fold_errors(
        label,
        [e for e, _, _ in outcomes],
        fold_sizes=plan.fold_sizes,
        weighting=weighting,
        fitted_parameters=[p for _, p, _ in outcomes] if isinstance(learner, ModelClass) else (),
        diagnostics=diagnostics,
    )
    if diagnostics.get("unseen_keys"):
        logger.warning(
            "%s: %d of %d test rows hit unseen keys",
            label,
            diagnostics["unseen_keys"],
            diagnostics["test_rows"],
        )
    logger.info("%s: CV error %.6g (%.3g)", label, result.mean_error, result.std_error)
    return result


def _mean_of(value: Union[CvResult, float]) -> float:
    return value.mean_error if isinstance(value, CvResult) else float(value)


def completeness(
    naive: Union[CvResult, float],
    model: Union[CvResult, float],
    lookup: Union[CvResult, float],
) -> float:
    """``(naive - model) / (naive - lookup)``, unclamped."""
    n, m, t = _mean_of(naive), _mean_of(model), _mean_of(lookup)
    if not n > t:
        logger.error("Degenerate benchmark: naive %.6g, lookup %.6g", n, t)
        raise DegenerateBenchmarkError(
            "degenerate benchmark: naive error must exceed lookup error",
            "degenerate_benchmark",
            {"naive": n, "lookup": t},
        )
    return (n - m) / (n - t)


def completeness_flags(value: float) -> List[str]:
    flags = []
    if value < 0:
        flags.append("worse_than_naive")
    if value > 1:
        flags.append("better_than_lookup")
    return flags


def percent(value: float) -> int:
    """Nearest integer percentage, halves rounded away from zero."""
    scaled = abs(value) * 100.0
    rounded = math.floor(scaled + 0.5)
    return int(math.copysign(rounded, value)) if rounded else 0


@dataclass(frozen=True)
class ErrorDecomposition:
    expected_error: float
    sampling_error: float
    irreducible_estimate: float


def decompose(lookup_cv: CvResult) -> ErrorDecomposition:
    """Split lookup error into sampling error (SE squared) and irreducible noise.

    Table Lookup is unbiased, so the bias term is zero.
    """
    sampling = lookup_cv.std_error ** 2
    return ErrorDecomposition(
        expected_error=lookup_cv.mean_error,
        sampling_error=sampling,
        irreducible_estimate=lookup_cv.mean_error - sampling,
    )


@dataclass
class CompletenessReport:
    naive: CvResult
    models: Dict[str, CvResult]
    lookup: CvResult
    completeness: Dict[str, float]
    flags: Dict[str, List[str]] = field(default_factory=dict)
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def decomposition(self) -> ErrorDecomposition:
        return decompose(self.lookup)

    def to_dict(self) -> Dict[str, Any]:
        d = self.decomposition
        return {
            "naive": self.naive.to_dict(),
            "models": {k: v.to_dict() for k, v in self.models.items()},
            "lookup": self.lookup.to_dict(),
            "completeness": dict(self.completeness),
            "flags": {k: list(v) for k, v in self.flags.items()},
            "decomposition": {
                "expected_error": d.expected_error,
                "sampling_error": d.sampling_error,
                "irreducible_estimate": d.irreducible_estimate,
            },
            "extras": self.extras,
        }


def build_report(
    naive: CvResult,
    models: Sequence[CvResult],
    lookup: CvResult,
    extras: Optional[Dict[str, Any]] = None,
) -> CompletenessReport:
    scores: Dict[str, float] = {}
    flags: Dict[str, List[str]] = {}
    for result in models:
        value = completeness(naive, result, lookup)
        scores[result.name] = value
        flagged = completeness_flags(value)
        if flagged:
            logger.warning(
                "Completeness of %s is %.4g (%s)", result.name, value, ", ".join(flagged)
            )
            flags[result.name] = flagged
    return CompletenessReport(
        naive=naive,
        models={r.name: r for r in models},
        lookup=lookup,
        completeness=scores,
        flags=flags,
        extras=dict(extras or {}),
    )


@dataclass(frozen=True)
class SubsamplePoint:
    fraction: float
    size: int
    mean_error: float
    std_error: float
    iterations: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fraction": self.fraction,
            "size": self.size,
            "mean_error": self.mean_error,
            "std_error": self.std_error,
            "iterations": self.iterations,
        }


def subsample_curve(
    learner: Learner,
    data: Dataset,
    loss: LossFunction,
    fractions: Sequence[float],
    iterations: int,
    seed: int = 0,
    K: int = DEFAULT_FOLDS,
    fit_config: Optional[FitConfig] = None,
    threads: Optional[int] = None,
) -> List[SubsamplePoint]:
    """Average CV error on uniform subsamples drawn without replacement.

    Iteration ``i`` splits its subsample with fold seed ``seed + i``, so
    fraction 1.0 with one iteration reproduces ``cross_validate`` on the full
    data with ``make_folds(n, K, seed)``.
    """
    fractions = [float(f) for f in fractions]
    if not fractions or any(not 0.0 < f <= 1.0 for f in fractions):
        raise ValueError("Fractions must lie in (0, 1]")
    if fractions != sorted(fractions):
        raise ValueError("Fractions must be sorted ascending")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")

    n = len(data)
    points = []
    for index, fraction in enumerate(fractions):
        size = int(round(fraction * n))
        if size < K:
            logger.error("Subsample of %d rows is smaller than K=%d", size, K)
            raise SubsampleTooSmallError(
                "subsample smaller than K",
                "subsample",
                {"fraction": fraction, "size": size, "K": K},
            )

        def run(iteration: int, fraction=fraction, index=index, size=size) -> float:
            if size == n:
                rows = np.arange(n)
            else:
                rng = np.random.default_rng([seed, index, iteration])
                rows = np.sort(rng.choice(n, size=size, replace=False))
            sample = data.subset(rows)
            plan = make_folds(size, K, (seed + iteration) % MAX_SEED)
            return cross_validate(
                learner, sample, loss, plan, fit_config, threads=1
            ).mean_error

        errors = np.asarray(parallel_map(run, iterations, threads))
        points.append(
            SubsamplePoint(
                fraction=fraction,
                size=size,
                mean_error=float(errors.sum() / errors.shape[0]),
                std_error=float(errors.std()),
                iterations=iterations,
            )
        )
        logger.info(
            "Subsample %.2f: error %.6g over %d iterations",
            fraction,
            points[-1].mean_error,
            iterations,
        )
    return points
