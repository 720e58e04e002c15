"""Shared vocabulary: datasets, losses, prediction rules and model classes.

Datasets are stored column-wise. Real-valued feature positions hold floats,
categorical positions hold integer codes into a per-position vocabulary, and
action / binary outcomes hold class codes into ``outcome_labels``.

"""
import enum
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

import numpy as np

logger = logging.getLogger("completeness")

THREADS_ENV = "COMPLETENESS_THREADS"

T = TypeVar("T")


class CompletenessError(Exception):
    """Base class for structured errors raised by this package.

    :param error: Human readable description of the failure.
    :param error_code: Short machine friendly code, e.g. ``"arity"``.
    :param details: Optional mapping with the context of the failure.
    """

    error = None
    error_code = None
    details = None

    def __init__(
        self,
        error: str,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
        *args,
    ):
        self.error: Optional[str] = error
        self.error_code: Optional[str] = error_code
        self.details: Dict[str, Any] = dict(details or {})
        super(CompletenessError, self).__init__(error, *args)


class DatasetError(CompletenessError):
    """Raised when a dataset violates its invariants (empty, mixed feature
    kinds in one position, outcomes of the wrong kind)."""


class ArityError(CompletenessError):
    """Raised when a rule is applied to feature vectors of the wrong length."""


class PredictionError(CompletenessError):
    """Raised when a rule produces an unusable prediction.

    ``index`` names the first offending observation.
    """

    def __init__(self, error: str, index: int, **kwargs):
        self.index: int = index
        details = dict(kwargs.pop("details", None) or {})
        details["index"] = index
        super(PredictionError, self).__init__(
            error, kwargs.pop("error_code", "prediction"), details
        )


class ProblemKind(str, enum.Enum):
    RISK = "risk"
    GAMES = "games"
    SEQUENCES = "sequences"
    CUSTOM = "custom"


class OutcomeKind(str, enum.Enum):
    REAL = "real"
    ACTION = "action"
    BINARY = "binary"
    PROBABILITY = "probability"


REAL = "real"
CATEGORICAL = "categorical"

ACTION_LABELS: Tuple[str, ...] = ("a1", "a2", "a3")
# H is coded 1 and T is coded 0 everywhere.
FLIP_LABELS: Tuple[str, ...] = ("T", "H")

DEFAULT_OUTCOME_KIND: Dict[ProblemKind, OutcomeKind] = {
    ProblemKind.RISK: OutcomeKind.REAL,
    ProblemKind.GAMES: OutcomeKind.ACTION,
    ProblemKind.SEQUENCES: OutcomeKind.BINARY,
    ProblemKind.CUSTOM: OutcomeKind.REAL,
}

CLASS_OUTCOMES = (OutcomeKind.ACTION, OutcomeKind.BINARY)


@dataclass(frozen=True)
class Observation:
    """One row of a dataset in its decoded, human readable form."""

    x: Tuple[Any, ...]
    y: Any
    subject_id: Optional[str] = None
    instance_id: Optional[str] = None


def _readonly(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable, non-empty collection of observations."""

    features: np.ndarray
    outcomes: np.ndarray
    problem_kind: ProblemKind
    outcome_kind: OutcomeKind
    feature_kinds: Tuple[str, ...]
    vocabularies: Tuple[Tuple[str, ...], ...] = ()
    outcome_labels: Tuple[str, ...] = ()
    subject_ids: Optional[np.ndarray] = None
    instance_ids: Optional[np.ndarray] = None
    rounds: Optional[np.ndarray] = None
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        outcomes = np.array(self.outcomes, dtype=float).reshape(-1)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.shape[0] == 0:
            raise DatasetError("Dataset must not be empty", "empty")
        if features.shape[0] != outcomes.shape[0]:
            raise DatasetError(
                "Feature and outcome row counts differ",
                "shape",
                {"features": features.shape[0], "outcomes": outcomes.shape[0]},
            )
        if len(self.feature_kinds) != features.shape[1]:
            raise DatasetError(
                "One feature kind is required per feature position",
                "arity",
                {"arity": features.shape[1], "kinds": len(self.feature_kinds)},
            )
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(outcomes)):
            raise DatasetError("Features and outcomes must be finite", "finite")

        vocabularies = tuple(self.vocabularies) or tuple(
            () for _ in self.feature_kinds
        )
        for position, (kind, vocab) in enumerate(
            zip(self.feature_kinds, vocabularies)
        ):
            if kind not in (REAL, CATEGORICAL):
                raise DatasetError(
                    "Unknown feature kind '%s'" % kind, "kind", {"position": position}
                )
            if kind == CATEGORICAL:
                codes = features[:, position]
                if np.any(codes != np.round(codes)) or np.any(codes < 0):
                    raise DatasetError(
                        "Categorical positions must hold vocabulary codes",
                        "kind",
                        {"position": position},
                    )
                if vocab and np.any(codes >= len(vocab)):
                    raise DatasetError(
                        "Categorical code outside its vocabulary",
                        "kind",
                        {"position": position},
                    )

        outcome_kind = OutcomeKind(self.outcome_kind)
        if outcome_kind == OutcomeKind.PROBABILITY and (
            np.any(outcomes < 0) or np.any(outcomes > 1)
        ):
            raise DatasetError("Probability outcomes must lie in [0, 1]", "outcome")
        if outcome_kind in CLASS_OUTCOMES:
            n_classes = len(self.outcome_labels)
            if n_classes < 2:
                raise DatasetError(
                    "Class outcomes need at least two labels", "outcome"
                )
            if (
                np.any(outcomes != np.round(outcomes))
                or np.any(outcomes < 0)
                or np.any(outcomes >= n_classes)
            ):
                raise DatasetError(
                    "Class outcomes must be codes into the label set",
                    "outcome",
                    {"labels": list(self.outcome_labels)},
                )

        object.__setattr__(self, "features", _readonly(features))
        object.__setattr__(self, "outcomes", _readonly(outcomes))
        object.__setattr__(self, "problem_kind", ProblemKind(self.problem_kind))
        object.__setattr__(self, "outcome_kind", outcome_kind)
        object.__setattr__(self, "feature_kinds", tuple(self.feature_kinds))
        object.__setattr__(self, "vocabularies", vocabularies)
        object.__setattr__(self, "outcome_labels", tuple(self.outcome_labels))
        for name in ("subject_ids", "instance_ids", "rounds"):
            column = getattr(self, name)
            if column is None:
                continue
            column = np.array(column, dtype=int if name == "rounds" else object)
            if column.shape != outcomes.shape:
                raise DatasetError(
                    "Column '%s' must have one entry per observation" % name, "shape"
                )
            object.__setattr__(self, name, _readonly(column))

    @classmethod
    def from_observations(
        cls,
        observations: Iterable[Observation],
        problem_kind: Union[ProblemKind, str],
        outcome_kind: Optional[OutcomeKind] = None,
        outcome_labels: Optional[Sequence[str]] = None,
        vocabularies: Optional[Sequence[Sequence[str]]] = None,
    ) -> "Dataset":
        """Build a dataset from decoded observations.

        Feature entries are typed per position: numbers are real, strings are
        categorical. A position mixing both kinds is rejected.
        """
        rows = list(observations)
        if not rows:
            raise DatasetError("Dataset must not be empty", "empty")
        problem_kind = ProblemKind(problem_kind)
        outcome_kind = OutcomeKind(outcome_kind or DEFAULT_OUTCOME_KIND[problem_kind])

        arity = len(rows[0].x)
        kinds: List[str] = []
        for position in range(arity):
            seen = set()
            for index, row in enumerate(rows):
                if len(row.x) != arity:
                    raise DatasetError(
                        "Observation %d has arity %d, expected %d"
                        % (index, len(row.x), arity),
                        "arity",
                        {"index": index},
                    )
                seen.add(CATEGORICAL if isinstance(row.x[position], str) else REAL)
            if len(seen) > 1:
                raise DatasetError(
                    "Feature position %d mixes real and categorical entries"
                    % position,
                    "kind",
                    {"position": position},
                )
            kinds.append(seen.pop())

        vocabs: List[Tuple[str, ...]] = []
        for position, kind in enumerate(kinds):
            if kind == REAL:
                vocabs.append(())
            elif vocabularies and vocabularies[position]:
                vocabs.append(tuple(vocabularies[position]))
            else:
                vocabs.append(tuple(sorted({row.x[position] for row in rows})))

        features = np.empty((len(rows), arity), dtype=float)
        for index, row in enumerate(rows):
            for position, kind in enumerate(kinds):
                value = row.x[position]
                if kind == CATEGORICAL:
                    try:
                        features[index, position] = vocabs[position].index(value)
                    except ValueError:
                        raise DatasetError(
                            "Unknown symbol '%s' at position %d" % (value, position),
                            "kind",
                            {"index": index, "position": position},
                        )
                else:
                    features[index, position] = float(value)

        labels: Tuple[str, ...] = ()
        if outcome_kind in CLASS_OUTCOMES:
            labels = tuple(
                outcome_labels or sorted({str(row.y) for row in rows})
            )
            try:
                outcomes = [labels.index(str(row.y)) for row in rows]
            except ValueError:
                raise DatasetError(
                    "Outcome outside the label set", "outcome", {"labels": labels}
                )
        else:
            outcomes = [float(row.y) for row in rows]

        subjects = [row.subject_id for row in rows]
        instances = [row.instance_id for row in rows]
        return cls(
            features=features,
            outcomes=np.asarray(outcomes, dtype=float),
            problem_kind=problem_kind,
            outcome_kind=outcome_kind,
            feature_kinds=tuple(kinds),
            vocabularies=tuple(vocabs),
            outcome_labels=labels,
            subject_ids=None if all(s is None for s in subjects) else subjects,
            instance_ids=None if all(i is None for i in instances) else instances,
        )

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def arity(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self.outcome_labels)

    @property
    def is_classification(self) -> bool:
        return self.outcome_kind in CLASS_OUTCOMES

    @property
    def observations(self) -> List[Observation]:
        """Decoded rows; categorical codes and class codes become labels."""
        rows = []
        for index in range(len(self)):
            x = tuple(
                self.vocabularies[p][int(v)] if self.feature_kinds[p] == CATEGORICAL
                else float(v)
                for p, v in enumerate(self.features[index])
            )
            y: Any = self.outcomes[index]
            if self.is_classification:
                y = self.outcome_labels[int(y)]
            else:
                y = float(y)
            rows.append(
                Observation(
                    x=x,
                    y=y,
                    subject_id=None
                    if self.subject_ids is None
                    else self.subject_ids[index],
                    instance_id=None
                    if self.instance_ids is None
                    else self.instance_ids[index],
                )
            )
        return rows

    @cached_property
    def unique_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        """Unique feature rows and the inverse index mapping rows onto them."""
        unique, inverse = np.unique(self.features, axis=0, return_inverse=True)
        return unique, np.asarray(inverse).reshape(-1)

    def subset(self, indices: Union[Sequence[int], np.ndarray]) -> "Dataset":
        """Rows at ``indices``, in the given order."""
        indices = np.asarray(indices, dtype=int)
        if indices.size == 0:
            raise DatasetError("Dataset must not be empty", "empty")

        def pick(column: Optional[np.ndarray]) -> Optional[np.ndarray]:
            return None if column is None else column[indices]

        return replace(
            self,
            features=self.features[indices],
            outcomes=self.outcomes[indices],
            subject_ids=pick(self.subject_ids),
            instance_ids=pick(self.instance_ids),
            rounds=pick(self.rounds),
        )


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def uniform_distribution(rows: int, n_classes: int) -> np.ndarray:
    return np.full((rows, n_classes), 1.0 / n_classes)


class LossKind(str, enum.Enum):
    SQUARED_ERROR = "squared_error"
    MISCLASSIFICATION = "misclassification"
    CUSTOM = "custom"


def _squared_error(predicted: np.ndarray, realized: np.ndarray) -> np.ndarray:
    if predicted.ndim != 1:
        raise PredictionError(
            "Squared error needs point predictions", index=0, error_code="shape"
        )
    return (predicted - realized) ** 2


def _misclassification(predicted: np.ndarray, realized: np.ndarray) -> np.ndarray:
    labels = realized.astype(int)
    if predicted.ndim == 1:
        return (predicted != labels).astype(float)
    # Distribution rows score their expected misclassification.
    return 1.0 - predicted[np.arange(labels.shape[0]), labels]


@dataclass(frozen=True)
class LossFunction:
    """Per-observation loss ``evaluator(predicted, realized) -> losses``.

    Misclassification accepts hard labels or one distribution row per
    observation; a one-hot row scores 0 or 1.
    """

    kind: LossKind
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(
        compare=False, repr=False
    )
    name: str = ""

    def __call__(self, predicted: np.ndarray, realized: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(predicted, realized), dtype=float)

    @property
    def is_classification(self) -> bool:
        return self.kind == LossKind.MISCLASSIFICATION


SQUARED_ERROR = LossFunction(LossKind.SQUARED_ERROR, _squared_error, "mse")
MISCLASSIFICATION = LossFunction(
    LossKind.MISCLASSIFICATION, _misclassification, "miscls"
)


def custom_loss(
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray], name: str = "custom"
) -> LossFunction:
    return LossFunction(LossKind.CUSTOM, evaluator, name)


def loss_for(name: str) -> LossFunction:
    """Look up a built-in loss by its CLI or long name."""
    key = name.strip().lower()
    if key in ("mse", "squared_error"):
        return SQUARED_ERROR
    if key in ("miscls", "misclassification"):
        return MISCLASSIFICATION
    raise ValueError("Unknown loss '%s'" % name)


class PredictionRule(object):
    """A deterministic map from feature rows to predictions.

    ``func`` receives a 2-D array of feature rows and returns one point
    prediction per row, or one distribution row per row for classification.
    ``tie_func`` optionally flags rows where the prediction was decided by a
    tie-break.
    """

    def __init__(
        self,
        name: str,
        func: Callable[[np.ndarray], np.ndarray],
        arity: Optional[int] = None,
        tie_func: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        parameters: Optional[Mapping[str, float]] = None,
    ):
        self.name = name
        self.func = func
        self.arity = arity
        self.tie_func = tie_func
        self.parameters: Dict[str, float] = dict(parameters or {})

    def _rows(self, x: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(x, dtype=float))
        if self.arity is not None and rows.shape[1] != self.arity:
            logger.error(
                "Rule %s expects arity %d, got %d", self.name, self.arity, rows.shape[1]
            )
            raise ArityError(
                "Rule '%s' expects %d features, got %d"
                % (self.name, self.arity, rows.shape[1]),
                "arity",
                {"expected": self.arity, "actual": rows.shape[1]},
            )
        return rows

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(self._rows(x)), dtype=float)

    def ties(self, x: np.ndarray) -> np.ndarray:
        rows = self._rows(x)
        if self.tie_func is None:
            return np.zeros(rows.shape[0], dtype=bool)
        return np.asarray(self.tie_func(rows), dtype=bool)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.predict(x)

    def __repr__(self):
        return f"<PredictionRule {self.name} {self.parameters}>"


def constant_rule(value: float, name: str = "constant") -> PredictionRule:
    return PredictionRule(name, lambda x: np.full(x.shape[0], float(value)))


def observation_losses(
    rule: PredictionRule, data: Dataset, loss: LossFunction
) -> np.ndarray:
    """Per-observation losses; the rule is evaluated once per unique row."""
    if rule.arity is not None and rule.arity != data.arity:
        logger.error("Rule %s arity mismatch on dataset", rule.name)
        raise ArityError(
            "Rule '%s' expects %d features, dataset has %d"
            % (rule.name, rule.arity, data.arity),
            "arity",
            {"expected": rule.arity, "actual": data.arity},
        )
    unique, inverse = data.unique_rows
    predicted = rule.predict(unique)
    bad = ~np.isfinite(predicted)
    if bad.ndim > 1:
        bad = bad.any(axis=1)
    if np.any(bad):
        index = int(np.flatnonzero(bad[inverse])[0])
        logger.error("Rule %s predicted NaN for observation %d", rule.name, index)
        raise PredictionError(
            "Rule '%s' produced a non-finite prediction" % rule.name,
            index=index,
            details={"rule": rule.name},
        )
    losses = loss(predicted[inverse], data.outcomes)
    if np.any(losses < 0):
        raise PredictionError(
            "Loss must be nonnegative",
            index=int(np.flatnonzero(losses < 0)[0]),
            error_code="loss",
        )
    return losses


def evaluate_loss(rule: PredictionRule, data: Dataset, loss: LossFunction) -> float:
    """Average loss of ``rule`` over every observation in ``data``."""
    return float(np.mean(observation_losses(rule, data, loss)))


@dataclass(frozen=True)
class Parameter:
    """A bounded coordinate of a model's parameter domain.

    Integer parameters take every value ``lower, lower + step, ..., upper``.
    """

    name: str
    lower: float
    upper: float
    integer: bool = False
    step: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError("Bounds for '%s' must be finite" % self.name)
        if self.lower > self.upper:
            raise ValueError(
                "Lower bound exceeds upper bound for '%s'" % self.name
            )
        if self.integer and self.step < 1:
            raise ValueError("Integer step for '%s' must be >= 1" % self.name)

    def grid(self, points: int) -> np.ndarray:
        if self.integer:
            return np.arange(int(self.lower), int(self.upper) + 1, self.step, dtype=float)
        if self.lower == self.upper:
            return np.array([float(self.lower)])
        return np.linspace(self.lower, self.upper, points)


@dataclass(frozen=True)
class ModelClass:
    """A parametric family of prediction rules."""

    name: str
    parameters: Tuple[Parameter, ...]
    rule_builder: Callable[[Dict[str, float]], PredictionRule] = field(
        compare=False, repr=False
    )
    notes: Tuple[str, ...] = ()

    @property
    def parameter_names(self) -> List[str]:
        return [p.name for p in self.parameters]

    def build(self, params: Mapping[str, float]) -> PredictionRule:
        values = dict(params)
        for p in self.parameters:
            if p.integer:
                values[p.name] = int(round(values[p.name]))
        rule = self.rule_builder(values)
        rule.parameters = {k: values[k] for k in self.parameter_names}
        return rule

    def with_bounds(self, overrides: Mapping[str, Tuple[float, float]]) -> "ModelClass":
        """Copy of this class with some parameter bounds replaced."""
        known = set(self.parameter_names)
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(
                "Unknown parameters for %s: %s" % (self.name, ", ".join(sorted(unknown)))
            )
        parameters = tuple(
            replace(p, lower=overrides[p.name][0], upper=overrides[p.name][1])
            if p.name in overrides
            else p
            for p in self.parameters
        )
        return replace(self, parameters=parameters)


def naive_rule(
    problem_kind: Union[ProblemKind, str],
    loss: Optional[LossFunction] = None,
    custom: Optional[PredictionRule] = None,
) -> PredictionRule:
    """The domain's naive benchmark.

    Risk predicts the lottery's expected value. Games guess an action
    uniformly at random, scored by expectation (2/3 misclassification).
    Sequences predict probability 0.5 of H, or a uniform guess over H/T
    under misclassification.
    """
    if custom is not None:
        return custom
    kind = ProblemKind(problem_kind)
    if kind == ProblemKind.RISK:
        from completeness.models import risk

        return risk.expected_value_rule()
    if kind == ProblemKind.GAMES:
        return PredictionRule(
            "naive", lambda x: uniform_distribution(x.shape[0], len(ACTION_LABELS))
        )
    if kind == ProblemKind.SEQUENCES:
        if loss is not None and loss.is_classification:
            return PredictionRule(
                "naive", lambda x: uniform_distribution(x.shape[0], len(FLIP_LABELS))
            )
        return constant_rule(0.5, "naive")
    logger.error("No naive rule available for problem kind %s", kind.value)
    raise DatasetError(
        "Custom problems need a user-supplied naive rule", "naive", {"kind": kind.value}
    )


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``COMPLETENESS_THREADS``, else 1."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        threads = int(raw) if raw else 1
    return max(1, int(threads))


def parallel_map(
    func: Callable[[int], T], count: int, threads: Optional[int] = None
) -> List[T]:
    """``[func(0), ..., func(count - 1)]`` computed on up to ``threads`` workers.

    Results come back in index order whatever the execution order.
    """
    workers = min(resolve_threads(threads), max(count, 1))
    if workers == 1:
        return [func(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, range(count)))
