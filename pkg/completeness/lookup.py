"""Table Lookup: the unrestricted per-key estimator of the best achievable
error, and its compressed variants over feature projections.
"""
import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from completeness.core import (
    CompletenessError,
    Dataset,
    LossFunction,
    PredictionRule,
    one_hot,
)

logger = logging.getLogger("completeness")

FeatureKey = Tuple[float, ...]
KeyFunction = Callable[[np.ndarray], np.ndarray]


class ProjectionError(CompletenessError):
    """Raised when a projection is applied to features it does not understand."""


class CellStatistic(str, enum.Enum):
    MEAN = "mean"
    MODE = "mode"


def identity_key(x: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def constant_key(x: np.ndarray) -> np.ndarray:
    return np.zeros((np.atleast_2d(x).shape[0], 1))


def _check_flips(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != 7 or not np.all((x == 0) | (x == 1)):
        logger.error("Sequence projection applied to non-sequence features")
        raise ProjectionError(
            "Projection needs 7-flip histories coded H = 1, T = 0",
            "projection",
            {"arity": x.shape[1]},
        )
    return x


def projection_number_of_heads() -> KeyFunction:
    """Key each history by its number of heads (0..7)."""

    def key(x: np.ndarray) -> np.ndarray:
        return _check_flips(x).sum(axis=1, keepdims=True)

    return key


def projection_flips_4_to_7() -> KeyFunction:
    """Key each history by flips 4 through 7 (16 classes)."""

    def key(x: np.ndarray) -> np.ndarray:
        return _check_flips(x)[:, 3:7]

    return key


PROJECTIONS: Dict[str, Callable[[], KeyFunction]] = {
    "full": lambda: identity_key,
    "heads_count": projection_number_of_heads,
    "flips_4_7": projection_flips_4_to_7,
    "constant": lambda: constant_key,
}


def projection(name: str) -> KeyFunction:
    try:
        return PROJECTIONS[name]()
    except KeyError:
        raise ProjectionError(
            "Unknown projection '%s'" % name,
            "projection",
            {"known": sorted(PROJECTIONS)},
        )


@dataclass(frozen=True)
class LookupSpec:
    """How to build a lookup table: keying, cell statistic and fallback."""

    fallback: PredictionRule
    statistic: CellStatistic = CellStatistic.MEAN
    key_fn: KeyFunction = identity_key
    name: str = "lookup"
    n_classes: int = 0

    def matches(self, loss: LossFunction) -> bool:
        return (self.statistic == CellStatistic.MODE) == loss.is_classification


def spec_for(
    data: Dataset,
    loss: LossFunction,
    fallback: PredictionRule,
    key_fn: KeyFunction = identity_key,
    name: str = "lookup",
) -> LookupSpec:
    """Lookup spec whose cell statistic matches ``loss``."""
    if loss.is_classification:
        return LookupSpec(fallback, CellStatistic.MODE, key_fn, name, data.n_classes)
    return LookupSpec(fallback, CellStatistic.MEAN, key_fn, name)


@dataclass(frozen=True)
class Cell:
    prediction: float
    count: int


@dataclass(frozen=True, eq=False)
class LookupTable:
    cells: Dict[FeatureKey, Cell]
    spec: LookupSpec = field(repr=False)
    # rows predicted and rows that fell back, across every prediction call
    tally: Counter = field(default_factory=Counter, repr=False)

    def keys_for(self, x: np.ndarray) -> List[FeatureKey]:
        keys = np.atleast_2d(self.spec.key_fn(x))
        return [tuple(float(v) for v in row) for row in keys]

    def unseen(self, x: np.ndarray) -> np.ndarray:
        return np.array([k not in self.cells for k in self.keys_for(x)], dtype=bool)

    def predict_rows(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        keys = self.keys_for(x)
        missing = np.array([k not in self.cells for k in keys], dtype=bool)
        values = np.array(
            [self.cells[k].prediction if k in self.cells else 0.0 for k in keys]
        )
        if self.spec.statistic == CellStatistic.MODE:
            out = one_hot(values.astype(int), self.spec.n_classes)
        else:
            out = values
        self.tally["rows"] += len(keys)
        self.tally["unseen"] += int(missing.sum())
        if np.any(missing):
            logger.debug(
                "%s: %d of %d rows use the fallback",
                self.spec.name,
                int(missing.sum()),
                len(keys),
            )
            out[missing] = self.spec.fallback.predict(x[missing])
        return out

    @property
    def unseen_count(self) -> int:
        return self.tally["unseen"]

    def as_rule(self) -> PredictionRule:
        return PredictionRule(
            self.spec.name,
            self.predict_rows,
            tie_func=None,
            parameters={"cells": len(self.cells)},
        )

    def dump(self) -> Iterator[str]:
        """Rows of ``key<TAB>prediction<TAB>count`` in key order."""
        for key in sorted(self.cells):
            cell = self.cells[key]
            yield "%s\t%r\t%d" % (",".join(repr(v) for v in key), cell.prediction, cell.count)


def train_lookup(train: Dataset, spec: LookupSpec) -> LookupTable:
    """Per-key training mean (squared error) or mode (misclassification).

    Mode ties go to the lowest class code.
    """
    keys = np.atleast_2d(spec.key_fn(train.features))
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    counts = np.bincount(inverse, minlength=unique.shape[0])
    if spec.statistic == CellStatistic.MEAN:
        sums = np.bincount(inverse, weights=train.outcomes, minlength=unique.shape[0])
        predictions = sums / counts
    else:
        n_classes = spec.n_classes or train.n_classes
        labels = train.outcomes.astype(int)
        tallies = np.zeros((unique.shape[0], n_classes), dtype=int)
        np.add.at(tallies, (inverse, labels), 1)
        predictions = np.argmax(tallies, axis=1).astype(float)
        if not spec.n_classes:
            spec = LookupSpec(
                spec.fallback, spec.statistic, spec.key_fn, spec.name, n_classes
            )
    cells = {
        tuple(float(v) for v in unique[i]): Cell(float(predictions[i]), int(counts[i]))
        for i in range(unique.shape[0])
    }
    logger.debug("Trained %s with %d cells on %d rows", spec.name, len(cells), len(train))
    return LookupTable(cells, spec)


def predict(table: LookupTable, x: np.ndarray) -> np.ndarray:
    """Stored statistic for a known key, the fallback's prediction otherwise."""
    return table.predict_rows(np.atleast_2d(x))[0]
