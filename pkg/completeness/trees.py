"""Bagged decision trees: the scalable machine-learning comparison row."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor

from completeness.core import (
    CATEGORICAL,
    Dataset,
    LossFunction,
    PredictionRule,
    one_hot,
    parallel_map,
)

logger = logging.getLogger("completeness")


@dataclass(frozen=True)
class TreeConfig:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_leaf: int = 5
    seed: int = 0
    bootstrap: bool = True
    threads: Optional[int] = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")

    def as_dict(self) -> Dict[str, Any]:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "bootstrap": self.bootstrap,
        }


class FeatureEncoder(object):
    """Maps raw feature rows to the tree design matrix.

    Categorical positions with more than two symbols become one indicator
    column per symbol, so a split tests membership of a single symbol.
    """

    def __init__(self, feature_kinds: Tuple[str, ...], sizes: Tuple[int, ...]):
        self.feature_kinds = feature_kinds
        self.sizes = sizes

    @classmethod
    def for_dataset(cls, data: Dataset) -> "FeatureEncoder":
        sizes = []
        for position, kind in enumerate(data.feature_kinds):
            if kind != CATEGORICAL:
                sizes.append(0)
                continue
            vocab = data.vocabularies[position]
            sizes.append(len(vocab) or int(data.features[:, position].max()) + 1)
        return cls(data.feature_kinds, tuple(sizes))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        columns = []
        for position, size in enumerate(self.sizes):
            column = x[:, position]
            if size > 2:
                codes = column.astype(int)
                columns.append(
                    (codes[:, None] == np.arange(size)[None, :]).astype(float)
                )
            else:
                columns.append(column[:, None])
        return np.hstack(columns)


class BaggedTrees(object):
    """An immutable trained ensemble."""

    def __init__(
        self,
        trees: List[Any],
        encoder: FeatureEncoder,
        n_classes: int,
        config: TreeConfig,
    ):
        self.trees = tuple(trees)
        self.encoder = encoder
        self.n_classes = n_classes
        self.config = config

    @property
    def is_classification(self) -> bool:
        return self.n_classes > 0

    def tree_outputs(self, x: np.ndarray) -> np.ndarray:
        """One column of predictions per tree."""
        design = self.encoder(x)
        return np.column_stack([tree.predict(design) for tree in self.trees])

    def votes(self, x: np.ndarray) -> np.ndarray:
        outputs = self.tree_outputs(x).astype(int)
        tallies = np.zeros((outputs.shape[0], self.n_classes), dtype=int)
        rows = np.repeat(np.arange(outputs.shape[0]), outputs.shape[1])
        np.add.at(tallies, (rows, outputs.reshape(-1)), 1)
        return tallies

    def predict_rows(self, x: np.ndarray) -> np.ndarray:
        if not self.is_classification:
            return self.tree_outputs(x).mean(axis=1)
        # argmax returns the lowest label among tied pluralities
        return one_hot(np.argmax(self.votes(x), axis=1), self.n_classes)

    def ties(self, x: np.ndarray) -> np.ndarray:
        if not self.is_classification:
            return np.zeros(np.atleast_2d(x).shape[0], dtype=bool)
        tallies = self.votes(x)
        top = tallies.max(axis=1, keepdims=True)
        return (tallies == top).sum(axis=1) > 1

    def as_rule(self) -> PredictionRule:
        return PredictionRule(
            "bagged_trees",
            self.predict_rows,
            tie_func=self.ties,
            parameters={"n_trees": float(len(self.trees))},
        )


def _tree_for(loss: LossFunction, cfg: TreeConfig, random_state: int):
    if loss.is_classification:
        return DecisionTreeClassifier(
            criterion="gini",
            max_depth=cfg.max_depth,
            min_samples_leaf=cfg.min_leaf,
            random_state=random_state,
        )
    return DecisionTreeRegressor(
        criterion="squared_error",
        max_depth=cfg.max_depth,
        min_samples_leaf=cfg.min_leaf,
        random_state=random_state,
    )


def train_bagged(train: Dataset, loss: LossFunction, cfg: TreeConfig) -> BaggedTrees:
    """Fit ``cfg.n_trees`` trees, each on an n-row bootstrap resample.

    Tree ``t`` draws its resample from the stream seeded by ``(cfg.seed, t)``
    so the ensemble does not depend on training order.
    """
    encoder = FeatureEncoder.for_dataset(train)
    design = encoder(train.features)
    outcomes = train.outcomes
    if loss.is_classification:
        outcomes = outcomes.astype(int)
    n = len(train)

    def grow(t: int):
        rng = np.random.default_rng([cfg.seed, t])
        rows = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        tree = _tree_for(loss, cfg, int(rng.integers(0, 2 ** 31 - 1)))
        tree.fit(design[rows], outcomes[rows])
        return tree

    trees = parallel_map(grow, cfg.n_trees, cfg.threads)
    logger.debug(
        "Trained %d trees on %d rows (%d design columns)", len(trees), n, design.shape[1]
    )
    n_classes = (train.n_classes or int(outcomes.max()) + 1) if loss.is_classification else 0
    return BaggedTrees(trees, encoder, n_classes, cfg)


def predict_ensemble(ensemble: BaggedTrees, x: np.ndarray) -> Any:
    """Mean of the tree outputs, or the plurality label code."""
    row = np.atleast_2d(x)
    if ensemble.is_classification:
        return int(np.argmax(ensemble.votes(row)[0]))
    return float(ensemble.predict_rows(row)[0])
