"""Subject heterogeneity: cluster subjects on a few training lotteries, then
fit models and the lookup benchmark separately for each group.

Evaluation uses a single subject/lottery split. Standard errors are taken
across test subjects, each contributing its mean loss.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from completeness.core import (
    SQUARED_ERROR,
    CompletenessError,
    Dataset,
    LossFunction,
    ModelClass,
    ProblemKind,
    observation_losses,
    parallel_map,
)
from completeness.evaluation import (
    CompletenessReport,
    CvResult,
    PlanError,
    build_report,
    completeness,
)
from completeness.fitting import FitConfig, fit_for_loss
from completeness.models.risk import expected_value_rule

logger = logging.getLogger("completeness")

DEFAULT_RESTARTS = 10
DEFAULT_MAX_ITER = 300


class ClusterError(CompletenessError):
    """Raised when subjects cannot be clustered, e.g. fewer subjects than groups."""


@dataclass(frozen=True)
class HeteroPlan:
    n_groups: int = 3
    n_test_subjects: int = 71
    n_train_lotteries: int = 5
    seed: int = 0
    train_lotteries: Optional[Tuple[str, ...]] = None
    restarts: int = DEFAULT_RESTARTS
    max_iter: int = DEFAULT_MAX_ITER
    pooled: bool = True

    def __post_init__(self):
        if self.n_groups < 1:
            raise ValueError("n_groups must be at least 1")
        if self.n_test_subjects < 2:
            raise ValueError("n_test_subjects must be at least 2")
        if self.n_train_lotteries < 1 and not self.train_lotteries:
            raise ValueError("n_train_lotteries must be at least 1")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be at least 1")


@dataclass(frozen=True, eq=False)
class ClusterModel:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    iterations: int

    @property
    def n_groups(self) -> int:
        return int(self.centroids.shape[0])


def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(X.shape[0]))]
    for _ in range(1, k):
        d2 = _squared_distances(X, X[chosen]).min(axis=1)
        total = d2.sum()
        if total > 0:
            chosen.append(int(rng.choice(X.shape[0], p=d2 / total)))
        else:
            chosen.append(int(rng.integers(X.shape[0])))
    return X[chosen].astype(float)


def _lloyd(
    X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int
) -> ClusterModel:
    centroids = _kmeans_plus_plus(X, k, rng)
    labels: Optional[np.ndarray] = None
    previous = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = _squared_distances(X, centroids)
        new_labels = np.argmin(d2, axis=1)
        wcss = float(d2[np.arange(X.shape[0]), new_labels].sum())
        if wcss > previous + 1e-9 * max(previous, 1.0):
            logger.error("k-means objective rose from %.6g to %.6g", previous, wcss)
            raise ClusterError(
                "Within-cluster sum of squares increased",
                "wcss",
                {"iteration": iterations, "previous": previous, "wcss": wcss},
            )
        previous = wcss
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = X[labels == j]
            # an emptied cluster keeps its previous centroid
            if members.shape[0]:
                centroids[j] = members.mean(axis=0)
    d2 = _squared_distances(X, centroids)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(X.shape[0]), labels].sum())
    return ClusterModel(centroids, labels, inertia, iterations)


def fit_clusters(
    vectors: np.ndarray,
    n_groups: int,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: Optional[int] = None,
) -> ClusterModel:
    """k-means on subjects' response vectors, best of ``restarts`` runs.

    Restart ``r`` initializes from the stream seeded by ``(seed, r)``; the
    lowest within-cluster sum of squares wins, earliest restart on ties.
    """
    X = np.atleast_2d(np.asarray(vectors, dtype=float))
    if X.shape[0] < n_groups:
        logger.error("Cannot form %d groups from %d subjects", n_groups, X.shape[0])
        raise ClusterError(
            "Fewer subjects than groups",
            "clusters",
            {"subjects": X.shape[0], "groups": n_groups},
        )
    if not np.all(np.isfinite(X)):
        raise ClusterError("Response vectors must be finite", "clusters")

    runs = parallel_map(
        lambda r: _lloyd(X, n_groups, np.random.default_rng([seed, r]), max_iter),
        restarts,
        threads,
    )
    best = runs[0]
    for run in runs[1:]:
        if run.inertia < best.inertia:
            best = run
    best.centroids.setflags(write=False)
    logger.info(
        "Clustered %d subjects into %d groups (wcss %.6g)",
        X.shape[0],
        n_groups,
        best.inertia,
    )
    return best


def assign_group(cluster: ClusterModel, vector: Sequence[float]) -> Tuple[int, bool]:
    """Nearest centroid, lowest index on ties, and whether a tie occurred."""
    v = np.asarray(vector, dtype=float).reshape(-1)
    if v.shape[0] != cluster.centroids.shape[1]:
        raise ClusterError(
            "Response vector length does not match the centroids",
            "arity",
            {"expected": cluster.centroids.shape[1], "actual": v.shape[0]},
        )
    d2 = ((cluster.centroids - v) ** 2).sum(axis=1)
    group = int(np.argmin(d2))
    return group, bool(np.count_nonzero(d2 == d2[group]) > 1)


@dataclass(frozen=True)
class HeteroSplit:
    train_subjects: Tuple[str, ...]
    test_subjects: Tuple[str, ...]
    train_lotteries: Tuple[str, ...]
    test_lotteries: Tuple[str, ...]

    def to_dict(self) -> Dict[str, List[str]]:
        return {
            "train_subjects": list(self.train_subjects),
            "test_subjects": list(self.test_subjects),
            "train_lotteries": list(self.train_lotteries),
            "test_lotteries": list(self.test_lotteries),
        }


def _inventory(data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    if data.problem_kind != ProblemKind.RISK:
        raise ValueError("Heterogeneity analysis needs a risk dataset")
    if data.subject_ids is None or data.instance_ids is None:
        raise PlanError(
            "Heterogeneity analysis needs subject and lottery ids", "hetero"
        )
    subjects = np.array([str(s) for s in data.subject_ids], dtype=object)
    lotteries = np.array([str(i) for i in data.instance_ids], dtype=object)
    return subjects, lotteries


def split_subjects(data: Dataset, plan: HeteroPlan) -> HeteroSplit:
    """Seeded draw of test subjects and training lotteries."""
    subjects, lotteries = _inventory(data)
    all_subjects = sorted(set(subjects))
    all_lotteries = sorted(set(lotteries))
    if plan.n_test_subjects >= len(all_subjects):
        raise PlanError(
            "More test subjects requested than the data holds",
            "hetero",
            {"requested": plan.n_test_subjects, "subjects": len(all_subjects)},
        )
    rng = np.random.default_rng(plan.seed)
    test = sorted(
        str(s) for s in rng.choice(all_subjects, plan.n_test_subjects, replace=False)
    )
    if plan.train_lotteries:
        chosen = [str(l) for l in plan.train_lotteries]
        unknown = sorted(set(chosen) - set(all_lotteries))
        if unknown:
            raise PlanError(
                "Unknown training lotteries", "hetero", {"lotteries": unknown}
            )
    else:
        if plan.n_train_lotteries >= len(all_lotteries):
            raise PlanError(
                "Training lotteries must leave some test lotteries",
                "hetero",
                {"requested": plan.n_train_lotteries, "lotteries": len(all_lotteries)},
            )
        chosen = [
            str(l)
            for l in rng.choice(all_lotteries, plan.n_train_lotteries, replace=False)
        ]
    train_lotteries = tuple(sorted(chosen))
    held_out = set(test)
    return HeteroSplit(
        train_subjects=tuple(s for s in all_subjects if s not in held_out),
        test_subjects=tuple(test),
        train_lotteries=train_lotteries,
        test_lotteries=tuple(l for l in all_lotteries if l not in set(train_lotteries)),
    )


def response_vectors(
    data: Dataset, subjects: Sequence[str], lotteries: Sequence[str]
) -> Tuple[List[str], np.ndarray, List[str]]:
    """Mean reported CE per (subject, lottery).

    Returns the complete subjects, their vectors, and the subjects dropped
    for missing a lottery.
    """
    subject_col, lottery_col = _inventory(data)
    frame = pd.DataFrame(
        {"subject": subject_col, "lottery": lottery_col, "ce": data.outcomes}
    )
    frame = frame[frame["subject"].isin(subjects) & frame["lottery"].isin(lotteries)]
    table = frame.pivot_table(
        index="subject", columns="lottery", values="ce", aggfunc="mean"
    ).reindex(index=list(subjects), columns=list(lotteries))
    complete = table.notna().all(axis=1)
    dropped = [s for s in subjects if not complete[s]]
    if dropped:
        logger.warning("Dropping %d subjects with incomplete responses", len(dropped))
    kept = [s for s in subjects if complete[s]]
    return kept, table.loc[kept].to_numpy(dtype=float), dropped


@dataclass
class _GroupLookup:
    """Per-(group, lottery) mean CE with pooled and EV fallbacks."""

    cells: Dict[Tuple[int, str], float]
    pooled: Dict[str, float]
    fallbacks: Dict[str, int] = field(default_factory=dict)

    def predict(
        self, groups: np.ndarray, lotteries: np.ndarray, features: np.ndarray
    ) -> np.ndarray:
        out = np.empty(groups.shape[0])
        ev = expected_value_rule().predict(features)
        pooled_hits = ev_hits = 0
        for i, (g, l) in enumerate(zip(groups, lotteries)):
            key = (int(g), str(l))
            if key in self.cells:
                out[i] = self.cells[key]
            elif str(l) in self.pooled:
                out[i] = self.pooled[str(l)]
                pooled_hits += 1
            else:
                out[i] = ev[i]
                ev_hits += 1
        self.fallbacks = {"pooled_fallbacks": pooled_hits, "ev_fallbacks": ev_hits}
        return out


def _group_lookup(
    groups: np.ndarray, lotteries: np.ndarray, outcomes: np.ndarray
) -> _GroupLookup:
    frame = pd.DataFrame({"group": groups, "lottery": lotteries, "ce": outcomes})
    cells = {
        (int(g), str(l)): float(v)
        for (g, l), v in frame.groupby(["group", "lottery"])["ce"].mean().items()
    }
    pooled = {str(l): float(v) for l, v in frame.groupby("lottery")["ce"].mean().items()}
    return _GroupLookup(cells, pooled)


def _per_subject(
    name: str,
    losses: np.ndarray,
    subjects: np.ndarray,
    order: Sequence[str],
    fitted: Sequence[Dict[str, float]] = (),
    diagnostics: Optional[Dict[str, int]] = None,
) -> CvResult:
    means = [float(losses[subjects == s].mean()) for s in order]
    return CvResult.from_fold_errors(
        name,
        means,
        fitted_parameters=fitted,
        diagnostics=dict(diagnostics or {}, test_rows=int(losses.shape[0])),
    )


def _evaluate_groups(
    data: Dataset,
    train_rows: np.ndarray,
    train_groups: np.ndarray,
    test_rows: np.ndarray,
    test_groups: np.ndarray,
    n_groups: int,
    models: Sequence[ModelClass],
    loss: LossFunction,
    fit_config: FitConfig,
    threads: Optional[int],
    test_order: Sequence[str],
) -> Tuple[CvResult, List[CvResult], CvResult]:
    subjects, lotteries = _inventory(data)
    train = data.subset(train_rows)
    test = data.subset(test_rows)
    test_subjects = subjects[test_rows]

    jobs = [(m, g) for m in models for g in range(n_groups)]

    def fit_job(index: int):
        model, group = jobs[index]
        rows = np.flatnonzero(train_groups == group)
        if rows.size == 0:
            logger.warning("Group %d has no training rows; fitting %s pooled", group, model.name)
            rows = np.arange(len(train))
        result = fit_for_loss(model, train.subset(rows), loss, fit_config)
        return model.build(result.parameters), dict(result.parameters)

    fitted = parallel_map(fit_job, len(jobs), threads)

    model_results = []
    for m_index, model in enumerate(models):
        losses = np.empty(len(test))
        params = []
        for group in range(n_groups):
            rule, p = fitted[m_index * n_groups + group]
            params.append(p)
            rows = np.flatnonzero(test_groups == group)
            if rows.size:
                losses[rows] = observation_losses(rule, test.subset(rows), loss)
        model_results.append(
            _per_subject(model.name, losses, test_subjects, test_order, params)
        )

    naive_losses = observation_losses(expected_value_rule(), test, loss)
    naive = _per_subject("naive", naive_losses, test_subjects, test_order)

    table = _group_lookup(train_groups, lotteries[train_rows], train.outcomes)
    predicted = table.predict(test_groups, lotteries[test_rows], test.features)
    lookup_losses = loss(predicted, test.outcomes)
    if table.fallbacks.get("pooled_fallbacks"):
        logger.warning(
            "%d test rows fell back to the pooled lottery mean",
            table.fallbacks["pooled_fallbacks"],
        )
    lookup = _per_subject(
        "lookup", lookup_losses, test_subjects, test_order, diagnostics=table.fallbacks
    )
    return naive, model_results, lookup


def hetero_evaluate(
    data: Dataset,
    plan: HeteroPlan,
    models: Sequence[ModelClass],
    loss: LossFunction = SQUARED_ERROR,
    fit_config: Optional[FitConfig] = None,
    threads: Optional[int] = None,
) -> CompletenessReport:
    """Grouped completeness on test subjects' test-lottery responses."""
    fit_config = fit_config or FitConfig()
    split = split_subjects(data, plan)
    subjects, lotteries = _inventory(data)

    train_subjects, train_vectors, dropped_train = response_vectors(
        data, split.train_subjects, split.train_lotteries
    )
    test_subjects, test_vectors, dropped_test = response_vectors(
        data, split.test_subjects, split.train_lotteries
    )
    if len(test_subjects) < 2:
        raise PlanError("Fewer than two usable test subjects", "hetero")
    cluster = fit_clusters(
        train_vectors, plan.n_groups, plan.seed, plan.restarts, plan.max_iter, threads
    )
    group_of: Dict[str, int] = {
        s: int(g) for s, g in zip(train_subjects, cluster.labels)
    }
    ties = 0
    for s, v in zip(test_subjects, test_vectors):
        group_of[s], tied = assign_group(cluster, v)
        ties += int(tied)

    in_test_lottery = np.isin(lotteries, split.test_lotteries)
    train_rows = np.flatnonzero(in_test_lottery & np.isin(subjects, train_subjects))
    test_rows = np.flatnonzero(in_test_lottery & np.isin(subjects, test_subjects))
    train_groups = np.array([group_of[s] for s in subjects[train_rows]], dtype=int)
    test_groups = np.array([group_of[s] for s in subjects[test_rows]], dtype=int)

    naive, grouped, lookup = _evaluate_groups(
        data,
        train_rows,
        train_groups,
        test_rows,
        test_groups,
        plan.n_groups,
        models,
        loss,
        fit_config,
        threads,
        test_subjects,
    )
    extras: Dict[str, Any] = {
        "split": split.to_dict(),
        "centroids": cluster.centroids.tolist(),
        "group_sizes": [int(c) for c in np.bincount(cluster.labels, minlength=plan.n_groups)],
        "test_groups": {s: group_of[s] for s in test_subjects},
        "assignment_ties": ties,
        "dropped_subjects": sorted(dropped_train + dropped_test),
        "wcss": cluster.inertia,
    }

    if plan.pooled and plan.n_groups > 1:
        _, pooled, _ = _evaluate_groups(
            data,
            train_rows,
            np.zeros_like(train_groups),
            test_rows,
            np.zeros_like(test_groups),
            1,
            models,
            loss,
            fit_config,
            threads,
            test_subjects,
        )
        # pooled models are scored against the grouped lookup benchmark
        extras["pooled"] = {
            r.name: {
                "mean_error": r.mean_error,
                "std_error": r.std_error,
                "completeness": completeness(naive, r, lookup),
                "fitted_parameters": list(r.fitted_parameters),
            }
            for r in pooled
        }
    return build_report(naive, grouped, lookup, extras)
