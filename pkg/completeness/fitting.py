"""Training-loss minimization over a model class's parameter box.

A deterministic grid scan is followed by bounded Nelder-Mead refinement of
the continuous coordinates. Piecewise-constant objectives (misclassification)
use the scan alone.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize

from completeness.core import (
    CompletenessError,
    Dataset,
    LossFunction,
    ModelClass,
    evaluate_loss,
)

logger = logging.getLogger("completeness")

# Refinement restarts from its own optimum until it stops improving.
MAX_RESTARTS = 5


class FitError(CompletenessError):
    """Raised when no parameter point yields a usable training loss."""


@dataclass(frozen=True)
class FitConfig:
    grid_points_per_dim: int = 11
    refine: bool = True
    refine_max_iters: int = 200
    refine_tolerance: float = 1e-7
    # seeds the initial simplex of every refinement restart after the first
    seed: int = 0

    def __post_init__(self):
        if self.grid_points_per_dim < 2:
            raise ValueError("grid_points_per_dim must be at least 2")
        if self.refine_max_iters < 1:
            raise ValueError("refine_max_iters must be at least 1")


@dataclass(frozen=True)
class FitResult:
    parameters: Dict[str, float]
    train_loss: float
    evaluations: int
    failures: int = 0


class _Objective(object):
    """Training loss of ``model`` at a parameter point, counting calls."""

    def __init__(self, model: ModelClass, train: Dataset, loss: LossFunction):
        self.model = model
        self.train = train
        self.loss = loss
        self.evaluations = 0
        self.failures = 0

    def __call__(self, params: Dict[str, float]) -> float:
        self.evaluations += 1
        try:
            value = evaluate_loss(self.model.build(params), self.train, self.loss)
        except (CompletenessError, ValueError, ArithmeticError) as exc:
            self.failures += 1
            logger.debug("Skipping %s at %s: %s", self.model.name, params, exc)
            return math.inf
        if not math.isfinite(value):
            self.failures += 1
            return math.inf
        return value


def _scan(model: ModelClass, objective: _Objective, cfg: FitConfig):
    if not model.parameters:
        raise FitError("Model '%s' has no parameters" % model.name, "empty_domain")
    axes = [p.grid(cfg.grid_points_per_dim) for p in model.parameters]
    if any(axis.size == 0 for axis in axes):
        raise FitError("Model '%s' has an empty grid" % model.name, "empty_grid")
    names = model.parameter_names
    best: Optional[Dict[str, float]] = None
    best_loss = math.inf
    for point in itertools.product(*axes):
        params = {n: float(v) for n, v in zip(names, point)}
        value = objective(params)
        # strict comparison keeps the first minimum in enumeration order
        if value < best_loss:
            best, best_loss = params, value
    if best is None:
        logger.error("Every grid point failed for %s", model.name)
        raise FitError(
            "Every parameter point failed for '%s'" % model.name,
            "all_failed",
            {"evaluations": objective.evaluations},
        )
    return best, best_loss


def _restart_simplex(
    x0: np.ndarray, bounds: List[Tuple[float, float]], rng: np.random.Generator
) -> np.ndarray:
    """Simplex around ``x0`` with seeded edge lengths of 2.5-5% of each box side.

    Edges that would leave the box point the other way.
    """
    lower = np.array([b[0] for b in bounds])
    upper = np.array([b[1] for b in bounds])
    steps = 0.05 * (upper - lower) * rng.uniform(0.5, 1.0, size=x0.shape[0])
    steps *= rng.choice([-1.0, 1.0], size=x0.shape[0])
    simplex = np.tile(x0, (x0.shape[0] + 1, 1))
    for i, step in enumerate(steps):
        vertex = x0[i] + step
        if vertex < lower[i] or vertex > upper[i]:
            vertex = x0[i] - step
        simplex[i + 1, i] = vertex
    return simplex


def _refine(
    model: ModelClass,
    objective: _Objective,
    start: Dict[str, float],
    start_loss: float,
    cfg: FitConfig,
) -> Tuple[Dict[str, float], float]:
    free = [p for p in model.parameters if not p.integer and p.lower < p.upper]
    if not free:
        return start, start_loss

    def f(vector: np.ndarray) -> float:
        params = dict(start)
        for p, v in zip(free, vector):
            params[p.name] = float(min(max(v, p.lower), p.upper))
        return objective(params)

    best, best_loss = dict(start), start_loss
    x0 = np.array([start[p.name] for p in free])
    bounds = [(p.lower, p.upper) for p in free]
    for restart in range(MAX_RESTARTS):
        options: Dict[str, Any] = {
            "maxiter": cfg.refine_max_iters,
            "xatol": 1e-8,
            "fatol": cfg.refine_tolerance * max(abs(best_loss), 1e-12),
        }
        if restart:
            rng = np.random.default_rng([cfg.seed, restart])
            options["initial_simplex"] = _restart_simplex(x0, bounds, rng)
        result = optimize.minimize(
            f, x0, method="Nelder-Mead", bounds=bounds, options=options
        )
        value = float(result.fun)
        improved = value < best_loss
        relative = (best_loss - value) / max(abs(best_loss), 1e-12)
        if improved:
            # monotone acceptance: only strictly better points replace the best
            best_loss = value
            x0 = np.clip(result.x, [b[0] for b in bounds], [b[1] for b in bounds])
            for p, v in zip(free, x0):
                best[p.name] = float(v)
        if not improved or relative < cfg.refine_tolerance:
            break
    return best, best_loss


def fit(
    model: ModelClass, train: Dataset, loss: LossFunction, cfg: FitConfig = FitConfig()
) -> FitResult:
    """Grid scan over the parameter box, then simplex refinement.

    Integer parameters are scanned over their full range jointly with the
    continuous grid and held fixed during refinement.
    """
    objective = _Objective(model, train, loss)
    params, value = _scan(model, objective, cfg)
    if cfg.refine:
        params, value = _refine(model, objective, params, value, cfg)
    for p in model.parameters:
        if p.integer:
            params[p.name] = float(int(round(params[p.name])))
    logger.debug(
        "Fitted %s: %s loss=%.6g after %d evaluations",
        model.name,
        params,
        value,
        objective.evaluations,
    )
    return FitResult(params, value, objective.evaluations, objective.failures)


def fit_discrete(
    model: ModelClass, train: Dataset, loss: LossFunction, cfg: FitConfig = FitConfig()
) -> FitResult:
    """Exhaustive scan for step-function objectives; first minimum wins."""
    if not loss.is_classification:
        raise ValueError("fit_discrete expects a misclassification loss")
    objective = _Objective(model, train, loss)
    params, value = _scan(model, objective, cfg)
    return FitResult(params, value, objective.evaluations, objective.failures)


def fit_for_loss(
    model: ModelClass, train: Dataset, loss: LossFunction, cfg: FitConfig = FitConfig()
) -> FitResult:
    if loss.is_classification:
        return fit_discrete(model, train, loss, cfg)
    return fit(model, train, loss, cfg)


def grid_losses(
    model: ModelClass, train: Dataset, loss: LossFunction, cfg: FitConfig = FitConfig()
) -> List[Tuple[Dict[str, float], float]]:
    """Training loss at every grid point, in enumeration order."""
    objective = _Objective(model, train, loss)
    axes = [p.grid(cfg.grid_points_per_dim) for p in model.parameters]
    names = model.parameter_names
    out = []
    for point in itertools.product(*axes):
        params = {n: float(v) for n, v in zip(names, point)}
        out.append((params, objective(params)))
    return out
