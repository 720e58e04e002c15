"""Initial play in 3x3 matrix games: level-k, Poisson Cognitive Hierarchy, and
the game filters that carve out Data Sets A and B.

A feature row holds 18 payoffs: the row player's matrix row-major, then the
column player's matrix row-major. Entry (i, j) of either matrix is that
player's payoff when the row player plays a_i and the column player a_j.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy import stats

from completeness.core import (
    ACTION_LABELS,
    ModelClass,
    Parameter,
    PredictionRule,
    one_hot,
)

logger = logging.getLogger("completeness")

N_ACTIONS = 3
DEFAULT_K_MAX = 6
# Best responses within this tolerance of the maximum count as tied.
TIE_TOLERANCE = 1e-12

GAME_FEATURES = tuple(f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)) + tuple(
    f"c{i}{j}" for i in range(1, 4) for j in range(1, 4)
)

HIERARCHY = "hierarchy"
CHAIN = "chain"


@dataclass(frozen=True, eq=False)
class Game:
    row_payoffs: np.ndarray
    col_payoffs: np.ndarray

    def __post_init__(self):
        row = np.array(self.row_payoffs, dtype=float).reshape(N_ACTIONS, N_ACTIONS)
        col = np.array(self.col_payoffs, dtype=float).reshape(N_ACTIONS, N_ACTIONS)
        if not (np.all(np.isfinite(row)) and np.all(np.isfinite(col))):
            raise ValueError("Game payoffs must be finite")
        object.__setattr__(self, "row_payoffs", row)
        object.__setattr__(self, "col_payoffs", col)

    @classmethod
    def from_row(cls, values: Iterable[float]) -> "Game":
        values = np.asarray(list(values), dtype=float)
        if values.shape[0] != 2 * N_ACTIONS * N_ACTIONS:
            raise ValueError("A game row needs 18 payoffs")
        return cls(values[:9], values[9:])

    def as_row(self) -> np.ndarray:
        return np.concatenate([self.row_payoffs.reshape(-1), self.col_payoffs.reshape(-1)])

    def transposed(self) -> "Game":
        """The same game seen from the column player's seat."""
        return Game(self.col_payoffs.T, self.row_payoffs.T)

    @property
    def max_row_payoff(self) -> float:
        return float(self.row_payoffs.max())


@dataclass
class LevelProfile:
    """Row actions by level; index 0 is level-0 (``None``: uniform play)."""

    level_actions: List[Optional[int]]
    ties: List[bool] = field(default_factory=list)

    @property
    def tied(self) -> bool:
        return any(self.ties)

    def labels(self) -> List[str]:
        return ["uniform" if a is None else ACTION_LABELS[a] for a in self.level_actions]


@dataclass(frozen=True)
class PchmParams:
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("PCHM tau must be positive")


def _argmax(values: np.ndarray) -> Tuple[int, bool]:
    """Lowest-index argmax and whether another action ties with it."""
    best = float(np.max(values))
    winners = np.flatnonzero(values >= best - TIE_TOLERANCE * max(1.0, abs(best)))
    return int(winners[0]), winners.shape[0] > 1


def best_response(payoffs: np.ndarray, opponent: np.ndarray) -> Tuple[int, bool]:
    """Row best response of ``payoffs`` to an opponent mixed strategy."""
    return _argmax(payoffs @ opponent)


def uniform_play() -> np.ndarray:
    return np.full(N_ACTIONS, 1.0 / N_ACTIONS)


def _chains(g: Game, k_max: int):
    row = [None]  # type: List[Optional[int]]
    col = [None]  # type: List[Optional[int]]
    row_ties = [False]
    col_ties = [False]
    col_view = g.col_payoffs.T
    for k in range(1, k_max + 1):
        if k == 1:
            r, rt = best_response(g.row_payoffs, uniform_play())
            c, ct = best_response(col_view, uniform_play())
        else:
            r, rt = best_response(g.row_payoffs, one_hot([col[k - 1]], N_ACTIONS)[0])
            c, ct = best_response(col_view, one_hot([row[k - 1]], N_ACTIONS)[0])
        row.append(r)
        col.append(c)
        row_ties.append(rt)
        col_ties.append(ct)
    return (
        LevelProfile(row, row_ties),
        LevelProfile(col, col_ties),
    )


def level_k_actions(g: Game, k_max: int) -> LevelProfile:
    """Classic level-k chain for the row player.

    Level 1 best responds to uniform play; level k best responds to the
    column player's level-(k-1) action, computed the same way from the
    column player's payoffs. Ties go to the lowest index and are recorded.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    row, _ = _chains(g, k_max)
    return row


def column_level_k_actions(g: Game, k_max: int) -> LevelProfile:
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    _, col = _chains(g, k_max)
    return col


def poisson_weights(tau: float, k_max: int) -> np.ndarray:
    """Poisson(tau) mass on levels 0..k_max, renormalized."""
    mass = stats.poisson.pmf(np.arange(k_max + 1), tau)
    return mass / mass.sum()


def _hierarchy_actions(
    payoffs: np.ndarray, opponent_payoffs: np.ndarray, weights: np.ndarray, k_max: int
):
    """Actions of levels 1..k_max for both seats under cognitive hierarchy.

    ``payoffs`` and ``opponent_payoffs`` are each seat's own row-oriented
    matrix. Each level best responds to the renormalized mixture of the
    opponent's lower levels, each lower level playing its own action.
    """
    own: List[np.ndarray] = [uniform_play()]
    other: List[np.ndarray] = [uniform_play()]
    for k in range(1, k_max + 1):
        belief = weights[:k] / weights[:k].sum()
        mix_other = sum(b * s for b, s in zip(belief, other))
        mix_own = sum(b * s for b, s in zip(belief, own))
        a, _ = best_response(payoffs, mix_other)
        b, _ = best_response(opponent_payoffs, mix_own)
        own.append(one_hot([a], N_ACTIONS)[0])
        other.append(one_hot([b], N_ACTIONS)[0])
    return own


def pchm_distribution(
    g: Game,
    theta: PchmParams,
    k_max: int = DEFAULT_K_MAX,
    opponents: str = HIERARCHY,
) -> np.ndarray:
    """Population distribution of row actions under PCHM(tau).

    With ``opponents="chain"`` level k plays the classic level-k action
    instead of a best response to the lower-level mixture.
    """
    return _pchm(g, theta.tau, k_max, opponents)


def level_strategies(
    g: Game, tau: float, k_max: int = DEFAULT_K_MAX, opponents: str = HIERARCHY
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Poisson level weights and each level's row strategy, level 0 uniform."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    weights = poisson_weights(tau, k_max)
    if opponents == CHAIN:
        profile = level_k_actions(g, k_max)
        strategies = [uniform_play()] + [
            one_hot([a], N_ACTIONS)[0] for a in profile.level_actions[1:]
        ]
    elif opponents == HIERARCHY:
        strategies = _hierarchy_actions(
            g.row_payoffs, g.col_payoffs.T, weights, k_max
        )
    else:
        raise ValueError("Unknown opponent convention '%s'" % opponents)
    return weights, strategies


def _pchm(g: Game, tau: float, k_max: int, opponents: str):
    weights, strategies = level_strategies(g, tau, k_max, opponents)
    return np.asarray(sum(w * s for w, s in zip(weights, strategies)))


def pchm_predict(
    g: Game,
    theta: PchmParams,
    k_max: int = DEFAULT_K_MAX,
    opponents: str = HIERARCHY,
) -> Tuple[int, bool]:
    """Modal PCHM action (lowest index on ties) and whether it was a tie."""
    dist = pchm_distribution(g, theta, k_max, opponents)
    return _argmax(dist)


def _games(x: np.ndarray) -> List[Game]:
    return [Game.from_row(row) for row in np.atleast_2d(x)]


def pchm_rule(
    tau: float, k_max: int = DEFAULT_K_MAX, opponents: str = HIERARCHY
) -> PredictionRule:
    theta = PchmParams(tau)

    def modes(x: np.ndarray):
        return [pchm_predict(g, theta, k_max, opponents) for g in _games(x)]

    return PredictionRule(
        "pchm",
        lambda x: one_hot([a for a, _ in modes(x)], N_ACTIONS),
        arity=18,
        tie_func=lambda x: np.array([t for _, t in modes(x)], dtype=bool),
        parameters={"tau": tau},
    )


def level1_rule() -> PredictionRule:
    def actions(x: np.ndarray):
        return [best_response(g.row_payoffs, uniform_play()) for g in _games(x)]

    return PredictionRule(
        "level1",
        lambda x: one_hot([a for a, _ in actions(x)], N_ACTIONS),
        arity=18,
        tie_func=lambda x: np.array([t for _, t in actions(x)], dtype=bool),
    )


def pchm_model(
    tau=(0.1, 5.0), k_max: int = DEFAULT_K_MAX, opponents: str = HIERARCHY
) -> ModelClass:
    def build(params: Dict[str, float]) -> PredictionRule:
        return pchm_rule(params["tau"], k_max, opponents)

    return ModelClass(
        "pchm",
        (Parameter("tau", *tau),),
        build,
        ("k_max: %d" % k_max, "opponents: %s" % opponents),
    )


# Game filters


def strictly_dominated_actions(payoffs: np.ndarray) -> List[int]:
    """Rows of ``payoffs`` strictly dominated by another pure row."""
    dominated = []
    for i in range(N_ACTIONS):
        for j in range(N_ACTIONS):
            if i != j and np.all(payoffs[j] > payoffs[i]):
                dominated.append(i)
                break
    return dominated


def has_dominated_action(g: Game) -> bool:
    return bool(
        strictly_dominated_actions(g.row_payoffs)
        or strictly_dominated_actions(g.col_payoffs.T)
    )


def welfare_max_profile(g: Game) -> Tuple[int, int]:
    """Profile with the highest payoff sum (first in row-major order)."""
    welfare = g.row_payoffs + g.col_payoffs
    flat = int(np.argmax(welfare))
    return flat // N_ACTIONS, flat % N_ACTIONS


def level_k_support(g: Game, k_max: int = DEFAULT_K_MAX) -> Tuple[List[int], List[int]]:
    row, col = _chains(g, k_max)
    return (
        sorted({a for a in row.level_actions[1:] if a is not None}),
        sorted({a for a in col.level_actions[1:] if a is not None}),
    )


def welfare_gap(g: Game, k_max: int = DEFAULT_K_MAX) -> float:
    """Welfare-maximal payoff sum minus the best sum inside level-k support."""
    welfare = g.row_payoffs + g.col_payoffs
    rows, cols = level_k_support(g, k_max)
    supported = max(welfare[i, j] for i in rows for j in cols)
    return float(welfare.max() - supported)


def welfare_gap_ratio(
    g: Game, k_max: int = DEFAULT_K_MAX, normalizer: str = "welfare_row"
) -> float:
    """Welfare gap as a share of a row-payoff scale.

    ``welfare_row`` scales by the row player's payoff at the welfare-maximal
    profile, ``max_row`` by the largest row payoff in the game.
    """
    if normalizer == "welfare_row":
        i, j = welfare_max_profile(g)
        scale = float(g.row_payoffs[i, j])
    elif normalizer == "max_row":
        scale = g.max_row_payoff
    else:
        raise ValueError("Unknown normalizer '%s'" % normalizer)
    if scale <= 0:
        return float("inf") if welfare_gap(g, k_max) > 0 else 0.0
    return welfare_gap(g, k_max) / scale


def level1_margin_ratio(g: Game) -> float:
    """Level-1 payoff margin over the next best action against uniform play,
    as a share of the largest row payoff."""
    expected = np.sort(g.row_payoffs @ uniform_play())[::-1]
    scale = g.max_row_payoff
    margin = float(expected[0] - expected[1])
    if scale <= 0:
        return float("inf") if margin > 0 else 0.0
    return margin / scale


def in_dataset_a(g: Game) -> bool:
    return not has_dominated_action(g)


def in_dataset_b(
    g: Game,
    k_max: int = DEFAULT_K_MAX,
    min_ratio: float = 0.2,
    normalizer: str = "welfare_row",
) -> bool:
    i, j = welfare_max_profile(g)
    rows, cols = level_k_support(g, k_max)
    if i in rows and j in cols:
        return False
    return welfare_gap_ratio(g, k_max, normalizer) >= min_ratio


def in_level1_gap_set(g: Game, min_ratio: float = 0.25) -> bool:
    return level1_margin_ratio(g) >= min_ratio


def filter_dataset_A(games: Iterable[Game]) -> List[Game]:
    return [g for g in games if in_dataset_a(g)]


def filter_dataset_B(games: Iterable[Game], **kwargs) -> List[Game]:
    return [g for g in games if in_dataset_b(g, **kwargs)]


def filter_level1_gap(games: Iterable[Game], min_ratio: float = 0.25) -> List[Game]:
    return [g for g in games if in_level1_gap_set(g, min_ratio)]


GAME_FILTERS = {
    "A": in_dataset_a,
    "B": in_dataset_b,
    "level1_gap": in_level1_gap_set,
}
