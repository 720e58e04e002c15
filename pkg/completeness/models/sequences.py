"""Continuation probabilities for human-generated coin-flip strings.

A feature row holds the first flips of a string coded H = 1, T = 0, oldest
first; the outcome is the next flip.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Sequence

import numpy as np

from completeness.core import (
    LossFunction,
    ModelClass,
    Parameter,
    PredictionRule,
    ProblemKind,
    naive_rule,
    one_hot,
)

logger = logging.getLogger("completeness")

HISTORY_LENGTH = 7
CLAMP = 1e-9

FORCE = "force"
ZERO = "zero"
POSTERIOR = "posterior"
PLUGIN = "plugin"


@dataclass(frozen=True)
class FlipHistory:
    flips: tuple

    def __post_init__(self):
        flips = tuple(int(f) for f in self.flips)
        if len(flips) != HISTORY_LENGTH:
            raise ValueError("A flip history has exactly %d flips" % HISTORY_LENGTH)
        if any(f not in (0, 1) for f in flips):
            raise ValueError("Flips are coded H = 1, T = 0")
        object.__setattr__(self, "flips", flips)

    @classmethod
    def parse(cls, text: str) -> "FlipHistory":
        return cls(tuple(1 if c == "H" else 0 for c in text.strip().upper()))

    def as_row(self) -> np.ndarray:
        return np.array([self.flips], dtype=float)


@dataclass(frozen=True)
class UrnParams:
    N: int
    p: float

    def __post_init__(self):
        if self.N < 2 or self.N % 2:
            raise ValueError("Urn size must be a positive even integer")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("Refresh probability must lie in [0, 1]")


@dataclass(frozen=True)
class RvParams:
    alpha: float
    delta: float

    def __post_init__(self):
        if self.alpha < 0 or self.delta < 0:
            raise ValueError("alpha and delta must be nonnegative")


def rv_raw(x: np.ndarray, alpha: float, delta: float) -> np.ndarray:
    """Unclamped ``0.5 - alpha * sum_t delta^t (2 s_{last - t} - 1)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    length = x.shape[1]
    # most recent flip gets delta^0
    decay = float(delta) ** np.arange(length)[::-1]
    return 0.5 - alpha * ((2.0 * x - 1.0) @ decay)


def rv_probabilities(x: np.ndarray, alpha: float, delta: float) -> np.ndarray:
    return np.clip(rv_raw(x, alpha, delta), CLAMP, 1.0 - CLAMP)


def rv_probability(h: FlipHistory, theta: RvParams) -> float:
    return float(rv_probabilities(h.as_row(), theta.alpha, theta.delta)[0])


def history_index(x: np.ndarray) -> np.ndarray:
    """Binary index of each history, oldest flip most significant."""
    x = np.atleast_2d(np.asarray(x, dtype=int))
    powers = 2 ** np.arange(x.shape[1])[::-1]
    return x @ powers


def all_histories(length: int) -> np.ndarray:
    """Every history of ``length`` flips, ordered by ``history_index``."""
    index = np.arange(2 ** length)
    return ((index[:, None] >> np.arange(length)[::-1]) & 1).astype(float)


@lru_cache(maxsize=4096)
def _urn_table(
    N: int, p: float, length: int, depletion: str, likelihood: str
) -> np.ndarray:
    """Continuation probability of H for every history of ``length`` flips.

    Refresh indicators before periods 2..length+1 are enumerated exactly and
    weighted by their prior probability; with the posterior treatment they
    are also weighted by the likelihood of the observed history.
    """
    histories = all_histories(length).astype(int)
    n_hist = histories.shape[0]
    n_events = length
    patterns = all_histories(n_events).astype(bool)
    n_pat = patterns.shape[0]
    refreshes = patterns.sum(axis=1)
    prior = p ** refreshes * (1.0 - p) ** (n_events - refreshes)

    half = N // 2
    ones = np.full((n_hist, n_pat), half, dtype=float)
    zeros = np.full((n_hist, n_pat), half, dtype=float)
    lik = np.ones((n_hist, n_pat))
    for t in range(length):
        if t > 0:
            refresh = np.broadcast_to(patterns[:, t - 1], (n_hist, n_pat))
            empty = (ones + zeros) == 0
            if depletion == ZERO:
                lik = np.where(empty & ~refresh, 0.0, lik)
            refresh = refresh | empty
            ones = np.where(refresh, half, ones)
            zeros = np.where(refresh, half, zeros)
        total = ones + zeros
        drew_h = histories[:, t : t + 1] == 1
        with np.errstate(invalid="ignore", divide="ignore"):
            chance = np.where(drew_h, ones, zeros) / total
        chance = np.where(total > 0, chance, 0.0)
        lik = lik * chance
        ones = np.where(drew_h, ones - 1, ones)
        zeros = np.where(drew_h, zeros, zeros - 1)
        ones = np.maximum(ones, 0)
        zeros = np.maximum(zeros, 0)

    refresh = np.broadcast_to(patterns[:, n_events - 1], (n_hist, n_pat))
    empty = (ones + zeros) == 0
    if depletion == ZERO:
        lik = np.where(empty & ~refresh, 0.0, lik)
    refresh = refresh | empty
    ones = np.where(refresh, half, ones)
    zeros = np.where(refresh, half, zeros)
    with np.errstate(invalid="ignore", divide="ignore"):
        next_h = np.where(ones + zeros > 0, ones / (ones + zeros), 0.5)

    if likelihood == POSTERIOR:
        weights = prior[None, :] * lik
    elif likelihood == PLUGIN:
        weights = prior[None, :] * (lik > 0)
    else:
        raise ValueError("Unknown likelihood treatment '%s'" % likelihood)
    mass = weights.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = (weights * next_h).sum(axis=1) / mass
    q = np.where(mass > 0, q, 0.5)
    q.setflags(write=False)
    return q


def urn_probabilities(
    x: np.ndarray,
    N: int,
    p: float,
    depletion: str = FORCE,
    likelihood: str = POSTERIOR,
) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    table = _urn_table(int(N), float(p), x.shape[1], depletion, likelihood)
    return table[history_index(x)]


def urn_probability(
    h: FlipHistory,
    theta: UrnParams,
    depletion: str = FORCE,
    likelihood: str = POSTERIOR,
) -> float:
    return float(
        urn_probabilities(h.as_row(), theta.N, theta.p, depletion, likelihood)[0]
    )


def _with_loss(
    name: str, probabilities, loss: LossFunction, parameters: Dict[str, float]
) -> PredictionRule:
    if not loss.is_classification:
        return PredictionRule(name, probabilities, parameters=parameters)
    # H iff q >= 0.5; q == 0.5 is a tie resolved to H.
    return PredictionRule(
        name,
        lambda x: one_hot((probabilities(x) >= 0.5).astype(int), 2),
        tie_func=lambda x: probabilities(x) == 0.5,
        parameters=parameters,
    )


def sequence_rule(
    model: str,
    theta=None,
    loss: LossFunction = None,
    depletion: str = FORCE,
    likelihood: str = POSTERIOR,
) -> PredictionRule:
    """Rule for ``model`` in {naive, urn, rv} under ``loss``.

    Squared error predicts the probability of H; misclassification predicts
    H iff that probability is at least 0.5.
    """
    from completeness.core import SQUARED_ERROR

    loss = loss or SQUARED_ERROR
    if model == "naive":
        return naive_rule(ProblemKind.SEQUENCES, loss)
    if model == "rv":
        alpha, delta = theta.alpha, theta.delta
        return _with_loss(
            "rv",
            lambda x: rv_probabilities(x, alpha, delta),
            loss,
            {"alpha": alpha, "delta": delta},
        )
    if model == "urn":
        N, p = theta.N, theta.p
        return _with_loss(
            "urn",
            lambda x: urn_probabilities(x, N, p, depletion, likelihood),
            loss,
            {"N": N, "p": p},
        )
    raise ValueError("Unknown sequence model '%s'" % model)


def rv_model(
    loss: LossFunction, alpha=(0.0, 2.0), delta=(0.0, 2.0)
) -> ModelClass:
    def build(params: Dict[str, float]) -> PredictionRule:
        return sequence_rule("rv", RvParams(params["alpha"], params["delta"]), loss)

    return ModelClass(
        "rv",
        (Parameter("alpha", *alpha), Parameter("delta", *delta)),
        build,
        ("probabilities clamped to [1e-9, 1 - 1e-9]",),
    )


def urn_model(
    loss: LossFunction,
    N=(2, 256),
    p=(0.0, 1.0),
    depletion: str = FORCE,
    likelihood: str = POSTERIOR,
) -> ModelClass:
    def build(params: Dict[str, float]) -> PredictionRule:
        return sequence_rule(
            "urn",
            UrnParams(int(params["N"]), params["p"]),
            loss,
            depletion=depletion,
            likelihood=likelihood,
        )

    return ModelClass(
        "urn",
        (Parameter("N", N[0], N[1], integer=True, step=2), Parameter("p", *p)),
        build,
        ("depletion: %s" % depletion, "likelihood: %s" % likelihood),
    )


def flips_from_text(text: str) -> Sequence[int]:
    return [1 if c == "H" else 0 for c in text.strip().upper()]


def flips_to_text(flips: Sequence[float]) -> str:
    return "".join("H" if int(f) == 1 else "T" for f in flips)
