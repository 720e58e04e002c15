"""Certainty-equivalent rules for two-outcome lotteries.

Feature rows are ``(z1, z2, p)``: two prizes and the probability of ``z1``.
"""
import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from completeness.core import (
    CompletenessError,
    ModelClass,
    Parameter,
    PredictionRule,
)

logger = logging.getLogger("completeness")

RISK_FEATURES = ("z1", "z2", "p")


class LotteryError(CompletenessError):
    """Raised for invalid lotteries, or for losses under strict Expected Utility."""


@dataclass(frozen=True)
class Lottery:
    z1: float
    z2: float
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise LotteryError(
                "Lottery probability must lie in [0, 1]", "lottery", {"p": self.p}
            )

    def as_row(self) -> np.ndarray:
        return np.array([[self.z1, self.z2, self.p]], dtype=float)


@dataclass(frozen=True)
class EuParams:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("EU alpha must be positive")


@dataclass(frozen=True)
class CptParams:
    alpha: float
    beta: float
    delta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "delta", "gamma"):
            if not getattr(self, name) > 0:
                raise ValueError("CPT %s must be positive" % name)


def _columns(x: np.ndarray):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return x[:, 0], x[:, 1], x[:, 2]


def expected_value(x: np.ndarray) -> np.ndarray:
    z1, z2, p = _columns(x)
    return p * z1 + (1.0 - p) * z2


def signed_power(z: np.ndarray, alpha: float) -> np.ndarray:
    """``sign(z) * |z| ** alpha``; equals ``z ** alpha`` on gains."""
    return np.sign(z) * np.abs(z) ** alpha


def expected_utility(x: np.ndarray, alpha: float, signed: bool = True) -> np.ndarray:
    z1, z2, p = _columns(x)
    if not signed and (np.any(z1 < 0) or np.any(z2 < 0)):
        logger.error("Strict Expected Utility received a loss lottery")
        raise LotteryError(
            "Expected Utility u(z) = z^alpha is undefined for negative prizes",
            "negative_prize",
        )
    return p * signed_power(z1, alpha) + (1.0 - p) * signed_power(z2, alpha)


def value(z: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Piecewise power value: ``z^alpha`` on gains, ``-((-z)^beta)`` otherwise."""
    z = np.asarray(z, dtype=float)
    gains = np.where(z > 0, z, 0.0)
    losses = np.where(z <= 0, -z, 0.0)
    return np.where(z > 0, gains ** alpha, -(losses ** beta))


def weight(p: np.ndarray, delta: float, gamma: float) -> np.ndarray:
    """Two-parameter weighting ``delta p^g / (delta p^g + (1 - p)^g)``.

    Endpoints are pinned to their limits: w(0) = 0 and w(1) = 1.
    """
    p = np.asarray(p, dtype=float)
    interior = np.clip(p, 1e-300, 1.0 - 1e-16)
    num = delta * interior ** gamma
    w = num / (num + (1.0 - interior) ** gamma)
    return np.where(p <= 0.0, 0.0, np.where(p >= 1.0, 1.0, w))


def prospect_value(
    x: np.ndarray, alpha: float, beta: float, delta: float, gamma: float
) -> np.ndarray:
    z1, z2, p = _columns(x)
    w = weight(p, delta, gamma)
    return w * value(z1, alpha, beta) + (1.0 - w) * value(z2, alpha, beta)


def predict_ev(lot: Lottery) -> float:
    return float(expected_value(lot.as_row())[0])


def predict_eu(lot: Lottery, theta: EuParams, signed: bool = True) -> float:
    return float(expected_utility(lot.as_row(), theta.alpha, signed=signed)[0])


def predict_cpt(lot: Lottery, theta: CptParams) -> float:
    return float(
        prospect_value(lot.as_row(), theta.alpha, theta.beta, theta.delta, theta.gamma)[0]
    )


def expected_value_rule() -> PredictionRule:
    return PredictionRule("naive", expected_value, arity=3)


def eu_model(alpha=(0.05, 2.0), signed: bool = True) -> ModelClass:
    def build(params: Dict[str, float]) -> PredictionRule:
        a = params["alpha"]
        return PredictionRule(
            "eu", lambda x: expected_utility(x, a, signed=signed), arity=3
        )

    notes = ("losses: sign_preserving",) if signed else ("losses: strict",)
    return ModelClass("eu", (Parameter("alpha", *alpha),), build, notes)


def cpt_model(
    alpha=(0.05, 2.0), beta=(0.05, 2.0), delta=(0.05, 5.0), gamma=(0.05, 3.0)
) -> ModelClass:
    def build(params: Dict[str, float]) -> PredictionRule:
        a, b, d, g = params["alpha"], params["beta"], params["delta"], params["gamma"]
        return PredictionRule(
            "cpt", lambda x: prospect_value(x, a, b, d, g), arity=3
        )

    return ModelClass(
        "cpt",
        (
            Parameter("alpha", *alpha),
            Parameter("beta", *beta),
            Parameter("delta", *delta),
            Parameter("gamma", *gamma),
        ),
        build,
        ("value on losses: -((-z)^beta)",),
    )
