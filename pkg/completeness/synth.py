"""Seeded generators of synthetic behavioral data with known ground truth.

Each generator builds a frame in its domain's CSV schema and decodes it
through ``datafiles``, so written files read back to the same dataset.
Ground-truth labels travel in a separate metadata mapping.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from completeness.core import Dataset
from completeness.datafiles import dataset_from_frame, write_frame
from completeness.models.games import (
    DEFAULT_K_MAX,
    GAME_FEATURES,
    HIERARCHY,
    N_ACTIONS,
    Game,
    level_strategies,
)
from completeness.models.risk import CptParams, Lottery, predict_cpt
from completeness.models.sequences import (
    RvParams,
    UrnParams,
    flips_to_text,
    rv_probabilities,
)

logger = logging.getLogger("completeness")

BERNOULLI_HALF = "bernoulli_half"
RABIN_VAYANOS = "rabin_vayanos"
URN = "urn"
GENERATORS = (BERNOULLI_HALF, RABIN_VAYANOS, URN)

# Gain lottery prizes and probabilities drawn for the default design.
PROBABILITIES = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)
MAX_PRIZE = 150


def default_lotteries(n: int = 50, seed: int = 0) -> Tuple[Lottery, ...]:
    """``n`` distinct two-outcome lotteries, half over gains, half over losses."""
    if n < 2 or n % 2:
        raise ValueError("The lottery design needs an even count of at least 2")
    rng = np.random.default_rng([seed, 0x10])
    gains: List[Tuple[float, float, float]] = []
    while len(gains) < n // 2:
        high = int(rng.integers(1, MAX_PRIZE + 1))
        low = int(rng.integers(0, high))
        p = float(rng.choice(PROBABILITIES))
        candidate = (float(high), float(low), p)
        if candidate not in gains:
            gains.append(candidate)
    losses = [(-high, -low, p) for high, low, p in gains]
    return tuple(Lottery(*row) for row in gains + losses)


@dataclass(frozen=True)
class RiskGenSpec:
    types: Tuple[Tuple[CptParams, float], ...]
    lotteries: Tuple[Lottery, ...] = field(default_factory=default_lotteries)
    ce_noise_sigma: float = 0.0
    n_subjects: int = 50
    reports_per_lottery: int = 1
    seed: int = 0

    def __post_init__(self):
        weights = np.array([w for _, w in self.types], dtype=float)
        if not len(self.types) or np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
            raise ValueError("Subject type weights must be nonnegative and sum to 1")
        if self.ce_noise_sigma < 0:
            raise ValueError("ce_noise_sigma must be nonnegative")
        if self.n_subjects < 1 or self.reports_per_lottery < 1 or not self.lotteries:
            raise ValueError("Generator counts must be positive")


@dataclass(frozen=True)
class GameGenSpec:
    n_games: int = 100
    payoff_range: Tuple[int, int] = (0, 100)
    tau_true: float = 1.5
    tremble: float = 0.0
    observations_per_game: int = 20
    k_max: int = DEFAULT_K_MAX
    opponents: str = HIERARCHY
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tremble <= 1.0:
            raise ValueError("tremble must lie in [0, 1]")
        if self.payoff_range[0] > self.payoff_range[1]:
            raise ValueError("payoff_range must be an increasing interval")
        if self.n_games < 1 or self.observations_per_game < 1:
            raise ValueError("Generator counts must be positive")


@dataclass(frozen=True)
class SeqGenSpec:
    generator: str = BERNOULLI_HALF
    rv: Optional[RvParams] = None
    urn: Optional[UrnParams] = None
    n_strings: int = 1000
    string_length: int = 8
    strings_per_subject: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError("Unknown sequence generator '%s'" % self.generator)
        if self.generator == RABIN_VAYANOS and self.rv is None:
            raise ValueError("The rabin_vayanos generator needs RvParams")
        if self.generator == URN and self.urn is None:
            raise ValueError("The urn generator needs UrnParams")
        if self.string_length < 2:
            raise ValueError("string_length must be at least 2")
        if self.n_strings < 1 or self.strings_per_subject < 1:
            raise ValueError("Generator counts must be positive")


def _subject(index: int) -> str:
    return "s%04d" % (index + 1)


def risk_frame(spec: RiskGenSpec) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Certainty equivalents from a mixture of CPT subject types.

    Noise is Gaussian and the reported value is clipped to the prizes' span.
    """
    rng = np.random.default_rng(spec.seed)
    weights = np.array([w for _, w in spec.types], dtype=float)
    types = rng.choice(len(spec.types), size=spec.n_subjects, p=weights / weights.sum())
    rows = []
    for s, t in enumerate(types):
        theta = spec.types[int(t)][0]
        for l, lot in enumerate(spec.lotteries):
            clean = predict_cpt(lot, theta)
            low, high = min(lot.z1, lot.z2), max(lot.z1, lot.z2)
            for _ in range(spec.reports_per_lottery):
                noise = rng.normal(0.0, spec.ce_noise_sigma) if spec.ce_noise_sigma else 0.0
                rows.append(
                    (
                        "L%02d" % (l + 1),
                        float(lot.z1),
                        float(lot.z2),
                        float(lot.p),
                        float(np.clip(clean + noise, low, high)),
                        _subject(s),
                    )
                )
    frame = pd.DataFrame(rows, columns=["lottery_id", "z1", "z2", "p", "ce", "subject_id"])
    metadata = {
        "generator": "risk",
        "subject_types": {_subject(s): int(t) for s, t in enumerate(types)},
        "types": [asdict(theta) for theta, _ in spec.types],
        "weights": [float(w) for _, w in spec.types],
        "ce_noise_sigma": spec.ce_noise_sigma,
        "seed": spec.seed,
    }
    return frame, metadata


def gen_risk_labeled(spec: RiskGenSpec) -> Tuple[Dataset, Dict[str, Any]]:
    frame, metadata = risk_frame(spec)
    return dataset_from_frame(frame, "risk"), metadata


def gen_risk(spec: RiskGenSpec) -> Dataset:
    return gen_risk_labeled(spec)[0]


def games_frame(spec: GameGenSpec) -> Tuple[List[Game], pd.DataFrame, Dict[str, Any]]:
    """Row-player actions from a PCHM(tau) population with uniform trembles."""
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.payoff_range
    games = [
        Game.from_row(rng.integers(lo, hi + 1, size=2 * N_ACTIONS * N_ACTIONS))
        for _ in range(spec.n_games)
    ]
    rows = []
    levels: List[int] = []
    trembles: List[bool] = []
    for j, g in enumerate(games):
        weights, strategies = level_strategies(g, spec.tau_true, spec.k_max, spec.opponents)
        payoffs = [float(v) for v in g.as_row()]
        for _ in range(spec.observations_per_game):
            trembled = bool(rng.random() < spec.tremble)
            level = int(rng.choice(len(weights), p=weights))
            if trembled:
                action = int(rng.integers(N_ACTIONS))
            else:
                action = int(rng.choice(N_ACTIONS, p=strategies[level]))
            rows.append(["G%04d" % (j + 1)] + payoffs + [action + 1, _subject(len(levels))])
            levels.append(level)
            trembles.append(trembled)
    frame = pd.DataFrame(
        rows, columns=["game_id"] + list(GAME_FEATURES) + ["action", "subject_id"]
    )
    metadata = {
        "generator": "games",
        "levels": levels,
        "trembled": trembles,
        "tau_true": spec.tau_true,
        "seed": spec.seed,
    }
    return games, frame, metadata


def gen_games_labeled(spec: GameGenSpec) -> Tuple[List[Game], Dataset, Dict[str, Any]]:
    games, frame, metadata = games_frame(spec)
    return games, dataset_from_frame(frame, "games"), metadata


def gen_games(spec: GameGenSpec) -> Tuple[List[Game], Dataset]:
    games, data, _ = gen_games_labeled(spec)
    return games, data


def _urn_string(
    length: int, theta: UrnParams, rng: np.random.Generator
) -> Tuple[List[int], List[bool]]:
    """Draw without replacement; before each later draw the urn refreshes with
    probability p, and always when it is empty."""
    half = theta.N // 2
    heads, tails = half, half
    flips: List[int] = []
    refreshes: List[bool] = []
    for t in range(length):
        if t > 0:
            refresh = bool(rng.random() < theta.p)
            refreshes.append(refresh)
            if refresh or heads + tails == 0:
                heads, tails = half, half
        flip = int(rng.random() < heads / (heads + tails))
        flips.append(flip)
        if flip:
            heads -= 1
        else:
            tails -= 1
    return flips, refreshes


def _rv_string(length: int, theta: RvParams, rng: np.random.Generator) -> List[int]:
    flips: List[int] = []
    for t in range(length):
        q = 0.5
        if t > 0:
            q = float(rv_probabilities(np.array([flips]), theta.alpha, theta.delta)[0])
        flips.append(int(rng.random() < q))
    return flips


def sequences_frame(spec: SeqGenSpec) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    rng = np.random.default_rng(spec.seed)
    rows = []
    patterns: List[List[bool]] = []
    for i in range(spec.n_strings):
        if spec.generator == URN:
            flips, refreshes = _urn_string(spec.string_length, spec.urn, rng)
            patterns.append(refreshes)
        elif spec.generator == RABIN_VAYANOS:
            flips = _rv_string(spec.string_length, spec.rv, rng)
        else:
            flips = [int(f) for f in rng.integers(0, 2, size=spec.string_length)]
        subject, offset = divmod(i, spec.strings_per_subject)
        rows.append((_subject(subject), offset + 1, flips_to_text(flips)))
    frame = pd.DataFrame(rows, columns=["subject_id", "round", "flips"])
    metadata: Dict[str, Any] = {"generator": spec.generator, "seed": spec.seed}
    if spec.rv is not None:
        metadata["rv"] = asdict(spec.rv)
    if spec.urn is not None:
        metadata["urn"] = asdict(spec.urn)
    if patterns:
        metadata["refresh_patterns"] = patterns
    return frame, metadata


def gen_sequences_labeled(spec: SeqGenSpec) -> Tuple[Dataset, Dict[str, Any]]:
    frame, metadata = sequences_frame(spec)
    return dataset_from_frame(frame, "sequences"), metadata


def gen_sequences(spec: SeqGenSpec) -> Dataset:
    return gen_sequences_labeled(spec)[0]


def write_synthetic(frame: pd.DataFrame, metadata: Dict[str, Any], path: str) -> str:
    """Write the CSV and its ``.meta.json`` sidecar; returns the sidecar path."""
    write_frame(frame, path)
    sidecar = path + ".meta.json"
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump(metadata, f, sort_keys=True, indent=2)
    logger.info("Wrote %d synthetic rows to %s", frame.shape[0], path)
    return sidecar


def parse_types(text: str) -> Tuple[Tuple[CptParams, float], ...]:
    """``alpha,beta,delta,gamma:weight;...`` into subject types."""
    types = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        params, _, weight = chunk.partition(":")
        values = [float(v) for v in params.split(",")]
        if len(values) != 4:
            raise ValueError("A CPT type needs alpha,beta,delta,gamma")
        types.append((CptParams(*values), float(weight) if weight else 1.0))
    return tuple(types)


def three_type_population() -> Sequence[Tuple[CptParams, float]]:
    """A heterogeneous population with clearly separated risk attitudes."""
    return (
        (CptParams(0.5, 0.5, 0.8, 0.6), 1 / 3),
        (CptParams(0.8, 0.8, 1.0, 1.0), 1 / 3),
        (CptParams(1.0, 1.0, 1.5, 0.9), 1 / 3),
    )
