"""CSV ingestion and serialization for the three behavioral domains.

Schemas (header row mandatory, UTF-8, ``.`` decimal separator):

* risk: ``lottery_id,z1,z2,p,ce,subject_id``
* games: ``game_id,r11..r33,c11..c33,action,subject_id`` with action in 1..3
* sequences: ``subject_id,round,flips`` with flips an H/T string
"""
import logging
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from completeness.core import (
    ACTION_LABELS,
    CATEGORICAL,
    FLIP_LABELS,
    REAL,
    CompletenessError,
    Dataset,
    OutcomeKind,
    ProblemKind,
)
from completeness.models.games import GAME_FEATURES
from completeness.models.risk import RISK_FEATURES
from completeness.models.sequences import flips_to_text

logger = logging.getLogger("completeness")

SCHEMAS: Dict[ProblemKind, Tuple[str, ...]] = {
    ProblemKind.RISK: ("lottery_id",) + RISK_FEATURES + ("ce", "subject_id"),
    ProblemKind.GAMES: ("game_id",) + GAME_FEATURES + ("action", "subject_id"),
    ProblemKind.SEQUENCES: ("subject_id", "round", "flips"),
}


class SchemaError(CompletenessError):
    """Raised when a CSV file does not follow its domain schema.

    ``row`` is the 1-based data row (0 for the header) and ``column`` the
    offending column name.
    """

    def __init__(self, error: str, row: int, column: str):
        self.row: int = row
        self.column: str = column
        super(SchemaError, self).__init__(
            error, "schema", {"row": row, "column": column}
        )

    def __str__(self):
        return "%s (row %d, column '%s')" % (self.error, self.row, self.column)


def _fail(error: str, row: int, column: str):
    logger.error("Schema violation at row %d, column '%s': %s", row, column, error)
    raise SchemaError(error, row, column)


def _numbers(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        _fail("Expected a finite number", int(np.flatnonzero(bad)[0]) + 1, column)
    return values


def _ids(frame: pd.DataFrame, column: str) -> Optional[List[str]]:
    values = [v.strip() for v in frame[column]]
    if all(v == "" for v in values):
        return None
    for index, v in enumerate(values):
        if v == "":
            _fail("Missing identifier", index + 1, column)
    return values


def _check_header(frame: pd.DataFrame, domain: ProblemKind) -> None:
    for column in SCHEMAS[domain]:
        if column not in frame.columns:
            _fail("Missing column", 0, column)


def _risk(frame: pd.DataFrame) -> Dataset:
    features = np.column_stack([_numbers(frame, c) for c in RISK_FEATURES])
    p = features[:, 2]
    bad = (p < 0) | (p > 1)
    if np.any(bad):
        _fail("Probability outside [0, 1]", int(np.flatnonzero(bad)[0]) + 1, "p")
    return Dataset(
        features=features,
        outcomes=_numbers(frame, "ce"),
        problem_kind=ProblemKind.RISK,
        outcome_kind=OutcomeKind.REAL,
        feature_kinds=(REAL,) * len(RISK_FEATURES),
        subject_ids=_ids(frame, "subject_id"),
        instance_ids=_ids(frame, "lottery_id"),
        feature_names=RISK_FEATURES,
    )


def _games(frame: pd.DataFrame) -> Dataset:
    features = np.column_stack([_numbers(frame, c) for c in GAME_FEATURES])
    actions = _numbers(frame, "action")
    bad = ~np.isin(actions, (1, 2, 3))
    if np.any(bad):
        _fail("Action must be 1, 2 or 3", int(np.flatnonzero(bad)[0]) + 1, "action")
    return Dataset(
        features=features,
        outcomes=actions - 1,
        problem_kind=ProblemKind.GAMES,
        outcome_kind=OutcomeKind.ACTION,
        feature_kinds=(REAL,) * len(GAME_FEATURES),
        outcome_labels=ACTION_LABELS,
        subject_ids=_ids(frame, "subject_id"),
        instance_ids=_ids(frame, "game_id"),
        feature_names=GAME_FEATURES,
    )


def _sequences(frame: pd.DataFrame) -> Dataset:
    subjects = _ids(frame, "subject_id")
    if subjects is None:
        _fail("Missing identifier", 1, "subject_id")
    rounds = _numbers(frame, "round")
    bad = rounds != np.round(rounds)
    if np.any(bad):
        _fail("Round must be an integer", int(np.flatnonzero(bad)[0]) + 1, "round")
    strings = [s.strip().upper() for s in frame["flips"]]
    length = len(strings[0])
    for index, s in enumerate(strings):
        if len(s) != length or length < 2 or set(s) - {"H", "T"}:
            _fail("Flips must be H/T strings of one common length", index + 1, "flips")
    flips = np.array([[1.0 if c == "H" else 0.0 for c in s] for s in strings])
    return Dataset(
        features=flips[:, :-1],
        outcomes=flips[:, -1],
        problem_kind=ProblemKind.SEQUENCES,
        outcome_kind=OutcomeKind.BINARY,
        feature_kinds=(CATEGORICAL,) * (length - 1),
        vocabularies=(FLIP_LABELS,) * (length - 1),
        outcome_labels=FLIP_LABELS,
        subject_ids=subjects,
        rounds=rounds.astype(int),
        feature_names=tuple("flip%d" % (i + 1) for i in range(length - 1)),
    )


_READERS = {
    ProblemKind.RISK: _risk,
    ProblemKind.GAMES: _games,
    ProblemKind.SEQUENCES: _sequences,
}


def dataset_from_frame(frame: pd.DataFrame, domain: Union[ProblemKind, str]) -> Dataset:
    """Validate a string-typed frame against its schema and decode it."""
    domain = ProblemKind(domain)
    if domain not in _READERS:
        raise ValueError("No CSV schema for domain '%s'" % domain.value)
    frame = frame.astype(str)
    _check_header(frame, domain)
    if frame.shape[0] == 0:
        _fail("File has no data rows", 1, SCHEMAS[domain][0])
    return _READERS[domain](frame)


def frame_from_dataset(data: Dataset) -> pd.DataFrame:
    """The dataset in its domain's CSV schema."""
    subjects = (
        [""] * len(data) if data.subject_ids is None else [str(s) for s in data.subject_ids]
    )
    instances = (
        [""] * len(data) if data.instance_ids is None else [str(i) for i in data.instance_ids]
    )
    kind = data.problem_kind
    if kind == ProblemKind.RISK:
        frame = pd.DataFrame(data.features, columns=list(RISK_FEATURES))
        frame.insert(0, "lottery_id", instances)
        frame["ce"] = data.outcomes
        frame["subject_id"] = subjects
    elif kind == ProblemKind.GAMES:
        frame = pd.DataFrame(data.features, columns=list(GAME_FEATURES))
        frame.insert(0, "game_id", instances)
        frame["action"] = data.outcomes.astype(int) + 1
        frame["subject_id"] = subjects
    elif kind == ProblemKind.SEQUENCES:
        rounds = data.rounds if data.rounds is not None else np.arange(1, len(data) + 1)
        strings = [
            flips_to_text(list(x) + [y]) for x, y in zip(data.features, data.outcomes)
        ]
        frame = pd.DataFrame(
            {"subject_id": subjects, "round": rounds.astype(int), "flips": strings}
        )
    else:
        raise ValueError("No CSV schema for domain '%s'" % kind.value)
    return frame[list(SCHEMAS[kind])]


def read_frame(path: str) -> pd.DataFrame:
    return pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")


def load_dataset(path: str, domain: Union[ProblemKind, str]) -> Dataset:
    data = dataset_from_frame(read_frame(path), domain)
    logger.info("Loaded %d %s observations from %s", len(data), data.problem_kind.value, path)
    return data


def write_frame(frame: pd.DataFrame, path: str) -> None:
    frame.to_csv(path, index=False, encoding="utf-8")


def save_dataset(data: Dataset, path: str) -> None:
    write_frame(frame_from_dataset(data), path)
    logger.info("Wrote %d observations to %s", len(data), path)
