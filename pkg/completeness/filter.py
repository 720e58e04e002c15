import logging
from collections import Counter
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy import stats

from completeness.core import Dataset, DatasetError, ProblemKind
from completeness.models.sequences import flips_to_text

logger = logging.getLogger("completeness")

POSITIONS = "positions"
CELLS = "cells"


def _strings(data: Dataset) -> List[str]:
    flips = np.column_stack([data.features, data.outcomes])
    return [flips_to_text(row) for row in flips]


def chi_squared_statistic(strings: List[str], method: str = POSITIONS) -> Tuple[float, int]:
    """Goodness of fit of one subject's strings to fair independent flips.

    ``positions`` compares the head count at each position with half the
    strings, one degree of freedom per position. ``cells`` compares the
    histogram of whole strings with the uniform distribution.
    """
    n = len(strings)
    length = len(strings[0])
    if method == POSITIONS:
        heads = np.array([[c == "H" for c in s] for s in strings]).sum(axis=0)
        expected = n / 2.0
        stat = float((2 * (heads - expected) ** 2 / expected).sum())
        return stat, length
    if method == CELLS:
        n_cells = 2 ** length
        expected = n / float(n_cells)
        counts = np.array(list(Counter(strings).values()), dtype=float)
        empty = n_cells - counts.shape[0]
        stat = float(((counts - expected) ** 2 / expected).sum() + empty * expected)
        return stat, n_cells - 1
    raise ValueError("Unknown chi-squared method '%s'" % method)


class SubjectFilter(object):
    """Subject-level cleaning of coin-flip data.

    Criteria apply in the order they were added:

    >>> subject_filter = SubjectFilter()
    >>> subject_filter.repeat_cutoff(5)
    >>> subject_filter.first_k(25)
    >>> filtered, audit = subject_filter.apply(data)

    """

    def __init__(self):
        self.filters: Dict[str, Dict[str, Any]] = {}

    def repeat_cutoff(self, max_repeats: int = 5) -> None:
        """Drop subjects who wrote any one string more than `max_repeats` times."""
        if max_repeats < 1:
            raise ValueError("max_repeats must be at least 1")
        self.filters["repeat_cutoff"] = {"max_repeats": int(max_repeats)}

    def chi_squared(self, drop_n: int, method: str = POSITIONS) -> None:
        """Drop the `drop_n` subjects least consistent with a fair coin.

        Valid methods are "positions" and "cells".

        """
        if drop_n < 0:
            raise ValueError("drop_n must be nonnegative")
        if method not in (POSITIONS, CELLS):
            raise ValueError("Invalid chi-squared method '%s'" % method)
        self.filters["chi_squared"] = {"drop_n": int(drop_n), "method": method}

    def first_k(self, k: int = 25) -> None:
        """Keep each subject's first `k` strings by round."""
        if k < 1:
            raise ValueError("k must be at least 1")
        self.filters["first_k"] = {"k": int(k)}

    def apply(self, data: Dataset) -> Tuple[Dataset, Dict[str, Any]]:
        if not self.filters:
            raise ValueError("Must specify at least one filter")
        if data.problem_kind != ProblemKind.SEQUENCES:
            raise ValueError("Subject filters apply to sequence data")
        if data.subject_ids is None or data.rounds is None:
            logger.error("Subject filtering needs subject and round columns")
            raise DatasetError(
                "Subject filtering needs subject ids and round indices", "columns"
            )
        audit: Dict[str, Any] = {"rows_before": len(data), "steps": []}
        for name, params in self.filters.items():
            data, step = getattr(self, "_" + name)(data, **params)
            step.update({"filter": name, "params": dict(params)})
            audit["steps"].append(step)
        audit["rows_after"] = len(data)
        audit["subjects_after"] = len(set(data.subject_ids))
        return data, audit

    @staticmethod
    def _by_subject(data: Dataset) -> Dict[str, np.ndarray]:
        subjects = np.array([str(s) for s in data.subject_ids], dtype=object)
        return {s: np.flatnonzero(subjects == s) for s in sorted(set(subjects))}

    def _keep(self, data: Dataset, dropped: List[str], name: str) -> Dataset:
        if dropped:
            logger.warning("%s dropped %d subjects", name, len(dropped))
        keep = np.flatnonzero(
            ~np.isin(np.array([str(s) for s in data.subject_ids], dtype=object), dropped)
        )
        return data.subset(keep)

    def _repeat_cutoff(self, data: Dataset, max_repeats: int):
        strings = _strings(data)
        repeats = {}
        for subject, rows in self._by_subject(data).items():
            repeats[subject] = max(Counter(strings[i] for i in rows).values())
        dropped = [s for s, count in repeats.items() if count > max_repeats]
        return self._keep(data, dropped, "repeat_cutoff"), {
            "statistics": repeats,
            "dropped": dropped,
        }

    def _chi_squared(self, data: Dataset, drop_n: int, method: str):
        strings = _strings(data)
        p_values = {}
        for subject, rows in self._by_subject(data).items():
            stat, df = chi_squared_statistic([strings[i] for i in rows], method)
            p_values[subject] = float(stats.chi2.sf(stat, df))
        ranked = sorted(p_values, key=lambda s: (p_values[s], s))
        dropped = sorted(ranked[:drop_n])
        return self._keep(data, dropped, "chi_squared"), {
            "statistics": p_values,
            "dropped": dropped,
        }

    def _first_k(self, data: Dataset, k: int):
        keep: List[int] = []
        for _, rows in self._by_subject(data).items():
            order = rows[np.argsort(data.rounds[rows], kind="stable")]
            keep.extend(int(i) for i in order[:k])
        return data.subset(np.sort(np.array(keep))), {"dropped": []}
