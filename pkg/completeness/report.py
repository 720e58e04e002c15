"""Machine reports and their aligned text tables.

Machine values are never rounded; tables show rounded renderings, with
completeness as an integer percentage.
"""
from typing import Any, Dict, List, Optional, Sequence

from completeness.__about__ import __version__
from completeness.evaluation import CompletenessReport, CvResult, SubsamplePoint, percent


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Left-aligned columns separated by two spaces."""
    widths = [len(h) for h in headers]
    for row in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()
        for line in [list(headers)] + [list(r) for r in rows]
    ]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _num(value: float) -> str:
    return "%.4f" % value


def _params(result: CvResult) -> str:
    if not result.fitted_parameters:
        return ""
    folds = []
    for params in result.fitted_parameters:
        folds.append(",".join("%s=%.4g" % (k, v) for k, v in sorted(params.items())))
    return "; ".join(folds)


def _row(result: CvResult, score: Optional[float]) -> List[str]:
    return [
        result.name,
        _num(result.mean_error),
        _num(result.std_error),
        "" if score is None else "%d%%" % percent(score),
        _params(result),
    ]


def completeness_table(report: CompletenessReport) -> str:
    rows = [_row(report.naive, 0.0)]
    for name, result in report.models.items():
        rows.append(_row(result, report.completeness[name]))
    rows.append(_row(report.lookup, 1.0))
    decomposition = report.decomposition
    table = render_table(["model", "error", "se", "completeness", "parameters"], rows)
    return table + "\nlookup sampling error %s, irreducible estimate %s\n" % (
        _num(decomposition.sampling_error),
        _num(decomposition.irreducible_estimate),
    )


def subsample_table(points: Sequence[SubsamplePoint]) -> str:
    rows = [
        ["%.2f" % p.fraction, str(p.size), _num(p.mean_error), _num(p.std_error)]
        for p in points
    ]
    return render_table(["fraction", "rows", "error", "sd"], rows)


def features_table(results: Sequence[CvResult], scores: Dict[str, float]) -> str:
    rows = [
        [r.name, _num(r.mean_error), _num(r.std_error), "%d%%" % percent(scores[r.name])]
        for r in results
    ]
    return render_table(["feature set", "error", "se", "completeness"], rows)


def audit_table(audit: Dict[str, Any]) -> str:
    rows = []
    for step in audit["steps"]:
        statistics = step.get("statistics", {})
        for subject in sorted(statistics):
            rows.append(
                [
                    step["filter"],
                    subject,
                    "%.4g" % statistics[subject],
                    "dropped" if subject in step["dropped"] else "kept",
                ]
            )
    table = render_table(["filter", "subject", "statistic", "status"], rows)
    return table + "\nrows %d -> %d\n" % (audit["rows_before"], audit["rows_after"])


def machine_report(
    command: str, config: Dict[str, Any], results: Dict[str, Any]
) -> Dict[str, Any]:
    return {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "version": __version__,
        "results": results,
    }
