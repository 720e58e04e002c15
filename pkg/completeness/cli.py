"""Command-line interface.

    completeness evaluate --config run.cfg --data flips.csv --out results/
    completeness completeness --naive 104.17 --model 57.14 --lookup 55.45
    completeness subsample --data flips.csv --domain sequences --fractions 0.1,0.5,1
    completeness features --data flips.csv --projections heads_count,flips_4_7,full
    completeness filter_subjects --data flips.csv --method repeat_cutoff
    completeness hetero --config hetero.cfg --data ce.csv
    completeness synth --domain sequences --generator rabin_vayanos --alpha 0.2 --delta 0.5

Exit codes: 0 success, 1 other error, 2 schema error, 3 degenerate
benchmark, 4 configuration error.
"""
import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

from completeness.config import ConfigError, RunConfig, load_config
from completeness.core import CompletenessError, Dataset, ProblemKind, naive_rule
from completeness.datafiles import SchemaError, load_dataset, save_dataset
from completeness.evaluation import (
    CvResult,
    DegenerateBenchmarkError,
    build_report,
    completeness,
    completeness_flags,
    cross_validate,
    decompose,
    make_folds,
    percent,
    subsample_curve,
)
from completeness.filter import SubjectFilter
from completeness.hetero import hetero_evaluate
from completeness.lookup import constant_key, projection, spec_for
from completeness.models import model_class
from completeness.models.sequences import RvParams, UrnParams
from completeness.recorder import FileRecorder
from completeness.report import (
    audit_table,
    completeness_table,
    features_table,
    machine_report,
    render_table,
    subsample_table,
)
from completeness import synth

logger = logging.getLogger("completeness")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SCHEMA = 2
EXIT_DEGENERATE = 3
EXIT_CONFIG = 4

DEFAULT_PROJECTIONS = ("heads_count", "flips_4_7", "full")


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _names(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file values overridden by command-line flags."""
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_overrides(
        domain=args.domain,
        loss=args.loss,
        folds=args.folds,
        seed=args.seed,
        models=tuple(_names(args.models)) if args.models else None,
        out=args.out,
        data=args.data,
        threads=args.threads,
    ).validate()


def _load(cfg: RunConfig) -> Dataset:
    if not cfg.data:
        raise ConfigError("no data file given (--data or data =)")
    return load_dataset(cfg.data, cfg.problem_kind)


def _echo(cfg: RunConfig) -> Dict[str, Any]:
    # the worker count never changes results, so it stays out of the report
    echo = cfg.as_dict()
    echo.pop("threads", None)
    return echo


def _learners(cfg: RunConfig, data: Dataset):
    loss = cfg.loss_function()
    try:
        models = [
            model_class(cfg.problem_kind, name, loss, cfg.model_options())
            for name in cfg.model_names
        ]
    except ValueError as exc:
        raise ConfigError(str(exc))
    fallback = naive_rule(cfg.problem_kind, loss)
    if cfg.naive == "mean":
        naive = spec_for(data, loss, fallback, constant_key, name="naive")
    else:
        naive = fallback
    lookup = spec_for(data, loss, fallback, projection(cfg.lookup), name="lookup")
    return loss, naive, models, lookup


def _write(cfg: RunConfig, report: Dict[str, Any], table: str) -> Dict[str, Any]:
    FileRecorder(cfg.out).write_report(report, table)
    sys.stdout.write(table)
    logger.info("Report written to %s", cfg.out)
    return report


def cmd_evaluate(cfg: RunConfig) -> Dict[str, Any]:
    """Naive, each model, and Table Lookup under one fold plan."""
    data = _load(cfg)
    loss, naive, models, lookup = _learners(cfg, data)
    plan = make_folds(
        len(data),
        cfg.folds,
        cfg.seed,
        instances=data.instance_ids if cfg.stratify else None,
    )
    fit_config = cfg.fit_config()

    def run(learner, name=None):
        return cross_validate(
            learner, data, loss, plan, fit_config, cfg.threads, cfg.weighting, name
        )

    results = [run(m) for m in models]
    extras: Dict[str, Any] = {"fold_sizes": plan.fold_sizes}
    if cfg.trees_enabled:
        results.append(run(cfg.tree_config()))
        extras["trees"] = cfg.tree_config().as_dict()
    report = build_report(run(naive, "naive"), results, run(lookup, "lookup"), extras)
    return _write(
        cfg,
        machine_report("evaluate", _echo(cfg), report.to_dict()),
        completeness_table(report),
    )


def cmd_completeness(
    naive: float, model: float, lookup: float, lookup_se: Optional[float] = None
) -> Dict[str, Any]:
    """Completeness from three already-measured errors."""
    value = completeness(naive, model, lookup)
    results: Dict[str, Any] = {
        "completeness": value,
        "percent": percent(value),
        "flags": completeness_flags(value),
    }
    rows = [["completeness", "%d%%" % percent(value)]]
    if lookup_se is not None:
        parts = decompose(CvResult("lookup", (), lookup, lookup_se, ()))
        results["decomposition"] = {
            "sampling_error": parts.sampling_error,
            "irreducible_estimate": parts.irreducible_estimate,
        }
        rows.append(["lookup sampling error", "%.4f" % parts.sampling_error])
        rows.append(["irreducible error", "%.4f" % parts.irreducible_estimate])
    for flag in results["flags"]:
        logger.warning("Completeness %.4f flagged %s", value, flag)
    sys.stdout.write(render_table(["measure", "value"], rows))
    return results


def cmd_subsample(
    cfg: RunConfig, fractions: Sequence[float], iterations: int, learner: str = "lookup"
) -> Dict[str, Any]:
    data = _load(cfg)
    loss, naive, models, lookup = _learners(cfg, data)
    if learner == "lookup":
        chosen = lookup
    elif learner == "naive":
        chosen = naive
    else:
        try:
            chosen = model_class(cfg.problem_kind, learner, loss, cfg.model_options())
        except ValueError as exc:
            raise ConfigError(str(exc))
    points = subsample_curve(
        chosen,
        data,
        loss,
        fractions,
        iterations,
        cfg.seed,
        cfg.folds,
        cfg.fit_config(),
        cfg.threads,
    )
    results = {"learner": learner, "points": [p.to_dict() for p in points]}
    return _write(
        cfg, machine_report("subsample", _echo(cfg), results), subsample_table(points)
    )


def cmd_features(cfg: RunConfig, projections: Sequence[str]) -> Dict[str, Any]:
    """Compressed lookups scored against the full-feature lookup."""
    if cfg.problem_kind != ProblemKind.SEQUENCES:
        raise ConfigError("features compares sequence feature sets")
    data = _load(cfg)
    loss = cfg.loss_function()
    fallback = naive_rule(cfg.problem_kind, loss)
    specs = [spec_for(data, loss, fallback, projection(p), name=p) for p in projections]
    plan = make_folds(len(data), cfg.folds, cfg.seed)

    def run(learner, name=None):
        return cross_validate(learner, data, loss, plan, None, cfg.threads, cfg.weighting, name)

    naive = run(fallback, "naive")
    full = run(spec_for(data, loss, fallback, projection("full"), name="full"))
    results = [full if s.name == "full" else run(s) for s in specs]
    scores = {r.name: completeness(naive, r, full) for r in results}
    machine = {
        "naive": naive.to_dict(),
        "full": full.to_dict(),
        "projections": {r.name: r.to_dict() for r in results},
        "completeness": scores,
    }
    return _write(
        cfg,
        machine_report("features", _echo(cfg), machine),
        features_table([naive] + results, dict(scores, naive=0.0)),
    )


def cmd_filter_subjects(cfg: RunConfig, subject_filter: SubjectFilter) -> Dict[str, Any]:
    data = _load(cfg)
    filtered, audit = subject_filter.apply(data)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "filtered.csv")
    save_dataset(filtered, path)
    audit["output"] = path
    return _write(cfg, machine_report("filter_subjects", _echo(cfg), audit), audit_table(audit))


def cmd_hetero(cfg: RunConfig) -> Dict[str, Any]:
    if cfg.problem_kind != ProblemKind.RISK:
        raise ConfigError("hetero runs on risk data")
    data = _load(cfg)
    loss = cfg.loss_function()
    try:
        models = [
            model_class(cfg.problem_kind, name, loss, cfg.model_options())
            for name in cfg.model_names
        ]
    except ValueError as exc:
        raise ConfigError(str(exc))
    report = hetero_evaluate(
        data, cfg.hetero_plan(), models, loss, cfg.fit_config(), cfg.threads
    )
    return _write(
        cfg,
        machine_report("hetero", _echo(cfg), report.to_dict()),
        completeness_table(report),
    )


def cmd_synth(args: argparse.Namespace) -> str:
    """Generate a synthetic CSV and its metadata sidecar; returns the CSV path."""
    domain = ProblemKind(args.domain)
    if domain == ProblemKind.RISK:
        types = synth.parse_types(args.types) if args.types else synth.three_type_population()
        frame, metadata = synth.risk_frame(
            synth.RiskGenSpec(
                types=tuple(types),
                lotteries=synth.default_lotteries(args.lotteries, args.seed),
                ce_noise_sigma=args.sigma,
                n_subjects=args.subjects,
                reports_per_lottery=args.reports,
                seed=args.seed,
            )
        )
    elif domain == ProblemKind.GAMES:
        _, frame, metadata = synth.games_frame(
            synth.GameGenSpec(
                n_games=args.games,
                tau_true=args.tau,
                tremble=args.tremble,
                observations_per_game=args.observations,
                seed=args.seed,
            )
        )
    else:
        frame, metadata = synth.sequences_frame(
            synth.SeqGenSpec(
                generator=args.generator,
                rv=RvParams(args.alpha, args.delta)
                if args.generator == synth.RABIN_VAYANOS
                else None,
                urn=UrnParams(args.urn_n, args.urn_p) if args.generator == synth.URN else None,
                n_strings=args.strings,
                string_length=args.length,
                strings_per_subject=args.strings_per_subject,
                seed=args.seed,
            )
        )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "%s.csv" % domain.value)
    synth.write_synthetic(frame, metadata, path)
    sys.stdout.write(path + "\n")
    return path


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--data", help="input CSV")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--domain", choices=("risk", "games", "sequences"))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--folds", type=int)
    parser.add_argument("--loss", choices=("mse", "miscls"))
    parser.add_argument("--models", help="comma separated model names")
    parser.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="completeness",
        description="Benchmark behavioral models against naive and Table Lookup baselines.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    _common(commands.add_parser("evaluate", help="cross-validated completeness"))

    sub = commands.add_parser("completeness", help="completeness from measured errors")
    sub.add_argument("--naive", type=float, required=True)
    sub.add_argument("--model", type=float, required=True)
    sub.add_argument("--lookup", type=float, required=True)
    sub.add_argument("--lookup-se", type=float)

    sub = commands.add_parser("subsample", help="error as a function of sample size")
    _common(sub)
    sub.add_argument("--fractions", type=_floats, default=[round(0.1 * i, 2) for i in range(1, 11)])
    sub.add_argument("--iterations", type=int, default=100)
    sub.add_argument("--learner", default="lookup")

    sub = commands.add_parser("features", help="compare feature sets by lookup")
    _common(sub)
    sub.add_argument("--projections", type=_names, default=list(DEFAULT_PROJECTIONS))

    sub = commands.add_parser(
        "filter_subjects", aliases=["filter-subjects"], help="clean sequence subjects"
    )
    _common(sub)
    sub.add_argument(
        "--method", choices=("repeat_cutoff", "chi_squared", "first_k"), required=True
    )
    sub.add_argument("--max-repeats", type=int, default=5)
    sub.add_argument("--drop-n", type=int, default=0)
    sub.add_argument("--chi2-method", choices=("positions", "cells"))
    sub.add_argument("--k", type=int, default=25)

    _common(commands.add_parser("hetero", help="grouped risk completeness"))

    sub = commands.add_parser("synth", help="generate synthetic data")
    sub.add_argument("--domain", choices=("risk", "games", "sequences"), required=True)
    sub.add_argument("--out", default=".")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--types", help="alpha,beta,delta,gamma:weight;...")
    sub.add_argument("--lotteries", type=int, default=50)
    sub.add_argument("--subjects", type=int, default=50)
    sub.add_argument("--reports", type=int, default=1)
    sub.add_argument("--sigma", type=float, default=0.0)
    sub.add_argument("--games", type=int, default=100)
    sub.add_argument("--tau", type=float, default=1.5)
    sub.add_argument("--tremble", type=float, default=0.0)
    sub.add_argument("--observations", type=int, default=20)
    sub.add_argument("--generator", choices=synth.GENERATORS, default=synth.BERNOULLI_HALF)
    sub.add_argument("--alpha", type=float, default=0.2)
    sub.add_argument("--delta", type=float, default=0.5)
    sub.add_argument("--urn-n", type=int, default=10)
    sub.add_argument("--urn-p", type=float, default=0.5)
    sub.add_argument("--strings", type=int, default=1000)
    sub.add_argument("--length", type=int, default=8)
    sub.add_argument("--strings-per-subject", type=int, default=50)
    return parser


def _subject_filter(args: argparse.Namespace, cfg: RunConfig) -> SubjectFilter:
    subject_filter = SubjectFilter()
    if args.method == "repeat_cutoff":
        subject_filter.repeat_cutoff(args.max_repeats)
    elif args.method == "chi_squared":
        subject_filter.chi_squared(args.drop_n, args.chi2_method or cfg.chi2_method)
    else:
        subject_filter.first_k(args.k)
    return subject_filter


def run(args: argparse.Namespace) -> None:
    if args.command == "synth":
        cmd_synth(args)
        return
    if args.command == "completeness":
        cmd_completeness(args.naive, args.model, args.lookup, args.lookup_se)
        return
    if args.command in ("filter_subjects", "filter-subjects") and not args.domain:
        args.domain = "sequences"
    cfg = resolve_config(args)
    if args.command == "evaluate":
        cmd_evaluate(cfg)
    elif args.command == "subsample":
        cmd_subsample(cfg, args.fractions, args.iterations, args.learner)
    elif args.command == "features":
        cmd_features(cfg, args.projections)
    elif args.command == "hetero":
        cmd_hetero(cfg)
    else:
        try:
            subject_filter = _subject_filter(args, cfg)
        except ValueError as exc:
            raise ConfigError(str(exc))
        cmd_filter_subjects(cfg, subject_filter)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        run(args)
    except SchemaError as exc:
        logger.error("%s", exc)
        return EXIT_SCHEMA
    except DegenerateBenchmarkError as exc:
        logger.error("%s", exc)
        return EXIT_DEGENERATE
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except (CompletenessError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
