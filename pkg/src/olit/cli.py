"""Command-line entry point.

One executable, subcommand per pipeline stage; stages communicate through
files so each is independently inspectable.  Exit codes: 0 success, 1 usage
error, 2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

from .balance import SmoteConfig
from .bundle import BUNDLE_SUFFIX, load_bundle, save_bundle, write_text_atomic
from .carttree import CartConfig, predict_leaf, to_dot
from .cohortgen import GeneratorConfig, generate_cohort, summarize_manifest
from .errors import OlitError, UnknownStudentError
from .experiment import (
    LrSettings,
    aggregate_windows,
    cohort_summary,
    pr_table,
    pr_table_csv,
    run_weekly_windows,
    summary_csv,
    window_table_csv,
    window_table_text,
)
from .ingest import (
    CourseCalendar,
    GradeClass,
    assemble_features,
    bin_by_week,
    feature_csv_text,
    load_column_map,
    normalize_features,
    parse_grades_csv,
    parse_log_csv,
    read_feature_csv,
)
from .intervene import counterfactual_plan, default_glossary, render_strategy_text, week_actionable
from .training import TrainSettings, train_bundle, drop_ungraded, EARLY_WINDOW
from . import service as service_module

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through our exit-code scheme."""

    def error(self, message):
        raise UsageError(message)


def _load_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _resolve(args: argparse.Namespace, config: dict[str, str], defaults: dict) -> None:
    """Precedence: explicit flag > config file > built-in default."""
    for dest, default in defaults.items():
        if getattr(args, dest, None) is not None:
            continue
        if dest in config:
            raw = config[dest]
            caster = type(default) if default is not None else str
            if caster is bool:
                value = raw.lower() in ("1", "true", "yes", "on")
            elif caster in (int, float):
                value = caster(raw)
            else:
                value = raw
            setattr(args, dest, value)
        else:
            setattr(args, dest, default)


def _parse_calendar_file(path: str) -> CourseCalendar:
    kv: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        kv[key.strip()] = value.strip()
    if "course_start" not in kv:
        raise UsageError(f"{path}: calendar file must define course_start=YYYY-MM-DD")

    def weeks(key: str, default: tuple[int, ...]) -> tuple[int, ...]:
        if key not in kv:
            return default
        return tuple(int(w) for w in kv[key].split(",") if w.strip())

    return CourseCalendar(
        course_start=date.fromisoformat(kv["course_start"]),
        n_weeks=int(kv.get("n_weeks", 9)),
        mp_deadline_weeks=weeks("mp_deadline_weeks", (3, 5, 8)),
        quiz_deadline_weeks=weeks("quiz_deadline_weeks", (2, 4, 8)),
        pr_deadline_weeks=weeks("pr_deadline_weeks", (3, 5, 8)),
    )


def _calendar_file_text(calendar: CourseCalendar) -> str:
    return (
        f"course_start={calendar.course_start.isoformat()}\n"
        f"n_weeks={calendar.n_weeks}\n"
        f"mp_deadline_weeks={','.join(map(str, calendar.mp_deadline_weeks))}\n"
        f"quiz_deadline_weeks={','.join(map(str, calendar.quiz_deadline_weeks))}\n"
        f"pr_deadline_weeks={','.join(map(str, calendar.pr_deadline_weeks))}\n"
    )


def _sidecar_path(features_path: str) -> Path:
    return Path(str(features_path) + ".meta.json")


def _read_sidecar(features_path: str) -> Optional[dict]:
    side = _sidecar_path(features_path)
    if not side.exists():
        return None
    return json.loads(side.read_text(encoding="utf-8"))


# ---------------------------------------------------------------- generate

def _cmd_generate(args) -> int:
    cfg = GeneratorConfig(
        n_students=args.n, seed=args.seed, rule_strength=args.rule_strength
    )
    art = generate_cohort(cfg)
    out = Path(args.out)
    write_text_atomic(out / "logs.csv", art.logs_csv)
    write_text_atomic(out / "grades.csv", art.grades_csv)
    write_text_atomic(out / "manifest.json", json.dumps(art.manifest, indent=2) + "\n")
    write_text_atomic(out / "calendar.txt", _calendar_file_text(cfg.calendar))
    report = summarize_manifest(art.manifest)
    print(f"generated {cfg.n_students} students into {out}")
    for flag in report.flags:
        print(f"calibration warning: {flag}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------------ ingest

def _cmd_ingest(args) -> int:
    calendar = _parse_calendar_file(args.calendar)
    column_map = load_column_map(args.log_map) if args.log_map else None
    parsed = parse_log_csv(args.logs, calendar, column_map)
    weekly = bin_by_week(parsed.events, calendar)
    grades = parse_grades_csv(args.grades)
    matrix = normalize_features(assemble_features(weekly, grades, calendar))
    write_text_atomic(args.out, feature_csv_text(matrix))
    sidecar = {
        "calendar": {
            "course_start": calendar.course_start.isoformat(),
            "n_weeks": calendar.n_weeks,
            "mp_deadline_weeks": list(calendar.mp_deadline_weeks),
            "quiz_deadline_weeks": list(calendar.quiz_deadline_weeks),
            "pr_deadline_weeks": list(calendar.pr_deadline_weeks),
        },
        "normalization_maxima": dict(zip(matrix.feature_names, matrix.activity_maxima)),
        "students_without_grades": sorted(matrix.students_without_grades),
        "dropped_out_of_window": parsed.dropped_out_of_window,
    }
    write_text_atomic(_sidecar_path(args.out), json.dumps(sidecar, indent=2) + "\n")
    print(
        f"ingested {len(parsed.events)} events for {matrix.n_students} students "
        f"({parsed.dropped_out_of_window} out-of-window rows dropped) -> {args.out}"
    )
    if matrix.students_without_grades:
        print(
            f"warning: {len(matrix.students_without_grades)} student(s) have logs "
            f"but no grade row",
            file=sys.stderr,
        )
    return EXIT_OK


# ------------------------------------------------------------------- train

def _calendar_from_sidecar_or_features(args, matrix) -> CourseCalendar:
    if getattr(args, "calendar", None):
        return _parse_calendar_file(args.calendar)
    sidecar = _read_sidecar(args.features)
    if sidecar and "calendar" in sidecar:
        cal = sidecar["calendar"]
        return CourseCalendar(
            course_start=date.fromisoformat(cal["course_start"]),
            n_weeks=int(cal["n_weeks"]),
            mp_deadline_weeks=tuple(cal["mp_deadline_weeks"]),
            quiz_deadline_weeks=tuple(cal["quiz_deadline_weeks"]),
            pr_deadline_weeks=tuple(cal["pr_deadline_weeks"]),
        )
    # reconstructable except for the start date; epoch keeps week math valid
    from .ingest import feature_week, feature_kind

    n_weeks = max(feature_week(n) for n in matrix.feature_names)
    deadlines = {"MP": set(), "Quiz": set(), "PR": set()}
    for name in matrix.feature_names:
        kind = feature_kind(name)
        if kind != "Stat":
            deadlines[kind].add(feature_week(name))
    print(
        "warning: no calendar metadata found; using a placeholder course start",
        file=sys.stderr,
    )
    return CourseCalendar(
        course_start=date(1970, 1, 5),
        n_weeks=n_weeks,
        mp_deadline_weeks=tuple(sorted(deadlines["MP"])),
        quiz_deadline_weeks=tuple(sorted(deadlines["Quiz"])),
        pr_deadline_weeks=tuple(sorted(deadlines["PR"])),
    )


def _cmd_train(args) -> int:
    matrix = read_feature_csv(args.features)
    calendar = _calendar_from_sidecar_or_features(args, matrix)
    sidecar = _read_sidecar(args.features)
    maxima = sidecar.get("normalization_maxima") if sidecar else None
    settings = TrainSettings(
        seed=args.seed,
        smote_order=args.smote_order,
        smote_k=args.smote_k,
        train_fraction=args.train_fraction,
        cart=CartConfig(max_depth=args.max_depth),
        lr=LrSettings(l2_lambda=args.l2_lambda, tol=args.tol, max_iters=args.max_iters),
        include_lr=not args.no_lr,
    )
    result = train_bundle(matrix, calendar, settings, maxima)
    save_bundle(result.bundle, args.out)
    print(
        f"early tree (weeks {EARLY_WINDOW[0]}-{EARLY_WINDOW[1]}): "
        f"train acc {result.early.train_accuracy:.3f}, "
        f"test acc {result.early.test_accuracy:.3f} "
        f"({result.early.n_features} features)"
    )
    print(
        f"late tree: train acc {result.late.train_accuracy:.3f}, "
        f"test acc {result.late.test_accuracy:.3f} "
        f"({result.late.n_features} features)"
    )
    if result.lr_total is not None:
        print(f"logistic windows: {result.lr_converged}/{result.lr_total} cells converged")
        for r in result.bundle.window_results:
            acc = "n/a (no features)" if r.no_features else f"{r.test_accuracy:.3f}"
            print(
                f"  week {r.upto_week} {r.subset.value:<6} test acc {acc}"
                + ("" if r.converged else "  [not converged]")
            )
    print(f"bundle -> {args.out}")
    if not str(args.out).endswith(BUNDLE_SUFFIX):
        print(f"note: bundle files conventionally end in {BUNDLE_SUFFIX}", file=sys.stderr)
    if args.dot_dir:
        dot = Path(args.dot_dir)
        write_text_atomic(dot / "tree_early.dot", to_dot(result.bundle.tree_early, "early"))
        write_text_atomic(dot / "tree_late.dot", to_dot(result.bundle.tree_late, "late"))
    return EXIT_OK


# ---------------------------------------------------------------- evaluate

def _cmd_evaluate(args) -> int:
    bundle = load_bundle(args.bundle)
    matrix = drop_ungraded(read_feature_csv(args.features))
    out = Path(args.out)
    settings = bundle.metadata.get("settings", {})
    seed = int(settings.get("seed", 42))
    smote_order = settings.get("smote_order", "paper")
    smote_k = int(settings.get("smote_k", 5))
    train_fraction = float(settings.get("train_fraction", 0.8))
    lr_cfg = settings.get("lr", {})
    lr = LrSettings(
        l2_lambda=float(lr_cfg.get("l2_lambda", 1e-4)),
        tol=float(lr_cfg.get("tol", 1e-6)),
        max_iters=int(lr_cfg.get("max_iters", 1000)),
    )

    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [seed]
    runs = [
        run_weekly_windows(
            matrix,
            SmoteConfig(k_neighbors=smote_k, seed=s),
            smote_order,
            train_fraction,
            lr,
            split_seed=s,
            n_weeks=bundle.calendar.n_weeks,
        )
        for s in seeds
    ]
    cells = aggregate_windows(runs)
    write_text_atomic(out / "table1.csv", window_table_csv(cells))
    print(window_table_text(cells))

    # per-grade precision/recall of the early tree on the same split it was
    # trained with (reconstructed from bundle metadata)
    from .balance import balance_and_split
    from .ingest import select_window, WindowSubset

    early = select_window(
        matrix,
        upto_week=int(settings.get("early_window", [1, 5])[1]),
        subset=WindowSubset.BOTH,
        from_week=int(settings.get("early_window", [1, 5])[0]),
    )
    train, test, _ = balance_and_split(
        early,
        SmoteConfig(k_neighbors=smote_k, seed=seed),
        smote_order,
        train_fraction,
        split_seed=seed,
    )
    train_pred = [predict_leaf(bundle.tree_early, r).majority_class for r in train.values]
    test_pred = [predict_leaf(bundle.tree_early, r).majority_class for r in test.values]
    table2 = pr_table(
        (train_pred, list(train.labels)), (test_pred, list(test.labels)), bundle.classes
    )
    write_text_atomic(out / "table2.csv", pr_table_csv(table2))

    if args.logs:
        events = parse_log_csv(args.logs, bundle.calendar).events
        summary = cohort_summary(matrix, events, bundle.calendar)
    else:
        snap = service_module.build_snapshot(bundle, matrix)
        summary = service_module._normalized_summary(snap)
        print(
            "note: no --logs given; summary.csv uses normalized activity units",
            file=sys.stderr,
        )
    write_text_atomic(out / "summary.csv", summary_csv(summary))
    print(f"wrote table1.csv, table2.csv, summary.csv -> {out}")
    return EXIT_OK


# ----------------------------------------------------------------- predict

def _cmd_predict(args) -> int:
    bundle = load_bundle(args.bundle)
    matrix = read_feature_csv(args.features)
    snap = service_module.build_snapshot(bundle, matrix)
    ids = list(matrix.student_ids)
    if args.student is not None:
        if args.student not in snap.predictions:
            raise UnknownStudentError(args.student)
        ids = [args.student]
    print("student_id,predicted_grade,grade_class,risk_flag")
    for sid in ids:
        grade = snap.predictions[sid]
        klass = GradeClass.from_grade(grade).value
        risk = grade in snap.risk_grades
        print(f"{sid},{grade},{klass},{str(risk).lower()}")
    return EXIT_OK


# ---------------------------------------------------------------- strategy

def _cmd_strategy(args) -> int:
    bundle = load_bundle(args.bundle)
    matrix = read_feature_csv(args.features)
    snap = service_module.build_snapshot(bundle, matrix)
    if args.student not in snap.predictions:
        raise UnknownStudentError(args.student)
    try:
        targets = sorted({int(t) for t in args.target.split(",") if t.strip()})
    except ValueError:
        raise UsageError(f"bad --target list {args.target!r}")
    if not targets:
        raise UsageError("--target must list at least one grade")
    row = snap.early.row_of(args.student)
    plan = counterfactual_plan(
        bundle.tree_early,
        row,
        targets,
        actionable=week_actionable(args.week),
        student_id=args.student,
    )
    if plan is None:
        payload = {
            "student_id": args.student,
            "target_classes": targets,
            "plan": None,
        }
        text = "No feasible strategy for the requested targets."
    else:
        payload = {
            "student_id": plan.student_id,
            "current_class": plan.current_class,
            "target_classes": list(plan.target_classes),
            "n_changes": plan.n_changes,
            "l1_cost": plan.l1_cost,
            "changes": [
                {
                    "feature": c.feature_name,
                    "current_value": c.current_value,
                    "required_relation": c.required_relation,
                    "required_threshold": c.required_threshold,
                    "suggested_value": c.suggested_value,
                }
                for c in plan.changes
            ],
        }
        text = render_strategy_text(plan, default_glossary(bundle.tree_early.feature_names))
    print(json.dumps(payload, indent=2))
    print(text)
    if args.out:
        write_text_atomic(args.out, json.dumps(payload, indent=2) + "\n" + text + "\n")
    return EXIT_OK


# ------------------------------------------------------------------- serve

def _cmd_serve(args) -> int:
    snapshot = service_module.snapshot_from_paths(
        args.bundle, args.features, args.logs
    )
    app = service_module.create_app(snapshot, cors_origin=args.cors_origin)
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> _Parser:
    parser = _Parser(prog="olit", description=__doc__)
    parser.add_argument(
        "--config", help="key=value file supplying defaults for any flag", default=None
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic cohort (logs, grades, manifest)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=None, help="number of students (default 107)")
    p.add_argument("--seed", type=int, default=None, help="generator seed (default 42)")
    p.add_argument(
        "--rule-strength",
        dest="rule_strength",
        type=float,
        default=None,
        help="probability a student's grade follows the embedded rules (default 0.9)",
    )
    p.set_defaults(func=_cmd_generate, defaults={"n": 107, "seed": 42, "rule_strength": 0.9})

    p = sub.add_parser("ingest", help="parse logs+grades CSVs into a feature matrix CSV")
    p.add_argument("--logs", required=True, help="activity log CSV")
    p.add_argument("--grades", required=True, help="grade-book CSV")
    p.add_argument("--calendar", required=True, help="calendar key=value file")
    p.add_argument("--out", required=True, help="feature matrix CSV to write")
    p.add_argument(
        "--log-map",
        dest="log_map",
        default=None,
        help="column-mapping key=value file for non-canonical log exports",
    )
    p.set_defaults(func=_cmd_ingest, defaults={})

    p = sub.add_parser("train", help="train window LR models and both trees into a bundle")
    p.add_argument("--features", required=True, help="feature matrix CSV")
    p.add_argument("--out", required=True, help=f"bundle path (use {BUNDLE_SUFFIX})")
    p.add_argument("--calendar", default=None, help="calendar file (else sidecar metadata)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument(
        "--smote-order",
        dest="smote_order",
        choices=["paper", "train-only"],
        default=None,
        help="oversample before or after the split (default paper)",
    )
    p.add_argument("--smote-k", dest="smote_k", type=int, default=None)
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    p.add_argument("--max-depth", dest="max_depth", type=int, default=None)
    p.add_argument("--l2-lambda", dest="l2_lambda", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p.add_argument("--no-lr", dest="no_lr", action="store_true", default=None,
                   help="skip the 27 logistic window models")
    p.add_argument("--dot-dir", dest="dot_dir", default=None,
                   help="also export Graphviz DOT renderings of both trees")
    p.set_defaults(
        func=_cmd_train,
        defaults={
            "seed": 42,
            "smote_order": "paper",
            "smote_k": 5,
            "train_fraction": 0.8,
            "max_depth": 5,
            "l2_lambda": 1e-4,
            "tol": 1e-6,
            "max_iters": 1000,
            "no_lr": False,
            "dot_dir": None,
        },
    )

    p = sub.add_parser("evaluate", help="write table1.csv, table2.csv, summary.csv")
    p.add_argument("--features", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", default=None, help="comma list for multi-seed table1")
    p.add_argument("--logs", default=None, help="log CSV for event-based summary stats")
    p.set_defaults(func=_cmd_evaluate, defaults={"seeds": None, "logs": None})

    p = sub.add_parser("predict", help="predict grades for all students or one")
    p.add_argument("--bundle", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--student", default=None, help="restrict to one student id")
    p.set_defaults(func=_cmd_predict, defaults={})

    p = sub.add_parser("strategy", help="intervention plan JSON + rendered text")
    p.add_argument("--bundle", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--student", required=True)
    p.add_argument("--target", default=None, help="comma list of target grades (default 4,5)")
    p.add_argument("--week", type=int, default=None,
                   help="intervention week; earlier features are history (default 5)")
    p.add_argument("--out", default=None, help="also write the plan to a file")
    p.set_defaults(func=_cmd_strategy, defaults={"target": "4,5", "week": 5, "out": None})

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--bundle", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--logs", default=None, help="optional log CSV for event-based summary")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--cors-origin", dest="cors_origin", default=None)
    p.set_defaults(
        func=_cmd_serve,
        defaults={"port": 8080, "host": "127.0.0.1", "cors_origin": "*", "logs": None},
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config_file(args.config) if args.config else {}
        _resolve(args, config, getattr(args, "defaults", {}))
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OlitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - invariant violations
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
