"""Evaluation protocol: weekly-window accuracy grid, per-class precision and
recall, and cohort interaction statistics.

The window grid trains one logistic-regression model per (upto_week, subset)
cell.  The train/test partition is identical across cells of a run because
the stratified split depends only on the label vector, which no window
changes; that keeps the grades-vs-logs comparison unconfounded.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .balance import SmoteConfig, SmoteOrder, balance_and_split
from .errors import EmptyFeatureSetError, EmptyInputError, LengthMismatchError
from .ingest import (
    CourseCalendar,
    FeatureMatrix,
    GradeClass,
    LogEvent,
    WindowSubset,
    select_window,
)
from .linmodel import fit_logreg, predict_classes

SUBSET_ORDER = (WindowSubset.GRADES_ONLY, WindowSubset.LOGS_ONLY, WindowSubset.BOTH)


@dataclass(frozen=True)
class WindowResult:
    upto_week: int
    subset: WindowSubset
    test_accuracy: Optional[float]  # None marks the no-features cell
    n_features: int = 0
    converged: bool = True

    @property
    def no_features(self) -> bool:
        return self.test_accuracy is None


@dataclass(frozen=True)
class ClassPR:
    precision: Optional[float]  # None when the class was never predicted
    recall: Optional[float]  # None when the class is absent from the labels


@dataclass(frozen=True)
class PRTable:
    """Per-grade precision/recall for the train and test splits."""

    per_class: dict[int, dict[str, ClassPR]]  # grade -> {"train"|"test" -> ClassPR}


@dataclass(frozen=True)
class LrSettings:
    l2_lambda: float = 1e-4
    tol: float = 1e-6
    max_iters: int = 1000


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Fraction of exact label matches."""
    if len(predictions) != len(labels):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(labels)} labels"
        )
    if len(labels) == 0:
        raise EmptyInputError("accuracy over zero items")
    hits = sum(1 for p, t in zip(predictions, labels) if int(p) == int(t))
    return hits / len(labels)


def precision_recall(
    predictions: Sequence[int], labels: Sequence[int], classes: Iterable[int]
) -> dict[int, ClassPR]:
    """Per-class precision and recall; zero denominators become None."""
    if len(predictions) != len(labels):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(labels)} labels"
        )
    preds = [int(p) for p in predictions]
    labs = [int(t) for t in labels]
    out: dict[int, ClassPR] = {}
    for c in sorted(set(int(x) for x in classes)):
        tp = sum(1 for p, t in zip(preds, labs) if p == c and t == c)
        fp = sum(1 for p, t in zip(preds, labs) if p == c and t != c)
        fn = sum(1 for p, t in zip(preds, labs) if p != c and t == c)
        precision = tp / (tp + fp) if (tp + fp) > 0 else None
        recall = tp / (tp + fn) if (tp + fn) > 0 else None
        out[c] = ClassPR(precision=precision, recall=recall)
    return out


def run_weekly_windows(
    m: FeatureMatrix,
    smote_cfg: SmoteConfig,
    smote_order: SmoteOrder = "paper",
    train_fraction: float = 0.8,
    lr: LrSettings = LrSettings(),
    split_seed: int = 0,
    n_weeks: int = 9,
) -> list[WindowResult]:
    """Train and score one LR model per (week, subset) cell.

    Cells where the window has no columns yield a no-features marker rather
    than an error, mirroring the grades-only week-1 case.
    """
    results: list[WindowResult] = []
    for week in range(1, n_weeks + 1):
        for subset in SUBSET_ORDER:
            try:
                windowed = select_window(m, week, subset)
            except EmptyFeatureSetError:
                results.append(WindowResult(week, subset, None, 0))
                continue
            train, test, _ = balance_and_split(
                windowed, smote_cfg, smote_order, train_fraction, split_seed
            )
            model, report = fit_logreg(
                train, l2_lambda=lr.l2_lambda, tol=lr.tol, max_iters=lr.max_iters
            )
            acc = accuracy(predict_classes(model, test.values), list(test.labels))
            results.append(
                WindowResult(
                    week, subset, acc, windowed.n_features, converged=report.converged
                )
            )
    return results


@dataclass(frozen=True)
class AggregatedCell:
    upto_week: int
    subset: WindowSubset
    mean_accuracy: Optional[float]
    std_accuracy: Optional[float]
    n_seeds: int
    n_features: int


def aggregate_windows(
    per_seed: Sequence[Sequence[WindowResult]],
) -> list[AggregatedCell]:
    """Mean and stdev per cell over several seeded runs."""
    cells: dict[tuple[int, WindowSubset], list[WindowResult]] = {}
    for run in per_seed:
        for r in run:
            cells.setdefault((r.upto_week, r.subset), []).append(r)
    out = []
    for (week, subset), rs in sorted(
        cells.items(), key=lambda kv: (kv[0][0], SUBSET_ORDER.index(kv[0][1]))
    ):
        accs = [r.test_accuracy for r in rs if r.test_accuracy is not None]
        if not accs:
            out.append(AggregatedCell(week, subset, None, None, len(rs), 0))
        else:
            mean = sum(accs) / len(accs)
            std = statistics.pstdev(accs) if len(accs) > 1 else 0.0
            out.append(
                AggregatedCell(week, subset, mean, std, len(rs), rs[0].n_features)
            )
    return out


def window_table_csv(cells: Sequence[AggregatedCell]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["week", "subset", "accuracy", "accuracy_std", "n_features", "n_seeds"])
    for cell in cells:
        writer.writerow(
            [
                cell.upto_week,
                cell.subset.value,
                "" if cell.mean_accuracy is None else repr(round(cell.mean_accuracy, 6)),
                "" if cell.std_accuracy is None else repr(round(cell.std_accuracy, 6)),
                cell.n_features,
                cell.n_seeds,
            ]
        )
    return buf.getvalue()


def window_table_text(cells: Sequence[AggregatedCell]) -> str:
    """Aligned text grid: rows are week windows, columns the three subsets.
    The no-features cell renders as an asterisk footnote, like the usual
    presentation of this table."""
    by_cell = {(c.upto_week, c.subset): c for c in cells}
    weeks = sorted({c.upto_week for c in cells})
    lines = [f"{'Weeks':<8}{'Grades':>10}{'Logs':>10}{'Grades+Logs':>14}"]
    starred = False
    for w in weeks:
        row = [f"1 - {w}" if w > 1 else "1"]
        parts = []
        for subset in SUBSET_ORDER:
            cell = by_cell.get((w, subset))
            if cell is None or cell.mean_accuracy is None:
                parts.append("0%*")
                starred = True
            else:
                parts.append(f"{round(100 * cell.mean_accuracy)}%")
        lines.append(f"{row[0]:<8}{parts[0]:>10}{parts[1]:>10}{parts[2]:>14}")
    if starred:
        lines.append("* No grade available for this case.")
    return "\n".join(lines)


def pr_table(
    train_pairs: tuple[Sequence[int], Sequence[int]],
    test_pairs: tuple[Sequence[int], Sequence[int]],
    classes: Iterable[int],
) -> PRTable:
    classes = sorted(set(int(c) for c in classes))
    train_pr = precision_recall(train_pairs[0], train_pairs[1], classes)
    test_pr = precision_recall(test_pairs[0], test_pairs[1], classes)
    return PRTable(
        per_class={c: {"train": train_pr[c], "test": test_pr[c]} for c in classes}
    )


def pr_table_csv(table: PRTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["grade", "split", "precision", "recall"])
    for grade in sorted(table.per_class):
        for split in ("train", "test"):
            pr = table.per_class[grade][split]
            writer.writerow(
                [
                    grade,
                    split,
                    "" if pr.precision is None else repr(round(pr.precision, 6)),
                    "" if pr.recall is None else repr(round(pr.recall, 6)),
                ]
            )
    return buf.getvalue()


@dataclass(frozen=True)
class CohortSummary:
    group_mean_interactions: dict[str, Optional[float]]  # dropout/low/high
    per_grade_mean_interactions: dict[int, Optional[float]]
    weekly_mean_interactions: list[float]  # index 0 = week 1
    n_students: int
    basis: str = "events"


def cohort_summary(
    m: FeatureMatrix,
    events: Sequence[LogEvent],
    calendar: "CourseCalendar",
) -> CohortSummary:
    """Interaction statistics by achiever group and course week.

    Every logged in-window click counts as one interaction.  Students whose
    grade row is missing (label sentinel) are left out of the group means.
    """
    totals: dict[str, int] = {sid: 0 for sid in m.student_ids}
    weekly = [0.0] * calendar.n_weeks
    for e in events:
        totals[e.student_id] = totals.get(e.student_id, 0) + 1
        week = calendar.week_of(e.timestamp)
        if 1 <= week <= calendar.n_weeks:
            weekly[week - 1] += 1

    labeled = [(sid, int(lab)) for sid, lab in zip(m.student_ids, m.labels) if lab >= 0]
    group_values: dict[str, list[int]] = {"dropout": [], "low": [], "high": []}
    grade_values: dict[int, list[int]] = {}
    for sid, grade in labeled:
        total = totals.get(sid, 0)
        group_values[GradeClass.from_grade(grade).value].append(total)
        grade_values.setdefault(grade, []).append(total)
    group_means = {
        g: (sum(v) / len(v) if v else None) for g, v in group_values.items()
    }
    grade_means = {
        g: (sum(v) / len(v) if v else None) for g, v in sorted(grade_values.items())
    }
    n = max(len(m.student_ids), 1)
    weekly = [w / n for w in weekly]
    return CohortSummary(
        group_mean_interactions=group_means,
        per_grade_mean_interactions=grade_means,
        weekly_mean_interactions=weekly,
        n_students=len(m.student_ids),
    )


def summary_csv(summary: CohortSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "key", "value", "basis"])
    for group in ("dropout", "low", "high"):
        mean = summary.group_mean_interactions.get(group)
        writer.writerow(
            ["group_mean_interactions", group, "" if mean is None else repr(round(mean, 4)), summary.basis]
        )
    for grade, mean in sorted(summary.per_grade_mean_interactions.items()):
        writer.writerow(
            ["grade_mean_interactions", grade, "" if mean is None else repr(round(mean, 4)), summary.basis]
        )
    for week, mean in enumerate(summary.weekly_mean_interactions, start=1):
        writer.writerow(["weekly_mean_interactions", week, repr(round(mean, 4)), summary.basis])
    writer.writerow(["n_students", "", summary.n_students, summary.basis])
    return buf.getvalue()
