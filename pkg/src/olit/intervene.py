"""Intervention planning on top of fitted trees.

Extracts supported decision paths, computes minimal counterfactual plans
that move a student's predicted grade into a target class by changing only
actionable features, and tracks whether a student stays on an agreed path
during the late course weeks.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .carttree import GE, LT, CartTree, Condition, Leaf, TreeNode, predict_leaf
from .errors import (
    DimensionMismatchError,
    EmptyTargetSetError,
    PathNotInTreeError,
    UnknownFeatureError,
)
from .ingest import feature_kind, feature_week

DEFAULT_MIN_SUPPORT = 3


@dataclass(frozen=True)
class PathRule:
    """Root-to-leaf conjunction, simplified to one tightest bound per
    (feature, op) pair, plus the leaf's class evidence."""

    conditions: tuple[Condition, ...]
    predicted_class: int
    support: int
    class_histogram: dict[int, int]
    leaf_id: int  # depth-first leaf index in the source tree

    def bounds(self) -> dict[int, tuple[Optional[float], Optional[float]]]:
        """Per feature index: (lower, upper) with lower inclusive (>=) and
        upper exclusive (<)."""
        out: dict[int, tuple[Optional[float], Optional[float]]] = {}
        for cond in self.conditions:
            lo, hi = out.get(cond.feature_index, (None, None))
            if cond.op == GE:
                lo = cond.threshold if lo is None else max(lo, cond.threshold)
            else:
                hi = cond.threshold if hi is None else min(hi, cond.threshold)
            out[cond.feature_index] = (lo, hi)
        return out


@dataclass(frozen=True)
class FeatureChange:
    feature_name: str
    current_value: float
    required_relation: str  # "<" or ">="
    required_threshold: float
    suggested_value: float


@dataclass(frozen=True)
class InterventionPlan:
    student_id: str
    current_class: int
    target_classes: tuple[int, ...]
    changes: tuple[FeatureChange, ...]
    chosen_leaf: PathRule
    n_changes: int
    l1_cost: float


class ConditionStatus(Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    PENDING = "pending"


@dataclass(frozen=True)
class SupervisionReport:
    student_id: str
    tracked_path: PathRule
    statuses: tuple[ConditionStatus, ...]  # aligned with tracked_path.conditions
    on_track: bool
    observed_upto_week: int
    remediation: Optional[InterventionPlan] = None


def _simplify(conditions: Sequence[Condition]) -> tuple[Condition, ...]:
    """Merge repeated conditions per feature into the tightest interval,
    keeping the first-occurrence order of each (feature, op) pair."""
    best: dict[tuple[int, str], Condition] = {}
    order: list[tuple[int, str]] = []
    for cond in conditions:
        key = (cond.feature_index, cond.op)
        if key not in best:
            best[key] = cond
            order.append(key)
        else:
            prev = best[key]
            if cond.op == GE and cond.threshold > prev.threshold:
                best[key] = cond
            elif cond.op == LT and cond.threshold < prev.threshold:
                best[key] = cond
    return tuple(best[key] for key in order)


def extract_paths(tree: CartTree, min_support: int = DEFAULT_MIN_SUPPORT) -> list[PathRule]:
    """One rule per leaf with support >= min_support, in depth-first order."""
    rules: list[PathRule] = []
    leaf_counter = [0]

    def walk(node: TreeNode, trail: list[Condition]):
        if isinstance(node, Leaf):
            leaf_id = leaf_counter[0]
            leaf_counter[0] += 1
            if node.support >= min_support:
                rules.append(
                    PathRule(
                        conditions=_simplify(trail),
                        predicted_class=node.majority_class,
                        support=node.support,
                        class_histogram=dict(node.class_histogram),
                        leaf_id=leaf_id,
                    )
                )
            return
        walk(
            node.left,
            trail + [Condition(node.feature_index, node.feature_name, LT, node.threshold)],
        )
        walk(
            node.right,
            trail + [Condition(node.feature_index, node.feature_name, GE, node.threshold)],
        )

    walk(tree.root, [])
    return rules


def _leaf_rule_for_row(tree: CartTree, row: np.ndarray) -> PathRule:
    """The (unfiltered) rule of the leaf this row currently lands in."""
    for rule in extract_paths(tree, min_support=1):
        if _row_satisfies(rule, row):
            return rule
    raise AssertionError("row must land in exactly one leaf")  # pragma: no cover


def _row_satisfies(rule: PathRule, row: np.ndarray) -> bool:
    return all(cond.holds(float(row[cond.feature_index])) for cond in rule.conditions)


def _plan_for_rule(
    rule: PathRule,
    row: np.ndarray,
    actionable: Callable[[str], bool],
    epsilon: float,
) -> Optional[list[FeatureChange]]:
    """Changes needed to satisfy the rule, or None when a non-actionable
    condition is violated (infeasible leaf)."""
    bounds = rule.bounds()
    changes: list[FeatureChange] = []
    for cond in rule.conditions:
        value = float(row[cond.feature_index])
        if cond.holds(value):
            continue
        if not actionable(cond.feature_name):
            return None
        lo, hi = bounds[cond.feature_index]
        if cond.op == GE:
            suggested = cond.threshold
        else:
            suggested = cond.threshold - epsilon
            if lo is not None:
                suggested = max(suggested, lo)
        suggested = min(max(suggested, 0.0), 1.0)
        changes.append(
            FeatureChange(
                feature_name=cond.feature_name,
                current_value=value,
                required_relation=cond.op,
                required_threshold=cond.threshold,
                suggested_value=suggested,
            )
        )
    return changes


def counterfactual_plan(
    tree: CartTree,
    student_row: np.ndarray,
    target_classes: Sequence[int],
    actionable: Callable[[str], bool] = lambda name: True,
    epsilon: float = 0.01,
    min_support: int = DEFAULT_MIN_SUPPORT,
    student_id: str = "",
) -> Optional[InterventionPlan]:
    """Minimal actionable feature changes that move the tree prediction into
    the target classes.

    A student already predicted inside the target set gets a zero-change
    plan.  Otherwise candidate leaves are those with support >= min_support
    and majority class in the targets; a leaf is feasible only when every
    violated condition is actionable.  The winner minimizes (number of
    changes, total L1 change, leftmost leaf).
    """
    row = np.asarray(student_row, dtype=float)
    if row.shape != (len(tree.feature_names),):
        raise DimensionMismatchError(len(tree.feature_names), row.shape[-1] if row.ndim else 0)
    targets = tuple(sorted(set(int(c) for c in target_classes)))
    if not targets:
        raise EmptyTargetSetError("target class set is empty")

    current = predict_leaf(tree, row)
    if current.majority_class in targets:
        return InterventionPlan(
            student_id=student_id,
            current_class=current.majority_class,
            target_classes=targets,
            changes=(),
            chosen_leaf=_leaf_rule_for_row(tree, row),
            n_changes=0,
            l1_cost=0.0,
        )

    best: Optional[tuple[int, float, int, PathRule, list[FeatureChange]]] = None
    for rule in extract_paths(tree, min_support):
        if rule.predicted_class not in targets:
            continue
        changes = _plan_for_rule(rule, row, actionable, epsilon)
        if changes is None:
            continue
        l1 = sum(abs(c.suggested_value - c.current_value) for c in changes)
        key = (len(changes), l1, rule.leaf_id)
        if best is None or key < (best[0], best[1], best[2]):
            best = (len(changes), l1, rule.leaf_id, rule, changes)
    if best is None:
        return None
    _, l1, _, rule, changes = best
    return InterventionPlan(
        student_id=student_id,
        current_class=current.majority_class,
        target_classes=targets,
        changes=tuple(changes),
        chosen_leaf=rule,
        n_changes=len(changes),
        l1_cost=l1,
    )


def apply_plan(row: np.ndarray, plan: InterventionPlan, feature_names: Sequence[str]) -> np.ndarray:
    """Return a copy of the row with the plan's suggested values applied."""
    out = np.asarray(row, dtype=float).copy()
    index = {name: i for i, name in enumerate(feature_names)}
    for change in plan.changes:
        out[index[change.feature_name]] = change.suggested_value
    return out


def _feature_week_or_zero(name: str) -> int:
    try:
        return feature_week(name)
    except ValueError:
        return 0


def week_actionable(intervention_week: int) -> Callable[[str], bool]:
    """Default actionability: features from the intervention week onward can
    still be changed; earlier weeks are history."""

    def predicate(feature_name: str) -> bool:
        return _feature_week_or_zero(feature_name) >= intervention_week

    return predicate


def supervision_report(
    tree_late: CartTree,
    tracked_path: PathRule,
    partial_row: np.ndarray,
    observed_upto_week: int,
    student_id: str = "",
) -> SupervisionReport:
    """Label each tracked condition Satisfied/Violated/Pending given data up
    to the observation week; suggests a recovery plan on the first violation.
    """
    row = np.asarray(partial_row, dtype=float)
    if row.shape != (len(tree_late.feature_names),):
        raise DimensionMismatchError(len(tree_late.feature_names), row.shape[-1] if row.ndim else 0)
    all_rules = {r.leaf_id: r for r in extract_paths(tree_late, min_support=1)}
    known = all_rules.get(tracked_path.leaf_id)
    if known is None or known.conditions != tracked_path.conditions:
        raise PathNotInTreeError("tracked path does not match any leaf of the tree")

    statuses: list[ConditionStatus] = []
    violated = False
    for cond in tracked_path.conditions:
        week = _feature_week_or_zero(cond.feature_name)
        if week > observed_upto_week:
            statuses.append(ConditionStatus.PENDING)
        elif cond.holds(float(row[cond.feature_index])):
            statuses.append(ConditionStatus.SATISFIED)
        else:
            statuses.append(ConditionStatus.VIOLATED)
            violated = True

    remediation = None
    if violated:
        remediation = counterfactual_plan(
            tree_late,
            row,
            [tracked_path.predicted_class],
            actionable=lambda name: _feature_week_or_zero(name) > observed_upto_week,
            min_support=DEFAULT_MIN_SUPPORT,
            student_id=student_id,
        )
    return SupervisionReport(
        student_id=student_id,
        tracked_path=tracked_path,
        statuses=tuple(statuses),
        on_track=not violated,
        observed_upto_week=observed_upto_week,
        remediation=remediation,
    )


_STAT_DESCRIPTIONS = {
    0: "course content",
    1: "assignment activity",
    2: "grade review activity",
    3: "forum activity",
}


def default_glossary(feature_names: Sequence[str]) -> dict[str, str]:
    """Readable pedagogy phrases for the standard feature naming scheme."""
    glossary: dict[str, str] = {}
    for name in feature_names:
        try:
            week = feature_week(name)
            kind = feature_kind(name)
        except ValueError:
            continue
        if kind == "Stat":
            stat = int(name[-1])
            glossary[name] = f"interaction with week-{week} {_STAT_DESCRIPTIONS[stat]}"
        elif kind == "MP":
            glossary[name] = f"mini project {name.split('MP')[-1]} grade (due week {week})"
        elif kind == "Quiz":
            glossary[name] = f"quiz {name.split('Quiz')[-1]} grade (due week {week})"
        else:
            glossary[name] = f"peer review {name.split('PR')[-1]} grade (due week {week})"
    return glossary


def render_strategy_text(
    plan: InterventionPlan, glossary: Mapping[str, str]
) -> str:
    """Deterministic plain-text strategy: one bullet per change, ordered by
    course week then feature name."""
    if plan.n_changes == 0:
        return "Student is on track for target grade."
    for change in plan.changes:
        if change.feature_name not in glossary:
            raise UnknownFeatureError(change.feature_name)
    ordered = sorted(
        plan.changes,
        key=lambda c: (_feature_week_or_zero(c.feature_name), c.feature_name),
    )
    targets = ", ".join(str(t) for t in plan.target_classes)
    lines = [
        f"Strategy toward grade(s) {targets} "
        f"(currently predicted {plan.current_class}):"
    ]
    for change in ordered:
        meaning = glossary[change.feature_name]
        if change.required_relation == GE:
            move = (
                f"raise {meaning} from {change.current_value:.2f} to at least "
                f"{change.required_threshold:.2f}"
            )
        else:
            move = (
                f"bring {meaning} from {change.current_value:.2f} down below "
                f"{change.required_threshold:.2f} (suggested {change.suggested_value:.2f})"
            )
        lines.append(f"- {move} [{change.feature_name}]")
    return "\n".join(lines)
