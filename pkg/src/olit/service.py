"""HTTP/JSON service over a trained bundle and an ingested cohort.

The app holds one immutable snapshot (bundle + cohort + precomputed
predictions) swapped atomically by the admin reload endpoint, so concurrent
requests always see a consistent state and never mutate anything shared.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware

from .bundle import ModelBundle, load_bundle
from .carttree import Condition, predict_leaf
from .errors import OlitError
from .experiment import cohort_summary
from .ingest import (
    FeatureMatrix,
    GradeClass,
    LogEvent,
    parse_log_csv,
    read_feature_csv,
)
from .intervene import (
    InterventionPlan,
    counterfactual_plan,
    default_glossary,
    render_strategy_text,
    week_actionable,
)
from . import schemas

ADMIN_TOKEN_ENV = "OLIT_ADMIN_TOKEN"
DEFAULT_RISK_GRADES = frozenset({0, 2})
DEFAULT_INTERVENTION_WEEK = 5


@dataclass(frozen=True)
class Snapshot:
    """Immutable service state: everything requests read."""

    bundle: ModelBundle
    cohort: FeatureMatrix  # full-width normalized matrix
    early: FeatureMatrix  # columns of the early tree, same row order
    events: Optional[list[LogEvent]]
    predictions: dict[str, int]
    risk_grades: frozenset[int]
    bundle_path: Optional[str] = None
    features_path: Optional[str] = None
    logs_path: Optional[str] = None


def build_snapshot(
    bundle: ModelBundle,
    cohort: FeatureMatrix,
    events: Optional[Sequence[LogEvent]] = None,
    risk_grades: frozenset[int] = DEFAULT_RISK_GRADES,
    **paths,
) -> Snapshot:
    early = _project(cohort, bundle.tree_early.feature_names)
    predictions = {
        sid: predict_leaf(bundle.tree_early, early.values[i]).majority_class
        for i, sid in enumerate(early.student_ids)
    }
    return Snapshot(
        bundle=bundle,
        cohort=cohort,
        early=early,
        events=list(events) if events is not None else None,
        predictions=predictions,
        risk_grades=risk_grades,
        **paths,
    )


def snapshot_from_paths(
    bundle_path: str,
    features_path: str,
    logs_path: Optional[str] = None,
    risk_grades: frozenset[int] = DEFAULT_RISK_GRADES,
) -> Snapshot:
    bundle = load_bundle(bundle_path)
    cohort = read_feature_csv(features_path)
    events = None
    if logs_path:
        events = parse_log_csv(logs_path, bundle.calendar).events
    return build_snapshot(
        bundle,
        cohort,
        events,
        risk_grades,
        bundle_path=bundle_path,
        features_path=features_path,
        logs_path=logs_path,
    )


def _project(cohort: FeatureMatrix, names: Sequence[str]) -> FeatureMatrix:
    cols = [cohort.index_of(n) for n in names]
    return FeatureMatrix(
        feature_names=tuple(names),
        values=cohort.values[:, cols].copy(),
        labels=cohort.labels.copy(),
        student_ids=cohort.student_ids,
        students_without_grades=cohort.students_without_grades,
    )


def _condition_dto(cond: Condition, value: Optional[float] = None) -> schemas.ConditionDto:
    return schemas.ConditionDto(
        feature=cond.feature_name,
        op=cond.op,
        threshold=cond.threshold,
        satisfied=None if value is None else cond.holds(value),
    )


def _plan_dto(plan: InterventionPlan) -> schemas.InterventionPlanDto:
    rule = plan.chosen_leaf
    return schemas.InterventionPlanDto(
        student_id=plan.student_id,
        current_class=plan.current_class,
        target_classes=list(plan.target_classes),
        changes=[
            schemas.FeatureChangeDto(
                feature=c.feature_name,
                current_value=c.current_value,
                required_relation=c.required_relation,
                required_threshold=c.required_threshold,
                suggested_value=c.suggested_value,
            )
            for c in plan.changes
        ],
        chosen_leaf=schemas.PathRuleDto(
            conditions=[_condition_dto(c) for c in rule.conditions],
            predicted_class=rule.predicted_class,
            support=rule.support,
            class_histogram={str(k): v for k, v in sorted(rule.class_histogram.items())},
            leaf_id=rule.leaf_id,
        ),
        n_changes=plan.n_changes,
        l1_cost=plan.l1_cost,
    )


def create_app(
    snapshot: Snapshot,
    cors_origin: str = "*",
) -> FastAPI:
    app = FastAPI(title="olit service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.snapshot = snapshot

    def current() -> Snapshot:
        return app.state.snapshot

    def _record(snap: Snapshot, sid: str) -> schemas.StudentRecordDto:
        grade = snap.predictions[sid]
        row = snap.cohort.row_of(sid)
        return schemas.StudentRecordDto(
            student_id=sid,
            features={
                name: float(v) for name, v in zip(snap.cohort.feature_names, row)
            },
            predicted_grade=grade,
            grade_class=GradeClass.from_grade(grade).value,
            risk_flag=grade in snap.risk_grades,
        )

    def _require_student(snap: Snapshot, sid: str) -> None:
        if sid not in snap.predictions:
            raise HTTPException(status_code=404, detail=f"unknown student id {sid!r}")

    @app.get("/health")
    def health():
        return {"status": "ok", "students": len(current().predictions)}

    @app.get("/students", response_model=list[schemas.StudentRecordDto])
    def list_students():
        snap = current()
        return [_record(snap, sid) for sid in snap.cohort.student_ids]

    @app.get("/students/{sid}", response_model=schemas.StudentDetailDto)
    def student_detail(sid: str):
        snap = current()
        _require_student(snap, sid)
        record = _record(snap, sid)
        early_row = snap.early.row_of(sid)
        prediction = predict_leaf(snap.bundle.tree_early, early_row)
        label = int(snap.cohort.labels[snap.cohort.student_ids.index(sid)])
        return schemas.StudentDetailDto(
            **record.model_dump(),
            tree_path=[
                _condition_dto(c, float(early_row[c.feature_index]))
                for c in prediction.conditions
            ],
            final_grade=None if label < 0 else label,
        )

    @app.get("/students/{sid}/strategy", response_model=schemas.StrategyResponse)
    def student_strategy(
        sid: str,
        target: str = Query("4,5"),
        week: int = Query(DEFAULT_INTERVENTION_WEEK, ge=1),
    ):
        snap = current()
        _require_student(snap, sid)
        try:
            targets = sorted({int(t) for t in target.split(",") if t.strip() != ""})
        except ValueError:
            raise HTTPException(status_code=400, detail=f"bad target list {target!r}")
        if not targets or any(t < 0 or t > 5 for t in targets):
            raise HTTPException(status_code=400, detail=f"targets must be grades 0..5")
        early_row = snap.early.row_of(sid)
        plan = counterfactual_plan(
            snap.bundle.tree_early,
            early_row,
            targets,
            actionable=week_actionable(week),
            student_id=sid,
        )
        glossary = default_glossary(snap.bundle.tree_early.feature_names)
        if plan is None:
            text = (
                "No feasible strategy: every path to the target grades requires "
                "changing features that are already in the past."
            )
        else:
            text = render_strategy_text(plan, glossary)
        return schemas.StrategyResponse(
            student_id=sid,
            target_classes=targets,
            intervention_week=week,
            plan=None if plan is None else _plan_dto(plan),
            text=text,
        )

    @app.post("/whatif", response_model=schemas.WhatIfResponse)
    def whatif(request: schemas.WhatIfRequest):
        snap = current()
        _require_student(snap, request.student_id)
        names = set(snap.early.feature_names)
        for name, value in request.overrides.items():
            if name not in names:
                raise HTTPException(
                    status_code=400,
                    detail=f"unknown feature {name!r} (what-if is over the early-tree features)",
                )
            if not 0.0 <= float(value) <= 1.0:
                raise HTTPException(
                    status_code=400, detail=f"value {value} for {name!r} outside [0,1]"
                )
        base_row = snap.early.row_of(request.student_id)
        new_row = base_row.copy()
        index = {n: i for i, n in enumerate(snap.early.feature_names)}
        for name, value in request.overrides.items():
            new_row[index[name]] = float(value)
        base = predict_leaf(snap.bundle.tree_early, base_row)
        new = predict_leaf(snap.bundle.tree_early, new_row)
        flipped = [
            _condition_dto(c, float(new_row[c.feature_index]))
            for c in base.conditions
            if c.holds(float(base_row[c.feature_index]))
            != c.holds(float(new_row[c.feature_index]))
        ]
        return schemas.WhatIfResponse(
            student_id=request.student_id,
            baseline_grade=base.majority_class,
            predicted_grade=new.majority_class,
            baseline_path=[
                _condition_dto(c, float(base_row[c.feature_index]))
                for c in base.conditions
            ],
            new_path=[
                _condition_dto(c, float(new_row[c.feature_index]))
                for c in new.conditions
            ],
            flipped_conditions=flipped,
            overrides={k: float(v) for k, v in request.overrides.items()},
        )

    @app.get("/cohort/summary", response_model=schemas.CohortSummaryResponse)
    def summary():
        snap = current()
        risk_count = sum(
            1 for sid in snap.cohort.student_ids
            if snap.predictions[sid] in snap.risk_grades
        )
        if snap.events is not None:
            s = cohort_summary(snap.cohort, snap.events, snap.bundle.calendar)
            basis = "events"
        else:
            s = _normalized_summary(snap)
            basis = "normalized_activity"
        return schemas.CohortSummaryResponse(
            basis=basis,
            group_mean_interactions=s.group_mean_interactions,
            per_grade_mean_interactions={
                str(k): v for k, v in s.per_grade_mean_interactions.items()
            },
            weekly_mean_interactions=s.weekly_mean_interactions,
            n_students=s.n_students,
            risk_count=risk_count,
        )

    @app.get("/experiment/table1", response_model=schemas.Table1Response)
    def table1():
        snap = current()
        if snap.bundle.window_results is None:
            raise HTTPException(
                status_code=409,
                detail="bundle has no logistic window models (trained with LR disabled)",
            )
        return schemas.Table1Response(
            cells=[
                schemas.WindowCellDto(
                    week=r.upto_week,
                    subset=r.subset.value,
                    accuracy=r.test_accuracy,
                    n_features=r.n_features,
                    converged=r.converged,
                )
                for r in snap.bundle.window_results
            ]
        )

    @app.post("/admin/reload", response_model=schemas.ReloadResponse)
    def reload(
        request: schemas.ReloadRequest,
        x_admin_token: Optional[str] = Header(default=None),
    ):
        expected = os.environ.get(ADMIN_TOKEN_ENV)
        if not expected:
            raise HTTPException(status_code=403, detail="admin reload disabled (no token configured)")
        if x_admin_token != expected:
            raise HTTPException(status_code=401, detail="bad admin token")
        snap = current()
        bundle_path = request.bundle_path or snap.bundle_path
        features_path = request.features_path or snap.features_path
        logs_path = request.logs_path or snap.logs_path
        if not bundle_path or not features_path:
            raise HTTPException(
                status_code=400, detail="service was not started from file paths"
            )
        try:
            new_snap = snapshot_from_paths(
                bundle_path, features_path, logs_path, snap.risk_grades
            )
        except OlitError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        app.state.snapshot = new_snap  # atomic swap
        return schemas.ReloadResponse(reloaded=True, n_students=new_snap.cohort.n_students)

    return app


def _normalized_summary(snap: Snapshot):
    """Summary over normalized activity fractions when raw logs are absent:
    same shape as the event-based report, unitless values."""
    from .experiment import CohortSummary

    m = snap.cohort
    activity_cols = [
        i for i, n in enumerate(m.feature_names) if n.split(" ")[1].startswith("Stat")
    ]
    weeks = snap.bundle.calendar.n_weeks
    totals = {
        sid: float(np.sum(m.values[i, activity_cols]))
        for i, sid in enumerate(m.student_ids)
    }
    group_vals: dict[str, list[float]] = {"dropout": [], "low": [], "high": []}
    grade_vals: dict[int, list[float]] = {}
    for i, sid in enumerate(m.student_ids):
        label = int(m.labels[i])
        if label < 0:
            continue
        group_vals[GradeClass.from_grade(label).value].append(totals[sid])
        grade_vals.setdefault(label, []).append(totals[sid])
    weekly = []
    for week in range(1, weeks + 1):
        cols = [
            i
            for i, n in enumerate(m.feature_names)
            if n.startswith(f"Week{week} Stat")
        ]
        weekly.append(float(np.mean(np.sum(m.values[:, cols], axis=1))) if cols else 0.0)
    return CohortSummary(
        group_mean_interactions={
            g: (sum(v) / len(v) if v else None) for g, v in group_vals.items()
        },
        per_grade_mean_interactions={
            g: (sum(v) / len(v) if v else None) for g, v in sorted(grade_vals.items())
        },
        weekly_mean_interactions=weekly,
        n_students=m.n_students,
        basis="normalized_activity",
    )
