"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class ConditionDto(BaseModel):
    feature: str
    op: str  # "<" or ">="
    threshold: float
    satisfied: Optional[bool] = None


class StudentRecordDto(BaseModel):
    student_id: str
    features: dict[str, float]
    predicted_grade: int
    grade_class: str  # dropout | low | high
    risk_flag: bool


class StudentDetailDto(StudentRecordDto):
    tree_path: list[ConditionDto]
    final_grade: Optional[int] = None  # known label, if the cohort file had one


class FeatureChangeDto(BaseModel):
    feature: str
    current_value: float
    required_relation: str
    required_threshold: float
    suggested_value: float


class PathRuleDto(BaseModel):
    conditions: list[ConditionDto]
    predicted_class: int
    support: int
    class_histogram: dict[str, int]
    leaf_id: int


class InterventionPlanDto(BaseModel):
    student_id: str
    current_class: int
    target_classes: list[int]
    changes: list[FeatureChangeDto]
    chosen_leaf: PathRuleDto
    n_changes: int
    l1_cost: float


class StrategyResponse(BaseModel):
    student_id: str
    target_classes: list[int]
    intervention_week: int
    plan: Optional[InterventionPlanDto]
    text: str


class WhatIfRequest(BaseModel):
    student_id: str
    overrides: dict[str, float] = Field(default_factory=dict)


class WhatIfResponse(BaseModel):
    student_id: str
    baseline_grade: int
    predicted_grade: int
    baseline_path: list[ConditionDto]
    new_path: list[ConditionDto]
    flipped_conditions: list[ConditionDto]
    overrides: dict[str, float]


class CohortSummaryResponse(BaseModel):
    basis: str
    group_mean_interactions: dict[str, Optional[float]]
    per_grade_mean_interactions: dict[str, Optional[float]]
    weekly_mean_interactions: list[float]
    n_students: int
    risk_count: int


class WindowCellDto(BaseModel):
    week: int
    subset: str
    accuracy: Optional[float]
    n_features: int
    converged: bool


class Table1Response(BaseModel):
    cells: list[WindowCellDto]


class ReloadRequest(BaseModel):
    bundle_path: Optional[str] = None
    features_path: Optional[str] = None
    logs_path: Optional[str] = None


class ReloadResponse(BaseModel):
    reloaded: bool
    n_students: int


class ErrorResponse(BaseModel):
    detail: str
