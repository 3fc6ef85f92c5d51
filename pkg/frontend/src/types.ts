// DTOs mirroring the service's JSON schemas. The dashboard never computes
// predictions itself; these are read-only views of API responses.

export interface ConditionDto {
  feature: string;
  op: "<" | ">=";
  threshold: number;
  satisfied: boolean | null;
}

export interface StudentRecord {
  student_id: string;
  features: Record<string, number>;
  predicted_grade: number;
  grade_class: "dropout" | "low" | "high";
  risk_flag: boolean;
}

export interface StudentDetail extends StudentRecord {
  tree_path: ConditionDto[];
  final_grade: number | null;
}

export interface FeatureChange {
  feature: string;
  current_value: number;
  required_relation: string;
  required_threshold: number;
  suggested_value: number;
}

export interface PathRule {
  conditions: ConditionDto[];
  predicted_class: number;
  support: number;
  class_histogram: Record<string, number>;
  leaf_id: number;
}

export interface InterventionPlan {
  student_id: string;
  current_class: number;
  target_classes: number[];
  changes: FeatureChange[];
  chosen_leaf: PathRule;
  n_changes: number;
  l1_cost: number;
}

export interface StrategyResponse {
  student_id: string;
  target_classes: number[];
  intervention_week: number;
  plan: InterventionPlan | null;
  text: string;
}

export interface WhatIfResponse {
  student_id: string;
  baseline_grade: number;
  predicted_grade: number;
  baseline_path: ConditionDto[];
  new_path: ConditionDto[];
  flipped_conditions: ConditionDto[];
  overrides: Record<string, number>;
}

export interface CohortSummary {
  basis: string;
  group_mean_interactions: Record<string, number | null>;
  per_grade_mean_interactions: Record<string, number | null>;
  weekly_mean_interactions: number[];
  n_students: number;
  risk_count: number;
}

export interface WindowCell {
  week: number;
  subset: string;
  accuracy: number | null;
  n_features: number;
  converged: boolean;
}

export type ConditionStatus = "satisfied" | "violated" | "pending";
