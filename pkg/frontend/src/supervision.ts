// Supervision status of a tracked path. The conditions and feature values
// both come from API responses; this module only compares them against the
// chosen observation week (no prediction happens client-side).

import type { ConditionDto, ConditionStatus } from "./types";

export function featureWeek(featureName: string): number {
  const match = /^Week(\d+) /.exec(featureName);
  return match ? Number(match[1]) : 0;
}

export function conditionHolds(condition: ConditionDto, value: number): boolean {
  return condition.op === "<" ? value < condition.threshold : value >= condition.threshold;
}

export function conditionStatus(
  condition: ConditionDto,
  features: Record<string, number>,
  observedUptoWeek: number,
): ConditionStatus {
  if (featureWeek(condition.feature) > observedUptoWeek) return "pending";
  const value = features[condition.feature] ?? 0;
  return conditionHolds(condition, value) ? "satisfied" : "violated";
}

export interface SupervisionView {
  statuses: ConditionStatus[];
  onTrack: boolean;
}

export function superviseConditions(
  conditions: ConditionDto[],
  features: Record<string, number>,
  observedUptoWeek: number,
): SupervisionView {
  const statuses = conditions.map((c) => conditionStatus(c, features, observedUptoWeek));
  return { statuses, onTrack: !statuses.includes("violated") };
}
