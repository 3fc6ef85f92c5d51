// What-if exploration: sliders for the features that can actually move this
// student's prediction (those tested on the current path or on the strategy
// leaf's path). Every displayed grade comes from a /whatif response.

import type { StrategyResponse, StudentDetail, WhatIfResponse } from "../types";
import { WhatIfStore, debounce } from "../store";
import { featureWeek } from "../supervision";
import { renderConditionList } from "./student";

export const WHATIF_DEBOUNCE_MS = 150;

export function sliderFeatures(detail: StudentDetail, strategy: StrategyResponse | null): string[] {
  const names = new Set<string>();
  for (const condition of detail.tree_path) names.add(condition.feature);
  if (strategy?.plan) {
    for (const condition of strategy.plan.chosen_leaf.conditions) names.add(condition.feature);
    for (const change of strategy.plan.changes) names.add(change.feature);
  }
  return [...names].sort((a, b) => featureWeek(a) - featureWeek(b) || a.localeCompare(b));
}

export function renderWhatIfView(
  container: HTMLElement,
  detail: StudentDetail,
  strategy: StrategyResponse | null,
  store: WhatIfStore,
  interventionWeek = 5,
): void {
  container.replaceChildren();

  const title = document.createElement("h2");
  title.textContent = `What-if: ${detail.student_id}`;
  container.appendChild(title);

  const badge = document.createElement("div");
  badge.className = "prediction-badge";
  badge.dataset.role = "prediction";
  badge.textContent = `predicted grade: ${detail.predicted_grade}`;
  container.appendChild(badge);

  const status = document.createElement("div");
  status.dataset.role = "status";
  status.className = "whatif-status";
  container.appendChild(status);

  const pathPane = document.createElement("section");
  pathPane.dataset.role = "path";
  container.appendChild(pathPane);

  const submitSoon = debounce(() => void store.submit(), WHATIF_DEBOUNCE_MS);

  const sliders = document.createElement("section");
  sliders.className = "sliders";
  for (const feature of sliderFeatures(detail, strategy)) {
    const row = document.createElement("label");
    row.className = "slider-row";
    const actionable = featureWeek(feature) >= interventionWeek;
    if (!actionable) row.classList.add("slider-history");

    const caption = document.createElement("span");
    caption.textContent = `${feature}${actionable ? "" : " (past)"}`;
    row.appendChild(caption);

    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "1";
    slider.step = "0.01";
    slider.name = feature;
    slider.value = String(detail.features[feature] ?? 0);
    slider.addEventListener("input", () => {
      store.setOverride(feature, Number(slider.value));
      value.textContent = Number(slider.value).toFixed(2);
      submitSoon();
    });
    row.appendChild(slider);

    const value = document.createElement("span");
    value.className = "slider-value";
    value.textContent = Number(slider.value).toFixed(2);
    row.appendChild(value);

    sliders.appendChild(row);
  }
  container.appendChild(sliders);

  store.subscribe(() => {
    applyResponse(badge, status, pathPane, store, detail);
  });
}

function applyResponse(
  badge: HTMLElement,
  status: HTMLElement,
  pathPane: HTMLElement,
  store: WhatIfStore,
  detail: StudentDetail,
): void {
  status.textContent = store.pendingRequests > 0 ? "updating…" : "";
  if (store.lastError) {
    status.textContent = `error: ${store.lastError} (retry by moving a slider)`;
    return;
  }
  const response: WhatIfResponse | null = store.current;
  if (!response) {
    badge.textContent = `predicted grade: ${detail.predicted_grade}`;
    return;
  }
  badge.textContent = `predicted grade: ${response.predicted_grade}`;
  badge.classList.toggle("prediction-changed", response.predicted_grade !== response.baseline_grade);

  pathPane.replaceChildren();
  const pathTitle = document.createElement("h3");
  pathTitle.textContent = "Path under overrides";
  pathPane.appendChild(pathTitle);
  pathPane.appendChild(renderConditionList(response.new_path));
  if (response.flipped_conditions.length > 0) {
    const flipped = document.createElement("p");
    flipped.dataset.role = "flipped";
    flipped.textContent =
      "flipped: " +
      response.flipped_conditions
        .map((c) => `${c.feature} ${c.op} ${c.threshold.toFixed(2)}`)
        .join("; ");
    pathPane.appendChild(flipped);
  }
}
