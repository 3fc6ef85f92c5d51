// Single-student view: prediction, decision path, rendered strategy and the
// target-grade selector. "Adopt as tracked path" hands the strategy's leaf
// to the supervision view via local storage.

import type { StrategyResponse, StudentDetail } from "../types";
import { saveTrackedPath } from "../store";

export interface StudentViewHandlers {
  onTargetsChanged: (targets: number[]) => void;
  onOpenWhatIf: () => void;
  onOpenSupervision: () => void;
}

export function renderConditionList(conditions: { feature: string; op: string; threshold: number; satisfied?: boolean | null }[]): HTMLUListElement {
  const list = document.createElement("ul");
  list.className = "condition-list";
  for (const condition of conditions) {
    const item = document.createElement("li");
    item.textContent = `${condition.feature} ${condition.op} ${condition.threshold.toFixed(2)}`;
    if (condition.satisfied === false) item.classList.add("condition-violated");
    list.appendChild(item);
  }
  return list;
}

export function renderStudentView(
  container: HTMLElement,
  detail: StudentDetail,
  strategy: StrategyResponse,
  handlers: StudentViewHandlers,
): void {
  container.replaceChildren();

  const header = document.createElement("h2");
  header.textContent = `${detail.student_id} — predicted grade ${detail.predicted_grade} (${detail.grade_class})`;
  if (detail.risk_flag) header.classList.add("risk-yes");
  container.appendChild(header);

  const path = document.createElement("section");
  const pathTitle = document.createElement("h3");
  pathTitle.textContent = "Decision path";
  path.appendChild(pathTitle);
  path.appendChild(renderConditionList(detail.tree_path));
  container.appendChild(path);

  const strategySection = document.createElement("section");
  const strategyTitle = document.createElement("h3");
  strategyTitle.textContent = `Strategy toward grade(s) ${strategy.target_classes.join(", ")}`;
  strategySection.appendChild(strategyTitle);

  const selector = document.createElement("select");
  selector.className = "target-select";
  for (const [label, targets] of [
    ["high achiever (4,5)", "4,5"],
    ["grade 3", "3"],
    ["pass (2,3,4,5)", "2,3,4,5"],
  ] as const) {
    const option = document.createElement("option");
    option.value = targets;
    option.textContent = label;
    if (targets === strategy.target_classes.join(",")) option.selected = true;
    selector.appendChild(option);
  }
  selector.addEventListener("change", () => {
    handlers.onTargetsChanged(selector.value.split(",").map(Number));
  });
  strategySection.appendChild(selector);

  const text = document.createElement("pre");
  text.className = "strategy-text";
  text.textContent = strategy.text;
  strategySection.appendChild(text);

  if (strategy.plan) {
    const adopt = document.createElement("button");
    adopt.textContent = "Adopt as tracked path";
    adopt.addEventListener("click", () => {
      saveTrackedPath(detail.student_id, strategy.plan!.chosen_leaf);
      handlers.onOpenSupervision();
    });
    strategySection.appendChild(adopt);
  }
  container.appendChild(strategySection);

  const whatIfButton = document.createElement("button");
  whatIfButton.textContent = "Open what-if exploration";
  whatIfButton.addEventListener("click", handlers.onOpenWhatIf);
  container.appendChild(whatIfButton);
}
