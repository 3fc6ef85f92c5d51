// Supervision view: tracked-path condition statuses for a chosen
// observation week.

import type { PathRule, StudentDetail } from "../types";
import { superviseConditions } from "../supervision";

export function renderSupervisionView(
  container: HTMLElement,
  detail: StudentDetail,
  tracked: PathRule | null,
  observedUptoWeek: number,
  onWeekChange: (week: number) => void,
): void {
  container.replaceChildren();
  const title = document.createElement("h2");
  title.textContent = `Supervision: ${detail.student_id}`;
  container.appendChild(title);

  if (!tracked) {
    const empty = document.createElement("p");
    empty.dataset.role = "empty";
    empty.textContent =
      "No tracked path yet. Adopt one from the student's strategy view first.";
    container.appendChild(empty);
    return;
  }

  const weekPicker = document.createElement("label");
  weekPicker.textContent = "Observed up to week: ";
  const input = document.createElement("input");
  input.type = "number";
  input.min = "1";
  input.max = "9";
  input.value = String(observedUptoWeek);
  input.addEventListener("change", () => onWeekChange(Number(input.value)));
  weekPicker.appendChild(input);
  container.appendChild(weekPicker);

  const goal = document.createElement("p");
  goal.textContent = `Tracked path leads to grade ${tracked.predicted_class} (support ${tracked.support}).`;
  container.appendChild(goal);

  const view = superviseConditions(tracked.conditions, detail.features, observedUptoWeek);
  const list = document.createElement("ul");
  list.className = "supervision-list";
  tracked.conditions.forEach((condition, i) => {
    const item = document.createElement("li");
    item.dataset.status = view.statuses[i];
    item.textContent = `${condition.feature} ${condition.op} ${condition.threshold.toFixed(2)} — ${view.statuses[i]}`;
    list.appendChild(item);
  });
  container.appendChild(list);

  const verdict = document.createElement("p");
  verdict.dataset.role = "verdict";
  verdict.className = view.onTrack ? "on-track" : "off-track";
  verdict.textContent = view.onTrack
    ? "Student is on track."
    : "Student is off track; consider a follow-up meeting.";
  container.appendChild(verdict);
}
