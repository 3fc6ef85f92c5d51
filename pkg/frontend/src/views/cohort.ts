// Cohort table with risk filter and the summary strip.

import type { CohortSummary, StudentRecord } from "../types";

export interface CohortViewOptions {
  onOpenStudent: (studentId: string) => void;
}

function gradeBadge(grade: number, gradeClass: string): HTMLElement {
  const badge = document.createElement("span");
  badge.className = `badge badge-${gradeClass}`;
  badge.textContent = String(grade);
  return badge;
}

export function sparklineSvg(values: number[], width = 160, height = 36): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "sparkline");
  const max = Math.max(...values, 1e-9);
  const step = width / Math.max(values.length - 1, 1);
  const points = values
    .map((v, i) => `${(i * step).toFixed(1)},${(height - (v / max) * (height - 4) - 2).toFixed(1)}`)
    .join(" ");
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "currentColor");
  line.setAttribute("stroke-width", "1.5");
  svg.appendChild(line);
  return svg;
}

export function renderSummaryStrip(container: HTMLElement, summary: CohortSummary): void {
  container.replaceChildren();
  container.className = "summary-strip";
  const groups = document.createElement("div");
  for (const group of ["dropout", "low", "high"] as const) {
    const mean = summary.group_mean_interactions[group];
    const item = document.createElement("span");
    item.className = "summary-item";
    item.textContent = `${group}: ${mean === null || mean === undefined ? "n/a" : mean.toFixed(0)}`;
    groups.appendChild(item);
  }
  const label = document.createElement("span");
  label.className = "summary-label";
  label.textContent = `mean interactions (${summary.basis}), ${summary.n_students} students, ${summary.risk_count} at risk — weekly:`;
  container.appendChild(label);
  container.appendChild(groups);
  container.appendChild(sparklineSvg(summary.weekly_mean_interactions));
}

export function renderCohortTable(
  container: HTMLElement,
  students: StudentRecord[],
  riskOnly: boolean,
  options: CohortViewOptions,
): void {
  container.replaceChildren();
  const table = document.createElement("table");
  table.className = "cohort-table";
  const head = table.createTHead().insertRow();
  for (const title of ["Student", "Predicted grade", "Group", "Risk"]) {
    const cell = document.createElement("th");
    cell.textContent = title;
    head.appendChild(cell);
  }
  const body = table.createTBody();
  const visible = riskOnly ? students.filter((s) => s.risk_flag) : students;
  for (const student of visible) {
    const row = body.insertRow();
    row.dataset.studentId = student.student_id;
    row.dataset.risk = String(student.risk_flag);
    const idCell = row.insertCell();
    const link = document.createElement("a");
    link.href = `#/student/${student.student_id}`;
    link.textContent = student.student_id;
    link.addEventListener("click", (event) => {
      event.preventDefault();
      options.onOpenStudent(student.student_id);
    });
    idCell.appendChild(link);
    row.insertCell().appendChild(gradeBadge(student.predicted_grade, student.grade_class));
    row.insertCell().textContent = student.grade_class;
    const risk = row.insertCell();
    risk.textContent = student.risk_flag ? "⚠ at risk" : "";
    risk.className = student.risk_flag ? "risk-yes" : "risk-no";
  }
  container.appendChild(table);
}
