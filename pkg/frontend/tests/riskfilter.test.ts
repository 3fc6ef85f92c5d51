// Secondary acceptance: the risk filter shows exactly the rows whose
// risk_flag is true in GET /students.

import { describe, expect, it } from "vitest";

import { OlitApi } from "../src/api";
import { renderCohortTable, renderSummaryStrip } from "../src/views/cohort";
import { MockService, demoStudents, demoTree } from "./mockService";

function rowIds(container: HTMLElement): string[] {
  return [...container.querySelectorAll("tbody tr")].map(
    (row) => (row as HTMLElement).dataset.studentId!,
  );
}

describe("cohort view risk filter", () => {
  it("shows every student when the filter is off", async () => {
    const service = new MockService({ students: demoStudents(), tree: demoTree() });
    const api = new OlitApi("http://mock", service.fetch);
    const students = await api.students();
    const host = document.createElement("div");
    renderCohortTable(host, students, false, { onOpenStudent: () => {} });
    expect(rowIds(host)).toEqual(["s001", "s002", "s003", "s004"]);
  });

  it("shows exactly the risk_flag rows when the filter is on", async () => {
    const service = new MockService({ students: demoStudents(), tree: demoTree() });
    const api = new OlitApi("http://mock", service.fetch);
    const students = await api.students();
    const host = document.createElement("div");
    renderCohortTable(host, students, true, { onOpenStudent: () => {} });

    const expected = students.filter((s) => s.risk_flag).map((s) => s.student_id);
    expect(rowIds(host)).toEqual(expected);
    expect(expected).toEqual(["s002", "s004"]);
    for (const row of host.querySelectorAll("tbody tr")) {
      expect((row as HTMLElement).dataset.risk).toBe("true");
    }
  });

  it("renders the summary strip with group means and sparkline", async () => {
    const service = new MockService({ students: demoStudents(), tree: demoTree() });
    const api = new OlitApi("http://mock", service.fetch);
    const summary = await api.cohortSummary();
    const host = document.createElement("div");
    renderSummaryStrip(host, summary);
    expect(host.textContent).toContain("dropout: 92");
    expect(host.textContent).toContain("high: 450");
    expect(host.querySelector("svg.sparkline polyline")).not.toBeNull();
  });
});
