// Single-page wiring: hash routing, data loading and non-blocking error
// banners with retry.

import { ApiError, OlitApi, defaultBaseUrl } from "./api";
import { WhatIfStore, loadTrackedPath } from "./store";
import { renderCohortTable, renderSummaryStrip } from "./views/cohort";
import { renderStudentView } from "./views/student";
import { renderSupervisionView } from "./views/supervision";
import { renderWhatIfView } from "./views/whatif";

const api = new OlitApi(defaultBaseUrl());

const app = document.getElementById("app") as HTMLElement;
const banner = document.getElementById("banner") as HTMLElement;

let riskOnly = false;
let observedWeek = 6;
let currentTargets: number[] = [4, 5];

function showError(message: string, retry: () => void): void {
  banner.replaceChildren();
  banner.className = "banner banner-error";
  const text = document.createElement("span");
  text.textContent = message;
  banner.appendChild(text);
  const button = document.createElement("button");
  button.textContent = "Retry";
  button.addEventListener("click", () => {
    banner.replaceChildren();
    banner.className = "banner";
    retry();
  });
  banner.appendChild(button);
}

function clearBanner(): void {
  banner.replaceChildren();
  banner.className = "banner";
}

async function showCohort(): Promise<void> {
  app.replaceChildren();
  const strip = document.createElement("div");
  const controls = document.createElement("div");
  controls.className = "controls";
  const toggle = document.createElement("label");
  const checkbox = document.createElement("input");
  checkbox.type = "checkbox";
  checkbox.checked = riskOnly;
  checkbox.addEventListener("change", () => {
    riskOnly = checkbox.checked;
    void showCohort();
  });
  toggle.appendChild(checkbox);
  toggle.appendChild(document.createTextNode(" show only at-risk students"));
  controls.appendChild(toggle);
  const tableHost = document.createElement("div");
  app.append(strip, controls, tableHost);

  try {
    const [students, summary] = await Promise.all([api.students(), api.cohortSummary()]);
    clearBanner();
    renderSummaryStrip(strip, summary);
    renderCohortTable(tableHost, students, riskOnly, {
      onOpenStudent: (id) => {
        window.location.hash = `#/student/${id}`;
      },
    });
  } catch (error) {
    showError(describe(error), () => void showCohort());
  }
}

async function showStudent(id: string): Promise<void> {
  app.replaceChildren();
  try {
    const [detail, strategy] = await Promise.all([
      api.student(id),
      api.strategy(id, currentTargets),
    ]);
    clearBanner();
    renderStudentView(app, detail, strategy, {
      onTargetsChanged: (targets) => {
        currentTargets = targets;
        void showStudent(id);
      },
      onOpenWhatIf: () => {
        window.location.hash = `#/whatif/${id}`;
      },
      onOpenSupervision: () => {
        window.location.hash = `#/supervision/${id}`;
      },
    });
  } catch (error) {
    showError(describe(error), () => void showStudent(id));
  }
}

async function showWhatIf(id: string): Promise<void> {
  app.replaceChildren();
  try {
    const detail = await api.student(id);
    let strategy = null;
    try {
      strategy = await api.strategy(id, currentTargets);
    } catch {
      // strategy is optional for the what-if surface
    }
    clearBanner();
    const store = new WhatIfStore(api, id);
    renderWhatIfView(app, detail, strategy, store);
  } catch (error) {
    showError(describe(error), () => void showWhatIf(id));
  }
}

async function showSupervision(id: string): Promise<void> {
  app.replaceChildren();
  try {
    const detail = await api.student(id);
    clearBanner();
    renderSupervisionView(app, detail, loadTrackedPath(id), observedWeek, (week) => {
      observedWeek = week;
      void showSupervision(id);
    });
  } catch (error) {
    showError(describe(error), () => void showSupervision(id));
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return error.message;
  return error instanceof Error ? error.message : String(error);
}

function route(): void {
  const hash = window.location.hash || "#/cohort";
  const studentMatch = /^#\/student\/(.+)$/.exec(hash);
  const whatIfMatch = /^#\/whatif\/(.+)$/.exec(hash);
  const supervisionMatch = /^#\/supervision\/(.+)$/.exec(hash);
  if (studentMatch) void showStudent(decodeURIComponent(studentMatch[1]));
  else if (whatIfMatch) void showWhatIf(decodeURIComponent(whatIfMatch[1]));
  else if (supervisionMatch) void showSupervision(decodeURIComponent(supervisionMatch[1]));
  else void showCohort();
}

window.addEventListener("hashchange", route);
route();
