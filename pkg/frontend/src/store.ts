// What-if state with request sequencing: rapid slider movement issues many
// requests; only a response at least as new as everything already applied
// may be displayed, so the final slider position never shows a stale grade.

import type { OlitApi } from "./api";
import type { PathRule, WhatIfResponse } from "./types";

export function clampSnap(value: number): number {
  // sliders operate on normalized features in 0.01 steps
  const clamped = Math.min(1, Math.max(0, value));
  return Math.round(clamped * 100) / 100;
}

export type WhatIfListener = (state: WhatIfStore) => void;

export class WhatIfStore {
  overrides: Record<string, number> = {};
  current: WhatIfResponse | null = null;
  pendingRequests = 0;
  lastError: string | null = null;

  private issuedSeq = 0;
  private appliedSeq = 0;
  private listeners: WhatIfListener[] = [];

  constructor(
    private api: OlitApi,
    readonly studentId: string,
  ) {}

  subscribe(listener: WhatIfListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this);
  }

  setOverride(feature: string, value: number): void {
    this.overrides = { ...this.overrides, [feature]: clampSnap(value) };
  }

  clearOverride(feature: string): void {
    const { [feature]: _gone, ...rest } = this.overrides;
    this.overrides = rest;
  }

  /** Issue a what-if request for the current overrides; stale responses
   * (older than one already applied) are dropped. */
  async submit(): Promise<void> {
    const seq = ++this.issuedSeq;
    const overrides = { ...this.overrides };
    this.pendingRequests += 1;
    this.notify();
    try {
      const response = await this.api.whatIf(this.studentId, overrides);
      if (seq > this.appliedSeq) {
        this.appliedSeq = seq;
        this.current = response;
        this.lastError = null;
      }
    } catch (error) {
      if (seq > this.appliedSeq) {
        this.lastError = error instanceof Error ? error.message : String(error);
      }
    } finally {
      this.pendingRequests -= 1;
      this.notify();
    }
  }
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  delayMs: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => fn(...args), delayMs);
  };
}

// ---------------------------------------------------------------- tracked

const TRACKED_PREFIX = "olit.tracked.";

/** The supervision view tracks a path agreed in the intervention meeting;
 * storage is per-browser on purpose (the service stays stateless). */
export function saveTrackedPath(studentId: string, path: PathRule): void {
  window.localStorage.setItem(TRACKED_PREFIX + studentId, JSON.stringify(path));
}

export function loadTrackedPath(studentId: string): PathRule | null {
  const raw = window.localStorage.getItem(TRACKED_PREFIX + studentId);
  if (!raw) return null;
  try {
    return JSON.parse(raw) as PathRule;
  } catch {
    return null;
  }
}

export function clearTrackedPath(studentId: string): void {
  window.localStorage.removeItem(TRACKED_PREFIX + studentId);
}
