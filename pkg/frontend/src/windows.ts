/** Training-window state: drawn -> clustered -> committed.
 *
 * One in-flight cluster request per window; commits are final (the pending
 * result is consumed server-side, so a second commit is refused locally).
 */

import type { Rect } from "./geometry.js";
import type { ClusterResponse } from "./api.js";
import { cardsFromResponse, type SwatchCard } from "./swatches.js";

export type WindowStatus = "drawn" | "clustered" | "committed";

/** Operator guideline shown as a hint, never enforced. */
export const WINDOW_GUIDELINE = 6;
export const DEFAULT_K_RANGE: [number, number] = [2, 5];

export interface TrainingWindow {
  id: number;
  rect: Rect;
  k: number;
  status: WindowStatus;
  requestInFlight: boolean;
  pendingId: string | null;
  seed: number | null;
  cards: SwatchCard[];
  error: string | null;
}

export class WindowStore {
  private windows: TrainingWindow[] = [];
  private nextId = 1;

  add(rect: Rect, k: number): TrainingWindow {
    const win: TrainingWindow = {
      id: this.nextId++,
      rect,
      k,
      status: "drawn",
      requestInFlight: false,
      pendingId: null,
      seed: null,
      cards: [],
      error: null,
    };
    this.windows.push(win);
    return win;
  }

  list(): readonly TrainingWindow[] {
    return this.windows;
  }

  get(id: number): TrainingWindow {
    const win = this.windows.find((w) => w.id === id);
    if (!win) throw new Error(`no window ${id}`);
    return win;
  }

  remove(id: number): void {
    this.windows = this.windows.filter((w) => w.id !== id);
  }

  /** Guard for issuing a cluster request; true when the call may proceed. */
  beginClusterRequest(id: number): boolean {
    const win = this.get(id);
    if (win.status === "committed" || win.requestInFlight) return false;
    win.requestInFlight = true;
    win.error = null;
    return true;
  }

  applyClusterResponse(id: number, resp: ClusterResponse): TrainingWindow {
    const win = this.get(id);
    win.requestInFlight = false;
    win.pendingId = resp.pending_id;
    win.seed = resp.seed;
    win.cards = cardsFromResponse(resp);
    win.status = "clustered";
    win.error = null;
    return win;
  }

  /** Failed request: surface the message, keep prior state intact. */
  applyClusterError(id: number, message: string): TrainingWindow {
    const win = this.get(id);
    win.requestInFlight = false;
    win.error = message;
    return win;
  }

  canCommit(id: number): boolean {
    const win = this.get(id);
    return win.status === "clustered" && win.pendingId !== null && !win.requestInFlight;
  }

  markCommitted(id: number): TrainingWindow {
    const win = this.get(id);
    if (win.status !== "clustered") {
      throw new Error(`window ${id} is ${win.status}; only clustered windows commit`);
    }
    win.status = "committed";
    win.pendingId = null; // consumed server-side; a second commit is impossible
    return win;
  }

  committedCount(): number {
    return this.windows.filter((w) => w.status === "committed").length;
  }

  /** e.g. "3 of ~6 windows committed" next to the window list. */
  progressHint(): string {
    return `${this.committedCount()} of ~${WINDOW_GUIDELINE} windows committed`;
  }
}
