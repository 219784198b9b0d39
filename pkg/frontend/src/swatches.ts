/** Swatch cards: one per cluster centroid, awaiting an operator label. */

import type { ClusterResponse } from "./api.js";

export const LABEL_SUGGESTIONS = [
  "background",
  "printed_text",
  "rubber_stamp",
  "highlight",
  "handwriting",
  "sticker",
] as const;

/** Reserved by the classifier; operators cannot assign it. */
export const RESERVED_LABEL = "UNKNOWN";

export interface SwatchCard {
  index: number;
  hex: string;
  lab: [number, number, number];
  count: number;
  radius: number;
  label: string;
}

export function cardsFromResponse(resp: ClusterResponse): SwatchCard[] {
  return resp.centroids.map((c) => ({
    index: c.index,
    hex: c.srgb_hex,
    lab: c.lab,
    count: c.count,
    radius: c.radius,
    label: "",
  }));
}

export function unlabeledIndices(cards: SwatchCard[]): number[] {
  return cards.filter((c) => !c.label.trim()).map((c) => c.index);
}

export function labelProblem(label: string): string | null {
  const trimmed = label.trim();
  if (!trimmed) return "label must not be empty";
  if (trimmed === RESERVED_LABEL) return `"${RESERVED_LABEL}" is reserved`;
  return null;
}

/**
 * The exact commit payload: every centroid index mapped to its label.
 * Throws when any card is unlabeled or uses the reserved name.
 */
export function buildAssignmentPayload(cards: SwatchCard[]): Record<string, string> {
  const payload: Record<string, string> = {};
  for (const card of cards) {
    const problem = labelProblem(card.label);
    if (problem) {
      throw new Error(`swatch ${card.index}: ${problem}`);
    }
    payload[String(card.index)] = card.label.trim();
  }
  return payload;
}
