/**
 * Display-only preview of how the engine will read a free-text query.
 *
 * Mirrors the service grammar (adjectives concatenate into a color
 * label, a garment noun closes the clause, "and" binds tighter than
 * "or") purely to render chips before the query is submitted. The
 * server's echoed interpretation in the query response stays the source
 * of truth; this preview never blocks submission.
 */

import type { Garment } from "./api";

export interface Chip {
  kind: "clause" | "connective";
  text: string;
  garment?: Garment;
}

const GARMENT_NOUNS: Record<string, Garment> = {
  jacket: "upper",
  shirt: "upper",
  jersey: "upper",
  top: "upper",
  sweater: "upper",
  coat: "upper",
  blouse: "upper",
  torso: "upper",
  trousers: "lower",
  pants: "lower",
  jeans: "lower",
  skirt: "lower",
  shorts: "lower",
  legs: "lower",
};

const STOP_WORDS = new Set([
  "a", "an", "the", "person", "people", "someone", "man", "woman",
  "search", "find", "show", "retrieve", "looking", "for", "me", "in",
  "with", "wearing", "dressed",
]);

export function previewChips(text: string): Chip[] {
  const tokens = text
    .toLowerCase()
    .split(/\s+/)
    .filter((t) => t.length > 0 && !STOP_WORDS.has(t));
  const chips: Chip[] = [];
  let adjectives: string[] = [];
  for (const tok of tokens) {
    if (tok === "and" || tok === "or") {
      if (adjectives.length > 0) {
        // dangling adjectives: show them so the misparse is visible
        chips.push({ kind: "clause", text: adjectives.join(" ") + " ?" });
        adjectives = [];
      }
      chips.push({ kind: "connective", text: tok });
    } else if (tok in GARMENT_NOUNS) {
      const garment = GARMENT_NOUNS[tok];
      chips.push({
        kind: "clause",
        text: adjectives.length > 0 ? `${adjectives.join(" ")} ${garment}` : `? ${garment}`,
        garment,
      });
      adjectives = [];
    } else {
      adjectives.push(tok);
    }
  }
  if (adjectives.length > 0) {
    chips.push({ kind: "clause", text: adjectives.join(" ") + " ?" });
  }
  return chips;
}

/** True when every clause chip is complete (label plus garment). */
export function previewLooksValid(chips: Chip[]): boolean {
  const clauses = chips.filter((c) => c.kind === "clause");
  return clauses.length > 0 && clauses.every((c) => !c.text.includes("?"));
}
