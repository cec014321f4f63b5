// Client-side verdict rules, mirroring the server's ReviewVerdict invariants.
// Anything rejected here never reaches the wire.

import type { EventType, NegativeClass, VerdictPayload } from "./types";

const NEGATIVE_FOR: Partial<Record<EventType, NegativeClass>> = {
  fire: "false_fire",
  person: "false_person",
};

export interface VerdictDraft {
  verdict: "true_positive" | "false_positive";
  negativeClass?: NegativeClass;
  reviewer: string;
}

export type VerdictCheck =
  | { ok: true; payload: VerdictPayload }
  | { ok: false; error: string };

/** The only negative class legal for this event type, if any. */
export function requiredNegativeClass(eventType: EventType): NegativeClass | undefined {
  return NEGATIVE_FOR[eventType];
}

export function validateVerdict(eventType: EventType, draft: VerdictDraft): VerdictCheck {
  if (!draft.reviewer.trim()) {
    return { ok: false, error: "reviewer is required" };
  }
  if (draft.verdict === "true_positive") {
    if (draft.negativeClass) {
      return { ok: false, error: "a true-positive verdict takes no negative class" };
    }
    return { ok: true, payload: { verdict: "true_positive", reviewer: draft.reviewer } };
  }
  const required = requiredNegativeClass(eventType);
  if (!required) {
    if (draft.negativeClass) {
      return { ok: false, error: `${eventType} events take no negative class` };
    }
    return { ok: true, payload: { verdict: "false_positive", reviewer: draft.reviewer } };
  }
  if (!draft.negativeClass) {
    return { ok: false, error: `a false-positive ${eventType} needs negative class ${required}` };
  }
  if (draft.negativeClass !== required) {
    return {
      ok: false,
      error: `negative class ${draft.negativeClass} does not match a ${eventType} event (expected ${required})`,
    };
  }
  return {
    ok: true,
    payload: { verdict: "false_positive", negative_class: required, reviewer: draft.reviewer },
  };
}

/** Structural check that an outgoing payload is a valid review document. */
export function isValidVerdictPayload(value: unknown): value is VerdictPayload {
  if (typeof value !== "object" || value === null) return false;
  const doc = value as Record<string, unknown>;
  if (doc.verdict !== "true_positive" && doc.verdict !== "false_positive") return false;
  if (typeof doc.reviewer !== "string" || !doc.reviewer.trim()) return false;
  if ("negative_class" in doc && doc.negative_class !== undefined) {
    if (doc.negative_class !== "false_fire" && doc.negative_class !== "false_person") return false;
    if (doc.verdict !== "false_positive") return false;
  }
  return true;
}
