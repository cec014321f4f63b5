// Review-queue state: one page of unreviewed events, keyboard-first triage.
// Verdicts go through validateVerdict before the wire; a submitted card
// leaves the queue locally (no reload) and the counters adjust.

import type { ApiClient, EventFilters } from "./api";
import type { EventDoc, NegativeClass } from "./types";
import { requiredNegativeClass, validateVerdict } from "./verdicts";

export interface EventCard {
  id: string;
  eventType: EventDoc["event_type"];
  channel: string;
  time: string;
  box: EventDoc["box"];
  score: number;
  imageRef?: string;
  /** the only class a reject may assign, if any */
  negativeClass?: NegativeClass;
}

function toCard(doc: EventDoc): EventCard {
  return {
    id: doc.id,
    eventType: doc.event_type,
    channel: doc.channel,
    time: doc.t,
    box: doc.box,
    score: doc.score,
    imageRef: doc.image_ref,
    negativeClass: requiredNegativeClass(doc.event_type),
  };
}

export interface QueueListener {
  onChanged(): void;
  onError(message: string): void;
}

export class ReviewQueue {
  cards: EventCard[] = [];
  selected = 0;
  total = 0;
  page = 1;
  pages = 1;
  /** FP verdicts filed since the last curation round (enables the round button) */
  pendingFpVerdicts = 0;
  loading = false;

  constructor(
    private readonly api: ApiClient,
    public reviewer: string,
    public filters: EventFilters = { status: "unreviewed" },
    private readonly pageSize = 12,
    private readonly listener?: QueueListener,
  ) {}

  async load(page = 1): Promise<void> {
    this.loading = true;
    try {
      const result = await this.api.listEvents(this.filters, page, this.pageSize);
      this.cards = result.events.map(toCard);
      this.total = result.total;
      this.page = result.page;
      this.pages = result.pages;
      this.selected = Math.min(this.selected, Math.max(this.cards.length - 1, 0));
    } finally {
      this.loading = false;
    }
    this.listener?.onChanged();
  }

  selectedCard(): EventCard | undefined {
    return this.cards[this.selected];
  }

  moveSelection(delta: number): void {
    if (this.cards.length === 0) return;
    this.selected = (this.selected + delta + this.cards.length) % this.cards.length;
    this.listener?.onChanged();
  }

  /** Accept: the alarm was real. */
  accept(card: EventCard): Promise<void> {
    return this.submit(card, { verdict: "true_positive", reviewer: this.reviewer });
  }

  /** Reject: false alarm; fire/person carry their constrained negative class. */
  reject(card: EventCard): Promise<void> {
    return this.submit(card, {
      verdict: "false_positive",
      negativeClass: card.negativeClass,
      reviewer: this.reviewer,
    });
  }

  private async submit(
    card: EventCard,
    draft: { verdict: "true_positive" | "false_positive"; negativeClass?: NegativeClass; reviewer: string },
  ): Promise<void> {
    const check = validateVerdict(card.eventType, draft);
    if (!check.ok) {
      this.listener?.onError(check.error);
      return;
    }
    try {
      await this.api.submitVerdict(card.id, check.payload);
    } catch (error) {
      this.listener?.onError(String(error));
      return;
    }
    const index = this.cards.findIndex((c) => c.id === card.id);
    if (index >= 0) {
      this.cards.splice(index, 1);
      this.total -= 1;
      if (this.selected >= this.cards.length) {
        this.selected = Math.max(this.cards.length - 1, 0);
      }
    }
    if (check.payload.verdict === "false_positive") {
      this.pendingFpVerdicts += 1;
    }
    this.listener?.onChanged();
  }

  roundTriggerable(): boolean {
    return this.pendingFpVerdicts > 0;
  }

  noteRoundConsumed(): void {
    this.pendingFpVerdicts = 0;
  }

  /** Keyboard-first triage: j/k move, a accepts, x rejects. */
  async onKey(key: string): Promise<boolean> {
    const card = this.selectedCard();
    switch (key) {
      case "j":
        this.moveSelection(1);
        return true;
      case "k":
        this.moveSelection(-1);
        return true;
      case "a":
        if (card) await this.accept(card);
        return card !== undefined;
      case "x":
        if (card) await this.reject(card);
        return card !== undefined;
      default:
        return false;
    }
  }
}
