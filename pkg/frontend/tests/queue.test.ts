import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { ReviewQueue } from "../src/queue";
import { isValidVerdictPayload } from "../src/verdicts";
import { StubService, eventDoc } from "./stub";

function makeQueue(service: StubService, errors: string[] = []) {
  const api = new ApiClient("", service.fetch);
  const queue = new ReviewQueue(api, "kim", { status: "unreviewed" }, 10, {
    onChanged: () => {},
    onError: (message) => errors.push(message),
  });
  return queue;
}

describe("ReviewQueue", () => {
  it("renders only what the service returned", async () => {
    const service = new StubService([
      eventDoc({ id: "evt-1", event_type: "fire" }),
      eventDoc({ id: "evt-2", event_type: "person", channel: "ch02" }),
    ]);
    const queue = makeQueue(service);
    await queue.load(1);
    expect(queue.cards.map((c) => c.id)).toEqual(["evt-1", "evt-2"]);
    expect(queue.total).toBe(2);
    // every displayed field comes from the API document
    expect(queue.cards[0].channel).toBe("ch01");
    expect(queue.cards[0].box).toEqual([30, 20, 80, 60]);
    expect(queue.cards[1].negativeClass).toBe("false_person");
  });

  it("round-trips a rejection as a valid review document", async () => {
    const service = new StubService([eventDoc({ id: "evt-1", event_type: "fire" })]);
    const queue = makeQueue(service);
    await queue.load(1);
    await queue.reject(queue.cards[0]);

    const posts = service.requestsTo("/events/evt-1/verdict");
    expect(posts).toHaveLength(1);
    expect(posts[0].method).toBe("POST");
    expect(isValidVerdictPayload(posts[0].body)).toBe(true);
    expect(posts[0].body).toEqual({
      verdict: "false_positive",
      negative_class: "false_fire",
      reviewer: "kim",
    });
    // and the stub's stored review is the same document the server keeps
    expect(service.events[0].review?.verdict).toBe("false_positive");
    expect(service.events[0].review?.negative_class).toBe("false_fire");
  });

  it("removes the card without reloading the queue", async () => {
    const service = new StubService([
      eventDoc({ id: "evt-1" }),
      eventDoc({ id: "evt-2", event_type: "person" }),
    ]);
    const queue = makeQueue(service);
    await queue.load(1);
    const listCallsBefore = service.requestsTo("/events").filter((r) => r.method === "GET").length;

    await queue.accept(queue.cards[0]);
    expect(queue.cards.map((c) => c.id)).toEqual(["evt-2"]);
    expect(queue.total).toBe(1);
    const listCallsAfter = service.requestsTo("/events").filter((r) => r.method === "GET").length;
    expect(listCallsAfter).toBe(listCallsBefore); // no reload
  });

  it("blocks class-mismatch verdicts before the wire", async () => {
    const service = new StubService([eventDoc({ id: "evt-1", event_type: "person" })]);
    const errors: string[] = [];
    const queue = makeQueue(service, errors);
    await queue.load(1);

    const tampered = { ...queue.cards[0], negativeClass: "false_fire" as const };
    await queue.reject(tampered);

    expect(service.requestsTo("/events/evt-1/verdict")).toHaveLength(0);
    expect(errors).toHaveLength(1);
    expect(errors[0]).toContain("false_person");
    expect(queue.cards).toHaveLength(1); // nothing left the queue
  });

  it("keeps the card when the service rejects the verdict", async () => {
    const service = new StubService([eventDoc({ id: "evt-1" })]);
    service.failVerdictsWith = { status: 400, detail: "nope" };
    const errors: string[] = [];
    const queue = makeQueue(service, errors);
    await queue.load(1);
    await queue.accept(queue.cards[0]);
    expect(queue.cards).toHaveLength(1);
    expect(errors[0]).toContain("400");
  });

  it("counts pending FP verdicts to gate the round button", async () => {
    const service = new StubService([
      eventDoc({ id: "evt-1", event_type: "fire" }),
      eventDoc({ id: "evt-2", event_type: "person" }),
    ]);
    const queue = makeQueue(service);
    await queue.load(1);
    expect(queue.roundTriggerable()).toBe(false);
    await queue.accept(queue.cards[0]); // TP does not enable the round
    expect(queue.roundTriggerable()).toBe(false);
    await queue.reject(queue.cards[0]);
    expect(queue.roundTriggerable()).toBe(true);
    queue.noteRoundConsumed();
    expect(queue.roundTriggerable()).toBe(false);
  });

  it("keyboard-first triage: j/k move, a accepts, x rejects", async () => {
    const service = new StubService([
      eventDoc({ id: "evt-1", event_type: "fire" }),
      eventDoc({ id: "evt-2", event_type: "person" }),
      eventDoc({ id: "evt-3", event_type: "stoppage", track_id: 7, image_ref: undefined }),
    ]);
    const queue = makeQueue(service);
    await queue.load(1);

    expect(await queue.onKey("j")).toBe(true);
    expect(queue.selectedCard()?.id).toBe("evt-2");
    expect(await queue.onKey("k")).toBe(true);
    expect(queue.selectedCard()?.id).toBe("evt-1");

    expect(await queue.onKey("a")).toBe(true); // accept evt-1
    expect(queue.cards.map((c) => c.id)).toEqual(["evt-2", "evt-3"]);
    expect(await queue.onKey("x")).toBe(true); // reject evt-2 as false_person
    const posts = service.requestsTo("/events/evt-2/verdict");
    expect(posts[0].body).toMatchObject({ negative_class: "false_person" });
    expect(await queue.onKey("q")).toBe(false); // unbound key
  });

  it("paginates through the full store", async () => {
    const events = Array.from({ length: 23 }, (_, i) => eventDoc({ id: `evt-${i}` }));
    const service = new StubService(events);
    const api = new ApiClient("", service.fetch);
    const queue = new ReviewQueue(api, "kim", { status: "unreviewed" }, 10);
    const seen: string[] = [];
    await queue.load(1);
    for (let page = 1; page <= queue.pages; page++) {
      await queue.load(page);
      seen.push(...queue.cards.map((c) => c.id));
    }
    expect(seen).toHaveLength(23);
    expect(new Set(seen).size).toBe(23);
  });
});
