// In-memory stand-in for the review service: canned documents behind a
// FetchLike, with full request capture for contract assertions.

import type { FetchLike } from "../src/api";
import type { AlarmStats, EventDoc, EventsPage } from "../src/types";

export interface CapturedRequest {
  url: string;
  method: string;
  body?: unknown;
}

export function eventDoc(overrides: Partial<EventDoc> = {}): EventDoc {
  return {
    id: "evt-000001",
    event_type: "fire",
    channel: "ch01",
    frame_start: 10,
    frame_end: 12,
    box: [30, 20, 80, 60],
    score: 0.88,
    t: "2026-06-01T08:00:00+00:00",
    image_ref: "stills/evt-000001.png",
    ...overrides,
  };
}

export function alarmStats(overrides: Partial<AlarmStats> = {}): AlarmStats {
  const base: AlarmStats = {
    bucket: "day",
    bucket_starts: [
      "2026-06-01T00:00:00+00:00",
      "2026-06-02T00:00:00+00:00",
      "2026-06-03T00:00:00+00:00",
    ],
    series: [
      { channel: "ch01", event_type: "fire", counts: [4, 1, 0] },
      { channel: "ch02", event_type: "person", counts: [2, 0, 3] },
    ],
    total: 10,
    round_markers: ["2026-06-02T09:30:00+00:00"],
  };
  return { ...base, ...overrides };
}

export class StubService {
  requests: CapturedRequest[] = [];
  events: EventDoc[];
  stats: AlarmStats;
  failVerdictsWith?: { status: number; detail: string };

  constructor(events: EventDoc[] = [eventDoc()], stats: AlarmStats = alarmStats()) {
    this.events = events;
    this.stats = stats;
  }

  get fetch(): FetchLike {
    return async (url, init) => {
      const method = init?.method ?? "GET";
      const body = init?.body ? JSON.parse(String(init.body)) : undefined;
      this.requests.push({ url, method, body });
      return this.route(url, method, body);
    };
  }

  requestsTo(pathPrefix: string): CapturedRequest[] {
    return this.requests.filter((r) => r.url.split("?")[0].startsWith(pathPrefix));
  }

  private json(payload: unknown, status = 200): Response {
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }

  private route(url: string, method: string, body?: unknown): Response {
    const [path, query] = url.split("?");
    const params = new URLSearchParams(query ?? "");

    if (path === "/events" && method === "GET") {
      let matching = this.events;
      const status = params.get("status");
      if (status === "unreviewed") matching = matching.filter((e) => !e.review);
      if (status === "reviewed") matching = matching.filter((e) => e.review);
      const type = params.get("type");
      if (type) matching = matching.filter((e) => e.event_type === type);
      const page = Number(params.get("page") ?? 1);
      const pageSize = Number(params.get("page_size") ?? 20);
      const start = (page - 1) * pageSize;
      const result: EventsPage = {
        events: matching.slice(start, start + pageSize),
        page,
        page_size: pageSize,
        total: matching.length,
        pages: Math.max(Math.ceil(matching.length / pageSize), 1),
      };
      return this.json(result);
    }

    const verdictMatch = path.match(/^\/events\/([^/]+)\/verdict$/);
    if (verdictMatch && method === "POST") {
      if (this.failVerdictsWith) {
        return this.json({ detail: this.failVerdictsWith.detail }, this.failVerdictsWith.status);
      }
      const event = this.events.find((e) => e.id === verdictMatch[1]);
      if (!event) return this.json({ detail: "unknown event" }, 404);
      const doc = body as { verdict: "true_positive" | "false_positive"; reviewer: string; negative_class?: "false_fire" | "false_person" };
      event.review = {
        verdict: doc.verdict,
        reviewer: doc.reviewer,
        reviewed_at: "2026-06-01T09:00:00+00:00",
        ...(doc.negative_class ? { negative_class: doc.negative_class } : {}),
      };
      return this.json(event);
    }

    const detailMatch = path.match(/^\/events\/([^/]+)$/);
    if (detailMatch && method === "GET") {
      const event = this.events.find((e) => e.id === detailMatch[1]);
      return event ? this.json(event) : this.json({ detail: "unknown event" }, 404);
    }

    if (path === "/stats/alarms") {
      return this.json(this.stats);
    }
    if (path === "/models") {
      return this.json({ models: [{ model_id: "model-0", composition: ["labeled"], metrics: {}, created: "2026-06-01T00:00:00+00:00" }] });
    }
    if (path === "/curation/round" && method === "POST") {
      return this.json({
        model_id: "model-r1",
        manifest_name: "fp-r1",
        composition: ["labeled", "fp-r1"],
        consumed_event_ids: this.events.filter((e) => e.review?.verdict === "false_positive").map((e) => e.id),
        before_metrics: {},
        after_metrics: {},
        composition_report: {
          model_name: "model-r1",
          manifests: ["labeled", "fp-r1"],
          image_count: 5,
          class_counts: {},
          per_manifest_counts: {},
        },
      });
    }
    return this.json({ detail: `unstubbed route ${method} ${path}` }, 500);
  }
}
