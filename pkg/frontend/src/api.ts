import type {
  AlarmStats,
  EventDoc,
  EventsPage,
  ModelDoc,
  RoundResult,
  VerdictPayload,
} from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function decode<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (body.detail !== undefined) detail = JSON.stringify(body.detail);
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export interface EventFilters {
  status?: "reviewed" | "unreviewed";
  type?: string;
  channel?: string;
}

/** Thin typed client over the review service; the UI has no other data source. */
export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string, params?: Record<string, string | number | undefined>): string {
    const query = Object.entries(params ?? {})
      .filter(([, v]) => v !== undefined && v !== "")
      .map(([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`)
      .join("&");
    return this.base + path + (query ? `?${query}` : "");
  }

  listEvents(filters: EventFilters, page: number, pageSize: number): Promise<EventsPage> {
    return this.fetchImpl(
      this.url("/events", { ...filters, page, page_size: pageSize }),
    ).then((r) => decode<EventsPage>(r));
  }

  getEvent(id: string): Promise<EventDoc> {
    return this.fetchImpl(this.url(`/events/${id}`)).then((r) => decode<EventDoc>(r));
  }

  submitVerdict(eventId: string, payload: VerdictPayload): Promise<EventDoc> {
    return this.fetchImpl(this.url(`/events/${eventId}/verdict`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    }).then((r) => decode<EventDoc>(r));
  }

  alarmStats(bucket: "day" | "hour"): Promise<AlarmStats> {
    return this.fetchImpl(this.url("/stats/alarms", { bucket })).then((r) =>
      decode<AlarmStats>(r),
    );
  }

  listModels(): Promise<{ models: ModelDoc[] }> {
    return this.fetchImpl(this.url("/models")).then((r) => decode<{ models: ModelDoc[] }>(r));
  }

  triggerRound(roundName?: string): Promise<RoundResult> {
    return this.fetchImpl(this.url("/curation/round"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(roundName ? { round_name: roundName } : {}),
    }).then((r) => decode<RoundResult>(r));
  }
}
