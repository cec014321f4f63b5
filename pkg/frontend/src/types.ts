// Wire types of the review service API. Field names mirror the JSON exactly.

export type EventType = "fire" | "person" | "stoppage" | "wrong_way";
export type NegativeClass = "false_fire" | "false_person";
export type VerdictKind = "true_positive" | "false_positive";

/** [x_min, y_min, x_max, y_max] in source-image pixels. */
export type Box = [number, number, number, number];

export interface ReviewDoc {
  verdict: VerdictKind;
  reviewer: string;
  reviewed_at: string;
  negative_class?: NegativeClass;
}

export interface EventDoc {
  id: string;
  event_type: EventType;
  channel: string;
  frame_start: number;
  frame_end: number;
  box: Box;
  score: number;
  t: string;
  track_id?: number;
  image_ref?: string;
  review?: ReviewDoc;
}

export interface EventsPage {
  events: EventDoc[];
  page: number;
  page_size: number;
  total: number;
  pages: number;
}

export interface AlarmSeriesEntry {
  channel: string;
  event_type: EventType;
  counts: number[];
}

export interface AlarmStats {
  bucket: "day" | "hour";
  bucket_starts: string[];
  series: AlarmSeriesEntry[];
  total: number;
  round_markers: string[];
}

export interface ModelDoc {
  model_id: string;
  composition: string[];
  metrics: Record<string, unknown>;
  created: string;
}

export interface VerdictPayload {
  verdict: VerdictKind;
  negative_class?: NegativeClass;
  reviewer: string;
}

export interface RoundResult {
  model_id: string;
  manifest_name: string;
  composition: string[];
  consumed_event_ids: string[];
  before_metrics: Record<string, unknown>;
  after_metrics: Record<string, unknown>;
  composition_report: {
    model_name: string;
    manifests: string[];
    image_count: number;
    class_counts: Record<string, number>;
    per_manifest_counts: Record<string, Record<string, number>>;
  };
}
