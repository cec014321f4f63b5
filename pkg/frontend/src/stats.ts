// Alarm-chart view model: everything displayed derives from one AlarmStats
// response; the integrity check refuses to render numbers that disagree
// with the API's own total.

import type { AlarmStats } from "./types";

export interface ChartModel {
  bucket: "day" | "hour";
  labels: string[];
  /** per-bucket totals across all (channel, event_type) series */
  totals: number[];
  /** indices into labels where a model swap happened (chart splits there) */
  markerIndices: number[];
  grandTotal: number;
}

export function perBucketTotals(stats: AlarmStats): number[] {
  const totals = new Array<number>(stats.bucket_starts.length).fill(0);
  for (const entry of stats.series) {
    entry.counts.forEach((count, i) => {
      totals[i] += count;
    });
  }
  return totals;
}

export function sumOf(stats: AlarmStats): number {
  return perBucketTotals(stats).reduce((a, b) => a + b, 0);
}

/** True when our aggregation agrees with the API's reported total. */
export function totalsConsistent(stats: AlarmStats): boolean {
  return sumOf(stats) === stats.total;
}

function bucketIndexOf(stats: AlarmStats, isoTime: string): number {
  // markers land in the bucket that starts at or before them
  const t = Date.parse(isoTime);
  let index = -1;
  stats.bucket_starts.forEach((start, i) => {
    if (Date.parse(start) <= t) index = i;
  });
  return index;
}

export function toChartModel(stats: AlarmStats): ChartModel {
  if (!totalsConsistent(stats)) {
    throw new Error(
      `refusing to chart inconsistent stats: bucket sum ${sumOf(stats)} != total ${stats.total}`,
    );
  }
  const markerIndices = stats.round_markers
    .map((m) => bucketIndexOf(stats, m))
    .filter((i) => i >= 0);
  return {
    bucket: stats.bucket,
    labels: stats.bucket_starts,
    totals: perBucketTotals(stats),
    markerIndices,
    grandTotal: stats.total,
  };
}

/** Buckets on each side of the first marker (pre/post model swap). */
export function splitAtFirstMarker(model: ChartModel): { pre: number[]; post: number[] } {
  if (model.markerIndices.length === 0) {
    return { pre: model.totals.slice(), post: [] };
  }
  const cut = model.markerIndices[0];
  return { pre: model.totals.slice(0, cut), post: model.totals.slice(cut) };
}

/** Deterministic SVG bar chart; vertical dashed lines mark model swaps. */
export function renderChartSvg(model: ChartModel, width = 640, height = 180): string {
  const n = model.totals.length;
  if (n === 0) {
    return (
      `<svg viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">` +
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="empty">no alarms in range</text>` +
      `</svg>`
    );
  }
  const peak = Math.max(1, ...model.totals);
  const pad = 18;
  const barSpan = (width - 2 * pad) / n;
  const barWidth = Math.max(1, barSpan * 0.8);
  const parts: string[] = [];
  model.totals.forEach((count, i) => {
    const h = ((height - 2 * pad) * count) / peak;
    const x = pad + i * barSpan + (barSpan - barWidth) / 2;
    const y = height - pad - h;
    parts.push(
      `<rect x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${barWidth.toFixed(1)}" ` +
        `height="${h.toFixed(1)}" class="bar"><title>${model.labels[i]}: ${count}</title></rect>`,
    );
  });
  for (const index of model.markerIndices) {
    const x = pad + index * barSpan;
    parts.push(
      `<line x1="${x.toFixed(1)}" y1="${pad}" x2="${x.toFixed(1)}" y2="${height - pad}" ` +
        `class="marker" stroke-dasharray="4 3"><title>model swap</title></line>`,
    );
  }
  parts.push(
    `<text x="${pad}" y="${pad - 6}" class="axis">peak ${peak}/${model.bucket}</text>`,
  );
  return (
    `<svg viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">` +
    parts.join("") +
    `</svg>`
  );
}
