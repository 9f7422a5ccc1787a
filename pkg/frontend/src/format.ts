// Presentation helpers. Nothing here computes a clinical value: scores,
// bands, and record values arrive from the API and are only escaped,
// labelled, or mapped to pixel coordinates.

import type { ProblemDocument, ResponseStatus, SeriesPoint } from "./types.js";

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const STATUS_LABELS: Record<ResponseStatus | "pending", string> = {
  pending: "Pending",
  ok: "Ok",
  timed_out: "Timed out",
  backend_error: "Backend error",
  malformed: "Malformed",
};

export function statusLabel(status: ResponseStatus | "pending"): string {
  return STATUS_LABELS[status] ?? status;
}

export function bandClass(band: string): string {
  // band strings come from the API; anything unexpected gets a neutral chip
  const known = ["low", "low_medium", "medium", "high"];
  return known.includes(band) ? `band-${band}` : "band-unknown";
}

export function bandLabel(band: string): string {
  return band.replace(/_/g, "-");
}

export function fmtWhen(iso: string): string {
  // keep the wire value visible; trailing Z marks it as UTC
  return iso.replace("T", " ").replace("Z", " UTC");
}

export interface Sparkline {
  points: string; // SVG polyline points attribute
  max: number;
}

export function sparkline(
  series: SeriesPoint[],
  width: number,
  height: number,
  pad = 2,
): Sparkline {
  // pure coordinate mapping of API totals onto the viewport
  if (series.length === 0) {
    return { points: "", max: 0 };
  }
  const max = Math.max(...series.map((p) => p.total), 1);
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const step = series.length > 1 ? innerW / (series.length - 1) : 0;
  const points = series
    .map((point, i) => {
      const x = pad + (series.length > 1 ? i * step : innerW / 2);
      const y = pad + innerH - (point.total / max) * innerH;
      return `${round1(x)},${round1(y)}`;
    })
    .join(" ");
  return { points, max };
}

function round1(value: number): number {
  return Math.round(value * 10) / 10;
}

export interface FieldErrors {
  byField: Record<string, string[]>;
  general: string[];
}

/**
 * Maps a POST /cases problem document onto form fields. The engine reports
 * body-shape errors as a list of { loc, msg } entries and record-invariant
 * violations as { violations: [{ path, message }] }; both collapse to the
 * same field-keyed shape here.
 */
export function mapCaseErrors(problem: ProblemDocument): FieldErrors {
  const out: FieldErrors = { byField: {}, general: [] };
  const push = (field: string, message: string) => {
    const key = field || "";
    if (!key) {
      out.general.push(message);
      return;
    }
    (out.byField[key] ??= []).push(message);
  };

  const detail = problem.detail;
  if (Array.isArray(detail)) {
    for (const entry of detail) {
      if (entry && typeof entry === "object" && "msg" in entry) {
        const loc = Array.isArray((entry as { loc?: unknown }).loc)
          ? ((entry as { loc: unknown[] }).loc)
          : [];
        push(loc.filter((p) => p !== "body").join("."), String((entry as { msg: unknown }).msg));
      }
    }
  } else if (detail && typeof detail === "object" && "violations" in detail) {
    const violations = (detail as { violations: unknown }).violations;
    if (Array.isArray(violations)) {
      for (const violation of violations) {
        if (violation && typeof violation === "object" && "message" in violation) {
          const path = String((violation as { path?: unknown }).path ?? "");
          push(path, String((violation as { message: unknown }).message));
        }
      }
    }
  }
  if (out.general.length === 0 && Object.keys(out.byField).length === 0) {
    out.general.push(problem.message);
  }
  return out;
}
