/**
 * The series-file contract with the core: `user_id,kernel,opinion`, one row
 * per observed (user, kernel), kernel a 0-based integer, LF line endings.
 */

import type { SeriesRow } from "./types.js";

export const SERIES_HEADER = "user_id,kernel,opinion";

export function exportSeries(rows: SeriesRow[]): string {
  const sorted = [...rows].sort((a, b) =>
    a.user < b.user ? -1 : a.user > b.user ? 1 : a.kernel - b.kernel,
  );
  const lines = [SERIES_HEADER];
  for (const row of sorted) {
    if (!Number.isInteger(row.kernel) || row.kernel < 0) {
      throw new Error(`kernel must be a nonnegative integer, got ${row.kernel}`);
    }
    if (!Number.isFinite(row.opinion)) {
      throw new Error(`non-finite opinion for ${row.user} kernel ${row.kernel}`);
    }
    lines.push(`${row.user},${row.kernel},${row.opinion}`);
  }
  return lines.join("\n") + "\n";
}

export function parseSeries(content: string): SeriesRow[] {
  const lines = content.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines[0] !== SERIES_HEADER) {
    throw new Error(`expected header ${SERIES_HEADER}, got ${lines[0]}`);
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== 3) {
      throw new Error(`line ${i + 2}: expected 3 fields`);
    }
    return {
      user: parts[0],
      kernel: Number(parts[1]),
      opinion: Number(parts[2]),
    };
  });
}
