/**
 * Kernel assignment, mirroring the core's calendar rule: kernel k covers
 * [epoch_start + k*kernel_days, epoch_start + (k+1)*kernel_days), half-open,
 * UTC; a timestamp on a boundary belongs to the later kernel.
 */

import type { KernelSpec } from "./types.js";

const MS_PER_DAY = 86_400_000;

const HAS_OFFSET = /(?:[zZ]|[+-]\d{2}:?\d{2})$/;

/** Parse RFC-3339 to epoch ms; a missing offset is taken as UTC. */
export function parseTimestamp(ts: string): number {
  const normalized = HAS_OFFSET.test(ts.trim()) ? ts.trim() : ts.trim() + "Z";
  const ms = Date.parse(normalized);
  if (Number.isNaN(ms)) {
    throw new Error(`unparseable timestamp: ${ts}`);
  }
  return ms;
}

export function spanStartMs(spec: KernelSpec): number {
  const m = /^(\d{4})-(\d{2})-(\d{2})$/.exec(spec.epoch_start);
  if (!m) {
    throw new Error(`epoch_start must be YYYY-MM-DD, got ${spec.epoch_start}`);
  }
  return Date.UTC(Number(m[1]), Number(m[2]) - 1, Number(m[3]));
}

/** Kernel index for the instant, or null when outside the span. */
export function kernelIndex(spec: KernelSpec, tsMs: number): number | null {
  const k = Math.floor((tsMs - spanStartMs(spec)) / (spec.kernel_days * MS_PER_DAY));
  return k >= 0 && k < spec.num_kernels ? k : null;
}

export function validateSpec(spec: KernelSpec): void {
  if (!Number.isInteger(spec.kernel_days) || spec.kernel_days < 1) {
    throw new Error(`kernel_days must be a positive integer, got ${spec.kernel_days}`);
  }
  if (!Number.isInteger(spec.num_kernels) || spec.num_kernels < 1) {
    throw new Error(`num_kernels must be a positive integer, got ${spec.num_kernels}`);
  }
  spanStartMs(spec);
}
