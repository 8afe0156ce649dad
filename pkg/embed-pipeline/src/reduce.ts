/**
 * Joint 1-D projection of all kernel embeddings with UMAP.
 *
 * The reducer is fitted once over every user's kernels together, so all
 * opinions land on one shared axis; per-user fits would give incomparable
 * scales.  All randomness comes from a seeded generator: a fixed seed gives
 * identical output across runs on one machine (cross-machine bit-identity
 * is not promised).
 */

import { UMAP } from "umap-js";

import type { KernelEmbedding, SeriesRow } from "./types.js";

export const DEFAULT_NEIGHBORS = 15;

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function reduceTo1d(
  embeddings: KernelEmbedding[],
  seed: number,
  nNeighbors: number = DEFAULT_NEIGHBORS,
): SeriesRow[] {
  if (embeddings.length < 2) {
    throw new Error(
      `too few rows for neighborhood construction: ${embeddings.length}`,
    );
  }
  const umap = new UMAP({
    nComponents: 1,
    nNeighbors: Math.min(nNeighbors, embeddings.length - 1),
    minDist: 0.1,
    random: mulberry32(seed),
  });
  const projected = umap.fit(embeddings.map((e) => Array.from(e.vector)));
  return embeddings.map((e, i) => ({
    user: e.user,
    kernel: e.kernel,
    opinion: projected[i][0],
  }));
}
