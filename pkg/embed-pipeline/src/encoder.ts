/**
 * Sentence encoders.
 *
 * The default identifier is the pretrained sentence transformer
 * "all-mpnet-base-v2" (768-dimensional output), loaded on demand.  Offline
 * test mode substitutes a deterministic hash-based fake encoder of the same
 * dimensionality so tests never download model weights.
 */

import { createHash } from "node:crypto";

export const DEFAULT_ENCODER_ID = "sentence-transformers/all-mpnet-base-v2";
export const EMBEDDING_DIM = 768;

export interface Encoder {
  readonly id: string;
  readonly dim: number;
  encode(texts: string[]): Promise<Float64Array[]>;
}

export class EncoderLoadError extends Error {}

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

/**
 * Deterministic stand-in encoder: a unit vector seeded from the text hash.
 * Identical texts embed identically, across processes and platforms.
 */
export class FakeEncoder implements Encoder {
  readonly id = "fake-hash-encoder";
  readonly dim = EMBEDDING_DIM;

  encodeOne(text: string): Float64Array {
    const digest = createHash("sha256").update(text, "utf8").digest();
    const rng = mulberry32(digest.readUInt32BE(0));
    const v = new Float64Array(this.dim);
    let normSq = 0;
    for (let i = 0; i < this.dim; i++) {
      v[i] = 2 * rng() - 1;
      normSq += v[i] * v[i];
    }
    const norm = Math.sqrt(normSq);
    for (let i = 0; i < this.dim; i++) {
      v[i] /= norm;
    }
    return v;
  }

  async encode(texts: string[]): Promise<Float64Array[]> {
    return texts.map((t) => this.encodeOne(t));
  }
}

/** Real encoder behind a dynamic import; absent runtime -> load failure. */
class TransformerEncoder implements Encoder {
  readonly dim = EMBEDDING_DIM;
  constructor(
    readonly id: string,
    private readonly pipe: (
      texts: string[],
      opts: { pooling: string; normalize: boolean },
    ) => Promise<{ data: Float32Array; dims: number[] }>,
  ) {}

  async encode(texts: string[]): Promise<Float64Array[]> {
    const out: Float64Array[] = [];
    for (const text of texts) {
      const result = await this.pipe([text], { pooling: "mean", normalize: true });
      out.push(Float64Array.from(result.data));
    }
    return out;
  }
}

export async function loadEncoder(
  encoderId: string = DEFAULT_ENCODER_ID,
  fake = false,
): Promise<Encoder> {
  if (fake) {
    return new FakeEncoder();
  }
  let transformers: any;
  try {
    transformers = await import("@xenova/transformers");
  } catch (err) {
    throw new EncoderLoadError(
      `cannot load encoder ${encoderId}: @xenova/transformers is not ` +
        `installed (${err instanceof Error ? err.message : err}); ` +
        `use --fake-encoder for offline runs`,
    );
  }
  try {
    const pipe = await transformers.pipeline("feature-extraction", encoderId);
    return new TransformerEncoder(encoderId, pipe);
  } catch (err) {
    throw new EncoderLoadError(
      `encoder ${encoderId} failed to load: ${err instanceof Error ? err.message : err}`,
    );
  }
}
