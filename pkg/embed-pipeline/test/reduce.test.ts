import { describe, expect, it } from "vitest";

import { FakeEncoder } from "../src/encoder.js";
import { embedCorpus } from "../src/pipeline.js";
import { reduceTo1d } from "../src/reduce.js";
import { KEYWORDS, SPEC, syntheticCorpus } from "./helpers.js";

const encoder = new FakeEncoder();

async function kernelEmbeddings(users: string[]) {
  const { embeddings } = await embedCorpus(
    syntheticCorpus(users),
    KEYWORDS,
    SPEC,
    encoder,
  );
  return embeddings;
}

describe("reduceTo1d", () => {
  it("maps every input row to one scalar row", async () => {
    const embeddings = await kernelEmbeddings(["u1", "u2", "u3"]);
    const rows = reduceTo1d(embeddings, 42);
    expect(rows.length).toBe(embeddings.length);
    expect(rows.length).toBe(3 * 70);
    for (let i = 0; i < rows.length; i++) {
      expect(rows[i].user).toBe(embeddings[i].user);
      expect(rows[i].kernel).toBe(embeddings[i].kernel);
      expect(Number.isFinite(rows[i].opinion)).toBe(true);
    }
  });

  it("is deterministic for a fixed seed", async () => {
    const embeddings = await kernelEmbeddings(["u1", "u2"]);
    const a = reduceTo1d(embeddings, 7);
    const b = reduceTo1d(embeddings, 7);
    expect(a).toEqual(b);
  });

  it("varies with the seed", async () => {
    const embeddings = await kernelEmbeddings(["u1", "u2"]);
    const a = reduceTo1d(embeddings, 7);
    const b = reduceTo1d(embeddings, 8);
    expect(a.map((r) => r.opinion)).not.toEqual(b.map((r) => r.opinion));
  });

  it("rejects inputs too small for a neighborhood", async () => {
    const embeddings = await kernelEmbeddings(["u1"]);
    expect(() => reduceTo1d(embeddings.slice(0, 1), 1)).toThrow(/too few rows/);
    expect(() => reduceTo1d([], 1)).toThrow(/too few rows/);
  });

  it("clamps the neighborhood to the row count", async () => {
    const embeddings = await kernelEmbeddings(["u1"]);
    const rows = reduceTo1d(embeddings.slice(0, 5), 3, 15);
    expect(rows.length).toBe(5);
  });
});
