#!/usr/bin/env node
/**
 * embed --posts posts.jsonl --keywords kw.txt --kernel-spec spec.json
 *       --out series.csv --seed N [--fake-encoder] [--encoder id]
 *       [--neighbors K]
 *
 * posts.jsonl: one JSON object per line {"user": str, "ts": RFC-3339,
 * "text": str}.  Output conforms to the core's series CSV contract.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { exportSeries } from "./csv.js";
import { DEFAULT_ENCODER_ID, loadEncoder } from "./encoder.js";
import { parseKeywordsFile } from "./filter.js";
import { embedCorpus } from "./pipeline.js";
import { DEFAULT_NEIGHBORS, reduceTo1d } from "./reduce.js";
import type { KernelSpec, Post } from "./types.js";

export function parsePostsJsonl(content: string): Post[] {
  const posts: Post[] = [];
  const lines = content.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch {
      throw new Error(`posts line ${i + 1}: invalid JSON`);
    }
    const post = obj as Record<string, unknown>;
    if (
      typeof post.user !== "string" ||
      typeof post.ts !== "string" ||
      typeof post.text !== "string"
    ) {
      throw new Error(`posts line ${i + 1}: need string fields user, ts, text`);
    }
    posts.push({ user: post.user, ts: post.ts, text: post.text });
  }
  return posts;
}

export interface EmbedOptions {
  posts: string;
  keywords: string;
  kernelSpec: string;
  out: string;
  seed: number;
  fakeEncoder: boolean;
  encoderId: string;
  neighbors: number;
}

export async function runEmbed(opts: EmbedOptions): Promise<void> {
  const posts = parsePostsJsonl(readFileSync(opts.posts, "utf8"));
  const keywords = parseKeywordsFile(readFileSync(opts.keywords, "utf8"));
  const spec = JSON.parse(readFileSync(opts.kernelSpec, "utf8")) as KernelSpec;

  const encoder = await loadEncoder(opts.encoderId, opts.fakeEncoder);
  const { embeddings, stats } = await embedCorpus(posts, keywords, spec, encoder);
  const rows = reduceTo1d(embeddings, opts.seed, opts.neighbors);
  writeFileSync(opts.out, exportSeries(rows), "utf8");
  console.error(
    `embed: ${stats.topicPosts}/${stats.totalPosts} topic posts ` +
      `(${stats.outOfSpan} out of span), ${rows.length} series rows -> ${opts.out}`,
  );
}

export async function main(argv: string[]): Promise<number> {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        posts: { type: "string" },
        keywords: { type: "string" },
        "kernel-spec": { type: "string" },
        out: { type: "string" },
        seed: { type: "string", default: "0" },
        "fake-encoder": { type: "boolean", default: false },
        encoder: { type: "string", default: DEFAULT_ENCODER_ID },
        neighbors: { type: "string", default: String(DEFAULT_NEIGHBORS) },
      },
    });
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
  const v = parsed.values;
  for (const required of ["posts", "keywords", "kernel-spec", "out"] as const) {
    if (!v[required]) {
      console.error(`error: --${required} is required`);
      return 2;
    }
  }
  try {
    await runEmbed({
      posts: v.posts!,
      keywords: v.keywords!,
      kernelSpec: v["kernel-spec"]!,
      out: v.out!,
      seed: Number(v.seed),
      fakeEncoder: v["fake-encoder"]!,
      encoderId: v.encoder!,
      neighbors: Number(v.neighbors),
    });
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (isDirectRun) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
