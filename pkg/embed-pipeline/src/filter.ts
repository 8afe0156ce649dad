/**
 * Keyword filter over the post corpus.
 *
 * Matching is case-insensitive whole-token containment, multi-word keywords
 * as contiguous token runs — the same rule the core applies, so the two
 * sides agree on which posts are topic-specific.
 */

import type { Post } from "./types.js";

const TOKEN_RE = /[\p{L}\p{M}\p{N}_']+/gu;

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}

export interface FilterResult {
  posts: Post[];
  total: number;
  topic: number;
}

export function topicFilter(posts: Post[], keywords: string[]): FilterResult {
  if (keywords.length === 0) {
    throw new Error("at least one keyword required");
  }
  const needles = keywords.map((kw) => tokenize(kw));
  if (needles.some((n) => n.length === 0)) {
    throw new Error("keyword with no word tokens");
  }

  const kept: Post[] = [];
  for (const post of posts) {
    const tokens = tokenize(post.text);
    const tokenSet = new Set(tokens);
    const hit = needles.some((needle) => {
      if (needle.length === 1) {
        return tokenSet.has(needle[0]);
      }
      for (let i = 0; i + needle.length <= tokens.length; i++) {
        if (needle.every((t, j) => tokens[i + j] === t)) {
          return true;
        }
      }
      return false;
    });
    if (hit) {
      kept.push(post);
    }
  }
  return { posts: kept, total: posts.length, topic: kept.length };
}

/** One keyword per line; blank lines and #-comments ignored. */
export function parseKeywordsFile(content: string): string[] {
  return content
    .split(/\r?\n/)
    .map((line) => line.trim())
    .filter((line) => line.length > 0 && !line.startsWith("#"));
}
