import type { KernelSpec, Post } from "../src/types.js";

export const SPEC: KernelSpec = {
  epoch_start: "2020-03-01",
  kernel_days: 10,
  num_kernels: 70,
};

const TOPIC_WORDS = [
  "vaccine rollout news",
  "lockdown rules changed again",
  "new variant spreading fast",
  "mask mandate lifted today",
  "booster appointment booked",
];

/** Deterministic synthetic corpus: each user posts in every kernel. */
export function syntheticCorpus(
  users: string[],
  spec: KernelSpec = SPEC,
  postsPerKernel = 2,
): Post[] {
  const posts: Post[] = [];
  const start = Date.UTC(2020, 2, 1);
  for (const [u, user] of users.entries()) {
    for (let k = 0; k < spec.num_kernels; k++) {
      for (let p = 0; p < postsPerKernel; p++) {
        const ts = new Date(
          start + (k * spec.kernel_days + 1 + p) * 86_400_000,
        ).toISOString();
        const phrase = TOPIC_WORDS[(u + k + p) % TOPIC_WORDS.length];
        posts.push({
          user,
          ts,
          text: `${phrase} says ${user} in window ${k} take ${p}`,
        });
      }
    }
  }
  return posts;
}

export const KEYWORDS = ["vaccine", "lockdown", "variant", "mask", "booster"];
