/** Shared types for the post -> opinion-series pipeline. */

export interface Post {
  user: string;
  /** RFC-3339 timestamp. */
  ts: string;
  text: string;
}

export interface KernelSpec {
  /** YYYY-MM-DD, start of kernel 0 at UTC midnight. */
  epoch_start: string;
  kernel_days: number;
  num_kernels: number;
}

/** Mean embedding of one user's topic posts inside one kernel. */
export interface KernelEmbedding {
  user: string;
  kernel: number;
  vector: Float64Array;
}

/** One line of the series CSV contract: user_id,kernel,opinion. */
export interface SeriesRow {
  user: string;
  kernel: number;
  opinion: number;
}
