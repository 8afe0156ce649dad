"""Turn timestamped observations into kernel-aligned opinion series.

A kernel is a fixed-length window of whole days; kernel k covers
[epoch_start + k*kernel_days, epoch_start + (k+1)*kernel_days), half-open,
so an event landing exactly on a boundary belongs to the later kernel.
Timestamps are normalized to UTC before assignment.

This module also owns the on-disk contracts:

  events file (CSV)      user_id,timestamp,value      RFC-3339 timestamps
  series file (CSV)      user_id,kernel,opinion       absent row = missing
  network file (JSON)    {"recipients": [{"id": ..., "influencers": [...]}]}
  kernel spec (JSON)     {"epoch_start": "YYYY-MM-DD", "kernel_days", "num_kernels"}
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dynamics import InfluenceNetwork, OpinionSeries, Recipient

SECONDS_PER_DAY = 86400

SERIES_HEADER = ["user_id", "kernel", "opinion"]
EVENTS_HEADER = ["user_id", "timestamp", "value"]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel calendar: epoch start date, kernel length in days, kernel count."""

    epoch_start: date
    kernel_days: int = 10
    num_kernels: int = 70

    def __post_init__(self):
        if isinstance(self.epoch_start, str):
            object.__setattr__(self, "epoch_start", date.fromisoformat(self.epoch_start))
        if self.kernel_days < 1:
            raise ValueError(f"kernel_days must be >= 1, got {self.kernel_days}")
        if self.num_kernels < 1:
            raise ValueError(f"num_kernels must be >= 1, got {self.num_kernels}")

    @property
    def total_days(self) -> int:
        return self.kernel_days * self.num_kernels

    @property
    def span_start(self) -> datetime:
        return datetime.combine(self.epoch_start, datetime.min.time(), timezone.utc)

    @property
    def span_end(self) -> datetime:
        return self.span_start + timedelta(days=self.total_days)

    def kernel_index(self, timestamp: datetime) -> int | None:
        """Kernel containing the instant, or None when outside the span."""
        ts = _to_utc(timestamp)
        seconds = (ts - self.span_start).total_seconds()
        k = math.floor(seconds / (self.kernel_days * SECONDS_PER_DAY))
        return k if 0 <= k < self.num_kernels else None

    def kernel_start(self, k: int) -> datetime:
        return self.span_start + timedelta(days=k * self.kernel_days)


@dataclass(frozen=True)
class ObservationEvent:
    """One scalar opinion observation for one post."""

    user_id: str
    timestamp: datetime
    value: float

    def __post_init__(self):
        object.__setattr__(self, "timestamp", _to_utc(self.timestamp))
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value for user {self.user_id!r}")


def _to_utc(ts: datetime) -> datetime:
    """Normalize to UTC; naive timestamps are taken as already UTC."""
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC-3339 timestamp ('Z' suffix accepted)."""
    return datetime.fromisoformat(text.strip().replace("Z", "+00:00"))


@dataclass(frozen=True)
class AggregationResult:
    """Kernel-averaged series per user plus the dropped out-of-span count."""

    series: dict[str, OpinionSeries]
    out_of_span: int


def aggregate_kernels(
    events: Iterable[ObservationEvent], spec: KernelSpec
) -> AggregationResult:
    """Average each user's event values inside each kernel.

    A kernel with no events stays unobserved (NaN value, mask False); events
    outside the spec span are dropped and counted, never fatal.  Events may
    arrive in any order; users come back sorted by id.
    """
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, np.ndarray] = {}
    out_of_span = 0
    for ev in events:
        k = spec.kernel_index(ev.timestamp)
        if k is None:
            out_of_span += 1
            continue
        if ev.user_id not in sums:
            sums[ev.user_id] = np.zeros(spec.num_kernels)
            counts[ev.user_id] = np.zeros(spec.num_kernels, dtype=int)
        sums[ev.user_id][k] += ev.value
        counts[ev.user_id][k] += 1

    series = {}
    for uid in sorted(sums):
        observed = counts[uid] > 0
        values = np.full(spec.num_kernels, np.nan)
        values[observed] = sums[uid][observed] / counts[uid][observed]
        series[uid] = OpinionSeries(uid, values, observed)
    return AggregationResult(series=series, out_of_span=out_of_span)


def kernel_post_counts(
    events: Iterable[ObservationEvent], spec: KernelSpec
) -> dict[str, dict[int, int]]:
    """Per-user post count per kernel; out-of-span events are ignored."""
    counts: dict[str, dict[int, int]] = {}
    for ev in events:
        k = spec.kernel_index(ev.timestamp)
        if k is None:
            continue
        per_user = counts.setdefault(ev.user_id, {})
        per_user[k] = per_user.get(k, 0) + 1
    return counts


def forward_fill(series: OpinionSeries, leading: str = "backfill") -> OpinionSeries:
    """Fill unobserved kernels from the nearest earlier observed value.

    Leading gaps (before the first observation) have no earlier value; the
    default backfills them from the first observed value, ``leading="drop"``
    truncates them instead (shortening the series).  The observed mask is
    preserved: it records what was actually seen, not what was imputed.
    Idempotent.

    Raises:
        ValueError: the series has no observed kernel at all.
    """
    if leading not in ("backfill", "drop"):
        raise ValueError(f"unknown leading-gap policy {leading!r}")
    observed = series.observed
    if not observed.any():
        raise ValueError(f"series for {series.user_id!r} has no observed kernels")
    first = int(np.argmax(observed))

    values = np.array(series.values)
    last = values[first]
    for k in range(len(values)):
        if observed[k]:
            last = values[k]
        else:
            values[k] = last if k > first else values[first]
    if leading == "drop" and first > 0:
        return OpinionSeries(series.user_id, values[first:], observed[first:])
    return OpinionSeries(series.user_id, values, observed)


def activity_filter(
    per_user_kernel_counts: Mapping[str, Mapping[int, int]],
    min_active_kernels: int = 60,
    min_posts_per_kernel: int = 1,
) -> set[str]:
    """Keep users active in at least ``min_active_kernels`` kernels.

    A kernel counts as active when it holds >= min_posts_per_kernel posts
    (default 1).  Raising either threshold never adds users.
    """
    kept = set()
    for uid, counts in per_user_kernel_counts.items():
        active = sum(1 for c in counts.values() if c >= min_posts_per_kernel)
        if active >= min_active_kernels:
            kept.add(uid)
    return kept


def build_network(
    following_edges: Iterable[tuple[str, str]],
    active: set[str],
    recipients: set[str],
) -> InfluenceNetwork:
    """Assemble per-recipient influencer lists from following edges.

    Each recipient's influencers are the accounts it follows that are in the
    active set, in edge order, self-loops removed.  Edges between influencers
    are discarded by construction: only edges whose follower is a recipient
    matter.  Recipients must themselves be active.
    """
    stray = recipients - active
    if stray:
        raise ValueError(f"recipients not in active set: {sorted(stray)}")
    followees: dict[str, list[str]] = {rid: [] for rid in recipients}
    for follower, followee in following_edges:
        if follower not in recipients:
            continue
        if followee == follower or followee not in active:
            continue
        if followee not in followees[follower]:
            followees[follower].append(followee)
    return InfluenceNetwork(
        tuple(Recipient(rid, tuple(followees[rid])) for rid in sorted(recipients))
    )


@dataclass(frozen=True)
class TopicFilterResult:
    posts: list[tuple[str, datetime, str]]
    total: int
    topic: int


_TOKEN_RE = re.compile(r"[\w']+")


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def topic_filter(
    posts: Iterable[tuple[str, datetime, str]], keywords: Sequence[str]
) -> TopicFilterResult:
    """Keep posts containing at least one keyword.

    Matching is case-insensitive whole-token containment; a multi-word
    keyword must appear as a contiguous token run.  Reports total and
    topic-matching counts.
    """
    if not keywords:
        raise ValueError("at least one keyword required")
    needles = [tuple(_tokens(kw)) for kw in keywords]
    if any(not n for n in needles):
        raise ValueError("keyword with no word tokens")

    kept = []
    total = 0
    for post in posts:
        total += 1
        toks = _tokens(post[2])
        tokset = set(toks)
        for needle in needles:
            if len(needle) == 1:
                hit = needle[0] in tokset
            else:
                hit = any(
                    tuple(toks[i : i + len(needle)]) == needle
                    for i in range(len(toks) - len(needle) + 1)
                )
            if hit:
                kept.append(post)
                break
    return TopicFilterResult(posts=kept, total=total, topic=len(kept))


# ---------------------------------------------------------------------------
# File formats


def _write_meta_sidecar(path: str, meta: dict | None) -> None:
    if meta is not None:
        with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
            json.dump({"meta": meta}, fh, sort_keys=True, indent=2)
            fh.write("\n")


def write_events_csv(path: str, events: Sequence[ObservationEvent], meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENTS_HEADER)
        for ev in events:
            writer.writerow([ev.user_id, ev.timestamp.isoformat(), repr(ev.value)])
    _write_meta_sidecar(path, meta)


def read_events_csv(path: str) -> list[ObservationEvent]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENTS_HEADER:
            raise ValueError(f"{path}: expected header {','.join(EVENTS_HEADER)!r}")
        events = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                events.append(
                    ObservationEvent(row[0], parse_rfc3339(row[1]), float(row[2]))
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return events


def write_series_csv(
    path: str, series: Mapping[str, OpinionSeries], meta: dict | None = None
) -> None:
    """Write one row per observed kernel; unobserved kernels stay absent."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SERIES_HEADER)
        for uid in sorted(series):
            s = series[uid]
            for k in range(len(s)):
                if s.observed[k]:
                    writer.writerow([uid, k, repr(float(s.values[k]))])
    _write_meta_sidecar(path, meta)


def read_series_csv(
    path: str, num_kernels: int | None = None
) -> tuple[dict[str, OpinionSeries], list[str]]:
    """Read a series file into per-user OpinionSeries plus parse warnings.

    Absent (user, kernel) rows mean missing-before-fill.  When num_kernels
    is None the series length is inferred as max kernel index + 1.  Rows
    with an out-of-range kernel, a duplicate (user, kernel), or a non-finite
    opinion produce warnings and are skipped; malformed rows are fatal.
    """
    rows: list[tuple[str, int, float]] = []
    warnings: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SERIES_HEADER:
            raise ValueError(f"{path}: expected header {','.join(SERIES_HEADER)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                kernel = int(row[1])
                opinion = float(row[2])
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: kernel must be an integer and opinion a number"
                ) from None
            if kernel < 0:
                warnings.append(f"{path}:{lineno}: negative kernel {kernel}, skipped")
                continue
            if not math.isfinite(opinion):
                warnings.append(f"{path}:{lineno}: non-finite opinion, skipped")
                continue
            rows.append((row[0], kernel, opinion))

    if num_kernels is None:
        if not rows:
            return {}, warnings
        num_kernels = max(k for _, k, _ in rows) + 1

    values: dict[str, np.ndarray] = {}
    observed: dict[str, np.ndarray] = {}
    for uid, kernel, opinion in rows:
        if kernel >= num_kernels:
            warnings.append(
                f"{path}: kernel {kernel} for user {uid!r} outside 0..{num_kernels - 1}, skipped"
            )
            continue
        if uid not in values:
            values[uid] = np.full(num_kernels, np.nan)
            observed[uid] = np.zeros(num_kernels, dtype=bool)
        if observed[uid][kernel]:
            warnings.append(
                f"{path}: duplicate row for user {uid!r} kernel {kernel}, first kept"
            )
            continue
        values[uid][kernel] = opinion
        observed[uid][kernel] = True

    series = {
        uid: OpinionSeries(uid, values[uid], observed[uid]) for uid in sorted(values)
    }
    return series, warnings


def write_network_json(
    path: str, network: InfluenceNetwork, meta: dict | None = None
) -> None:
    doc: dict = {
        "recipients": [
            {"id": r.recipient_id, "influencers": list(r.influencer_ids)}
            for r in network.recipients
        ]
    }
    if meta is not None:
        doc["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_network_json(path: str) -> InfluenceNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    try:
        recipients = tuple(
            Recipient(str(r["id"]), tuple(str(j) for j in r["influencers"]))
            for r in doc["recipients"]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed network file: {exc}") from None
    return InfluenceNetwork(recipients)


def write_kernel_spec_json(path: str, spec: KernelSpec, meta: dict | None = None) -> None:
    doc: dict = {
        "epoch_start": spec.epoch_start.isoformat(),
        "kernel_days": spec.kernel_days,
        "num_kernels": spec.num_kernels,
    }
    if meta is not None:
        doc["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_kernel_spec_json(path: str) -> KernelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    try:
        return KernelSpec(
            epoch_start=date.fromisoformat(doc["epoch_start"]),
            kernel_days=int(doc["kernel_days"]),
            num_kernels=int(doc["num_kernels"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed kernel spec: {exc}") from None
