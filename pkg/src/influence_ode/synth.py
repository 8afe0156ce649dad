"""Synthetic ground-truth cohorts for verifying weight identification.

Generates networks whose influencer counts match a configured mean/variance,
draws stable influence weights, and simulates noisy trajectories, so the
regression pipeline can be checked against known weights.  Defaults mirror
the reference cohort shape: 87 recipients, influencer count mean 17.655 and
variance 123.07, 70 kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Mapping

import numpy as np

from . import dynamics
from .dynamics import InfluenceNetwork, InfluenceWeights, OpinionSeries, Recipient


@dataclass(frozen=True)
class SynthConfig:
    n_recipients: int = 87
    influencer_count_mean: float = 17.655
    influencer_count_var: float = 123.07
    n_kernels: int = 70
    noise_sigma: float = 0.0
    weight_bound: float = 1.0
    stability_margin: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_recipients < 1:
            raise ValueError("n_recipients must be >= 1")
        if self.influencer_count_mean <= 0:
            raise ValueError("influencer_count_mean must be > 0")
        if self.influencer_count_var < 0:
            raise ValueError("influencer_count_var must be >= 0")
        if self.n_kernels < 2:
            raise ValueError("n_kernels must be >= 2")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ValueError("noise_sigma must be finite and >= 0")
        if not 0.0 <= self.weight_bound <= 1.0:
            raise ValueError("weight_bound must be in [0, 1]")
        if not 0.0 < self.stability_margin <= 1.0:
            raise ValueError("stability_margin must be in (0, 1]")

    @classmethod
    def from_dict(cls, data: Mapping) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**data)

    def with_seed(self, seed: int) -> "SynthConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class SynthDataset:
    config: SynthConfig
    network: InfluenceNetwork
    true_weights: dict[str, InfluenceWeights]
    series: dict[str, OpinionSeries]


def _streams(config: SynthConfig) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator, int]:
    """Independent child streams (network, weights, initial) plus a sim seed."""
    root = np.random.SeedSequence(config.seed % 2**64)
    net_ss, w_ss, init_ss, sim_ss = root.spawn(4)
    sim_seed = int(sim_ss.generate_state(1, np.uint64)[0])
    return (
        np.random.default_rng(net_ss),
        np.random.default_rng(w_ss),
        np.random.default_rng(init_ss),
        sim_seed,
    )


def _user_pool(config: SynthConfig) -> tuple[list[str], list[str]]:
    """Recipient ids plus extra pure-influencer ids."""
    width = max(3, len(str(config.n_recipients - 1)))
    recipients = [f"r{i:0{width}d}" for i in range(config.n_recipients)]
    n_extra = max(10, math.ceil(2 * config.influencer_count_mean))
    extras = [f"u{i:0{width}d}" for i in range(n_extra)]
    return recipients, extras


def _draw_counts(rng: np.random.Generator, config: SynthConfig, size: int, max_count: int) -> np.ndarray:
    """Influencer counts with the configured mean/variance, clipped to [1, max_count].

    Variance above the mean uses a negative binomial (the reference cohort's
    variance far exceeds its mean, ruling out Poisson); variance zero is
    degenerate; variance at or below the mean falls back to a matched
    binomial.
    """
    m, v = config.influencer_count_mean, config.influencer_count_var
    if v == 0.0:
        counts = np.full(size, round(m), dtype=int)
    elif v > m:
        r = m * m / (v - m)
        p = r / (r + m)
        counts = rng.negative_binomial(r, p, size=size)
    else:
        n_trials = max(1, round(m * m / (m - v)))
        counts = rng.binomial(n_trials, min(1.0, m / n_trials), size=size)
    return np.clip(counts, 1, max_count)


def gen_network(config: SynthConfig) -> InfluenceNetwork:
    """Random influence network with the configured count distribution.

    Influencers are sampled without replacement from a shared pool of
    recipients plus pure influencers, so recipients can influence each other
    and share influencers.  Counts are additionally capped at n_kernels - 3
    to keep every synthetic model identifiable (more observations than
    predictors); deterministic for a fixed seed.
    """
    rng, _, _, _ = _streams(config)
    recipients, extras = _user_pool(config)
    pool = recipients + extras
    max_count = min(len(pool) - 1, config.n_kernels - 3)
    if max_count < 1 or config.influencer_count_mean > len(pool) - 1:
        raise ValueError(
            f"infeasible config: mean {config.influencer_count_mean} influencers "
            f"with pool {len(pool)} and {config.n_kernels} kernels"
        )
    counts = _draw_counts(rng, config, len(recipients), max_count)

    entries = []
    for rid, count in zip(recipients, counts):
        candidates = [u for u in pool if u != rid]
        chosen = rng.choice(len(candidates), size=int(count), replace=False)
        entries.append(Recipient(rid, tuple(candidates[i] for i in chosen)))
    return InfluenceNetwork(tuple(entries))


def gen_weights(
    network: InfluenceNetwork, config: SynthConfig
) -> dict[str, InfluenceWeights]:
    """Random influence weights kept inside the stability region.

    Weights are drawn uniform in [-weight_bound, weight_bound]; each
    recipient's coefficient row is then rescaled (downward only) so
    sum(|beta|) <= 1 - stability_margin, which keeps 70-kernel trajectories
    bounded.  Emitted weights always lie in [-1, 1].
    """
    _, rng, _, _ = _streams(config)
    target = 1.0 - config.stability_margin
    out = {}
    for r in network.recipients:
        b = config.weight_bound
        w_self = float(rng.uniform(-b, b))
        w_inf = rng.uniform(-b, b, size=len(r.influencer_ids))
        beta_self = w_self - math.fsum(w_inf.tolist())
        total = abs(beta_self) + float(np.abs(w_inf).sum())
        if total > target:
            scale = target / total
            beta_self *= scale
            w_inf = w_inf * scale
            w_self = beta_self + math.fsum(w_inf.tolist())
        out[r.recipient_id] = InfluenceWeights(
            r.recipient_id, w_self, dict(zip(r.influencer_ids, w_inf.tolist()))
        )
    return out


def gen_dataset(config: SynthConfig) -> SynthDataset:
    """Network, true weights, and simulated trajectories, all seed-determined.

    Initial opinions are uniform in [0, 1].  Pure influencers (pool members
    who are nobody's recipient) follow scripted i.i.d. uniform trajectories:
    a constant influencer column would make its weight unidentifiable, and
    real influencer opinions move over time anyway.
    """
    network = gen_network(config)
    true_weights = gen_weights(network, config)
    _, _, rng, sim_seed = _streams(config)

    users = network.all_user_ids()
    initial = {uid: float(rng.uniform(0.0, 1.0)) for uid in users}
    recipient_set = set(network.recipient_ids())
    scripted = {
        uid: rng.uniform(0.0, 1.0, size=config.n_kernels)
        for uid in users
        if uid not in recipient_set
    }

    series = dynamics.simulate(
        network,
        true_weights,
        initial,
        steps=config.n_kernels - 1,
        noise_sigma=config.noise_sigma,
        seed=sim_seed,
        scripted=scripted,
    )
    return SynthDataset(config, network, true_weights, series)


@dataclass(frozen=True)
class RecoveryReport:
    max_abs_error: float
    rmse: float
    per_recipient: dict[str, dict[str, float]]


def evaluate_recovery(
    true_weights: Mapping[str, InfluenceWeights],
    fitted_weights: Mapping[str, InfluenceWeights],
) -> RecoveryReport:
    """Elementwise comparison of fitted vs true weights (w_ii and every w_ij)."""
    if set(true_weights) != set(fitted_weights):
        raise ValueError(
            f"recipient sets differ: {sorted(set(true_weights) ^ set(fitted_weights))}"
        )
    per_recipient = {}
    all_errors = []
    for rid in sorted(true_weights):
        t, f = true_weights[rid], fitted_weights[rid]
        if set(t.influence_weights) != set(f.influence_weights):
            raise ValueError(f"influencer sets differ for recipient {rid!r}")
        errors = [abs(f.self_weight - t.self_weight)] + [
            abs(f.influence_weights[j] - t.influence_weights[j])
            for j in t.influence_weights
        ]
        per_recipient[rid] = {
            "max_abs_error": max(errors),
            "rmse": math.sqrt(math.fsum(e * e for e in errors) / len(errors)),
        }
        all_errors.extend(errors)
    return RecoveryReport(
        max_abs_error=max(all_errors),
        rmse=math.sqrt(math.fsum(e * e for e in all_errors) / len(all_errors)),
        per_recipient=per_recipient,
    )
