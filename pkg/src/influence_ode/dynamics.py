"""Opinion state model and the discrete-time influence update.

A recipient's opinion advances by

    x_i(t+1) = w_ii * x_i(t) + sum_j w_ij * (x_j(t) - x_i(t))

where j ranges over the recipient's influencers.  The same map in regression
form uses coefficients b_ii = w_ii - sum_j w_ij and b_ij = w_ij, so either
parameterization describes the identical linear update.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

WEIGHT_BOUND = 1.0  # declared magnitude bound for w_ii and w_ij; reported, never enforced


class MissingUserError(KeyError):
    """An update referenced a user with no known opinion."""

    def __init__(self, user_id: str):
        super().__init__(user_id)
        self.user_id = user_id

    def __str__(self) -> str:
        return f"no opinion available for user {self.user_id!r}"


@dataclass(frozen=True, eq=False)
class OpinionSeries:
    """One user's opinion value per time kernel, with an observed mask.

    ``values[k]`` is the opinion at kernel k; ``observed[k]`` says whether the
    value came from data (False marks a gap to be forward-filled, the value is
    NaN until filled).  Arrays are stored read-only.
    """

    user_id: str
    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        observed = np.array(self.observed, dtype=bool)
        if values.ndim != 1 or observed.shape != values.shape:
            raise ValueError(
                f"series for {self.user_id!r}: values and observed must be "
                f"1-d and the same length"
            )
        if values.size < 1:
            raise ValueError(f"series for {self.user_id!r} is empty")
        if not np.all(np.isfinite(values[observed])):
            raise ValueError(
                f"series for {self.user_id!r} has a non-finite observed value"
            )
        values.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)

    @classmethod
    def fully_observed(cls, user_id: str, values) -> "OpinionSeries":
        values = np.asarray(values, dtype=float)
        return cls(user_id, values, np.ones(values.shape, dtype=bool))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def is_filled(self) -> bool:
        """True when every position holds a finite value."""
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True)
class InfluenceWeights:
    """Per-recipient self-weight w_ii and influence weights w_ij.

    ``influence_weights`` preserves network order (recipient's influencer
    list); that order fixes the regression column order downstream.
    """

    recipient_id: str
    self_weight: float
    influence_weights: Mapping[str, float]

    def __post_init__(self):
        if self.recipient_id in self.influence_weights:
            raise ValueError(
                f"recipient {self.recipient_id!r} cannot be its own influencer"
            )
        if not math.isfinite(self.self_weight):
            raise ValueError(f"non-finite self-weight for {self.recipient_id!r}")
        for j, w in self.influence_weights.items():
            if not math.isfinite(w):
                raise ValueError(
                    f"non-finite influence weight for {self.recipient_id!r} <- {j!r}"
                )
        object.__setattr__(self, "influence_weights", dict(self.influence_weights))

    @property
    def influencer_ids(self) -> tuple[str, ...]:
        return tuple(self.influence_weights)

    @property
    def betas(self) -> dict[str, float]:
        """Regression coefficients keyed by user id, recipient first.

        b_ij = w_ij for each influencer j, and
        b_ii = w_ii - sum_j w_ij (exact algebraic identity).
        """
        beta_self = math.fsum(
            [self.self_weight] + [-w for w in self.influence_weights.values()]
        )
        out = {self.recipient_id: beta_self}
        out.update(self.influence_weights)
        return out

    def bound_violations(self, bound: float = WEIGHT_BOUND) -> list[tuple[str, float]]:
        """Weights whose magnitude exceeds the declared bound.

        Violations are reported, never clamped; fitted weights may legally
        fall outside [-1, 1].
        """
        out = []
        if abs(self.self_weight) > bound:
            out.append((self.recipient_id, self.self_weight))
        for j, w in self.influence_weights.items():
            if abs(w) > bound:
                out.append((j, w))
        return out


@dataclass(frozen=True)
class Recipient:
    """One recipient and its ordered influencer list (following edges)."""

    recipient_id: str
    influencer_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "influencer_ids", tuple(self.influencer_ids))
        if self.recipient_id in self.influencer_ids:
            raise ValueError(
                f"recipient {self.recipient_id!r} appears in its own influencer list"
            )
        if len(set(self.influencer_ids)) != len(self.influencer_ids):
            raise ValueError(
                f"duplicate influencer for recipient {self.recipient_id!r}"
            )


@dataclass(frozen=True)
class InfluenceNetwork:
    """Recipients and their influencer lists.

    A recipient may appear as an influencer in another recipient's list;
    influencer-influencer edges are deliberately absent from each model.
    """

    recipients: tuple[Recipient, ...] = field(default_factory=tuple)

    def __post_init__(self):
        recipients = tuple(
            r if isinstance(r, Recipient) else Recipient(*r) for r in self.recipients
        )
        ids = [r.recipient_id for r in recipients]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate recipient id in network")
        object.__setattr__(self, "recipients", recipients)

    def recipient_ids(self) -> list[str]:
        return [r.recipient_id for r in self.recipients]

    def influencers_of(self, recipient_id: str) -> tuple[str, ...]:
        for r in self.recipients:
            if r.recipient_id == recipient_id:
                return r.influencer_ids
        raise KeyError(recipient_id)

    def all_user_ids(self) -> list[str]:
        """Every user mentioned anywhere, sorted."""
        users = set()
        for r in self.recipients:
            users.add(r.recipient_id)
            users.update(r.influencer_ids)
        return sorted(users)

    def influencer_counts(self) -> list[int]:
        return [len(r.influencer_ids) for r in self.recipients]

    def influencer_count_mean(self) -> float:
        return float(np.mean(self.influencer_counts()))

    def influencer_count_var(self) -> float:
        """Population variance of the per-recipient influencer count."""
        return float(np.var(self.influencer_counts()))

    def recipients_without_influencers(self) -> list[str]:
        """Recipients whose model would be self-only; flagged, not an error."""
        return [r.recipient_id for r in self.recipients if not r.influencer_ids]


def influence_force(x_i: float, x_j: float) -> float:
    """Force exerted on a recipient at x_i by an influencer at x_j: x_j - x_i."""
    return x_j - x_i


def step(opinions_at_t: Mapping[str, float], weights: InfluenceWeights) -> float:
    """Advance one recipient by one kernel.

    Args:
        opinions_at_t: opinion of every relevant user at the current kernel;
            must contain the recipient and each of its influencers.
        weights: the recipient's weights.

    Returns:
        w_ii * x_i + sum_j w_ij * (x_j - x_i), summed exactly (fsum).

    Raises:
        MissingUserError: a referenced user has no opinion in the map.
    """
    try:
        x_i = opinions_at_t[weights.recipient_id]
    except KeyError:
        raise MissingUserError(weights.recipient_id) from None
    terms = [weights.self_weight * x_i]
    for j, w_ij in weights.influence_weights.items():
        try:
            x_j = opinions_at_t[j]
        except KeyError:
            raise MissingUserError(j) from None
        terms.append(w_ij * influence_force(x_i, x_j))
    return math.fsum(terms)


def _user_rng(seed: int, user_id: str) -> np.random.Generator:
    # Stream split per user from (seed, sha256(user_id)) so parallel and
    # serial evaluation orders draw identical noise.
    digest = hashlib.sha256(user_id.encode("utf-8")).digest()
    tag = int.from_bytes(digest[:16], "big")
    return np.random.default_rng(np.random.SeedSequence([seed % 2**64, tag]))


def simulate(
    network: InfluenceNetwork,
    all_weights: Mapping[str, InfluenceWeights],
    initial: Mapping[str, float],
    steps: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
    scripted: Mapping[str, Sequence[float]] | None = None,
) -> dict[str, OpinionSeries]:
    """Iterate the influence update over a whole network.

    Recipients update synchronously from the opinions at the previous kernel.
    Users who are nobody's recipient hold their initial value, unless a
    scripted trajectory of length steps+1 is supplied for them.  With
    noise_sigma > 0 each recipient update gains additive Gaussian noise drawn
    from a per-recipient stream, so results are deterministic for a given
    seed regardless of evaluation order.  noise_sigma=0 reproduces the exact
    update with no random draws.

    Returns:
        user_id -> OpinionSeries of length steps+1, for every user involved.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    if not (noise_sigma >= 0.0 and math.isfinite(noise_sigma)):
        raise ValueError(f"noise_sigma must be finite and >= 0, got {noise_sigma}")
    scripted = dict(scripted) if scripted else {}

    recipient_ids = network.recipient_ids()
    for rid in recipient_ids:
        if rid not in all_weights:
            raise ValueError(f"no weights supplied for recipient {rid!r}")
        if set(all_weights[rid].influence_weights) != set(network.influencers_of(rid)):
            raise ValueError(
                f"weights for recipient {rid!r} do not match its influencer list"
            )
        if rid in scripted:
            raise ValueError(f"recipient {rid!r} cannot follow a scripted trajectory")

    users = set(network.all_user_ids()) | set(initial) | set(scripted)
    for uid in sorted(users):
        if uid in scripted:
            traj = np.asarray(scripted[uid], dtype=float)
            if traj.shape != (steps + 1,):
                raise ValueError(
                    f"scripted trajectory for {uid!r} must have length steps+1"
                )
            if not np.all(np.isfinite(traj)):
                raise ValueError(f"scripted trajectory for {uid!r} is non-finite")
            scripted[uid] = traj
        elif uid not in initial:
            raise MissingUserError(uid)

    recipient_set = set(recipient_ids)
    current = {
        uid: scripted[uid][0] if uid in scripted else float(initial[uid])
        for uid in sorted(users)
    }
    noise = {}
    if noise_sigma > 0.0 and steps > 0:
        for rid in recipient_ids:
            noise[rid] = _user_rng(seed, rid).normal(0.0, noise_sigma, size=steps)

    trajectories = {uid: [current[uid]] for uid in sorted(users)}
    for t in range(steps):
        nxt = {}
        for uid in sorted(users):
            if uid in recipient_set:
                x = step(current, all_weights[uid])
                if uid in noise:
                    x += noise[uid][t]
                nxt[uid] = x
            elif uid in scripted:
                nxt[uid] = float(scripted[uid][t + 1])
            else:
                nxt[uid] = current[uid]
        current = nxt
        for uid, x in current.items():
            trajectories[uid].append(x)

    return {
        uid: OpinionSeries.fully_observed(uid, traj)
        for uid, traj in trajectories.items()
    }
