import math

import numpy as np
import pytest

from influence_ode.dynamics import (
    InfluenceNetwork,
    InfluenceWeights,
    MissingUserError,
    OpinionSeries,
    Recipient,
    influence_force,
    simulate,
    step,
)

from oracles import beta_form_step


def make_weights(rng, recipient, influencers, scale=1.0):
    return InfluenceWeights(
        recipient,
        float(rng.uniform(-scale, scale)),
        {j: float(rng.uniform(-scale, scale)) for j in influencers},
    )


class TestInfluenceForce:
    def test_direct(self):
        assert influence_force(0.2, 0.5) == 0.5 - 0.2

    def test_identical_opinions_no_force(self):
        for c in [0.0, -3.5, 0.7, 1e6]:
            assert influence_force(c, c) == 0.0

    def test_antisymmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b = rng.uniform(-5, 5, size=2)
            assert influence_force(a, b) == -influence_force(b, a)


class TestStep:
    def test_pure_anchoring(self):
        w = InfluenceWeights("i", 1.0, {})
        assert step({"i": 0.7}, w) == 0.7

    def test_single_influencer(self):
        w = InfluenceWeights("i", 0.5, {"j": 0.5})
        assert step({"i": 0.0, "j": 1.0}, w) == 0.5

    def test_matches_beta_form(self):
        # Regression-form oracle: b_ii x_i + sum_j b_ij x_j.
        rng = np.random.default_rng(2)
        for _ in range(200):
            k = int(rng.integers(0, 6))
            w = make_weights(rng, "i", [f"j{m}" for m in range(k)])
            opinions = {"i": float(rng.uniform(-1, 1))}
            opinions.update({j: float(rng.uniform(-1, 1)) for j in w.influencer_ids})
            assert step(opinions, w) == pytest.approx(
                beta_form_step(w, opinions), abs=1e-12
            )

    def test_missing_user_named(self):
        w = InfluenceWeights("i", 0.5, {"j": 0.1})
        with pytest.raises(MissingUserError, match="'j'"):
            step({"i": 0.0}, w)
        with pytest.raises(MissingUserError, match="'i'"):
            step({"j": 0.0}, w)

    def test_linearity(self):
        # step(a*x + b*y) == a*step(x) + b*step(y) for fixed weights.
        rng = np.random.default_rng(3)
        for _ in range(100):
            k = int(rng.integers(1, 8))
            users = ["i"] + [f"j{m}" for m in range(k)]
            w = make_weights(rng, "i", users[1:])
            a, b = rng.uniform(-2, 2, size=2)
            x = {u: float(rng.uniform(-1, 1)) for u in users}
            y = {u: float(rng.uniform(-1, 1)) for u in users}
            combined = {u: a * x[u] + b * y[u] for u in users}
            lhs = step(combined, w)
            rhs = a * step(x, w) + b * step(y, w)
            assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(lhs)))

    def test_w_beta_equivalence_ulps(self):
        # The two parameterizations agree to a few ulps measured at the
        # scale of the largest summand (cancellation can make the result
        # itself arbitrarily small).
        rng = np.random.default_rng(4)
        for _ in range(300):
            k = int(rng.integers(0, 20))
            w = make_weights(rng, "i", [f"j{m}" for m in range(k)])
            opinions = {"i": float(rng.uniform(-1, 1))}
            opinions.update({j: float(rng.uniform(-1, 1)) for j in w.influencer_ids})
            a = step(opinions, w)
            b = beta_form_step(w, opinions)
            scale = max(
                [abs(w.self_weight * opinions["i"])]
                + [abs(wj) * 2.0 for wj in w.influence_weights.values()]
                + [abs(a), abs(b), 1.0]
            )
            assert abs(a - b) <= 4 * math.ulp(scale)

    def test_consensus_fixed_point(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            w = make_weights(rng, "i", ["j1", "j2"])
            c = float(rng.uniform(-2, 2))
            opinions = {"i": c, "j1": c, "j2": c}
            # All forces vanish, so the update is w_ii * c ...
            assert step(opinions, w) == w.self_weight * c
        # ... and with w_ii = 1 consensus is a fixed point.
        w = InfluenceWeights("i", 1.0, {"j1": 0.3, "j2": -0.4})
        assert step({"i": 0.8, "j1": 0.8, "j2": 0.8}, w) == 0.8


def two_user_setup(w_ii=0.5, w_ij=0.5):
    network = InfluenceNetwork((Recipient("i", ("j",)),))
    weights = {"i": InfluenceWeights("i", w_ii, {"j": w_ij})}
    return network, weights


class TestSimulate:
    def test_one_step_reduces_to_step(self):
        network, weights = two_user_setup()
        initial = {"i": 0.2, "j": 0.9}
        out = simulate(network, weights, initial, steps=1)
        assert len(out["i"]) == 2
        assert out["i"].values[1] == step(initial, weights["i"])
        assert out["j"].values[1] == 0.9  # pure influencer holds constant

    def test_geometric_decay(self):
        network = InfluenceNetwork((Recipient("i", ()),))
        weights = {"i": InfluenceWeights("i", 0.5, {})}
        out = simulate(network, weights, {"i": 1.0}, steps=10)
        for t in range(11):
            assert out["i"].values[t] == 0.5**t

    def test_degroot_convex_combination_bounded(self):
        # All-recipient network with nonnegative betas summing to one: the
        # DeGroot case.  Trajectories must stay inside the initial hull and
        # the spread must never grow.  Dyadic betas keep the weight algebra
        # exact in floating point.
        rng = np.random.default_rng(6)
        users = [f"u{m}" for m in range(8)]
        network = InfluenceNetwork(
            tuple(Recipient(u, tuple(v for v in users if v != u)) for u in users)
        )
        weights = {}
        for u in users:
            k = rng.integers(1, 100, size=len(users))
            k = (k * (1 << 12) // k.sum()).astype(int)
            k[0] += (1 << 12) - k.sum()  # exact dyadic partition of 1
            betas = [int(v) / (1 << 12) for v in k]
            others = [v for v in users if v != u]
            w_inf = dict(zip(others, betas[1:]))
            w_self = betas[0] + math.fsum(betas[1:])  # exact: sums to 1.0
            weights[u] = InfluenceWeights(u, w_self, w_inf)
        initial = {u: float(rng.uniform(-1, 1)) for u in users}
        out = simulate(network, weights, initial, steps=70)

        lo, hi = min(initial.values()), max(initial.values())
        values = np.array([out[u].values for u in users])
        assert values.min() >= lo and values.max() <= hi
        spreads = values.max(axis=0) - values.min(axis=0)
        assert all(spreads[t + 1] <= spreads[t] for t in range(70))

        # Independent brute-force iteration of the update, same trajectories.
        state = dict(initial)
        for t in range(1, 71):
            state = {
                u: math.fsum(
                    [weights[u].self_weight * state[u]]
                    + [
                        w * (state[j] - state[u])
                        for j, w in weights[u].influence_weights.items()
                    ]
                )
                for u in users
            }
            for m, u in enumerate(users):
                assert values[m, t] == state[u]

    def test_deterministic_given_seed(self):
        network, weights = two_user_setup()
        initial = {"i": 0.2, "j": 0.9}
        a = simulate(network, weights, initial, steps=20, noise_sigma=0.1, seed=42)
        b = simulate(network, weights, initial, steps=20, noise_sigma=0.1, seed=42)
        assert np.array_equal(a["i"].values, b["i"].values)
        c = simulate(network, weights, initial, steps=20, noise_sigma=0.1, seed=43)
        assert not np.array_equal(a["i"].values, c["i"].values)

    def test_zero_noise_is_exact_iteration(self):
        network, weights = two_user_setup(0.25, 0.5)
        out = simulate(network, weights, {"i": 0.0, "j": 1.0}, steps=5, seed=9)
        x = 0.0
        for t in range(6):
            assert out["i"].values[t] == x
            x = step({"i": x, "j": 1.0}, weights["i"])

    def test_scripted_influencer(self):
        network, weights = two_user_setup()
        traj = [0.0, 0.5, 1.0]
        out = simulate(
            network, weights, {"i": 0.1}, steps=2, scripted={"j": traj}
        )
        assert list(out["j"].values) == traj

    def test_errors(self):
        network, weights = two_user_setup()
        with pytest.raises(ValueError, match="steps"):
            simulate(network, weights, {"i": 0.0, "j": 0.0}, steps=-1)
        with pytest.raises(MissingUserError, match="'j'"):
            simulate(network, weights, {"i": 0.0}, steps=1)
        with pytest.raises(ValueError, match="scripted"):
            simulate(network, weights, {"i": 0.0, "j": 0.0}, steps=1,
                     scripted={"i": [0.0, 0.0]})
        with pytest.raises(ValueError, match="length"):
            simulate(network, weights, {"i": 0.0}, steps=2, scripted={"j": [0.0]})


class TestTypes:
    def test_series_validation(self):
        with pytest.raises(ValueError, match="same length"):
            OpinionSeries("u", [1.0, 2.0], [True])
        with pytest.raises(ValueError, match="non-finite"):
            OpinionSeries("u", [1.0, np.nan], [True, True])
        # NaN is fine where unobserved.
        s = OpinionSeries("u", [1.0, np.nan], [True, False])
        assert not s.is_filled

    def test_series_immutable(self):
        s = OpinionSeries.fully_observed("u", [1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    def test_weights_validation(self):
        with pytest.raises(ValueError, match="own influencer"):
            InfluenceWeights("i", 0.5, {"i": 0.1})
        with pytest.raises(ValueError, match="non-finite"):
            InfluenceWeights("i", math.inf, {})

    def test_beta_identity_both_directions(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            w = make_weights(rng, "i", ["a", "b", "c"])
            betas = w.betas
            assert betas["a"] == w.influence_weights["a"]
            expected = w.self_weight - sum(w.influence_weights.values())
            assert betas["i"] == pytest.approx(expected, abs=1e-12)
            # Inverse direction: w_ii = b_ii + sum b_ij.
            back = betas["i"] + math.fsum(
                betas[j] for j in w.influencer_ids
            )
            assert back == pytest.approx(w.self_weight, abs=1e-12)

    def test_bound_violations_reported_not_clamped(self):
        w = InfluenceWeights("i", 1.5, {"j": -0.2, "k": -1.01})
        violations = dict(w.bound_violations())
        assert violations == {"i": 1.5, "k": -1.01}
        assert w.self_weight == 1.5  # untouched

    def test_network_validation(self):
        with pytest.raises(ValueError, match="own influencer list"):
            Recipient("i", ("i", "j"))
        with pytest.raises(ValueError, match="duplicate influencer"):
            Recipient("i", ("j", "j"))
        with pytest.raises(ValueError, match="duplicate recipient"):
            InfluenceNetwork((Recipient("i", ()), Recipient("i", ())))
        # A recipient may influence another recipient.
        net = InfluenceNetwork(
            (Recipient("a", ("b",)), Recipient("b", ("c",)))
        )
        assert net.all_user_ids() == ["a", "b", "c"]
        assert net.influencer_counts() == [1, 1]
