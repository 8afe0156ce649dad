import math

import numpy as np
import pytest

from influence_ode.identify import fit_cohort, weights_to_betas
from influence_ode.synth import (
    RecoveryReport,
    SynthConfig,
    evaluate_recovery,
    gen_dataset,
    gen_network,
    gen_weights,
)

SMALL = SynthConfig(
    n_recipients=10,
    influencer_count_mean=4.0,
    influencer_count_var=6.0,
    n_kernels=30,
    seed=5,
)


class TestConfig:
    def test_default_cohort_shape(self):
        c = SynthConfig()
        assert c.n_recipients == 87
        assert c.influencer_count_mean == 17.655
        assert c.influencer_count_var == 123.07
        assert c.n_kernels == 70

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown"):
            SynthConfig.from_dict({"n_recipients": 5, "bogus": 1})

    def test_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(n_recipients=0)
        with pytest.raises(ValueError):
            SynthConfig(noise_sigma=-0.1)
        with pytest.raises(ValueError):
            SynthConfig(weight_bound=1.5)
        with pytest.raises(ValueError):
            SynthConfig(stability_margin=0.0)


class TestGenNetwork:
    def test_degenerate_count(self):
        config = SynthConfig(
            n_recipients=1, influencer_count_mean=3.0, influencer_count_var=0.0,
            n_kernels=20, seed=1,
        )
        net = gen_network(config)
        assert len(net.recipients) == 1
        assert len(net.recipients[0].influencer_ids) == 3

    def test_default_mean_over_seed_ensemble(self):
        counts = []
        for seed in range(10):
            net = gen_network(SynthConfig(seed=seed))
            counts.extend(net.influencer_counts())
        mean = float(np.mean(counts))
        assert abs(mean - 17.655) / 17.655 <= 0.15

    def test_counts_keep_models_identifiable(self):
        for seed in range(5):
            net = gen_network(SynthConfig(seed=seed))
            assert max(net.influencer_counts()) <= 70 - 3
            assert min(net.influencer_counts()) >= 1

    def test_deterministic(self):
        a = gen_network(SMALL)
        b = gen_network(SMALL)
        assert a == b

    def test_network_invariants(self):
        net = gen_network(SynthConfig(seed=3))
        for r in net.recipients:
            assert r.recipient_id not in r.influencer_ids
            assert len(set(r.influencer_ids)) == len(r.influencer_ids)

    def test_infeasible_config(self):
        with pytest.raises(ValueError, match="infeasible"):
            gen_network(SynthConfig(n_recipients=1, influencer_count_mean=3.0,
                                    influencer_count_var=0.0, n_kernels=3))


class TestGenWeights:
    def test_zero_bound_gives_zero_weights(self):
        config = SynthConfig(n_recipients=3, influencer_count_mean=2.0,
                             influencer_count_var=0.0, n_kernels=10,
                             weight_bound=0.0, seed=2)
        weights = gen_weights(gen_network(config), config)
        for w in weights.values():
            assert w.self_weight == 0.0
            assert all(v == 0.0 for v in w.influence_weights.values())

    def test_emitted_weights_in_bounds_and_stable(self):
        for seed in range(5):
            config = SynthConfig(seed=seed)
            net = gen_network(config)
            weights = gen_weights(net, config)
            for w in weights.values():
                assert not w.bound_violations()
                betas, _ = weights_to_betas(w)
                assert np.abs(betas).sum() <= 1.0 - config.stability_margin + 1e-12

    def test_trajectories_bounded_over_70_kernels(self):
        # With row sums <= 0.95 and all exogenous values in [0, 1], no
        # opinion can leave [-1, 1].
        dataset = gen_dataset(SynthConfig(seed=11))
        for s in dataset.series.values():
            assert np.all(np.isfinite(s.values))
            assert np.abs(s.values).max() <= 1.0 + 1e-12


class TestGenDataset:
    def test_shapes(self):
        dataset = gen_dataset(SMALL)
        assert len(dataset.network.recipients) == 10
        for s in dataset.series.values():
            assert len(s) == 30
            assert s.observed.all()

    def test_exact_recovery_noise_free(self):
        dataset = gen_dataset(SMALL)
        result = fit_cohort(dataset.network, dataset.series)
        assert not result.failures
        fitted = {f.recipient_id: f.weights() for f in result.fits}
        report = evaluate_recovery(dataset.true_weights, fitted)
        assert report.max_abs_error <= 1e-8

    def test_bit_identical_same_seed(self):
        a = gen_dataset(SMALL)
        b = gen_dataset(SMALL)
        assert a.network == b.network
        for uid in a.series:
            assert np.array_equal(a.series[uid].values, b.series[uid].values)

    def test_different_seed_differs(self):
        a = gen_dataset(SMALL)
        b = gen_dataset(SMALL.with_seed(6))
        assert any(
            not np.array_equal(a.series[u].values, b.series[u].values)
            for u in a.series
        )


class TestEvaluateRecovery:
    def test_identical_inputs_zero_error(self):
        dataset = gen_dataset(SMALL)
        report = evaluate_recovery(dataset.true_weights, dataset.true_weights)
        assert report.max_abs_error == 0.0
        assert report.rmse == 0.0

    def test_single_perturbed_weight(self):
        dataset = gen_dataset(SMALL)
        rid = dataset.network.recipient_ids()[0]
        w = dataset.true_weights[rid]
        perturbed = dict(dataset.true_weights)
        bumped = dict(w.influence_weights)
        first = next(iter(bumped))
        bumped[first] += 0.01
        perturbed[rid] = type(w)(w.recipient_id, w.self_weight, bumped)
        report = evaluate_recovery(dataset.true_weights, perturbed)
        assert report.max_abs_error == pytest.approx(0.01)
        assert report.per_recipient[rid]["max_abs_error"] == pytest.approx(0.01)

    def test_id_mismatch_raises(self):
        dataset = gen_dataset(SMALL)
        fitted = dict(dataset.true_weights)
        del fitted[next(iter(fitted))]
        with pytest.raises(ValueError, match="recipient sets differ"):
            evaluate_recovery(dataset.true_weights, fitted)

    def test_error_decreases_with_noise(self):
        # Median recovery error over 10 seeds is non-increasing as the noise
        # level drops, and hits ~0 at sigma = 0.
        sigmas = [0.1, 0.01, 0.001, 0.0]
        medians = []
        for sigma in sigmas:
            errors = []
            for seed in range(10):
                config = SynthConfig(
                    n_recipients=6, influencer_count_mean=3.0,
                    influencer_count_var=2.0, n_kernels=30,
                    noise_sigma=sigma, seed=100 + seed,
                )
                dataset = gen_dataset(config)
                result = fit_cohort(dataset.network, dataset.series)
                fitted = {f.recipient_id: f.weights() for f in result.fits}
                errors.append(
                    evaluate_recovery(dataset.true_weights, fitted).max_abs_error
                )
            medians.append(float(np.median(errors)))
        assert all(b <= a for a, b in zip(medians, medians[1:]))
        assert medians[-1] <= 1e-8
