"""Probe generation: criteria values, seed selection, both search modes."""

import math

import numpy as np
import pytest

from ddvkit.config import GenConfig
from ddvkit.data import make_dataset
from ddvkit.errors import UnsupportedOperation
from ddvkit.inputgen import (
    divergence,
    divergence_from_outputs,
    diversity,
    diversity_from_outputs,
    gen_blackbox,
    gen_whitebox,
    load_pairset,
    save_pairset,
    score_inputs,
    select_seeds,
)
from ddvkit.inputgen.blackbox import _low_divergence, _low_diversity
from ddvkit.inputgen.criteria import pairwise_distance_matrix
from ddvkit.runtime import Dense, Model, Softmax

from .conftest import tiny_classifier
from .modelgen import random_model
from .oracles import brute_divergence, brute_diversity


def identity_model(n=2):
    return Model(
        id="ident",
        layers=[Dense(n, n, np.eye(n, dtype=np.float32), np.zeros(n, dtype=np.float32))],
        input_shape=(n,),
        output_dim=n,
    )


def constant_model(n_in=4, n_out=3):
    # zero weights + softmax: uniform output for every input
    return Model(
        id="const",
        layers=[Dense(n_in, n_out), Softmax()],
        input_shape=(n_in,),
        output_dim=n_out,
    )


class TestGenConfig:
    def test_defaults(self):
        cfg = GenConfig()
        assert cfg.lam == 0.5
        assert cfg.epsilon == 0.06
        assert cfg.iterations == 20000
        assert cfg.low_diversity_ratio == 0.5
        assert cfg.n_inputs == 100
        assert cfg.mode == "whitebox"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"lam": -0.1},
            {"epsilon": 0.0},
            {"epsilon": 1.0},
            {"low_diversity_ratio": 0.0},
            {"low_diversity_ratio": 1.5},
            {"n_inputs": 0},
            {"mode": "grey"},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            GenConfig(**kwargs)


class TestSelectSeeds:
    def test_full_selection_is_permutation(self):
        ds = make_dataset("taskA", 5, 200)
        picked = select_seeds(ds, 200, rng_seed=1)
        a = np.sort(picked.reshape(200, -1).sum(axis=1))
        b = np.sort(ds.images.reshape(200, -1).sum(axis=1))
        np.testing.assert_allclose(a, b, rtol=0, atol=0)

    def test_stratified_counts_within_one(self):
        ds = make_dataset("taskB", 5, 300)  # 5 classes
        picked = select_seeds(ds, 52, rng_seed=3)
        # recover labels by matching images
        flat = {img.tobytes(): lab for img, lab in zip(ds.images, ds.labels)}
        labs = np.array([flat[img.tobytes()] for img in picked])
        counts = np.bincount(labs, minlength=5)
        assert counts.max() - counts.min() <= 1

    def test_deterministic(self):
        ds = make_dataset("taskA", 5, 240)
        a = select_seeds(ds, 50, rng_seed=9)
        b = select_seeds(ds, 50, rng_seed=9)
        np.testing.assert_array_equal(a, b)

    def test_oversample_rejected(self):
        ds = make_dataset("taskA", 5, 200)
        with pytest.raises(ValueError, match="cannot select"):
            select_seeds(ds, 201, rng_seed=0)


class TestCriteria:
    def test_divergence_zero_for_identical(self):
        f = identity_model()
        x = np.random.default_rng(0).random((5, 2)).astype(np.float32)
        assert divergence(f, x, x) == 0.0

    def test_divergence_single_pair_sqrt2(self):
        f = identity_model()
        x = np.array([[1.0, 0.0]], dtype=np.float32)
        xp = np.array([[0.0, 1.0]], dtype=np.float32)
        assert math.isclose(divergence(f, x, xp), math.sqrt(2), rel_tol=1e-6)

    def test_divergence_three_pairs_hand_computed(self):
        # pairs: (0,0)->(3,4): 5 ; (1,1)->(1,1): 0 ; (2,0)->(0,0): 2  => mean 7/3
        f = identity_model()
        x = np.array([[0, 0], [1, 1], [2, 0]], dtype=np.float32)
        xp = np.array([[3, 4], [1, 1], [0, 0]], dtype=np.float32)
        assert math.isclose(divergence(f, x, xp), 7.0 / 3.0, rel_tol=1e-6)

    def test_diversity_zero_for_identical_outputs(self):
        f = identity_model()
        xp = np.ones((4, 2), dtype=np.float32)
        assert diversity(f, xp) == 0.0

    def test_diversity_two_inputs_sqrt2(self):
        f = identity_model()
        xp = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32)
        assert math.isclose(diversity(f, xp), math.sqrt(2), rel_tol=1e-6)

    def test_diversity_four_inputs_hand_computed(self):
        # corners of the unit square: 4 edges (1) + 2 diagonals (sqrt 2)
        f = identity_model()
        xp = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.float32)
        expected = (4 * 1.0 + 2 * math.sqrt(2)) / 6.0
        assert math.isclose(diversity(f, xp), expected, rel_tol=1e-6)

    def test_diversity_needs_two(self):
        f = identity_model()
        with pytest.raises(ValueError):
            diversity(f, np.ones((1, 2), dtype=np.float32))

    def test_score_is_divergence_plus_lambda_diversity(self):
        f = identity_model()
        rng = np.random.default_rng(3)
        x = rng.random((6, 2)).astype(np.float32)
        xp = rng.random((6, 2)).astype(np.float32)
        for lam in (0.0, 0.5, 2.0):
            expected = divergence(f, x, xp) + lam * diversity(f, xp)
            assert math.isclose(score_inputs(f, x, xp, lam), expected, rel_tol=1e-9)

    def test_score_on_unchanged_inputs_is_lambda_diversity(self):
        f = identity_model()
        x = np.random.default_rng(1).random((5, 2)).astype(np.float32)
        assert math.isclose(
            score_inputs(f, x, x, 0.5), 0.5 * diversity(f, x), rel_tol=1e-9
        )

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            n = int(rng.integers(2, 12))
            k = int(rng.integers(1, 6))
            ya = rng.standard_normal((n, k))
            yb = rng.standard_normal((n, k))
            assert math.isclose(
                divergence_from_outputs(ya, yb), brute_divergence(ya, yb), rel_tol=1e-6
            )
            assert math.isclose(
                diversity_from_outputs(yb), brute_diversity(yb), rel_tol=1e-6
            )


class TestWhitebox:
    def test_zero_steps_returns_seeds(self):
        f = tiny_classifier(seed=1)
        seeds = np.random.default_rng(2).random((6, 1, 8, 8)).astype(np.float32)
        cfg = GenConfig(pgd_steps=0, n_inputs=6)
        pairs = gen_whitebox(f, seeds, cfg)
        np.testing.assert_array_equal(pairs.seeds, pairs.adversarial)
        assert math.isclose(
            pairs.score_trace[0], 0.5 * diversity(f, seeds), rel_tol=1e-9
        )

    def test_box_constraints(self):
        f = tiny_classifier(seed=1)
        seeds = np.random.default_rng(2).random((8, 1, 8, 8)).astype(np.float32)
        cfg = GenConfig(pgd_steps=25, epsilon_box=0.3, n_inputs=8)
        pairs = gen_whitebox(f, seeds, cfg)
        assert pairs.adversarial.min() >= 0.0
        assert pairs.adversarial.max() <= 1.0
        linf = np.abs(pairs.adversarial - pairs.seeds).max()
        assert linf <= 0.3 + 1e-6

    def test_final_score_at_least_initial_on_random_models(self):
        rng = np.random.default_rng(55)
        for trial in range(20):
            model = random_model(rng, softmax=True)
            seeds = rng.random((5, *model.input_shape)).astype(np.float32)
            cfg = GenConfig(pgd_steps=12, n_inputs=5, rng_seed=trial)
            pairs = gen_whitebox(model, seeds, cfg)
            final = score_inputs(model, pairs.seeds, pairs.adversarial, cfg.lam)
            assert final >= pairs.score_trace[0] - 1e-12
            assert math.isclose(final, max(pairs.score_trace), rel_tol=1e-9)

    def test_blackbox_model_rejected(self):
        f = tiny_classifier().as_blackbox()
        seeds = np.zeros((4, 1, 8, 8), dtype=np.float32)
        with pytest.raises(UnsupportedOperation):
            gen_whitebox(f, seeds, GenConfig(n_inputs=4))


class TestBlackbox:
    def test_constant_model_flat_trace(self):
        f = constant_model()
        seeds = np.random.default_rng(1).random((6, 4)).astype(np.float32)
        cfg = GenConfig(mode="blackbox", iterations=50, n_inputs=6)
        pairs = gen_blackbox(f, seeds, cfg)
        np.testing.assert_array_equal(pairs.seeds, pairs.adversarial)
        assert len(set(pairs.score_trace)) == 1

    def test_trace_monotone_on_random_runs(self):
        rng = np.random.default_rng(4)
        for run in range(10):
            model = random_model(rng, softmax=True)
            seeds = rng.random((5, *model.input_shape)).astype(np.float32)
            cfg = GenConfig(mode="blackbox", iterations=40, n_inputs=5, rng_seed=run)
            pairs = gen_blackbox(model, seeds, cfg)
            trace = pairs.score_trace
            assert len(trace) == cfg.iterations + 1
            assert all(b >= a for a, b in zip(trace, trace[1:]))

    def test_toy_convnet_improves_with_2000_iterations(self):
        f = tiny_classifier(seed=12)
        pool = make_dataset("taskA", 31, 200)
        seeds = select_seeds(pool, 20, rng_seed=0)[:, :, 4:12, 4:12]
        cfg = GenConfig(mode="blackbox", iterations=2000, n_inputs=20, rng_seed=5)
        pairs = gen_blackbox(f, seeds, cfg)
        assert pairs.score_trace[-1] > pairs.score_trace[0]

    def test_box_constraint(self):
        f = tiny_classifier(seed=3)
        seeds = np.random.default_rng(9).random((6, 1, 8, 8)).astype(np.float32)
        cfg = GenConfig(mode="blackbox", iterations=300, n_inputs=6, epsilon=0.3)
        pairs = gen_blackbox(f, seeds, cfg)
        assert pairs.adversarial.min() >= 0.0
        assert pairs.adversarial.max() <= 1.0

    def test_index_selection_soundness(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            n = int(rng.integers(3, 20))
            k = int(rng.integers(2, 5))
            y_seed = rng.standard_normal((n, k))
            y_adv = y_seed + rng.standard_normal((n, k)) * rng.random()
            d_pairs = np.linalg.norm(y_adv - y_seed, axis=1)
            low_div = _low_divergence(d_pairs)
            assert all(d_pairs[j] < d_pairs.mean() for j in low_div)
            dmat = pairwise_distance_matrix(y_adv)
            iu = np.triu_indices(n, k=1)
            for ratio in (0.3, 0.5, 1.0):
                low_diver = _low_diversity(dmat, iu, ratio, n)
                assert len(low_diver) <= max(1, int(ratio * n))
                assert len(np.unique(low_diver)) == len(low_diver)


class TestPairsetIO:
    def test_round_trip(self, tmp_path):
        f = tiny_classifier(seed=2)
        seeds = np.random.default_rng(0).random((5, 1, 8, 8)).astype(np.float32)
        pairs = gen_whitebox(f, seeds, GenConfig(pgd_steps=3, n_inputs=5))
        path = tmp_path / "probe.pairs"
        save_pairset(pairs, path)
        back = load_pairset(path)
        np.testing.assert_array_equal(back.seeds, pairs.seeds)
        np.testing.assert_array_equal(back.adversarial, pairs.adversarial)
        assert back.target_model_id == pairs.target_model_id
        assert back.gen_config == pairs.gen_config
        np.testing.assert_allclose(back.score_trace, pairs.score_trace)
        assert back.pairset_id == pairs.pairset_id
