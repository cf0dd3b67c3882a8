"""DDV computation, similarity, threshold calibration, compare pipeline."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ddvkit.config import GenConfig
from ddvkit.ddv import (
    DDV,
    ComparisonReport,
    calibrate_threshold,
    compare,
    compute_ddv,
    cosine_distance,
    similarity,
)
from ddvkit.errors import ShapeError
from ddvkit.inputgen import InputPairSet

from .conftest import tiny_classifier
from .oracles import brute_cosine_distance
from .test_inputgen import constant_model, identity_model


def make_pairs(seeds, adv, model_id="ident", cfg=None):
    return InputPairSet(
        seeds=np.asarray(seeds, dtype=np.float32),
        adversarial=np.asarray(adv, dtype=np.float32),
        target_model_id=model_id,
        gen_config=cfg or GenConfig(n_inputs=len(seeds)),
    )


class TestCosineDistance:
    def test_identical_nonzero_is_zero(self):
        v = np.array([0.3, 0.7, 0.1])
        assert cosine_distance(v, v) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_is_one(self):
        assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_hand_computed_value(self):
        # 1 - 10/14
        assert cosine_distance([1, 2, 3], [3, 2, 1]) == pytest.approx(
            1.0 - 10.0 / 14.0, abs=1e-6
        )

    def test_zero_vector_conventions(self):
        z = np.zeros(3)
        v = np.array([1.0, 0.0, 0.0])
        assert cosine_distance(z, z) == 0.0
        assert cosine_distance(z, v) == 1.0
        assert cosine_distance(v, z) == 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            cosine_distance([1, 2], [1, 2, 3])

    def test_matches_brute_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.standard_normal(5)
            b = rng.standard_normal(5)
            assert cosine_distance(a, b) == pytest.approx(
                brute_cosine_distance(a, b), abs=1e-9
            )


@settings(max_examples=60, deadline=None)
@given(
    hnp.arrays(np.float64, 4, elements=st.floats(-5, 5)),
    hnp.arrays(np.float64, 4, elements=st.floats(-5, 5)),
)
def test_cosine_distance_range(a, b):
    d = cosine_distance(a, b)
    assert 0.0 <= d <= 2.0


class TestComputeDdv:
    def test_unchanged_pairs_give_zero_ddv(self):
        f = identity_model(3)
        x = np.abs(np.random.default_rng(0).random((5, 3))).astype(np.float32) + 0.1
        ddv = compute_ddv(f, make_pairs(x, x))
        np.testing.assert_array_equal(ddv.values, np.zeros(5))

    def test_deterministic(self):
        f = tiny_classifier(seed=4)
        rng = np.random.default_rng(1)
        pairs = make_pairs(rng.random((6, 1, 8, 8)), rng.random((6, 1, 8, 8)), f.id)
        a = compute_ddv(f, pairs)
        b = compute_ddv(f, pairs)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.pairset_id == b.pairset_id

    def test_hand_computed_elementwise(self):
        f = identity_model(2)
        seeds = [[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]]
        adv = [[0.0, 1.0], [2.0, 2.0], [1.0, 1.0]]
        # cos distances: 1 ; 0 ; 1 - 2/(2*sqrt(2)) = 1 - 1/sqrt(2)
        ddv = compute_ddv(f, make_pairs(seeds, adv))
        np.testing.assert_allclose(
            ddv.values, [1.0, 0.0, 1.0 - 1.0 / math.sqrt(2)], atol=1e-6
        )

    def test_values_in_range(self):
        f = tiny_classifier(seed=2)
        rng = np.random.default_rng(5)
        pairs = make_pairs(rng.random((20, 1, 8, 8)), rng.random((20, 1, 8, 8)), f.id)
        ddv = compute_ddv(f, pairs)
        assert np.all(ddv.values >= 0.0) and np.all(ddv.values <= 2.0)
        assert len(ddv) == 20


class TestSimilarity:
    def _ddv(self, values, pid="p"):
        return DDV(values=np.asarray(values, dtype=np.float64), pairset_id=pid,
                   model_id="m")

    def test_self_similarity_one(self):
        d = self._ddv([0.2, 0.5, 0.1])
        assert similarity(d, d) == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance(self):
        d = self._ddv([0.2, 0.5, 0.1])
        d2 = self._ddv([0.4, 1.0, 0.2])
        assert similarity(d, d2) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_zero(self):
        assert similarity(self._ddv([1, 0, 1]), self._ddv([0, 1, 0])) == pytest.approx(0.0)

    def test_mismatched_pairsets_rejected(self):
        with pytest.raises(ValueError, match="not comparable"):
            similarity(self._ddv([1, 0]), self._ddv([1, 0], pid="other"))

    def test_all_zero_conventions(self):
        z = self._ddv([0.0, 0.0])
        d = self._ddv([0.5, 0.1])
        assert similarity(z, self._ddv([0.0, 0.0])) == 1.0
        assert similarity(z, d) == 0.0

    def test_range(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            a = self._ddv(rng.random(6) * 2)
            b = self._ddv(rng.random(6) * 2)
            assert -1.0 <= similarity(a, b) <= 1.0


class TestThreshold:
    def test_identical_reference_gives_threshold_one(self):
        f = tiny_classifier(seed=6)
        rng = np.random.default_rng(2)
        pairs = make_pairs(rng.random((8, 1, 8, 8)), rng.random((8, 1, 8, 8)), f.id)
        thr = calibrate_threshold(f, [f], pairs)
        assert thr == pytest.approx(1.0, abs=1e-9)
        sim = similarity(compute_ddv(f, pairs), compute_ddv(f, pairs))
        assert not sim > thr  # strict rule: nothing exceeds it

    def test_max_of_references(self):
        f = tiny_classifier(seed=6)
        r1 = tiny_classifier(seed=7, model_id="r1")
        r2 = tiny_classifier(seed=8, model_id="r2")
        rng = np.random.default_rng(2)
        pairs = make_pairs(rng.random((8, 1, 8, 8)), rng.random((8, 1, 8, 8)), f.id)
        ddv_f = compute_ddv(f, pairs)
        s1 = similarity(ddv_f, compute_ddv(r1, pairs))
        s2 = similarity(ddv_f, compute_ddv(r2, pairs))
        assert calibrate_threshold(f, [r1, r2], pairs) == pytest.approx(max(s1, s2))

    def test_empty_references_give_none(self):
        f = tiny_classifier(seed=6)
        rng = np.random.default_rng(2)
        pairs = make_pairs(rng.random((4, 1, 8, 8)), rng.random((4, 1, 8, 8)), f.id)
        assert calibrate_threshold(f, [], pairs) is None


class TestCompare:
    def test_self_comparison_is_one(self):
        f = tiny_classifier(seed=10)
        seeds = np.random.default_rng(3).random((10, 1, 8, 8)).astype(np.float32)
        cfg = GenConfig(pgd_steps=10, n_inputs=10)
        report = compare(f, f, seeds, cfg)
        assert report.similarity == pytest.approx(1.0, abs=1e-6)
        assert report.verdict == "undecided"  # no references

    def test_verdict_with_references(self):
        f = tiny_classifier(seed=10)
        ref = tiny_classifier(seed=11, model_id="ref")
        seeds = np.random.default_rng(3).random((10, 1, 8, 8)).astype(np.float32)
        cfg = GenConfig(pgd_steps=10, n_inputs=10)
        report = compare(f, f, seeds, cfg, reference_models=[ref])
        assert report.threshold is not None
        assert report.verdict == ("reused" if report.similarity > report.threshold
                                  else "not_reused")

    def test_suspect_with_different_output_dim(self):
        f = tiny_classifier(seed=10, n_classes=4)
        g = tiny_classifier(seed=11, n_classes=7, model_id="wide")
        seeds = np.random.default_rng(3).random((8, 1, 8, 8)).astype(np.float32)
        report = compare(f, g, seeds, GenConfig(pgd_steps=5, n_inputs=8))
        assert -1.0 <= report.similarity <= 1.0

    def test_input_shape_mismatch_rejected(self):
        f = tiny_classifier(seed=10)
        g = identity_model(4)
        with pytest.raises(ShapeError, match="input shapes"):
            compare(f, g, None, GenConfig(n_inputs=4))

    def test_report_round_trip(self):
        f = tiny_classifier(seed=10)
        seeds = np.random.default_rng(3).random((6, 1, 8, 8)).astype(np.float32)
        report = compare(f, f, seeds, GenConfig(pgd_steps=3, n_inputs=6))
        back = ComparisonReport.from_json(report.to_json())
        assert back == report

    def test_constant_model_flagged(self):
        f = constant_model(4, 3)
        g = constant_model(4, 3)
        g.id = "const2"
        seeds = np.random.default_rng(1).random((5, 4)).astype(np.float32)
        cfg = GenConfig(mode="blackbox", iterations=5, n_inputs=5)
        report = compare(f, g, seeds, cfg)
        assert any("all-zero" in fl for fl in report.flags)
        assert report.similarity == 1.0  # both all-zero DDVs
