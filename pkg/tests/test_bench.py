"""MiniBench construction: determinism, lineage soundness, pair algebra."""

import json

import numpy as np
import pytest

from ddvkit.forge import BenchConfig, build_bench, load_bench

TINY = dict(
    n_train=400, n_test=300, n_steal_queries=400,
    source_epochs=2, transfer_epochs=1, prune_finetune_epochs=1,
    distill_epochs=1, steal_epochs=1, retrain_epochs=1, n_retrained=2,
)


@pytest.fixture(scope="module")
def tiny_bench(tmp_path_factory):
    root = tmp_path_factory.mktemp("tinybench")
    return build_bench(BenchConfig(seed=55, **TINY), root)


class TestStructure:
    def test_pair_counts_match_config_algebra(self, tiny_bench):
        expected = tiny_bench.config.expected_pair_counts()
        got = {}
        for p in tiny_bench.reused_pairs():
            got[p.category] = got.get(p.category, 0) + 1
        assert got == expected
        assert sum(expected.values()) == 30

    def test_every_reused_pair_lineage_reachable(self, tiny_bench):
        for p in tiny_bench.reused_pairs():
            assert tiny_bench.is_reuse_connected(p.target, p.suspect), p

    def test_references_never_lineage_connected(self, tiny_bench):
        for p in tiny_bench.reused_pairs()[:5]:
            refs = tiny_bench.reference_ids(p.target, p.suspect)
            assert len(refs) >= 10
            for r in refs:
                assert not tiny_bench.is_reuse_connected(p.target, r)
                assert not tiny_bench.is_reuse_connected(p.suspect, r)

    def test_retrained_models_isolated(self, tiny_bench):
        for rid in tiny_bench.retrained_ids:
            for src in tiny_bench.source_ids:
                assert not tiny_bench.is_reuse_connected(src, rid)

    def test_manifest_paths_relative_and_loadable(self, tiny_bench):
        manifest = json.loads((tiny_bench.root / "manifest.json").read_text())
        for entry in manifest["models"]:
            assert not entry["file"].startswith("/")
            assert (tiny_bench.root / entry["file"]).exists()
        again = load_bench(tiny_bench.root)
        assert again.model_ids == tiny_bench.model_ids

    def test_transfer_children_have_task_class_counts(self, tiny_bench):
        m = tiny_bench.model(f"src-convnetA-transfer(taskB,0.5)")
        assert m.output_dim == 5
        m = tiny_bench.model(f"src-convnetA-transfer(taskC,0.5)")
        assert m.output_dim == 6

    def test_chain_strings_recorded(self, tiny_bench):
        chains = {p.category: p.reuse_chain for p in tiny_bench.reused_pairs()}
        assert chains["transfer+prune"].startswith("transfer(taskB,0.5)-prune")
        assert chains["quantize"] == "quant"


class TestDeterminism:
    def test_rebuild_is_bit_identical(self, tmp_path):
        cfg = BenchConfig(seed=99, **TINY)
        a = build_bench(cfg, tmp_path / "a")
        b = build_bench(cfg, tmp_path / "b")
        assert a.model_ids == b.model_ids
        for mid in a.model_ids:
            ma = a.model(mid)
            mb = b.model(mid)
            for (_, la), (_, lb) in zip(ma.param_layers(), mb.param_layers()):
                np.testing.assert_array_equal(la.weights, lb.weights)
                np.testing.assert_array_equal(la.bias, lb.bias)
        file_a = (tmp_path / "a" / "models" / f"{a.model_ids[0]}.bin").read_bytes()
        file_b = (tmp_path / "b" / "models" / f"{b.model_ids[0]}.bin").read_bytes()
        assert file_a == file_b

    def test_different_seed_differs(self, tmp_path, tiny_bench):
        other = build_bench(BenchConfig(seed=56, **TINY), tmp_path / "c")
        src_a = tiny_bench.model("src-convnetA")
        src_c = other.model("src-convnetA")
        assert not np.array_equal(
            src_a.param_layers()[0][1].weights, src_c.param_layers()[0][1].weights
        )

    def test_unknown_task_rejected(self, tmp_path):
        cfg = BenchConfig(seed=1, source_task="taskZ", **TINY)
        with pytest.raises(ValueError, match="unknown task"):
            build_bench(cfg, tmp_path / "bad")
