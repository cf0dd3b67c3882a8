"""MiniBench: a desk-scale reuse-detection benchmark.

Builds two source classifiers plus the full matrix of reuse variants
(transfer at three tuning depths over two target tasks, three pruning
ratios, int8 quantization, same-arch distillation, different-arch
stealing, and combined transfer+compression chains), together with
retrained-from-scratch reference models.  Emits the reused/reference pair
lists used for evaluation and a JSON manifest with relative paths.

Everything is derived deterministically from the config seed: rebuilding
with the same config reproduces identical ids and bit-identical weights.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

from ..config import config_hash, derive_seed
from ..data import TASKS, make_dataset
from ..runtime.modelio import load_model, save_model
from .reuse import distill, prune, quantize, retrain, steal, transfer

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"

DIRECT_CATEGORIES = (
    "transfer-0.1", "transfer-0.5", "transfer-1.0",
    "prune-0.2", "prune-0.5", "prune-0.8",
    "quantize", "distill", "steal",
)
COMBINED_CATEGORIES = ("transfer+prune", "transfer+quantize", "transfer+distill")


@dataclass
class BenchConfig:
    seed: int = 0
    archs: tuple = ("convnetA", "convnetB")
    source_task: str = "taskA"
    transfer_tasks: tuple = ("taskB", "taskC")
    tune_fractions: tuple = (0.1, 0.5, 1.0)
    prune_ratios: tuple = (0.2, 0.5, 0.8)
    combined_task: str = "taskB"
    combined_fraction: float = 0.5
    n_train: int = 2000
    n_test: int = 1000
    n_steal_queries: int = 2000
    source_epochs: int = 16
    transfer_epochs: int = 8
    prune_finetune_epochs: int = 4
    distill_epochs: int = 20
    steal_epochs: int = 10
    lr: float = 0.1
    transfer_lr: float = 0.05
    distill_lr: float = 0.03
    n_retrained: int = 6
    retrain_epochs: int = 12

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("archs", "transfer_tasks", "tune_fractions", "prune_ratios"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        d = dict(d)
        for key in ("archs", "transfer_tasks", "tune_fractions", "prune_ratios"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def expected_pair_counts(self) -> dict:
        """Reused-pair count per category implied by the config."""
        n_arch = len(self.archs)
        counts = {}
        for f in self.tune_fractions:
            counts[f"transfer-{f:g}"] = n_arch * len(self.transfer_tasks)
        for r in self.prune_ratios:
            counts[f"prune-{r:g}"] = n_arch
        counts["quantize"] = n_arch
        counts["distill"] = n_arch
        counts["steal"] = n_arch
        for cat in COMBINED_CATEGORIES:
            counts[cat] = n_arch
        return counts


@dataclass
class BenchPair:
    target: str
    suspect: str
    relation: str  # reused | reference
    category: str
    reuse_chain: str = ""


class MiniBench:
    """In-memory view of a built benchmark; models load lazily from disk."""

    def __init__(self, root, manifest: dict):
        self.root = Path(root)
        self.manifest = manifest
        self.config = BenchConfig.from_dict(manifest["config"])
        self._cache = {}

    @property
    def model_ids(self):
        return [m["id"] for m in self.manifest["models"]]

    @property
    def source_ids(self):
        return list(self.manifest["sources"])

    @property
    def retrained_ids(self):
        return list(self.manifest["retrained"])

    @property
    def lineage_edges(self):
        return [tuple(e) for e in self.manifest["lineage_edges"]]

    def reused_pairs(self) -> list[BenchPair]:
        return [BenchPair(**p) for p in self.manifest["reused_pairs"]]

    def reference_ids(self, target_id, suspect_id) -> list[str]:
        """Models with no lineage path to either member of the pair."""
        related = self._related_sets()
        out = []
        for mid in self.model_ids:
            if mid in (target_id, suspect_id):
                continue
            if mid in related[target_id] or mid in related[suspect_id]:
                continue
            out.append(mid)
        return out

    def _related_sets(self):
        if not hasattr(self, "_related"):
            up = {}
            down = {}
            for parent, child in self.lineage_edges:
                down.setdefault(parent, set()).add(child)
                up.setdefault(child, set()).add(parent)
            def connected(mid):
                seen = {mid}
                stack = [mid]
                while stack:
                    cur = stack.pop()
                    for nxt in up.get(cur, set()) | down.get(cur, set()):
                        if nxt not in seen:
                            seen.add(nxt)
                            stack.append(nxt)
                return seen
            self._related = {mid: connected(mid) for mid in self.model_ids}
        return self._related

    def is_reuse_connected(self, a, b) -> bool:
        return b in self._related_sets()[a]

    def model(self, model_id):
        if model_id not in self._cache:
            entry = next(m for m in self.manifest["models"] if m["id"] == model_id)
            self._cache[model_id] = load_model(self.root / entry["file"])
        return self._cache[model_id]

    def train_dataset(self, task_id):
        return make_dataset(task_id, derive_seed(self.config.seed, "train", task_id),
                            self.config.n_train)

    def test_dataset(self, task_id):
        return make_dataset(task_id, derive_seed(self.config.seed, "test", task_id),
                            self.config.n_test)


def _model_filename(model_id: str) -> str:
    safe = model_id.replace("/", "_")
    return f"models/{safe}.bin"


def build_bench(config: BenchConfig, out_dir) -> MiniBench:
    """Generate all models and pair lists; write them under out_dir."""
    for task in (config.source_task, *config.transfer_tasks, config.combined_task):
        if task not in TASKS:
            raise ValueError(f"config names unknown task {task!r}")
    for arch in config.archs:
        if arch not in ("convnetA", "convnetB"):
            raise ValueError(f"config names unknown architecture {arch!r}")

    root = Path(out_dir)
    (root / "models").mkdir(parents=True, exist_ok=True)
    seed = config.seed
    cfg_hash = config_hash(config.to_dict())

    train_ds = {
        task: make_dataset(task, derive_seed(seed, "train", task), config.n_train)
        for task in dict.fromkeys((config.source_task, *config.transfer_tasks, config.combined_task))
    }
    queries = make_dataset(
        config.source_task, derive_seed(seed, "steal-queries"), config.n_steal_queries
    ).images

    models = {}
    edges = []
    reused = []

    def register(model, parent=None):
        if model.id in models:
            raise ValueError(f"duplicate model id {model.id}")
        models[model.id] = model
        if parent is not None:
            edges.append((parent, model.id))

    sources = []
    for arch in config.archs:
        other = next(a for a in config.archs if a != arch) if len(config.archs) > 1 else arch
        src = retrain(
            arch, train_ds[config.source_task], epochs=config.source_epochs,
            lr=config.lr, seed=derive_seed(seed, "source", arch),
            model_id=f"src-{arch}",
        )
        register(src)
        sources.append(src.id)
        logger.info("built source %s", src.id)

        for task in config.transfer_tasks:
            for frac in config.tune_fractions:
                t = transfer(
                    src, train_ds[task], frac, epochs=config.transfer_epochs,
                    lr=config.transfer_lr, seed=derive_seed(seed, "transfer", arch, task, frac),
                )
                register(t, parent=src.id)
                reused.append(BenchPair(src.id, t.id, "reused", f"transfer-{frac:g}",
                                        f"transfer({task},{frac:g})"))

        for ratio in config.prune_ratios:
            p = prune(
                src, ratio, train_ds[config.source_task],
                finetune_epochs=config.prune_finetune_epochs, lr=config.lr / 2,
                seed=derive_seed(seed, "prune", arch, ratio),
            )
            register(p, parent=src.id)
            reused.append(BenchPair(src.id, p.id, "reused", f"prune-{ratio:g}",
                                    f"prune({ratio:g})"))

        q = quantize(src)
        register(q, parent=src.id)
        reused.append(BenchPair(src.id, q.id, "reused", "quantize", "quant"))

        d = distill(
            src, arch, train_ds[config.source_task], epochs=config.distill_epochs,
            lr=config.distill_lr, seed=derive_seed(seed, "distill", arch),
        )
        register(d, parent=src.id)
        reused.append(BenchPair(src.id, d.id, "reused", "distill", "distill"))

        s = steal(
            src, other, queries, epochs=config.steal_epochs, lr=config.lr,
            seed=derive_seed(seed, "steal", arch), task_id=config.source_task,
        )
        register(s, parent=src.id)
        reused.append(BenchPair(src.id, s.id, "reused", "steal", f"steal({other})"))

        # combined chains hang off one mid transfer model
        mid_id = f"{src.id}-transfer({config.combined_task},{config.combined_fraction:g})"
        mid = models[mid_id]
        chain_prefix = f"transfer({config.combined_task},{config.combined_fraction:g})"

        tp = prune(
            mid, 0.5, train_ds[config.combined_task],
            finetune_epochs=config.prune_finetune_epochs, lr=config.lr / 2,
            seed=derive_seed(seed, "combined-prune", arch),
        )
        register(tp, parent=mid.id)
        reused.append(BenchPair(src.id, tp.id, "reused", "transfer+prune",
                                f"{chain_prefix}-prune(0.5)"))

        tq = quantize(mid)
        register(tq, parent=mid.id)
        reused.append(BenchPair(src.id, tq.id, "reused", "transfer+quantize",
                                f"{chain_prefix}-quant"))

        td = distill(
            mid, arch, train_ds[config.combined_task], epochs=config.distill_epochs,
            lr=config.distill_lr, seed=derive_seed(seed, "combined-distill", arch),
        )
        register(td, parent=mid.id)
        reused.append(BenchPair(src.id, td.id, "reused", "transfer+distill",
                                f"{chain_prefix}-distill"))

    retrained = []
    retrain_tasks = [config.source_task, *config.transfer_tasks]
    for i in range(config.n_retrained):
        arch = config.archs[i % len(config.archs)]
        task = retrain_tasks[(i // len(config.archs)) % len(retrain_tasks)]
        r = retrain(
            arch, train_ds.get(task) or make_dataset(
                task, derive_seed(seed, "train", task), config.n_train),
            epochs=config.retrain_epochs, lr=config.lr,
            seed=derive_seed(seed, "retrain", i),
            model_id=f"retrain{i}-{arch}-{task}",
        )
        register(r)
        retrained.append(r.id)
        logger.info("built reference %s", r.id)

    manifest = {
        "format": "ddvkit-bench",
        "config": config.to_dict(),
        "config_hash": cfg_hash,
        "models": [
            {"id": mid, "file": _model_filename(mid), "access": m.access}
            for mid, m in models.items()
        ],
        "sources": sources,
        "retrained": retrained,
        "lineage_edges": [list(e) for e in edges],
        "reused_pairs": [asdict(p) for p in reused],
    }

    for mid, model in models.items():
        save_model(model, root / _model_filename(mid), extra_header={"config_hash": cfg_hash})
    with open(root / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2)

    bench = MiniBench(root, manifest)
    bench._cache = models
    return bench


def load_bench(path) -> MiniBench:
    root = Path(path)
    with open(root / MANIFEST_NAME) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "ddvkit-bench":
        raise ValueError(f"{root} does not contain a bench manifest")
    return MiniBench(root, manifest)
