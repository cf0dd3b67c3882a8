"""Benchmark evaluation harness.

Runs a comparator over every reused pair in a bench, scores it against the
pair's reference models, and reports feasibility and correctness per reuse
category.  Correctness is reference-relative: a reused pair counts as
correct only when its score is strictly higher than every feasible
reference score for the same target.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import feature_compare, fingerprint, fingerprint_match, weight_compare
from .config import GenConfig, config_hash, derive_seed, rng_for
from .data import make_dataset
from .ddv import compute_ddv, similarity
from .forge.bench import DIRECT_CATEGORIES, MiniBench
from .inputgen import (
    InputPairSet,
    gen_blackbox_with_snapshots,
    gen_whitebox,
    select_seeds,
)

logger = logging.getLogger(__name__)

METHODS = ("modeldiff", "weight", "feature", "fingerprint")

SEED_POOL_SIZE = 500


@dataclass
class CategoryRow:
    reuse_method: str
    n_pairs: int
    feasibility: float
    correctness: float | None  # None when no pair in the row was feasible


@dataclass
class PairScore:
    target: str
    suspect: str
    category: str
    feasible: bool
    score: float | None
    max_reference: float | None
    n_references: int
    correct: bool


@dataclass
class EvalResult:
    method: str
    rows: list
    overall: CategoryRow
    pair_scores: list
    gen_config: dict
    config_hash: str
    self_scores: dict = field(default_factory=dict)  # sanity: score(t, t) per target

    def to_json(self) -> str:
        return json.dumps(
            {
                "method": self.method,
                "rows": [asdict(r) for r in self.rows],
                "overall": asdict(self.overall),
                "pair_scores": [asdict(p) for p in self.pair_scores],
                "gen_config": self.gen_config,
                "config_hash": self.config_hash,
                "self_scores": self.self_scores,
            },
            indent=2,
        )

    def table(self) -> str:
        return render_table(
            ["reuse method", "#pairs", "feasibility", "correctness"],
            [
                [
                    r.reuse_method,
                    r.n_pairs,
                    f"{r.feasibility:.0%}",
                    "-" if r.correctness is None else f"{r.correctness:.1%}",
                ]
                for r in [*self.rows, self.overall]
            ],
        )


def render_table(headers, rows) -> str:
    cells = [[str(c) for c in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(str(c).ljust(w) for c, w in zip(row, widths))
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in cells)
    return "\n".join(lines)


def probe_seed_pool(bench: MiniBench, task_id: str):
    """Held-out pool the probe seeds are drawn from (disjoint from training)."""
    return make_dataset(
        task_id, derive_seed(bench.config.seed, "probe-seeds", task_id), SEED_POOL_SIZE
    )


def generate_probes(bench: MiniBench, target_id: str, cfg: GenConfig,
                    seeds=None) -> InputPairSet:
    """Probe set for one target model under the given config."""
    target = bench.model(target_id)
    if seeds is None:
        pool = probe_seed_pool(bench, target.task_id or bench.config.source_task)
        seeds = select_seeds(pool, cfg.n_inputs, derive_seed(cfg.rng_seed, "seeds", target_id))
    if cfg.mode == "whitebox":
        return gen_whitebox(target, seeds, cfg)
    return gen_blackbox_with_snapshots(target, seeds, cfg)[0]


class _ModeldiffScorer:
    """Caches the target DDV per probe set and scores suspects against it."""

    def __init__(self, bench):
        self.bench = bench
        self._ddvs = {}

    def ddv(self, pairs, model_id):
        key = (pairs.pairset_id, model_id)
        if key not in self._ddvs:
            self._ddvs[key] = compute_ddv(self.bench.model(model_id), pairs)
        return self._ddvs[key]

    def score(self, pairs, target_id, suspect_id):
        return similarity(self.ddv(pairs, target_id), self.ddv(pairs, suspect_id))


def _method_scorer(bench: MiniBench, method: str, probes: dict):
    """Returns score(target_id, suspect_id) -> float | None (infeasible)."""
    if method == "modeldiff":
        dd = _ModeldiffScorer(bench)
        return lambda t, s: dd.score(probes[t], t, s)
    if method == "weight":
        return lambda t, s: weight_compare(bench.model(t), bench.model(s))
    if method == "feature":
        return lambda t, s: feature_compare(bench.model(t), bench.model(s), probes[t].seeds)
    if method == "fingerprint":
        fps = {}
        def score(t, s):
            if t not in fps:
                fps[t] = fingerprint(bench.model(t), probes[t])
            return fingerprint_match(fps[t], bench.model(s))
        return score
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _judge_pairs(bench, pairs_list, score_fn, refs_per_pair=None, seed=0):
    """Score each reused pair against its references; strict-majorization rule."""
    results = []
    for pair in pairs_list:
        s = score_fn(pair.target, pair.suspect)
        feasible = s is not None
        ref_ids = bench.reference_ids(pair.target, pair.suspect)
        if refs_per_pair is not None and len(ref_ids) > refs_per_pair:
            rng = rng_for(seed, "refs", pair.target, pair.suspect)
            ref_ids = list(rng.choice(ref_ids, size=refs_per_pair, replace=False))
        ref_scores = []
        if feasible:
            for rid in ref_ids:
                rs = score_fn(pair.target, rid)
                if rs is not None:
                    ref_scores.append(rs)
        correct = feasible and bool(ref_scores) and s > max(ref_scores)
        results.append(
            PairScore(
                target=pair.target,
                suspect=pair.suspect,
                category=pair.category,
                feasible=feasible,
                score=None if s is None else float(s),
                max_reference=max(ref_scores) if ref_scores else None,
                n_references=len(ref_scores),
                correct=correct,
            )
        )
    return results


def _rows_from_scores(scores) -> tuple[list, CategoryRow]:
    by_cat = {}
    for ps in scores:
        by_cat.setdefault(ps.category, []).append(ps)
    rows = []
    for cat in sorted(by_cat):
        group = by_cat[cat]
        feasible = [p for p in group if p.feasible]
        rows.append(
            CategoryRow(
                reuse_method=cat,
                n_pairs=len(group),
                feasibility=len(feasible) / len(group),
                correctness=(
                    sum(p.correct for p in feasible) / len(feasible) if feasible else None
                ),
            )
        )
    feasible = [p for p in scores if p.feasible]
    overall = CategoryRow(
        reuse_method="overall",
        n_pairs=len(scores),
        feasibility=len(feasible) / len(scores) if scores else 0.0,
        correctness=(
            sum(p.correct for p in feasible) / len(feasible) if feasible else None
        ),
    )
    return rows, overall


def evaluate(bench: MiniBench, method: str, cfg: GenConfig | None = None,
             refs_per_pair=None) -> EvalResult:
    """Feasibility/correctness of one comparator over all reused pairs."""
    if cfg is None:
        cfg = GenConfig()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    reused = bench.reused_pairs()
    targets = sorted({p.target for p in reused})
    probes = {t: generate_probes(bench, t, cfg) for t in targets}
    score_fn = _method_scorer(bench, method, probes)
    scores = _judge_pairs(bench, reused, score_fn, refs_per_pair, seed=cfg.rng_seed)
    rows, overall = _rows_from_scores(scores)
    self_scores = {t: score_fn(t, t) for t in targets}
    return EvalResult(
        method=method,
        rows=rows,
        overall=overall,
        pair_scores=scores,
        gen_config=cfg.to_dict(),
        config_hash=config_hash(cfg),
        self_scores=self_scores,
    )


# -- acceptance gates --------------------------------------------------------

GATES = (
    ("quantize", ("quantize",), 1.0),
    ("prune", ("prune-0.2", "prune-0.5", "prune-0.8"), 0.9),
    ("transfer", ("transfer-0.1", "transfer-0.5", "transfer-1.0"), 0.9),
    ("combined", ("transfer+prune", "transfer+quantize", "transfer+distill"), 0.8),
)


def check_gates(result: EvalResult):
    """Detection-quality gates for the DDV comparator on MiniBench."""
    out = []
    for name, cats, minimum in GATES:
        pairs = [p for p in result.pair_scores if p.category in cats and p.feasible]
        if not pairs:
            out.append({"gate": name, "value": None, "minimum": minimum, "ok": False})
            continue
        value = sum(p.correct for p in pairs) / len(pairs)
        out.append({"gate": name, "value": value, "minimum": minimum, "ok": value >= minimum})
    return out


# -- configuration ablations ---------------------------------------------------

ABLATION_VARIANTS = (
    "default",
    "random_noise_seeds",
    "fewer_seeds",
    "more_seeds",
    "irrelevant_seeds",
    "all_normal",
    "all_adversarial",
    "without_diversity",
)


def _derango(n, rng):
    """Random permutation with no fixed points (one n-cycle)."""
    perm = rng.permutation(n)
    out = np.empty(n, dtype=np.int64)
    out[perm] = np.roll(perm, -1)
    return out


def _variant_probes(bench, target_id, variant, cfg) -> InputPairSet:
    target = bench.model(target_id)
    task = target.task_id or bench.config.source_task
    pool = probe_seed_pool(bench, task)
    seed_key = derive_seed(cfg.rng_seed, "seeds", target_id)
    rng = rng_for(cfg.rng_seed, "variant", variant, target_id)

    if variant == "default":
        return generate_probes(bench, target_id, cfg)
    if variant == "random_noise_seeds":
        noise = rng.random((cfg.n_inputs, *target.input_shape), dtype=np.float64)
        return gen_whitebox(target, noise.astype(np.float32), cfg)
    if variant == "fewer_seeds":
        few = cfg.replace(n_inputs=10)
        return generate_probes(bench, target_id, few)
    if variant == "more_seeds":
        more = cfg.replace(n_inputs=200)
        return generate_probes(bench, target_id, more)
    if variant == "irrelevant_seeds":
        other = next(t for t in (*bench.config.transfer_tasks, bench.config.source_task)
                     if t != task)
        other_pool = probe_seed_pool(bench, other)
        seeds = select_seeds(other_pool, cfg.n_inputs, seed_key)
        return gen_whitebox(target, seeds, cfg)
    if variant == "all_normal":
        # no adversarial content: pair each seed with a different seed
        seeds = select_seeds(pool, cfg.n_inputs, seed_key)
        perm = _derango(len(seeds), rng)
        return InputPairSet(seeds=seeds, adversarial=seeds[perm].copy(),
                            target_model_id=target_id, gen_config=cfg)
    if variant == "all_adversarial":
        base = generate_probes(bench, target_id, cfg)
        perm = _derango(len(base), rng)
        return InputPairSet(seeds=base.adversarial.copy(),
                            adversarial=base.adversarial[perm].copy(),
                            target_model_id=target_id, gen_config=cfg)
    if variant == "without_diversity":
        flat = cfg.replace(lam=0.0)
        seeds = select_seeds(pool, cfg.n_inputs, seed_key, stratify=False)
        return gen_whitebox(target, seeds, flat)
    raise ValueError(f"unknown ablation variant {variant!r}")


def ablate(bench: MiniBench, variants=ABLATION_VARIANTS, cfg: GenConfig | None = None,
           refs_per_pair=None) -> list[dict]:
    """Relative correctness of configuration variants on direct-reuse pairs."""
    if cfg is None:
        cfg = GenConfig()
    direct = [p for p in bench.reused_pairs() if p.category in DIRECT_CATEGORIES]
    targets = sorted({p.target for p in direct})

    def correctness_for(variant):
        probes = {t: _variant_probes(bench, t, variant, cfg) for t in targets}
        dd = _ModeldiffScorer(bench)
        score_fn = lambda t, s: dd.score(probes[t], t, s)
        scores = _judge_pairs(bench, direct, score_fn, refs_per_pair, seed=cfg.rng_seed)
        return sum(p.correct for p in scores) / len(scores)

    baseline = correctness_for("default")
    results = []
    for variant in variants:
        corr = baseline if variant == "default" else correctness_for(variant)
        rel = corr / baseline if baseline > 0 else None
        results.append(
            {"variant": variant, "correctness": corr, "relative_correctness": rel}
        )
        logger.info("ablation %s: correctness %.3f", variant, corr)
    return results


# -- black-box mutation budget sweep -------------------------------------------

def mutation_sweep(bench: MiniBench, checkpoints=(0, 250, 500, 1000, 2000, 4000),
                   cfg: GenConfig | None = None, refs_per_pair=None) -> list[dict]:
    """Correctness of black-box probes at several mutation budgets.

    Returns one row per checkpoint: {iterations, correctness, mean_score}.
    """
    if cfg is None:
        cfg = GenConfig()
    checkpoints = sorted(set(int(c) for c in checkpoints))
    budget = max(checkpoints)
    run_cfg = cfg.replace(mode="blackbox", iterations=budget)
    direct = [p for p in bench.reused_pairs() if p.category in DIRECT_CATEGORIES]
    targets = sorted({p.target for p in direct})

    snaps_by_target = {}
    for t in targets:
        target = bench.model(t)
        pool = probe_seed_pool(bench, target.task_id or bench.config.source_task)
        seeds = select_seeds(pool, run_cfg.n_inputs, derive_seed(run_cfg.rng_seed, "seeds", t))
        _, snaps = gen_blackbox_with_snapshots(target, seeds, run_cfg,
                                               snapshot_iters=checkpoints)
        snaps_by_target[t] = snaps

    curve = []
    for ck in checkpoints:
        probes = {t: snaps_by_target[t][ck] for t in targets}
        dd = _ModeldiffScorer(bench)
        score_fn = lambda t, s: dd.score(probes[t], t, s)
        scores = _judge_pairs(bench, direct, score_fn, refs_per_pair, seed=cfg.rng_seed)
        correctness = sum(p.correct for p in scores) / len(scores)
        mean_score = float(np.mean([probes[t].score_trace[-1] for t in targets]))
        curve.append({"iterations": ck, "correctness": correctness, "mean_score": mean_score})
        logger.info("sweep checkpoint %d: correctness %.3f", ck, correctness)
    return curve


def curve_to_csv(curve, cfg_hash: str | None = None) -> str:
    lines = []
    if cfg_hash:
        lines.append(f"# config_hash={cfg_hash}")
    lines.append("iterations,correctness,mean_score")
    lines += [f"{r['iterations']},{r['correctness']:.6f},{r['mean_score']:.6f}" for r in curve]
    return "\n".join(lines) + "\n"
