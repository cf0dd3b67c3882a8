"""Command-line interface.

Subcommands: ``bench build``, ``compare``, ``inputs gen``, ``eval``,
``ablate``, ``sweep``, ``serve``.  Every command accepts ``--json`` for
machine output; failures print a single-line ``error: ...`` to stderr and
exit nonzero.  ``DDVKIT_SEED`` overrides the default rng seed and
``DDVKIT_THREADS`` caps BLAS/OpenMP threads.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from pathlib import Path


def _apply_env_overrides():
    threads = os.environ.get("DDVKIT_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _env_seed(default=0):
    value = os.environ.get("DDVKIT_SEED")
    return int(value) if value else default


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error: {message}\n")
        sys.exit(2)


def _add_gen_flags(p, include_mode=True):
    p.add_argument("--n-inputs", type=int, default=100, help="number of probe pairs")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5,
                   help="diversity weight in the probe score")
    p.add_argument("--epsilon", type=float, default=0.06,
                   help="black-box mutation step size")
    p.add_argument("--iterations", type=int, default=20000,
                   help="black-box mutation budget")
    p.add_argument("--low-diversity-ratio", type=float, default=0.5)
    p.add_argument("--epsilon-box", type=float, default=0.15,
                   help="white-box L-inf perturbation budget")
    p.add_argument("--pgd-steps", type=int, default=300)
    p.add_argument("--rng-seed", type=int, default=None)
    if include_mode:
        p.add_argument("--mode", choices=("whitebox", "blackbox"), default="whitebox")


def _gen_config(args, mode=None):
    from .config import GenConfig

    return GenConfig(
        lam=args.lam,
        epsilon=args.epsilon,
        iterations=args.iterations,
        low_diversity_ratio=args.low_diversity_ratio,
        n_inputs=args.n_inputs,
        mode=mode or getattr(args, "mode", "whitebox"),
        rng_seed=_env_seed(0) if args.rng_seed is None else args.rng_seed,
        epsilon_box=args.epsilon_box,
        pgd_steps=args.pgd_steps,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ddvkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="benchmark construction")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)
    p_build = bench_sub.add_parser("build", help="build a MiniBench from a config")
    p_build.add_argument("config", help="bench config JSON file, or 'default'")
    p_build.add_argument("-o", "--out", required=True, help="output directory")
    p_build.add_argument("--json", action="store_true")
    p_init = bench_sub.add_parser("default-config", help="print the default bench config")
    p_init.add_argument("--json", action="store_true")

    p_cmp = sub.add_parser("compare", help="compare a suspect model against a target")
    p_cmp.add_argument("--target", required=True, help="target model file (white-box)")
    p_cmp.add_argument("--suspect", required=True,
                       help="model file, 'cmd:<argv>', or 'tcp:<host>:<port>'")
    p_cmp.add_argument("--refs", help="directory of reference model files (threshold)")
    p_cmp.add_argument("--task", help="seed task override (defaults to target metadata)")
    p_cmp.add_argument("--inputs", help="pre-generated probe set file")
    p_cmp.add_argument("--save-inputs", help="write the generated probe set here")
    p_cmp.add_argument("-o", "--out", help="write the comparison report JSON here")
    p_cmp.add_argument("--timeout", type=float, default=30.0,
                       help="adapter timeout per batch (seconds)")
    p_cmp.add_argument("--max-batch", type=int, default=None,
                       help="max tensors per adapter request (default: full set)")
    p_cmp.add_argument("--json", action="store_true")
    _add_gen_flags(p_cmp)

    p_inputs = sub.add_parser("inputs", help="probe input generation")
    inputs_sub = p_inputs.add_subparsers(dest="inputs_command", required=True)
    p_gen = inputs_sub.add_parser("gen", help="generate a probe set for a target model")
    p_gen.add_argument("--target", required=True)
    p_gen.add_argument("--task", help="seed task override")
    p_gen.add_argument("-o", "--out", required=True)
    p_gen.add_argument("--json", action="store_true")
    _add_gen_flags(p_gen)

    p_eval = sub.add_parser("eval", help="evaluate a comparator over a bench")
    p_eval.add_argument("--bench", required=True)
    p_eval.add_argument("--method", required=True,
                        choices=("modeldiff", "weight", "feature", "fingerprint"))
    p_eval.add_argument("-o", "--out", help="write the JSON result here")
    p_eval.add_argument("--refs-per-pair", type=int, default=None)
    p_eval.add_argument("--check", action="store_true",
                        help="exit nonzero if detection gates fail")
    p_eval.add_argument("--json", action="store_true")
    _add_gen_flags(p_eval)

    p_abl = sub.add_parser("ablate", help="probe-configuration ablations")
    p_abl.add_argument("--bench", required=True)
    p_abl.add_argument("--variants", nargs="*", default=None)
    p_abl.add_argument("-o", "--out")
    p_abl.add_argument("--refs-per-pair", type=int, default=None)
    p_abl.add_argument("--json", action="store_true")
    _add_gen_flags(p_abl, include_mode=False)

    p_sweep = sub.add_parser("sweep", help="black-box mutation budget sweep")
    p_sweep.add_argument("--bench", required=True)
    p_sweep.add_argument("--checkpoints", type=int, nargs="*",
                         default=[0, 250, 500, 1000, 2000, 4000])
    p_sweep.add_argument("-o", "--out", help="write the curve CSV here")
    p_sweep.add_argument("--refs-per-pair", type=int, default=None)
    p_sweep.add_argument("--json", action="store_true")
    _add_gen_flags(p_sweep, include_mode=False)

    p_serve = sub.add_parser("serve", help="expose a model over the adapter protocol")
    group = p_serve.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="model file to serve")
    group.add_argument("--echo-dim", type=int, help="serve the echo test model")
    p_serve.add_argument("--tcp", type=int, default=None,
                         help="listen on this TCP port instead of stdio (0 = ephemeral)")
    p_serve.add_argument("--timeout", type=float, default=30.0)
    p_serve.add_argument("--json", action="store_true")

    return parser


# -- command handlers -----------------------------------------------------------


def _load_suspect(spec: str, timeout: float, max_batch):
    from .adapter import RemoteModel
    from .runtime import load_model

    if spec.startswith("cmd:"):
        return RemoteModel.spawn(shlex.split(spec[4:]), timeout=timeout,
                                 max_batch=max_batch)
    if spec.startswith("tcp:"):
        host, port = spec[4:].rsplit(":", 1)
        return RemoteModel.connect(host, int(port), timeout=timeout, max_batch=max_batch)
    return load_model(spec)


def _seeds_for_target(target, task, cfg):
    from .config import derive_seed
    from .data import TASKS, make_dataset
    from .inputgen import select_seeds

    task = task or target.task_id
    if task is None or task not in TASKS:
        raise ValueError(
            "cannot infer a seed task from the target model; pass --task"
        )
    pool = make_dataset(task, derive_seed(cfg.rng_seed, "probe-seeds", task), 500)
    return select_seeds(pool, cfg.n_inputs, derive_seed(cfg.rng_seed, "seeds", target.id))


def cmd_bench(args):
    from .config import config_hash
    from .forge import BenchConfig, build_bench

    if args.bench_command == "default-config":
        print(json.dumps(BenchConfig().to_dict(), indent=2))
        return 0
    if args.config == "default":
        config = BenchConfig()
    else:
        with open(args.config) as fh:
            config = BenchConfig.from_dict(json.load(fh))
    bench = build_bench(config, args.out)
    info = {
        "bench": str(args.out),
        "config_hash": config_hash(config.to_dict()),
        "n_models": len(bench.model_ids),
        "n_reused_pairs": len(bench.reused_pairs()),
    }
    if args.json:
        print(json.dumps(info, indent=2))
    else:
        print(f"built {info['n_models']} models, {info['n_reused_pairs']} reused pairs "
              f"-> {args.out} (config {info['config_hash']})")
    return 0


def cmd_compare(args):
    from .ddv import compare
    from .inputgen import gen_blackbox, gen_whitebox, load_pairset, save_pairset
    from .runtime import load_model

    target = load_model(args.target)
    suspect = _load_suspect(args.suspect, args.timeout, args.max_batch)
    cfg = _gen_config(args)
    try:
        if args.inputs:
            pairs = load_pairset(args.inputs)
        else:
            seeds = _seeds_for_target(target, args.task, cfg)
            gen = gen_whitebox if cfg.mode == "whitebox" else gen_blackbox
            pairs = gen(target, seeds, cfg)
        if args.save_inputs:
            save_pairset(pairs, args.save_inputs)

        references = []
        if args.refs:
            ref_dir = Path(args.refs)
            ref_files = sorted(ref_dir.glob("*.bin"))
            if not ref_files:
                raise ValueError(f"no reference models (*.bin) in {ref_dir}")
            references = [load_model(f) for f in ref_files]

        report = compare(target, suspect, None, cfg,
                         reference_models=references, pairs=pairs)
    finally:
        if hasattr(suspect, "close"):
            suspect.close()

    if args.out:
        Path(args.out).write_text(report.to_json())
    if args.json:
        print(report.to_json())
    else:
        print(f"similarity {report.similarity:.6f}")
        if report.threshold is not None:
            print(f"threshold  {report.threshold:.6f}")
        print(f"verdict    {report.verdict}")
    return 0


def cmd_inputs_gen(args):
    from .config import config_hash
    from .inputgen import gen_blackbox, gen_whitebox, save_pairset
    from .runtime import load_model

    target = load_model(args.target)
    cfg = _gen_config(args)
    seeds = _seeds_for_target(target, args.task, cfg)
    pairs = (gen_whitebox if cfg.mode == "whitebox" else gen_blackbox)(target, seeds, cfg)
    save_pairset(pairs, args.out)
    info = {
        "pairset": str(args.out),
        "pairset_id": pairs.pairset_id,
        "n": len(pairs),
        "score_initial": pairs.score_trace[0],
        "score_final": pairs.score_trace[-1],
        "config_hash": config_hash(cfg),
    }
    print(json.dumps(info, indent=2) if args.json else
          f"wrote {info['n']} pairs to {args.out} "
          f"(score {info['score_initial']:.4f} -> {info['score_final']:.4f})")
    return 0


def cmd_eval(args):
    from .forge import load_bench
    from .harness import check_gates, evaluate

    bench = load_bench(args.bench)
    cfg = _gen_config(args)
    result = evaluate(bench, args.method, cfg, refs_per_pair=args.refs_per_pair)
    if args.out:
        Path(args.out).write_text(result.to_json())
    print(result.to_json() if args.json else result.table())
    if args.check:
        if args.method != "modeldiff":
            sys.stderr.write("error: --check applies to --method modeldiff\n")
            return 2
        gates = check_gates(result)
        for g in gates:
            value = "-" if g["value"] is None else f"{g['value']:.1%}"
            print(f"gate {g['gate']}: {value} (min {g['minimum']:.0%}) "
                  f"{'ok' if g['ok'] else 'FAIL'}")
        if not all(g["ok"] for g in gates):
            return 1
    return 0


def cmd_ablate(args):
    from .config import config_hash
    from .forge import load_bench
    from .harness import ABLATION_VARIANTS, ablate, render_table

    bench = load_bench(args.bench)
    cfg = _gen_config(args, mode="whitebox")
    variants = args.variants or list(ABLATION_VARIANTS)
    rows = ablate(bench, variants, cfg, refs_per_pair=args.refs_per_pair)
    payload = {"config_hash": config_hash(cfg), "variants": rows}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2))
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(render_table(
            ["variant", "correctness", "relative"],
            [[r["variant"], f"{r['correctness']:.3f}",
              "-" if r["relative_correctness"] is None else f"{r['relative_correctness']:.2f}"]
             for r in rows],
        ))
    return 0


def cmd_sweep(args):
    from .config import config_hash
    from .forge import load_bench
    from .harness import curve_to_csv, mutation_sweep, render_table

    bench = load_bench(args.bench)
    cfg = _gen_config(args, mode="blackbox")
    curve = mutation_sweep(bench, args.checkpoints, cfg, refs_per_pair=args.refs_per_pair)
    if args.out:
        Path(args.out).write_text(curve_to_csv(curve, config_hash(cfg)))
    if args.json:
        print(json.dumps({"config_hash": config_hash(cfg), "curve": curve}, indent=2))
    else:
        print(render_table(
            ["iterations", "correctness", "mean score"],
            [[r["iterations"], f"{r['correctness']:.3f}", f"{r['mean_score']:.4f}"]
             for r in curve],
        ))
    return 0


def cmd_serve(args):
    from .adapter import EchoModel, serve_stdio, serve_tcp
    from .runtime import load_model

    if args.echo_dim is not None:
        model = EchoModel(args.echo_dim)
    else:
        model = load_model(args.model)
    if args.tcp is None:
        serve_stdio(model, timeout=args.timeout)
    else:
        def announce(port):
            print(json.dumps({"listening": port}), flush=True)
        serve_tcp(model, port=args.tcp, timeout=args.timeout, ready_callback=announce)
    return 0


_HANDLERS = {
    "bench": cmd_bench,
    "compare": cmd_compare,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    _apply_env_overrides()
    parser = build_parser()
    args = parser.parse_args(argv)
    from .errors import DdvkitError

    handler = cmd_inputs_gen if args.command == "inputs" else _HANDLERS[args.command]
    try:
        return handler(args)
    except (DdvkitError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
