"""Command-line interface: ``run``, ``sweep``, ``eval`` and ``inspect``."""

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import runio
from .config import ABLATIONS, SWEEP_AXES, dump_config, parse_config
from .exceptions import ConfigurationError, FUParetoError
from .federation import Federation

log = logging.getLogger("fupareto")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
STAGES = ("all", "pretrain", "unlearn", "posttrain")


def apply_overrides(cfg, seed=None, ablation=None):
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if ablation is not None:
        changes["ablation"] = ablation
    return cfg.replace(**changes) if changes else cfg


def execute(cfg, out=None, stage="all", init=None, anchor=None):
    """Run one pipeline and (optionally) write its run directory.

    Returns ``(federation, PipelineResult)``.
    """
    dataset = runio.build_dataset(cfg)
    spec = runio.build_spec(cfg, dataset)
    fed = Federation(dataset, spec, cfg)
    w_init = runio.load_model(init) if init else None
    if w_init is not None and w_init.shape[0] != spec.n_params:
        raise ConfigurationError(
            f"--init model has {w_init.shape[0]} parameters, expected {spec.n_params}")
    stages = {"all": ("pretrain", "unlearn", "posttrain"), "pretrain": ("pretrain",),
              "unlearn": ("unlearn",), "posttrain": ("posttrain",)}[stage]
    w_anchor = None
    if stage == "posttrain":
        if w_init is None:
            raise ConfigurationError("--stage posttrain needs --init")
        anchor = anchor or Path(init).with_name("model_pre.bin")
        w_anchor = runio.load_model(anchor)
    if stage == "unlearn" and w_init is None:
        stages = ("pretrain", "unlearn")
    result = fed.run_pipeline(w_pre=w_init, stages=stages, w_anchor=w_anchor)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.resolved").write_text(dump_config(cfg))
        runio.write_rounds(out / "rounds.csv", result.records)
        if stage in ("all", "pretrain", "unlearn"):
            runio.save_model(out / "model_pre.bin", result.w_pre)
        if stage in ("all", "unlearn"):
            runio.save_model(out / "model_unlearned.bin", result.w_unlearned)
        if stage in ("all", "posttrain"):
            runio.save_model(out / "model_final.bin", result.w_final)
        (out / "summary.json").write_text(
            json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    return fed, result


def summary_line(result, label, seconds):
    final = result.summary["final"]
    parts = [f"[{label}]"]
    if "asr" in final:
        parts.append(f"ASR={final['asr']:.4f}")
    if "racc_mean" in final:
        parts.append(f"R-Acc={final['racc_mean']:.4f}±{final['racc_std']:.4f}")
    if "mia_auc" in final:
        parts.append(f"MIA-AUC={final['mia_auc']:.4f}")
    parts.append(f"time={seconds:.1f}s")
    return " ".join(parts)


def cmd_run(args):
    cfg = apply_overrides(parse_config(args.config), args.seed, args.ablation)
    t0 = time.perf_counter()
    _, result = execute(cfg, args.out, args.stage, args.init, args.anchor)
    print(summary_line(result, cfg.ablation or "FUPareto", time.perf_counter() - t0))
    return EXIT_OK


def _sweep_cell(job):
    cfg, axis, value = job
    _, result = execute(cfg)
    s = result.summary
    return {"axis": axis, "value": value, "seed": cfg.seed,
            "asr_unlearned": s["unlearned"].get("asr", float("nan")),
            "asr_final": s["final"].get("asr", float("nan")),
            "racc_unlearned": s["unlearned"].get("racc_mean", float("nan")),
            "racc_final": s["final"].get("racc_mean", float("nan")),
            "mia_auc_final": s["final"].get("mia_auc", float("nan"))}


def sweep(cfg, axis, jobs=1):
    """One pipeline per axis value, crossed with ``cfg.sweep_seeds``.

    Returns ``(per_run_rows, aggregated_rows)``.
    """
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    values = cfg.sweep.get(axis)
    if not values:
        raise ConfigurationError(f"no values listed for sweep axis {axis!r}")
    seeds = cfg.sweep_seeds or [cfg.seed]
    work = []
    for v in values:
        for seed in ([v] if axis == "seed" else seeds):
            work.append((cfg.replace(**{axis: v, "seed": seed}), axis, v))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_sweep_cell, work))
    else:
        rows = [_sweep_cell(job) for job in work]
    metrics = ("asr_unlearned", "asr_final", "racc_unlearned", "racc_final",
               "mia_auc_final")
    agg = []
    for v in values:
        cell = [r for r in rows if r["value"] == v]
        out = {"axis": axis, "value": v, "runs": len(cell)}
        for m in metrics:
            arr = np.array([r[m] for r in cell])
            out[f"{m}_mean"] = float(arr.mean())
            out[f"{m}_std"] = float(arr.std())
        agg.append(out)
    return rows, agg


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def cmd_sweep(args):
    cfg = apply_overrides(parse_config(args.config), args.seed, args.ablation)
    rows, agg = sweep(cfg, args.axis, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(dump_config(cfg))
    _write_csv(out / "sweep_runs.csv", rows)
    _write_csv(out / "sweep.csv", agg)
    for row in agg:
        print(f"{row['axis']}={row['value']}: ASR={row['asr_final_mean']:.4f} "
              f"R-Acc={row['racc_final_mean']:.4f} (n={row['runs']})")
    return EXIT_OK


def cmd_eval(args):
    cfg = apply_overrides(parse_config(args.config), args.seed, args.ablation)
    dataset = runio.build_dataset(cfg)
    spec = runio.build_spec(cfg, dataset)
    fed = Federation(dataset, spec, cfg)
    w = runio.load_model(args.model)
    w0 = runio.load_model(args.anchor) if args.anchor else None
    print(json.dumps(fed.summary(w, w0), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_inspect(args):
    header = runio.read_model_header(args.model)
    w = runio.load_model(args.model)
    print(f"magic={header['magic']} version={header['version']} n={header['n']}")
    print(f"l2={np.linalg.norm(w):.6g} linf={np.abs(w).max() if w.size else 0:.6g}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="fupareto", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--ablation", choices=ABLATIONS)

    p = sub.add_parser("run", help="pretrain, unlearn and post-train")
    common(p)
    p.add_argument("--stage", choices=STAGES, default="all")
    p.add_argument("--init", help="start from this model file")
    p.add_argument("--anchor", help="pre-unlearning model for --stage posttrain")
    p.add_argument("--out", default="run")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one pipeline per value of an axis")
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="metrics of an existing model")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--anchor")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="print a model header and norms")
    p.add_argument("model")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FUParetoError as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
