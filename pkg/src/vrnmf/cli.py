"""Command-line front end.

Subcommands: ``unmix`` (factor a data matrix), ``synth`` (generate synthetic
data), ``tune`` (bisection search of the penalty weight), ``score`` (recovery
metrics), ``bench`` (sweep over purity/noise/seed grids).

Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 solver or generation
error, 5 every benchmark cell failed.  ``VRNMF_THREADS`` caps benchmark
worker parallelism (0 = auto).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .driver import SolverConfig, run, spa_init
from .exceptions import VrnmfError
from .io import read_json, read_matrix, write_json, write_label_grid, write_matrix, write_ppm
from .metrics import matched_pair_scores, mrsa_matched, recovery_curve, segmentation_map
from .regularizers import Regularizer, VolumeKind, resolve_delta
from .solver_h import ApgOptions
from .synth import SyntheticSpec, synth_generate
from .tuning import TuneResult, _init_scale, tune_lambda

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SOLVER = 4
EXIT_ALL_FAILED = 5


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--regularizer", choices=[k.value for k in VolumeKind],
                   default="logdet", help="volume penalty on W")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="penalty weight (raw, not the scaled search variable)")
    p.add_argument("--delta", type=float, default=None,
                   help="logdet floor; defaults to a scale-relative value")
    p.add_argument("--max-iter", type=int, default=300, help="outer iterations")
    p.add_argument("--h-max-iter", type=int, default=300)
    p.add_argument("--h-rel-tol", type=float, default=1e-8)
    p.add_argument("--w-inner-iter", type=int, default=50)
    p.add_argument("--w-rel-tol", type=float, default=1e-9)
    p.add_argument("--trace-every", type=int, default=1)
    p.add_argument("--rel-exit", type=float, default=None,
                   help="optional early exit on relative objective change")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vrnmf",
                                 description="Volume-regularized NMF toolkit")
    ap.add_argument("--version", action="version", version=f"vrnmf {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("unmix", help="factor a data matrix")
    p.add_argument("--input", required=True, help="data matrix CSV (m x n)")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--wtrue", default=None, help="optional ground-truth endmembers for scoring")
    p.add_argument("--out", required=True, help="output directory")
    _add_solver_flags(p)

    p = sub.add_parser("synth", help="generate synthetic mixing data")
    p.add_argument("--endmembers", required=True, help="ground-truth endmember CSV (m x r)")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--purity", default=None,
                   help="comma-separated per-endmember purity caps in (1/r, 1]")
    p.add_argument("--alpha", type=float, default=0.1, help="Dirichlet concentration")
    p.add_argument("--sigma", type=float, default=0.0, help="noise standard deviation")
    p.add_argument("--sigma-is-variance", action="store_true",
                   help="interpret --sigma as a variance")
    p.add_argument("--max-resamples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("tune", help="bisection search of the penalty weight")
    p.add_argument("--input", required=True)
    p.add_argument("--wtrue", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_solver_flags(p)

    p = sub.add_parser("score", help="recovery metrics for a computed basis")
    p.add_argument("--w", required=True)
    p.add_argument("--wtrue", required=True)
    p.add_argument("--curve", default=None, help="write per-endmember recovery curve CSV here")
    p.add_argument("--thresholds", default=None,
                   help="comma-separated curve thresholds (default 0..100 step 1)")
    p.add_argument("--h", dest="h_path", default=None, help="abundances for --segment")
    p.add_argument("--segment", default=None, help="write label grid here (needs --h)")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--ppm", default=None, help="also render the label grid as P3 PPM")

    p = sub.add_parser("bench", help="sweep purity/noise/seed/regularizer grids")
    p.add_argument("--config", required=True, help="bench config JSON")
    p.add_argument("--out", required=True)
    return ap


def _load(path: str):
    try:
        return read_matrix(path)
    except OSError as exc:
        raise _CliExit(EXIT_IO, f"cannot read {path}: {exc}") from exc
    except VrnmfError as exc:
        raise _CliExit(EXIT_IO, f"bad matrix file {path}: {exc}") from exc


class _CliExit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _solver_config(args, x, r: int) -> tuple[SolverConfig, Regularizer]:
    reg = Regularizer(kind=VolumeKind(args.regularizer), delta=args.delta)
    w0, _ = spa_init(x, r)
    reg = resolve_delta(reg, w0)
    cfg = SolverConfig(
        lam=args.lam,
        reg=reg,
        outer_iters=args.max_iter,
        h_opts=ApgOptions(max_iters=args.h_max_iter, rel_tol=args.h_rel_tol),
        w_inner_iters=args.w_inner_iter,
        w_rel_tol=args.w_rel_tol,
        seed=args.seed,
        trace_every=args.trace_every,
        objective_rel_exit=args.rel_exit,
    )
    return cfg, reg


def _config_echo(cfg: SolverConfig, rank: int) -> dict:
    return {
        "rank": rank,
        "lambda": cfg.lam,
        "regularizer": cfg.reg.kind.value,
        "delta": cfg.reg.delta,
        "outer_iters": cfg.outer_iters,
        "h_max_iters": cfg.h_opts.max_iters,
        "h_rel_tol": cfg.h_opts.rel_tol,
        "h_restart": cfg.h_opts.restart,
        "w_inner_iters": cfg.w_inner_iters,
        "w_rel_tol": cfg.w_rel_tol,
        "trace_every": cfg.trace_every,
        "objective_rel_exit": cfg.objective_rel_exit,
        "seed": cfg.seed,
    }


def _relative_fit_percent(x, w, h) -> float:
    return 100.0 * float(np.linalg.norm(x - w @ h) / np.linalg.norm(x))


def _write_trace_csv(path, trace) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["iteration", "fit", "volume", "total", "seconds"])
        for e in trace.entries:
            out.writerow([e.iteration, format(e.objective.fit, ".17g"),
                          format(e.objective.volume, ".17g"),
                          format(e.objective.total, ".17g"),
                          format(e.seconds, ".6f")])


def cmd_unmix(args) -> int:
    x = _load(args.input)
    if not 1 <= args.rank <= min(x.shape):
        raise _CliExit(EXIT_USAGE, f"--rank must be in [1, {min(x.shape)}] for input {x.shape}")
    w_true = _load(args.wtrue) if args.wtrue else None
    try:
        cfg, _ = _solver_config(args, x, args.rank)
        t0 = time.perf_counter()
        pair, trace = run(x, args.rank, cfg)
        wall = time.perf_counter() - t0
    except (VrnmfError, np.linalg.LinAlgError) as exc:
        raise _CliExit(EXIT_SOLVER, f"solver failed: {exc}") from exc

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "W.csv", pair.w)
    write_matrix(out / "H.csv", pair.h)
    _write_trace_csv(out / "trace.csv", trace)

    mrsa = None
    if w_true is not None:
        if w_true.shape != pair.w.shape:
            raise _CliExit(EXIT_USAGE,
                           f"--wtrue shape {w_true.shape} does not match W {pair.w.shape}")
        mrsa, _ = mrsa_matched(pair.w, w_true)
    final = trace.entries[-1].objective
    write_json(out / "manifest.json", {
        "tool": "vrnmf",
        "tool_version": __version__,
        "command": "unmix",
        "config": _config_echo(cfg, args.rank),
        "input": {"path": str(args.input), "rows": x.shape[0], "cols": x.shape[1]},
        "results": {
            "status": trace.status,
            "wall_seconds": wall,
            "relative_fit_percent": _relative_fit_percent(x, pair.w, pair.h),
            "mrsa": mrsa,
            "final_objective": {"fit": final.fit, "volume": final.volume,
                                "lambda": final.lam, "total": final.total},
        },
    })
    return EXIT_OK


def cmd_synth(args) -> int:
    w_true = _load(args.endmembers)
    r = w_true.shape[1]
    purity = None
    if args.purity:
        try:
            purity = [float(v) for v in args.purity.split(",")]
        except ValueError as exc:
            raise _CliExit(EXIT_USAGE, f"bad --purity list: {exc}") from exc
        if len(purity) != r:
            raise _CliExit(EXIT_USAGE,
                           f"--purity needs {r} entries to match the endmembers, got {len(purity)}")
    try:
        spec = SyntheticSpec(
            w_true=w_true, n=args.n, p=purity, dirichlet_alpha=args.alpha,
            noise_sigma=args.sigma, seed=args.seed,
            max_resamples=args.max_resamples, sigma_is_variance=args.sigma_is_variance,
        )
        x, h_true = synth_generate(spec)
    except VrnmfError as exc:
        raise _CliExit(EXIT_SOLVER, f"generation failed: {exc}") from exc

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "X.csv", x)
    write_matrix(out / "Htrue.csv", h_true)
    write_json(out / "spec.json", {
        "tool": "vrnmf",
        "tool_version": __version__,
        "command": "synth",
        "endmembers": str(args.endmembers),
        "n": spec.n,
        "purity": [float(v) for v in spec.p],
        "dirichlet_alpha": spec.dirichlet_alpha,
        "noise_sigma": spec.noise_sigma,
        "sigma_is_variance": spec.sigma_is_variance,
        "seed": spec.seed,
        "max_resamples": spec.max_resamples,
    })
    return EXIT_OK


def cmd_tune(args) -> int:
    x = _load(args.input)
    w_true = _load(args.wtrue)
    if not 1 <= args.rank <= min(x.shape):
        raise _CliExit(EXIT_USAGE, f"--rank must be in [1, {min(x.shape)}] for input {x.shape}")
    if w_true.shape != (x.shape[0], args.rank):
        raise _CliExit(EXIT_USAGE,
                       f"--wtrue shape {w_true.shape} must be ({x.shape[0]}, {args.rank})")
    try:
        cfg, _ = _solver_config(args, x, args.rank)
        t0 = time.perf_counter()
        result = tune_lambda(x, w_true, args.rank, cfg)
        wall = time.perf_counter() - t0
    except (VrnmfError, np.linalg.LinAlgError) as exc:
        raise _CliExit(EXIT_SOLVER, f"tuning failed: {exc}") from exc

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "tune.json", {
        "tool": "vrnmf",
        "tool_version": __version__,
        "command": "tune",
        "config": _config_echo(cfg, args.rank),
        "input": {"path": str(args.input), "wtrue": str(args.wtrue)},
        "results": {
            "lambda_tilde": result.lambda_tilde,
            "lambda": result.lam,
            "mrsa": result.mrsa,
            "bisection_rounds": result.bisection_rounds,
            "evaluations": [[lt, v] for lt, v in result.evaluations],
            "wall_seconds": wall,
        },
    })
    return EXIT_OK


def cmd_score(args) -> int:
    w = _load(args.w)
    w_true = _load(args.wtrue)
    if w.shape != w_true.shape:
        raise _CliExit(EXIT_USAGE, f"shape mismatch: {w.shape} vs {w_true.shape}")
    try:
        score, _ = mrsa_matched(w, w_true)
    except VrnmfError as exc:
        raise _CliExit(EXIT_SOLVER, f"scoring failed: {exc}") from exc
    print(f"{score:.6f}")

    if args.curve:
        if args.thresholds:
            thresholds = [float(v) for v in args.thresholds.split(",")]
        else:
            thresholds = [float(v) for v in range(0, 101)]
        pairs = recovery_curve(matched_pair_scores(w, w_true), thresholds)
        with open(args.curve, "w", newline="\n", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["threshold", "fraction"])
            out.writerows(pairs)

    if args.segment:
        if not (args.h_path and args.width and args.height):
            raise _CliExit(EXIT_USAGE, "--segment needs --h, --width and --height")
        h = _load(args.h_path)
        try:
            labels = segmentation_map(h, args.width, args.height)
        except VrnmfError as exc:
            raise _CliExit(EXIT_USAGE, str(exc)) from exc
        write_label_grid(args.segment, labels)
        if args.ppm:
            write_ppm(args.ppm, labels)
    return EXIT_OK


def _bench_cell(job: dict) -> dict:
    """Run one benchmark cell; returns a row for the aggregate table."""
    t0 = time.perf_counter()
    row = {k: job[k] for k in ("cell", "regularizer", "purity", "sigma", "seed")}
    try:
        spec = SyntheticSpec(
            w_true=np.asarray(job["w_true"]), n=job["n"], p=job["purity"],
            dirichlet_alpha=job["alpha"], noise_sigma=job["sigma"], seed=job["seed"],
        )
        x, _ = synth_generate(spec)
        r = spec.rank
        reg = Regularizer(kind=VolumeKind(job["regularizer"]), delta=job["delta"])
        cfg = SolverConfig(
            lam=0.0, reg=reg, outer_iters=job["outer_iters"],
            h_opts=ApgOptions(max_iters=job["h_max_iters"]),
            w_inner_iters=job["w_inner_iters"], seed=job["seed"],
            trace_every=max(1, job["outer_iters"]),
        )
        if job["tune"]:
            result = tune_lambda(x, spec.w_true, r, cfg)
            lam, lam_tilde, mrsa = result.lam, result.lambda_tilde, result.mrsa
            reg = resolve_delta(reg, spa_init(x, r)[0])
            pair, trace = run(x, r, replace(cfg, lam=lam, reg=reg))
        else:
            scale, cfg = _init_scale(x, r, cfg)
            lam_tilde = job["lambda_tilde"]
            lam = lam_tilde * scale
            pair, trace = run(x, r, replace(cfg, lam=lam))
            mrsa, _ = mrsa_matched(pair.w, spec.w_true)
        row.update({
            "status": "ok",
            "mrsa": mrsa,
            "lambda": lam,
            "lambda_tilde": lam_tilde,
            "relative_fit_percent": _relative_fit_percent(x, pair.w, pair.h),
            "wall_seconds": time.perf_counter() - t0,
            "solver_status": trace.status,
        })
    except (VrnmfError, np.linalg.LinAlgError) as exc:
        row.update({
            "status": f"failed: {exc}",
            "mrsa": None,
            "lambda": None,
            "lambda_tilde": None,
            "relative_fit_percent": None,
            "wall_seconds": time.perf_counter() - t0,
            "solver_status": "failed",
        })
    return row


def _bench_workers() -> int:
    raw = os.environ.get("VRNMF_THREADS", "")
    if raw == "":
        return 1
    count = int(raw)
    return count if count > 0 else (os.cpu_count() or 1)


def cmd_bench(args) -> int:
    try:
        conf = read_json(args.config)
    except FileNotFoundError as exc:
        raise _CliExit(EXIT_IO, f"cannot read {args.config}: {exc}") from exc
    except ValueError as exc:
        raise _CliExit(EXIT_IO, f"bad bench config: {exc}") from exc

    required = ("endmembers", "purities", "sigmas", "seeds", "regularizers")
    missing = [k for k in required if k not in conf]
    if missing:
        raise _CliExit(EXIT_USAGE, f"bench config is missing keys: {', '.join(missing)}")
    w_true = _load(conf["endmembers"])
    defaults = {
        "n": 1000, "alpha": 0.1, "outer_iters": 300, "h_max_iters": 300,
        "w_inner_iters": 50, "delta": None, "tune": False, "lambda_tilde": 0.05,
    }
    settings = {**defaults, **{k: conf[k] for k in defaults if k in conf}}

    cells = list(itertools.product(conf["regularizers"], conf["purities"],
                                   conf["sigmas"], conf["seeds"]))
    jobs = []
    for idx, (reg, purity, sigma, seed) in enumerate(cells):
        jobs.append({
            "cell": idx, "regularizer": reg, "purity": list(purity),
            "sigma": float(sigma), "seed": int(seed),
            "w_true": w_true.tolist(), **settings,
        })

    workers = _bench_workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_cell, jobs))
    else:
        rows = [_bench_cell(job) for job in jobs]

    out = Path(args.out)
    cells_dir = out / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    for job, row in zip(jobs, rows):
        cell_dir = cells_dir / f"cell_{row['cell']:04d}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        write_json(cell_dir / "manifest.json", {
            "tool": "vrnmf", "tool_version": __version__, "command": "bench-cell",
            "config": {k: job[k] for k in
                       ("regularizer", "purity", "sigma", "seed", "n", "alpha",
                        "outer_iters", "h_max_iters", "w_inner_iters", "delta",
                        "tune", "lambda_tilde")},
            "results": {k: row[k] for k in
                        ("status", "mrsa", "lambda", "lambda_tilde",
                         "relative_fit_percent", "wall_seconds", "solver_status")},
        })

    with open(out / "aggregate.csv", "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "regularizer", "purity", "sigma", "seed",
                         "mrsa", "relative_fit_percent", "wall_seconds", "status"])
        for row in rows:
            writer.writerow([
                row["cell"], row["regularizer"],
                "|".join(format(v, "g") for v in row["purity"]),
                format(row["sigma"], "g"), row["seed"],
                "" if row["mrsa"] is None else format(row["mrsa"], ".6f"),
                "" if row["relative_fit_percent"] is None
                else format(row["relative_fit_percent"], ".6f"),
                format(row["wall_seconds"], ".3f"), row["status"],
            ])

    succeeded = sum(1 for row in rows if row["status"] == "ok")
    if succeeded == 0:
        print(f"bench: all {len(rows)} cells failed", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


_COMMANDS = {
    "unmix": cmd_unmix,
    "synth": cmd_synth,
    "tune": cmd_tune,
    "score": cmd_score,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _CliExit as exc:
        print(f"vrnmf {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"vrnmf {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
