"""Command-line surface: pair, cache, run, eval, inspect.

The CLI is a thin shell over the library: every subcommand calls module
operations with the parameters of the loaded config. Exit codes: 0 on
success, 1 on config/startup failure, 2 when some (but not necessarily
all) data files failed during `run`.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import cache as cache_mod
from . import dataset as dataset_mod
from .config import PipelineConfig, load_config
from .errors import PipelineError
from .executors import make_executor
from .figures import render_report_outputs
from .formats import IMAGE_SUFFIXES, inspect_ndt, inspect_tiff, read_image, write_ndt
from .metrics import evaluate_set
from .tiling import count_windows, plan_windows, run_over_outer_axes
from .transforms import build_chain

PROG = "mmvpipe"


def _fail(message: str) -> int:
    print(f"{PROG}: error: {message}", file=sys.stderr)
    return 1


def _load(args) -> PipelineConfig:
    return load_config(args.config, args.override)


def cmd_pair(args) -> int:
    cfg = _load(args)
    manifest = dataset_mod.discover_pairs(cfg.data.mode, cfg.data.roots, cfg.data.costmap_root)
    if cfg.data.val_ratio is not None and cfg.data.mode != "presplit":
        manifest = dataset_mod.split(manifest, cfg.data.val_ratio, cfg.data.seed)
    out = Path(cfg.output.directory) / "manifest.json"
    manifest.save(out)
    print(f"{len(manifest.records)} records -> {out}")
    return 0


def _resolve_cache_dir(cfg: PipelineConfig) -> str:
    if not cfg.data.cache_dir:
        raise PipelineError("data.cache_dir is not set (config key or MMVPIPE_CACHE_DIR)")
    return cfg.data.cache_dir


def cmd_cache(args) -> int:
    cfg = _load(args)
    manifest = dataset_mod.discover_pairs(cfg.data.mode, cfg.data.roots, cfg.data.costmap_root)
    cache_dir = _resolve_cache_dir(cfg)
    index, stats = cache_mod.build_cache(
        manifest, list(cfg.preprocess), cache_dir, workers=cfg.inference.workers
    )
    print(
        f"{stats.blobs_written} blobs written, {stats.blobs_skipped} up to date "
        f"({stats.records_rebuilt} rebuilt of {stats.records_total} records) -> {cache_dir}"
    )
    return 0


def _input_files(cfg: PipelineConfig) -> list[Path]:
    root = Path(cfg.data.roots[0])
    return sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _count_all_windows(img, cfg: PipelineConfig) -> int:
    """Total executor windows for one image: per-slice plan x outer positions."""
    spatial = "YX" if cfg.executor.spatial_rank == 2 else "ZYX"
    slice_shape = tuple(img.extent(a) for a in spatial)
    per_slice = count_windows(plan_windows(slice_shape, cfg.inference.window, cfg.inference.overlap))
    outer = 1
    for a in img.axes:
        if a not in spatial and a != "C":
            outer *= img.extent(a)
    return per_slice * outer


def cmd_run(args) -> int:
    cfg = _load(args)
    if not cfg.data.roots:
        raise PipelineError("run needs data.roots[0] as the input directory")
    chain = build_chain(list(cfg.preprocess))
    executor = make_executor(cfg.executor)
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = _input_files(cfg)
    if not files:
        raise PipelineError(f"no input images under {cfg.data.roots[0]}")

    summary = {"files": {}, "executor": {"kind": cfg.executor.kind, "calls": 0}}
    failures = 0
    try:
        for path in files:
            out_path = out_dir / (path.stem + ".ndt")
            if out_path.exists() and not cfg.output.overwrite:
                summary["files"][path.name] = {"status": "skipped", "output": str(out_path)}
                continue
            started = time.perf_counter()
            try:
                img = read_image(path)
                for _, fn in chain:
                    img = fn(img)
                windows = _count_all_windows(img, cfg)
                result = run_over_outer_axes(
                    img,
                    executor,
                    cfg.inference.window,
                    cfg.inference.overlap,
                    cfg.inference.sigma_scale,
                    cfg.inference.batch_size,
                    cfg.inference.workers,
                )
                write_ndt(result, out_path)
            except Exception as exc:
                failures += 1
                summary["files"][path.name] = {"status": "error", "error": str(exc)}
                continue
            summary["files"][path.name] = {
                "status": "ok",
                "output": str(out_path),
                "seconds": round(time.perf_counter() - started, 4),
                "windows": windows,
            }
            summary["executor"]["calls"] += windows
    finally:
        executor.close()

    dataset_mod.write_json(out_dir / "run_summary.json", summary)
    done = sum(1 for v in summary["files"].values() if v["status"] in ("ok", "skipped"))
    print(f"{done}/{len(files)} files done, {failures} failed -> {out_dir}")
    return 2 if failures else 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    manifest = dataset_mod.discover_pairs(cfg.data.mode, cfg.data.roots, cfg.data.costmap_root)
    reports = evaluate_set(
        manifest, list(cfg.eval.metrics), cfg.eval.threshold, cfg.eval.data_range
    )
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"reports": [r.to_dict() for r in reports]}
    dataset_mod.write_json(out_dir / "report.json", doc)
    outputs = render_report_outputs(reports, out_dir)
    for report in reports:
        print(report.line())
        for sample_id, message in report.errors:
            print(f"  warning: {sample_id}: {message}", file=sys.stderr)
    warnings = sum(len(r.errors) for r in reports)
    if warnings:
        print(f"{warnings} per-sample warnings (excluded from aggregates)", file=sys.stderr)
    print(f"report -> {out_dir / 'report.json'}, csv -> {outputs['csv']}")
    return 0


def cmd_inspect(args) -> int:
    for path in args.paths:
        suffix = Path(path).suffix.lower()
        if suffix == ".ndt":
            info = inspect_ndt(path)
            print(
                f"{path}: ndt v{info['version']} {info['dtype']} "
                f"{info['axes']} {'x'.join(str(s) for s in info['shape'])}"
            )
        elif suffix in (".tif", ".tiff"):
            info = inspect_tiff(path)
            print(
                f"{path}: tiff {info['width']}x{info['height']} "
                f"{info['bits']}-bit spp={info['samples_per_pixel']} {info['layout']}"
            )
        else:
            raise PipelineError(f"{path}: unknown image suffix {suffix!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Microscopy image pipeline: pairing, caching, tiled inference, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="YAML/JSON pipeline config")
        p.add_argument(
            "override",
            nargs="*",
            metavar="key=value",
            help="dotted config overrides, e.g. inference.overlap=0.5",
        )

    with_config(sub.add_parser("pair", help="discover source/target pairs into a manifest"))
    with_config(sub.add_parser("cache", help="preprocess and cache all manifest samples"))
    with_config(sub.add_parser("run", help="tiled inference over every input image"))
    with_config(sub.add_parser("eval", help="evaluate prediction/ground-truth pairs"))
    inspect = sub.add_parser("inspect", help="print NDT/TIFF header info")
    inspect.add_argument("paths", nargs="+", help="image files to inspect")
    return parser


_COMMANDS = {
    "pair": cmd_pair,
    "cache": cmd_cache,
    "run": cmd_run,
    "eval": cmd_eval,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PipelineError as exc:
        return _fail(str(exc))
    except FileNotFoundError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
