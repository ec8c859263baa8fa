#!/usr/bin/env python3
"""Command-line entry point: curate, synth, train, eval, compare, plot.

Examples:
    python cli.py synth --out data/synthetic --n 500 --offsets 0 6
    python cli.py train --preset synthetic --set data.root=data/synthetic \\
        --set model.conditioning=all
    python cli.py eval runs/cprob_unet-all-s0-1a2b3c4d
    python cli.py compare runs/a runs/b --out runs/compare.csv
    python cli.py plot runs/a runs/b
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from config import settings

logger = logging.getLogger("cli")


def _parse_assignment(items: List[str]) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"expected name=style, got {item!r}")
        name, style = item.split("=", 1)
        out[name] = int(style)
    return out


def cmd_curate(args) -> int:
    from core.types import split_dataset
    from curation.cells import curate_cell_crops
    from curation.styles import assemble_style_dataset
    from utils.dataset_io import load_raw_isic, load_raw_phc, save_dataset

    assignment = _parse_assignment(args.styles)
    if args.source == "phc":
        frames, masks, extra = load_raw_phc(args.raw)
        num_styles = args.num_styles or (max(assignment.values(), default=0) + 1)
        samples = curate_cell_crops(frames, masks, margin=args.margin,
                                    target=args.size or settings.CELL_SIZE,
                                    extra_annotations=extra, style_assignment=assignment,
                                    num_styles=num_styles)
    else:
        raw = load_raw_isic(args.raw)
        samples = assemble_style_dataset(raw, assignment, num_styles=args.num_styles,
                                         target_size=args.size or settings.LESION_SIZE)
        num_styles = args.num_styles or (max(assignment.values()) + 1)
    split = split_dataset(samples, settings.SPLIT_RATIOS, args.split_seed)
    save_dataset(args.out, samples, num_styles, split)
    logger.info("curated %d samples, split %s", len(samples), split.sizes())
    return 0


def cmd_synth(args) -> int:
    from core.types import split_dataset
    from curation.synthetic import SyntheticStyleSpec, generate_synthetic
    from utils.dataset_io import save_dataset

    stds = args.offset_std or [0.5] * len(args.offsets)
    if len(stds) != len(args.offsets):
        raise ValueError("give one --offset-std per style or none")
    specs = [SyntheticStyleSpec(i, mean, std, args.smoothing)
             for i, (mean, std) in enumerate(zip(args.offsets, stds))]
    samples = generate_synthetic(args.n, args.size, specs, args.annotators, args.seed)
    split = split_dataset(samples, settings.SPLIT_RATIOS, args.split_seed)
    save_dataset(args.out, samples, len(specs), split)
    return 0


def cmd_train(args) -> int:
    from harness.experiment import resolve_config
    from harness.training import train

    config = resolve_config(args.preset, args.config, args.set or [])
    run_id = args.run_id or config.default_run_id()
    run_dir = Path(args.runs_dir or settings.runs_dir()) / run_id
    record = train(config, run_dir)
    print(run_dir)
    if args.evaluate:
        from harness.evaluation import evaluate
        evaluate(run_dir)
    logger.info("run %s done, best epoch %s", record.run_id, record.best_epoch)
    return 0


def cmd_eval(args) -> int:
    from harness.evaluation import evaluate

    result = evaluate(args.run_dir, n_samples=args.samples)
    print(result.frame().to_string(index=False))
    return 0


def cmd_compare(args) -> int:
    from harness.compare import compare_runs

    report = compare_runs(args.run_dirs, args.out)
    print(report["table"].to_string())
    print("wins:", ", ".join(f"{k}: {v}" for k, v in report["wins"].items()))
    return 0


def cmd_plot(args) -> int:
    from harness.plots import emit_comparison_plots, emit_plots

    written = []
    for run_dir in args.run_dirs:
        written += emit_plots(run_dir, args.format)
    if len(args.run_dirs) > 1:
        out = Path(args.out or Path(args.run_dirs[0]).parent / "plots")
        written += emit_comparison_plots(args.run_dirs, out, args.format)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="styleseg", description=settings.APP_DESCRIPTION)
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--version", action="version",
                        version=f"{settings.APP_NAME} {settings.APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curate", help="build a style dataset from raw annotations")
    p.add_argument("--source", choices=["phc", "isic"], required=True)
    p.add_argument("--raw", required=True, help="raw dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--styles", nargs="*", default=[], metavar="ANNOTATOR=STYLE")
    p.add_argument("--num-styles", type=int)
    p.add_argument("--margin", type=int, default=settings.CROP_MARGIN)
    p.add_argument("--size", type=int, help="output side length")
    p.add_argument("--split-seed", type=int, default=0)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("synth", help="generate a synthetic multi-style dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--offsets", type=float, nargs="+", default=[0.0, 6.0],
                   help="mean boundary offset per style in px; style 0 must be 0")
    p.add_argument("--offset-std", type=float, nargs="+")
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--annotators", type=int, default=3, help="annotators per style")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--preset", default="synthetic", choices=sorted(settings.PRESETS))
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    p.add_argument("--run-id")
    p.add_argument("--runs-dir")
    p.add_argument("--evaluate", action="store_true", help="evaluate after training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained run")
    p.add_argument("run_dir")
    p.add_argument("--samples", type=int, help="predictions per image")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="compare evaluated runs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="write plots for evaluated runs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", help="directory for cross-run plots")
    p.add_argument("--format", nargs="+", default=["PNG"],
                   choices=sorted(settings.EXPORT_FORMATS))
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings.configure_logging(args.log_level)
    from harness.training import TrainingDivergedError

    try:
        return args.func(args)
    except TrainingDivergedError as e:
        logger.error("%s", e)
        return 1
    except (ValueError, FileNotFoundError) as e:
        logger.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
