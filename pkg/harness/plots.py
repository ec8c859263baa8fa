"""Figures for evaluated runs, drawn from the values files on disk."""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

import plotters  # noqa: E402,F401  registers the plot classes
from config.palettes import STRATUM_COLORS  # noqa: E402
from core.base_plotter import PlotConfig  # noqa: E402
from core.exporters import PlotExporter  # noqa: E402
from core.registry import plot_registry  # noqa: E402
from harness.evaluation import (AREA_BIAS_VALUES, EXAMPLES_VALUES, METRICS_CSV,  # noqa: E402
                                 STRATA_VALUES, read_examples)
from harness.experiment import RunRecord  # noqa: E402
from metrics.uncertainty import STRATA  # noqa: E402
from plotters.image.heatmap import grid_frame  # noqa: E402
from plotters.statistical.violin import distribution_summary  # noqa: E402

logger = logging.getLogger(__name__)

PLOTS_DIR = "plots"
BAR_METRICS = ("iou", "auroc", "ged")


def plot_statistics(values_path: Union[str, Path], group_column: str,
                    value_column: str) -> pd.DataFrame:
    """The per-group summary a distribution plot of this values file shows."""
    path = Path(values_path)
    if not path.exists():
        raise FileNotFoundError(f"values file not found: {path}")
    frame = pd.read_parquet(path) if path.suffix == ".parquet" else pd.read_csv(path)
    return distribution_summary(frame.dropna(subset=[value_column]), group_column, value_column)


def _violin(frame: pd.DataFrame, group: str, value: str, config: PlotConfig,
            order=None):
    plotter = plot_registry.create("distribution.violin", frame, config)
    plotter.set_columns(value, group, order)
    fig, _ = plotter.plot()
    return fig, plotter


def _overlay(image: np.ndarray, masks, labels, title: str):
    """Contours over a (C, H, W) image shown as its channel mean."""
    plotter = plot_registry.create("image.overlay", grid_frame(np.asarray(image).mean(0)),
                                   PlotConfig(title=title, grid=False, line_width=1.0))
    plotter.set_masks(masks, labels)
    fig, _ = plotter.plot()
    return fig


def _example_figures(examples: Dict[str, np.ndarray], tag: str):
    """(name, figure) pairs: annotations, mean annotation and mean predictions per image."""
    for i, sample_id in enumerate(examples["sample_ids"]):
        keep = examples["annotation_styles"][i] >= 0
        masks = examples["annotations"][i][keep]
        styles = examples["annotation_styles"][i][keep]
        yield f"example_{i}_annotations", _overlay(
            examples["images"][i], masks, [f"style {s}" for s in styles],
            f"{sample_id}: annotations")

        heatmap = plot_registry.create("image.heatmap", grid_frame(masks.mean(0)), PlotConfig(
            title=f"{sample_id}: mean annotation", grid=False))
        heatmap.set_range(0.0, 1.0, "fraction of annotators")
        yield f"example_{i}_mean_annotation", heatmap.plot()[0]

        yield f"example_{i}_predictions", _overlay(
            examples["images"][i], examples["predictions"][i], examples["prediction_labels"],
            f"{sample_id}: mean prediction, {tag}")


def emit_plots(run_dir: Union[str, Path], formats: Sequence[str] = ("PNG",)) -> List[Path]:
    """Area-bias and entropy-strata distributions, loss curve, per-style bars
    and, for the first test images, annotation and mean-prediction figures.

    Each figure's data is written next to it as a CSV.
    """
    run_dir = Path(run_dir)
    record = RunRecord.load(run_dir)
    out_dir = run_dir / PLOTS_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    def save(fig, name):
        for i, fmt in enumerate(formats):
            written.append(PlotExporter.export(fig, name, out_dir, fmt,
                                               close=i == len(formats) - 1))

    bias_path = run_dir / AREA_BIAS_VALUES
    if bias_path.exists():
        bias = pd.read_parquet(bias_path)
        fig, _ = _violin(bias, "tag", "difference", PlotConfig(
            title="Area difference to style-0 ground truth",
            ylabel="area difference (px)"))
        save(fig, "area_bias")

    strata_path = run_dir / STRATA_VALUES
    if strata_path.exists():
        strata = pd.read_parquet(strata_path)
        fig, plotter = _violin(strata, "stratum", "entropy", PlotConfig(
            title=f"Pixel entropy by error stratum, {record.tag}",
            ylabel="entropy (nats)", color_palette=[STRATUM_COLORS[s] for s in STRATA]),
            order=list(STRATA))
        if plotter.omitted:
            logger.info("empty strata left out of the plot: %s", ", ".join(plotter.omitted))
        save(fig, "entropy_strata")

    if record.history:
        curve = pd.DataFrame(record.history)
        curve.to_csv(out_dir / "loss_curve.csv", index=False)
        plotter = plot_registry.create("curve.loss", curve, PlotConfig(
            title=f"Loss, {record.tag}", xlabel="epoch", ylabel="loss"))
        fig, _ = plotter.plot()
        save(fig, "loss_curve")

    metrics_path = run_dir / METRICS_CSV
    if metrics_path.exists():
        metrics = pd.read_csv(metrics_path, dtype={"style": str})
        for metric in BAR_METRICS:
            rows = metrics[(metrics["metric"] == metric) & metrics["value"].notna()]
            if rows.empty:
                continue
            data = rows.rename(columns={"tag": "series"})[["style", "series", "value", "std"]]
            data.to_csv(out_dir / f"{metric}_by_style.csv", index=False)
            plotter = plot_registry.create("table.bar", data, PlotConfig(
                title=f"{metric.upper()} per label style", xlabel="style",
                ylabel=metric.upper()))
            fig, _ = plotter.plot()
            save(fig, f"{metric}_by_style")

    examples_path = run_dir / EXAMPLES_VALUES
    if examples_path.exists():
        for name, fig in _example_figures(read_examples(examples_path), record.tag):
            save(fig, name)

    logger.info("wrote %d plot files to %s", len(written), out_dir)
    return written


def emit_comparison_plots(run_dirs: Sequence[Union[str, Path]], out_dir: Union[str, Path],
                          formats: Sequence[str] = ("PNG",)) -> List[Path]:
    """Figures that set several runs of one dataset side by side.

    One pooled area-bias distribution, per-metric bars and, when the runs
    share their example images, each run's mean prediction on them.
    """
    run_dirs = [Path(d) for d in run_dirs]
    out_dir = Path(out_dir)
    written: List[Path] = []
    bias = [pd.read_parquet(d / AREA_BIAS_VALUES) for d in run_dirs
            if (d / AREA_BIAS_VALUES).exists()]
    if bias:
        frame = pd.concat(bias, ignore_index=True)
        out_dir.mkdir(parents=True, exist_ok=True)
        frame.to_parquet(out_dir / "area_bias_values.parquet", index=False)
        fig, _ = _violin(frame, "tag", "difference", PlotConfig(
            title="Area difference to style-0 ground truth", ylabel="area difference (px)",
            figsize=(max(3.5, 1.2 * frame["tag"].nunique()), 2.625)))
        for i, fmt in enumerate(formats):
            written.append(PlotExporter.export(fig, "area_bias_comparison", out_dir, fmt,
                                               close=i == len(formats) - 1))

    metrics = [pd.read_csv(d / METRICS_CSV, dtype={"style": str}) for d in run_dirs
               if (d / METRICS_CSV).exists()]
    if metrics:
        frame = pd.concat(metrics, ignore_index=True)
        for metric in BAR_METRICS:
            rows = frame[(frame["metric"] == metric) & frame["value"].notna()]
            if rows.empty:
                continue
            data = rows.rename(columns={"tag": "series"})[["style", "series", "value", "std"]]
            plotter = plot_registry.create("table.bar", data, PlotConfig(
                title=f"{metric.upper()} per label style", xlabel="style",
                ylabel=metric.upper(), figsize=(5.0, 3.0)))
            fig, _ = plotter.plot()
            for i, fmt in enumerate(formats):
                written.append(PlotExporter.export(fig, f"{metric}_comparison", out_dir, fmt,
                                                   close=i == len(formats) - 1))

    examples, labels = [], []
    for d in run_dirs:
        if (d / EXAMPLES_VALUES).exists():
            tag = RunRecord.load(d).tag
            labels.append(f"{tag} [{d.name}]" if tag in labels else tag)
            examples.append(read_examples(d / EXAMPLES_VALUES))
    if len(examples) > 1 and all(np.array_equal(e["sample_ids"], examples[0]["sample_ids"])
                                 for e in examples):
        out_dir.mkdir(parents=True, exist_ok=True)
        for k, sample_id in enumerate(examples[0]["sample_ids"]):
            # style 0, or the only prediction of an unconditioned model
            masks = [e["predictions"][k][0] for e in examples]
            fig = _overlay(examples[0]["images"][k], masks, labels,
                           f"{sample_id}: mean prediction per model")
            for i, fmt in enumerate(formats):
                written.append(PlotExporter.export(fig, f"example_{k}_models", out_dir, fmt,
                                                   close=i == len(formats) - 1))
    elif examples:
        logger.info("runs hold different example images; per-model figures skipped")
    return written

