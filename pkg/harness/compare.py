"""Side-by-side metric tables of several runs over one shared test split."""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from core.metric_store import MetricStore
from harness.evaluation import METRICS_CSV
from harness.experiment import RunRecord

logger = logging.getLogger(__name__)

COMPARE_CSV = "compare.csv"

# how a better value looks for each metric; others are reported without a winner
DIRECTIONS = {"iou": "max", "auroc": "max", "ged": "min", "area_bias": "abs_min"}


def _winners(row: pd.Series, direction: str) -> List[str]:
    values = row.dropna()
    if values.empty:
        return []
    score = values.abs() if direction == "abs_min" else values
    best = score.max() if direction == "max" else score.min()
    return [label for label, v in score.items() if np.isclose(v, best, rtol=0, atol=1e-12)]


def compare_runs(run_dirs: Sequence[Union[str, Path]],
                 out_path: Union[str, Path, None] = None) -> Dict:
    """Wide table, deltas against the first run and per-metric win flags.

    All runs must have been evaluated on the same test split.

    Args:
        run_dirs: Evaluated run directories; the first is the reference for deltas
        out_path: Where to write the table; compare.csv in the first run's parent directory by default

    Returns:
        Dict with run ids, column labels, the wide table, deltas, win counts and the csv path

    Raises:
        ValueError: If fewer than two runs are given or their test splits differ
        FileNotFoundError: If a run has no metrics.csv yet
    """
    run_dirs = [Path(d) for d in run_dirs]
    if len(run_dirs) < 2:
        raise ValueError("compare_runs needs at least two runs")
    records = [RunRecord.load(d) for d in run_dirs]
    digests = {r.split_digests.get("test") for r in records}
    if len(digests) != 1:
        raise ValueError("runs were evaluated on different test splits: "
                         + ", ".join(f"{r.run_id}={r.split_digests.get('test')}" for r in records))

    csvs = [d / METRICS_CSV for d in run_dirs]
    missing = [str(c) for c in csvs if not c.exists()]
    if missing:
        raise FileNotFoundError(f"run(s) not evaluated yet: {', '.join(missing)}")
    labels = {}
    for d, r, c in zip(run_dirs, records, csvs):
        label = r.tag
        if label in labels.values():
            label = f"{r.tag} [{d.name}]"
        labels[str(c.resolve())] = label

    store = MetricStore([c.resolve() for c in csvs])
    stray = set(store.run_ids()) - {r.run_id for r in records}
    if stray:
        raise ValueError(f"metrics files hold rows of other runs: {sorted(stray)}")
    order = [labels[str(c.resolve())] for c in csvs]
    table = (store.wide("filename")
             .rename(columns=lambda f: labels[str(Path(f).resolve())])
             .reindex(columns=order))

    deltas = table.sub(table[order[0]], axis=0)
    wins = {label: 0 for label in order}
    win_col = []
    for (metric, _), row in table.iterrows():
        direction = DIRECTIONS.get(metric)
        best = _winners(row, direction) if direction else []
        for label in best:
            wins[label] += 1
        win_col.append(", ".join(best))

    out = table.copy()
    for label in order[1:]:
        out[f"delta {label}"] = deltas[label]
    out["best"] = win_col
    out_path = Path(out_path) if out_path else run_dirs[0].parent / COMPARE_CSV
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(out_path)
    logger.info("compared %d runs (%d metric rows) -> %s", len(records), store.n_rows, out_path)
    return {"runs": [r.run_id for r in records], "labels": order, "table": table,
            "deltas": deltas, "wins": wins, "path": str(out_path)}
