"""DuckDB view over one or many runs' metrics.csv files, queried in place.

Every metrics file has the long layout
run_id, model, tag, style, metric, value, std, n; any number of them are
scanned as a single table.
"""

import re
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import duckdb
import pandas as pd

COLUMNS = ("run_id", "model", "tag", "style", "metric", "value", "std", "n")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class MetricStore:
    """Metric rows of several runs, read from their CSV files by DuckDB."""

    def __init__(self, paths: Union[str, Path, Sequence[Union[str, Path]]]):
        paths = [Path(p) for p in ([paths] if isinstance(paths, (str, Path)) else paths)]
        if not paths:
            raise ValueError("no metrics files given")
        missing = [str(p) for p in paths if not p.is_file()]
        if missing:
            raise FileNotFoundError(f"metrics file(s) not found: {', '.join(missing)}")
        self.paths = paths
        self._con = duckdb.connect()
        listed = ", ".join("'" + str(p).replace("'", "''") + "'" for p in paths)
        # style is text: numeric ids, "pooled" and "all" share one column
        self._rel = (f"read_csv([{listed}], header=true, union_by_name=true, filename=true, "
                     f"types={{'style': 'VARCHAR', 'run_id': 'VARCHAR', 'tag': 'VARCHAR'}})")
        try:
            cols = [r[0] for r in self._con.execute(
                f"DESCRIBE SELECT * FROM {self._rel}").fetchall()]
        except duckdb.Error as e:
            raise ValueError(f"cannot read metrics files: {e}") from e
        absent = [c for c in COLUMNS if c not in cols]
        if absent:
            raise ValueError(f"metrics files lack columns {absent}")

    @property
    def n_rows(self) -> int:
        return self._con.execute(f"SELECT count(*) FROM {self._rel}").fetchone()[0]

    def run_ids(self) -> list:
        rows = self._con.execute(
            f"SELECT DISTINCT run_id FROM {self._rel} ORDER BY run_id").fetchall()
        return [r[0] for r in rows]

    def frame(self, metrics: Optional[Iterable[str]] = None) -> pd.DataFrame:
        """All rows, optionally restricted to some metric names."""
        sql = f"SELECT {', '.join(COLUMNS)}, filename FROM {self._rel}"
        params = []
        if metrics is not None:
            metrics = list(metrics)
            sql += f" WHERE metric IN ({', '.join('?' for _ in metrics)})"
            params = metrics
        sql += " ORDER BY metric, style, run_id"
        return self._con.execute(sql, params).df()

    def wide(self, column: str = "tag") -> pd.DataFrame:
        """(metric, style) rows with one value column per run label."""
        if not _IDENT.match(column) or column not in (*COLUMNS, "filename"):
            raise ValueError(f"cannot pivot on {column!r}")
        rows = self._con.execute(
            f"SELECT metric, style, {column} AS label, avg(value) AS value "
            f"FROM {self._rel} GROUP BY metric, style, label").df()
        return rows.pivot(index=["metric", "style"], columns="label", values="value").sort_index()
