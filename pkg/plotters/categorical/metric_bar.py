"""Grouped bars of one metric per style, one bar per model."""

from typing import Optional, Set, Tuple

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from core.base_plotter import BasePlotter, PlotConfig
from core.registry import plot_registry


@plot_registry.register("bar", category="table")
class MetricBarPlotter(BasePlotter):
    """Expects columns style, series, value and optionally std (error bars)."""

    name = "Metric Bar Chart"
    description = "Compare a metric across label styles and models"

    def __init__(self, data: pd.DataFrame, config: Optional[PlotConfig] = None):
        super().__init__(data, config)
        self.x_column = "style"
        self.series_column = "series"
        self.bar_width = 0.8

    def required_columns(self) -> Set[str]:
        return {self.x_column, self.series_column, "value"}

    def create_plot(self) -> Tuple[plt.Figure, plt.Axes]:
        fig, ax = self.new_axes()
        table = self.data.pivot_table(index=self.x_column, columns=self.series_column,
                                      values="value", aggfunc="first", sort=False)
        errors = None
        if "std" in self.data.columns:
            errors = self.data.pivot_table(index=self.x_column, columns=self.series_column,
                                           values="std", aggfunc="first", sort=False)
        colors = self.colors()
        x = np.arange(len(table.index))
        width = self.bar_width / max(len(table.columns), 1)
        for i, series in enumerate(table.columns):
            offset = width * (i - len(table.columns) / 2 + 0.5)
            yerr = None
            if errors is not None and series in errors.columns:
                yerr = errors[series].reindex(table.index).fillna(0).to_numpy()
            ax.bar(x + offset, table[series].to_numpy(), width, yerr=yerr, capsize=2,
                   label=str(series), color=colors[i % len(colors)])
        ax.set_xticks(x, [str(s) for s in table.index])
        return fig, ax
