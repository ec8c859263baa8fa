"""Violin plot with box overlay and mean markers for value distributions."""

from typing import List, Optional, Sequence, Set, Tuple

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from core.base_plotter import BasePlotter, PlotConfig
from core.registry import plot_registry


def distribution_summary(data: pd.DataFrame, group_column: str = "group",
                         value_column: str = "value") -> pd.DataFrame:
    """Per-group count, mean, median and quartiles, in group order of appearance."""
    grouped = data.groupby(group_column, sort=False)[value_column]
    return pd.DataFrame({
        "n": grouped.size(),
        "mean": grouped.mean(),
        "median": grouped.median(),
        "q1": grouped.quantile(0.25),
        "q3": grouped.quantile(0.75),
    })


@plot_registry.register("violin", category="distribution")
class ViolinPlotter(BasePlotter):
    """One violin per group; groups with no values are left out and noted."""

    name = "Violin Plot"
    description = "Distribution per group with quartile box and mean marker"
    accepts_empty = True

    def __init__(self, data: pd.DataFrame, config: Optional[PlotConfig] = None):
        super().__init__(data, config)
        self.group_column = "group"
        self.value_column = "value"
        self.order: Optional[List[str]] = None
        self.omitted: List[str] = []

    def set_columns(self, value_column: str, group_column: str,
                    order: Optional[Sequence[str]] = None):
        self.value_column = value_column
        self.group_column = group_column
        self.order = list(order) if order is not None else None

    def required_columns(self) -> Set[str]:
        return {self.group_column, self.value_column}

    def validate_data(self) -> None:
        super().validate_data()
        if not self.data.empty and not pd.api.types.is_numeric_dtype(self.data[self.value_column]):
            raise ValueError(f"{self.name}: column {self.value_column!r} is not numeric")

    def create_plot(self) -> Tuple[plt.Figure, plt.Axes]:
        fig, ax = self.new_axes()
        values = self.data.dropna(subset=[self.value_column])
        order = self.order or list(dict.fromkeys(values[self.group_column]))
        groups, labels, slots = [], [], []
        self.omitted = []
        for slot, g in enumerate(order):
            v = values.loc[values[self.group_column] == g, self.value_column].to_numpy()
            if v.size:
                groups.append(v)
                labels.append(str(g))
                slots.append(slot)
            else:
                self.omitted.append(str(g))
        if self.omitted:
            self.config.notes = list(self.config.notes) + [
                f"{g}: no values (omitted)" for g in self.omitted]

        colors = self.colors()
        positions = np.arange(1, len(groups) + 1)
        if groups:
            # a violin needs spread; constant groups get the box only
            spread = [i for i, v in enumerate(groups) if np.ptp(v) > 0]
            if spread:
                parts = ax.violinplot([groups[i] for i in spread], positions=positions[spread],
                                      showextrema=False, widths=0.8)
                for i, body in zip(spread, parts['bodies']):
                    body.set_facecolor(colors[slots[i] % len(colors)])
                    body.set_alpha(self.config.alpha * 0.6)
            ax.boxplot(groups, positions=positions, widths=0.15, tick_labels=labels,
                       showfliers=False, patch_artist=True,
                       boxprops=dict(facecolor='white', linewidth=0.8),
                       medianprops=dict(color='black', linewidth=1.2))
            means = [v.mean() for v in groups]
            ax.scatter(positions, means, marker='D', color='black', zorder=3,
                       s=self.config.marker_size ** 2, label='mean')
        ax.set_xticks(positions, labels)
        return fig, ax

    def summary(self) -> pd.DataFrame:
        return distribution_summary(self.data.dropna(subset=[self.value_column]),
                                    self.group_column, self.value_column)
