"""Training and validation loss per epoch."""

from typing import List, Optional, Set, Tuple

import matplotlib.pyplot as plt
import pandas as pd

from core.base_plotter import BasePlotter, PlotConfig
from core.registry import plot_registry


@plot_registry.register("loss", category="curve")
class LossCurvePlotter(BasePlotter):
    name = "Loss Curve"
    description = "Loss per epoch, one line per series"

    def __init__(self, data: pd.DataFrame, config: Optional[PlotConfig] = None):
        super().__init__(data, config)
        self.x_column = "epoch"
        self.y_columns: List[str] = ["train_loss", "val_loss"]
        self.markers = ['o', 's', '^', 'v']

    def set_columns(self, x_column: str, y_columns: List[str]):
        self.x_column = x_column
        self.y_columns = y_columns if isinstance(y_columns, list) else [y_columns]

    def required_columns(self) -> Set[str]:
        return {self.x_column, *self.y_columns}

    def create_plot(self) -> Tuple[plt.Figure, plt.Axes]:
        fig, ax = self.new_axes()
        colors = self.colors()
        # markers only when there are few enough epochs to see them
        use_markers = len(self.data) <= 30
        for i, y_col in enumerate(self.y_columns):
            ax.plot(self.data[self.x_column], self.data[y_col],
                    label=y_col.replace('_', ' '),
                    color=colors[i % len(colors)],
                    marker=self.markers[i % len(self.markers)] if use_markers else '',
                    linewidth=self.config.line_width,
                    markersize=self.config.marker_size,
                    alpha=self.config.alpha)
        return fig, ax
