"""Per-pixel heatmap of a probability field, e.g. the mean annotation."""

from typing import Optional, Set, Tuple

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from matplotlib.colors import LinearSegmentedColormap

from core.base_plotter import BasePlotter, PlotConfig
from core.registry import plot_registry


def grid_frame(values: np.ndarray) -> pd.DataFrame:
    """An (H, W) array as the row-by-column frame the image plotters draw."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError(f"expected an (H, W) array, got shape {values.shape}")
    return pd.DataFrame(values.astype(np.float64))


@plot_registry.register("heatmap", category="image")
class PixelHeatmapPlotter(BasePlotter):
    """The frame is the pixel grid itself: one row per image row."""

    name = "Pixel Heatmap"
    description = "Pixel values in [vmin, vmax] on a sequential colour ramp"

    def __init__(self, data: pd.DataFrame, config: Optional[PlotConfig] = None):
        super().__init__(data, config)
        self.vmin = 0.0
        self.vmax = 1.0
        self.colorbar_label = "p"

    def set_range(self, vmin: float, vmax: float, label: str = "p"):
        if not vmin < vmax:
            raise ValueError(f"empty colour range [{vmin}, {vmax}]")
        self.vmin, self.vmax = vmin, vmax
        self.colorbar_label = label

    def required_columns(self) -> Set[str]:
        return set()

    def validate_data(self) -> None:
        super().validate_data()
        numeric = self.data.apply(pd.api.types.is_numeric_dtype)
        if not numeric.all():
            raise ValueError(f"{self.name}: non-numeric columns "
                             f"{list(numeric.index[~numeric])}")

    def create_plot(self) -> Tuple[plt.Figure, plt.Axes]:
        fig, ax = self.new_axes()
        cmap = LinearSegmentedColormap.from_list(self.registry_id, self.colors())
        im = ax.imshow(self.data.to_numpy(), cmap=cmap, vmin=self.vmin, vmax=self.vmax,
                       interpolation="nearest")
        cbar = fig.colorbar(im, ax=ax)
        cbar.ax.set_ylabel(self.colorbar_label, fontsize=self.config.font_size)
        ax.set_xticks([])
        ax.set_yticks([])
        return fig, ax
