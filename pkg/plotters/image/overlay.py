"""Grayscale image with binary masks drawn as contours on top."""

from typing import List, Optional, Sequence, Set, Tuple

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from core.base_plotter import BasePlotter, PlotConfig
from core.registry import plot_registry


@plot_registry.register("overlay", category="image")
class MaskOverlayPlotter(BasePlotter):
    """Masks sharing a label share a colour and one legend entry."""

    name = "Mask Overlay"
    description = "Image in grayscale with one contour per mask"

    def __init__(self, data: pd.DataFrame, config: Optional[PlotConfig] = None):
        super().__init__(data, config)
        self.masks: List[np.ndarray] = []
        self.labels: List[str] = []

    def set_masks(self, masks: Sequence[np.ndarray], labels: Sequence[str]):
        if len(masks) != len(labels):
            raise ValueError(f"{len(masks)} masks but {len(labels)} labels")
        self.masks = [np.asarray(m, dtype=bool) for m in masks]
        self.labels = [str(l) for l in labels]

    def required_columns(self) -> Set[str]:
        return set()

    def validate_data(self) -> None:
        super().validate_data()
        for m in self.masks:
            if m.shape != self.data.shape:
                raise ValueError(f"{self.name}: mask of shape {m.shape} on a "
                                 f"{self.data.shape} image")

    def create_plot(self) -> Tuple[plt.Figure, plt.Axes]:
        fig, ax = self.new_axes()
        ax.imshow(self.data.to_numpy(), cmap="gray", interpolation="nearest")
        colors = self.colors()
        order = list(dict.fromkeys(self.labels))
        for k, label in enumerate(order):
            color = colors[k % len(colors)]
            empty = True
            for m, l in zip(self.masks, self.labels):
                # contour needs both levels present
                if l == label and m.any() and not m.all():
                    ax.contour(m.astype(np.float64), levels=[0.5], colors=[color],
                               linewidths=self.config.line_width)
                    empty = False
            ax.plot([], [], color=color, linewidth=self.config.line_width,
                    label=f"{label} (empty)" if empty else label)
        ax.set_xticks([])
        ax.set_yticks([])
        return fig, ax
