"""Base class for the evaluation plotters.

A plotter reads one long-format DataFrame (a values file or a metrics
table) and draws it onto a single axes. Subclasses name the columns they
read and implement `create_plot`; `plot` validates, draws and styles.
"""

import contextlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple

import matplotlib.pyplot as plt
import pandas as pd

from config.palettes import default_palette


@dataclass
class PlotConfig:
    """Labels and sizes of one figure; single-column journal width by default."""

    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    figsize: Tuple[float, float] = (3.5, 2.625)
    dpi: int = 200
    style: str = "default"
    color_palette: List[str] = field(default_factory=list)
    grid: bool = True
    legend_loc: str = "best"
    font_size: int = 9
    line_width: float = 1.5
    marker_size: float = 5
    alpha: float = 0.8
    # extra legend lines, e.g. groups left out for having no values
    notes: List[str] = field(default_factory=list)


class BasePlotter(ABC):
    name: str = "Base Plotter"
    description: str = ""
    registry_id: str = "base"
    # an empty frame is a valid input (drawn as empty axes)
    accepts_empty: bool = False

    def __init__(self, data: pd.DataFrame, config: Optional[PlotConfig] = None):
        self.data = data
        self.config = config or PlotConfig()
        self.figure: Optional[plt.Figure] = None
        self.axes: Optional[plt.Axes] = None

    @abstractmethod
    def required_columns(self) -> Set[str]:
        """Columns create_plot reads."""

    @abstractmethod
    def create_plot(self) -> Tuple[plt.Figure, plt.Axes]:
        pass

    def validate_data(self) -> None:
        if self.data is None:
            raise ValueError(f"{self.name}: no data")
        missing = self.required_columns() - set(self.data.columns)
        if missing:
            raise ValueError(f"{self.name}: missing column(s) {sorted(missing)}; "
                             f"have {list(self.data.columns)}")
        if self.data.empty and not self.accepts_empty:
            raise ValueError(f"{self.name}: no rows to plot")

    def new_axes(self) -> Tuple[plt.Figure, plt.Axes]:
        self.figure, self.axes = plt.subplots(figsize=self.config.figsize, dpi=self.config.dpi)
        return self.figure, self.axes

    def colors(self) -> List[str]:
        return self.config.color_palette or default_palette(self.registry_id)

    def apply_styling(self) -> None:
        cfg, ax = self.config, self.axes
        if cfg.title:
            ax.set_title(cfg.title, fontsize=cfg.font_size + 1)
        if cfg.xlabel:
            ax.set_xlabel(cfg.xlabel, fontsize=cfg.font_size)
        if cfg.ylabel:
            ax.set_ylabel(cfg.ylabel, fontsize=cfg.font_size)
        if cfg.grid:
            ax.grid(True, axis='y', alpha=0.3, linestyle='--', linewidth=0.5)

        handles, labels = ax.get_legend_handles_labels()
        for note in cfg.notes:
            handles.append(plt.Line2D([], [], linestyle='none'))
            labels.append(note)
        if handles:
            ax.legend(handles, labels, loc=cfg.legend_loc, fontsize=cfg.font_size - 1)
        self.figure.tight_layout()

    def plot(self) -> Tuple[plt.Figure, plt.Axes]:
        self.validate_data()
        # rcParams are global; keep a style sheet local to this figure
        style = self.config.style
        ctx = (plt.style.context(style) if style and style != 'default'
               else contextlib.nullcontext())
        with ctx:
            self.create_plot()
            self.apply_styling()
        return self.figure, self.axes

    def __repr__(self) -> str:
        rows = 0 if self.data is None else len(self.data)
        return f"{self.__class__.__name__}(id='{self.registry_id}', rows={rows})"
