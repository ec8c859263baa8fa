"""Import the plotter modules so their classes land in the plot registry."""

from plotters.categorical.metric_bar import MetricBarPlotter  # noqa: F401
from plotters.image.heatmap import PixelHeatmapPlotter  # noqa: F401
from plotters.image.overlay import MaskOverlayPlotter  # noqa: F401
from plotters.statistical.violin import ViolinPlotter  # noqa: F401
from plotters.temporal.loss_curve import LossCurvePlotter  # noqa: F401
