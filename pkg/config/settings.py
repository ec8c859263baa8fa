"""Global settings and constants for the label-style segmentation toolkit."""

import logging
import os
from pathlib import Path

APP_NAME = "Label Style Segmentation"
APP_VERSION = "1.0.0"
APP_DESCRIPTION = ("Style-conditioned aleatoric uncertainty models for "
                   "segmentation, with their evaluation suite")

BASE_DIR = Path(__file__).parent.parent


# read at call time, not import, so tests and shells can change them
def data_root() -> Path:
    return Path(os.environ.get("STYLESEG_DATA_ROOT", BASE_DIR / "data"))


def runs_dir() -> Path:
    return Path(os.environ.get("STYLESEG_RUNS_DIR", BASE_DIR / "runs"))


EXPORT_FORMATS = {
    'PNG': {'extension': '.png', 'dpi': 200},
    'PDF': {'extension': '.pdf', 'dpi': 300},
    'SVG': {'extension': '.svg', 'dpi': None},
}

# Numerics shared by the models and the metrics
LOGIT_CLIP = 15.0
DIAG_FLOOR = 1e-5
TIE_THRESHOLD = 0.5      # p == 0.5 counts as background
EVAL_SAMPLES = 100
SAMPLE_CHUNK = 25        # predictions decoded per forward pass when sampling
EXAMPLE_IMAGES = 3       # test images kept for the qualitative figures

# Dataset geometry
SPLIT_RATIOS = (0.6, 0.2, 0.2)
CROP_MARGIN = 20
CELL_SIZE = 128
LESION_SIZE = 256

# Training presets. Full-scale values for the two real datasets, a
# desk-scale default for synthetic data.
PRESETS = {
    'isic': {
        'data': {'image_size': LESION_SIZE},
        'model': {'base_channels': 32},
        'training': {'epochs': 600, 'batch_size': 16, 'learning_rate': 1e-4},
    },
    'phc': {
        'data': {'image_size': CELL_SIZE},
        'model': {'base_channels': 32},
        'training': {'epochs': 200, 'batch_size': 32, 'learning_rate': 1e-4},
    },
    'synthetic': {
        'data': {'image_size': 64},
        'model': {'base_channels': 16},
        'training': {'epochs': 30, 'batch_size': 16, 'learning_rate': 1e-4},
    },
}

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(level: str = "INFO") -> None:
    """Install the single root handler used by the CLI."""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format=LOG_FORMAT, datefmt="%H:%M:%S")
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("PIL").setLevel(logging.WARNING)
