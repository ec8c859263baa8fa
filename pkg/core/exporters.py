"""Writing figures to a run's plots directory."""

import logging
import re
from pathlib import Path
from typing import Union

import matplotlib.pyplot as plt

from config import settings

logger = logging.getLogger(__name__)


def safe_filename(name: str) -> str:
    """Strip directories and anything that could escape the output directory."""
    return re.sub(r'[^\w.\- ]', '_', Path(name).name).strip('. ') or 'plot'


class PlotExporter:
    """Save figures in the formats listed in settings.EXPORT_FORMATS."""

    @staticmethod
    def export(figure: plt.Figure,
               filename: str,
               out_dir: Union[str, Path],
               format: str = 'PNG',
               transparent: bool = False,
               close: bool = True) -> Path:
        fmt = format.upper()
        if fmt not in settings.EXPORT_FORMATS:
            raise ValueError(f"unsupported export format {format!r}; "
                             f"choose from {sorted(settings.EXPORT_FORMATS)}")
        spec = settings.EXPORT_FORMATS[fmt]
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        file_path = out_dir / f"{safe_filename(filename)}{spec['extension']}"

        kwargs = {'dpi': spec['dpi']} if spec['dpi'] else {}
        figure.savefig(file_path, format=fmt.lower(), transparent=transparent,
                       bbox_inches='tight', pad_inches=0.1, **kwargs)
        if close:
            plt.close(figure)
        logger.debug("wrote %s", file_path)
        return file_path
