"""Colour palettes for the evaluation plots."""

# Okabe-Ito, the standard colour-vision-deficiency safe set
OKABE_ITO = ['#E69F00', '#56B4E9', '#009E73', '#F0E442', '#0072B2', '#D55E00', '#CC79A7']

# Blue first so a single-series chart gets one calm colour
_OI_BLUE_FIRST = [OKABE_ITO[4], OKABE_ITO[0], OKABE_ITO[1], OKABE_ITO[2],
                  OKABE_ITO[3], OKABE_ITO[5], OKABE_ITO[6]]

# Error strata keep fixed colours across every figure.
STRATUM_COLORS = {
    'TP': '#009E73',
    'TN': '#56B4E9',
    'FP': '#D55E00',
    'FN': '#CC79A7',
}

# White to dark blue ramp for probability fields in [0, 1]
PROBABILITY_RAMP = ['#FFFFFF', '#56B4E9', '#0072B2', '#000000']

DEFAULT_BY_PLOT = {
    'distribution.violin': _OI_BLUE_FIRST,
    'curve.loss': _OI_BLUE_FIRST,
    'table.bar': _OI_BLUE_FIRST,
    'image.overlay': _OI_BLUE_FIRST,
    'image.heatmap': PROBABILITY_RAMP,
}


def default_palette(plot_id: str) -> list:
    return list(DEFAULT_BY_PLOT.get(plot_id, _OI_BLUE_FIRST))
