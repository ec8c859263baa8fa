"""Import the model modules so their classes land in the model registry."""

from models.cprob_unet import CProbUNet  # noqa: F401
from models.cssn import CSSN  # noqa: F401
