"""Seeded torch random streams."""

from typing import Optional, Union

import torch


def make_generator(seed: Optional[int] = None,
                   generator: Optional[torch.Generator] = None,
                   device: Union[str, torch.device] = "cpu") -> torch.Generator:
    """Return `generator` if given, else a new stream seeded with `seed` (fresh entropy if None)."""
    if generator is not None:
        return generator
    gen = torch.Generator(device=device)
    if seed is None:
        gen.seed()
    else:
        gen.manual_seed(int(seed))
    return gen
