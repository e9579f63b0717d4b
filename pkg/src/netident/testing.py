"""Fixture-only access to the latent side of an oracle.

Nothing in the identification modules may import this file; the barrier
audit in the test suite checks that.  It exists so tests and the
``--reveal-latents`` CLI path can compare recovered labels with the truth.
"""

from __future__ import annotations

import numpy as np

from .oracle import FixedEffectHandle, Oracle

__all__ = ["reveal", "reveal_many", "plant_handle", "true_dgp"]


def reveal(oracle: Oracle, handle: FixedEffectHandle) -> float:
    """Hidden fixed effect behind ``handle``."""
    return float(oracle._lookup([handle])[1][0])


def reveal_many(oracle: Oracle, handles) -> np.ndarray:
    return oracle._lookup(list(handles))[1]


def plant_handle(oracle: Oracle, x, a: float) -> FixedEffectHandle:
    """Issue a handle with a chosen hidden value (test fixtures only)."""
    return oracle._issue([oracle._cov(x)], [float(a)])[0]


def true_dgp(oracle: Oracle):
    return oracle._dgp
