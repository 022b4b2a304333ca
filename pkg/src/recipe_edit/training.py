"""Seeding and failure types shared by the two trainers."""
from __future__ import annotations

import zlib

import numpy as np


class TrainingDiverged(RuntimeError):
    """Loss became non-finite.

    ``history`` holds the epoch log up to that point and ``model`` (if set)
    carries the best parameters seen before the failure.
    """

    def __init__(self, message: str, history: list[dict], model=None):
        super().__init__(message)
        self.history = history
        self.model = model


class UntrainedModelError(RuntimeError):
    pass


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent RNG stream derived from (seed, name)."""
    return np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])
