"""Centered cross-product summaries of (X, Z, Y) blocks.

Every linear estimator in the package is a function of these sufficient
statistics, so a whole stack of them (one per leave-one-out fold, say) can be
pushed through the same closed forms at once.  Index order along the last axis
is ``(x, z, y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Block

X, Z, Y = 0, 1, 2


@dataclass(frozen=True)
class Moments:
    n: np.ndarray
    mean: np.ndarray
    cross: np.ndarray

    @classmethod
    def of(cls, block: Block) -> "Moments":
        r = np.column_stack([block.x, block.z, block.y])
        n = r.shape[0]
        if n == 0:
            return cls(np.asarray(0), np.zeros(3), np.zeros((3, 3)))
        mean = r.mean(axis=0)
        d = r - mean
        return cls(np.asarray(n), mean, d.T @ d)

    @classmethod
    def leave_one_out(cls, block: Block) -> "Moments":
        """Stack of moments, entry ``i`` computed without row ``i``."""
        r = np.column_stack([block.x, block.z, block.y])
        n = r.shape[0]
        full = cls.of(block)
        d = r - full.mean
        mean = (n * full.mean - r) / (n - 1)
        cross = full.cross - (n / (n - 1)) * d[:, :, None] * d[:, None, :]
        return cls(np.full(n, n - 1), mean, cross)

    def c(self, a: int, b: int) -> np.ndarray:
        return self.cross[..., a, b]

    @property
    def design(self) -> np.ndarray:
        """(..., 2, 2) cross-product of the demeaned (X, Z) design."""
        return self.cross[..., :2, :2]

    @property
    def design_y(self) -> np.ndarray:
        return self.cross[..., :2, 2]

    def intercept(self, b1, b2):
        return self.mean[..., Y] - b1 * self.mean[..., X] - b2 * self.mean[..., Z]
