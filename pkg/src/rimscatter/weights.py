"""Rim weight vectors and discrete phase alphabets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REGIMES = ("unconstrained", "unit-modulus", "quantized")


@dataclass(frozen=True, eq=False)
class PhaseAlphabet:
    """M equally spaced unit phasors exp(j 2 pi k / M), k = 1..M.

    Index ``k - 1`` in :attr:`values` holds exp(j 2 pi k / M), so the last
    entry is exactly 1.
    """

    m_levels: int

    def __post_init__(self):
        if int(self.m_levels) != self.m_levels or self.m_levels < 2:
            raise ValueError("alphabet needs an integer M >= 2")

    @property
    def values(self) -> np.ndarray:
        k = np.arange(1, self.m_levels + 1)
        v = np.exp(2j * np.pi * k / self.m_levels)
        v[-1] = 1.0
        if self.m_levels % 2 == 0:
            v[self.m_levels // 2 - 1] = -1.0
        if self.m_levels % 4 == 0:
            v[self.m_levels // 4 - 1] = 1j
            v[3 * self.m_levels // 4 - 1] = -1j
        return v

    def __eq__(self, other):
        return isinstance(other, PhaseAlphabet) and other.m_levels == self.m_levels

    def __hash__(self):
        return hash(self.m_levels)

    def nearest(self, x) -> np.ndarray:
        """Index of the alphabet value closest in phase to each entry of ``x``."""
        ang = np.angle(np.asarray(x, dtype=complex))
        k = np.rint(ang * self.m_levels / (2 * np.pi)).astype(int)
        return (k - 1) % self.m_levels


@dataclass(frozen=True, eq=False)
class WeightVector:
    values: np.ndarray
    regime: str = "unconstrained"
    alphabet: PhaseAlphabet | None = None
    indices: np.ndarray | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown weight regime {self.regime!r}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))
        if self.regime == "quantized" and (self.alphabet is None or self.indices is None):
            raise ValueError("quantized weights need an alphabet and phase indices")

    @classmethod
    def from_indices(cls, indices, alphabet: PhaseAlphabet) -> "WeightVector":
        idx = np.asarray(indices, dtype=np.int64)
        return cls(alphabet.values[idx], "quantized", alphabet, idx)

    @classmethod
    def ones(cls, n: int) -> "WeightVector":
        return cls(np.ones(n, dtype=complex), "unit-modulus")

    def __len__(self):
        return self.values.size
