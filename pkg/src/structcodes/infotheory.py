"""Entropy helpers.  Everything is in bits, with 0 log 0 taken as 0."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidPmf

PMF_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Pmf:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float, copy=True).ravel()
        if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidPmf(f"probabilities must be finite and nonnegative: {p}")
        if abs(p.sum() - 1.0) > PMF_TOL:
            raise InvalidPmf(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return self.probs.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)

    def entropy(self) -> float:
        return pmf_entropy(self)

    def log2_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log2(self.probs)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.choice(self.probs.size, size=size, p=self.probs)

    @classmethod
    def uniform(cls, size: int) -> "Pmf":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point_mass(cls, size: int, at: int = 0) -> "Pmf":
        p = np.zeros(size)
        p[at] = 1.0
        return cls(p)

    @classmethod
    def bernoulli(cls, p: float) -> "Pmf":
        _check_probability(p)
        return cls([1.0 - p, p])

    @classmethod
    def symmetric(cls, q: int, p: float) -> "Pmf":
        """Zero with probability 1-p, every nonzero residue with p/(q-1)."""
        _check_probability(p)
        probs = np.full(q, p / (q - 1))
        probs[0] = 1.0 - p
        return cls(probs)


def _check_probability(p: float) -> None:
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise DomainError(f"probability must lie in [0, 1], got {p!r}")


def binary_entropy(p: float) -> float:
    _check_probability(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def pmf_entropy(p: Pmf) -> float:
    if not isinstance(p, Pmf):
        p = Pmf(p)
    nz = p.probs[p.probs > 0]
    return float(-(nz * np.log2(nz)).sum())


@dataclass(frozen=True)
class XorSource:
    """Doubly symmetric binary source: joint[s1, s2] and the law of U = S1 xor S2."""

    joint: np.ndarray
    u: Pmf

    @property
    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.joint.sum(axis=1), self.joint.sum(axis=0)

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        cells = rng.choice(4, size=n, p=self.joint.ravel())
        return cells // 2, cells % 2


def xor_source_pmf(p: float) -> XorSource:
    _check_probability(p)
    joint = np.array([[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]])
    joint.setflags(write=False)
    return XorSource(joint=joint, u=Pmf.bernoulli(p))
