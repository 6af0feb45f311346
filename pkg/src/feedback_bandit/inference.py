"""Beta-Bernoulli belief state over follower preferences.

Each (topic, follower) cell keeps like/dislike counts under a shared
Beta(alpha, beta) prior. Point summaries use the posterior mode
(alpha + n - 1) / (alpha + beta + n + nbar - 2); exploration draws come
from the full Beta posterior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegeneratePriorError(ValueError):
    """The MAP denominator is not positive; use a prior with alpha+beta > 2
    or supply observations before asking for a point estimate."""


@dataclass(frozen=True)
class BetaPrior:
    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")


@dataclass(frozen=True)
class BetaPosteriorTable:
    """Per-(topic, follower) like counts n and dislike counts nbar."""

    prior: BetaPrior
    likes: np.ndarray
    dislikes: np.ndarray

    def __post_init__(self):
        likes = np.array(self.likes, dtype=np.int64)
        dislikes = np.array(self.dislikes, dtype=np.int64)
        likes.setflags(write=False)
        dislikes.setflags(write=False)
        object.__setattr__(self, "likes", likes)
        object.__setattr__(self, "dislikes", dislikes)
        if likes.ndim != 2 or likes.shape != dislikes.shape:
            raise ValueError("count matrices must share one K x N shape")
        if np.any(likes < 0) or np.any(dislikes < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def n_topics(self) -> int:
        return self.likes.shape[0]

    @property
    def n_followers(self) -> int:
        return self.likes.shape[1]


def empty_table(prior: BetaPrior, n_topics: int, n_followers: int) -> BetaPosteriorTable:
    zeros = np.zeros((n_topics, n_followers), dtype=np.int64)
    return BetaPosteriorTable(prior, zeros, zeros.copy())


def _check_cell(table: BetaPosteriorTable, c: int, v: int) -> tuple[int, int]:
    c, v = int(c), int(v)
    if not 0 <= c < table.n_topics:
        raise IndexError(f"topic {c} out of range for K={table.n_topics}")
    if not 0 <= v < table.n_followers:
        raise IndexError(f"follower {v} out of range for N={table.n_followers}")
    return c, v


def record_feedback(table: BetaPosteriorTable, c: int, v: int, label: int) -> BetaPosteriorTable:
    """Return a new table with one observed label folded into cell (c, v)."""
    c, v = _check_cell(table, c, v)
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    likes = table.likes.copy()
    dislikes = table.dislikes.copy()
    if label == 1:
        likes[c, v] += 1
    else:
        dislikes[c, v] += 1
    return BetaPosteriorTable(table.prior, likes, dislikes)


def map_matrix(table: BetaPosteriorTable) -> np.ndarray:
    """Posterior-mode point estimates for all cells, clamped to [0, 1]."""
    a, b = table.prior.alpha, table.prior.beta
    denom = a + b + table.likes + table.dislikes - 2.0
    if np.any(denom <= 0):
        raise DegeneratePriorError(
            "MAP needs alpha + beta + n + nbar > 2; add observations or widen the prior"
        )
    return np.clip((a + table.likes - 1.0) / denom, 0.0, 1.0)


def map_estimate(table: BetaPosteriorTable, c: int, v: int) -> float:
    """Posterior mode (alpha + n - 1) / (alpha + beta + n + nbar - 2) for one cell."""
    c, v = _check_cell(table, c, v)
    a, b = table.prior.alpha, table.prior.beta
    denom = a + b + float(table.likes[c, v]) + float(table.dislikes[c, v]) - 2.0
    if denom <= 0:
        raise DegeneratePriorError(
            "MAP needs alpha + beta + n + nbar > 2; add observations or widen the prior"
        )
    return float(np.clip((a + table.likes[c, v] - 1.0) / denom, 0.0, 1.0))


def sample_matrix(table: BetaPosteriorTable, rng: np.random.Generator) -> np.ndarray:
    """One posterior draw per cell from Beta(alpha + n, beta + nbar)."""
    return rng.beta(table.prior.alpha + table.likes, table.prior.beta + table.dislikes)


def sample_estimate(table: BetaPosteriorTable, c: int, v: int, rng: np.random.Generator) -> float:
    """One posterior draw for a single cell."""
    c, v = _check_cell(table, c, v)
    return float(
        rng.beta(
            table.prior.alpha + float(table.likes[c, v]),
            table.prior.beta + float(table.dislikes[c, v]),
        )
    )
