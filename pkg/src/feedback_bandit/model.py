"""Ground-truth model objects and exact utility evaluation.

A scenario bundles everything the environment knows: follower preferences
q_cv (probability follower v likes a post on topic c), the user's utility
weights over follower feedback and own taste, the user's own topic
preferences x_c, external-feedback rates mu_cv, and the horizon T. Topics
are dense integer ids in [0, K).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIMPLEX_TOL = 1e-9


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class UtilityWeights:
    """Convex weights over follower feedback plus the user's own taste."""

    follower_weights: np.ndarray
    self_weight: float

    def __post_init__(self):
        a = _frozen_array(self.follower_weights)
        object.__setattr__(self, "follower_weights", a)
        object.__setattr__(self, "self_weight", float(self.self_weight))
        if a.ndim != 1:
            raise ValueError("follower_weights must be a vector")
        if np.any(a < 0) or self.self_weight < 0:
            raise ValueError("weights must be nonnegative")
        total = float(a.sum()) + self.self_weight
        # reject rather than renormalize so inputs are never silently altered
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"weights must sum to 1, got {total!r}")

    @property
    def n_followers(self) -> int:
        return self.follower_weights.shape[0]


@dataclass(frozen=True)
class PreferenceScenario:
    """Immutable ground truth for one simulated user.

    q and mu are K x n_followers matrices; x has one entry per topic.
    """

    weights: UtilityWeights
    q: np.ndarray
    x: np.ndarray
    mu: np.ndarray = None
    horizon: int = 1

    def __post_init__(self):
        q = _frozen_array(self.q)
        x = _frozen_array(self.x)
        if q.ndim != 2 or x.ndim != 1:
            raise ValueError("q must be a matrix and x a vector")
        k, n = q.shape
        mu = self.mu
        if mu is None:
            mu = np.zeros((k, n))
        mu = _frozen_array(mu)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "horizon", int(self.horizon))
        if x.shape[0] != k:
            raise ValueError("x length must match topic count")
        if n != self.weights.n_followers:
            raise ValueError("q width must match follower count")
        if mu.shape != (k, n):
            raise ValueError("mu shape must match q")
        if np.any(q < 0) or np.any(q > 1):
            raise ValueError("preference probabilities must lie in [0, 1]")
        if np.any(x < 0) or np.any(x > 1):
            raise ValueError("own preferences must lie in [0, 1]")
        if np.any(mu < 0):
            raise ValueError("external rates must be nonnegative")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")

    @property
    def n_topics(self) -> int:
        return self.q.shape[0]

    @property
    def n_followers(self) -> int:
        return self.q.shape[1]


def step_utilities(scenario: PreferenceScenario) -> np.ndarray:
    """Expected one-step utility of every topic as a length-K vector."""
    w = scenario.weights
    return scenario.q @ w.follower_weights + w.self_weight * scenario.x


def expected_step_utility(scenario: PreferenceScenario, c: int) -> float:
    """Expected one-step utility sum_v a_v q_cv + a_u x_c of posting topic c."""
    c = int(c)
    if not 0 <= c < scenario.n_topics:
        raise IndexError(f"topic {c} out of range for K={scenario.n_topics}")
    return float(step_utilities(scenario)[c])


def optimal_topic(scenario: PreferenceScenario) -> int:
    """Best fixed topic; ties go to the lowest index."""
    return int(np.argmax(step_utilities(scenario)))


def optimal_cumulative_utility(scenario: PreferenceScenario) -> float:
    """Expected utility of posting the best topic for all T steps."""
    return scenario.horizon * expected_step_utility(scenario, optimal_topic(scenario))
