"""Topic selection under unknown follower preferences.

Each step the policy scores every topic with sum_v a_v qhat_cv + a_u x_c,
where qhat is either the posterior-mode point estimate (greedy) or a fresh
posterior draw per cell (Thompson-style exploration), posts the argmax, and
folds the resulting feedback back into the belief table. Followers always
label the user's own posts; when external feedback is enabled, each step
also delivers Poisson(mu_cv) labeled exposures per (topic, follower) cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .inference import (
    BetaPosteriorTable,
    BetaPrior,
    DegeneratePriorError,
    map_matrix,
    sample_matrix,
)
from .model import PreferenceScenario, UtilityWeights


class EstimatorKind(Enum):
    POINT_ESTIMATE = "point"
    POSTERIOR_SAMPLE = "sample"


TIE_BREAKS = ("lowest", "random")


@dataclass(frozen=True)
class PolicyConfig:
    estimator: EstimatorKind = EstimatorKind.POINT_ESTIMATE
    prior: BetaPrior = field(default_factory=lambda: BetaPrior(3.0, 3.0))
    use_external_feedback: bool = False
    # "lowest" is the deterministic default; "random" exists to study how
    # the first-step coin flip affects the two-topic walk analysis.
    tie_break: str = "lowest"

    def __post_init__(self):
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")


@dataclass(frozen=True)
class Trajectory:
    """Everything one simulated episode recorded.

    own_feedback[t, v] is follower v's label on the post at step t. External
    exposures are stored flat as parallel arrays (step, topic, follower,
    label) in canonical order: by step, then topic, then follower, likes
    before dislikes within a cell.
    """

    topics: np.ndarray
    own_feedback: np.ndarray
    external_step: np.ndarray
    external_topic: np.ndarray
    external_follower: np.ndarray
    external_label: np.ndarray

    @property
    def horizon(self) -> int:
        return self.topics.shape[0]

    @property
    def n_external(self) -> int:
        return self.external_step.shape[0]

    def external_at(self, t: int) -> list[tuple[int, int, int]]:
        """External (topic, follower, label) triples recorded during step t."""
        mask = self.external_step == t
        return list(
            zip(
                self.external_topic[mask].tolist(),
                self.external_follower[mask].tolist(),
                self.external_label[mask].tolist(),
            )
        )

    def final_table(self, prior: BetaPrior, n_topics: int) -> BetaPosteriorTable:
        """Replay every recorded label into a fresh table."""
        n_followers = self.own_feedback.shape[1] if self.own_feedback.ndim == 2 else 0
        likes = np.zeros((n_topics, n_followers), dtype=np.int64)
        dislikes = np.zeros((n_topics, n_followers), dtype=np.int64)
        rows = np.repeat(self.topics, n_followers)
        cols = np.tile(np.arange(n_followers), self.horizon)
        own = self.own_feedback.ravel()
        np.add.at(likes, (rows, cols), own)
        np.add.at(dislikes, (rows, cols), 1 - own)
        np.add.at(likes, (self.external_topic, self.external_follower), self.external_label)
        np.add.at(dislikes, (self.external_topic, self.external_follower), 1 - self.external_label)
        return BetaPosteriorTable(prior, likes, dislikes)


def _argmax_tie(scores: np.ndarray, tie_break: str, rng: np.random.Generator) -> int:
    if tie_break == "lowest":
        return int(np.argmax(scores))
    ties = np.flatnonzero(scores == scores.max())
    if ties.size == 1:
        return int(ties[0])
    return int(rng.choice(ties))


def choose_topic(
    table: BetaPosteriorTable,
    weights: UtilityWeights,
    x: np.ndarray,
    estimator: EstimatorKind,
    rng: np.random.Generator,
    tie_break: str = "lowest",
) -> int:
    """Argmax of estimated one-step utility over topics."""
    if estimator is EstimatorKind.POINT_ESTIMATE:
        qhat = map_matrix(table)
    else:
        qhat = sample_matrix(table, rng)
    scores = qhat @ weights.follower_weights + weights.self_weight * np.asarray(x)
    return _argmax_tie(scores, tie_break, rng)


def run_episode(
    scenario: PreferenceScenario,
    config: PolicyConfig,
    rng: np.random.Generator,
) -> Trajectory:
    """Simulate one full episode of the posting policy.

    Feedback generated during step t (own labels and any external exposures)
    becomes visible to the policy from step t + 1 on.
    """
    k, n = scenario.n_topics, scenario.n_followers
    horizon = scenario.horizon
    a = scenario.weights.follower_weights
    a_u = scenario.weights.self_weight
    alpha, beta = config.prior.alpha, config.prior.beta
    sampling = config.estimator is EstimatorKind.POSTERIOR_SAMPLE

    likes = np.zeros((k, n))
    dislikes = np.zeros((k, n))
    map_denom_offset = alpha + beta - 2.0
    if not sampling and map_denom_offset <= 0:
        # the point estimator cannot start from an empty table otherwise
        raise DegeneratePriorError("point-estimate policy needs alpha + beta > 2")

    topics = np.zeros(horizon, dtype=np.int64)
    own = np.zeros((horizon, n), dtype=np.int8)
    ext_chunks: list[tuple] = []

    for t in range(horizon):
        if sampling:
            qhat = rng.beta(alpha + likes, beta + dislikes)
        else:
            qhat = np.clip(
                (alpha + likes - 1.0) / (map_denom_offset + likes + dislikes),
                0.0,
                1.0,
            )
        scores = qhat @ a + a_u * scenario.x
        c = _argmax_tie(scores, config.tie_break, rng)
        topics[t] = c

        labels = (rng.random(n) < scenario.q[c]).astype(np.int8)
        own[t] = labels
        likes[c] += labels
        dislikes[c] += 1 - labels

        if config.use_external_feedback:
            _external_step(scenario, rng, likes, dislikes, t, ext_chunks)

    return Trajectory(topics, own, *_assemble_external(ext_chunks))


def _external_step(scenario, rng, likes, dislikes, t, chunks) -> None:
    """Draw one step of external exposures, update counts, record labels.

    Labels are recorded in canonical order: cell-major over (topic,
    follower), likes before dislikes within a cell.
    """
    k, n = scenario.n_topics, scenario.n_followers
    exposures = rng.poisson(scenario.mu)
    liked = rng.binomial(exposures, scenario.q)
    likes += liked
    dislikes += exposures - liked
    if exposures.sum() == 0:
        return
    cell_topic, cell_follower = np.divmod(np.arange(k * n), n)
    counts = np.empty(2 * k * n, dtype=np.int64)
    counts[0::2] = liked.ravel()
    counts[1::2] = (exposures - liked).ravel()
    topic_seq = np.repeat(np.repeat(cell_topic, 2), counts)
    follower_seq = np.repeat(np.repeat(cell_follower, 2), counts)
    label_seq = np.repeat(np.tile([1, 0], k * n), counts).astype(np.int8)
    chunks.append((np.full(topic_seq.size, t, dtype=np.int64), topic_seq, follower_seq, label_seq))


def _assemble_external(chunks):
    if chunks:
        return tuple(np.concatenate(parts) for parts in zip(*chunks))
    return (
        np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.int8),
    )
