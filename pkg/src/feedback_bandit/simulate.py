"""Scenario generation, regret traces, and the Monte Carlo harness.

Random scenarios follow the synthetic setup: utility weights from one joint
Dirichlet(gamma) over the |N(u)|+1 simplex coordinates (followers first,
self last), preferences q_cv and x_c from Beta(0.4, 0.6), and external
rates mu_cv from Unif[0, 2*mu_bar]. Regret is expected (pseudo-) regret
computed from the true q, so the optimal fixed policy scores exactly zero.

Determinism: run r of a Monte Carlo batch uses the stream
np.random.default_rng([master_seed, r]); runs are accumulated in fixed-size
chunks in ascending run order, so serial and parallel execution produce
bitwise-identical traces. The env var FEEDBACK_BANDIT_THREADS caps workers.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimation import softmax_prob
from .inference import BetaPrior
from .model import PreferenceScenario, UtilityWeights, step_utilities
from .policy import (
    PolicyConfig,
    Trajectory,
    _assemble_external,
    _external_step,
    run_episode,
)

CHUNK_RUNS = 32


@dataclass(frozen=True)
class ScenarioGenConfig:
    K: int
    n_followers: int
    T: int
    gamma: float = 0.8
    q_beta: tuple[float, float] = (0.4, 0.6)
    x_beta: tuple[float, float] = (0.4, 0.6)
    mu_bar: float = 0.0

    def __post_init__(self):
        if self.K < 1 or self.n_followers < 1 or self.T < 0:
            raise ValueError("K and n_followers must be >= 1 and T >= 0")
        if self.gamma <= 0 or min(self.q_beta) <= 0 or min(self.x_beta) <= 0:
            raise ValueError("concentration parameters must be positive")
        if self.mu_bar < 0:
            raise ValueError("mu_bar must be nonnegative")


@dataclass(frozen=True)
class RegretTrace:
    """Cumulative regret per step, averaged over `runs` episodes."""

    cumulative_regret: np.ndarray
    runs: int
    scenario_digest: str
    stderr: np.ndarray = None

    def __post_init__(self):
        reg = np.asarray(self.cumulative_regret, dtype=float)
        reg.setflags(write=False)
        object.__setattr__(self, "cumulative_regret", reg)
        if self.stderr is not None:
            se = np.asarray(self.stderr, dtype=float)
            se.setflags(write=False)
            object.__setattr__(self, "stderr", se)

    def final(self) -> float:
        return float(self.cumulative_regret[-1]) if self.cumulative_regret.size else 0.0

    def at(self, t: int) -> float:
        """Cumulative regret after t steps (t is 1-based)."""
        return float(self.cumulative_regret[t - 1])


def sample_scenario(cfg: ScenarioGenConfig, rng: np.random.Generator) -> PreferenceScenario:
    """Draw one random scenario; draw order is weights, q, x, mu."""
    coords = rng.dirichlet(np.full(cfg.n_followers + 1, cfg.gamma))
    weights = UtilityWeights(coords[:-1], coords[-1])
    q = rng.beta(*cfg.q_beta, size=(cfg.K, cfg.n_followers))
    x = rng.beta(*cfg.x_beta, size=cfg.K)
    mu = rng.uniform(0.0, 2.0 * cfg.mu_bar, size=(cfg.K, cfg.n_followers))
    return PreferenceScenario(weights, q, x, mu, cfg.T)


def poisson_draw(rate: float, rng: np.random.Generator) -> int:
    """One exact Poisson sample."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    return int(rng.poisson(rate))


def compute_regret(trajectory: Trajectory, scenario: PreferenceScenario) -> RegretTrace:
    """Pseudo-regret of one episode against the best fixed topic."""
    utils = step_utilities(scenario)
    topics = trajectory.topics
    if topics.size and (topics.min() < 0 or topics.max() >= scenario.n_topics):
        raise ValueError("trajectory topics out of range for scenario")
    gaps = utils.max() - utils[topics]
    return RegretTrace(np.cumsum(gaps), 1, scenario_digest(scenario))


def scenario_digest(scenario: PreferenceScenario) -> str:
    payload = {
        "a": scenario.weights.follower_weights.tolist(),
        "a_u": scenario.weights.self_weight,
        "q": scenario.q.tolist(),
        "x": scenario.x.tolist(),
        "mu": scenario.mu.tolist(),
        "T": scenario.horizon,
    }
    return _digest(payload)


def _digest(payload) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def batch_digest(cfg: ScenarioGenConfig, policy: PolicyConfig, runs: int, master_seed: int) -> str:
    payload = {
        "K": cfg.K,
        "N": cfg.n_followers,
        "T": cfg.T,
        "gamma": cfg.gamma,
        "q_beta": list(cfg.q_beta),
        "x_beta": list(cfg.x_beta),
        "mu_bar": cfg.mu_bar,
        "estimator": policy.estimator.value,
        "prior": [policy.prior.alpha, policy.prior.beta],
        "external": policy.use_external_feedback,
        "tie_break": policy.tie_break,
        "runs": runs,
        "seed": master_seed,
    }
    return _digest(payload)


def _regret_chunk(args):
    cfg, policy, master_seed, start, stop = args
    acc = np.zeros(cfg.T)
    acc_sq = np.zeros(cfg.T)
    for r in range(start, stop):
        rng = np.random.default_rng([master_seed, r])
        scenario = sample_scenario(cfg, rng)
        trace = compute_regret(run_episode(scenario, policy, rng), scenario)
        acc += trace.cumulative_regret
        acc_sq += trace.cumulative_regret**2
    return acc, acc_sq


def resolve_threads(n_jobs: int | None = None) -> int:
    """Worker count: explicit argument, else FEEDBACK_BANDIT_THREADS, else 1."""
    if n_jobs is not None:
        return max(1, int(n_jobs))
    env = os.environ.get("FEEDBACK_BANDIT_THREADS")
    return max(1, int(env)) if env else 1


def monte_carlo_regret(
    cfg: ScenarioGenConfig,
    policy: PolicyConfig,
    runs: int,
    master_seed: int,
    n_jobs: int | None = None,
) -> RegretTrace:
    """Average pseudo-regret over independent (scenario, episode) draws."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    jobs = resolve_threads(n_jobs)
    starts = list(range(0, runs, CHUNK_RUNS))
    tasks = [(cfg, policy, master_seed, s, min(s + CHUNK_RUNS, runs)) for s in starts]
    if jobs == 1 or len(tasks) == 1:
        parts = [_regret_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            parts = list(pool.map(_regret_chunk, tasks))
    # fixed chunk partition + in-order reduction keeps float sums identical
    # for any worker count
    acc = np.zeros(cfg.T)
    acc_sq = np.zeros(cfg.T)
    for part, part_sq in parts:
        acc += part
        acc_sq += part_sq
    mean = acc / runs
    if runs > 1:
        var = np.maximum(acc_sq - acc**2 / runs, 0.0) / (runs - 1)
        stderr = np.sqrt(var / runs)
    else:
        stderr = np.zeros(cfg.T)
    return RegretTrace(mean, runs, batch_digest(cfg, policy, runs, master_seed), stderr)


def write_regret_csv(trace: RegretTrace, path, header: dict | None = None) -> None:
    """Emit `t,mean_cumulative_regret,stderr` rows under a `#` config header."""
    lines = []
    meta = dict(header or {})
    meta.setdefault("digest", trace.scenario_digest)
    meta.setdefault("runs", trace.runs)
    for key in sorted(meta):
        lines.append(f"# {key}: {json.dumps(meta[key], sort_keys=True)}")
    lines.append("t,mean_cumulative_regret,stderr")
    se = trace.stderr if trace.stderr is not None else np.zeros_like(trace.cumulative_regret)
    for i, (m, s) in enumerate(zip(trace.cumulative_regret, se)):
        # repr of builtin floats round-trips exactly
        lines.append(f"{i + 1},{float(m)!r},{float(s)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_regret_csv(path) -> RegretTrace:
    """Parse a trace written by write_regret_csv."""
    mean, se = [], []
    runs, digest = 1, ""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("t,"):
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                key = key.strip()
                if key == "runs":
                    runs = int(value)
                elif key == "digest":
                    digest = json.loads(value)
                continue
            _, m, s = line.split(",")
            mean.append(float(m))
            se.append(float(s))
    return RegretTrace(np.array(mean), runs, digest, np.array(se))


def run_softmax_episode(
    scenario: PreferenceScenario,
    lam: float,
    rng: np.random.Generator,
    prior: BetaPrior | None = None,
    use_external_feedback: bool = False,
) -> Trajectory:
    """Episode whose topic choices are softmax(lam * estimated scores).

    This is the smoothed behavioral model the likelihood machinery assumes;
    it generates the synthetic cohorts for estimator and test calibration.
    Scores use posterior-mode point estimates, like the greedy policy.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    prior = prior or BetaPrior(3.0, 3.0)
    k, n = scenario.n_topics, scenario.n_followers
    a = scenario.weights.follower_weights
    a_u = scenario.weights.self_weight
    alpha, beta = prior.alpha, prior.beta

    likes = np.zeros((k, n))
    dislikes = np.zeros((k, n))
    topics = np.zeros(scenario.horizon, dtype=np.int64)
    own = np.zeros((scenario.horizon, n), dtype=np.int8)
    ext_chunks: list[tuple] = []

    for t in range(scenario.horizon):
        qhat = np.clip(
            (alpha + likes - 1.0) / (alpha + beta + likes + dislikes - 2.0), 0.0, 1.0
        )
        probs = softmax_prob(qhat @ a + a_u * scenario.x, lam)
        c = int(rng.choice(k, p=probs))
        topics[t] = c
        labels = (rng.random(n) < scenario.q[c]).astype(np.int8)
        own[t] = labels
        likes[c] += labels
        dislikes[c] += 1 - labels
        if use_external_feedback:
            _external_step(scenario, rng, likes, dislikes, t, ext_chunks)

    return Trajectory(topics, own, *_assemble_external(ext_chunks))


def a1_scenario(T: int) -> PreferenceScenario:
    """Two-topic, single-follower walk scenario.

    One follower with q = (0.9, 0.5), weights a_v = a_u = 1/2, equal own
    preferences, no external feedback. Every topic-2 post (index 1) costs
    exactly (0.9 - 0.5) / 2 = 0.2 pseudo-regret.
    """
    weights = UtilityWeights(np.array([0.5]), 0.5)
    q = np.array([[0.9], [0.5]])
    x = np.array([0.5, 0.5])
    return PreferenceScenario(weights, q, x, np.zeros((2, 1)), T)


def _a1_chunk(args):
    T, prior, tie_break, master_seed, start, stop = args
    scenario = a1_scenario(T)
    policy = PolicyConfig(prior=prior, tie_break=tie_break)
    acc = 0.0
    acc_sq = 0.0
    for r in range(start, stop):
        rng = np.random.default_rng([master_seed, r])
        t2 = int(np.sum(run_episode(scenario, policy, rng).topics == 1))
        acc += t2
        acc_sq += t2 * t2
    return acc, acc_sq


def a1_walk(
    T: int,
    runs: int,
    master_seed: int,
    tie_break: str = "lowest",
    prior: BetaPrior | None = None,
    n_jobs: int | None = None,
) -> dict:
    """Monte Carlo summary of topic-2 posting counts in the walk scenario."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    prior = prior or BetaPrior(3.0, 3.0)
    jobs = resolve_threads(n_jobs)
    starts = list(range(0, runs, CHUNK_RUNS))
    tasks = [(T, prior, tie_break, master_seed, s, min(s + CHUNK_RUNS, runs)) for s in starts]
    if jobs == 1 or len(tasks) == 1:
        parts = [_a1_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            parts = list(pool.map(_a1_chunk, tasks))
    total = sum(p for p, _ in parts)
    total_sq = sum(p for _, p in parts)
    mean = total / runs
    if runs > 1:
        var = max(total_sq - total**2 / runs, 0.0) / (runs - 1)
        stderr = float(np.sqrt(var / runs))
    else:
        stderr = 0.0
    return {
        "T": T,
        "runs": runs,
        "seed": master_seed,
        "tie_break": tie_break,
        "prior": [prior.alpha, prior.beta],
        "mean_t2": mean,
        "stderr_t2": stderr,
        "mean_t2_over_T": mean / T if T else 0.0,
    }
