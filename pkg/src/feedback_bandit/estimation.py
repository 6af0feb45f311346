"""Utility-parameter recovery from observed posting histories.

Given a feedback log, replay reconstructs the per-step preference estimates
the poster would have held, then two fitting routes recover the weights
(a, a_u) and own preferences x:

- softmax maximum likelihood: the policy is smoothed into
  p(c) proportional to exp(lam * (a' qhat_c + a_u x_c)) and the log
  likelihood is maximized by projected gradient ascent with multi-start
  (the problem is non-convex in (a_u, x) jointly);
- linear loss: sum over posts of the gap between the best achievable score
  and the observed topic's score, convex in (a, a_u, z) after the
  substitution z_c = a_u * x_c, minimized by projected subgradient or an
  exact epigraph linear program.

The posterior-sample variant replaces each replay point estimate with S
frozen posterior draws and averages the per-step loss over them
(sample-average approximation), so the objective stays deterministic while
optimizing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eventlog import OWN_POST, FeedbackLog
from .inference import BetaPrior, DegeneratePriorError
from .model import UtilityWeights
from . import lp

SOLVERS = ("subgradient", "lp")
VARIANTS = ("point", "sample")
AU_IDENTIFIABLE_MIN = 1e-6


@dataclass(frozen=True)
class EstimationConfig:
    lam: float = 10.0
    prior: BetaPrior = field(default_factory=lambda: BetaPrior(3.0, 3.0))
    samples_S: int = 10
    solver: str = "subgradient"
    variant: str = "point"
    max_iters: int = 2000
    step_scale: float = 1.0
    tolerance: float = 1e-6

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.samples_S < 1:
            raise ValueError("samples_S must be >= 1")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.max_iters < 1 or self.step_scale <= 0 or self.tolerance <= 0:
            raise ValueError("solver controls must be positive")


@dataclass(frozen=True)
class EstimationResult:
    weights_hat: UtilityWeights
    x_hat: np.ndarray
    z_hat: np.ndarray
    objective: float
    iterations: int
    converged: bool
    x_identifiable: bool = True
    method: str = "linear"
    solver: str = "subgradient"

    def to_dict(self) -> dict:
        return {
            "follower_weights": self.weights_hat.follower_weights.tolist(),
            "self_weight": self.weights_hat.self_weight,
            "x": self.x_hat.tolist(),
            "z": self.z_hat.tolist(),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "x_identifiable": self.x_identifiable,
            "method": self.method,
            "solver": self.solver,
        }


@dataclass(frozen=True)
class ReplaySnapshots:
    """Per own-post estimates computed from all events strictly before it."""

    times: np.ndarray
    topics: np.ndarray
    qhat: np.ndarray
    alpha_post: np.ndarray
    beta_post: np.ndarray

    @property
    def n_posts(self) -> int:
        return self.topics.shape[0]


def replay_estimates(log: FeedbackLog, prior: BetaPrior) -> ReplaySnapshots:
    """Causally replay a log into per-post MAP estimates and posteriors.

    Events sharing the post's timestamp count as simultaneous with it and
    are excluded from that post's snapshot.
    """
    k, n = log.n_topics, log.n_followers
    likes = np.zeros((k, n))
    dislikes = np.zeros((k, n))
    times, topics, qhats, alphas, betas = [], [], [], [], []
    a, b = prior.alpha, prior.beta

    def snapshot():
        denom = a + b + likes + dislikes - 2.0
        if np.any(denom <= 0):
            raise DegeneratePriorError("replay needs alpha + beta + n + nbar > 2")
        qhats.append(np.clip((a + likes - 1.0) / denom, 0.0, 1.0))
        alphas.append(a + likes)
        betas.append(b + dislikes)

    idx = 0
    events = log.events
    while idx < len(events):
        t = events[idx].t
        group_end = idx
        while group_end < len(events) and events[group_end].t == t:
            group_end += 1
        for e in events[idx:group_end]:
            if e.kind == OWN_POST:
                times.append(e.t)
                topics.append(e.topic)
                snapshot()
        for e in events[idx:group_end]:
            for v, label in e.labels.items():
                if label == 1:
                    likes[e.topic, v] += 1
                else:
                    dislikes[e.topic, v] += 1
        idx = group_end

    shape = (len(topics), k, n)
    return ReplaySnapshots(
        np.array(times, dtype=np.int64),
        np.array(topics, dtype=np.int64),
        np.array(qhats).reshape(shape),
        np.array(alphas).reshape(shape),
        np.array(betas).reshape(shape),
    )


def sample_replay(replay: ReplaySnapshots, S: int, rng: np.random.Generator) -> np.ndarray:
    """Frozen posterior draws qhat^(s), shape (posts, S, K, N)."""
    if S < 1:
        raise ValueError("S must be >= 1")
    alpha = replay.alpha_post[:, None, :, :]
    beta = replay.beta_post[:, None, :, :]
    shape = (replay.n_posts, S) + replay.qhat.shape[1:]
    return rng.beta(np.broadcast_to(alpha, shape), np.broadcast_to(beta, shape))


def softmax_prob(scores, lam: float) -> np.ndarray:
    """exp(lam * s_c) / sum_c' exp(lam * s_c'), max-shifted for safety."""
    scores = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    shifted = lam * (scores - scores.max(axis=-1, keepdims=True))
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def _scores(a, a_u, x, qhat) -> np.ndarray:
    """Score of every topic at every post: a' qhat + a_u x (broadcast)."""
    return qhat @ a + a_u * x


def log_likelihood(a, a_u, x, replay: ReplaySnapshots, lam: float) -> float:
    """Sum over posts of log softmax probability of the observed topic."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_feasible(a, a_u, x)
    s = lam * _scores(a, a_u, x, replay.qhat)
    shifted = s - s.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(replay.n_posts)
    return float(np.sum(shifted[rows, replay.topics] - log_norm))


def log_likelihood_grad(a, a_u, x, replay: ReplaySnapshots, lam: float):
    """Exact gradient of log_likelihood in (a, a_u, x)."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    probs = softmax_prob(_scores(a, a_u, x, replay.qhat), lam)
    rows = np.arange(replay.n_posts)
    chosen_q = replay.qhat[rows, replay.topics, :]
    grad_a = lam * (chosen_q.sum(axis=0) - np.einsum("tc,tcn->n", probs, replay.qhat))
    grad_au = lam * float(x[replay.topics].sum() - (probs @ x).sum())
    onehot_minus_p = -probs.copy()
    np.add.at(onehot_minus_p, (rows, replay.topics), 1.0)
    grad_x = lam * a_u * onehot_minus_p.sum(axis=0)
    return grad_a, grad_au, grad_x


def _check_feasible(a, a_u, x) -> None:
    if np.any(a < -1e-9) or a_u < -1e-9:
        raise ValueError("weights must be nonnegative")
    if abs(a.sum() + a_u - 1.0) > 1e-6:
        raise ValueError("weights must sum to 1")
    if np.any(x < -1e-9) or np.any(x > 1 + 1e-9):
        raise ValueError("x must lie in [0, 1]")


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of v onto the probability simplex (exact, sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    cumsum = np.cumsum(u) - 1.0
    j = np.arange(1, v.size + 1)
    rho = np.max(np.flatnonzero(u - cumsum / j > 0)) + 1
    theta = cumsum[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def linear_loss(a, a_u, z, qhat, topics) -> float:
    """Sum over posts of max_c (a' qhat_c + z_c) minus the observed score.

    qhat with shape (posts, K, N) is the point variant; (posts, S, K, N)
    averages the per-post loss over the S frozen draws. a_u enters only
    through the feasible set (0 <= z_c <= a_u), not the loss value.
    """
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    scores = qhat @ a + z
    rows = np.arange(topics.shape[0])
    if qhat.ndim == 3:
        gaps = scores.max(axis=1) - scores[rows, topics]
        return float(gaps.sum())
    # sample variant: scores has shape (posts, S, K)
    chosen = scores[rows, :, topics]
    return float((scores.max(axis=2) - chosen).mean(axis=1).sum())


def linear_loss_subgrad(a, a_u, z, qhat, topics):
    """One subgradient of linear_loss at (a, a_u, z); a_u component is 0."""
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    scores = qhat @ a + z
    rows = np.arange(topics.shape[0])
    k = z.shape[0]
    if qhat.ndim == 3:
        best = scores.argmax(axis=1)
        grad_a = (qhat[rows, best, :] - qhat[rows, topics, :]).sum(axis=0)
        grad_z = np.bincount(best, minlength=k).astype(float)
        grad_z -= np.bincount(topics, minlength=k)
    else:
        posts, S = scores.shape[0], scores.shape[1]
        best = scores.argmax(axis=2)
        t_idx = np.repeat(rows, S)
        s_idx = np.tile(np.arange(S), posts)
        grad_a = qhat[t_idx, s_idx, best.ravel(), :].sum(axis=0) / S
        grad_a -= qhat[t_idx, s_idx, np.repeat(topics, S), :].sum(axis=0) / S
        grad_z = np.bincount(best.ravel(), minlength=k).astype(float) / S
        grad_z -= np.bincount(topics, minlength=k).astype(float)
    return grad_a, 0.0, grad_z


def _project_linear(a, a_u, z):
    w = project_simplex(np.concatenate([a, [a_u]]))
    a, a_u = w[:-1], float(w[-1])
    return a, a_u, np.clip(z, 0.0, a_u)


def _subgradient_solve(qhat, topics, n_followers, k, cfg: EstimationConfig):
    """Projected subgradient descent with Polyak steps and best-iterate tracking.

    The loss admits a zero-objective point on every instance (a = 0 with
    constant z ties all topic scores), so the optimal value is known to be
    zero and the Polyak rule step = scale * loss / ||g||^2 applies.  Plain
    eta0 / sqrt(iter) decay stalls two orders of magnitude short of LP
    agreement within any practical iteration budget; this rule closes the
    gap to ~1e-9.
    """
    a = np.full(n_followers, 1.0 / (n_followers + 1))
    a_u = 1.0 / (n_followers + 1)
    z = np.full(k, a_u / 2.0)
    loss0 = linear_loss(a, a_u, z, qhat, topics)
    floor = cfg.tolerance * max(1.0, loss0)
    best = (loss0, a.copy(), a_u, z.copy())
    for it in range(1, cfg.max_iters + 1):
        loss = linear_loss(a, a_u, z, qhat, topics)
        if loss < best[0]:
            best = (loss, a.copy(), a_u, z.copy())
        if best[0] <= floor:
            return best, it, True
        ga, gau, gz = linear_loss_subgrad(a, a_u, z, qhat, topics)
        nsq = ga @ ga + gau * gau + gz @ gz
        if nsq == 0.0:
            return best, it, True
        step = cfg.step_scale * loss / nsq
        a, a_u, z = _project_linear(a - step * ga, a_u - step * gau, z - step * gz)
    loss = linear_loss(a, a_u, z, qhat, topics)
    if loss < best[0]:
        best = (loss, a.copy(), a_u, z.copy())
    return best, cfg.max_iters, best[0] <= floor


def _recover_x(z, a_u):
    if a_u < AU_IDENTIFIABLE_MIN:
        return np.zeros_like(z), False
    return np.clip(z / a_u, 0.0, 1.0), True


def fit_linear_loss(log: FeedbackLog, cfg: EstimationConfig, rng=None) -> EstimationResult:
    """Minimize the linear loss over (a, a_u, z); recover x = z / a_u."""
    replay = replay_estimates(log, cfg.prior)
    if replay.n_posts < 1:
        raise ValueError("need at least one own post to fit")
    if cfg.variant == "sample":
        rng = rng if rng is not None else np.random.default_rng(0)
        qhat = sample_replay(replay, cfg.samples_S, rng)
    else:
        qhat = replay.qhat
    n, k = log.n_followers, log.n_topics

    if cfg.solver == "lp":
        a, a_u, z, objective, iters = lp.linear_loss_lp(qhat, replay.topics)
        converged = True
    else:
        (objective, a, a_u, z), iters, converged = _subgradient_solve(
            qhat, replay.topics, n, k, cfg
        )
    x, identifiable = _recover_x(z, a_u)
    return EstimationResult(
        weights_hat=UtilityWeights(a, a_u),
        x_hat=x,
        z_hat=np.asarray(z, dtype=float),
        objective=float(objective),
        iterations=int(iters),
        converged=bool(converged),
        x_identifiable=identifiable,
        method="linear",
        solver=cfg.solver,
    )


def _ascend(theta_a, theta_au, theta_x, replay, lam, cfg):
    """Projected gradient ascent with backtracking; returns best iterate."""
    step = cfg.step_scale
    ll = log_likelihood(theta_a, theta_au, theta_x, replay, lam)
    iters = 0
    converged = False
    for _ in range(cfg.max_iters):
        iters += 1
        ga, gau, gx = log_likelihood_grad(theta_a, theta_au, theta_x, replay, lam)
        moved = False
        while step > 1e-14:
            cand = np.concatenate([theta_a, [theta_au]]) + step * np.concatenate([ga, [gau]])
            w = project_simplex(cand)
            cand_a, cand_au = w[:-1], float(w[-1])
            cand_x = np.clip(theta_x + step * gx, 0.0, 1.0)
            cand_ll = log_likelihood(cand_a, cand_au, cand_x, replay, lam)
            if cand_ll > ll + 1e-15:
                delta = max(
                    np.max(np.abs(cand_a - theta_a)),
                    abs(cand_au - theta_au),
                    np.max(np.abs(cand_x - theta_x)),
                )
                theta_a, theta_au, theta_x, ll = cand_a, cand_au, cand_x, cand_ll
                step = min(step * 1.5, 1e3)
                moved = True
                break
            step *= 0.5
        if not moved or delta < cfg.tolerance:
            converged = True
            break
    return theta_a, theta_au, theta_x, ll, iters, converged


def fit_mle(
    log: FeedbackLog,
    cfg: EstimationConfig,
    rng=None,
    extra_starts: list[tuple[np.ndarray, float, np.ndarray]] | None = None,
) -> EstimationResult:
    """Maximize the softmax log likelihood over (a, a_u) on the simplex and
    x in [0, 1]^K, via multi-start projected gradient ascent.

    Five random starts plus the linear-loss solution (and any caller-supplied
    extra starts) hedge the non-convexity; the best final iterate wins.
    """
    replay = replay_estimates(log, cfg.prior)
    if replay.n_posts < 1:
        raise ValueError("need at least one own post to fit")
    rng = rng if rng is not None else np.random.default_rng(0)
    n, k = log.n_followers, log.n_topics

    starts = []
    warm = fit_linear_loss(log, cfg, rng=rng)
    starts.append(
        (
            warm.weights_hat.follower_weights,
            warm.weights_hat.self_weight,
            warm.x_hat if warm.x_identifiable else np.full(k, 0.5),
        )
    )
    for _ in range(5):
        w = rng.dirichlet(np.ones(n + 1))
        starts.append((w[:-1], float(w[-1]), rng.uniform(0.0, 1.0, size=k)))
    if extra_starts:
        starts.extend(extra_starts)

    best = None
    total_iters = 0
    any_converged = False
    for a0, au0, x0 in starts:
        a, au, x, ll, iters, conv = _ascend(
            np.asarray(a0, dtype=float).copy(), float(au0), np.asarray(x0, dtype=float).copy(),
            replay, cfg.lam, cfg
        )
        total_iters += iters
        if best is None or ll > best[0]:
            best = (ll, a, au, x)
            any_converged = conv
    ll, a, au, x = best
    identifiable = au >= AU_IDENTIFIABLE_MIN
    return EstimationResult(
        weights_hat=UtilityWeights(a, au),
        x_hat=x,
        z_hat=au * x,
        objective=float(ll),
        iterations=total_iters,
        converged=bool(any_converged),
        x_identifiable=bool(identifiable),
        method="mle",
        solver="gradient_ascent",
    )


def fit_mle_null(log: FeedbackLog, cfg: EstimationConfig) -> EstimationResult:
    """MLE under the no-feedback null: a = 0, a_u = 1, only x free.

    The likelihood is concave in x here (scores are linear in x), so a
    single start suffices.
    """
    replay = replay_estimates(log, cfg.prior)
    if replay.n_posts < 1:
        raise ValueError("need at least one own post to fit")
    n, k = log.n_followers, log.n_topics
    zeros = np.zeros(n)

    x = np.full(k, 0.5)
    step = cfg.step_scale
    ll = log_likelihood(zeros, 1.0, x, replay, cfg.lam)
    iters = 0
    converged = False
    for _ in range(cfg.max_iters):
        iters += 1
        _, _, gx = log_likelihood_grad(zeros, 1.0, x, replay, cfg.lam)
        moved = False
        while step > 1e-14:
            cand = np.clip(x + step * gx, 0.0, 1.0)
            cand_ll = log_likelihood(zeros, 1.0, cand, replay, cfg.lam)
            if cand_ll > ll + 1e-15:
                delta = np.max(np.abs(cand - x))
                x, ll = cand, cand_ll
                step = min(step * 1.5, 1e3)
                moved = True
                break
            step *= 0.5
        if not moved or delta < cfg.tolerance:
            converged = True
            break
    return EstimationResult(
        weights_hat=UtilityWeights(zeros, 1.0),
        x_hat=x,
        z_hat=x.copy(),
        objective=float(ll),
        iterations=iters,
        converged=bool(converged),
        x_identifiable=True,
        method="mle_null",
        solver="gradient_ascent",
    )


def rmse(scenario, result: EstimationResult) -> float:
    """Root of the summed squared errors in (a, a_u, x) for one fit."""
    return float(np.sqrt(squared_error(scenario, result)))


def squared_error(scenario, result: EstimationResult) -> float:
    da = scenario.weights.follower_weights - result.weights_hat.follower_weights
    dau = scenario.weights.self_weight - result.weights_hat.self_weight
    dx = scenario.x - result.x_hat
    return float(da @ da + dau * dau + dx @ dx)


def aggregate_rmse(scenarios, results) -> float:
    """Trial-averaged RMSE: mean the squared errors, then take the root."""
    pairs = list(zip(scenarios, results))
    if not pairs:
        raise ValueError("need at least one (scenario, result) pair")
    return float(np.sqrt(np.mean([squared_error(s, r) for s, r in pairs])))
