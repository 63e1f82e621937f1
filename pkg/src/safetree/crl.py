"""Episodic Lagrangian policy optimization on the navigation task.

A tabular softmax policy over a discretized grid is trained with a
likelihood-ratio gradient (return-to-go, mean baseline, normalized
advantages) on the composite objective reward - lambda * cost, where the
cost comes from a learned constraint formula. The multiplier follows
projected subgradient ascent on the cost budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError, TrainingDiverged
from .features import Trajectory, identity_xy
from .formula import ConjunctionStats, DnfFormula, evaluate
from .navenv import DIRECTIONS, N_ACTIONS, NavEnv


@dataclass(frozen=True)
class TrainConfig:
    budget: float = 1.0
    gamma: float = 0.99
    lr_policy: float = 0.8
    lr_lambda: float = 0.05
    episodes_per_epoch: int = 8
    epochs: int = 3000
    seed: int = 0
    freeze_lambda: bool = False  # ablation: unconstrained training
    # Credit-assignment horizon for the gradient estimator only; reported
    # returns always use `gamma`. Shorter horizons trade bias for variance.
    adv_gamma: float = 0.9
    max_abs_logit: float = 1e3

    def __post_init__(self):
        if self.budget < 0:
            raise DomainError("budget must be non-negative")
        if self.lr_policy <= 0 or self.lr_lambda < 0:
            raise DomainError("learning rates must be positive")
        if self.episodes_per_epoch < 1 or self.epochs < 1:
            raise DomainError("episodes_per_epoch and epochs must be >= 1")
        if not (0.0 < self.adv_gamma <= 1.0):
            raise DomainError("adv_gamma must lie in (0, 1]")


class Policy:
    """Softmax over a logits table indexed by a grid cell of the position."""

    def __init__(self, grid: int = 20, n_actions: int = N_ACTIONS, logits=None):
        self.grid = grid
        self.n_actions = n_actions
        if logits is None:
            logits = np.zeros((grid * grid, n_actions))
        self.logits = np.asarray(logits, dtype=float)
        if self.logits.shape != (grid * grid, n_actions):
            raise DomainError("logits table has the wrong shape")
        if not np.all(np.isfinite(self.logits)):
            raise DomainError("logits must be finite")

    def cell(self, position) -> int:
        g = self.grid
        i = min(g - 1, int(position[0] * g))
        j = min(g - 1, int(position[1] * g))
        return i * g + j

    def probs(self, cell: int) -> np.ndarray:
        row = self.logits[cell]
        z = row - row.max()
        e = np.exp(z)
        return e / e.sum()

    def sample(self, cell: int, rng) -> int:
        p = self.probs(cell)
        return int(np.searchsorted(np.cumsum(p), rng.random()))

    def greedy(self, cell: int) -> int:
        return int(np.argmax(self.logits[cell]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "grid": self.grid,
                "n_actions": self.n_actions,
                "logits": self.logits.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Policy":
        try:
            doc = json.loads(text)
            return cls(
                grid=int(doc["grid"]),
                n_actions=int(doc["n_actions"]),
                logits=np.asarray(doc["logits"], dtype=float),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed policy document: {exc}") from exc


@dataclass
class EpisodeRecord:
    positions: list[tuple[float, float]]
    cells: list[int]
    actions: list[int]
    rewards: list[float]
    costs: list[int]
    gt_costs: list[int]
    reached_goal: bool

    def __len__(self) -> int:
        return len(self.cells)


@dataclass
class TrainCurves:
    """Per-epoch training traces."""

    rows: list[dict] = field(default_factory=list)

    HEADER = "epoch,mean_reward,mean_formula_cost,mean_gt_cost,lambda,goal_rate"

    def append(self, **row) -> None:
        self.rows.append(row)

    def to_csv(self) -> str:
        lines = [self.HEADER]
        for r in self.rows:
            lines.append(
                f"{r['epoch']},{r['mean_reward']!r},{r['mean_formula_cost']!r},"
                f"{r['mean_gt_cost']!r},{r['lambda']!r},{r['goal_rate']!r}"
            )
        return "\n".join(lines) + "\n"


def discounted_sum(values, gamma: float) -> float:
    total = 0.0
    for v in reversed(list(values)):
        total = v + gamma * total
    return total


def returns_to_go(values, gamma: float) -> np.ndarray:
    out = np.empty(len(values))
    acc = 0.0
    for t in range(len(values) - 1, -1, -1):
        acc = values[t] + gamma * acc
        out[t] = acc
    return out


def _run_episode(
    env: NavEnv,
    policy: Policy,
    formula: DnfFormula | None,
    stats: ConjunctionStats | None,
    rng,
    greedy: bool = False,
) -> EpisodeRecord:
    state = env.reset()
    record = EpisodeRecord([], [], [], [], [], [], False)
    done = False
    while not done:
        phi = np.asarray(state.position, dtype=float)
        if formula is not None and len(formula):
            violated, _ = evaluate(formula, phi, stats)
            c = 1 if violated else 0
        else:
            c = 0
        cell = policy.cell(state.position)
        action = policy.greedy(cell) if greedy else policy.sample(cell, rng)
        record.positions.append(state.position)
        state, reward, gt, done = env.step(state, action)
        record.cells.append(cell)
        record.actions.append(action)
        record.rewards.append(reward)
        record.costs.append(c)
        record.gt_costs.append(gt)
        if env.config.at_goal(state.position):
            record.reached_goal = True
    return record


def rollout(env: NavEnv, policy: Policy, formula, stats, seed):
    """Sample one episode; returns (trajectory, R, C_formula, C_gt).

    The discounted sums use the environment's discount with t starting
    at 0; the formula cost is evaluated on the feature vector of each
    visited state-action pair, accumulating into `stats` when given.
    """
    rng = np.random.default_rng(seed)
    record = _run_episode(env, policy, formula, stats, rng)
    gamma = env.config.gamma
    traj = Trajectory(
        states=np.asarray(record.positions),
        actions=np.asarray([DIRECTIONS[a] for a in record.actions]),
    )
    return (
        traj,
        discounted_sum(record.rewards, gamma),
        discounted_sum(record.costs, gamma),
        discounted_sum(record.gt_costs, gamma),
    )


def batch_advantages(episodes, gamma: float, lam: float):
    """Composite return-to-go minus a per-timestep mean baseline, normalized.

    The baseline at step t is the mean return-to-go of the batch episodes
    still running at t, which removes the within-episode trend that
    otherwise dominates the variance.
    """
    gs = [
        returns_to_go(
            np.asarray(ep.rewards) - lam * np.asarray(ep.costs, dtype=float), gamma
        )
        for ep in episodes
    ]
    horizon = max(len(g) for g in gs)
    sums = np.zeros(horizon)
    counts = np.zeros(horizon)
    for g in gs:
        sums[: len(g)] += g
        counts[: len(g)] += 1
    baseline = sums / counts
    advantages = [g - baseline[: len(g)] for g in gs]
    flat = np.concatenate(advantages)
    scale = flat.std()
    if scale < 1e-8:
        scale = 1.0
    return [a / scale for a in advantages]


def policy_gradient(logits: np.ndarray, episodes, advantages) -> np.ndarray:
    """Likelihood-ratio gradient of the surrogate objective w.r.t. logits."""
    grad = np.zeros_like(logits)
    for ep, adv in zip(episodes, advantages):
        for cell, action, a in zip(ep.cells, ep.actions, adv):
            row = logits[cell]
            z = row - row.max()
            e = np.exp(z)
            p = e / e.sum()
            grad[cell] -= a * p
            grad[cell, action] += a
    return grad / len(episodes)


def surrogate_loss(logits: np.ndarray, episodes, advantages) -> float:
    """Mean advantage-weighted log-likelihood of the sampled actions."""
    total = 0.0
    for ep, adv in zip(episodes, advantages):
        for cell, action, a in zip(ep.cells, ep.actions, adv):
            row = logits[cell]
            z = row - row.max()
            logp = z[action] - np.log(np.exp(z).sum())
            total += a * logp
    return total / len(episodes)


def train(env: NavEnv, formula: DnfFormula | None, config: TrainConfig):
    """Optimize the policy against the formula-derived cost.

    Returns (policy, curves, stats). Violation statistics accumulate over
    every training episode. Deterministic for a fixed config.
    """
    rng = np.random.default_rng(config.seed)
    policy = Policy()
    stats = ConjunctionStats(len(formula)) if formula is not None else ConjunctionStats(0)
    curves = TrainCurves()
    lam = 0.0
    gamma = config.gamma
    for epoch in range(config.epochs):
        episodes = [
            _run_episode(env, policy, formula, stats if formula is not None else None, rng)
            for _ in range(config.episodes_per_epoch)
        ]
        advantages = batch_advantages(episodes, config.adv_gamma, lam)
        grad = policy_gradient(policy.logits, episodes, advantages)
        policy.logits += config.lr_policy * grad
        # Softmax is shift-invariant; recentering keeps the table bounded.
        policy.logits -= policy.logits.mean(axis=1, keepdims=True)
        if np.abs(policy.logits).max() > config.max_abs_logit:
            raise TrainingDiverged(
                f"logit magnitude exceeded {config.max_abs_logit} at epoch {epoch}"
            )
        mean_reward = float(
            np.mean([discounted_sum(ep.rewards, gamma) for ep in episodes])
        )
        mean_cost = float(np.mean([discounted_sum(ep.costs, gamma) for ep in episodes]))
        mean_gt = float(np.mean([discounted_sum(ep.gt_costs, gamma) for ep in episodes]))
        goal_rate = float(np.mean([ep.reached_goal for ep in episodes]))
        curves.append(
            epoch=epoch,
            mean_reward=mean_reward,
            mean_formula_cost=mean_cost,
            mean_gt_cost=mean_gt,
            **{"lambda": lam},
            goal_rate=goal_rate,
        )
        if not config.freeze_lambda:
            lam = max(0.0, lam + config.lr_lambda * (mean_cost - config.budget))
    return policy, curves, stats


def evaluate_policy(env: NavEnv, policy: Policy, formula, n_episodes: int, seed: int = 0):
    """Greedy evaluation; returns (mean reward, mean formula cost,
    mean gt cost, goal rate). No statistics are accumulated."""
    if n_episodes < 1:
        raise DomainError("need at least one evaluation episode")
    rng = np.random.default_rng(seed)
    gamma = env.config.gamma
    rewards, costs, gts, goals = [], [], [], []
    for _ in range(n_episodes):
        record = _run_episode(env, policy, formula, None, rng, greedy=True)
        rewards.append(discounted_sum(record.rewards, gamma))
        costs.append(discounted_sum(record.costs, gamma))
        gts.append(discounted_sum(record.gt_costs, gamma))
        goals.append(record.reached_goal)
    return (
        float(np.mean(rewards)),
        float(np.mean(costs)),
        float(np.mean(gts)),
        float(np.mean(goals)),
    )
