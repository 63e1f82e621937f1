"""Two-dimensional navigation task with a hidden constraint region.

The agent starts in the lower-left corner and must reach the upper-right
goal. A rectangular region blocking the direct route carries a ground-truth
cost that is hidden from the learner and used only for evaluation. A
scripted expert demonstrates the safe route: east along the bottom
corridor, then north up the right-hand column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import DomainError
from .features import Trajectory

# Unit step directions, counter-clockwise from east.
DIRECTIONS = np.array(
    [
        [1.0, 0.0],  # E
        [1.0, 1.0],  # NE
        [0.0, 1.0],  # N
        [-1.0, 1.0],  # NW
        [-1.0, 0.0],  # W
        [-1.0, -1.0],  # SW
        [0.0, -1.0],  # S
        [1.0, -1.0],  # SE
    ]
)
DIRECTIONS = DIRECTIONS / np.linalg.norm(DIRECTIONS, axis=1, keepdims=True)
N_ACTIONS = len(DIRECTIONS)


@dataclass(frozen=True)
class NavConfig:
    start: tuple[float, float] = (0.1, 0.1)
    goal: tuple[float, float] = (0.9, 0.9)
    goal_radius: float = 0.05
    step_size: float = 0.05
    max_steps: int = 200
    # Constraint region: open in x, open below / closed above in y.
    obstacle_x: tuple[float, float] = (0.1, 0.7)
    obstacle_y: tuple[float, float] = (0.3, 1.0)
    gamma: float = 0.99

    def __post_init__(self):
        if self.step_size <= 0:
            raise DomainError("step_size must be positive")
        if self.in_obstacle(self.start) or self.in_obstacle(self.goal):
            raise DomainError("start and goal must lie outside the obstacle")

    def in_obstacle(self, position) -> bool:
        x, y = float(position[0]), float(position[1])
        return (
            self.obstacle_x[0] < x < self.obstacle_x[1]
            and self.obstacle_y[0] < y <= self.obstacle_y[1]
        )

    def at_goal(self, position) -> bool:
        return math.dist(position, self.goal) <= self.goal_radius


@dataclass(frozen=True)
class NavState:
    position: tuple[float, float]
    steps_taken: int = 0


class NavEnv:
    """Deterministic dynamics; episodes end at the goal or after max_steps."""

    def __init__(self, config: NavConfig | None = None):
        self.config = config or NavConfig()

    def reset(self, seed=None) -> NavState:
        # The initial state distribution is degenerate; the seed is accepted
        # for interface symmetry only.
        return NavState(position=tuple(self.config.start), steps_taken=0)

    def step(self, state: NavState, action: int):
        """Apply one of the 8 compass moves.

        Returns (next_state, reward, gt_cost, done). Reward is the negative
        Euclidean distance to the goal plus a +10 bonus on arrival; gt_cost
        is 1 exactly when the new position is inside the obstacle.
        """
        cfg = self.config
        if state.steps_taken >= cfg.max_steps or cfg.at_goal(state.position):
            raise DomainError("stepping a finished episode")
        if not (0 <= action < N_ACTIONS):
            raise DomainError(f"action must be in [0, {N_ACTIONS})")
        pos = np.asarray(state.position, dtype=float) + cfg.step_size * DIRECTIONS[action]
        pos = np.clip(pos, 0.0, 1.0)
        new_pos = (float(pos[0]), float(pos[1]))
        reached = cfg.at_goal(new_pos)
        reward = -math.dist(new_pos, cfg.goal) + (10.0 if reached else 0.0)
        gt_cost = 1 if cfg.in_obstacle(new_pos) else 0
        steps = state.steps_taken + 1
        done = reached or steps >= cfg.max_steps
        return NavState(position=new_pos, steps_taken=steps), reward, gt_cost, done


# --- scripted expert -------------------------------------------------------

# Safe boxes the demonstrations stay inside: the bottom corridor and the
# right-hand column flanking the obstacle.
CORRIDOR_BOX = ((0.1, 0.1), (0.7, 0.3))
COLUMN_BOX = ((0.7, 0.1), (0.9, 0.9))

# Generator shape constants, chosen so the demonstration cloud has a clear
# density valley near x = 0.7 (corridor/column handoff) and near y = 0.3
# (top of the corridor): the corridor walk stops short of the column band
# and the column is denser per unit width than it is wide. The first steps
# ramp away from the start so its mass blends into the corridor noise.
_CORRIDOR_STEPS = 20  # includes the start state
_CORRIDOR_X_END = 0.67
_RAMP_STEPS = 5
_COLUMN_BAND = (0.716, 0.9)
_COLUMN_CENTER = 0.8
_CLIMB_POINTS = 3
_CORRIDOR_Y = 0.2


def _reflect(values, lo, hi):
    """Fold values into [lo, hi] by mirroring at the edges."""
    width = hi - lo
    t = np.mod(np.asarray(values, dtype=float) - lo, 2.0 * width)
    return lo + np.where(t <= width, t, 2.0 * width - t)


def _stratified_normal(rng, n: int) -> np.ndarray:
    """Standard-normal draws with stratified quantiles (low sampling noise)."""
    p = (rng.permutation(n) + 0.5) / n
    return ndtri(p)


def _stratified_uniform(rng, n: int) -> np.ndarray:
    return (rng.permutation(n) + rng.random(n)) / n


def generate_expert(n: int, noise: float = 0.05, seed: int = 0) -> list[Trajectory]:
    """Scripted demonstrations of the safe route.

    Each trajectory walks east along the corridor at y ~ 0.2 with Gaussian
    lateral offsets folded into the corridor box, hops to the column band,
    and climbs north toward the goal with lateral offsets folded into the
    column box. Offsets are quantile-stratified across the whole batch so
    the aggregate feature density is smooth. noise=0 yields identical
    trajectories.
    """
    if n < 1:
        raise DomainError("need at least one trajectory")
    if noise < 0:
        raise DomainError("noise must be non-negative")
    rng = np.random.default_rng(seed)

    corridor_z = _stratified_normal(rng, n * _CORRIDOR_STEPS).reshape(n, _CORRIDOR_STEPS)
    column_z = _stratified_normal(rng, n * (_CLIMB_POINTS + 1)).reshape(n, _CLIMB_POINTS + 1)
    if noise > 0:
        climb_u = np.stack(
            [_stratified_uniform(rng, n) for _ in range(_CLIMB_POINTS)], axis=1
        )
    else:
        climb_u = np.full((n, _CLIMB_POINTS), 0.5)

    east = DIRECTIONS[0]
    north = DIRECTIONS[2]
    xs = np.linspace(0.1, _CORRIDOR_X_END, _CORRIDOR_STEPS)
    (start_x, start_y), (_, cor_top) = CORRIDOR_BOX

    trajectories = []
    for i in range(n):
        states = []
        actions = []
        ys = _reflect(_CORRIDOR_Y + noise * corridor_z[i], start_y, cor_top)
        # Departure ramp: trajectories leave the common start state and
        # blend into the corridor noise band over the first few steps.
        for k in range(min(_RAMP_STEPS, _CORRIDOR_STEPS)):
            ys[k] = start_y + (ys[k] - start_y) * (k / _RAMP_STEPS)
        for k in range(_CORRIDOR_STEPS):
            states.append((xs[k], ys[k]))
            actions.append(east)
        y0 = ys[-1]
        col_x = _reflect(
            _COLUMN_CENTER + noise * column_z[i], _COLUMN_BAND[0], _COLUMN_BAND[1]
        )
        states.append((col_x[0], y0))
        actions.append(north)
        fractions = (np.arange(_CLIMB_POINTS) + climb_u[i]) / _CLIMB_POINTS
        for j in range(_CLIMB_POINTS):
            states.append((col_x[j + 1], y0 + (0.9 - y0) * fractions[j]))
            actions.append(north)
        trajectories.append(
            Trajectory(states=np.asarray(states), actions=np.asarray(actions))
        )
    return trajectories


# --- SVG scene export ------------------------------------------------------

def scene_svg(
    config: NavConfig,
    boxes=(),
    trajectories=(),
    size: int = 500,
) -> str:
    """Render the world, obstacle, safe boxes, and trajectories as SVG.

    Output bytes are deterministic for fixed inputs.
    """
    def sx(v: float) -> str:
        return f"{v * size:.2f}"

    def sy(v: float) -> str:
        return f"{(1.0 - v) * size:.2f}"

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect class="world" x="0" y="0" width="{size}" height="{size}" '
        'fill="white" stroke="black" stroke-width="2"/>',
    ]
    ox, oy = config.obstacle_x, config.obstacle_y
    lines.append(
        f'<rect class="obstacle" x="{sx(ox[0])}" y="{sy(oy[1])}" '
        f'width="{float(ox[1] - ox[0]) * size:.2f}" '
        f'height="{float(oy[1] - oy[0]) * size:.2f}" '
        'fill="#d62728" fill-opacity="0.35" stroke="#d62728"/>'
    )
    for lo, hi in boxes:
        lines.append(
            f'<rect class="leaf" x="{sx(float(lo[0]))}" y="{sy(float(hi[1]))}" '
            f'width="{(float(hi[0]) - float(lo[0])) * size:.2f}" '
            f'height="{(float(hi[1]) - float(lo[1])) * size:.2f}" '
            'fill="none" stroke="#1f77b4" stroke-width="1.5"/>'
        )
    for traj in trajectories:
        pts = " ".join(f"{sx(s[0])},{sy(s[1])}" for s in traj.states)
        lines.append(
            f'<polyline class="trajectory" points="{pts}" '
            'fill="none" stroke="#2ca02c" stroke-width="1"/>'
        )
    sxg, syg = sx(config.goal[0]), sy(config.goal[1])
    lines.append(
        f'<circle class="goal" cx="{sxg}" cy="{syg}" '
        f'r="{config.goal_radius * size:.2f}" fill="none" stroke="black"/>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
