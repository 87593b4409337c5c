"""Planar sparse-reward reach task used to exercise the training stage.

Pure-function dynamics: the env object is just parameters, state is
passed explicitly, and everything broadcasts over a batch axis so
evaluation can roll many episodes at once. Reward is terminal binary
with no shaping, which is what makes demo initialization matter.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class ToyEnv:
    goal: tuple = (0.0, 0.0)
    goal_radius: float = 0.05
    horizon: int = 50
    a_max: float = 0.1
    bound: float = 1.0
    start_center: tuple = (-0.5, 0.0)
    start_halfwidth: float = 0.1

    def __post_init__(self):
        if self.goal_radius <= 0 or self.a_max <= 0 or self.bound <= 0:
            raise ValidationError("radii and bounds must be positive", field="env")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1", field="horizon")
        object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))
        object.__setattr__(self, "start_center", tuple(float(v) for v in self.start_center))

    @property
    def state_dim(self):
        return 2

    @property
    def action_dim(self):
        return 2


def toy_env_step(env: ToyEnv, state, action):
    """One dynamics step; broadcasts over leading batch axes.

    Returns (next_state, reward, done). done marks goal arrival; the
    horizon cutoff is the rollout loop's job since the step function
    carries no clock.
    """
    state = np.asarray(state, dtype=float)
    action = np.asarray(action, dtype=float)
    if not np.all(np.isfinite(action)):
        raise ValidationError("action must be finite", field="action")
    clipped = np.clip(action, -env.a_max, env.a_max)
    next_state = np.clip(state + clipped, -env.bound, env.bound)
    gap = np.linalg.norm(next_state - np.asarray(env.goal), axis=-1)
    done = gap <= env.goal_radius
    reward = done.astype(float)
    if next_state.ndim == 1:
        return next_state, float(reward), bool(done)
    return next_state, reward, done


def toy_env_reset(env: ToyEnv, rng, n=None):
    """Uniform start in the start box, clipped into bounds."""
    size = (2,) if n is None else (int(n), 2)
    center = np.asarray(env.start_center)
    offsets = rng.uniform(-env.start_halfwidth, env.start_halfwidth, size=size)
    return np.clip(center + offsets, -env.bound, env.bound)


def rollout_success(env: ToyEnv, policy, states) -> np.ndarray:
    """Greedy rollouts from given starts; boolean success per episode."""
    states = np.asarray(states, dtype=float)
    n = states.shape[0]
    success = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    for _ in range(env.horizon):
        if not active.any():
            break
        actions = policy.act(states)
        states, _, done = toy_env_step(env, states, actions)
        success |= active & done
        active &= ~done
    return success


def evaluate_policy(policy, env: ToyEnv, n_episodes: int, rng) -> float:
    """Fraction of greedy episodes that reach the goal."""
    if n_episodes < 1:
        raise ValidationError("n_episodes must be >= 1", field="n_episodes")
    starts = toy_env_reset(env, rng, n=n_episodes)
    return float(rollout_success(env, policy, starts).mean())
