"""Demonstration datasets rolled out from a trajectory distribution."""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..errors import ParseError, ValidationError
from ..lifting import TrajectoryDistribution, dump_distribution, sample_trajectory
from .env import ToyEnv, toy_env_step


@dataclass(frozen=True)
class Transition:
    """One (s, a, r, s', done) tuple; vectors stored as float tuples."""

    state: tuple
    action: tuple
    reward: float
    next_state: tuple
    done: int

    def __post_init__(self):
        s = tuple(float(v) for v in self.state)
        a = tuple(float(v) for v in self.action)
        s2 = tuple(float(v) for v in self.next_state)
        if len(s) != len(s2):
            raise ValidationError("state and next_state must match in size", field="next_state")
        values = s + a + s2 + (float(self.reward),)
        if not all(np.isfinite(values)):
            raise ValidationError("transition entries must be finite", field="transition")
        if self.done not in (0, 1):
            raise ValidationError("done must be 0 or 1", field="done")
        object.__setattr__(self, "state", s)
        object.__setattr__(self, "action", a)
        object.__setattr__(self, "next_state", s2)
        object.__setattr__(self, "reward", float(self.reward))
        object.__setattr__(self, "done", int(self.done))

    def to_dict(self):
        return {
            "s": list(self.state),
            "a": list(self.action),
            "r": self.reward,
            "s2": list(self.next_state),
            "done": self.done,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                state=tuple(d["s"]),
                action=tuple(d["a"]),
                reward=float(d["r"]),
                next_state=tuple(d["s2"]),
                done=int(d["done"]),
            )
        except KeyError as e:
            raise ParseError(f"transition missing field {e.args[0]!r}") from e


@dataclass(frozen=True)
class DemoDataset:
    """Transitions plus the provenance needed to regenerate them."""

    transitions: tuple
    source: dict

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))

    def __len__(self):
        return len(self.transitions)

    def digest(self) -> str:
        h = hashlib.sha256()
        for tr in self.transitions:
            h.update(json.dumps(tr.to_dict(), sort_keys=True).encode("utf-8"))
        return h.hexdigest()

    def arrays(self):
        """Column arrays (s, a, r, s2, done) for vectorized training."""
        s = np.array([tr.state for tr in self.transitions])
        a = np.array([tr.action for tr in self.transitions])
        r = np.array([tr.reward for tr in self.transitions])
        s2 = np.array([tr.next_state for tr in self.transitions])
        done = np.array([tr.done for tr in self.transitions], dtype=float)
        return s, a, r, s2, done


def drop_z(points):
    """Default projection from 3D waypoints to the planar env state."""
    return np.asarray(points, dtype=float)[..., :2]


def build_demo_dataset(
    dist: TrajectoryDistribution, env: ToyEnv, n_rollouts: int, rng, project=drop_z
) -> DemoDataset:
    """Roll sampled trajectories through the env dynamics.

    Each rollout contributes H-1 transitions: the action is the clamped
    state difference between consecutive projected waypoints, and
    reward/done come from the env at the resulting state. Rollouts are
    not truncated at goal arrival, so the count is exact.
    """
    if n_rollouts < 1:
        raise ValidationError("n_rollouts must be >= 1", field="n_rollouts")
    if dist.horizon < 2:
        raise ValidationError("distribution horizon must be >= 2", field="dist")
    if dist.horizon > env.horizon:
        raise ValidationError(
            f"distribution horizon {dist.horizon} exceeds env horizon {env.horizon}",
            field="dist",
        )
    seed = None
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    transitions = []
    clamped = 0
    for _ in range(n_rollouts):
        waypoints = project(sample_trajectory(dist, rng))
        states = np.clip(waypoints, -env.bound, env.bound)
        for t in range(dist.horizon - 1):
            raw_action = states[t + 1] - states[t]
            action = np.clip(raw_action, -env.a_max, env.a_max)
            if np.any(np.abs(raw_action) > env.a_max):
                clamped += 1
            next_state, reward, done = toy_env_step(env, states[t], action)
            transitions.append(
                Transition(
                    state=tuple(states[t]),
                    action=tuple(action),
                    reward=reward,
                    next_state=tuple(next_state),
                    done=int(done),
                )
            )
    source = {
        "n_rollouts": int(n_rollouts),
        "distribution_digest": hashlib.sha256(dump_distribution(dist)).hexdigest(),
        "clamped_actions": clamped,
        "seed": seed,
        "env": {
            "goal": list(env.goal),
            "goal_radius": env.goal_radius,
            "horizon": env.horizon,
            "a_max": env.a_max,
        },
    }
    return DemoDataset(transitions=tuple(transitions), source=source)


def dump_demo_dataset(data: DemoDataset) -> bytes:
    """JSON lines: a metadata header line, then one transition per line."""
    lines = [json.dumps({"__meta__": data.source}, sort_keys=True)]
    lines.extend(json.dumps(tr.to_dict(), sort_keys=True) for tr in data.transitions)
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_demo_dataset(data) -> DemoDataset:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    source = {}
    transitions = []
    for i, line in enumerate(data.splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"dataset line {i + 1} malformed: {e.msg}", offset=e.pos) from e
        if "__meta__" in doc:
            source = dict(doc["__meta__"])
        else:
            transitions.append(Transition.from_dict(doc))
    if not transitions:
        raise ParseError("dataset holds no transitions")
    return DemoDataset(transitions=tuple(transitions), source=source)
