"""TD3 with a behavior-cloning anchor, trained against the toy env.

The actor loss is lam * E[(pi(s) - a)^2] - (1 - lam) * E[Q1(s, pi(s))],
with the BC expectation taken over the demonstration half of each batch
and the value expectation over the whole batch. Demonstrations are held
in a separate read-only segment of the replay buffer, so they are
retained verbatim for the entire run.
"""

import csv
import io
import json
from dataclasses import dataclass, field, fields

import numpy as np

from ..errors import ParseError, TrainingDivergedError, ValidationError
from .dataset import DemoDataset
from .env import ToyEnv, evaluate_policy, toy_env_reset, toy_env_step
from .nets import Adam, CriticNet, MLP, PolicyNet, polyak_update

CURVE_COLUMNS = ("step", "success_rate", "actor_loss", "critic_loss")


@dataclass(frozen=True)
class TD3BCConfig:
    """Training knobs; lam balances imitation against value improvement."""

    lam: float = 0.4
    gamma: float = 0.99
    policy_delay: int = 2
    target_noise: float = 0.02
    noise_clip: float = 0.05
    batch_size: int = 128
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    total_steps: int = 40000
    seed: int = 0
    tau: float = 0.005
    expl_noise: float = 0.01
    start_timesteps: int = 1000
    demo_fraction: float = 0.5
    eval_every: int = 2000
    eval_episodes: int = 20
    bc_epochs: int = 200
    buffer_size: int = 100000
    hidden: tuple = (64, 64)

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise ValidationError("lam must be in [0, 1]", field="lam")
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError("gamma must be in (0, 1]", field="gamma")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValidationError("learning rates must be positive", field="lr")
        if self.policy_delay < 1:
            raise ValidationError("policy_delay must be >= 1", field="policy_delay")
        if self.batch_size < 2:
            raise ValidationError("batch_size must be >= 2", field="batch_size")
        if self.total_steps < 0:
            raise ValidationError("total_steps must be >= 0", field="total_steps")
        if not (0.0 <= self.demo_fraction <= 1.0):
            raise ValidationError("demo_fraction must be in [0, 1]", field="demo_fraction")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ValidationError("eval cadence must be positive", field="eval")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def to_dict(self):
        d = {}
        for f in fields(self):
            value = getattr(self, f.name)
            key = "lambda" if f.name == "lam" else f.name
            d[key] = list(value) if isinstance(value, tuple) else value
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}", field="config")
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


class ReplayBuffer:
    """Demo segment (immutable) plus a ring buffer of online experience."""

    def __init__(self, state_dim, action_dim, capacity, demo: DemoDataset = None):
        self.capacity = int(capacity)
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity)
        self.idx = 0
        self.size = 0
        if demo is not None and len(demo) > 0:
            ds, da, dr, ds2, ddone = demo.arrays()
            for arr in (ds, da, dr, ds2, ddone):
                arr.setflags(write=False)
            self.demo = (ds, da, dr, ds2, ddone)
            self.demo_digest = demo.digest()
            self._demo_dataset = demo
        else:
            self.demo = None
            self.demo_digest = None
            self._demo_dataset = None

    @property
    def n_demo(self):
        return 0 if self.demo is None else self.demo[0].shape[0]

    def current_demo_digest(self):
        """Recomputed from the stored arrays; must never drift."""
        if self._demo_dataset is None:
            return None
        return self._demo_dataset.digest()

    def add(self, s, a, r, s2, done):
        i = self.idx
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.done[i] = done
        self.idx = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_mixed(self, n, demo_fraction, rng):
        """Batch of n transitions; the demo share carries bc_mask=True."""
        n_demo = int(round(n * demo_fraction)) if self.demo is not None else 0
        n_demo = min(n_demo, n)
        n_live = n - n_demo
        if self.size == 0:
            n_demo, n_live = n, 0
            if self.demo is None:
                raise ValidationError("buffer is empty", field="buffer")
        parts = []
        mask = np.zeros(n_demo + n_live, dtype=bool)
        if n_demo > 0:
            di = rng.integers(0, self.n_demo, n_demo)
            ds, da, dr, ds2, ddone = self.demo
            parts.append((ds[di], da[di], dr[di], ds2[di], ddone[di]))
            mask[:n_demo] = True
        if n_live > 0:
            li = rng.integers(0, self.size, n_live)
            parts.append((self.s[li], self.a[li], self.r[li], self.s2[li], self.done[li]))
        if len(parts) == 1:
            cols = list(parts[0])
        else:
            cols = [np.concatenate(piece, axis=0) for piece in zip(*parts)]
        return {
            "s": cols[0],
            "a": cols[1],
            "r": cols[2],
            "s2": cols[3],
            "done": cols[4],
            "bc_mask": mask,
        }


def as_batch(batch):
    """Accept a column dict or a list of Transitions."""
    if isinstance(batch, dict):
        return batch
    if not batch:
        raise ValidationError("batch must be nonempty", field="batch")
    return {
        "s": np.array([tr.state for tr in batch]),
        "a": np.array([tr.action for tr in batch]),
        "r": np.array([tr.reward for tr in batch]),
        "s2": np.array([tr.next_state for tr in batch]),
        "done": np.array([tr.done for tr in batch], dtype=float),
        "bc_mask": np.ones(len(batch), dtype=bool),
    }


def actor_loss(policy: PolicyNet, critic: CriticNet, batch, lam, bc_mask=None):
    """The TD3+BC actor objective and its gradient wrt policy parameters.

    lam = 1 reduces to the batch-mean BC squared error over the masked
    subset exactly; lam = 0 reduces to -mean Q1(s, pi(s)) exactly.
    """
    if not (0.0 <= lam <= 1.0):
        raise ValidationError("lam must be in [0, 1]", field="lam")
    batch = as_batch(batch)
    states = np.asarray(batch["s"], dtype=float)
    actions = np.asarray(batch["a"], dtype=float)
    n = states.shape[0]
    if bc_mask is None:
        bc_mask = np.ones(n, dtype=bool)
    else:
        bc_mask = np.asarray(bc_mask, dtype=bool)
    pi, cache = policy.forward(states, want_cache=True)
    d_pi = np.zeros_like(pi)
    n_bc = int(bc_mask.sum())
    bc_term = 0.0
    if lam > 0.0 and n_bc > 0:
        diff = pi[bc_mask] - actions[bc_mask]
        bc_term = float((diff * diff).sum() / n_bc)
        d_pi[bc_mask] += lam * 2.0 * diff / n_bc
    q_term = 0.0
    if lam < 1.0:
        x = np.concatenate([states, pi], axis=1)
        q1, q_cache = critic.q1.forward(x, want_cache=True)
        q_term = float(q1.mean())
        d_q = np.full((n, 1), -(1.0 - lam) / n)
        _, d_x = critic.q1.backward(q_cache, d_q)
        d_pi += d_x[:, states.shape[1] :]
    loss = lam * bc_term - (1.0 - lam) * q_term
    grad, _ = policy.backward(cache, d_pi)
    return float(loss), grad


def critic_target_values(policy_target: PolicyNet, critic_target: CriticNet, batch, config, rng):
    """Bootstrap targets y = r + gamma * (1 - done) * min(Q1', Q2')(s', a').

    a' is the target policy's action under clipped Gaussian smoothing
    noise, clamped back into the action range. done = 1 rows reduce to
    y = r exactly.
    """
    batch = as_batch(batch)
    s2 = np.asarray(batch["s2"], dtype=float)
    a2 = policy_target.forward(s2)
    if config.target_noise > 0:
        noise = np.clip(
            rng.normal(0.0, config.target_noise, a2.shape),
            -config.noise_clip,
            config.noise_clip,
        )
        a2 = np.clip(a2 + noise, -policy_target.a_max, policy_target.a_max)
    q1t, q2t = critic_target.both(s2, a2)
    q_min = np.minimum(q1t, q2t)[:, 0]
    return batch["r"] + config.gamma * (1.0 - batch["done"]) * q_min


def critic_loss_and_grads(critic: CriticNet, batch, y):
    """Sum of both critics' mean squared TD errors, with gradients."""
    batch = as_batch(batch)
    states = np.asarray(batch["s"], dtype=float)
    actions = np.asarray(batch["a"], dtype=float)
    n = states.shape[0]
    x = np.concatenate([states, actions], axis=1)
    q1, c1 = critic.q1.forward(x, want_cache=True)
    q2, c2 = critic.q2.forward(x, want_cache=True)
    e1 = q1[:, 0] - y
    e2 = q2[:, 0] - y
    loss = float((e1 * e1).mean() + (e2 * e2).mean())
    g1, _ = critic.q1.backward(c1, (2.0 / n) * e1[:, None])
    g2, _ = critic.q2.backward(c2, (2.0 / n) * e2[:, None])
    return loss, g1, g2


def critic_update(critic, critic_target, policy_target, batch, config, rng, optimizers):
    """One TD step for both critics; targets move elsewhere (Polyak)."""
    y = critic_target_values(policy_target, critic_target, batch, config, rng)
    loss, g1, g2 = critic_loss_and_grads(critic, batch, y)
    opt1, opt2 = optimizers
    opt1.step(critic.q1.theta, g1)
    opt2.step(critic.q2.theta, g2)
    return loss


def bc_pretrain(policy: PolicyNet, data: DemoDataset, epochs: int, rng, lr=1e-3, batch_size=256, loss_log=None):
    """Clone demonstration actions by minibatch Adam on squared error.

    epochs = 0 returns the policy bit-exactly unchanged. loss_log, when
    given, receives the mean training loss of each epoch.
    """
    if len(data) == 0:
        raise ValidationError("dataset must be nonempty", field="data")
    if epochs < 0:
        raise ValidationError("epochs must be >= 0", field="epochs")
    if epochs == 0:
        return policy
    s, a, _, _, _ = data.arrays()
    n = s.shape[0]
    batch_size = min(batch_size, n)
    opt = Adam(policy.n_params, lr)
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, batch_size):
            sel = order[lo : lo + batch_size]
            pi, cache = policy.forward(s[sel], want_cache=True)
            diff = pi - a[sel]
            loss = float((diff * diff).sum() / sel.shape[0])
            d_pi = 2.0 * diff / sel.shape[0]
            grad, _ = policy.backward(cache, d_pi)
            opt.step(policy.theta, grad)
            epoch_loss += loss
            n_batches += 1
        if loss_log is not None:
            loss_log.append(epoch_loss / n_batches)
    return policy


def bc_dataset_loss(policy: PolicyNet, data: DemoDataset) -> float:
    """Mean squared action error of the policy over the whole dataset."""
    s, a, _, _, _ = data.arrays()
    diff = policy.forward(s) - a
    return float((diff * diff).sum() / s.shape[0])


@dataclass
class TrainResult:
    policy: PolicyNet
    critic: CriticNet
    curve: list
    config: TD3BCConfig


def _eval_rng(seed, k):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7777, k)))


def _check_finite(step, *nets):
    for net in nets:
        if not np.isfinite(net.theta).all():
            raise TrainingDivergedError(
                f"non-finite parameters detected at step {step}", step=step
            )


def td3bc_train(env: ToyEnv, demo, config: TD3BCConfig) -> TrainResult:
    """Full training run; deterministic for a fixed config and seed.

    demo may be None (from-scratch arm): the buffer starts empty, the
    first start_timesteps actions are uniform random, and no BC term is
    applied regardless of lam's masked batch (the mask is empty).
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    have_demo = demo is not None and len(demo) > 0
    policy = PolicyNet(env.state_dim, env.action_dim, env.a_max, hidden=config.hidden, rng=rng)
    critic = CriticNet(env.state_dim, env.action_dim, hidden=config.hidden, rng=rng)
    if have_demo and config.bc_epochs > 0:
        bc_pretrain(policy, demo, config.bc_epochs, rng, lr=config.actor_lr)
    policy_target = policy.copy()
    critic_target = critic.copy()
    opt_actor = Adam(policy.n_params, config.actor_lr)
    opt_critics = (Adam(critic.q1.n_params, config.critic_lr), Adam(critic.q2.n_params, config.critic_lr))
    buffer = ReplayBuffer(env.state_dim, env.action_dim, config.buffer_size, demo if have_demo else None)
    curve = []
    eval_index = 0
    rate = evaluate_policy(policy, env, config.eval_episodes, _eval_rng(config.seed, eval_index))
    curve.append({"step": 0, "success_rate": rate, "actor_loss": 0.0, "critic_loss": 0.0})
    state = toy_env_reset(env, rng)
    episode_t = 0
    last_actor_loss = 0.0
    last_critic_loss = 0.0
    demo_fraction = config.demo_fraction if have_demo else 0.0
    for step in range(1, config.total_steps + 1):
        if not have_demo and step <= config.start_timesteps:
            action = rng.uniform(-env.a_max, env.a_max, env.action_dim)
        else:
            noise = rng.normal(0.0, config.expl_noise, env.action_dim)
            action = np.clip(policy.act(state) + noise, -env.a_max, env.a_max)
        next_state, reward, done = toy_env_step(env, state, action)
        buffer.add(state, action, reward, next_state, float(done))
        episode_t += 1
        if done or episode_t >= env.horizon:
            state = toy_env_reset(env, rng)
            episode_t = 0
        else:
            state = next_state
        if buffer.size + buffer.n_demo >= config.batch_size:
            batch = buffer.sample_mixed(config.batch_size, demo_fraction, rng)
            last_critic_loss = critic_update(
                critic, critic_target, policy_target, batch, config, rng, opt_critics
            )
            if step % config.policy_delay == 0:
                mask = batch["bc_mask"] if have_demo else np.zeros(config.batch_size, dtype=bool)
                last_actor_loss, grad = actor_loss(policy, critic, batch, config.lam, mask)
                opt_actor.step(policy.theta, grad)
            polyak_update(policy_target, policy, config.tau)
            polyak_update(critic_target.q1, critic.q1, config.tau)
            polyak_update(critic_target.q2, critic.q2, config.tau)
            if step % 64 == 0:
                _check_finite(step, policy, critic.q1, critic.q2)
        if step % config.eval_every == 0:
            eval_index += 1
            rate = evaluate_policy(policy, env, config.eval_episodes, _eval_rng(config.seed, eval_index))
            curve.append(
                {
                    "step": step,
                    "success_rate": rate,
                    "actor_loss": last_actor_loss,
                    "critic_loss": last_critic_loss,
                }
            )
    _check_finite(config.total_steps, policy, critic.q1, critic.q2)
    return TrainResult(policy=policy, critic=critic, curve=curve, config=config)


def curve_to_csv(curve) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    for row in curve:
        writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in CURVE_COLUMNS])
    return buf.getvalue().encode("utf-8")


def parse_curve_csv(data) -> list:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("curve CSV is empty") from None
    if tuple(header) != CURVE_COLUMNS:
        raise ParseError(f"curve CSV header {header} unexpected")
    rows = []
    for line in reader:
        if not line:
            continue
        step, rate, a_loss, c_loss = line
        rows.append(
            {
                "step": int(step),
                "success_rate": float(rate),
                "actor_loss": float(a_loss),
                "critic_loss": float(c_loss),
            }
        )
    return rows


def dump_config(config: TD3BCConfig) -> bytes:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True).encode("utf-8")


def parse_config(data) -> TD3BCConfig:
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"config JSON malformed: {e.msg}", offset=e.pos) from e
    return TD3BCConfig.from_dict(data)
