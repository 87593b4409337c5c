"""Small fully-connected nets with hand-derived backprop.

No autodiff: the architecture is fixed (tanh hidden layers, linear or
scaled-tanh head), so the backward pass is written out and checked
against central finite differences in the test suite.

Parameters live in one flat float64 vector; per-layer weight matrices
are reshaped views into it. Optimizer steps and Polyak averaging are
then single whole-vector operations, which is what keeps the training
loop fast enough in pure numpy.
"""

import json
import struct

import numpy as np

from ..errors import ParseError, ValidationError

CHECKPOINT_MAGIC = b"SMN1"


class MLP:
    """Fully-connected net: tanh hidden layers, configurable head.

    head "linear": y = z. head "tanh": y = out_scale * tanh(z), which
    bounds the output to (-out_scale, out_scale) by construction.
    """

    def __init__(self, sizes, head="linear", out_scale=1.0, rng=None, theta=None):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValidationError("sizes must list >= 2 positive layer widths", field="sizes")
        if head not in ("linear", "tanh"):
            raise ValidationError("head must be 'linear' or 'tanh'", field="head")
        self.sizes = sizes
        self.head = head
        self.out_scale = float(out_scale)
        self.n_params = sum((m + 1) * n for m, n in zip(sizes[:-1], sizes[1:]))
        if theta is not None:
            theta = np.asarray(theta, dtype=float).reshape(-1).copy()
            if theta.shape[0] != self.n_params:
                raise ValidationError(
                    f"theta has {theta.shape[0]} values, net needs {self.n_params}",
                    field="theta",
                )
            self.theta = theta
        else:
            self.theta = np.zeros(self.n_params)
            if rng is None:
                rng = np.random.default_rng(0)
            offset = 0
            for m, n in zip(sizes[:-1], sizes[1:]):
                bound = 1.0 / np.sqrt(m)
                self.theta[offset : offset + m * n] = rng.uniform(-bound, bound, m * n)
                offset += m * n + n  # biases stay zero
        self._bind_views()

    def _bind_views(self):
        self.weights = []
        self.biases = []
        offset = 0
        for m, n in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(self.theta[offset : offset + m * n].reshape(m, n))
            offset += m * n
            self.biases.append(self.theta[offset : offset + n])
            offset += n

    def set_theta(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape[0] != self.n_params:
            raise ValidationError("theta length mismatch", field="theta")
        self.theta[:] = theta

    def copy(self):
        return MLP(self.sizes, head=self.head, out_scale=self.out_scale, theta=self.theta)

    def forward(self, x, want_cache=False):
        """x: (B, in). Returns (B, out), plus the activation cache if asked."""
        a = np.asarray(x, dtype=float)
        squeeze = a.ndim == 1
        if squeeze:
            a = a[None, :]
        acts = [a]
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            if i < last:
                a = np.tanh(z)
            elif self.head == "tanh":
                a = self.out_scale * np.tanh(z)
            else:
                a = z
            acts.append(a)
        out = a[0] if squeeze else a
        if want_cache:
            return out, acts
        return out

    def backward(self, acts, grad_out, grad_theta=None):
        """Backprop grad_out (B, out) through the cached forward pass.

        Returns (grad wrt theta, grad wrt input). grad_theta may be a
        preallocated vector to write into.
        """
        if grad_theta is None:
            grad_theta = np.empty(self.n_params)
        d = np.asarray(grad_out, dtype=float)
        if d.ndim == 1:
            d = d[None, :]
        last = len(self.weights) - 1
        if self.head == "tanh":
            t = acts[-1] / self.out_scale
            d = d * self.out_scale * (1.0 - t * t)
        offset = self.n_params
        for i in range(last, -1, -1):
            W = self.weights[i]
            a_in = acts[i]
            if i < last:
                a_out = acts[i + 1]
                d = d * (1.0 - a_out * a_out)
            n = W.shape[1]
            offset -= n
            grad_theta[offset : offset + n] = d.sum(axis=0)
            offset -= W.size
            grad_theta[offset : offset + W.size] = (a_in.T @ d).reshape(-1)
            d = d @ W.T
        return grad_theta, d


class PolicyNet(MLP):
    """Action head bounded to (-a_max, a_max) per dimension."""

    def __init__(self, state_dim, action_dim, a_max, hidden=(64, 64), rng=None, theta=None):
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.a_max = float(a_max)
        super().__init__(
            (state_dim, *hidden, action_dim), head="tanh", out_scale=a_max, rng=rng, theta=theta
        )

    def act(self, states):
        return self.forward(states)

    def copy(self):
        hidden = self.sizes[1:-1]
        return PolicyNet(
            self.state_dim, self.action_dim, self.a_max, hidden=hidden, theta=self.theta
        )


class CriticNet:
    """Twin state-action value nets Q1, Q2 sharing nothing but shape."""

    def __init__(self, state_dim, action_dim, hidden=(64, 64), rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        in_dim = int(state_dim) + int(action_dim)
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.q1 = MLP((in_dim, *hidden, 1), head="linear", rng=rng)
        self.q2 = MLP((in_dim, *hidden, 1), head="linear", rng=rng)

    def copy(self):
        other = CriticNet.__new__(CriticNet)
        other.state_dim = self.state_dim
        other.action_dim = self.action_dim
        other.q1 = self.q1.copy()
        other.q2 = self.q2.copy()
        return other

    def both(self, states, actions):
        x = np.concatenate([states, actions], axis=1)
        return self.q1.forward(x), self.q2.forward(x)


class Adam:
    """Standard Adam over one flat parameter vector, updated in place."""

    def __init__(self, n_params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValidationError("learning rate must be positive", field="lr")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m += (1.0 - self.beta1) * (grad - self.m)
        self.v += (1.0 - self.beta2) * (grad * grad - self.v)
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def polyak_update(target: MLP, source: MLP, tau: float):
    """target <- tau * source + (1 - tau) * target, in place."""
    target.theta *= 1.0 - tau
    target.theta += tau * source.theta


def dump_net(net) -> bytes:
    """Versioned binary checkpoint: magic, JSON header, float64 payload."""
    if isinstance(net, PolicyNet):
        header = {
            "kind": "policy",
            "sizes": list(net.sizes),
            "a_max": net.a_max,
            "state_dim": net.state_dim,
            "action_dim": net.action_dim,
        }
        payload = net.theta
    elif isinstance(net, CriticNet):
        header = {
            "kind": "critic",
            "sizes": list(net.q1.sizes),
            "state_dim": net.state_dim,
            "action_dim": net.action_dim,
        }
        payload = np.concatenate([net.q1.theta, net.q2.theta])
    elif isinstance(net, MLP):
        header = {"kind": "mlp", "sizes": list(net.sizes), "head": net.head, "out_scale": net.out_scale}
        payload = net.theta
    else:
        raise ValidationError(f"cannot checkpoint {type(net).__name__}", field="net")
    head_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return CHECKPOINT_MAGIC + struct.pack("<I", len(head_bytes)) + head_bytes + payload.tobytes()


def parse_net(data: bytes):
    if not isinstance(data, (bytes, bytearray)) or len(data) < 8:
        raise ParseError("checkpoint too short")
    if bytes(data[:4]) != CHECKPOINT_MAGIC:
        raise ParseError("checkpoint magic mismatch")
    (head_len,) = struct.unpack("<I", data[4:8])
    if len(data) < 8 + head_len:
        raise ParseError("checkpoint header truncated")
    try:
        header = json.loads(data[8 : 8 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"checkpoint header malformed: {e}") from e
    payload = np.frombuffer(data[8 + head_len :], dtype=np.float64)
    kind = header.get("kind")
    sizes = header.get("sizes", [])
    if kind == "policy":
        net = PolicyNet(
            header["state_dim"],
            header["action_dim"],
            header["a_max"],
            hidden=tuple(sizes[1:-1]),
            theta=payload,
        )
        return net
    if kind == "critic":
        net = CriticNet(header["state_dim"], header["action_dim"], hidden=tuple(sizes[1:-1]))
        half = net.q1.n_params
        if payload.shape[0] != 2 * half:
            raise ParseError("critic checkpoint payload length mismatch")
        net.q1.set_theta(payload[:half])
        net.q2.set_theta(payload[half:])
        return net
    if kind == "mlp":
        return MLP(
            tuple(sizes),
            head=header.get("head", "linear"),
            out_scale=header.get("out_scale", 1.0),
            theta=payload,
        )
    raise ParseError(f"unknown checkpoint kind {kind!r}")
