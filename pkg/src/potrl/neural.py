"""Dense networks with hand-written gradients.

Actor and critic are small tanh MLPs (default hidden stack 256-128-64 on a
1056-value observation), trained with Adam. Everything is float64 numpy:
at this scale determinism and gradient-check tightness matter more than
speed, and there is no autodiff framework to drag in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

CHECKPOINT_FORMAT = "potrl-checkpoint-v1"


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(gain * q[:rows, :cols])


class DenseNet:
    """MLP with tanh hidden layers and a linear output layer.

    Parameters live in ``self.params`` as [W0, b0, W1, b1, ...] with W of
    shape (n_in, n_out); forward computes x @ W + b.
    """

    def __init__(
        self,
        input_size: int,
        hidden_sizes: tuple[int, ...],
        output_size: int,
        rng: np.random.Generator | None = None,
        hidden_gain: float = math.sqrt(2.0),
        output_scale: float = 0.01,
    ):
        self.layer_sizes = (input_size,) + tuple(hidden_sizes) + (output_size,)
        self.params: list[np.ndarray] = []
        if rng is None:
            for n_in, n_out in zip(self.layer_sizes, self.layer_sizes[1:]):
                self.params.append(np.zeros((n_in, n_out)))
                self.params.append(np.zeros(n_out))
        else:
            last = len(self.layer_sizes) - 2
            for k, (n_in, n_out) in enumerate(zip(self.layer_sizes, self.layer_sizes[1:])):
                gain = hidden_gain if k < last else 1.0
                w = _orthogonal(rng, n_in, n_out, gain)
                if k == last:
                    w = w * output_scale
                self.params.append(w)
                self.params.append(np.zeros(n_out))

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def num_params(self) -> int:
        return sum(p.size for p in self.params)

    def forward(self, x: np.ndarray):
        """Returns (output, cache); cache holds the per-layer activations."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.input_size:
            raise ValueError(f"expected input size {self.input_size}, got {x.shape[1]}")
        acts = [x]
        h = x
        n_layers = len(self.layer_sizes) - 1
        for k in range(n_layers):
            w = self.params[2 * k]
            b = self.params[2 * k + 1]
            z = h @ w + b
            if k < n_layers - 1:
                h = np.tanh(z)
                acts.append(h)
            else:
                h = z
        return (h[0] if single else h), acts

    def backward(self, cache, grad_out: np.ndarray) -> list[np.ndarray]:
        """Exact gradients w.r.t. every parameter for upstream dL/d(output).

        ``cache`` must come from a forward call on the same inputs; gradients
        are summed over the batch.
        """
        if cache is None:
            raise ValueError("backward requires the forward cache")
        g = np.asarray(grad_out, dtype=float)
        if g.ndim == 1:
            g = g[None, :]
        grads: list[np.ndarray] = [np.empty(0)] * len(self.params)
        n_layers = len(self.layer_sizes) - 1
        for k in range(n_layers - 1, -1, -1):
            w = self.params[2 * k]
            a = cache[k]
            grads[2 * k] = a.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0:
                g = (g @ w.T) * (1.0 - a * a)
        return grads

    def copy_params_from(self, other: "DenseNet") -> None:
        for p, q in zip(self.params, other.params):
            p[...] = q

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "params": [p.reshape(-1).tolist() for p in self.params],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DenseNet":
        sizes = [int(v) for v in data["layer_sizes"]]
        net = cls(sizes[0], tuple(sizes[1:-1]), sizes[-1], rng=None)
        flat = data["params"]
        if len(flat) != len(net.params):
            raise ValueError("checkpoint layer count does not match layer_sizes")
        for p, values in zip(net.params, flat):
            arr = np.asarray(values, dtype=float)
            if arr.size != p.size:
                raise ValueError("checkpoint parameter size mismatch")
            p[...] = arr.reshape(p.shape)
        return net


@dataclass
class AdamState:
    """Adam moment accumulators for one parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 0.0007
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float = 0.0007) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> list[np.ndarray]:
    """Standard bias-corrected Adam update, in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and Adam state must have matching structure")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray, action: np.ndarray):
    """Diagonal-Gaussian log density; batched if mean/action are 2-D."""
    mean = np.asarray(mean, dtype=float)
    action = np.asarray(action, dtype=float)
    d = log_std.shape[0]
    inv_var = np.exp(-2.0 * log_std)
    diff = action - mean
    quad = np.sum(diff * diff * inv_var, axis=-1)
    return -0.5 * quad - np.sum(log_std) - 0.5 * d * math.log(2.0 * math.pi)


def gaussian_sample(mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return mean + np.exp(log_std) * rng.standard_normal(log_std.shape[0])


def gaussian_entropy(log_std: np.ndarray) -> float:
    d = log_std.shape[0]
    return float(np.sum(log_std) + 0.5 * d * (1.0 + math.log(2.0 * math.pi)))


class GaussianPolicy:
    """Actor network plus a state-independent log-std vector."""

    def __init__(self, net: DenseNet, init_log_std: float = -0.5):
        self.net = net
        self.log_std = np.full(net.output_size, float(init_log_std))

    @property
    def action_dim(self) -> int:
        return self.net.output_size

    @property
    def params(self) -> list[np.ndarray]:
        """Trainable parameters: network weights followed by log_std."""
        return self.net.params + [self.log_std]

    def clamp_log_std(self) -> None:
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def mean_action(self, obs: np.ndarray) -> np.ndarray:
        out, _ = self.net.forward(obs)
        return out

    def act(self, obs: np.ndarray, rng: np.random.Generator):
        """Sample an action; returns (action, log_prob at sampling time)."""
        mean, _ = self.net.forward(obs)
        action = gaussian_sample(mean, self.log_std, rng)
        return action, float(gaussian_log_prob(mean, self.log_std, action))


def save_checkpoint(path, policy: GaussianPolicy, value_net: DenseNet,
                    policy_adam: AdamState, value_adam: AdamState, meta: dict | None = None) -> None:
    """Write a human-readable JSON checkpoint (versioned, deterministic bytes)."""

    def adam_dict(state: AdamState) -> dict:
        return {
            "t": state.t,
            "lr": state.lr,
            "beta1": state.beta1,
            "beta2": state.beta2,
            "eps": state.eps,
            "m": [a.reshape(-1).tolist() for a in state.m],
            "v": [a.reshape(-1).tolist() for a in state.v],
        }

    doc = {
        "format": CHECKPOINT_FORMAT,
        "policy_net": policy.net.to_dict(),
        "log_std": policy.log_std.tolist(),
        "value_net": value_net.to_dict(),
        "policy_adam": adam_dict(policy_adam),
        "value_adam": adam_dict(value_adam),
        "meta": meta or {},
    }
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(doc, fh, separators=(",", ":"))


def load_checkpoint(path):
    """Restore (policy, value_net, policy_adam, value_adam, meta)."""
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format: {doc.get('format')!r}")
    policy = GaussianPolicy(DenseNet.from_dict(doc["policy_net"]))
    policy.log_std[...] = np.asarray(doc["log_std"], dtype=float)
    value_net = DenseNet.from_dict(doc["value_net"])

    def adam_from(data: dict, params: list[np.ndarray]) -> AdamState:
        state = AdamState.for_params(params, lr=float(data["lr"]))
        state.t = int(data["t"])
        state.beta1 = float(data["beta1"])
        state.beta2 = float(data["beta2"])
        state.eps = float(data["eps"])
        for target, values in zip(state.m, data["m"]):
            target[...] = np.asarray(values, dtype=float).reshape(target.shape)
        for target, values in zip(state.v, data["v"]):
            target[...] = np.asarray(values, dtype=float).reshape(target.shape)
        return state

    policy_adam = adam_from(doc["policy_adam"], policy.params)
    value_adam = adam_from(doc["value_adam"], value_net.params)
    return policy, value_net, policy_adam, value_adam, doc.get("meta", {})
