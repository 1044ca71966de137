"""Proximal-policy trainer over the design environments.

One training run alternates fixed-length rollouts (one per episode, the pot
resetting to the cylinder in between) with several epochs of clipped-surrogate
minibatch updates. Gradients flow through the hand-written networks in
``neural``; there is no autodiff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .neural import (
    AdamState,
    DenseNet,
    GaussianPolicy,
    adam_step,
    gaussian_entropy,
)


class TrainingDivergedError(RuntimeError):
    """Loss or parameters became non-finite during an update."""


@dataclass
class PpoConfig:
    clip_epsilon: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    update_epochs: int = 10
    minibatch_size: int = 50
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    rollout_length: int = 200
    learning_rate: float = 0.0007
    total_steps: int = 1000
    obs_scale: float = 2.0  # observations divided by the pot height before the nets

    def __post_init__(self) -> None:
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be positive")
        for name in ("gamma", "gae_lambda"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.rollout_length < 1 or self.total_steps < 1:
            raise ValueError("rollout_length and total_steps must be >= 1")
        if self.total_steps % self.rollout_length != 0:
            raise ValueError(
                f"rollout_length {self.rollout_length} must divide total_steps {self.total_steps}"
            )
        if self.minibatch_size < 1 or self.update_epochs < 1:
            raise ValueError("minibatch_size and update_epochs must be >= 1")
        if self.obs_scale <= 0:
            raise ValueError("obs_scale must be positive")


@dataclass
class Transition:
    """One step of experience as stored in the rollout buffer."""

    observation: np.ndarray
    action: np.ndarray
    log_prob_old: float
    reward: float
    value_estimate: float
    done_flag: bool


class RolloutBuffer:
    """Fixed-length transition store with GAE finalization."""

    def __init__(self, length: int, obs_dim: int, action_dim: int):
        self.capacity = length
        self.size = 0
        self.observations = np.zeros((length, obs_dim))
        self.actions = np.zeros((length, action_dim))
        self.log_probs = np.zeros(length)
        self.rewards = np.zeros(length)
        self.values = np.zeros(length)
        self.dones = np.zeros(length, dtype=bool)
        self.infos: list[dict] = []
        self.advantages: np.ndarray | None = None  # normalized, set by finalize
        self.raw_advantages: np.ndarray | None = None
        self.returns: np.ndarray | None = None

    def add(self, obs, action, log_prob, reward, value, done, info=None) -> None:
        if self.size >= self.capacity:
            raise ValueError("rollout buffer is full")
        i = self.size
        self.observations[i] = obs
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.rewards[i] = reward
        self.values[i] = value
        self.dones[i] = done
        self.infos.append(info or {})
        self.size += 1

    def finalize(self, bootstrap_value: float, gamma: float, lam: float) -> None:
        """Compute GAE advantages and return targets; normalize the advantages."""
        if self.size != self.capacity:
            raise ValueError(f"buffer has {self.size} of {self.capacity} transitions")
        adv, ret = compute_gae(self.rewards, self.values, bootstrap_value, gamma, lam)
        self.raw_advantages = adv
        self.returns = ret
        std = adv.std()
        self.advantages = (adv - adv.mean()) / (std + 1e-8)

    def transitions(self):
        for i in range(self.size):
            yield Transition(
                observation=self.observations[i],
                action=self.actions[i],
                log_prob_old=float(self.log_probs[i]),
                reward=float(self.rewards[i]),
                value_estimate=float(self.values[i]),
                done_flag=bool(self.dones[i]),
            )


def compute_gae(rewards, values, bootstrap_value: float, gamma: float, lam: float):
    """Recursive generalized advantage estimation.

    delta_t = r_t + gamma V(s_{t+1}) - V(s_t), with V(s_T) = bootstrap_value at
    the buffer end (time-limit truncation bootstraps rather than zeroing).
    Returns (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(rewards)
    if n == 0:
        raise ValueError("cannot compute GAE on an empty buffer")
    adv = np.zeros(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        next_value = bootstrap_value if t == n - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_value - values[t]
        last = delta + gamma * lam * last
        adv[t] = last
    return adv, adv + values


def collect_rollout(env, policy: GaussianPolicy, value_net: DenseNet, length: int,
                    rng: np.random.Generator, obs_scale: float = 1.0) -> RolloutBuffer:
    """Run the policy for ``length`` steps from a fresh episode.

    Actions are sampled from the Gaussian head; log-probs and value estimates
    are recorded at sampling time. The final observation's value estimate is
    stored on the buffer as ``bootstrap_value`` for finalization.
    """
    obs = env.reset()
    buffer = RolloutBuffer(length, obs.shape[0], policy.action_dim)
    for _ in range(length):
        x = obs / obs_scale
        action, log_prob = policy.act(x, rng)
        value, _ = value_net.forward(x)
        result = env.step(action)
        buffer.add(obs, action, log_prob, result.reward, float(value[0]),
                   result.done, result.info)
        obs = result.observation
        if result.done:
            obs = env.reset()
    final_value, _ = value_net.forward(obs / obs_scale)
    buffer.bootstrap_value = float(final_value[0])
    return buffer


def ppo_loss(batch: dict, policy: GaussianPolicy, value_net: DenseNet, cfg: PpoConfig):
    """Clipped-surrogate loss plus analytic gradients for one minibatch.

    Returns (stats, policy_grads, value_grads); policy_grads lines up with
    ``policy.params`` (network parameters then log_std).
    """
    obs = batch["observations"] / cfg.obs_scale
    actions = batch["actions"]
    logp_old = batch["log_probs"]
    adv = batch["advantages"]
    ret = batch["returns"]
    b = obs.shape[0]

    mean, cache = policy.net.forward(obs)
    log_std = policy.log_std
    inv_var = np.exp(-2.0 * log_std)
    diff = actions - mean
    quad = diff * diff * inv_var
    logp_new = -0.5 * quad.sum(axis=1) - log_std.sum() - 0.5 * policy.action_dim * math.log(2.0 * math.pi)

    ratio = np.exp(logp_new - logp_old)
    clipped = np.clip(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon)
    surr1 = ratio * adv
    surr2 = clipped * adv
    surrogate = np.minimum(surr1, surr2)
    policy_term = -surrogate.mean()

    values, vcache = value_net.forward(obs)
    values = values[:, 0]
    verr = values - ret
    value_term = float(np.mean(verr * verr))

    entropy = gaussian_entropy(log_std)
    loss = policy_term + cfg.value_coef * value_term - cfg.entropy_coef * entropy
    if not np.isfinite(loss):
        raise TrainingDivergedError(
            f"non-finite loss (policy={policy_term}, value={value_term}, entropy={entropy})"
        )

    # gradient flows through the unclipped branch only where it attains the min
    active = surr1 <= surr2
    dlogp = np.where(active, -adv * ratio, 0.0) / b
    dmean = dlogp[:, None] * diff * inv_var
    policy_net_grads = policy.net.backward(cache, dmean)
    dlog_std = (dlogp[:, None] * (quad - 1.0)).sum(axis=0) - cfg.entropy_coef
    policy_grads = policy_net_grads + [dlog_std]

    dvalues = (cfg.value_coef * 2.0 / b) * verr
    value_grads = value_net.backward(vcache, dvalues[:, None])

    stats = {
        "loss": float(loss),
        "policy_loss": float(policy_term),
        "value_loss": value_term,
        "entropy": entropy,
        "clip_fraction": float(np.mean(~active)),
        "ratio_mean": float(ratio.mean()),
    }
    return stats, policy_grads, value_grads


def ppo_update(buffer: RolloutBuffer, policy: GaussianPolicy, value_net: DenseNet,
               policy_adam: AdamState, value_adam: AdamState, cfg: PpoConfig,
               rng: np.random.Generator) -> dict:
    """Several epochs of shuffled minibatch updates over one rollout."""
    n = buffer.size
    last_stats: dict = {}
    for _ in range(cfg.update_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = perm[start : start + cfg.minibatch_size]
            batch = {
                "observations": buffer.observations[idx],
                "actions": buffer.actions[idx],
                "log_probs": buffer.log_probs[idx],
                "advantages": buffer.advantages[idx],
                "returns": buffer.returns[idx],
            }
            last_stats, policy_grads, value_grads = ppo_loss(batch, policy, value_net, cfg)
            adam_step(policy.params, policy_grads, policy_adam)
            policy.clamp_log_std()
            adam_step(value_net.params, value_grads, value_adam)
    for p in policy.params + value_net.params:
        if not np.all(np.isfinite(p)):
            raise TrainingDivergedError("non-finite network parameters after update")
    return last_stats


@dataclass
class StepRecord:
    global_step: int
    episode: int
    step_in_episode: int
    reward: float
    pour_reward: float | None
    shake_reward: float | None
    n_cup: int | None
    n_pot: int | None
    n_spilled: int | None
    scales: tuple | None


@dataclass
class TrainingHistory:
    records: list[StepRecord] = field(default_factory=list)
    best_reward: float = -math.inf
    best_episode: int = 0
    best_step: int = 0
    best_scales: tuple | None = None
    best_pour: float | None = None
    best_shake: float | None = None
    update_stats: list[dict] = field(default_factory=list)

    def observe_step(self, record: StepRecord) -> None:
        self.records.append(record)
        if record.reward > self.best_reward:
            self.best_reward = record.reward
            self.best_episode = record.episode
            self.best_step = record.step_in_episode
            self.best_scales = record.scales
            self.best_pour = record.pour_reward
            self.best_shake = record.shake_reward


def train(env, policy: GaussianPolicy, value_net: DenseNet, cfg: PpoConfig, seed: int,
          on_episode_end=None) -> TrainingHistory:
    """Full training run: total_steps of interaction in rollout-sized episodes.

    ``on_episode_end(episode_index, policy, value_net, policy_adam, value_adam,
    history)`` is invoked after each update, for checkpointing.
    """
    if getattr(env, "steps_per_episode", cfg.rollout_length) != cfg.rollout_length:
        raise ValueError(
            "rollout_length must equal the environment's steps_per_episode "
            f"({cfg.rollout_length} != {env.steps_per_episode})"
        )
    ss = np.random.SeedSequence(seed)
    act_ss, shuffle_ss = ss.spawn(2)
    act_rng = np.random.default_rng(act_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)

    policy_adam = AdamState.for_params(policy.params, lr=cfg.learning_rate)
    value_adam = AdamState.for_params(value_net.params, lr=cfg.learning_rate)

    history = TrainingHistory()
    n_rollouts = cfg.total_steps // cfg.rollout_length
    global_step = 0
    for rollout_idx in range(n_rollouts):
        episode = rollout_idx + 1
        buffer = collect_rollout(env, policy, value_net, cfg.rollout_length,
                                 act_rng, obs_scale=cfg.obs_scale)
        buffer.finalize(buffer.bootstrap_value, cfg.gamma, cfg.gae_lambda)
        for i in range(buffer.size):
            info = buffer.infos[i]
            global_step += 1
            history.observe_step(StepRecord(
                global_step=global_step,
                episode=episode,
                step_in_episode=i + 1,
                reward=float(buffer.rewards[i]),
                pour_reward=info.get("pour_reward"),
                shake_reward=info.get("shake_reward"),
                n_cup=info.get("n_cup"),
                n_pot=info.get("n_pot"),
                n_spilled=info.get("n_spilled"),
                scales=info.get("scales"),
            ))
        stats = ppo_update(buffer, policy, value_net, policy_adam, value_adam,
                           cfg, shuffle_rng)
        history.update_stats.append(stats)
        if on_episode_end is not None:
            on_episode_end(episode, policy, value_net, policy_adam, value_adam, history)
    return history
