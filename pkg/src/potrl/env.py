"""Design environments: each step reshapes the pot and re-runs the water task.

One step = apply the 11-ring design action, refill the pot, run the scripted
pour and/or shake simulation, and return the new 1056-value observation plus
the task reward. Episodes are fixed-length; reset restores the initial
cylinder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fluidsim import CupSpec, Scenario, SimConfig, TaskOutcome, simulate_pour, simulate_shake
from .geometry import PotShape, apply_action, build_point_cloud, to_observation

POUR = "pour"
SHAKE = "shake"
HYBRID = "hybrid"

SEED_FIXED = "fixed"  # same water spawn every step: reward changes reflect shape changes
SEED_PER_EPISODE = "per_episode"


class EpisodeDoneError(RuntimeError):
    """step() was called on a finished episode."""


class InvalidOutcomeError(ValueError):
    """A task outcome cannot be turned into a reward."""


class InvalidWeightError(ValueError):
    """Hybrid weight outside [0, 1]."""


@dataclass(frozen=True)
class EnvKind:
    """Which task(s) the environment rewards: pour, shake, or a weighted blend."""

    variant: str
    weight: float = 0.5  # hybrid only

    def __post_init__(self) -> None:
        if self.variant not in (POUR, SHAKE, HYBRID):
            raise ValueError(f"unknown environment variant '{self.variant}'")
        if self.variant == HYBRID and not (0.0 <= self.weight <= 1.0):
            raise InvalidWeightError(f"hybrid weight must be in [0, 1], got {self.weight}")

    @classmethod
    def pour(cls) -> "EnvKind":
        return cls(POUR)

    @classmethod
    def shake(cls) -> "EnvKind":
        return cls(SHAKE)

    @classmethod
    def hybrid(cls, weight: float) -> "EnvKind":
        return cls(HYBRID, weight)


@dataclass
class EpisodeConfig:
    steps_per_episode: int = 200
    episodes: int = 5
    sim: SimConfig = field(default_factory=SimConfig)
    cup: CupSpec = field(default_factory=CupSpec)
    scenario: Scenario = field(default_factory=Scenario)
    seed_policy: str = SEED_FIXED

    def __post_init__(self) -> None:
        if self.steps_per_episode < 1:
            raise ValueError("steps_per_episode must be >= 1")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.seed_policy not in (SEED_FIXED, SEED_PER_EPISODE):
            raise ValueError(f"unknown seed_policy '{self.seed_policy}'")


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


def reward_pour(outcome: TaskOutcome) -> float:
    """Fraction of the water that ended up in the cup."""
    if outcome.n_total <= 0:
        raise InvalidOutcomeError("pour outcome has no particles")
    return outcome.n_cup / outcome.n_total


def reward_shake(outcome: TaskOutcome) -> float:
    """Fraction of the water still in the pot after shaking."""
    if outcome.n_total <= 0:
        raise InvalidOutcomeError("shake outcome has no particles")
    return outcome.n_pot / outcome.n_total


def reward_hybrid(pour_r: float, shake_r: float, weight: float) -> float:
    """Weighted blend: weight * pour + (1 - weight) * shake."""
    if not (0.0 <= weight <= 1.0):
        raise InvalidWeightError(f"weight must be in [0, 1], got {weight}")
    for name, r in (("pour", pour_r), ("shake", shake_r)):
        if not (0.0 <= r <= 1.0):
            raise InvalidOutcomeError(f"{name} reward {r} outside [0, 1]")
    return weight * pour_r + (1.0 - weight) * shake_r


class PotEnv:
    """Markov environment over pot designs, scored by the particle simulator."""

    def __init__(
        self,
        kind: EnvKind,
        cfg: EpisodeConfig | None = None,
        seed: int = 0,
        initial_shape: PotShape | None = None,
    ):
        self.kind = kind
        self.cfg = cfg if cfg is not None else EpisodeConfig()
        self.seed = int(seed)
        self.initial_shape = initial_shape if initial_shape is not None else PotShape.cylinder()
        self.shape = self.initial_shape
        self.step_count = 0
        self.episode_index = -1  # incremented by reset
        self.reset()

    @property
    def steps_per_episode(self) -> int:
        return self.cfg.steps_per_episode

    @property
    def observation_dim(self) -> int:
        return 3 * len(self.initial_shape.radius_scales) * self.initial_shape.ring_resolution

    @property
    def action_dim(self) -> int:
        return len(self.initial_shape.radius_scales)

    @property
    def done(self) -> bool:
        return self.step_count >= self.cfg.steps_per_episode

    def observe(self) -> np.ndarray:
        return to_observation(build_point_cloud(self.shape))

    def reset(self) -> np.ndarray:
        """Restore the initial cylinder and start a new episode."""
        self.shape = self.initial_shape
        self.step_count = 0
        self.episode_index += 1
        return self.observe()

    def _sim_seed(self) -> int:
        if self.cfg.seed_policy == SEED_FIXED:
            return self.seed
        return int(np.random.SeedSequence((self.seed, self.episode_index)).generate_state(1)[0])

    def step(self, action) -> StepResult:
        """Apply a design action, re-run the task water simulation, and score it."""
        if self.done:
            raise EpisodeDoneError(
                f"episode finished after {self.cfg.steps_per_episode} steps; call reset()"
            )
        self.shape = apply_action(self.shape, action)
        sim_seed = self._sim_seed()

        pour_out = shake_out = None
        pour_r = shake_r = None
        if self.kind.variant in (POUR, HYBRID):
            pour_out = simulate_pour(
                self.shape, self.cfg.sim, self.cfg.cup, sim_seed, scenario=self.cfg.scenario
            )
            pour_r = reward_pour(pour_out)
        if self.kind.variant in (SHAKE, HYBRID):
            shake_out = simulate_shake(
                self.shape, self.cfg.sim, sim_seed, scenario=self.cfg.scenario
            )
            shake_r = reward_shake(shake_out)

        if self.kind.variant == POUR:
            reward = pour_r
        elif self.kind.variant == SHAKE:
            reward = shake_r
        else:
            reward = reward_hybrid(pour_r, shake_r, self.kind.weight)

        self.step_count += 1
        counts = pour_out if pour_out is not None else shake_out
        info = {
            "pour": pour_out,
            "shake": shake_out,
            "pour_reward": pour_r,
            "shake_reward": shake_r,
            "n_cup": counts.n_cup,
            "n_pot": counts.n_pot,
            "n_spilled": counts.n_spilled,
            "scales": self.shape.radius_scales,
        }
        return StepResult(
            observation=self.observe(),
            reward=float(reward),
            done=self.done,
            info=info,
        )
