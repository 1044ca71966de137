import numpy as np
import pytest

from potrl.env import (
    EnvKind,
    EpisodeConfig,
    EpisodeDoneError,
    InvalidOutcomeError,
    InvalidWeightError,
    PotEnv,
    reward_hybrid,
    reward_pour,
    reward_shake,
)
from potrl.fluidsim import CupSpec, Scenario, SimConfig, TaskOutcome, simulate_pour
from potrl.geometry import NUM_RINGS, OBS_DIM, PotShape, build_point_cloud, to_observation


def fast_cfg(**kwargs) -> EpisodeConfig:
    """Episode config with a small, quick simulation for unit tests."""
    defaults = dict(
        steps_per_episode=3,
        episodes=2,
        sim=SimConfig(particle_count=40),
        scenario=Scenario(pour_ramp_s=0.3, pour_settle_s=0.1, shake_duration_s=0.6),
    )
    defaults.update(kwargs)
    return EpisodeConfig(**defaults)


def outcome(n_total, n_cup=0, n_pot=0):
    return TaskOutcome(n_total=n_total, n_cup=n_cup, n_pot=n_pot, n_spilled=n_total - n_cup - n_pot)


def test_reward_pour_values():
    assert reward_pour(outcome(100, n_cup=23)) == pytest.approx(0.23)
    assert reward_pour(outcome(50, n_cup=0)) == 0.0
    assert reward_pour(outcome(64, n_cup=64)) == 1.0


def test_reward_shake_values():
    assert reward_shake(outcome(100, n_pot=86)) == pytest.approx(0.86)
    assert reward_shake(outcome(100, n_pot=41)) == pytest.approx(0.41)
    assert reward_shake(outcome(30, n_pot=30)) == 1.0


def test_reward_errors_on_empty_outcome():
    empty = TaskOutcome(n_total=0, n_cup=0, n_pot=0, n_spilled=0)
    with pytest.raises(InvalidOutcomeError):
        reward_pour(empty)
    with pytest.raises(InvalidOutcomeError):
        reward_shake(empty)


def test_reward_hybrid_table_rows():
    # published sweep rows are internally consistent with the blend formula
    assert reward_hybrid(0.48, 0.80, 0.5) == pytest.approx(0.64, abs=1e-12)
    assert reward_hybrid(0.32, 0.87, 0.1) == pytest.approx(0.815, abs=1e-12)


def test_reward_hybrid_degenerate_weights():
    assert reward_hybrid(0.3, 0.9, 0.0) == 0.9
    assert reward_hybrid(0.3, 0.9, 1.0) == 0.3


def test_reward_hybrid_validation():
    with pytest.raises(InvalidWeightError):
        reward_hybrid(0.5, 0.5, 1.2)
    with pytest.raises(InvalidWeightError):
        reward_hybrid(0.5, 0.5, -0.1)
    with pytest.raises(InvalidOutcomeError):
        reward_hybrid(1.4, 0.5, 0.5)


def test_reward_hybrid_linear_in_weight():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p, s, w = rng.uniform(0, 1, 3)
        expected = w * reward_hybrid(p, s, 1.0) + (1 - w) * reward_hybrid(p, s, 0.0)
        assert abs(reward_hybrid(p, s, w) - expected) <= 1e-12


def test_env_kind_validation():
    with pytest.raises(ValueError):
        EnvKind("tip")
    with pytest.raises(InvalidWeightError):
        EnvKind.hybrid(1.5)
    assert EnvKind.hybrid(0.3).weight == 0.3


def test_reset_returns_initial_cylinder_observation():
    env = PotEnv(EnvKind.pour(), fast_cfg(), seed=0)
    obs0 = env.reset()
    assert obs0.shape == (OBS_DIM,)
    expected = to_observation(build_point_cloud(PotShape.cylinder()))
    assert np.array_equal(obs0, expected)

    env.step(np.full(NUM_RINGS, 0.2))
    obs_again = env.reset()
    assert np.array_equal(obs_again, expected)
    assert np.array_equal(env.reset(), env.reset())


def test_zero_action_first_step_reward_matches_initial_design():
    cfg = fast_cfg()
    env = PotEnv(EnvKind.pour(), cfg, seed=3)
    res = env.step(np.zeros(NUM_RINGS))
    direct = simulate_pour(PotShape.cylinder(), cfg.sim, cfg.cup, 3, scenario=cfg.scenario)
    assert res.reward == reward_pour(direct)


def test_shake_env_with_zero_amplitude_rewards_one():
    cfg = fast_cfg(scenario=Scenario(shake_amplitude_deg=0.0, shake_duration_s=0.6))
    env = PotEnv(EnvKind.shake(), cfg, seed=1)
    rng = np.random.default_rng(5)
    for _ in range(cfg.steps_per_episode):
        res = env.step(rng.normal(0, 0.5, NUM_RINGS))
        assert res.reward == 1.0


def test_episode_length_and_done_flag():
    cfg = fast_cfg(steps_per_episode=4)
    env = PotEnv(EnvKind.shake(), cfg, seed=0)
    for k in range(4):
        res = env.step(np.zeros(NUM_RINGS))
        assert res.done == (k == 3)
    with pytest.raises(EpisodeDoneError):
        env.step(np.zeros(NUM_RINGS))
    env.reset()
    assert env.step_count == 0


def test_rewards_stay_in_unit_interval():
    cfg = fast_cfg()
    env = PotEnv(EnvKind.hybrid(0.5), cfg, seed=2)
    rng = np.random.default_rng(8)
    for episode in range(2):
        env.reset()
        for _ in range(cfg.steps_per_episode):
            res = env.step(rng.normal(0, 1.0, NUM_RINGS))
            assert 0.0 <= res.reward <= 1.0


def test_hybrid_extremes_match_single_task_envs():
    cfg = fast_cfg(steps_per_episode=2)
    actions = [np.full(NUM_RINGS, 0.1), np.full(NUM_RINGS, -0.2)]

    pour_env = PotEnv(EnvKind.pour(), cfg, seed=4)
    hybrid1 = PotEnv(EnvKind.hybrid(1.0), cfg, seed=4)
    for a in actions:
        assert hybrid1.step(a).reward == pour_env.step(a).reward

    shake_env = PotEnv(EnvKind.shake(), cfg, seed=4)
    hybrid0 = PotEnv(EnvKind.hybrid(0.0), cfg, seed=4)
    for a in actions:
        assert hybrid0.step(a).reward == shake_env.step(a).reward


def test_fixed_seed_policy_gives_identical_reward_sequences():
    cfg = fast_cfg()
    rng = np.random.default_rng(12)
    actions = [rng.normal(0, 0.6, NUM_RINGS) for _ in range(cfg.steps_per_episode)]

    def rollout():
        env = PotEnv(EnvKind.pour(), cfg, seed=7)
        return [env.step(a).reward for a in actions]

    assert rollout() == rollout()


def test_per_episode_seed_policy_changes_spawn():
    cfg = fast_cfg(seed_policy="per_episode")
    env = PotEnv(EnvKind.pour(), cfg, seed=7)
    seeds = set()
    for _ in range(3):
        seeds.add(env._sim_seed())
        env.reset()
    assert len(seeds) == 3


def test_step_info_carries_counts():
    cfg = fast_cfg(steps_per_episode=1)
    env = PotEnv(EnvKind.hybrid(0.5), cfg, seed=0)
    res = env.step(np.zeros(NUM_RINGS))
    info = res.info
    assert info["pour"] is not None and info["shake"] is not None
    assert info["n_cup"] + info["n_pot"] + info["n_spilled"] == cfg.sim.particle_count
    assert info["pour_reward"] is not None and info["shake_reward"] is not None
    assert len(info["scales"]) == NUM_RINGS
