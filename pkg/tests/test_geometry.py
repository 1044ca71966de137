import math

import numpy as np
import pytest

from potrl.geometry import (
    NUM_POINTS,
    NUM_RINGS,
    OBS_DIM,
    RING_RESOLUTION,
    InvalidActionError,
    PotShape,
    apply_action,
    build_point_cloud,
    contains,
    export_obj,
    radius_at,
    shape_from_dict,
    shape_to_dict,
    to_observation,
)


def radial(points):
    return np.hypot(points[:, 0], points[:, 1])


def test_unit_cylinder_points_at_unit_radius():
    cloud = build_point_cloud(PotShape.cylinder())
    assert cloud.shape == (NUM_POINTS, 3)
    assert np.allclose(radial(cloud), 1.0, atol=1e-12)


def test_cloud_always_352_points():
    rng = np.random.default_rng(0)
    for _ in range(20):
        scales = tuple(rng.uniform(0.5, 1.5, NUM_RINGS))
        cloud = build_point_cloud(PotShape(radius_scales=scales))
        assert cloud.shape == (NUM_POINTS, 3)


def test_scaling_one_ring_leaves_others_unchanged():
    base = build_point_cloud(PotShape.cylinder())
    scales = [1.0] * NUM_RINGS
    scales[5] = 1.5
    scaled = build_point_cloud(PotShape(radius_scales=tuple(scales)))
    r = radial(scaled)
    ring5 = slice(5 * RING_RESOLUTION, 6 * RING_RESOLUTION)
    assert np.allclose(r[ring5], 1.5, atol=1e-12)
    mask = np.ones(NUM_POINTS, dtype=bool)
    mask[ring5] = False
    assert np.array_equal(scaled[mask], base[mask])


def test_ring_structure_matches_heights():
    shape = PotShape(radius_scales=tuple(np.linspace(0.5, 1.5, NUM_RINGS)))
    cloud = build_point_cloud(shape)
    for i in range(NUM_RINGS):
        ring = cloud[i * RING_RESOLUTION : (i + 1) * RING_RESOLUTION]
        assert np.all(ring[:, 2] == shape.ring_heights[i])
        assert np.allclose(radial(ring), shape.radii[i], atol=1e-12)


def test_observation_layout_and_roundtrip():
    cloud = build_point_cloud(PotShape.cylinder())
    obs = to_observation(cloud)
    assert obs.shape == (OBS_DIM,)
    assert np.allclose(obs[:3], [1.0, 0.0, 0.0], atol=1e-12)
    assert np.array_equal(obs.reshape(NUM_POINTS, 3), cloud)


def test_observation_last_ring_occupies_last_96_entries():
    a = PotShape.cylinder()
    scales = list(a.radius_scales)
    scales[10] = 1.2
    b = PotShape(radius_scales=tuple(scales))
    oa = to_observation(build_point_cloud(a))
    ob = to_observation(build_point_cloud(b))
    diff = np.flatnonzero(oa != ob)
    assert len(diff) > 0
    assert diff.min() >= OBS_DIM - 3 * RING_RESOLUTION


def test_apply_action_identity():
    shape = PotShape.cylinder()
    out = apply_action(shape, np.zeros(NUM_RINGS))
    assert out == shape


def test_apply_action_clamps_at_upper_bound():
    out = apply_action(PotShape.cylinder(), np.full(NUM_RINGS, math.log(2.0)))
    assert out.radius_scales == (1.5,) * NUM_RINGS


def test_apply_action_multiplicative():
    # independent scalar evaluation: clamp(1.0 * exp(ln 0.8)) = 0.8
    out = apply_action(PotShape.cylinder(), np.full(NUM_RINGS, math.log(0.8)))
    assert np.allclose(out.radius_scales, 0.8, atol=1e-12)


def test_apply_action_rejects_non_finite():
    bad = np.zeros(NUM_RINGS)
    bad[3] = np.nan
    with pytest.raises(InvalidActionError):
        apply_action(PotShape.cylinder(), bad)
    with pytest.raises(InvalidActionError):
        apply_action(PotShape.cylinder(), np.full(NUM_RINGS, np.inf))
    with pytest.raises(InvalidActionError):
        apply_action(PotShape.cylinder(), np.zeros(7))


def test_apply_action_leaves_input_unmodified():
    shape = PotShape.cylinder()
    apply_action(shape, np.full(NUM_RINGS, 0.3))
    assert shape.radius_scales == (1.0,) * NUM_RINGS


def test_scales_stay_clamped_under_random_action_sequences():
    rng = np.random.default_rng(42)
    for _ in range(50):
        shape = PotShape.cylinder()
        for _ in range(40):
            shape = apply_action(shape, rng.normal(0.0, 1.0, NUM_RINGS))
            assert all(0.5 <= s <= 1.5 for s in shape.radius_scales)


def test_apply_action_monotone_in_delta():
    rng = np.random.default_rng(7)
    for _ in range(100):
        scales = tuple(rng.uniform(0.5, 1.5, NUM_RINGS))
        shape = PotShape(radius_scales=scales)
        d1 = rng.normal(0.0, 0.8, NUM_RINGS)
        d2 = d1.copy()
        i = rng.integers(NUM_RINGS)
        d2[i] += abs(rng.normal())
        s1 = apply_action(shape, d1).radius_scales
        s2 = apply_action(shape, d2).radius_scales
        assert s2[i] >= s1[i]


def test_axisymmetry_under_ring_rotation():
    rng = np.random.default_rng(3)
    shape = PotShape(radius_scales=tuple(rng.uniform(0.5, 1.5, NUM_RINGS)))
    cloud = build_point_cloud(shape)
    a = 2.0 * np.pi / RING_RESOLUTION
    rot = np.array([[np.cos(a), -np.sin(a), 0.0], [np.sin(a), np.cos(a), 0.0], [0.0, 0.0, 1.0]])
    rotated = cloud @ rot.T
    shifted = cloud.reshape(NUM_RINGS, RING_RESOLUTION, 3)
    shifted = np.roll(shifted, -1, axis=1).reshape(NUM_POINTS, 3)
    assert np.allclose(rotated, shifted, atol=1e-12)


def test_distinct_scales_give_distinct_observations():
    rng = np.random.default_rng(5)
    for _ in range(50):
        s1 = tuple(rng.uniform(0.5, 1.5, NUM_RINGS))
        s2 = tuple(rng.uniform(0.5, 1.5, NUM_RINGS))
        if s1 == s2:
            continue
        o1 = to_observation(build_point_cloud(PotShape(radius_scales=s1)))
        o2 = to_observation(build_point_cloud(PotShape(radius_scales=s2)))
        assert not np.array_equal(o1, o2)


def test_radius_at_knots_and_interpolation():
    scales = [1.0] * NUM_RINGS
    scales[1] = 1.5
    shape = PotShape(radius_scales=tuple(scales))
    assert radius_at(shape, shape.ring_heights[3]) == shape.radii[3]
    # hand evaluation of linear interpolation between rings 0 and 1
    mid = 0.5 * (shape.ring_heights[0] + shape.ring_heights[1])
    assert abs(radius_at(shape, mid) - 1.25) < 1e-12


def test_radius_at_constant_profile():
    shape = PotShape.cylinder()
    for z in np.linspace(0.0, shape.height, 23):
        assert radius_at(shape, float(z)) == 1.0


def test_radius_at_out_of_range():
    shape = PotShape.cylinder()
    with pytest.raises(ValueError):
        radius_at(shape, -0.01)
    with pytest.raises(ValueError):
        radius_at(shape, shape.height + 0.01)


def test_contains_examples():
    shape = PotShape.cylinder()
    assert contains(shape, (0.0, 0.0, shape.height / 2))
    assert not contains(shape, (2.0, 0.0, shape.height / 2))
    assert not contains(shape, (0.0, 0.0, -0.1))
    assert not contains(shape, (1.0, 0.0, 1.0))  # boundary is exclusive


def test_export_obj_counts_and_determinism(tmp_path):
    cloud = build_point_cloud(PotShape.cylinder())
    p1 = tmp_path / "a.obj"
    p2 = tmp_path / "b.obj"
    export_obj(cloud, p1)
    export_obj(cloud, p2)
    text = p1.read_text()
    lines = text.splitlines()
    assert sum(1 for l in lines if l.startswith("v ")) == NUM_POINTS
    assert sum(1 for l in lines if l.startswith("f ")) == 320
    assert p1.read_bytes() == p2.read_bytes()


def test_shape_validation():
    with pytest.raises(ValueError):
        PotShape(radius_scales=(0.4,) * NUM_RINGS)
    with pytest.raises(ValueError):
        PotShape(radius_scales=(1.0,) * 10)
    with pytest.raises(ValueError):
        PotShape(ring_heights=tuple(np.linspace(0.1, 2.0, NUM_RINGS)))
    with pytest.raises(ValueError):
        PotShape(base_radius=-1.0)


def test_shape_dict_roundtrip_and_errors():
    shape = PotShape(radius_scales=tuple(np.linspace(0.5, 1.5, NUM_RINGS)))
    again = shape_from_dict(shape_to_dict(shape))
    assert again == shape
    with pytest.raises(ValueError, match="radius_scales"):
        shape_from_dict({"radius_scales": "oops"})
    with pytest.raises(ValueError, match="base_radius"):
        shape_from_dict({"base_radius": [1, 2]})
    with pytest.raises(ValueError, match="unknown"):
        shape_from_dict({"radius": 2.0})
