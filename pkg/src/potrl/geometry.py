"""Parametric pot geometry: a surface of revolution under agent control.

The pot is a stack of 11 horizontal control rings, each discretized into 32
evenly spaced points, for 352 points total. The design variable is the vector
of 11 radius scale factors; everything else (ring heights, resolution) is
fixed. The wall between rings is linearly interpolated, the floor is flat at
z = 0, and the top is open.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

NUM_RINGS = 11
RING_RESOLUTION = 32
NUM_POINTS = NUM_RINGS * RING_RESOLUTION  # 352
OBS_DIM = NUM_POINTS * 3  # 1056

SCALE_MIN = 0.5
SCALE_MAX = 1.5

DEFAULT_BASE_RADIUS = 1.0
DEFAULT_HEIGHT = 2.0


class InvalidActionError(ValueError):
    """Raised when a design action is malformed or non-finite."""


def _default_ring_heights(height: float) -> tuple[float, ...]:
    return tuple(np.linspace(0.0, height, NUM_RINGS).tolist())


@dataclass(frozen=True)
class PotShape:
    """Immutable pot design: fixed cylinder dimensions plus 11 radius scales."""

    base_radius: float = DEFAULT_BASE_RADIUS
    height: float = DEFAULT_HEIGHT
    ring_heights: tuple[float, ...] = _default_ring_heights(DEFAULT_HEIGHT)
    radius_scales: tuple[float, ...] = (1.0,) * NUM_RINGS
    ring_resolution: int = RING_RESOLUTION

    def __post_init__(self) -> None:
        if self.base_radius <= 0:
            raise ValueError(f"base_radius must be positive, got {self.base_radius}")
        if self.height <= 0:
            raise ValueError(f"height must be positive, got {self.height}")
        if self.ring_resolution != RING_RESOLUTION:
            raise ValueError(f"ring_resolution must be {RING_RESOLUTION}")
        if len(self.ring_heights) != NUM_RINGS:
            raise ValueError(f"need {NUM_RINGS} ring heights, got {len(self.ring_heights)}")
        if len(self.radius_scales) != NUM_RINGS:
            raise ValueError(f"need {NUM_RINGS} radius scales, got {len(self.radius_scales)}")
        hs = self.ring_heights
        if hs[0] != 0.0 or hs[-1] != self.height:
            raise ValueError("ring_heights must span [0, height] exactly")
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValueError("ring_heights must be strictly increasing")
        for i, s in enumerate(self.radius_scales):
            if not (SCALE_MIN <= s <= SCALE_MAX):
                raise ValueError(
                    f"radius_scales[{i}] = {s} outside [{SCALE_MIN}, {SCALE_MAX}]"
                )

    @classmethod
    def cylinder(
        cls, base_radius: float = DEFAULT_BASE_RADIUS, height: float = DEFAULT_HEIGHT
    ) -> "PotShape":
        """The initial design: all radius scales at 1.0, rings equally spaced."""
        return cls(
            base_radius=base_radius,
            height=height,
            ring_heights=_default_ring_heights(height),
        )

    @property
    def radii(self) -> np.ndarray:
        """Physical ring radii, bottom to top."""
        return self.base_radius * np.asarray(self.radius_scales)

    @property
    def heights(self) -> np.ndarray:
        return np.asarray(self.ring_heights)


def build_point_cloud(shape: PotShape) -> np.ndarray:
    """352 surface points as a (352, 3) array, ring-major then angle-major."""
    angles = 2.0 * np.pi * np.arange(RING_RESOLUTION) / RING_RESOLUTION
    cos_a = np.cos(angles)
    sin_a = np.sin(angles)
    radii = shape.radii
    pts = np.empty((NUM_POINTS, 3))
    pts[:, 0] = np.repeat(radii, RING_RESOLUTION) * np.tile(cos_a, NUM_RINGS)
    pts[:, 1] = np.repeat(radii, RING_RESOLUTION) * np.tile(sin_a, NUM_RINGS)
    pts[:, 2] = np.repeat(shape.heights, RING_RESOLUTION)
    return pts


def to_observation(cloud: np.ndarray) -> np.ndarray:
    """Flatten a point cloud into the 1056-value observation vector."""
    cloud = np.asarray(cloud)
    if cloud.shape != (NUM_POINTS, 3):
        raise ValueError(f"expected cloud of shape ({NUM_POINTS}, 3), got {cloud.shape}")
    return cloud.reshape(-1).copy()


def apply_action(shape: PotShape, deltas) -> PotShape:
    """Scale each ring radius by exp(delta), clamped to [0.5, 1.5] of the initial value.

    Returns a new shape; the input is untouched.
    """
    arr = np.asarray(deltas, dtype=float)
    if arr.shape != (NUM_RINGS,):
        raise InvalidActionError(f"action must have {NUM_RINGS} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidActionError("action contains non-finite values")
    new_scales = tuple(
        min(SCALE_MAX, max(SCALE_MIN, s * math.exp(d)))
        for s, d in zip(shape.radius_scales, arr)
    )
    return replace(shape, radius_scales=new_scales)


def radius_profile(shape: PotShape, z) -> np.ndarray:
    """Interior wall radius at height z, linearly interpolated between rings.

    No range checking; values outside [0, height] clamp to the end rings.
    """
    return np.interp(z, shape.heights, shape.radii)


def radius_at(shape: PotShape, z: float) -> float:
    if not (0.0 <= z <= shape.height):
        raise ValueError(f"z = {z} outside [0, {shape.height}]")
    return float(radius_profile(shape, z))


def contains(shape: PotShape, point) -> bool:
    """True iff the point lies strictly inside the pot wall (body frame)."""
    x, y, z = point
    if not (0.0 <= z <= shape.height):
        return False
    return math.hypot(x, y) < float(radius_profile(shape, z))


def contains_batch(shape: PotShape, points: np.ndarray) -> np.ndarray:
    """Vectorized containment test for an (n, 3) array of body-frame points."""
    z = points[:, 2]
    in_band = (z >= 0.0) & (z <= shape.height)
    r2 = points[:, 0] ** 2 + points[:, 1] ** 2
    wall = radius_profile(shape, z)
    return in_band & (r2 < wall * wall)


def export_obj(cloud: np.ndarray, path) -> None:
    """Write the point cloud as a Wavefront OBJ quad mesh (352 verts, 320 faces).

    Output is byte-deterministic for a given cloud.
    """
    cloud = np.asarray(cloud)
    if cloud.shape != (NUM_POINTS, 3):
        raise ValueError(f"expected cloud of shape ({NUM_POINTS}, 3), got {cloud.shape}")
    lines = []
    for x, y, z in cloud:
        lines.append(f"v {x!r} {y!r} {z!r}")
    n = RING_RESOLUTION
    for ring in range(NUM_RINGS - 1):
        for j in range(n):
            a = ring * n + j + 1
            b = ring * n + (j + 1) % n + 1
            c = (ring + 1) * n + (j + 1) % n + 1
            d = (ring + 1) * n + j + 1
            lines.append(f"f {a} {b} {c} {d}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def shape_to_dict(shape: PotShape) -> dict:
    return {
        "base_radius": shape.base_radius,
        "height": shape.height,
        "ring_heights": list(shape.ring_heights),
        "radius_scales": list(shape.radius_scales),
    }


def shape_from_dict(data: dict) -> PotShape:
    """Build a PotShape from a plain dict, naming the offending field on error."""
    if not isinstance(data, dict):
        raise ValueError(f"shape data must be a mapping, got {type(data).__name__}")
    known = {"base_radius", "height", "ring_heights", "radius_scales"}
    for key in data:
        if key not in known:
            raise ValueError(f"unknown shape field '{key}'")
    kwargs = {}
    for key in ("base_radius", "height"):
        if key in data:
            try:
                kwargs[key] = float(data[key])
            except (TypeError, ValueError):
                raise ValueError(f"shape field '{key}' must be a number") from None
    height = kwargs.get("height", DEFAULT_HEIGHT)
    for key in ("ring_heights", "radius_scales"):
        if key in data:
            try:
                kwargs[key] = tuple(float(v) for v in data[key])
            except (TypeError, ValueError):
                raise ValueError(f"shape field '{key}' must be a list of numbers") from None
    if "ring_heights" not in kwargs:
        kwargs["ring_heights"] = _default_ring_heights(height)
    try:
        return PotShape(**kwargs)
    except ValueError as exc:
        raise ValueError(f"invalid shape file: {exc}") from None
