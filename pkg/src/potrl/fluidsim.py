"""Particle water simulator for scoring pot designs.

Water is modeled as independent ballistic particles under gravity that collide
with the interior of the pot (and, in the pouring task, with a receiving cup).
There is no particle-particle interaction: the goal is a fast, deterministic
scorer that orders shapes sensibly, not fluid fidelity.

Frames and conventions:
  - World frame: z up, gravity along -z. The pot pivots about the center of
    its top rim, which is anchored at ``pose.pivot`` (default: world origin).
  - Tilt is a rotation in the x-z plane: positive tilt swings the pot floor
    toward -x, so the mouth opens toward +x where the cup sits.
  - Collisions are resolved in the pot body frame. A particle that was inside
    the pot on the previous frame and has crossed the wall (radial overshoot
    at its height) or the floor is projected back to the surface; its normal
    velocity is reflected and scaled by -restitution, and its tangential
    speed is reduced by friction proportional to the normal impulse
    (tangential_damping acts as the friction coefficient).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PotShape, contains_batch, radius_profile

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]

# Small inset used when projecting particles back to a surface, so that a
# resting particle strictly satisfies the containment predicate.
SURFACE_INSET = 1e-9

# Per-particle material spread (multipliers on restitution / friction).
# Without particle-particle forces all particles would move in lockstep and
# pour out as a single clump; giving particle i slightly different contact
# properties (deterministic in i, independent of the seed) spreads the stream
# into a distribution, which is what makes fractional rewards informative.
RESTITUTION_SPREAD = (0.7, 1.3)
FRICTION_SPREAD = (0.5, 1.5)
_PHI = 0.6180339887498949  # golden ratio conjugate
_PSI = 0.41421356237309515  # sqrt(2) - 1


def _material_arrays(n: int, cfg: "SimConfig") -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(n)
    u = (i * _PHI) % 1.0
    w = (i * _PSI) % 1.0
    lo, hi = RESTITUTION_SPREAD
    rest = cfg.restitution * (lo + (hi - lo) * u)
    lo, hi = FRICTION_SPREAD
    fric = cfg.tangential_damping * (lo + (hi - lo) * w)
    return np.clip(rest, 0.0, 1.0), np.clip(fric, 0.0, 1.0)


class SpawnError(RuntimeError):
    """Raised when the requested fill volume cannot hold any particles."""


@dataclass
class SimConfig:
    dt: float = 1.0 / 240.0
    gravity: float = 9.81
    restitution: float = 0.3
    tangential_damping: float = 0.2
    particle_count: int = 200
    fill_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.gravity < 0:
            raise ValueError(f"gravity must be non-negative, got {self.gravity}")
        for name in ("restitution", "tangential_damping", "fill_fraction"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.particle_count < 1:
            raise ValueError(f"particle_count must be >= 1, got {self.particle_count}")


@dataclass(frozen=True)
class PotPose:
    """Tilt of the pot about its rim-center pivot, plus the pivot's world position."""

    tilt_angle: float = 0.0  # radians, rotation in the x-z plane
    pivot: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if not abs(self.tilt_angle) <= math.pi:
            raise ValueError(f"|tilt_angle| must be <= pi, got {self.tilt_angle}")


@dataclass(frozen=True)
class CupSpec:
    """Open-topped receiving cup, axis-aligned, fixed in the world frame.

    ``center_offset`` locates the center of the cup floor relative to the pot
    pivot. The default sits a little out along +x with its opening safely
    below the swept rim, so a plain cylinder's pour stream only clips it:
    most water misses, leaving headroom for better designs.
    """

    center_offset: tuple[float, float, float] = (0.6, 0.0, -2.3)
    radius: float = 0.5
    height: float = 1.0

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError(f"cup radius must be positive, got {self.radius}")
        if self.height <= 0:
            raise ValueError(f"cup height must be positive, got {self.height}")

    @classmethod
    def default_for(cls, pot_height: float) -> "CupSpec":
        """Default placement scaled to the pot height."""
        return cls(center_offset=(0.3 * pot_height, 0.0, -1.15 * pot_height))


@dataclass(frozen=True)
class Scenario:
    """Motion constants for the two tasks.

    The shake waveform is a clipped sine: ``amp * clip(K sin(2 pi f t), -1, 1)``
    with K = shake_abruptness. K = 1 is a smooth sinusoid; larger K holds the
    extremes and snaps between them, which is what actually throws water out.
    """

    pour_tilt_deg: float = 130.0
    pour_ramp_s: float = 2.0
    pour_settle_s: float = 1.0
    shake_amplitude_deg: float = 70.0
    shake_duration_s: float = 13.0
    shake_freq_hz: float = 1.0
    shake_abruptness: float = 2.0


@dataclass(frozen=True)
class TaskOutcome:
    """Particle accounting at the end of a task simulation."""

    n_total: int
    n_cup: int
    n_pot: int
    n_spilled: int

    def __post_init__(self) -> None:
        counts = (self.n_cup, self.n_pot, self.n_spilled)
        if any(c < 0 for c in counts) or self.n_total < 0:
            raise ValueError("particle counts must be non-negative")
        if sum(counts) != self.n_total:
            raise ValueError(
                f"counts {counts} do not partition n_total = {self.n_total}"
            )


@dataclass
class Particles:
    """Struct-of-arrays particle state in the world frame."""

    pos: np.ndarray  # (n, 3)
    vel: np.ndarray  # (n, 3)

    def __len__(self) -> int:
        return self.pos.shape[0]

    def copy(self) -> "Particles":
        return Particles(self.pos.copy(), self.vel.copy())


def spawn_particles(shape: PotShape, cfg: SimConfig, seed) -> Particles:
    """Drop particles uniformly into the pot interior below the fill plane.

    Positions are sampled in the body frame (pot upright) and returned in the
    world frame for a zero-tilt pose. Velocities are zero. Reproducible for a
    given seed.
    """
    rng = np.random.default_rng(seed)
    z_fill = cfg.fill_fraction * shape.height
    if z_fill <= 0.0:
        raise SpawnError("fill volume is empty (fill_fraction * height <= 0)")
    r_max = float(np.max(shape.radii))
    n = cfg.particle_count
    out = np.empty((n, 3))
    got = 0
    for _ in range(1000):
        k = max(4 * (n - got), 128)
        xy = rng.uniform(-r_max, r_max, size=(k, 2))
        z = rng.uniform(0.0, z_fill, size=k)
        wall = radius_profile(shape, z) - SURFACE_INSET
        ok = (xy[:, 0] ** 2 + xy[:, 1] ** 2 < wall * wall) & (z > 0.0)
        take = min(int(ok.sum()), n - got)
        if take:
            idx = np.flatnonzero(ok)[:take]
            out[got : got + take, 0] = xy[idx, 0]
            out[got : got + take, 1] = xy[idx, 1]
            out[got : got + take, 2] = z[idx]
            got += take
        if got == n:
            break
    else:
        raise SpawnError("could not place particles inside the pot interior")
    # body -> world at zero tilt: subtract the rim-center pivot height
    out[:, 2] -= shape.height
    return Particles(pos=out, vel=np.zeros((n, 3)))


def _friction_scale(tmag: np.ndarray, td: float, impulse: np.ndarray) -> np.ndarray:
    """Tangential speed multiplier: reduce |v_t| by td * impulse, floored at 0."""
    safe = np.where(tmag > 0.0, tmag, 1.0)
    return np.where(tmag > 0.0, np.maximum(0.0, 1.0 - td * impulse / safe), 0.0)


def _collide_frame(pos, vel, in_pot, in_cup, c, s, omega, shape, rest, fric, cup):
    """Resolve collisions for one frame, in place. Returns updated flags.

    ``in_pot`` / ``in_cup`` say which particles were inside at the end of the
    previous frame; only those are tested for wall/floor crossings (the pot
    wall is one-sided: you cannot collide with it from outside). ``omega`` is
    the pot's tilt rate; the response acts on velocity relative to the moving
    wall, so a swinging pot transfers momentum to the water. ``rest`` and
    ``fric`` are per-particle restitution / friction coefficients.
    """
    h = shape.height
    heights = shape.heights
    radii = shape.radii

    px, py, pz = pos[:, 0], pos[:, 1], pos[:, 2]
    vx, vy, vz = vel[:, 0], vel[:, 1], vel[:, 2]

    # body frame: x_b = c x - s z, z_b = s x + c z + h (pivot at rim center)
    xb = c * px - s * pz
    yb = py
    zb = s * px + c * pz + h
    rb2 = xb * xb + yb * yb
    wall_r = np.interp(zb, heights, radii) - SURFACE_INSET

    wall_m = in_pot & (zb <= h) & (rb2 > wall_r * wall_r)
    floor_m = in_pot & (zb < SURFACE_INSET)
    touched = wall_m | floor_m

    if touched.any():
        vxb = c * vx - s * vz
        vyb = vy.copy()
        vzb = s * vx + c * vz

        if wall_m.any():
            sub = np.flatnonzero(wall_m)
            r = np.sqrt(rb2[sub])
            nx = xb[sub] / r
            ny = yb[sub] / r
            f = wall_r[sub] / r
            xb[sub] *= f
            yb[sub] *= f
            # wall velocity at the contact point, in body coordinates
            wbx = omega * (zb[sub] - h)
            wbz = -omega * xb[sub]
            rvx = vxb[sub] - wbx
            rvy = vyb[sub]
            rvz = vzb[sub] - wbz
            vn = rvx * nx + rvy * ny
            hit = vn > 0.0
            if hit.any():
                k = sub[hit]
                e = rest[k]
                vnh = vn[hit]
                j = (1.0 + e) * vnh
                tx = rvx[hit] - vnh * nx[hit]
                ty = rvy[hit] - vnh * ny[hit]
                tz = rvz[hit]
                g = _friction_scale(np.sqrt(tx * tx + ty * ty + tz * tz), fric[k], j)
                vxb[k] = wbx[hit] + (-e * vnh * nx[hit] + g * tx)
                vyb[k] = -e * vnh * ny[hit] + g * ty
                vzb[k] = wbz[hit] + g * tz

        if floor_m.any():
            sub = np.flatnonzero(floor_m)
            zb[sub] = SURFACE_INSET
            wbx = omega * (zb[sub] - h)
            wbz = -omega * xb[sub]
            rvx = vxb[sub] - wbx
            rvy = vyb[sub]
            rvz = vzb[sub] - wbz
            vn = -rvz  # outward normal is -z
            hit = vn > 0.0
            if hit.any():
                k = sub[hit]
                e = rest[k]
                vnh = vn[hit]
                j = (1.0 + e) * vnh
                tx = rvx[hit]
                ty = rvy[hit]
                g = _friction_scale(np.sqrt(tx * tx + ty * ty), fric[k], j)
                vxb[k] = wbx[hit] + g * tx
                vyb[k] = g * ty
                vzb[k] = wbz[hit] + e * vnh

        # refresh cached body-frame quantities for touched particles
        t = touched
        rb2[t] = xb[t] * xb[t] + yb[t] * yb[t]
        wall_r[t] = np.interp(zb[t], heights, radii) - SURFACE_INSET
        # body -> world write-back (touched only, so free particles keep exact coords)
        zt = zb[t] - h
        px[t] = c * xb[t] + s * zt
        pz[t] = -s * xb[t] + c * zt
        py[t] = yb[t]
        vx[t] = c * vxb[t] + s * vzb[t]
        vz[t] = -s * vxb[t] + c * vzb[t]
        vy[t] = vyb[t]

    in_pot_new = (zb >= 0.0) & (zb <= h) & (rb2 < (wall_r + SURFACE_INSET) ** 2)

    in_cup_new = in_cup
    if cup is not None:
        bx, by, bz = cup.center_offset
        rc = cup.radius - SURFACE_INSET
        hc = cup.height
        relx = px - bx
        rely = py - by
        relz = pz - bz
        rr2 = relx * relx + rely * rely

        cwall = in_cup & (relz <= hc) & (rr2 > rc * rc)
        cfloor = in_cup & (relz < SURFACE_INSET)
        if cwall.any():
            sub = np.flatnonzero(cwall)
            r = np.sqrt(rr2[sub])
            nx = relx[sub] / r
            ny = rely[sub] / r
            f = rc / r
            px[sub] = bx + relx[sub] * f
            py[sub] = by + rely[sub] * f
            vn = vx[sub] * nx + vy[sub] * ny
            hit = vn > 0.0
            if hit.any():
                k = sub[hit]
                e = rest[k]
                vnh = vn[hit]
                j = (1.0 + e) * vnh
                tx = vx[k] - vnh * nx[hit]
                ty = vy[k] - vnh * ny[hit]
                tz = vz[k]
                g = _friction_scale(np.sqrt(tx * tx + ty * ty + tz * tz), fric[k], j)
                vx[k] = -e * vnh * nx[hit] + g * tx
                vy[k] = -e * vnh * ny[hit] + g * ty
                vz[k] = g * tz
        if cfloor.any():
            sub = np.flatnonzero(cfloor)
            pz[sub] = bz + SURFACE_INSET
            vn = -vz[sub]
            hit = vn > 0.0
            if hit.any():
                k = sub[hit]
                e = rest[k]
                vnh = vn[hit]
                j = (1.0 + e) * vnh
                tx = vx[k]
                ty = vy[k]
                g = _friction_scale(np.sqrt(tx * tx + ty * ty), fric[k], j)
                vx[k] = g * tx
                vy[k] = g * ty
                vz[k] = e * vnh

        if cwall.any() or cfloor.any():
            m = cwall | cfloor
            relx[m] = px[m] - bx
            rely[m] = py[m] - by
            relz[m] = pz[m] - bz
            rr2[m] = relx[m] * relx[m] + rely[m] * rely[m]
        in_cup_new = (relz >= 0.0) & (relz <= hc) & (rr2 < cup.radius * cup.radius)

    return in_pot_new, in_cup_new


@njit(cache=True)
def _interp_radius(z, heights, radii):
    if z <= heights[0]:
        return radii[0]
    if z >= heights[-1]:
        return radii[-1]
    for j in range(len(heights) - 1):
        if z < heights[j + 1]:
            t = (z - heights[j]) / (heights[j + 1] - heights[j])
            return radii[j] + t * (radii[j + 1] - radii[j])
    return radii[-1]


@njit(cache=True)
def _run_frames_kernel(
    pos,
    vel,
    in_pot,
    in_cup,
    cos_t,
    sin_t,
    omegas,
    heights,
    radii,
    h,
    g_dt,
    dt,
    rest,
    fric,
    has_cup,
    bx,
    by,
    bz,
    rc,
    hc,
):
    """Scalar frame loop; same contact model as the numpy reference path."""
    n = pos.shape[0]
    inset = SURFACE_INSET
    for k in range(cos_t.shape[0]):
        c = cos_t[k]
        s = sin_t[k]
        om = omegas[k]
        for i in range(n):
            vel[i, 2] -= g_dt
            px = pos[i, 0] + vel[i, 0] * dt
            py = pos[i, 1] + vel[i, 1] * dt
            pz = pos[i, 2] + vel[i, 2] * dt

            xb = c * px - s * pz
            yb = py
            zb = s * px + c * pz + h
            touched = False

            if in_pot[i]:
                vx = vel[i, 0]
                vy = vel[i, 1]
                vz = vel[i, 2]
                vxb = c * vx - s * vz
                vyb = vy
                vzb = s * vx + c * vz
                e = rest[i]
                mu = fric[i]

                wr = _interp_radius(zb, heights, radii) - inset
                r2 = xb * xb + yb * yb
                if zb <= h and r2 > wr * wr:
                    touched = True
                    r = math.sqrt(r2)
                    nx = xb / r
                    ny = yb / r
                    f = wr / r
                    xb *= f
                    yb *= f
                    wbx = om * (zb - h)
                    wbz = -om * xb
                    rvx = vxb - wbx
                    rvy = vyb
                    rvz = vzb - wbz
                    vn = rvx * nx + rvy * ny
                    if vn > 0.0:
                        j = (1.0 + e) * vn
                        tx = rvx - vn * nx
                        ty = rvy - vn * ny
                        tz = rvz
                        tmag = math.sqrt(tx * tx + ty * ty + tz * tz)
                        if tmag > 0.0:
                            g = 1.0 - mu * j / tmag
                            if g < 0.0:
                                g = 0.0
                        else:
                            g = 0.0
                        vxb = wbx + (-e * vn * nx + g * tx)
                        vyb = -e * vn * ny + g * ty
                        vzb = wbz + g * tz

                if zb < inset:
                    touched = True
                    zb = inset
                    wbx = om * (zb - h)
                    wbz = -om * xb
                    rvx = vxb - wbx
                    rvy = vyb
                    rvz = vzb - wbz
                    vn = -rvz
                    if vn > 0.0:
                        j = (1.0 + e) * vn
                        tmag = math.sqrt(rvx * rvx + rvy * rvy)
                        if tmag > 0.0:
                            g = 1.0 - mu * j / tmag
                            if g < 0.0:
                                g = 0.0
                        else:
                            g = 0.0
                        vxb = wbx + g * rvx
                        vyb = g * rvy
                        vzb = wbz + e * vn

                if touched:
                    zt = zb - h
                    px = c * xb + s * zt
                    pz = -s * xb + c * zt
                    py = yb
                    vel[i, 0] = c * vxb + s * vzb
                    vel[i, 1] = vyb
                    vel[i, 2] = -s * vxb + c * vzb

            # containment flag for the next frame
            wall = _interp_radius(zb, heights, radii)
            r2 = xb * xb + yb * yb
            in_pot[i] = (zb >= 0.0) and (zb <= h) and (r2 < wall * wall)

            if has_cup:
                relx = px - bx
                rely = py - by
                relz = pz - bz
                if in_cup[i]:
                    e = rest[i]
                    mu = fric[i]
                    rr2 = relx * relx + rely * rely
                    rci = rc - inset
                    if relz <= hc and rr2 > rci * rci:
                        r = math.sqrt(rr2)
                        nx = relx / r
                        ny = rely / r
                        f = rci / r
                        relx *= f
                        rely *= f
                        px = bx + relx
                        py = by + rely
                        vn = vel[i, 0] * nx + vel[i, 1] * ny
                        if vn > 0.0:
                            j = (1.0 + e) * vn
                            tx = vel[i, 0] - vn * nx
                            ty = vel[i, 1] - vn * ny
                            tz = vel[i, 2]
                            tmag = math.sqrt(tx * tx + ty * ty + tz * tz)
                            if tmag > 0.0:
                                g = 1.0 - mu * j / tmag
                                if g < 0.0:
                                    g = 0.0
                            else:
                                g = 0.0
                            vel[i, 0] = -e * vn * nx + g * tx
                            vel[i, 1] = -e * vn * ny + g * ty
                            vel[i, 2] = g * tz
                    if relz < inset:
                        relz = inset
                        pz = bz + inset
                        vn = -vel[i, 2]
                        if vn > 0.0:
                            j = (1.0 + e) * vn
                            tmag = math.sqrt(vel[i, 0] ** 2 + vel[i, 1] ** 2)
                            if tmag > 0.0:
                                g = 1.0 - mu * j / tmag
                                if g < 0.0:
                                    g = 0.0
                            else:
                                g = 0.0
                            vel[i, 0] = g * vel[i, 0]
                            vel[i, 1] = g * vel[i, 1]
                            vel[i, 2] = e * vn
                rr2 = relx * relx + rely * rely
                in_cup[i] = (relz >= 0.0) and (relz <= hc) and (rr2 < rc * rc)

            pos[i, 0] = px
            pos[i, 1] = py
            pos[i, 2] = pz


def step(particles: Particles, shape: PotShape, pose: PotPose, cfg: SimConfig) -> Particles:
    """Advance one frame: gravity, then collision resolution. Returns a new state.

    The pose is treated as static for the frame (no wall motion), and contact
    properties are uniform at the configured restitution / tangential_damping.
    """
    out = particles.copy()
    n = len(out)
    body = _world_to_body(out.pos, pose, shape.height)
    in_pot = contains_batch(shape, body)
    in_cup = np.zeros(n, dtype=bool)
    out.vel[:, 2] -= cfg.gravity * cfg.dt
    out.pos += out.vel * cfg.dt
    c = math.cos(pose.tilt_angle)
    s = math.sin(pose.tilt_angle)
    rest = np.full(n, cfg.restitution)
    fric = np.full(n, cfg.tangential_damping)
    if pose.pivot != (0.0, 0.0, 0.0):
        out.pos -= np.asarray(pose.pivot)
        _collide_frame(out.pos, out.vel, in_pot, in_cup, c, s, 0.0, shape, rest, fric, None)
        out.pos += np.asarray(pose.pivot)
    else:
        _collide_frame(out.pos, out.vel, in_pot, in_cup, c, s, 0.0, shape, rest, fric, None)
    return out


def _world_to_body(pos: np.ndarray, pose: PotPose, height: float) -> np.ndarray:
    c = math.cos(pose.tilt_angle)
    s = math.sin(pose.tilt_angle)
    rel = pos - np.asarray(pose.pivot)
    body = np.empty_like(rel)
    body[:, 0] = c * rel[:, 0] - s * rel[:, 2]
    body[:, 1] = rel[:, 1]
    body[:, 2] = s * rel[:, 0] + c * rel[:, 2] + height
    return body


def pour_schedule(cfg: SimConfig, scenario: Scenario) -> np.ndarray:
    """Per-frame tilt angles: linear ramp to the pour angle, then hold."""
    tilt = math.radians(scenario.pour_tilt_deg)
    n_ramp = max(1, round(scenario.pour_ramp_s / cfg.dt))
    n_settle = max(0, round(scenario.pour_settle_s / cfg.dt))
    ramp = tilt * np.arange(1, n_ramp + 1) / n_ramp
    return np.concatenate([ramp, np.full(n_settle, tilt)])


def shake_schedule(cfg: SimConfig, scenario: Scenario) -> np.ndarray:
    """Per-frame tilt angles: clipped sine between +/- the shake amplitude."""
    amp = math.radians(scenario.shake_amplitude_deg)
    n = max(1, round(scenario.shake_duration_s / cfg.dt))
    t = cfg.dt * np.arange(1, n + 1)
    raw = scenario.shake_abruptness * np.sin(2.0 * math.pi * scenario.shake_freq_hz * t)
    return amp * np.clip(raw, -1.0, 1.0)


# Toggle for tests / debugging; the numpy reference path is used when False.
USE_NUMBA = _HAVE_NUMBA


def run_tilt_schedule(
    particles: Particles,
    shape: PotShape,
    cfg: SimConfig,
    angles: np.ndarray,
    cup: CupSpec | None = None,
    dump_path=None,
) -> Particles:
    """Run the frame loop over a tilt schedule. Returns the final state.

    The pot pivot is fixed at the world origin. If ``dump_path`` is given,
    per-frame particle positions are written as CSV (frame, particle, x, y, z).
    """
    state = particles.copy()
    pos, vel = state.pos, state.vel
    n = len(state)
    angles = np.asarray(angles, dtype=float)
    cos_t = np.cos(angles)
    sin_t = np.sin(angles)
    omegas = np.diff(angles, prepend=0.0) / cfg.dt  # pot starts at rest, tilt 0
    g_dt = cfg.gravity * cfg.dt
    dt = cfg.dt
    rest, fric = _material_arrays(n, cfg)

    body0 = _world_to_body(pos, PotPose(0.0), shape.height)
    in_pot = contains_batch(shape, body0)
    in_cup = np.zeros(n, dtype=bool)

    if cup is not None:
        bx, by, bz = cup.center_offset
        rc, hc = cup.radius, cup.height
    else:
        bx = by = bz = rc = hc = 0.0

    def kernel_frames(lo: int, hi: int) -> None:
        _run_frames_kernel(
            pos, vel, in_pot, in_cup, cos_t[lo:hi], sin_t[lo:hi], omegas[lo:hi],
            shape.heights, shape.radii, shape.height, g_dt, dt, rest, fric,
            cup is not None, bx, by, bz, rc, hc,
        )

    if dump_path is None:
        if USE_NUMBA:
            kernel_frames(0, len(angles))
        else:
            nonlocal_flags = [in_pot, in_cup]
            for k in range(len(angles)):
                vel[:, 2] -= g_dt
                pos += vel * dt
                nonlocal_flags = _collide_frame(
                    pos, vel, nonlocal_flags[0], nonlocal_flags[1],
                    cos_t[k], sin_t[k], omegas[k], shape, rest, fric, cup,
                )
        return state

    with open(dump_path, "w", encoding="ascii", newline="\n") as dump:
        dump.write("frame,particle,x,y,z\n")
        _dump_frame(dump, 0, pos)
        flags = (in_pot, in_cup)
        for k in range(len(angles)):
            if USE_NUMBA:
                kernel_frames(k, k + 1)
            else:
                vel[:, 2] -= g_dt
                pos += vel * dt
                flags = _collide_frame(
                    pos, vel, flags[0], flags[1],
                    cos_t[k], sin_t[k], omegas[k], shape, rest, fric, cup,
                )
            _dump_frame(dump, k + 1, pos)
    return state


def _dump_frame(fh, frame: int, pos: np.ndarray) -> None:
    for i in range(pos.shape[0]):
        fh.write(f"{frame},{i},{pos[i, 0]!r},{pos[i, 1]!r},{pos[i, 2]!r}\n")


def classify(
    particles: Particles, shape: PotShape, tilt_angle: float, cup: CupSpec | None
) -> TaskOutcome:
    """Partition particles into cup / pot / spilled at the current instant."""
    n = len(particles)
    if cup is not None:
        bx, by, bz = cup.center_offset
        rel = particles.pos - np.array([bx, by, bz])
        rr2 = rel[:, 0] ** 2 + rel[:, 1] ** 2
        in_cup = (rel[:, 2] >= 0.0) & (rel[:, 2] <= cup.height) & (rr2 < cup.radius**2)
    else:
        in_cup = np.zeros(n, dtype=bool)
    body = _world_to_body(particles.pos, PotPose(tilt_angle), shape.height)
    in_pot = contains_batch(shape, body) & ~in_cup
    n_cup = int(in_cup.sum())
    n_pot = int(in_pot.sum())
    return TaskOutcome(n_total=n, n_cup=n_cup, n_pot=n_pot, n_spilled=n - n_cup - n_pot)


def simulate_pour(
    shape: PotShape,
    cfg: SimConfig,
    cup: CupSpec,
    seed,
    scenario: Scenario = Scenario(),
    dump_path=None,
) -> TaskOutcome:
    """Fill the pot, tilt it toward the cup over the ramp time, hold, and count."""
    particles = spawn_particles(shape, cfg, seed)
    angles = pour_schedule(cfg, scenario)
    final = run_tilt_schedule(particles, shape, cfg, angles, cup=cup, dump_path=dump_path)
    return classify(final, shape, float(angles[-1]), cup)


def simulate_shake(
    shape: PotShape,
    cfg: SimConfig,
    seed,
    scenario: Scenario = Scenario(),
    dump_path=None,
) -> TaskOutcome:
    """Fill the pot, rock it between +/- the shake amplitude, and count survivors."""
    particles = spawn_particles(shape, cfg, seed)
    angles = shake_schedule(cfg, scenario)
    final = run_tilt_schedule(particles, shape, cfg, angles, cup=None, dump_path=dump_path)
    return classify(final, shape, float(angles[-1]), None)
