"""Brownian path sampling with the generator-Laplacian convention.

The driving process has generator equal to the full Laplacian, so every
coordinate increment over a step ``dt`` is N(0, 2 dt) and the expected exit
time of the unit ball from its centre is 1/6 (r^2/6 in general, r^2/4 for
the lateral exit of an infinite unit-radius cylinder started on the axis).
Getting this factor of two right is load bearing for everything downstream,
which is why the increment variance has its own regression test.

Streams are counter-based: ``RngStream(seed, stream_id)`` keys a Philox
generator through ``numpy``'s SeedSequence, and hierarchical substreams are
derived by extending the spawn key, so replicate ``i`` of estimator ``e``
always sees the same bits no matter how work is batched or distributed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import BallSpec, CylinderSpec, TracePolyline
from .records import Estimate

__all__ = [
    "RngStream",
    "PathConfig",
    "StartMode",
    "TraceLengthError",
    "default_step",
    "sample_start",
    "sample_trace",
    "RangeStats",
    "range_statistics",
    "axial_hit_probability",
]

_BLOCK_STEPS = 8192


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream: (seed, stream_id) fixes every bit."""

    seed: int
    stream_id: int = 0

    def generator(self, *path: int) -> np.random.Generator:
        """Generator for this stream, or a child stream under ``path``.

        Distinct paths give statistically independent Philox streams; the
        same path always reproduces the same sequence.
        """
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.stream_id, *path))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *path: int) -> "RngStream":
        """A derived stream; the path is folded into a fresh 64-bit id."""
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.stream_id, *path))
        return RngStream(self.seed, int(ss.generate_state(1, np.uint64)[0]))


@dataclass(frozen=True)
class PathConfig:
    """Euler sampling step for Brownian paths.

    ``dt`` defaults (via :func:`default_step`) to 1e-4 times the squared
    domain radius, so scaled domains sample statistically scaled paths.
    """

    dt: float
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


def default_step(domain) -> PathConfig:
    return PathConfig(dt=1e-4 * domain.radius ** 2)


class StartMode(Enum):
    UNIFORM = "uniform"
    AXIS = "axis"
    CROSS_SECTION = "cross-section"
    CENTER = "center"


class TraceLengthError(RuntimeError):
    """Raised when a path fails to exit within max_steps.

    Carries the partial trace so callers can inspect or persist it.
    """

    def __init__(self, partial: TracePolyline):
        super().__init__(
            f"path still inside the domain after {partial.vertices.shape[0] - 1} steps")
        self.partial = partial


def _disc_points(gen: np.random.Generator, n: int, radius: float) -> np.ndarray:
    # polar sampling; exact uniform law on the open disc
    r = radius * np.sqrt(gen.random(n))
    phi = 2.0 * math.pi * gen.random(n)
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)


def sample_start(domain, mode: StartMode, stream: RngStream, n: int = 1,
                 ) -> np.ndarray:
    """Starting points for fracture paths; (n, 3) array.

    UNIFORM needs a finite domain; AXIS a finite cylinder; CROSS_SECTION
    seeds uniformly on the central cross-section (any cylinder); CENTER is
    the origin.
    """
    gen = stream.generator()
    if mode is StartMode.CENTER:
        return np.zeros((n, 3))
    if isinstance(domain, BallSpec):
        if mode is not StartMode.UNIFORM:
            raise ValueError(f"{mode} start undefined for a ball")
        u = gen.standard_normal((n, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        rad = domain.radius * gen.random(n) ** (1.0 / 3.0)
        return np.asarray(domain.center) + u * rad[:, None]
    if not isinstance(domain, CylinderSpec):
        raise TypeError("domain must be a cylinder or a ball")
    if mode is StartMode.CROSS_SECTION:
        out = np.zeros((n, 3))
        out[:, 1:] = _disc_points(gen, n, domain.radius)
        return out
    if not domain.is_finite:
        raise ValueError(f"{mode} start needs a finite cylinder")
    if mode is StartMode.AXIS:
        out = np.zeros((n, 3))
        out[:, 0] = domain.length * (gen.random(n) - 0.5)
        return out
    if mode is StartMode.UNIFORM:
        out = np.empty((n, 3))
        out[:, 0] = domain.length * (gen.random(n) - 0.5)
        out[:, 1:] = _disc_points(gen, n, domain.radius)
        return out
    raise ValueError(f"unsupported start mode {mode}")


def _clip_to_ball(prev: np.ndarray, step: np.ndarray, ball: BallSpec) -> np.ndarray:
    c = np.asarray(ball.center)
    w = prev - c
    a = float(step @ step)
    b = 2.0 * float(w @ step)
    q = float(w @ w) - ball.radius ** 2
    s = (-b + math.sqrt(max(b * b - 4.0 * a * q, 0.0))) / (2.0 * a)
    return prev + min(max(s, 0.0), 1.0) * step


def _clip_to_cylinder(prev: np.ndarray, step: np.ndarray,
                      cyl: CylinderSpec) -> np.ndarray:
    best = 1.0
    dy, dz = step[1], step[2]
    a = dy * dy + dz * dz
    if a > 0.0:
        b = 2.0 * (prev[1] * dy + prev[2] * dz)
        q = prev[1] ** 2 + prev[2] ** 2 - cyl.radius ** 2
        disc = b * b - 4.0 * a * q
        if disc >= 0.0:
            s = (-b + math.sqrt(disc)) / (2.0 * a)
            if 0.0 <= s <= 1.0:
                best = min(best, s)
    if cyl.is_finite and step[0] != 0.0:
        half = 0.5 * cyl.length
        for cap in (half, -half):
            s = (cap - prev[0]) / step[0]
            if 0.0 <= s <= 1.0:
                best = min(best, s)
    return prev + best * step


def sample_trace(domain, start, config: PathConfig, stream: RngStream,
                 ) -> TracePolyline:
    """Sample a Brownian path from ``start`` until it first steps outside.

    The returned polyline keeps every sampled position; the final vertex is
    the first outside sample clipped back to the boundary along its segment,
    so all earlier vertices are strictly inside and the last one sits on the
    boundary to rounding accuracy.
    """
    start = np.asarray(start, dtype=float).reshape(3)
    if not bool(np.all(domain.boundary_distance(start[None, :]) > 0.0)):
        raise ValueError("start must lie strictly inside the domain")
    gen = stream.generator()
    sigma = math.sqrt(2.0 * config.dt)
    chunks = [start[None, :]]
    pos = start
    steps_done = 0
    while steps_done < config.max_steps:
        nblock = min(_BLOCK_STEPS, config.max_steps - steps_done)
        inc = gen.standard_normal((nblock, 3)) * sigma
        block = pos + np.cumsum(inc, axis=0)
        outside = np.asarray(domain.boundary_distance(block)) <= 0.0
        if outside.any():
            k = int(np.argmax(outside))
            prev = pos if k == 0 else block[k - 1]
            step = block[k] - prev
            if isinstance(domain, BallSpec):
                hit = _clip_to_ball(prev, step, domain)
            else:
                hit = _clip_to_cylinder(prev, step, domain)
            chunks.append(block[:k])
            chunks.append(hit[None, :])
            return TracePolyline(np.concatenate(chunks), config.dt)
        chunks.append(block)
        pos = block[-1]
        steps_done += nblock
    raise TraceLengthError(TracePolyline(np.concatenate(chunks), config.dt))


@dataclass(frozen=True)
class RangeStats:
    """Sampled-range statistics of a 1-d Brownian path over [0, t]."""

    mean_range: Estimate
    mean_square_range: Estimate
    t: float
    dt: float


def range_statistics(n_paths: int, t: float, dt: float, stream: RngStream,
                     ) -> RangeStats:
    """Monte Carlo moments of max - min of the path, start included.

    With the generator-Laplacian scaling the exact first moment is
    4 sqrt(t/pi); the second moment (8 log 2) t is reported for comparison
    against quoted constants rather than asserted.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    steps = int(round(t / dt))
    if steps < 1:
        raise ValueError("t must cover at least one step")
    gen = stream.generator()
    sigma = math.sqrt(2.0 * dt)
    ranges = np.empty(n_paths)
    block = max(1, int(2e7) // steps)
    done = 0
    while done < n_paths:
        nb = min(block, n_paths - done)
        carry = np.zeros(nb)
        mx = np.zeros(nb)
        mn = np.zeros(nb)
        left = steps
        while left > 0:
            ns = min(4096, left)
            cs = np.cumsum(gen.standard_normal((nb, ns)) * sigma, axis=1)
            cs += carry[:, None]
            np.maximum(mx, cs.max(axis=1), out=mx)
            np.minimum(mn, cs.min(axis=1), out=mn)
            carry = cs[:, -1].copy()
            left -= ns
        ranges[done:done + nb] = mx - mn
        done += nb
    sq = ranges * ranges
    return RangeStats(
        mean_range=Estimate(float(ranges.mean()),
                            float(ranges.std(ddof=1) / math.sqrt(n_paths)),
                            n_paths, stream.seed, stream.stream_id),
        mean_square_range=Estimate(float(sq.mean()),
                                   float(sq.std(ddof=1) / math.sqrt(n_paths)),
                                   n_paths, stream.seed, stream.stream_id),
        t=t, dt=dt)


def axial_hit_probability(cylinder: CylinderSpec, start, n_paths: int,
                          config: PathConfig, stream: RngStream,
                          ) -> Estimate:
    """P(path from start reaches |x1| = L/2 before leaving the open tube).

    Simulated on the sampled skeleton: at each step the axial planes are
    checked before the lateral exit, so a step that crosses both counts as
    a plane hit.  Paths still running after max_steps count as misses
    (the lateral exit time has an exponential tail, so with the default cap
    the censoring bias is far below the Monte Carlo error).
    """
    if not cylinder.is_finite:
        raise ValueError("need a finite cylinder")
    start = np.asarray(start, dtype=float).reshape(3)
    gen = stream.generator()
    sigma = math.sqrt(2.0 * config.dt)
    half = 0.5 * cylinder.length
    r2 = cylinder.radius ** 2
    hit = np.zeros(n_paths, dtype=bool)
    block = 1024
    done = 0
    while done < n_paths:
        nb = min(block, n_paths - done)
        pos = np.tile(start, (nb, 1))
        alive = np.arange(nb)
        steps_done = 0
        while alive.size and steps_done < config.max_steps:
            ns = min(1024, config.max_steps - steps_done)
            inc = gen.standard_normal((alive.size, ns, 3)) * sigma
            path = np.cumsum(inc, axis=1)
            path += pos[alive][:, None, :]
            plane = np.abs(path[:, :, 0]) >= half
            lateral = path[:, :, 1] ** 2 + path[:, :, 2] ** 2 >= r2
            t_plane = np.where(plane.any(axis=1), plane.argmax(axis=1), ns)
            t_lat = np.where(lateral.any(axis=1), lateral.argmax(axis=1), ns)
            finished = (t_plane < ns) | (t_lat < ns)
            hit[done + alive[finished]] = (t_plane <= t_lat)[finished]
            pos[alive] = path[:, -1, :]
            alive = alive[~finished]
            steps_done += ns
        done += nb
    p = float(hit.mean())
    se = math.sqrt(max(p * (1.0 - p), 1.0 / n_paths) / n_paths)
    return Estimate(p, se, n_paths, stream.seed, stream.stream_id)
