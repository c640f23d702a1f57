"""Walk-on-spheres solvers for torsion values and Newtonian capacity.

Everything here rides on two facts about the generator-Laplacian process:
the expected time to leave a ball of radius r from its centre is r^2/6, and
the exit law from the centre is uniform on the sphere.  A walk therefore
jumps from sphere centre to sphere surface, accumulating r^2/6 per jump
when an exit time is wanted, until it lands within ``eps_shell`` of the
absorbing set.

Obstacles (fractures) are tubes of radius ``eps_tube`` around a sampled
polyline, or balls.  Distance to a polyline is served in two tiers: a
decimated-vertex scan giving certified lower/upper bounds (cheap, used far
from the tube, where a slightly shrunken jump sphere costs iterations but
no bias), and the exact voxel-grid query near the tube where absorption
decisions are made.

Capacity uses the standard exterior trick: walkers launch uniformly from a
sphere of radius ``launch_radius`` enclosing the obstacle, and once a
walker passes twice that radius it either escapes for good (probability
1 - launch_radius/s) or re-enters the launch sphere at a point drawn from
the exterior Poisson kernel by rejection.  The capacity estimate is then
4 pi launch_radius times the hit fraction.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import BallSpec, CylinderSpec, TracePolyline, _grid_query_one
from .records import Estimate
from .stochastic import PathConfig, RngStream, sample_trace

__all__ = [
    "WosConfig",
    "wos_exit_time_sample",
    "torsion_value",
    "fractured_rigidity",
    "capacity_estimate",
    "KappaResult",
    "kappa_estimate",
]


@dataclass(frozen=True)
class WosConfig:
    """Tolerances for walk-on-spheres runs.

    ``eps_shell`` is the absorption thickness (walks stop within it of the
    absorbing boundary; bias is O(eps_shell)).  ``eps_tube`` is the radius
    of the solid tube around a fracture polyline.  The shell must be at
    most a quarter of the tube so absorption on the tube cannot tunnel
    through it.  ``launch_radius`` (capacity only) defaults to 1.5 times
    the obstacle reach.
    """

    eps_shell: float = 1e-3
    eps_tube: float = 0.04
    launch_radius: float | None = None
    max_jumps: int = 200_000

    def __post_init__(self):
        if not (self.eps_shell > 0.0 and math.isfinite(self.eps_shell)):
            raise ValueError("eps_shell must be positive and finite")
        if self.eps_tube < 0.0 or not math.isfinite(self.eps_tube):
            raise ValueError("eps_tube must be nonnegative and finite")
        if self.eps_tube > 0.0 and self.eps_shell > 0.25 * self.eps_tube:
            raise ValueError("eps_shell must be <= eps_tube / 4")
        if self.launch_radius is not None and not self.launch_radius > 0.0:
            raise ValueError("launch_radius must be positive")
        if self.max_jumps < 1:
            raise ValueError("max_jumps must be positive")


_NO_SEGS = np.zeros((1, 3))
_NO_START = np.array([0, 1], dtype=np.int64)
_NO_ITEMS = np.array([0], dtype=np.int64)


@njit(cache=True)
def _coarse_nearest(px, py, pz, coarse):
    best = 1e300
    for k in range(coarse.shape[0]):
        dx = px - coarse[k, 0]
        dy = py - coarse[k, 1]
        dz = pz - coarse[k, 2]
        d2 = dx * dx + dy * dy + dz * dz
        if d2 < best:
            best = d2
    return math.sqrt(best)


@njit(cache=True)
def _torsion_iter(pos, acc, state, act, dirs, dom_kind, dom_r, dom_half,
                  obs_kind, oa, ob, gx, gy, gz, cell, ngx, ngy, ngz,
                  gstart, gitems, coarse, gap, ocx, ocy, ocz, obs_r,
                  eps_shell, eps_tube):
    # below this clearance the exact query runs; above it the coarse lower
    # bound is both safe and within `gap` of the truth
    floor = max(4.0 * eps_shell, 0.5 * gap)
    for j in range(act.shape[0]):
        i = act[j]
        px = pos[i, 0]
        py = pos[i, 1]
        pz = pos[i, 2]
        if dom_kind == 0:
            r = dom_r - math.sqrt(py * py + pz * pz)
            axial = dom_half - abs(px)
            if axial < r:
                r = axial
        else:
            r = dom_r - math.sqrt(px * px + py * py + pz * pz)
        if r < eps_shell:
            state[i] = 1
            continue
        if obs_kind == 1:
            clear = _coarse_nearest(px, py, pz, coarse) - gap - eps_tube
            if clear < floor:
                clear = _grid_query_one(px, py, pz, oa, ob, gx, gy, gz,
                                        cell, ngx, ngy, ngz, gstart,
                                        gitems) - eps_tube
                if clear < eps_shell:
                    state[i] = 2
                    continue
            if clear < r:
                r = clear
        elif obs_kind == 2:
            dx = px - ocx
            dy = py - ocy
            dz = pz - ocz
            clear = math.sqrt(dx * dx + dy * dy + dz * dz) - obs_r
            if clear < eps_shell:
                state[i] = 2
                continue
            if clear < r:
                r = clear
        acc[i] += r * r / 6.0
        ux = dirs[j, 0]
        uy = dirs[j, 1]
        uz = dirs[j, 2]
        nn = math.sqrt(ux * ux + uy * uy + uz * uz)
        if nn > 0.0:
            s = r / nn
            pos[i, 0] = px + s * ux
            pos[i, 1] = py + s * uy
            pos[i, 2] = pz + s * uz


@njit(cache=True)
def _capacity_iter(pos, state, act, dirs, esc_u, obs_kind, oa, ob, gx, gy,
                   gz, cell, ngx, ngy, ngz, gstart, gitems, coarse, gap,
                   ocx, ocy, ocz, obs_r, eps_shell, eps_tube, rho, trigger):
    floor = max(4.0 * eps_shell, 0.5 * gap)
    for j in range(act.shape[0]):
        i = act[j]
        px = pos[i, 0]
        py = pos[i, 1]
        pz = pos[i, 2]
        s = math.sqrt(px * px + py * py + pz * pz)
        if s > trigger:
            # escape for good with probability 1 - rho/s, else mark for
            # Poisson-kernel re-entry onto the launch sphere
            if esc_u[j] * s >= rho:
                state[i] = 2
            else:
                state[i] = 3
            continue
        if obs_kind == 1:
            r = _coarse_nearest(px, py, pz, coarse) - gap - eps_tube
            if r < floor:
                r = _grid_query_one(px, py, pz, oa, ob, gx, gy, gz, cell,
                                    ngx, ngy, ngz, gstart, gitems) - eps_tube
                if r < eps_shell:
                    state[i] = 1
                    continue
        else:
            dx = px - ocx
            dy = py - ocy
            dz = pz - ocz
            r = math.sqrt(dx * dx + dy * dy + dz * dz) - obs_r
            if r < eps_shell:
                state[i] = 1
                continue
        ux = dirs[j, 0]
        uy = dirs[j, 1]
        uz = dirs[j, 2]
        nn = math.sqrt(ux * ux + uy * uy + uz * uz)
        if nn > 0.0:
            sc = r / nn
            pos[i, 0] = px + sc * ux
            pos[i, 1] = py + sc * uy
            pos[i, 2] = pz + sc * uz


def _obstacle_args(obstacle, cfg: WosConfig):
    if obstacle is None:
        return (0, _NO_SEGS, _NO_SEGS, 0.0, 0.0, 0.0, 1.0, 1, 1, 1,
                _NO_START, _NO_ITEMS, _NO_SEGS, 0.0, 0.0, 0.0, 0.0, 0.0)
    if isinstance(obstacle, TracePolyline):
        (a, b, gx, gy, gz, cell, ngx, ngy, ngz, gstart, gitems, coarse,
         gap) = obstacle.index_arrays()
        return (1, a, b, gx, gy, gz, cell, ngx, ngy, ngz, gstart, gitems,
                coarse, gap, 0.0, 0.0, 0.0, 0.0)
    if isinstance(obstacle, BallSpec):
        cx, cy, cz = obstacle.center
        return (2, _NO_SEGS, _NO_SEGS, 0.0, 0.0, 0.0, 1.0, 1, 1, 1,
                _NO_START, _NO_ITEMS, _NO_SEGS, 0.0, float(cx), float(cy),
                float(cz), obstacle.radius)
    raise TypeError("obstacle must be None, a TracePolyline or a BallSpec")


def _domain_args(domain):
    if isinstance(domain, CylinderSpec):
        return 0, domain.radius, 0.5 * domain.length
    if isinstance(domain, BallSpec):
        if any(c != 0.0 for c in domain.center):
            raise ValueError("ball domains must be centred at the origin")
        return 1, domain.radius, 0.0
    raise TypeError("domain must be a cylinder or a ball")


def _run_torsion(pos0: np.ndarray, domain, obstacle, cfg: WosConfig,
                 gen: np.random.Generator) -> np.ndarray:
    """One walk per row of pos0; returns the accumulated r^2/6 sums."""
    pos = np.ascontiguousarray(pos0, dtype=float).copy()
    n = pos.shape[0]
    acc = np.zeros(n)
    state = np.zeros(n, dtype=np.int8)
    dom_kind, dom_r, dom_half = _domain_args(domain)
    obs = _obstacle_args(obstacle, cfg)
    for _ in range(cfg.max_jumps):
        act = np.flatnonzero(state == 0)
        if act.size == 0:
            return acc
        dirs = gen.standard_normal((act.size, 3))
        _torsion_iter(pos, acc, state, act, dirs, dom_kind, dom_r, dom_half,
                      *obs, cfg.eps_shell, cfg.eps_tube)
    raise RuntimeError(
        f"{int((state == 0).sum())} walks still active after "
        f"{cfg.max_jumps} jumps")


def wos_exit_time_sample(x, domain, config: WosConfig, stream: RngStream,
                         obstacle=None) -> float:
    """A single unbiased-to-O(eps_shell) sample of the torsion value at x."""
    x = np.asarray(x, dtype=float).reshape(1, 3)
    return float(_run_torsion(x, domain, obstacle, config,
                              stream.generator())[0])


def torsion_value(x, domain, n_walks: int, config: WosConfig,
                  stream: RngStream, obstacle=None) -> Estimate:
    """Monte Carlo torsion value (expected exit time) at a fixed point."""
    if n_walks < 2:
        raise ValueError("need at least two walks")
    x = np.asarray(x, dtype=float).reshape(3)
    pos0 = np.tile(x, (n_walks, 1))
    vals = _run_torsion(pos0, domain, obstacle, config, stream.generator())
    return Estimate(float(vals.mean()),
                    float(vals.std(ddof=1) / math.sqrt(n_walks)),
                    n_walks, stream.seed, stream.stream_id)


def _inside_obstacle(obstacle, points: np.ndarray, cfg: WosConfig,
                     ) -> np.ndarray:
    if obstacle is None:
        return np.zeros(points.shape[0], dtype=bool)
    if isinstance(obstacle, TracePolyline):
        return np.asarray(obstacle.distance(points)) <= cfg.eps_tube
    return np.asarray(obstacle.boundary_distance(points)) > 0.0


def fractured_rigidity(domain, obstacle, n_points: int, config: WosConfig,
                       stream: RngStream, n_walks: int = 1) -> Estimate:
    """Volume integral of the torsion function of domain minus obstacle.

    Uniform sample points inside the obstacle tube contribute zero (they
    are outside the fractured domain); the rest get ``n_walks`` walks each.
    The standard error is taken across sample points, so it is valid for
    any ``n_walks``.
    """
    from .stochastic import StartMode, sample_start  # local to avoid cycle

    if not getattr(domain, "is_finite", True):
        raise ValueError("rigidity needs a finite domain")
    if n_points < 2:
        raise ValueError("need at least two sample points")
    pts = sample_start(domain, StartMode.UNIFORM, stream.child(0), n_points)
    vals = np.zeros(n_points)
    outside = ~_inside_obstacle(obstacle, pts, config)
    idx = np.flatnonzero(outside)
    if idx.size:
        gen = stream.generator(1)
        walk_pts = np.repeat(pts[idx], n_walks, axis=0)
        walked = _run_torsion(walk_pts, domain, obstacle, config, gen)
        vals[idx] = walked.reshape(idx.size, n_walks).mean(axis=1)
    return Estimate(domain.volume * float(vals.mean()),
                    domain.volume * float(vals.std(ddof=1)
                                          / math.sqrt(n_points)),
                    n_points, stream.seed, stream.stream_id)


def _obstacle_reach(obstacle, cfg: WosConfig) -> float:
    if isinstance(obstacle, TracePolyline):
        return obstacle.circumradius() + cfg.eps_tube
    if isinstance(obstacle, BallSpec):
        c = np.asarray(obstacle.center)
        return float(np.linalg.norm(c)) + obstacle.radius
    raise TypeError("capacity needs a TracePolyline or BallSpec obstacle")


def capacity_estimate(obstacle, n_walkers: int, config: WosConfig,
                      stream: RngStream) -> Estimate:
    """Newtonian capacity of the obstacle (tube for polylines).

    Normalisation: capacity of a ball of radius r is 4 pi r.
    """
    if n_walkers < 2:
        raise ValueError("need at least two walkers")
    reach = _obstacle_reach(obstacle, config)
    rho = config.launch_radius if config.launch_radius is not None \
        else 1.5 * reach
    if not rho > reach + config.eps_shell:
        raise ValueError(
            f"launch_radius {rho:g} must exceed the obstacle reach "
            f"{reach:g} plus the absorption shell")
    gen = stream.generator()
    u = gen.standard_normal((n_walkers, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    pos = np.ascontiguousarray(rho * u)
    state = np.zeros(n_walkers, dtype=np.int8)
    obs = _obstacle_args(obstacle, config)
    trigger = 2.0 * rho
    for _ in range(config.max_jumps):
        act = np.flatnonzero(state == 0)
        if act.size == 0:
            break
        dirs = gen.standard_normal((act.size, 3))
        esc_u = gen.random(act.size)
        _capacity_iter(pos, state, act, dirs, esc_u, *obs,
                       config.eps_shell, config.eps_tube, rho, trigger)
        pend = np.flatnonzero(state == 3)
        while pend.size:
            cand = gen.standard_normal((pend.size, 3))
            cand *= rho / np.linalg.norm(cand, axis=1, keepdims=True)
            y = pos[pend]
            s = np.linalg.norm(y, axis=1)
            ratio = (s - rho) / np.linalg.norm(y - cand, axis=1)
            ok = gen.random(pend.size) < ratio ** 3
            hit = pend[ok]
            pos[hit] = cand[ok]
            state[hit] = 0
            pend = pend[~ok]
    else:
        raise RuntimeError(
            f"{int((state == 0).sum())} capacity walkers still active "
            f"after {config.max_jumps} jumps")
    vals = 4.0 * math.pi * rho * (state == 1).astype(float)
    return Estimate(float(vals.mean()),
                    float(vals.std(ddof=1) / math.sqrt(n_walkers)),
                    n_walkers, stream.seed, stream.stream_id)


@dataclass(frozen=True)
class KappaResult:
    """Tube-capacity estimates at two tube radii plus the extrapolation.

    ``extrapolated`` is the per-trace linear extrapolation to tube radius
    zero (2 k(eps0) - k(2 eps0), shared traces), which removes the leading
    radius dependence; ``at_eps`` keeps the raw levels.
    """

    extrapolated: Estimate
    at_eps: tuple
    ball_radius: float
    n_traces: int
    n_walkers: int
    dt: float
    launch_radius: float


def _kappa_trace(args) -> tuple:
    (seed, stream_id, idx, ball_radius, eps_levels, n_walkers, dt, rho,
     max_jumps) = args
    sub = RngStream(seed, stream_id).child(idx)
    ball = BallSpec(ball_radius)
    trace = sample_trace(ball, (0.0, 0.0, 0.0), PathConfig(dt=dt),
                         sub.child(0))
    out = []
    for k, eps in enumerate(eps_levels):
        cfg = WosConfig(eps_shell=eps / 40.0, eps_tube=eps,
                        launch_radius=rho, max_jumps=max_jumps)
        est = capacity_estimate(trace, n_walkers, cfg, sub.child(1 + k))
        out.append(est.mean)
    return tuple(out)


def kappa_estimate(stream: RngStream, n_traces: int = 256,
                   n_walkers: int = 512, ball_radius: float = 1.0,
                   eps0: float = 0.04, dt: float | None = None,
                   launch_factor: float = 1.5, workers: int = 1,
                   ) -> KappaResult:
    """Expected tube capacity of a Brownian path run until it leaves a ball.

    Every length in the construction scales with ``ball_radius``: the path
    starts at the centre with step ``1e-4 ball_radius^2``, tube radii are
    ``(2 eps0, eps0) * ball_radius``, and walkers launch from
    ``launch_factor * ball_radius``.  Each trace contributes one value per
    tube radius plus the extrapolation; errors are across traces, so the
    result is independent of how traces are distributed over workers.
    """
    if n_traces < 2:
        raise ValueError("need at least two traces")
    a = ball_radius
    if dt is None:
        dt = 1e-4 * a * a
    eps_levels = (2.0 * eps0 * a, eps0 * a)
    rho = launch_factor * a
    if not rho > a + eps_levels[0]:
        raise ValueError("launch_factor too small for the tube radius")
    argv = [(stream.seed, stream.stream_id, i, a, eps_levels, n_walkers,
             dt, rho, 200_000) for i in range(n_traces)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_kappa_trace, argv, chunksize=8))
    else:
        raw = [_kappa_trace(a_) for a_ in argv]
    raw = np.asarray(raw)
    extrap = 2.0 * raw[:, 1] - raw[:, 0]
    root_n = math.sqrt(n_traces)

    def _est(v):
        return Estimate(float(v.mean()), float(v.std(ddof=1) / root_n),
                        n_traces, stream.seed, stream.stream_id)

    return KappaResult(
        extrapolated=_est(extrap),
        at_eps=((eps_levels[0], _est(raw[:, 0])),
                (eps_levels[1], _est(raw[:, 1]))),
        ball_radius=a, n_traces=n_traces, n_walkers=n_walkers, dt=dt,
        launch_radius=rho)
