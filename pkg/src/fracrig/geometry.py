"""Domains and fracture geometry.

Domains are open sets (boundary points count as outside): solid cylinders
``{|x1| < L/2, |x'| < R}`` with the axis along the first coordinate and
balls ``{|x - c| < r}``.  A cylinder may be axially infinite
(``length = INFINITE``).

A fracture is stored as a :class:`TracePolyline`: the sampled vertices of a
Brownian path plus the time step that produced them.  Distance queries
against the polyline are exact (minimum over all segments) but are served
through a uniform voxel grid over the segments, so a query inspects only
nearby cells; an expanding ring search with a per-ring lower bound keeps the
result identical to the brute-force minimum.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

INFINITE = math.inf

__all__ = [
    "INFINITE",
    "CylinderSpec",
    "BallSpec",
    "TracePolyline",
    "save_trace",
    "load_trace",
]


@dataclass(frozen=True)
class CylinderSpec:
    """Open solid cylinder of given cross-section radius and axial length."""

    radius: float
    length: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValueError("radius must be positive and finite")
        if not self.length > 0.0:
            raise ValueError("length must be positive")

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.length)

    @property
    def volume(self) -> float:
        return math.pi * self.radius ** 2 * self.length

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """Signed distance to the boundary: positive inside, negative outside.

        Exact for the lateral surface and the caps separately; the minimum
        of the two is a lower bound on the true boundary distance and is the
        radius used for sphere jumps.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        rho = np.hypot(p[:, 1], p[:, 2])
        lateral = self.radius - rho
        if self.is_finite:
            axial = 0.5 * self.length - np.abs(p[:, 0])
            out = np.minimum(lateral, axial)
        else:
            out = lateral
        return out if np.asarray(points).ndim > 1 else float(out[0])

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = self.boundary_distance(np.atleast_2d(np.asarray(points, float)))
        res = d > 0.0
        return res if np.asarray(points).ndim > 1 else bool(res[0])


@dataclass(frozen=True)
class BallSpec:
    """Open ball; doubles as the analytic obstacle for capacity checks."""

    radius: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValueError("radius must be positive and finite")

    @property
    def volume(self) -> float:
        return 4.0 * math.pi * self.radius ** 3 / 3.0

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.radius - np.linalg.norm(p - np.asarray(self.center), axis=1)
        return d if np.asarray(points).ndim > 1 else float(d[0])

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = self.boundary_distance(np.atleast_2d(np.asarray(points, float)))
        res = d > 0.0
        return res if np.asarray(points).ndim > 1 else bool(res[0])

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance to the sphere surface from outside (negative inside)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.linalg.norm(p - np.asarray(self.center), axis=1) - self.radius
        return d if np.asarray(points).ndim > 1 else float(d[0])


@njit(cache=True)
def _segment_distance_one(px, py, pz, ax, ay, az, bx, by, bz):
    dx = bx - ax
    dy = by - ay
    dz = bz - az
    wx = px - ax
    wy = py - ay
    wz = pz - az
    denom = dx * dx + dy * dy + dz * dz
    t = 0.0
    if denom > 0.0:
        t = (wx * dx + wy * dy + wz * dz) / denom
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    ex = wx - t * dx
    ey = wy - t * dy
    ez = wz - t * dz
    return math.sqrt(ex * ex + ey * ey + ez * ez)


@njit(cache=True)
def _grid_counts(a, b, ox, oy, oz, cell, nx, ny, nz):
    nseg = a.shape[0]
    counts = np.zeros(nx * ny * nz + 1, dtype=np.int64)
    for s in range(nseg):
        x0 = min(a[s, 0], b[s, 0]); x1 = max(a[s, 0], b[s, 0])
        y0 = min(a[s, 1], b[s, 1]); y1 = max(a[s, 1], b[s, 1])
        z0 = min(a[s, 2], b[s, 2]); z1 = max(a[s, 2], b[s, 2])
        ix0 = max(0, min(nx - 1, int((x0 - ox) / cell)))
        ix1 = max(0, min(nx - 1, int((x1 - ox) / cell)))
        iy0 = max(0, min(ny - 1, int((y0 - oy) / cell)))
        iy1 = max(0, min(ny - 1, int((y1 - oy) / cell)))
        iz0 = max(0, min(nz - 1, int((z0 - oz) / cell)))
        iz1 = max(0, min(nz - 1, int((z1 - oz) / cell)))
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                for iz in range(iz0, iz1 + 1):
                    counts[(ix * ny + iy) * nz + iz + 1] += 1
    return counts


@njit(cache=True)
def _grid_fill(a, b, ox, oy, oz, cell, nx, ny, nz, start):
    nseg = a.shape[0]
    cursor = start[:-1].copy()
    items = np.empty(start[-1], dtype=np.int64)
    for s in range(nseg):
        x0 = min(a[s, 0], b[s, 0]); x1 = max(a[s, 0], b[s, 0])
        y0 = min(a[s, 1], b[s, 1]); y1 = max(a[s, 1], b[s, 1])
        z0 = min(a[s, 2], b[s, 2]); z1 = max(a[s, 2], b[s, 2])
        ix0 = max(0, min(nx - 1, int((x0 - ox) / cell)))
        ix1 = max(0, min(nx - 1, int((x1 - ox) / cell)))
        iy0 = max(0, min(ny - 1, int((y0 - oy) / cell)))
        iy1 = max(0, min(ny - 1, int((y1 - oy) / cell)))
        iz0 = max(0, min(nz - 1, int((z0 - oz) / cell)))
        iz1 = max(0, min(nz - 1, int((z1 - oz) / cell)))
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                for iz in range(iz0, iz1 + 1):
                    c = (ix * ny + iy) * nz + iz
                    items[cursor[c]] = s
                    cursor[c] += 1
    return items


@njit(cache=True)
def _grid_query_one(px, py, pz, a, b, ox, oy, oz, cell, nx, ny, nz,
                    start, items):
    cx = max(0, min(nx - 1, int((px - ox) / cell)))
    cy = max(0, min(ny - 1, int((py - oy) / cell)))
    cz = max(0, min(nz - 1, int((pz - oz) / cell)))
    max_ring = max(max(cx, nx - 1 - cx), max(cy, ny - 1 - cy),
                   max(cz, nz - 1 - cz))
    best = 1e300
    for ring in range(max_ring + 1):
        # cells on ring r sit at least (r-1)*cell away from the query cell,
        # so once the best distance beats that no farther ring can win
        if best <= (ring - 1) * cell:
            break
        for dx in range(-ring, ring + 1):
            ix = cx + dx
            if ix < 0 or ix >= nx:
                continue
            on_x = abs(dx) == ring
            for dy in range(-ring, ring + 1):
                iy = cy + dy
                if iy < 0 or iy >= ny:
                    continue
                edge = on_x or abs(dy) == ring
                if edge:
                    dz0, dzstep = -ring, 1
                else:
                    dz0, dzstep = -ring, 2 * ring if ring > 0 else 1
                dz = dz0
                while dz <= ring:
                    iz = cz + dz
                    if 0 <= iz < nz:
                        c = (ix * ny + iy) * nz + iz
                        for n in range(start[c], start[c + 1]):
                            s = items[n]
                            d = _segment_distance_one(
                                px, py, pz,
                                a[s, 0], a[s, 1], a[s, 2],
                                b[s, 0], b[s, 1], b[s, 2])
                            if d < best:
                                best = d
                    dz += dzstep
    return best


@njit(cache=True)
def _grid_query_many(pts, a, b, ox, oy, oz, cell, nx, ny, nz, start, items,
                     out):
    for i in range(pts.shape[0]):
        out[i] = _grid_query_one(pts[i, 0], pts[i, 1], pts[i, 2], a, b,
                                 ox, oy, oz, cell, nx, ny, nz, start, items)


_MAX_GRID_DIM = 192
_COARSE_MAX = 384


@dataclass
class TracePolyline:
    """Polyline with a voxel-grid index for exact distance queries.

    ``vertices`` is an (n, 3) float64 array, ``step_dt`` the sampling step
    of the path that produced it (0 for synthetic polylines).  Zero-length
    segments are dropped from the index; if every segment is degenerate the
    polyline acts as a single point.
    """

    vertices: np.ndarray
    step_dt: float = 0.0
    _idx: tuple = field(init=False, repr=False)
    _coarse: tuple = field(init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 1:
            raise ValueError("vertices must be an (n, 3) array with n >= 1")
        if not np.isfinite(v).all():
            raise ValueError("vertices must be finite")
        if self.step_dt < 0.0:
            raise ValueError("step_dt must be nonnegative")
        self.vertices = v
        a = v[:-1]
        b = v[1:]
        keep = np.any(a != b, axis=1)
        a = np.ascontiguousarray(a[keep])
        b = np.ascontiguousarray(b[keep])
        if a.shape[0] == 0:
            self._idx = None
            self._coarse = (v[:1].copy(), 0.0)
            return
        seg_len = np.linalg.norm(b - a, axis=1)
        # decimated vertex chain: every chain point is within `gap` (half the
        # largest kept-to-kept arc) of a coarse vertex, so
        # min|x - coarse| - gap is a certified lower bound on the distance
        # and min|x - coarse| an upper bound; cheap far-field tier for
        # walk-on-spheres kernels
        chain = np.vstack([a, b[-1:]])
        cumarc = np.concatenate([[0.0], np.cumsum(seg_len)])
        stride = max(1, -(-a.shape[0] // _COARSE_MAX))
        kept = np.unique(np.r_[np.arange(0, chain.shape[0], stride),
                               chain.shape[0] - 1])
        gap = 0.5 * float(np.diff(cumarc[kept]).max()) if kept.size > 1 else 0.0
        self._coarse = (np.ascontiguousarray(chain[kept]), gap)
        cell = 2.0 * float(seg_len.mean())
        lo = v.min(axis=0)
        hi = v.max(axis=0)
        extent = np.maximum(hi - lo, 1e-300)
        dims = np.clip(np.ceil(extent / cell).astype(np.int64), 1,
                       _MAX_GRID_DIM)
        # if the clip engaged, grow the cell so the grid still covers the box
        cell = float(max(cell, (extent / dims).max() * (1.0 + 1e-12)))
        start = np.cumsum(_grid_counts(a, b, lo[0], lo[1], lo[2], cell,
                                       dims[0], dims[1], dims[2]))
        items = _grid_fill(a, b, lo[0], lo[1], lo[2], cell,
                           dims[0], dims[1], dims[2], start)
        self._idx = (a, b, float(lo[0]), float(lo[1]), float(lo[2]), cell,
                     int(dims[0]), int(dims[1]), int(dims[2]), start, items)

    @property
    def n_segments(self) -> int:
        return 0 if self._idx is None else self._idx[0].shape[0]

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def circumradius(self, center=(0.0, 0.0, 0.0)) -> float:
        """Radius of the smallest origin-at-``center`` ball containing it."""
        c = np.asarray(center, dtype=float)
        return float(np.linalg.norm(self.vertices - c, axis=1).max())

    def axial_extent(self) -> tuple[float, float]:
        x = self.vertices[:, 0]
        return float(x.min()), float(x.max())

    def index_arrays(self) -> tuple:
        """Flat index data for compiled consumers.

        Returns ``(a, b, ox, oy, oz, cell, nx, ny, nz, start, items,
        coarse, gap)``; a degenerate polyline is served as one zero-length
        segment in a single-cell grid so callers need no special case.
        """
        coarse, gap = self._coarse
        if self._idx is None:
            p = self.vertices[:1]
            start = np.array([0, 1], dtype=np.int64)
            items = np.array([0], dtype=np.int64)
            return (p, p, float(p[0, 0]), float(p[0, 1]), float(p[0, 2]),
                    1.0, 1, 1, 1, start, items, coarse, gap)
        return self._idx + (coarse, gap)

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Exact minimum distance from each point to the polyline."""
        p = np.ascontiguousarray(np.atleast_2d(np.asarray(points, float)))
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError("points must be (n, 3)")
        out = np.empty(p.shape[0])
        if self._idx is None:
            out[:] = np.linalg.norm(p - self.vertices[0], axis=1)
        else:
            a, b, ox, oy, oz, cell, nx, ny, nz, start, items = self._idx
            _grid_query_many(p, a, b, ox, oy, oz, cell, nx, ny, nz, start,
                             items, out)
        return out if np.asarray(points).ndim > 1 else float(out[0])


def save_trace(path, trace: TracePolyline) -> None:
    """Text record: the sampling step, then one vertex per line.

    ``%.17g`` formatting makes the round trip bit-exact for float64.
    """
    with open(path, "w") as fh:
        fh.write("dt %.17g\n" % trace.step_dt)
        for x, y, z in trace.vertices:
            fh.write("%.17g %.17g %.17g\n" % (x, y, z))


def load_trace(path) -> TracePolyline:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 2 or head[0] != "dt":
            raise ValueError("not a trace record: missing dt header")
        dt = float(head[1])
        body = fh.read()
    if not body.strip():
        raise ValueError("trace record has no vertices")
    verts = np.loadtxt(io.StringIO(body), dtype=float, ndmin=2)
    return TracePolyline(verts, dt)
