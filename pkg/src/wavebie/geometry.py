"""Domains, boundaries, time grids and causal (retarded) truncations.

Three boundary representations are supported:

* ``IntervalGeometry`` -- an interval (a1, a2) whose boundary is the two
  endpoints with outward normals -1 and +1,
* ``CurveGeometry``   -- a closed polyline in the plane, oriented
  counter-clockwise so the outward normal is (t2, -t1),
* ``SurfaceGeometry`` -- a closed triangulated surface with consistent
  outward orientation.

The retarded truncation S_t(x) = {y on S : |x - y| < c t} is produced by
``truncate_boundary`` with element-wise bisection clipping, and the causal
part of the domain by ``truncate_domain`` over a background Cartesian cell
grid.  ``RadialCrossings`` / ``SphericalCrossings`` precompute, for a fixed
observation point, where rays from that point cross the boundary; they back
the singular-weight volume quadratures and moving-sphere integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimeGrid",
    "IntervalGeometry",
    "CurveGeometry",
    "SurfaceGeometry",
    "RetardedBoundary",
    "VolumeGrid",
    "RadialCrossings",
    "SphericalCrossings",
    "InvalidGeometryError",
    "circle_geometry",
    "regular_polygon_geometry",
    "sphere_geometry",
    "characteristic_function",
    "truncate_boundary",
    "truncate_domain",
    "max_retarded_time",
]

ON_BOUNDARY_REL_BAND = 1e-9  # times the domain diameter


class InvalidGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid: wave speed c, step dt, n_steps steps."""

    c: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.c <= 0.0:
            raise ValueError("wave speed must be positive")
        if self.dt <= 0.0:
            raise ValueError("time step must be positive")
        if self.n_steps < 1:
            raise ValueError("need at least one time step")

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


# ---------------------------------------------------------------------------
# boundary geometries
# ---------------------------------------------------------------------------

class IntervalGeometry:
    """The interval (a1, a2); boundary = two endpoints."""

    dim = 1

    def __init__(self, a1: float, a2: float):
        if not a1 < a2:
            raise InvalidGeometryError("interval requires a1 < a2")
        self.a1 = float(a1)
        self.a2 = float(a2)
        # outward normals at a1, a2
        self.normals = np.array([-1.0, 1.0])
        self.endpoints = np.array([self.a1, self.a2])

    @property
    def diameter(self) -> float:
        return self.a2 - self.a1

    def total_measure(self) -> float:
        return 2.0  # two points, counting measure

    def distance_to_boundary(self, x) -> float:
        x = float(np.asarray(x).reshape(-1)[0])
        return min(abs(x - self.a1), abs(x - self.a2))


class CurveGeometry:
    """Closed polyline boundary of a plane region, counter-clockwise."""

    dim = 2

    def __init__(self, nodes: np.ndarray):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or len(nodes) < 3:
            raise InvalidGeometryError("nodes must be (n, 2) with n >= 3")
        area2 = np.sum(nodes[:, 0] * np.roll(nodes[:, 1], -1)
                       - np.roll(nodes[:, 0], -1) * nodes[:, 1])
        if area2 == 0.0:
            raise InvalidGeometryError("degenerate (zero-area) curve")
        if area2 < 0.0:  # enforce CCW so outward normal is (t2, -t1)
            nodes = nodes[::-1].copy()
        self.nodes = nodes
        self.n_nodes = len(nodes)
        self.starts = nodes
        self.ends = np.roll(nodes, -1, axis=0)
        chords = self.ends - self.starts
        self.lengths = np.linalg.norm(chords, axis=1)
        if np.any(self.lengths <= 0.0):
            raise InvalidGeometryError("zero-length boundary element")
        self.tangents = chords / self.lengths[:, None]
        self.normals = np.stack([self.tangents[:, 1], -self.tangents[:, 0]], axis=1)
        # outward normal at a node: average of adjacent element normals
        nn = self.normals + np.roll(self.normals, 1, axis=0)
        self.node_normals = nn / np.linalg.norm(nn, axis=1)[:, None]
        self.area = 0.5 * abs(area2)

    @property
    def n_elements(self) -> int:
        return self.n_nodes

    @property
    def diameter(self) -> float:
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def total_measure(self) -> float:
        return float(self.lengths.sum())

    def element_point(self, elem, s):
        """Point(s) y(s) = start + s * chord on element(s), s in [0, 1]."""
        elem = np.asarray(elem)
        s = np.asarray(s, dtype=float)
        return self.starts[elem] + s[..., None] * (self.ends[elem] - self.starts[elem])

    def contains(self, pts) -> np.ndarray:
        """Even-odd crossing test, vectorized over points (m, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ax, ay = self.starts[:, 0], self.starts[:, 1]
        bx, by = self.ends[:, 0], self.ends[:, 1]
        px = pts[:, 0][:, None]
        py = pts[:, 1][:, None]
        straddle = (ay[None, :] > py) != (by[None, :] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = ax[None, :] + (py - ay[None, :]) / (by - ay)[None, :] * (bx - ax)[None, :]
        cross = straddle & (px < xi)
        return (np.sum(cross, axis=1) % 2).astype(bool)

    def distance_to_boundary(self, x) -> float:
        x = np.asarray(x, dtype=float)
        d = self.starts - x
        e = self.ends - self.starts
        tproj = np.clip(-np.sum(d * e, axis=1) / np.sum(e * e, axis=1), 0.0, 1.0)
        closest = self.starts + tproj[:, None] * e
        return float(np.min(np.linalg.norm(closest - x, axis=1)))


class SurfaceGeometry:
    """Closed triangulated surface with outward-oriented triangles."""

    dim = 3

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray):
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=int)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise InvalidGeometryError("vertices must be (n, 3)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise InvalidGeometryError("triangles must be (m, 3)")
        self.vertices = vertices
        self.triangles = triangles
        v0 = vertices[triangles[:, 0]]
        v1 = vertices[triangles[:, 1]]
        v2 = vertices[triangles[:, 2]]
        cr = np.cross(v1 - v0, v2 - v0)
        nrm = np.linalg.norm(cr, axis=1)
        if np.any(nrm <= 0.0):
            raise InvalidGeometryError("degenerate (zero-area) triangle")
        # signed volume: positive when triangles are outward-oriented
        vol6 = np.sum(np.einsum("ij,ij->i", v0, cr))
        if vol6 < 0.0:
            triangles = triangles[:, [0, 2, 1]]
            self.triangles = triangles
            v1 = vertices[triangles[:, 1]]
            v2 = vertices[triangles[:, 2]]
            cr = np.cross(v1 - v0, v2 - v0)
            nrm = np.linalg.norm(cr, axis=1)
        self.v0, self.v1, self.v2 = v0, vertices[triangles[:, 1]], vertices[triangles[:, 2]]
        self.areas = 0.5 * nrm
        self.normals = cr / nrm[:, None]
        self.centroids = (self.v0 + self.v1 + self.v2) / 3.0
        self.volume = abs(vol6) / 6.0

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def n_nodes(self) -> int:
        return len(self.vertices)

    @property
    def diameter(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def total_measure(self) -> float:
        return float(self.areas.sum())

    def solid_angles(self, x) -> np.ndarray:
        """Per-triangle solid angle subtended at x (van Oosterom-Strackee)."""
        x = np.asarray(x, dtype=float)
        a = self.v0 - x
        b = self.v1 - x
        c = self.v2 - x
        la = np.linalg.norm(a, axis=1)
        lb = np.linalg.norm(b, axis=1)
        lc = np.linalg.norm(c, axis=1)
        num = np.einsum("ij,ij->i", a, np.cross(b, c))
        den = (la * lb * lc + np.einsum("ij,ij->i", a, b) * lc
               + np.einsum("ij,ij->i", a, c) * lb
               + np.einsum("ij,ij->i", b, c) * la)
        return 2.0 * np.arctan2(num, den)

    def contains(self, pts) -> np.ndarray:
        """Inside test via total solid angle (4 pi inside, 0 outside)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(len(pts), dtype=bool)
        for i, p in enumerate(pts):
            out[i] = abs(self.solid_angles(p).sum()) > 2.0 * math.pi
        return out

    def distance_to_boundary(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.min(_point_triangle_distance(x, self.v0, self.v1, self.v2)))


def _point_triangle_distance(p, v0, v1, v2):
    """Distances from point p to each triangle (v0, v1, v2), vectorized."""
    e0 = v1 - v0
    e1 = v2 - v0
    d = v0 - p
    a = np.einsum("ij,ij->i", e0, e0)
    b = np.einsum("ij,ij->i", e0, e1)
    c = np.einsum("ij,ij->i", e1, e1)
    dd = np.einsum("ij,ij->i", e0, d)
    e = np.einsum("ij,ij->i", e1, d)
    det = a * c - b * b
    s = np.where(det > 0, (b * e - c * dd) / np.where(det > 0, det, 1.0), 0.0)
    t = np.where(det > 0, (b * dd - a * e) / np.where(det > 0, det, 1.0), 0.0)
    # clamp to the triangle: fall back to edges when outside the parameter set
    s = np.clip(s, 0.0, 1.0)
    t = np.clip(t, 0.0, 1.0)
    over = s + t > 1.0
    scale = np.where(over, s + t, 1.0)
    s = s / scale
    t = t / scale
    closest = v0 + s[:, None] * e0 + t[:, None] * e1
    d_face = np.linalg.norm(closest - p, axis=1)
    # edge distances guard against the crude clamping above
    d_edges = np.minimum.reduce([
        _point_segment_distance(p, v0, v1),
        _point_segment_distance(p, v1, v2),
        _point_segment_distance(p, v2, v0),
    ])
    return np.minimum(d_face, d_edges)


def _point_segment_distance(p, a, b):
    e = b - a
    tt = np.clip(np.einsum("ij,ij->i", p - a, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
    return np.linalg.norm(a + tt[:, None] * e - p, axis=1)


# ---------------------------------------------------------------------------
# mesh builders
# ---------------------------------------------------------------------------

def regular_polygon_geometry(n: int, radius: float = 1.0, center=(0.0, 0.0)) -> CurveGeometry:
    th = 2.0 * math.pi * np.arange(n) / n
    nodes = np.stack([center[0] + radius * np.cos(th),
                      center[1] + radius * np.sin(th)], axis=1)
    return CurveGeometry(nodes)


def circle_geometry(n: int = 96, radius: float = 1.0, center=(0.0, 0.0)) -> CurveGeometry:
    """Polygonal circle with vertices placed so the polygon area matters less
    than having nodes exactly on the circle (collocation points on S)."""
    return regular_polygon_geometry(n, radius, center)


def sphere_geometry(subdivisions: int = 3, radius: float = 1.0,
                    center=(0.0, 0.0, 0.0)) -> SurfaceGeometry:
    """Icosphere: subdivided icosahedron projected onto the sphere."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    tris = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    cache: dict[tuple[int, int], int] = {}
    vlist = list(verts)

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key in cache:
            return cache[key]
        m = np.array(vlist[i]) + np.array(vlist[j])
        m /= np.linalg.norm(m)
        vlist.append(tuple(m))
        cache[key] = len(vlist) - 1
        return cache[key]

    for _ in range(subdivisions):
        new_tris = []
        for (i, j, k) in tris:
            a = midpoint(i, j)
            b = midpoint(j, k)
            cc = midpoint(k, i)
            new_tris += [(i, a, cc), (j, b, a), (k, cc, b), (a, b, cc)]
        tris = new_tris
    v = np.array(vlist) * radius + np.asarray(center)
    return SurfaceGeometry(v, np.array(tris))


# ---------------------------------------------------------------------------
# characteristic function, retarded truncations
# ---------------------------------------------------------------------------

def characteristic_function(geom, x) -> float:
    """1 inside the domain, 1/2 on its boundary (within a narrow band), 0 outside."""
    band = ON_BOUNDARY_REL_BAND * geom.diameter
    if geom.dim == 1:
        xv = float(np.asarray(x).reshape(-1)[0])
        if geom.distance_to_boundary(xv) <= band:
            return 0.5
        return 1.0 if geom.a1 < xv < geom.a2 else 0.0
    if geom.distance_to_boundary(x) <= band:
        return 0.5
    return 1.0 if bool(geom.contains(np.atleast_2d(x))[0]) else 0.0


@dataclass
class RetardedBoundary:
    """Causal clip of the boundary seen from x at time t: {y on S : r < ct}.

    ``clips`` holds, per touched element, the parameter sub-intervals
    (curves: (elem, s0, s1)) or sub-triangle vertex triples (surfaces).
    """

    x: np.ndarray
    ct: float
    clips: list = field(default_factory=list)
    dim: int = 2

    def measure(self) -> float:
        if self.dim == 1:
            return float(len(self.clips))
        if self.dim == 2:
            return float(sum(L * (s1 - s0) for (_e, s0, s1, L) in self.clips))
        total = 0.0
        for (_e, subtris) in self.clips:
            for (a, b, c) in subtris:
                total += 0.5 * np.linalg.norm(np.cross(b - a, c - a))
        return total


def _clip_segment(a, b, x, ct, tol=1e-12):
    """Sub-intervals of [0,1] on segment a->b where |y(s) - x| < ct.

    r(s)^2 is a convex quadratic in s, so the inside set is one interval;
    endpoints are located by bisection to relative tolerance ``tol``.
    """
    e = b - a
    d = a - x
    # r^2(s) = |e|^2 s^2 + 2 e.d s + |d|^2
    A = float(np.dot(e, e))
    B = float(np.dot(e, d))
    C = float(np.dot(d, d))

    def g(s):
        return A * s * s + 2.0 * B * s + C - ct * ct

    smin = min(max(-B / A, 0.0), 1.0)
    if g(smin) >= 0.0:
        return []
    lo, hi = 0.0, 1.0
    if g(0.0) >= 0.0:
        llo, lhi = 0.0, smin
        while lhi - llo > tol:
            mid = 0.5 * (llo + lhi)
            if g(mid) >= 0.0:
                llo = mid
            else:
                lhi = mid
        lo = lhi
    if g(1.0) >= 0.0:
        llo, lhi = smin, 1.0
        while lhi - llo > tol:
            mid = 0.5 * (llo + lhi)
            if g(mid) >= 0.0:
                lhi = mid
            else:
                llo = mid
        hi = llo
    if hi <= lo:
        return []
    return [(lo, hi)]


def truncate_boundary(geom, x, ct: float) -> RetardedBoundary:
    """Clip the boundary to the open causal region r < ct seen from x."""
    if ct < 0.0:
        raise ValueError("ct must be nonnegative")
    x = np.asarray(x, dtype=float).reshape(-1)
    rb = RetardedBoundary(x=x, ct=float(ct), dim=geom.dim)
    if ct == 0.0:
        return rb
    if geom.dim == 1:
        for k, a in enumerate(geom.endpoints):
            if abs(x[0] - a) < ct:
                rb.clips.append(k)
        return rb
    if geom.dim == 2:
        for e in range(geom.n_elements):
            for (s0, s1) in _clip_segment(geom.starts[e], geom.ends[e], x, ct):
                rb.clips.append((e, s0, s1, geom.lengths[e]))
        return rb
    # surfaces: recursive subdivision clip, depth 4
    for e in range(geom.n_elements):
        subtris: list = []
        _clip_triangle(geom.v0[e], geom.v1[e], geom.v2[e], x, ct, 4, subtris)
        if subtris:
            rb.clips.append((e, subtris))
    return rb


def _clip_triangle(a, b, c, x, ct, depth, out):
    rr = np.linalg.norm(np.stack([a, b, c]) - x, axis=1)
    if np.all(rr < ct):
        out.append((a, b, c))
        return
    # conservative reject: closest possible point no nearer than ct
    center = (a + b + c) / 3.0
    rad = max(np.linalg.norm(v - center) for v in (a, b, c))
    if np.linalg.norm(center - x) - rad >= ct:
        return
    if depth == 0:
        if np.mean(rr) < ct:
            out.append((a, b, c))
        return
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    for tri in ((a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)):
        _clip_triangle(*tri, x, ct, depth - 1, out)


def max_retarded_time(geom, x, c: float) -> float:
    """max over y on S of |x - y| / c, beyond which S_t(x) is all of S."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if geom.dim == 1:
        far = max(abs(x[0] - geom.a1), abs(x[0] - geom.a2))
    elif geom.dim == 2:
        far = float(np.max(np.linalg.norm(geom.nodes - x, axis=1)))
    else:
        far = float(np.max(np.linalg.norm(geom.vertices - x, axis=1)))
    return far / c


# ---------------------------------------------------------------------------
# background volume grid
# ---------------------------------------------------------------------------

class VolumeGrid:
    """Cartesian cell grid covering the domain, for volume integrals.

    Cells are classified by corner sampling as fully inside, fully outside
    or cut; cut cells are refined by recursive subdivision (depth 4) when
    integrating.
    """

    def __init__(self, geom, n_cells: int = 64, pad: float = 0.02):
        self.geom = geom
        if geom.dim == 1:
            lo = np.array([geom.a1])
            hi = np.array([geom.a2])
        elif geom.dim == 2:
            lo = geom.nodes.min(axis=0)
            hi = geom.nodes.max(axis=0)
        else:
            lo = geom.vertices.min(axis=0)
            hi = geom.vertices.max(axis=0)
        span = hi - lo
        self.lo = lo - pad * span
        self.hi = hi + pad * span
        self.n = n_cells
        self.h = (self.hi - self.lo) / n_cells
        self._classify()

    def _classify(self):
        g = self.geom
        d = g.dim
        axes = [self.lo[k] + self.h[k] * np.arange(self.n + 1) for k in range(d)]
        corners = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        flat = corners.reshape(-1, d)
        if d == 1:
            inside = (flat[:, 0] > g.a1) & (flat[:, 0] < g.a2)
        else:
            inside = g.contains(flat)
        inside = inside.reshape(corners.shape[:-1])
        counts = np.zeros((self.n,) * d, dtype=int)
        for offs in np.ndindex(*((2,) * d)):
            sl = tuple(slice(o, o + self.n) for o in offs)
            counts += inside[sl]
        self.inside_cells = counts == 2**d
        self.cut_cells = (counts > 0) & (counts < 2**d)

    def cell_centers(self, mask):
        idx = np.argwhere(mask)
        return self.lo + (idx + 0.5) * self.h

    def covers(self, geom) -> bool:
        return geom is self.geom

    def integrate(self, f, subdivide_depth: int = 4) -> float:
        """Integral of f over the domain via inside + refined cut cells."""
        total = 0.0
        vol = float(np.prod(self.h))
        centers = self.cell_centers(self.inside_cells)
        if len(centers):
            total += vol * float(np.sum(f(centers)))
        cut = np.argwhere(self.cut_cells)
        for idx in cut:
            total += self._cut_cell_integral(f, self.lo + idx * self.h,
                                             self.h, subdivide_depth)
        return total

    def _cut_cell_integral(self, f, lo, h, depth):
        d = self.geom.dim
        center = lo + 0.5 * h
        if depth == 0:
            if d == 1:
                ins = self.geom.a1 < center[0] < self.geom.a2
            else:
                ins = bool(self.geom.contains(center[None, :])[0])
            return float(np.prod(h)) * float(f(center[None, :])[0]) if ins else 0.0
        total = 0.0
        for offs in np.ndindex(*((2,) * d)):
            total += self._cut_cell_integral(f, lo + np.array(offs) * h / 2,
                                             h / 2, depth - 1)
        return total


def truncate_domain(geom, volume_grid: VolumeGrid, x, ct: float):
    """Cells of the background grid covering the causal domain part r < ct."""
    if not volume_grid.covers(geom):
        raise ValueError("volume grid does not cover this geometry")
    x = np.asarray(x, dtype=float).reshape(-1)
    mask = volume_grid.inside_cells | volume_grid.cut_cells
    centers = volume_grid.cell_centers(mask)
    if ct <= 0.0:
        return []
    r = np.linalg.norm(centers - x, axis=1)
    reach = 0.5 * float(np.linalg.norm(volume_grid.h))
    keep = r < ct + reach
    idx = np.argwhere(mask)[keep]
    return [tuple(i) for i in idx]


def causal_domain_measure(geom, volume_grid: VolumeGrid, x, ct: float,
                          depth: int = 4) -> float:
    """Measure of {y in the domain : |y - x| < ct} by refined cell counting."""
    x = np.asarray(x, dtype=float).reshape(-1)

    def ind(pts):
        return (np.linalg.norm(pts - x, axis=1) < ct).astype(float)

    def f(pts):
        return ind(pts)

    # restrict integration to cells touching the ball for speed
    total = 0.0
    vol = float(np.prod(volume_grid.h))
    centers = volume_grid.cell_centers(volume_grid.inside_cells)
    if len(centers):
        r = np.linalg.norm(centers - x, axis=1)
        reach = 0.5 * float(np.linalg.norm(volume_grid.h))
        fully = r < ct - reach
        total += vol * float(np.sum(fully))
        part = (~fully) & (r < ct + reach)
        for cc in centers[part]:
            total += volume_grid._cut_cell_integral(
                lambda p: f(p), cc - volume_grid.h / 2, volume_grid.h, depth)
    for idx in np.argwhere(volume_grid.cut_cells):
        lo = volume_grid.lo + idx * volume_grid.h

        def g(pts):
            if volume_grid.geom.dim == 1:
                ins = (pts[:, 0] > geom.a1) & (pts[:, 0] < geom.a2)
            else:
                ins = geom.contains(pts)
            return ins.astype(float) * ind(pts)

        total += _box_integral(g, lo, volume_grid.h, depth)
    return total


def _box_integral(f, lo, h, depth):
    if depth == 0:
        center = lo + 0.5 * h
        return float(np.prod(h)) * float(f(center[None, :])[0])
    d = len(lo)
    total = 0.0
    for offs in np.ndindex(*((2,) * d)):
        total += _box_integral(f, lo + np.array(offs) * h / 2, h / 2, depth - 1)
    return total


# ---------------------------------------------------------------------------
# radial crossing tables (fixed observation point)
# ---------------------------------------------------------------------------

class RadialCrossings:
    """Rays from x through a plane domain: crossing radii per direction.

    Backs polar quadratures around x: for each of ``n_theta`` equally spaced
    directions, stores the sorted radii where the ray crosses the boundary.
    A point x + rho * omega is inside the domain iff an odd number of
    crossings lie below rho.
    """

    def __init__(self, geom: CurveGeometry, x, n_theta: int = 128):
        self.geom = geom
        self.x = np.asarray(x, dtype=float).reshape(2)
        self.n_theta = n_theta
        # small deterministic offset avoids rays through polygon vertices
        th = 2.0 * math.pi * (np.arange(n_theta) + 0.391758) / n_theta
        self.omega = np.stack([np.cos(th), np.sin(th)], axis=1)
        self.theta_weight = 2.0 * math.pi / n_theta
        self.crossings = self._compute()

    def _compute(self):
        g = self.geom
        a = g.starts - self.x
        e = g.ends - g.starts
        out = []
        for w in self.omega:
            # solve a + s e = rho w  for s in [0,1), rho > 0
            # cross with w:  (a x w) + s (e x w) = 0
            exw = e[:, 0] * w[1] - e[:, 1] * w[0]
            axw = a[:, 0] * w[1] - a[:, 1] * w[0]
            ok = np.abs(exw) > 1e-14
            s = np.where(ok, -axw / np.where(ok, exw, 1.0), -1.0)
            rho = np.where(np.abs(w[0]) > np.abs(w[1]),
                           (a[:, 0] + s * e[:, 0]) / w[0],
                           (a[:, 1] + s * e[:, 1]) / w[1])
            hit = ok & (s >= 0.0) & (s < 1.0) & (rho > 0.0)
            out.append(np.sort(rho[hit]))
        return out

    def inside_mask(self, rho_grid: np.ndarray) -> np.ndarray:
        """Boolean (n_theta, n_rho): is x + rho * omega_j inside the domain."""
        rho_grid = np.asarray(rho_grid, dtype=float)
        mask = np.empty((self.n_theta, len(rho_grid)), dtype=bool)
        for j, cr in enumerate(self.crossings):
            # inside iff an odd number of crossings lie beyond rho
            mask[j] = ((len(cr) - np.searchsorted(cr, rho_grid)) % 2) == 1
        return mask

    def inside_intervals(self, j: int, rmax: float):
        """Radial intervals of ray j lying inside the domain, up to rmax."""
        cr = self.crossings[j]
        bounds = np.concatenate([[0.0], cr])
        out = []
        for k in range(len(bounds) - 1):
            lo, hi = bounds[k], bounds[k + 1]
            # parity at the midpoint: crossings strictly beyond it
            if (len(cr) - (k)) % 2 == 1:
                lo2, hi2 = lo, min(hi, rmax)
                if hi2 > lo2:
                    out.append((lo2, hi2))
        return out

    def weighted_ball_integral(self, f, ct: float, n_phi: int = 24) -> float:
        """int over {domain, r < ct} of f(y) dV / sqrt(c^2 t^2 - r^2).

        Per ray, each inside interval [lo, hi] is mapped by rho = ct
        sin(phi), which removes the inverse-square-root edge singularity
        at rho = ct; the interval ends are honored exactly (no staircase
        error at the domain boundary).
        """
        if ct <= 0.0:
            return 0.0
        gl_x, gl_w = np.polynomial.legendre.leggauss(n_phi)
        total = 0.0
        for j in range(self.n_theta):
            for (lo, hi) in self.inside_intervals(j, ct):
                plo = math.asin(min(lo / ct, 1.0))
                phi_hi = math.asin(min(hi / ct, 1.0))
                if phi_hi <= plo:
                    continue
                phi = 0.5 * (plo + phi_hi) + 0.5 * (phi_hi - plo) * gl_x
                w = 0.5 * (phi_hi - plo) * gl_w
                rho = ct * np.sin(phi)
                pts = self.x[None, :] + rho[:, None] * self.omega[j][None, :]
                total += ct * float(np.sum(w * np.sin(phi) * f(pts)))
        return total * self.theta_weight

    def plain_ball_integral(self, f, ct: float, n_rho: int = 24) -> float:
        """int over {domain, r < ct} of f(y) dV  (no singular weight)."""
        if ct <= 0.0:
            return 0.0
        gl_x, gl_w = np.polynomial.legendre.leggauss(n_rho)
        total = 0.0
        for j in range(self.n_theta):
            for (lo, hi) in self.inside_intervals(j, ct):
                rho = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gl_x
                w = 0.5 * (hi - lo) * gl_w
                pts = self.x[None, :] + rho[:, None] * self.omega[j][None, :]
                total += float(np.sum(w * rho * f(pts)))
        return total * self.theta_weight


class SphericalCrossings:
    """Rays from x through a triangulated solid: crossing radii per direction.

    Directions are a Fibonacci point set on the unit sphere (equal-weight
    quadrature).  Used for moving-sphere integrals over {|y - x| = ct} and
    retarded volume integrals.
    """

    def __init__(self, geom: SurfaceGeometry, x, n_dirs: int = 600):
        self.geom = geom
        self.x = np.asarray(x, dtype=float).reshape(3)
        self.n_dirs = n_dirs
        i = np.arange(n_dirs) + 0.5
        golden = math.pi * (3.0 - math.sqrt(5.0))
        z = 1.0 - 2.0 * i / n_dirs
        rxy = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        th = golden * i
        self.omega = np.stack([rxy * np.cos(th), rxy * np.sin(th), z], axis=1)
        self.dir_weight = 4.0 * math.pi / n_dirs
        self.crossings = self._compute()

    def _compute(self):
        g = self.geom
        v0 = g.v0 - self.x
        e1 = g.v1 - g.v0
        e2 = g.v2 - g.v0
        out = []
        for w in self.omega:
            # Moller-Trumbore, vectorized over triangles
            p = np.cross(w, e2)
            det = np.einsum("ij,ij->i", e1, p)
            ok = np.abs(det) > 1e-14
            inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
            tv = -v0
            u = np.einsum("ij,ij->i", tv, p) * inv
            q = np.cross(tv, e1)
            v = q @ w * inv
            rho = np.einsum("ij,ij->i", e2, q) * inv
            hit = ok & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (rho > 1e-12)
            out.append(np.sort(rho[hit]))
        return out

    def inside_mask(self, rho_grid: np.ndarray) -> np.ndarray:
        rho_grid = np.asarray(rho_grid, dtype=float)
        mask = np.empty((self.n_dirs, len(rho_grid)), dtype=bool)
        for j, cr in enumerate(self.crossings):
            # inside iff an odd number of crossings lie beyond rho
            mask[j] = ((len(cr) - np.searchsorted(cr, rho_grid)) % 2) == 1
        return mask

    def sphere_cap_integral(self, f, ct: float, mask_radius: float = None) -> float:
        """int over {|y - x| = ct, y inside domain} of f(y) dS.

        ``mask_radius`` evaluates the inside indicator at a different
        radius than the integrand; the moving-sphere time derivative of
        the displacement term needs the derivative at frozen mask (its
        moving-boundary flux cancels exactly against the front line term
        of the retarded double layer).
        """
        if ct <= 0.0:
            return 0.0
        rm = ct if mask_radius is None else mask_radius
        mask = self.inside_mask(np.array([rm]))[:, 0]
        if not np.any(mask):
            return 0.0
        pts = self.x + ct * self.omega[mask]
        return float(ct * ct * self.dir_weight * np.sum(f(pts)))

    def retarded_volume_integral(self, f, ct: float, c: float,
                                 n_rho: int = 16) -> float:
        """int over {domain, r < ct} of f(y, t - r/c) / r dV.

        ``f(points, retarded_times)`` must be vectorized; t = ct / c.
        """
        if ct <= 0.0:
            return 0.0
        u, wu = np.polynomial.legendre.leggauss(n_rho)
        rho = 0.5 * ct * (u + 1.0)
        wr = wu * 0.5 * ct
        mask = self.inside_mask(rho)
        pts = self.x[None, None, :] + rho[None, :, None] * self.omega[:, None, :]
        tr = ct / c - rho / c
        trs = np.broadcast_to(tr[None, :], mask.shape)
        vals = f(pts.reshape(-1, 3), trs.reshape(-1)).reshape(mask.shape)
        ang = np.sum(vals * mask, axis=0) * self.dir_weight
        return float(np.sum(wr * rho * ang))
