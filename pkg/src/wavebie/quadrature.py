"""Space-time quadrature for retarded, weakly singular and V.P. integrals.

The retarded boundary integrals all share the shape

    int over S_t(x) dS(y)  g(x, y)  int_{r/c}^{t} tau^m density(y, t - tau)
                                         / sqrt(c^2 tau^2 - r^2) d tau

with m = 0 (single layer) or m = 1 (double layer, N = 2).  Densities are
piecewise linear in time on the grid, so the tau integral of basis x kernel
is done with the exact antiderivatives from ``kernels``; the arrival
singularity at tau = r/c never meets a numeric quadrature node.  Spatial
integration is Gauss-Legendre on the clipped elements, with the element
containing a boundary collocation point split at that point and geometric
grading toward it (the kernel is log-singular there).

Principal-value integrals use the symmetric epsilon-exclusion around the
collocation point.  For the kernels here ((1/r) dr/dn in the plane,
(1/r^2) dr/dn on surfaces) the limit contribution of the excluded
neighborhood vanishes on smooth boundaries -- dr/dn is O(r) near x -- so
excision plus the epsilon -> 0 limit needs no analytic correction term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import truncate_boundary, ON_BOUNDARY_REL_BAND
from .kernels import (
    time_kernel_integrals,
    time_kernel_second_moment,
)

__all__ = [
    "QuadratureRule",
    "CollocationError",
    "CoverageError",
    "integrate_weakly_singular",
    "integrate_retarded_dipole",
    "integrate_principal_value",
    "free_term",
    "triangle_quadrature",
    "duffy_vertex_quadrature",
    "integrate_retarded_3d",
]


class CollocationError(ValueError):
    """The operation requires the evaluation point to lie on the boundary."""


class CoverageError(ValueError):
    """The supplied density does not cover the requested time window."""


@dataclass(frozen=True)
class QuadratureRule:
    """Spatial quadrature configuration."""

    order: int = 8
    vp_epsilon_rel: float = 1e-6   # V.P. exclusion, relative to element size
    grading_levels: int = 4        # geometric grading toward a singular point

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")


DEFAULT_RULE = QuadratureRule()


def _gl(order):
    return np.polynomial.legendre.leggauss(order)


def _as_density(density):
    """Accept a callable density(points, times) -> (m, k) or a constant."""
    if callable(density):
        return density
    value = float(density)

    def const(points, times):
        return np.full((len(points), len(times)), value)

    return const


def _sigma_breaks(t, grid):
    """Breakpoints of the piecewise-linear time basis within [0, t]."""
    if grid is None:
        n = 32
        return np.linspace(0.0, t, n + 1)
    times = grid.times
    if times[-1] < t - 1e-12 * max(t, 1.0):
        raise CoverageError(
            f"density grid covers [0, {times[-1]:g}] but t = {t:g} requested")
    inside = times[(times > 0.0) & (times < t * (1.0 - 1e-14))]
    return np.concatenate([[0.0], inside, [t]])


def _time_convolution(r, t, c, dens_vals, sigma, moment):
    """int_{r/c}^{t} tau^moment density(y, t - tau) / sqrt(c^2 tau^2 - r^2) d tau.

    ``dens_vals``: (m, k) density samples at epochs ``sigma`` (ascending,
    sigma[0] = 0, sigma[-1] = t) for m spatial points with radii ``r``.
    Density is linear between consecutive epochs.
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    for i in range(len(sigma) - 1):
        sa, sb = sigma[i], sigma[i + 1]
        if sb <= sa:
            continue
        # tau runs over [t - sb, t - sa]; density(sigma) = A + B (sigma - sa)
        A = dens_vals[:, i]
        B = (dens_vals[:, i + 1] - dens_vals[:, i]) / (sb - sa)
        tau0, tau1 = t - sb, t - sa
        i0, i1 = time_kernel_integrals(r, c, tau0, tau1)
        # density(t - tau) = A + B (t - tau - sa) = (A + B(t - sa)) - B tau
        c0 = A + B * (t - sa)
        if moment == 0:
            out = out + c0 * i0 - B * i1
        else:
            i2 = time_kernel_second_moment(r, c, tau0, tau1)
            out = out + c0 * i1 - B * i2
    return out


def _graded_breaks(s0, s1, s_sing, levels):
    """Split [s0, s1] geometrically toward a singular parameter s_sing."""
    if not (s0 <= s_sing <= s1) or levels <= 0:
        return [(s0, s1)]
    pieces = []
    for (a, b, sing_at_end) in ((s0, s_sing, True), (s_sing, s1, False)):
        h = b - a
        if h <= 0.0:
            continue
        if sing_at_end:  # cluster breakpoints toward b
            pts = [a] + [b - h * 0.5**k for k in range(1, levels + 1)] + [b]
        else:            # cluster toward a
            pts = [a] + [a + h * 0.5**k for k in range(levels, 0, -1)] + [b]
        pts = sorted(set(pts))
        pieces += list(zip(pts[:-1], pts[1:]))
    return pieces


def _curve_clip_points(geom, x, rb, rule, sing_info=None):
    """Quadrature points/weights/radii/normal-factors on the clipped curve.

    ``sing_info``: optional (element id, parameter of x on that element) to
    trigger graded subdivision toward the collocation point.
    """
    xs, ws, rs, drdn = [], [], [], []
    gl_x, gl_w = _gl(rule.order)
    for (e, s0, s1, L) in rb.clips:
        spans = [(s0, s1)]
        if sing_info is not None and sing_info[0] == e:
            spans = _graded_breaks(s0, s1, sing_info[1], rule.grading_levels)
        for (a, b) in spans:
            if b <= a:
                continue
            s = 0.5 * (a + b) + 0.5 * (b - a) * gl_x
            w = 0.5 * (b - a) * L * gl_w
            y = geom.starts[e] + s[:, None] * (geom.ends[e] - geom.starts[e])
            d = y - x
            r = np.linalg.norm(d, axis=1)
            xs.append(y)
            ws.append(w)
            rs.append(r)
            drdn.append(np.einsum("ij,j->i", d, geom.normals[e]) / r)
    if not xs:
        return (np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(0))
    return (np.concatenate(xs), np.concatenate(ws),
            np.concatenate(rs), np.concatenate(drdn))


def _locate_on_curve(geom, x, tol_rel=1e-9):
    """(element, parameter) pairs where x lies on the curve, else []."""
    x = np.asarray(x, dtype=float)
    band = tol_rel * geom.diameter
    hits = []
    d = geom.starts - x
    e = geom.ends - geom.starts
    s = np.clip(-np.einsum("ij,ij->i", d, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
    closest = geom.starts + s[:, None] * e
    dist = np.linalg.norm(closest - x, axis=1)
    for k in np.nonzero(dist <= band)[0]:
        hits.append((int(k), float(s[k])))
    return hits


def integrate_weakly_singular(geom, x, t, density, c=1.0, grid=None,
                              rule=DEFAULT_RULE):
    """Retarded single-layer integral over the clipped boundary.

    Returns  int over S_t(x) dS(y) int_{r/c}^{t} density(y, t - tau)
    / sqrt(c^2 tau^2 - r^2) d tau.  ``density(points, times) -> (m, k)``
    (or a constant); piecewise linear between the epochs of ``grid``.
    """
    if t <= 0.0:
        return 0.0
    dens = _as_density(density)
    sigma = _sigma_breaks(t, grid)
    x = np.asarray(x, dtype=float).reshape(-1)
    rb = truncate_boundary(geom, x, c * t)
    if geom.dim == 2:
        sing = _locate_on_curve(geom, x)
        y, w, r, _ = _curve_clip_points(geom, x, rb, rule,
                                        sing_info=sing[0] if sing else None)
        if len(y) == 0:
            return 0.0
        vals = dens(y, sigma)
        conv = _time_convolution(r, t, c, vals, sigma, moment=0)
        return float(np.sum(w * conv))
    raise NotImplementedError("weakly singular form is the N = 2 kernel")


def integrate_retarded_dipole(geom, x, t, density, c=1.0, grid=None,
                              rule=DEFAULT_RULE):
    """Retarded double-layer integral (N = 2):

    int over S_t(x) (dr/dn / r) dS(y) int_{r/c}^{t} tau density(y, t - tau)
    / sqrt(c^2 tau^2 - r^2) d tau.

    At an on-boundary x this is the natural (V.P.) value: the element
    through x is split at x and dr/dn vanishes linearly there.
    """
    if t <= 0.0:
        return 0.0
    dens = _as_density(density)
    sigma = _sigma_breaks(t, grid)
    x = np.asarray(x, dtype=float).reshape(-1)
    rb = truncate_boundary(geom, x, c * t)
    sing = _locate_on_curve(geom, x)
    y, w, r, drdn = _curve_clip_points(geom, x, rb, rule,
                                       sing_info=sing[0] if sing else None)
    if len(y) == 0:
        return 0.0
    vals = dens(y, sigma)
    conv = _time_convolution(r, t, c, vals, sigma, moment=1)
    return float(np.sum(w * (drdn / r) * conv))


def free_term(geom, x) -> float:
    """Boundary-limit coefficient of the trace: 1/2 at smooth points of S."""
    band = ON_BOUNDARY_REL_BAND * geom.diameter
    if geom.dim == 1:
        on = geom.distance_to_boundary(x) <= band
    else:
        on = geom.distance_to_boundary(np.asarray(x, float)) <= band
    if not on:
        raise CollocationError("free_term requires a point on the boundary")
    return 0.5


def integrate_principal_value(geom, x, t, density, c=1.0, grid=None,
                              kernel="dynamic", epsilon=None,
                              rule=DEFAULT_RULE):
    """V.P. boundary integral at a collocation point x on S.

    kernel = "dynamic" (N = 2): (dr/dn / r) x retarded tau-moment integral
    of the density (same operator as ``integrate_retarded_dipole``).
    kernel = "static":  (1/r) dr/dn (N = 2)  or  (1/r^2) dr/dn (N = 3)
    against density(y) sampled at the final time; the interior values of
    these static integrals are 2 pi and 4 pi (solid angle).

    A symmetric arc of half-width ``epsilon`` (default: vp_epsilon_rel x
    local element size) is excluded around x; for these kernels the
    excluded contribution vanishes with epsilon on smooth boundaries.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    band = ON_BOUNDARY_REL_BAND * geom.diameter
    if geom.distance_to_boundary(x) > band:
        raise CollocationError("principal value requires x on the boundary")
    if geom.dim == 2:
        sing = _locate_on_curve(geom, x)
        if epsilon is None:
            epsilon = rule.vp_epsilon_rel * float(np.mean(geom.lengths))
        if kernel == "dynamic":
            if t <= 0.0:
                return 0.0
            dens = _as_density(density)
            sigma = _sigma_breaks(t, grid)
            rb = truncate_boundary(geom, x, c * t)
            rb = _exclude_neighborhood(geom, rb, sing, epsilon)
            y, w, r, drdn = _curve_clip_points(geom, x, rb, rule,
                                               sing_info=sing[0] if sing else None)
            if len(y) == 0:
                return 0.0
            vals = dens(y, sigma)
            conv = _time_convolution(r, t, c, vals, sigma, moment=1)
            return float(np.sum(w * (drdn / r) * conv))
        # static plane kernel (1/r) dr/dn
        dens = _as_density(density)
        rb = truncate_boundary(geom, x, ct=max(c * t, 2.0 * geom.diameter))
        rb = _exclude_neighborhood(geom, rb, sing, epsilon)
        y, w, r, drdn = _curve_clip_points(geom, x, rb, rule,
                                           sing_info=sing[0] if sing else None)
        if len(y) == 0:
            return 0.0
        vals = dens(y, np.array([0.0]))[:, 0]
        return float(np.sum(w * (drdn / r) * vals))
    # N = 3, static kernel (1/r^2) dr/dn = solid-angle density
    dens = _as_density(density)
    total = 0.0
    for e in range(geom.n_elements):
        v = (geom.v0[e], geom.v1[e], geom.v2[e])
        dmin = float(np.min(np.linalg.norm(np.stack(v) - x, axis=1)))
        size = math.sqrt(geom.areas[e])
        if dmin < 0.5 * size:
            pts, wts = duffy_vertex_quadrature(x, v, rule.order)
        else:
            pts, wts = triangle_quadrature(*v, rule.order)
        d = pts - x
        r = np.linalg.norm(d, axis=1)
        keep = r > (epsilon or 1e-12)
        if not np.any(keep):
            continue
        drdn = np.einsum("ij,j->i", d[keep], geom.normals[e]) / r[keep]
        vals = dens(pts[keep], np.array([0.0]))[:, 0]
        total += float(np.sum(wts[keep] * drdn / r[keep] ** 2 * vals))
    return total


def _exclude_neighborhood(geom, rb, sing_hits, epsilon):
    """Remove a symmetric arc of half-width epsilon around each hit of x."""
    if not sing_hits:
        return rb
    new_clips = []
    for (e, s0, s1, L) in rb.clips:
        spans = [(s0, s1)]
        for (es, ss) in sing_hits:
            eps_s = epsilon / L
            cut = None
            if es == e:
                cut = (ss - eps_s, ss + eps_s)
            elif es == (e - 1) % geom.n_elements and abs(ss - 1.0) < 1e-12:
                cut = (-eps_s, eps_s)          # x at the start node of e
            elif es == (e + 1) % geom.n_elements and abs(ss) < 1e-12:
                cut = (1.0 - eps_s, 1.0 + eps_s)  # x at the end node of e
            if cut is None:
                continue
            spans = [piece for (a, b) in spans
                     for piece in ((a, min(b, cut[0])), (max(a, cut[1]), b))
                     if piece[1] > piece[0]]
        for (a, b) in spans:
            new_clips.append((e, a, b, L))
    out = type(rb)(x=rb.x, ct=rb.ct, clips=new_clips, dim=rb.dim)
    return out


# ---------------------------------------------------------------------------
# triangle rules (N = 3)
# ---------------------------------------------------------------------------

def triangle_quadrature(v0, v1, v2, order=8):
    """Tensor Gauss rule on a triangle via the collapsed-square map."""
    gx, gw = _gl(max(order // 2, 2))
    u = 0.5 * (gx + 1.0)
    wu = 0.5 * gw
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    a = U.ravel()
    b = (V * (1.0 - U)).ravel()
    w = (WU * WV * (1.0 - U)).ravel()
    area2 = np.linalg.norm(np.cross(np.asarray(v1) - v0, np.asarray(v2) - v0))
    pts = (np.asarray(v0)[None, :] + a[:, None] * (np.asarray(v1) - v0)
           + b[:, None] * (np.asarray(v2) - v0))
    return pts, w * area2


def duffy_vertex_quadrature(x, verts, order=8):
    """Quadrature on a triangle with a 1/r singularity at (or near) x.

    The triangle is split at the vertex closest to x and mapped with the
    Duffy transform, which clusters points toward that vertex and cancels
    the radial singularity.
    """
    verts = [np.asarray(v, dtype=float) for v in verts]
    x = np.asarray(x, dtype=float)
    i0 = int(np.argmin([np.linalg.norm(v - x) for v in verts]))
    a = verts[i0]
    b = verts[(i0 + 1) % 3]
    c = verts[(i0 + 2) % 3]
    gx, gw = _gl(max(order // 2, 2))
    u = 0.5 * (gx + 1.0)
    wu = 0.5 * gw
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    # Duffy: (u, v) -> a + u [ (b - a) + v (c - b) ], jacobian ~ u
    s = U.ravel()
    tt = (U * V).ravel()
    w = (WU * WV * U).ravel()
    area2 = np.linalg.norm(np.cross(b - a, c - a))
    pts = a[None, :] + s[:, None] * (b - a) + tt[:, None] * (c - b)
    return pts, w * area2


def integrate_retarded_3d(geom, x, t, density, c=1.0, rule=DEFAULT_RULE,
                          kernel="single"):
    """Retarded surface integrals of the Kirchhoff type.

    kernel = "single":  int over S_t(x)  density(y, t - r/c) / r       dS
    kernel = "double":  int over S_t(x)  density(y, t - r/c) (dr/dn)/r^2  dS
    kernel = "double_dot": same as "double" but expects the density to be
        the time derivative series and multiplies by 1/c x r/r = 1/(c r)
        ... i.e. int density_dot(y, t - r/c) (dr/dn) / (c r) dS.

    ``density(points, times)`` must accept matched 1-D arrays (retarded
    times differ per point).  Triangles whose vertices are not all causal
    are clipped by subdivision; triangles near x use the Duffy rule.
    """
    if t <= 0.0:
        return 0.0
    x = np.asarray(x, dtype=float).reshape(-1)
    ct = c * t
    total = 0.0
    rr = np.stack([np.linalg.norm(geom.v0 - x, axis=1),
                   np.linalg.norm(geom.v1 - x, axis=1),
                   np.linalg.norm(geom.v2 - x, axis=1)])
    rmin = rr.min(axis=0)
    rmax = rr.max(axis=0)
    sizes = np.sqrt(geom.areas)
    full = rmax < ct
    near = full & (rmin < 0.75 * sizes)
    bulk = full & ~near
    partial = ~full & (rmin < ct)
    # bulk: one batched evaluation on the cached standard rule
    if np.any(bulk):
        pts_all, wts_all = _surface_standard_rule(geom, rule.order)
        e_idx = np.nonzero(bulk)[0]
        pts = pts_all[e_idx].reshape(-1, 3)
        wts = wts_all[e_idx].reshape(-1)
        normals = np.repeat(geom.normals[e_idx], pts_all.shape[1], axis=0)
        total += _retarded_patch(pts, wts, x, t, c, density, normals, kernel)
    for e in np.nonzero(near)[0]:
        v = (geom.v0[e], geom.v1[e], geom.v2[e])
        pts, wts = duffy_vertex_quadrature(x, list(v), rule.order)
        total += _retarded_patch(pts, wts, x, t, c, density,
                                 geom.normals[e], kernel)
    from .geometry import _clip_triangle
    for e in np.nonzero(partial)[0]:
        subtris: list = []
        _clip_triangle(geom.v0[e], geom.v1[e], geom.v2[e], x, ct, 4, subtris)
        if not subtris:
            continue
        pts_list, wts_list = [], []
        for (a, b, cc) in subtris:
            pts, wts = triangle_quadrature(a, b, cc, max(rule.order // 2, 2))
            pts_list.append(pts)
            wts_list.append(wts)
        pts = np.concatenate(pts_list)
        wts = np.concatenate(wts_list)
        total += _retarded_patch(pts, wts, x, t, c, density,
                                 geom.normals[e], kernel)
    return total


def _surface_standard_rule(geom, order):
    """Cached standard-rule points/weights for every triangle of a mesh."""
    cache = getattr(geom, "_std_rule_cache", None)
    if cache is None:
        cache = {}
        geom._std_rule_cache = cache
    if order not in cache:
        pts_list, wts_list = [], []
        for e in range(geom.n_elements):
            pts, wts = triangle_quadrature(geom.v0[e], geom.v1[e],
                                           geom.v2[e], order)
            pts_list.append(pts)
            wts_list.append(wts)
        cache[order] = (np.stack(pts_list), np.stack(wts_list))
    return cache[order]


def _retarded_patch(pts, wts, x, t, c, density, normal, kernel):
    normal = np.asarray(normal, dtype=float)
    if normal.ndim == 1:
        normal = np.broadcast_to(normal, pts.shape)
    d = pts - x
    r = np.linalg.norm(d, axis=1)
    keep = (r > 1e-13) & (r < c * t)
    if not np.any(keep):
        return 0.0
    r = r[keep]
    pts = pts[keep]
    wts = wts[keep]
    normal = normal[keep]
    tr = t - r / c
    vals = density(pts, tr)
    if kernel == "single":
        kern = 1.0 / r
    elif kernel == "double":
        kern = np.einsum("ij,ij->i", (pts - x), normal) / r ** 3
    elif kernel == "double_dot":
        kern = np.einsum("ij,ij->i", (pts - x), normal) / (c * r ** 2)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return float(np.sum(wts * kern * vals))
