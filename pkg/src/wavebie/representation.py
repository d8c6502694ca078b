"""Interior field evaluation from boundary traces, initial data and sources.

The wave equation  Laplace(u) - c^-2 u_tt = G  on a bounded domain admits a
retarded integral representation of u(x, t) at interior points built from
the boundary trace u_S, the flux p = du/dn, the Cauchy data (u0, v0) and
the volume source.  The three dimension-specific forms implemented here
(2 pi x u in the plane, 4 pi x u in space, 2 x u on an interval) reduce to
the classical Poisson / Kirchhoff / d'Alembert formulas when the boundary
is causally out of reach, and to pure boundary formulas for zero initial
data.  All ambiguous signs are pinned by two analytic constraints: the
constant solution u == 1 and traveling plane waves must be reproduced
exactly in the continuous limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import (
    IntervalGeometry,
    RadialCrossings,
    SphericalCrossings,
    characteristic_function,
    truncate_boundary,
)
from .quadrature import (
    DEFAULT_RULE,
    CoverageError,
    _curve_clip_points,
    _gl,
    _graded_breaks,
    integrate_retarded_dipole,
    integrate_retarded_3d,
    integrate_weakly_singular,
)

__all__ = [
    "TraceSeries",
    "CauchyData",
    "PlacementError",
    "represent_1d",
    "represent_2d",
    "represent_3d",
    "data_terms_1d",
    "data_terms_2d",
    "data_terms_3d",
]


class PlacementError(ValueError):
    """Evaluation point is not where the operation requires it."""


@dataclass
class TraceSeries:
    """Space-time samples of a boundary function.

    ``samples`` has shape (n_space, K+1): boundary nodes x time steps.
    Interpolation is linear in time and element-wise linear in space;
    values before t = 0 are zero (causal extension).
    """

    geom: object
    grid: object
    kind: str                  # "trace" | "flux" | "velocity"
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        n_space = 2 if self.geom.dim == 1 else self.geom.n_nodes
        expect = (n_space, self.grid.n_steps + 1)
        if self.samples.shape != expect:
            raise ValueError(f"samples shape {self.samples.shape} != {expect}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("trace samples must be finite")

    @classmethod
    def from_function(cls, geom, grid, f, kind="trace"):
        """Sample ``f(points, t)`` at boundary nodes over the grid."""
        nodes = boundary_nodes(geom)
        cols = [np.atleast_1d(np.asarray(f(nodes, t), dtype=float))
                for t in grid.times]
        return cls(geom, grid, kind, np.stack(cols, axis=1))

    @classmethod
    def zeros(cls, geom, grid, kind="trace"):
        n_space = 2 if geom.dim == 1 else geom.n_nodes
        return cls(geom, grid, kind, np.zeros((n_space, grid.n_steps + 1)))

    def time_derivative(self) -> "TraceSeries":
        """Centered-difference time derivative (one-sided at the ends)."""
        d = np.gradient(self.samples, self.grid.dt, axis=1)
        return TraceSeries(self.geom, self.grid, "velocity", d)

    def in_time(self, times):
        """Samples interpolated to arbitrary times (0 before t = 0)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        tmax = self.grid.times[-1]
        if np.any(times > tmax + 1e-9 * max(tmax, 1.0)):
            raise CoverageError("trace series does not cover requested times")
        out = np.empty((self.samples.shape[0], len(times)))
        for i, row in enumerate(self.samples):
            out[i] = np.interp(times, self.grid.times, row, left=0.0)
        # causal extension: exactly zero before t = 0
        out[:, times < 0.0] = 0.0
        return out

    def space_support(self, points):
        """Sparse interpolation: (indices (m, s), weights (m, s))."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        g = self.geom
        m = len(points)
        if g.dim == 1:
            idx = (np.abs(points[:, 0] - g.a1)
                   > np.abs(points[:, 0] - g.a2)).astype(int)
            return idx[:, None], np.ones((m, 1))
        if g.dim == 2:
            diffs = points[:, None, :] - g.starts[None, :, :]
            e = g.ends - g.starts
            ee = np.einsum("ej,ej->e", e, e)
            s = np.clip(np.einsum("mej,ej->me", diffs, e) / ee, 0.0, 1.0)
            closest = g.starts[None] + s[..., None] * e[None]
            dist = np.linalg.norm(points[:, None, :] - closest, axis=2)
            best = np.argmin(dist, axis=1)
            sb = s[np.arange(m), best]
            idx = np.stack([best, (best + 1) % g.n_nodes], axis=1)
            return idx, np.stack([1.0 - sb, sb], axis=1)
        dist = np.linalg.norm(points[:, None, :] - g.centroids[None], axis=2)
        best = np.argmin(dist, axis=1)
        e1 = g.v1[best] - g.v0[best]
        e2 = g.v2[best] - g.v0[best]
        d = points - g.v0[best]
        E = np.einsum("ij,ij->i", e1, e1)
        F = np.einsum("ij,ij->i", e1, e2)
        Gm = np.einsum("ij,ij->i", e2, e2)
        p1 = np.einsum("ij,ij->i", d, e1)
        p2 = np.einsum("ij,ij->i", d, e2)
        det = E * Gm - F * F
        a = np.clip((Gm * p1 - F * p2) / det, 0.0, 1.0)
        b = np.clip((E * p2 - F * p1) / det, 0.0, 1.0)
        w0 = np.clip(1.0 - a - b, 0.0, 1.0)
        wts = np.stack([w0, a, b], axis=1)
        wts /= wts.sum(axis=1)[:, None]
        return g.triangles[best], wts

    def space_weights(self, points) -> np.ndarray:
        """Dense interpolation matrix (m, n_space) for boundary points."""
        idx, wts = self.space_support(points)
        m = len(idx)
        n_space = self.samples.shape[0]
        w = np.zeros((m, n_space))
        np.add.at(w, (np.repeat(np.arange(m), idx.shape[1]), idx.ravel()),
                  wts.ravel())
        return w

    def as_density(self) -> Callable:
        """density(points, times) -> (m, k) for the quadrature engines."""
        def density(points, times):
            return self.space_weights(points) @ self.in_time(times)
        return density

    def as_retarded_density(self) -> Callable:
        """density(points, matched_times) -> (m,), one time per point."""
        tgrid = self.grid.times

        def density(points, times):
            idx, wts = self.space_support(points)
            times = np.asarray(times, dtype=float)
            k = np.clip(np.searchsorted(tgrid, times) - 1, 0, len(tgrid) - 2)
            frac = (times - tgrid[k]) / (tgrid[k + 1] - tgrid[k])
            rows = self.samples[idx]                       # (m, s, K+1)
            vals = (rows[np.arange(len(idx))[:, None], np.arange(idx.shape[1])[None, :], k[:, None]]
                    * (1.0 - frac)[:, None]
                    + rows[np.arange(len(idx))[:, None], np.arange(idx.shape[1])[None, :], k[:, None] + 1]
                    * frac[:, None])
            out = np.einsum("ms,ms->m", wts, vals)
            out[times < 0.0] = 0.0
            return out
        return density


def boundary_nodes(geom) -> np.ndarray:
    if geom.dim == 1:
        return geom.endpoints[:, None]
    if geom.dim == 2:
        return geom.nodes
    return geom.vertices


def _zero_field(points, *_):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return np.zeros(len(points))


@dataclass
class CauchyData:
    """Initial displacement u0, initial velocity v0 and source G.

    All evaluators are vectorized over points; ``source(points, times)``
    accepts a scalar time or a per-point time array.  ``grad_u0`` is
    optional and only used where analytic differentiation is cheaper than
    finite differences.
    """

    u0: Callable = None
    v0: Callable = None
    source: Callable = None
    grad_u0: Callable = None

    def u0_eval(self, points):
        return _zero_field(points) if self.u0 is None else \
            np.asarray(self.u0(points), dtype=float)

    def v0_eval(self, points):
        return _zero_field(points) if self.v0 is None else \
            np.asarray(self.v0(points), dtype=float)

    def source_eval(self, points, times):
        if self.source is None:
            return _zero_field(points)
        return np.asarray(self.source(points, times), dtype=float)

    @property
    def is_zero(self) -> bool:
        return self.u0 is None and self.v0 is None and self.source is None


ZERO_CAUCHY = CauchyData()


# ---------------------------------------------------------------------------
# N = 1
# ---------------------------------------------------------------------------

def _cumulative_trapezoid_at(series_row, times, T):
    """Trapezoidal integral of a piecewise-linear series over [0, T]."""
    if T <= 0.0:
        return 0.0
    k = int(np.searchsorted(times, T, side="right")) - 1
    k = min(k, len(times) - 2)
    full = np.trapezoid(series_row[: k + 1], times[: k + 1]) if k >= 1 else 0.0
    # partial last cell
    t0 = times[k]
    if T > t0:
        dt = times[k + 1] - times[k]
        v0 = series_row[k]
        v1 = series_row[k] + (series_row[k + 1] - series_row[k]) * (T - t0) / dt
        full += 0.5 * (v0 + v1) * (T - t0)
    return float(full)


def data_terms_1d(interval, grid, cauchy: CauchyData, x: float, t: float,
                  n_quad: int = 24) -> float:
    """Cauchy-data and source contributions to 2 u(x, t) on the interval."""
    c = grid.c
    ct = c * t
    total = 0.0
    a1, a2 = interval.a1, interval.a2
    # velocity term: (1/c) int over [a1,a2] cap [x-ct, x+ct] of v0
    lo, hi = max(a1, x - ct), min(a2, x + ct)
    gx, gw = _gl(n_quad)
    if hi > lo and cauchy.v0 is not None:
        y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
        w = 0.5 * (hi - lo) * gw
        total += float(np.sum(w * cauchy.v0_eval(y[:, None]))) / c
    # characteristic-line displacement terms
    if cauchy.u0 is not None:
        for z in (x - ct, x + ct):
            chi = characteristic_function(interval, z)
            if chi > 0.0:
                total += chi * float(cauchy.u0_eval(np.array([[z]]))[0])
    # source: -c int_0^t d sigma int over |x-y| < c(t-sigma) of G(y, sigma)
    if cauchy.source is not None:
        sg, sw = _gl(n_quad)
        sig = 0.5 * t * (sg + 1.0)
        wsig = 0.5 * t * sw
        acc = 0.0
        for s, ws in zip(sig, wsig):
            rad = c * (t - s)
            lo2, hi2 = max(a1, x - rad), min(a2, x + rad)
            if hi2 <= lo2:
                continue
            y = 0.5 * (lo2 + hi2) + 0.5 * (hi2 - lo2) * gx
            w = 0.5 * (hi2 - lo2) * gw
            acc += ws * float(np.sum(w * cauchy.source_eval(y[:, None], s)))
        total -= c * acc
    return total


def represent_1d(interval, grid, traces: dict, cauchy: CauchyData,
                 x: float, t: float, n_quad: int = 24) -> float:
    """u(x, t) strictly inside the interval from endpoint traces and data.

    ``traces`` supplies "u" (endpoint displacement) and "p" (outward flux
    du/dn) as TraceSeries with two spatial slots (a1, a2).
    """
    x = float(np.asarray(x).reshape(-1)[0])
    if not (interval.a1 < x < interval.a2):
        raise PlacementError("x must lie strictly inside the interval")
    if t <= 0.0:
        raise PlacementError("t must be positive")
    return 0.5 * _twice_u_1d(interval, grid, traces, cauchy, x, t, n_quad)


def _twice_u_1d(interval, grid, traces, cauchy, x, t, n_quad=24):
    """The representation total 2 H(x) u(x, t); shared with the BIE layer."""
    c = grid.c
    u_tr = traces.get("u")
    p_tr = traces.get("p")
    total = data_terms_1d(interval, grid, cauchy, x, t, n_quad)
    ends = (interval.a1, interval.a2)
    for k, a in enumerate(ends):
        r = abs(x - a)
        if c * t - r <= 0.0:
            continue  # causal gate closed
        t_ret = t - r / c
        # flux history:  + c * int_0^{t_ret} p(a_k, sigma) d sigma
        # (u,x(a2) = p(a2), u,x(a1) = -p(a1): both collapse onto + p)
        if p_tr is not None:
            total += c * _cumulative_trapezoid_at(
                p_tr.samples[k], grid.times, t_ret)
        # retarded displacement with the orientation sign
        if u_tr is not None:
            sgn = 0.0 if x == a else math.copysign(1.0, x - a)
            uval = float(u_tr.in_time(np.array([t_ret]))[k, 0])
            total += -interval.normals[k] * sgn * uval
    return total


# ---------------------------------------------------------------------------
# N = 2
# ---------------------------------------------------------------------------

def _front_weighted_boundary(geom, x, ct, f, rule=DEFAULT_RULE, levels=6):
    """int over S_t(x) of f(y) (dr/dn) (ct / r) / sqrt(c^2 t^2 - r^2) dS.

    The integrand has an inverse-square-root edge singularity where the
    clip boundary meets r = ct; clipped spans are geometrically graded
    toward both ends before Gauss quadrature.
    """
    rb = truncate_boundary(geom, x, ct)
    if not rb.clips:
        return 0.0
    graded = []
    for (e, s0, s1, L) in rb.clips:
        mid = 0.5 * (s0 + s1)
        pieces = (_graded_breaks(s0, mid, s0, levels)
                  + _graded_breaks(mid, s1, s1, levels))
        for (a, b) in pieces:
            graded.append((e, a, b, L))
    rb2 = type(rb)(x=rb.x, ct=rb.ct, clips=graded, dim=rb.dim)
    y, w, r, drdn = _curve_clip_points(geom, np.asarray(x, float), rb2, rule)
    if len(y) == 0:
        return 0.0
    denom = np.sqrt(np.maximum(ct * ct - r * r, 0.0))
    keep = denom > 0.0
    vals = f(y[keep])
    return float(np.sum(w[keep] * vals * drdn[keep] * ct
                        / (r[keep] * denom[keep])))


def data_terms_2d(geom, grid, cauchy: CauchyData, x, t,
                  slicer: RadialCrossings = None, n_theta: int = 256,
                  rule=DEFAULT_RULE) -> float:
    """Cauchy-data and source contributions to 2 pi H(x) u(x, t), N = 2."""
    c = grid.c
    ct = c * t
    x = np.asarray(x, dtype=float).reshape(2)
    if cauchy.is_zero:
        return 0.0
    if slicer is None:
        slicer = RadialCrossings(geom, x, n_theta=n_theta)
    total = 0.0
    if cauchy.u0 is not None:
        # boundary-induced displacement term over the clipped boundary
        total += _front_weighted_boundary(geom, x, ct, cauchy.u0_eval, rule)
        # moving-ball displacement term: (1/c) d/dt of the weighted integral
        delta = 0.25 * grid.dt
        fp = slicer.weighted_ball_integral(cauchy.u0_eval, c * (t + delta))
        fm = slicer.weighted_ball_integral(cauchy.u0_eval, c * (t - delta))
        total += (fp - fm) / (2.0 * delta) / c
    if cauchy.v0 is not None:
        total += slicer.weighted_ball_integral(cauchy.v0_eval, ct) / c
    if cauchy.source is not None:
        # - int over ball dV int_0^{acosh(ct/r)} G(y, t - (r/c) cosh psi) d psi
        gpsi, wpsi = _gl(16)

        def inner(points):
            rr = np.linalg.norm(points - x, axis=1)
            rr = np.maximum(rr, 1e-14)
            psi_max = np.arccosh(np.maximum(ct / rr, 1.0))
            psi = 0.5 * psi_max[:, None] * (gpsi[None, :] + 1.0)
            wts = 0.5 * psi_max[:, None] * wpsi[None, :]
            tau = (rr[:, None] / c) * np.cosh(psi)
            times = t - tau
            pts_rep = np.repeat(points, len(gpsi), axis=0)
            vals = cauchy.source_eval(pts_rep, times.reshape(-1))
            return np.sum(wts * vals.reshape(len(points), -1), axis=1)

        total -= slicer.plain_ball_integral(inner, ct)
    return total


def represent_2d(geom, grid, traces: dict, cauchy: CauchyData, x, t,
                 rule=DEFAULT_RULE, slicer=None, n_theta: int = 256) -> float:
    """u(x, t) strictly inside a plane domain.

    ``traces`` supplies "p" (flux) and "u_dot" (boundary velocity; derived
    from "u" by time differencing when absent).
    """
    x = np.asarray(x, dtype=float).reshape(2)
    if characteristic_function(geom, x) != 1.0:
        raise PlacementError("x must lie strictly inside the domain")
    if t <= 0.0:
        raise PlacementError("t must be positive")
    total = _scaled_u_2d(geom, grid, traces, cauchy, x, t, rule, slicer,
                         n_theta)
    return total / (2.0 * math.pi)


def _scaled_u_2d(geom, grid, traces, cauchy, x, t, rule=DEFAULT_RULE,
                 slicer=None, n_theta=256):
    """The representation total 2 pi H(x) u(x, t); shared with the BIE."""
    c = grid.c
    total = data_terms_2d(geom, grid, cauchy, x, t, slicer, n_theta, rule)
    p_tr = traces.get("p")
    if p_tr is not None:
        total += c * integrate_weakly_singular(
            geom, x, t, p_tr.as_density(), c=c, grid=grid, rule=rule)
    u_dot = traces.get("u_dot")
    if u_dot is None and traces.get("u") is not None:
        u_dot = traces["u"].time_derivative()
    if u_dot is not None:
        total += c * integrate_retarded_dipole(
            geom, x, t, u_dot.as_density(), c=c, grid=grid, rule=rule)
    return total


# ---------------------------------------------------------------------------
# N = 3
# ---------------------------------------------------------------------------

def data_terms_3d(geom, grid, cauchy: CauchyData, x, t,
                  crossings: SphericalCrossings = None,
                  n_dirs: int = 2000) -> float:
    """Cauchy-data and source contributions to 4 pi H(x) u(x, t), N = 3."""
    c = grid.c
    ct = c * t
    x = np.asarray(x, dtype=float).reshape(3)
    if cauchy.is_zero:
        return 0.0
    if crossings is None:
        crossings = SphericalCrossings(geom, x, n_dirs=n_dirs)
    total = 0.0
    if cauchy.v0 is not None:
        total += crossings.sphere_cap_integral(cauchy.v0_eval, ct) / (c * c * t)
    if cauchy.u0 is not None:
        # d/dt [ (1/(c^2 t)) x moving-sphere integral of u0 ], taken at a
        # frozen causal mask: the mask's own motion produces a front line
        # integral that cancels exactly against the line term of the
        # retarded double layer, so neither is evaluated.
        delta = 0.25 * grid.dt

        def g(s):
            if s <= 0.0:
                return 0.0
            return crossings.sphere_cap_integral(
                cauchy.u0_eval, c * s, mask_radius=ct) / (c * c * s)

        total += (g(t + delta) - g(t - delta)) / (2.0 * delta)
    if cauchy.source is not None:
        total -= crossings.retarded_volume_integral(
            cauchy.source_eval, ct, c)
    return total


def represent_3d(geom, grid, traces: dict, cauchy: CauchyData, x, t,
                 rule=DEFAULT_RULE, crossings=None, n_dirs: int = 2000) -> float:
    """u(x, t) strictly inside a solid bounded by a closed surface.

    ``traces``: "u" (trace), "p" (flux); the velocity trace is derived by
    time differencing unless "u_dot" is supplied.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    if characteristic_function(geom, x) != 1.0:
        raise PlacementError("x must lie strictly inside the domain")
    if t <= 0.0:
        raise PlacementError("t must be positive")
    total = _scaled_u_3d(geom, grid, traces, cauchy, x, t, rule, crossings,
                         n_dirs)
    return total / (4.0 * math.pi)


def _scaled_u_3d(geom, grid, traces, cauchy, x, t, rule=DEFAULT_RULE,
                 crossings=None, n_dirs=2000):
    c = grid.c
    total = data_terms_3d(geom, grid, cauchy, x, t, crossings, n_dirs)
    p_tr = traces.get("p")
    if p_tr is not None:
        total += integrate_retarded_3d(
            geom, x, t, p_tr.as_retarded_density(), c=c, rule=rule,
            kernel="single")
    u_tr = traces.get("u")
    if u_tr is not None:
        total += integrate_retarded_3d(
            geom, x, t, u_tr.as_retarded_density(), c=c, rule=rule,
            kernel="double")
        u_dot = traces.get("u_dot") or u_tr.time_derivative()
        total += integrate_retarded_3d(
            geom, x, t, u_dot.as_retarded_density(), c=c, rule=rule,
            kernel="double_dot")
    return total
