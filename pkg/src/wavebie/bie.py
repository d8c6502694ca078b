"""Marching-on-in-time collocation solves of the boundary equations.

Taking the interior representation to a smooth boundary point turns it
into an equation between the trace u_S and the flux p = du/dn, with free
term equal to the interior angle (plane) or interior solid angle (space)
at the collocation node -- the discrete counterpart of the 1/2 free
term.  With piecewise-linear space-time densities the discretized system
is block lower triangular in the time index:

    sum over lags l of  B_l q_{k - l}  =  known data at step k,

so each step solves one small dense system with the lag-0 block (Dirichlet,
first kind) or the free-term-shifted lag-0 block (Neumann, second kind).
On the interval the boundary shrinks to two endpoints and the march
reduces to a pair of retarded functional equations stepped explicitly
(Neumann) or as scalar Volterra solves (Dirichlet).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RadialCrossings, SphericalCrossings, TimeGrid
from .kernels import time_kernel_integrals, time_kernel_second_moment
from .quadrature import (
    DEFAULT_RULE,
    _gl,
    _graded_breaks,
    duffy_vertex_quadrature,
    _surface_standard_rule,
)
from .representation import (
    CauchyData,
    TraceSeries,
    ZERO_CAUCHY,
    data_terms_1d,
    data_terms_2d,
    data_terms_3d,
    boundary_nodes,
)

__all__ = [
    "Scenario",
    "MOTSystem",
    "DiscretizationError",
    "assemble",
    "solve_dirichlet",
    "solve_neumann",
    "solve_1d_endpoints",
    "boundary_residual",
]

log = logging.getLogger(__name__)


class DiscretizationError(RuntimeError):
    pass


@dataclass
class Scenario:
    """A boundary value problem instance for the marching solver."""

    geom: object
    grid: TimeGrid
    bvp_kind: str                       # "dirichlet" | "neumann"
    given: TraceSeries
    cauchy: CauchyData = field(default_factory=CauchyData)

    def __post_init__(self):
        if self.bvp_kind not in ("dirichlet", "neumann"):
            raise ValueError("bvp_kind must be 'dirichlet' or 'neumann'")
        if self.given.grid is not self.grid and \
                not np.allclose(self.given.grid.times, self.grid.times):
            raise ValueError("given trace grid disagrees with scenario grid")


@dataclass
class MOTSystem:
    """Per-lag influence blocks and free-term diagonal."""

    single: list                        # V_l (flux blocks)
    dipole: list                        # D_l (velocity-difference blocks)
    double: list                        # C_l (N = 3 trace blocks), or None
    double_dot: list                    # E_l (N = 3 velocity blocks), or None
    free: np.ndarray                    # interior-angle free coefficients
    n_lags: int


def _interior_angles_2d(geom) -> np.ndarray:
    """Interior angle of the polygonal boundary at each node."""
    t_prev = np.roll(geom.tangents, 1, axis=0)
    t_next = geom.tangents
    cross = t_prev[:, 0] * t_next[:, 1] - t_prev[:, 1] * t_next[:, 0]
    dot = np.einsum("ij,ij->i", t_prev, t_next)
    turn = np.arctan2(cross, dot)
    return math.pi - turn


def _interior_solid_angles_3d(geom) -> np.ndarray:
    """Interior solid angle at each mesh vertex (sum over far triangles)."""
    out = np.empty(geom.n_nodes)
    for i in range(geom.n_nodes):
        sa = geom.solid_angles(geom.vertices[i])
        adj = np.any(geom.triangles == i, axis=1)
        out[i] = float(sa[~adj].sum())
    return out


def _row_points_2d(geom, i, rule=DEFAULT_RULE):
    """Quadrature table for collocation row i on the full curve.

    Returns y, w, r, drdn and the hat-function scatter (cols, wts); the two
    elements meeting node i are geometrically graded toward it.
    """
    x = geom.nodes[i]
    gl_x, gl_w = _gl(rule.order)
    n = geom.n_elements
    ys, ws, cols, cwts = [], [], [], []
    for e in range(n):
        if e == i:
            spans = _graded_breaks(0.0, 1.0, 0.0, rule.grading_levels)
        elif e == (i - 1) % n:
            spans = _graded_breaks(0.0, 1.0, 1.0, rule.grading_levels)
        else:
            spans = [(0.0, 1.0)]
        for (a, b) in spans:
            s = 0.5 * (a + b) + 0.5 * (b - a) * gl_x
            w = 0.5 * (b - a) * geom.lengths[e] * gl_w
            y = geom.starts[e] + s[:, None] * (geom.ends[e] - geom.starts[e])
            ys.append(y)
            ws.append(w)
            m = len(s)
            cols.append(np.stack([np.full(m, e), np.full(m, (e + 1) % n)],
                                 axis=1))
            cwts.append(np.stack([1.0 - s, s], axis=1))
    y = np.concatenate(ys)
    w = np.concatenate(ws)
    d = y - x
    r = np.linalg.norm(d, axis=1)
    # normals are per-element constants; rebuild per point
    nrm = np.concatenate([np.repeat(geom.normals[e][None, :], len(block), axis=0)
                          for e, block in zip(
                              [c[0, 0] for c in cols], ys)])
    drdn = np.einsum("ij,ij->i", d, nrm) / np.maximum(r, 1e-300)
    return y, w, r, drdn, np.concatenate(cols), np.concatenate(cwts)


def _tent_single_coeff(r, c, dt, ell):
    """int of (time hat at lag ell) / sqrt(c^2 tau^2 - r^2) d tau."""
    t0 = (ell - 1) * dt
    t1 = ell * dt
    t2 = (ell + 1) * dt
    out = np.zeros_like(np.asarray(r, dtype=float))
    if ell >= 1:
        i0, i1 = time_kernel_integrals(r, c, t0, t1)
        out = out + (i1 - t0 * i0) / dt
    i0, i1 = time_kernel_integrals(r, c, t1, t2)
    out = out + (t2 * i0 - i1) / dt
    return out


def _tent_moment_coeff(r, c, dt, ell):
    """int of tau x (time hat at lag ell) / sqrt(c^2 tau^2 - r^2) d tau."""
    t0 = (ell - 1) * dt
    t1 = ell * dt
    t2 = (ell + 1) * dt
    out = np.zeros_like(np.asarray(r, dtype=float))
    if ell >= 1:
        _i0, i1 = time_kernel_integrals(r, c, t0, t1)
        i2 = time_kernel_second_moment(r, c, t0, t1)
        out = out + (i2 - t0 * i1) / dt
    _i0, i1 = time_kernel_integrals(r, c, t1, t2)
    i2 = time_kernel_second_moment(r, c, t1, t2)
    out = out + (t2 * i1 - i2) / dt
    return out


def _slab_moment(r, c, dt, ell):
    """J_ell(r): int tau / sqrt(c^2 tau^2 - r^2) over slab [l dt, (l+1) dt]."""
    _i0, i1 = time_kernel_integrals(r, c, ell * dt, (ell + 1) * dt)
    return i1


def n_lag_blocks(geom, grid) -> int:
    return int(math.ceil(geom.diameter / (grid.c * grid.dt))) + 2


def _stability_guard(geom, grid):
    if geom.dim == 2:
        h_min = float(np.min(geom.lengths))
    elif geom.dim == 3:
        h_min = float(np.min(np.sqrt(geom.areas)))
    else:
        return
    ratio = grid.c * grid.dt / h_min
    if not (0.5 <= ratio <= 2.0):
        log.warning("c dt / h_min = %.3f outside the empirical stability "
                    "window [0.5, 2]; the march may be inaccurate or "
                    "unstable", ratio)


def assemble(scenario: Scenario, rule=DEFAULT_RULE) -> MOTSystem:
    """Influence blocks for the N = 2 or N = 3 marching system."""
    geom, grid = scenario.geom, scenario.grid
    _stability_guard(geom, grid)
    if geom.dim == 2:
        return _assemble_2d(geom, grid, rule)
    if geom.dim == 3:
        return _assemble_3d(geom, grid, rule)
    raise ValueError("assemble applies to N = 2, 3; use solve_1d_endpoints")


def _assemble_2d(geom, grid, rule) -> MOTSystem:
    n = geom.n_nodes
    c, dt = grid.c, grid.dt
    L = n_lag_blocks(geom, grid)
    V = [np.zeros((n, n)) for _ in range(L + 1)]
    D = [np.zeros((n, n)) for _ in range(L + 1)]
    for i in range(n):
        _y, w, r, drdn, cols, cwts = _row_points_2d(geom, i, rule)
        dip_geo = w * drdn / np.maximum(r, 1e-300)
        for ell in range(L + 1):
            ts = _tent_single_coeff(r, c, dt, ell)
            vrow = np.zeros(n)
            np.add.at(vrow, cols.ravel(),
                      (cwts * (c * w * ts)[:, None]).ravel())
            V[ell][i] = vrow
            js = _slab_moment(r, c, dt, ell)
            drow = np.zeros(n)
            np.add.at(drow, cols.ravel(),
                      (cwts * (c * dip_geo * js)[:, None]).ravel())
            D[ell][i] = drow
    free = _interior_angles_2d(geom)
    return MOTSystem(single=V, dipole=D, double=None, double_dot=None,
                     free=free, n_lags=L)


def _row_points_3d(geom, i, rule):
    """Quadrature table for collocation row i over the whole surface."""
    x = geom.vertices[i]
    pts_all, wts_all = _surface_standard_rule(geom, rule.order)
    adj = np.any(geom.triangles == i, axis=1)
    far = np.nonzero(~adj)[0]
    pts = [pts_all[far].reshape(-1, 3)]
    wts = [wts_all[far].reshape(-1)]
    elems = [np.repeat(far, pts_all.shape[1])]
    for e in np.nonzero(adj)[0]:
        p, w = duffy_vertex_quadrature(
            x, [geom.v0[e], geom.v1[e], geom.v2[e]], rule.order)
        pts.append(p)
        wts.append(w)
        elems.append(np.full(len(w), e))
    pts = np.concatenate(pts)
    wts = np.concatenate(wts)
    elems = np.concatenate(elems)
    d = pts - x
    r = np.linalg.norm(d, axis=1)
    nrm = geom.normals[elems]
    drdn = np.einsum("ij,ij->i", d, nrm) / np.maximum(r, 1e-300)
    cols = geom.triangles[elems]
    cwts = _barycentric(geom, elems, pts)
    return pts, wts, r, drdn, cols, cwts


def _barycentric(geom, elems, pts):
    e1 = geom.v1[elems] - geom.v0[elems]
    e2 = geom.v2[elems] - geom.v0[elems]
    d = pts - geom.v0[elems]
    E = np.einsum("ij,ij->i", e1, e1)
    F = np.einsum("ij,ij->i", e1, e2)
    G = np.einsum("ij,ij->i", e2, e2)
    p1 = np.einsum("ij,ij->i", d, e1)
    p2 = np.einsum("ij,ij->i", d, e2)
    det = E * G - F * F
    a = (G * p1 - F * p2) / det
    b = (E * p2 - F * p1) / det
    return np.stack([1.0 - a - b, a, b], axis=1)


def _tent3(z):
    return np.maximum(1.0 - np.abs(z), 0.0)


def _assemble_3d(geom, grid, rule) -> MOTSystem:
    n = geom.n_nodes
    c, dt = grid.c, grid.dt
    L = n_lag_blocks(geom, grid)
    B = [np.zeros((n, n)) for _ in range(L + 1)]
    C = [np.zeros((n, n)) for _ in range(L + 1)]
    E = [np.zeros((n, n)) for _ in range(L + 1)]
    for i in range(n):
        _y, w, r, drdn, cols, cwts = _row_points_3d(geom, i, rule)
        rs = np.maximum(r, 1e-300)
        for ell in range(L + 1):
            tent = _tent3(ell - r / (c * dt))
            if not np.any(tent):
                continue
            for block, geo in ((B, w * tent / rs),
                               (C, w * tent * drdn / rs**2),
                               (E, w * tent * drdn / (c * rs))):
                row = np.zeros(n)
                np.add.at(row, cols.ravel(), (cwts * geo[:, None]).ravel())
                block[ell][i] = row
    free = _interior_solid_angles_3d(geom)
    return MOTSystem(single=B, dipole=None, double=C, double_dot=E,
                     free=free, n_lags=L)


def _data_rhs(scenario, helpers, k) -> np.ndarray:
    """Cauchy-data and source terms at every collocation node, step k."""
    geom, grid, cauchy = scenario.geom, scenario.grid, scenario.cauchy
    t = grid.times[k]
    nodes = boundary_nodes(geom)
    if cauchy.is_zero:
        return np.zeros(len(nodes))
    out = np.empty(len(nodes))
    for i, x in enumerate(nodes):
        if geom.dim == 2:
            out[i] = data_terms_2d(geom, grid, cauchy, x, t,
                                   slicer=helpers[i])
        else:
            out[i] = data_terms_3d(geom, grid, cauchy, x, t,
                                   crossings=helpers[i])
    return out


def _data_helpers(scenario, n_theta=256, n_dirs=2000):
    geom = scenario.geom
    if scenario.cauchy.is_zero:
        return None
    nodes = boundary_nodes(geom)
    if geom.dim == 2:
        return [RadialCrossings(geom, x, n_theta) for x in nodes]
    return [SphericalCrossings(geom, x, n_dirs) for x in nodes]


def _initial_flux(scenario) -> np.ndarray:
    """Seed flux at t = 0 from the initial displacement gradient."""
    geom = scenario.geom
    cauchy = scenario.cauchy
    nodes = boundary_nodes(geom)
    if cauchy.grad_u0 is None:
        return np.zeros(len(nodes))
    if geom.dim == 2:
        normals = geom.node_normals
    else:
        normals = nodes / np.linalg.norm(nodes, axis=1)[:, None] \
            if geom.dim == 3 else None
        # generic vertex normal: area-weighted average of adjacent faces
        normals = np.zeros_like(nodes)
        for e in range(geom.n_elements):
            for v in geom.triangles[e]:
                normals[v] += geom.areas[e] * geom.normals[e]
        normals /= np.linalg.norm(normals, axis=1)[:, None]
    g = np.asarray(cauchy.grad_u0(nodes), dtype=float)
    return np.einsum("ij,ij->i", g, normals)


def solve_dirichlet(scenario: Scenario, system: MOTSystem = None,
                    rule=DEFAULT_RULE) -> TraceSeries:
    """Recover the flux p from a given trace u_S (first-kind march)."""
    if scenario.bvp_kind != "dirichlet":
        raise ValueError("scenario is not a Dirichlet run")
    geom, grid = scenario.geom, scenario.grid
    if geom.dim == 1:
        return solve_1d_endpoints(scenario)
    if system is None:
        system = assemble(scenario, rule)
    K = grid.n_steps
    n = geom.n_nodes if geom.dim >= 2 else 2
    u = scenario.given.samples
    u_dot = np.gradient(u, grid.dt, axis=1)
    p = np.zeros((n, K + 1))
    p[:, 0] = _initial_flux(scenario)
    helpers = _data_helpers(scenario)
    B0 = system.single[0]
    cond = np.linalg.cond(B0)
    if cond > 1e12:
        raise DiscretizationError(
            f"lag-0 block condition number {cond:.3e} > 1e12; adjust the "
            "c dt / h ratio")
    lu = np.linalg.inv(B0)
    dt = grid.dt
    for k in range(1, K + 1):
        rhs = system.free * u[:, k]
        if helpers is not None:
            rhs = rhs - _data_rhs(scenario, helpers, k)
        for ell in range(1, min(k, system.n_lags) + 1):
            rhs -= system.single[ell] @ p[:, k - ell]
        if geom.dim == 2:
            # velocity double layer from trace differences
            for m in range(1, k + 1):
                ell = k - m
                if ell > system.n_lags:
                    continue
                rhs -= system.dipole[ell] @ ((u[:, m] - u[:, m - 1]) / dt)
        else:
            for ell in range(0, min(k, system.n_lags) + 1):
                rhs -= system.double[ell] @ u[:, k - ell]
                rhs -= system.double_dot[ell] @ u_dot[:, k - ell]
        p[:, k] = lu @ rhs
    return TraceSeries(geom, grid, "flux", p)


def solve_neumann(scenario: Scenario, system: MOTSystem = None,
                  rule=DEFAULT_RULE) -> TraceSeries:
    """Recover the trace u_S from a given flux p (second-kind march)."""
    if scenario.bvp_kind != "neumann":
        raise ValueError("scenario is not a Neumann run")
    geom, grid = scenario.geom, scenario.grid
    if geom.dim == 1:
        return solve_1d_endpoints(scenario)
    if geom.dim != 2:
        raise NotImplementedError("the Neumann march is implemented for "
                                  "curves (N = 2) and intervals (N = 1)")
    if system is None:
        system = assemble(scenario, rule)
    K = grid.n_steps
    n = geom.n_nodes
    p = scenario.given.samples
    dt = grid.dt
    u = np.zeros((n, K + 1))
    if scenario.cauchy.u0 is not None:
        u[:, 0] = scenario.cauchy.u0_eval(geom.nodes)
    helpers = _data_helpers(scenario)
    A = np.diag(system.free) - system.dipole[0] / dt
    cond = np.linalg.cond(A)
    if cond > 1e12:
        raise DiscretizationError(
            f"second-kind matrix condition number {cond:.3e} > 1e12")
    lu = np.linalg.inv(A)
    for k in range(1, K + 1):
        rhs = np.zeros(n)
        if helpers is not None:
            rhs += _data_rhs(scenario, helpers, k)
        for ell in range(0, min(k, system.n_lags) + 1):
            rhs += system.single[ell] @ p[:, k - ell]
        # known part of the velocity double layer
        rhs -= system.dipole[0] @ (u[:, k - 1] / dt)
        for m in range(1, k):
            ell = k - m
            if ell > system.n_lags:
                continue
            rhs += system.dipole[ell] @ ((u[:, m] - u[:, m - 1]) / dt)
        u[:, k] = lu @ rhs
    return TraceSeries(geom, grid, "trace", u)


# ---------------------------------------------------------------------------
# N = 1 endpoint recursion
# ---------------------------------------------------------------------------

def solve_1d_endpoints(scenario: Scenario) -> TraceSeries:
    """March the pair of retarded endpoint equations on an interval.

    Neumann: the given flux makes each endpoint displacement explicit.
    Dirichlet: each step solves a scalar trapezoidal Volterra equation
    for the endpoint flux.
    """
    geom, grid = scenario.geom, scenario.grid
    if geom.dim != 1:
        raise ValueError("solve_1d_endpoints requires an interval scenario")
    c, dt, K = grid.c, grid.dt, grid.n_steps
    d = geom.a2 - geom.a1
    if dt > d / c:
        raise DiscretizationError(
            f"dt = {dt:g} exceeds the travel time d/c = {d / c:g}; the "
            "retarded coupling must span at least one step")
    times = grid.times
    ends = geom.endpoints
    cauchy = scenario.cauchy
    dirichlet = scenario.bvp_kind == "dirichlet"
    if dirichlet:
        u = scenario.given.samples
        p = np.zeros((2, K + 1))
        p[:, 0] = _initial_flux_1d(scenario)
    else:
        p = scenario.given.samples
        u = np.zeros((2, K + 1))
        if cauchy.u0 is not None:
            u[:, 0] = cauchy.u0_eval(ends[:, None])
    # cumulative trapezoid of the flux history, updated on the fly
    cum_p = np.zeros(2)
    for k in range(1, K + 1):
        t = times[k]
        for side in range(2):
            a = ends[side]
            other = 1 - side
            b = ends[other]
            rhs = data_terms_1d(geom, grid, cauchy, a, t)
            # far-endpoint terms, gated by the travel time
            if c * t - d > 0.0:
                t_ret = t - d / c
                rhs += c * _trapz_partial(p[other], times, t_ret)
                rhs += _interp_time(u[other], times, t_ret)
            if dirichlet:
                # u(a,t) = c int_0^t p(a) + rhs  ->  scalar solve for p_k
                hist = cum_p[side] + 0.5 * dt * p[side, k - 1]
                p[side, k] = (u[side, k] - rhs - c * hist) / (0.5 * c * dt)
            else:
                u[side, k] = rhs + c * (cum_p[side]
                                        + 0.5 * dt * (p[side, k - 1]
                                                      + p[side, k]))
        cum_p += 0.5 * dt * (p[:, k - 1] + p[:, k])
    solved = p if dirichlet else u
    kind = "flux" if dirichlet else "trace"
    return TraceSeries(geom, grid, kind, solved)


def _initial_flux_1d(scenario) -> np.ndarray:
    cauchy = scenario.cauchy
    geom = scenario.geom
    if cauchy.grad_u0 is None:
        return np.zeros(2)
    g = np.asarray(cauchy.grad_u0(geom.endpoints[:, None]), dtype=float)
    return g.reshape(2) * geom.normals


def _trapz_partial(row, times, T):
    from .representation import _cumulative_trapezoid_at
    return _cumulative_trapezoid_at(row, times, T)


def _interp_time(row, times, T):
    return float(np.interp(T, times, row, left=0.0))


# ---------------------------------------------------------------------------
# residual audit
# ---------------------------------------------------------------------------

def boundary_residual(scenario: Scenario, solved: TraceSeries,
                      system: MOTSystem = None, rule=DEFAULT_RULE) -> np.ndarray:
    """Residual of the discrete boundary equation with both traces known.

    Returns the per-node, per-step residual array (n_space, K+1).
    """
    geom, grid = scenario.geom, scenario.grid
    if scenario.bvp_kind == "dirichlet":
        u_series, p_series = scenario.given, solved
    else:
        u_series, p_series = solved, scenario.given
    if geom.dim == 1:
        return _residual_1d(scenario, u_series, p_series)
    if system is None:
        system = assemble(scenario, rule)
    u = u_series.samples
    p = p_series.samples
    u_dot = np.gradient(u, grid.dt, axis=1)
    K = grid.n_steps
    n = u.shape[0]
    helpers = _data_helpers(scenario)
    res = np.zeros((n, K + 1))
    dt = grid.dt
    for k in range(1, K + 1):
        acc = -system.free * u[:, k]
        if helpers is not None:
            acc = acc + _data_rhs(scenario, helpers, k)
        for ell in range(0, min(k, system.n_lags) + 1):
            acc += system.single[ell] @ p[:, k - ell]
        if geom.dim == 2:
            for m in range(1, k + 1):
                ell = k - m
                if ell > system.n_lags:
                    continue
                acc += system.dipole[ell] @ ((u[:, m] - u[:, m - 1]) / dt)
        else:
            for ell in range(0, min(k, system.n_lags) + 1):
                acc += system.double[ell] @ u[:, k - ell]
                acc += system.double_dot[ell] @ u_dot[:, k - ell]
        res[:, k] = acc
    return res


def _residual_1d(scenario, u_series, p_series):
    geom, grid = scenario.geom, scenario.grid
    c, dt, K = grid.c, grid.dt, grid.n_steps
    d = geom.a2 - geom.a1
    times = grid.times
    ends = geom.endpoints
    u = u_series.samples
    p = p_series.samples
    res = np.zeros((2, K + 1))
    for k in range(1, K + 1):
        t = times[k]
        for side in range(2):
            a = ends[side]
            other = 1 - side
            rhs = data_terms_1d(geom, grid, scenario.cauchy, a, t)
            rhs += c * _trapz_partial(p[side], times, t)
            if c * t - d > 0.0:
                t_ret = t - d / c
                rhs += c * _trapz_partial(p[other], times, t_ret)
                rhs += _interp_time(u[other], times, t_ret)
            res[side, k] = rhs - u[side, k]
    return res
