"""Independent reference solutions: an analytic catalog and FD solvers.

The analytic catalog provides exact solutions of  Laplace(u) - c^-2 u_tt = G
with their time derivative and gradient, used to manufacture boundary
traces, Cauchy data and interior oracle values.  The finite-difference
solvers are a deliberately different discretization family (volume grids,
explicit second-order stepping) so that agreement with the boundary
integral pipeline is evidence rather than tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

__all__ = [
    "AnalyticSolution",
    "analytic_reference",
    "FDField",
    "fd_reference",
    "fd_reference_1d",
    "fd_reference_radial_2d",
]


@dataclass
class AnalyticSolution:
    """Exact space-time field with derivatives.

    All evaluators accept points of shape (m, N) (or scalars for N = 1)
    and a scalar or matched array time, and broadcast accordingly.
    """

    kind: str
    dim: int
    c: float
    u: Callable
    u_t: Callable
    grad: Callable          # (m, N) array
    source: Callable = None  # G(x, t); None means homogeneous

    def flux(self, points, normals, t):
        """Normal derivative du/dn at boundary points with given normals."""
        g = self.grad(points, t)
        normals = np.asarray(normals, dtype=float)
        if normals.ndim == 1:
            normals = np.broadcast_to(normals, g.shape)
        return np.einsum("ij,ij->i", g, normals)

    def residual(self, points, t, h=1e-4):
        """|wave-operator residual - G| by central differences (self-test)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lap = np.zeros(len(points))
        for j in range(self.dim):
            ej = np.zeros(self.dim)
            ej[j] = h
            lap += (self.u(points + ej, t) - 2.0 * self.u(points, t)
                    + self.u(points - ej, t)) / h**2
        utt = (self.u(points, t + h) - 2.0 * self.u(points, t)
               + self.u(points, t - h)) / h**2
        g = 0.0 if self.source is None else self.source(points, t)
        return np.abs(lap - utt / self.c**2 - g)


def _pts(points, dim):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1 and dim == 1:
        points = points[:, None]
    return np.atleast_2d(points)


def analytic_reference(kind: str, params: dict | None = None) -> AnalyticSolution:
    """Build a catalog solution.  Kinds and parameters:

    plane_wave       -- f(t - d.x/c); params: c, direction d, profile/
                        profile_d (default sin/cos), dim
    standing_mode_1d -- trig(k x) cos(k c t); params: c, k (default pi),
                        profile in {"sin", "cos"}
    spherical_outgoing -- f(t - rho/c)/rho, rho = |x - center|; params:
                        c, center, profile f(s) = s^2 H(s) by default
    dalembert_1d     -- Cauchy solution from u0, u0p, v0 on the line
    ramp_shock_1d    -- v (t - x/c) H(t - x/c); params: c, v
    """
    p = dict(params or {})
    c = float(p.get("c", 1.0))
    if kind == "plane_wave":
        dim = int(p.get("dim", 2))
        d = np.asarray(p.get("direction", [1.0] + [0.0] * (dim - 1)), dtype=float)
        d = d / np.linalg.norm(d)
        f = p.get("profile", np.sin)
        fp = p.get("profile_d", np.cos)

        def phase(x, t):
            x = _pts(x, dim)
            return t - (x @ d) / c

        return AnalyticSolution(
            kind, dim, c,
            u=lambda x, t: f(phase(x, t)),
            u_t=lambda x, t: fp(phase(x, t)),
            grad=lambda x, t: -fp(phase(x, t))[:, None] * d[None, :] / c,
        )
    if kind == "standing_mode_1d":
        k = float(p.get("k", math.pi))
        profile = p.get("profile", "sin")
        sp, spd = (np.sin, np.cos) if profile == "sin" else (np.cos, lambda z: -np.sin(z))

        def xx(x):
            return _pts(x, 1)[:, 0]

        return AnalyticSolution(
            kind, 1, c,
            u=lambda x, t: sp(k * xx(x)) * np.cos(k * c * t),
            u_t=lambda x, t: -k * c * sp(k * xx(x)) * np.sin(k * c * t),
            grad=lambda x, t: (k * spd(k * xx(x)) * np.cos(k * c * t))[:, None],
        )
    if kind == "spherical_outgoing":
        center = np.asarray(p.get("center", (3.0, 0.0, 0.0)), dtype=float)
        f = p.get("profile", lambda s: np.where(s > 0.0, s * s, 0.0))
        fp = p.get("profile_d", lambda s: np.where(s > 0.0, 2.0 * s, 0.0))

        def geom3(x):
            x = _pts(x, 3)
            dx = x - center
            rho = np.linalg.norm(dx, axis=1)
            return dx, rho

        def u(x, t):
            _dx, rho = geom3(x)
            return f(t - rho / c) / rho

        def u_t(x, t):
            _dx, rho = geom3(x)
            return fp(t - rho / c) / rho

        def grad(x, t):
            dx, rho = geom3(x)
            s = t - rho / c
            radial = -fp(s) / (c * rho) - f(s) / rho**2
            return (radial / rho)[:, None] * dx

        return AnalyticSolution(kind, 3, c, u=u, u_t=u_t, grad=grad)
    if kind == "dalembert_1d":
        u0 = p.get("u0", lambda x: np.zeros_like(np.asarray(x, dtype=float)))
        u0p = p.get("u0p", lambda x: np.zeros_like(np.asarray(x, dtype=float)))
        v0 = p.get("v0", lambda x: np.zeros_like(np.asarray(x, dtype=float)))

        def xx(x):
            return _pts(x, 1)[:, 0]

        def vint(a, b):
            return np.array([quad(v0, aa, bb, limit=200)[0]
                             for aa, bb in zip(np.atleast_1d(a), np.atleast_1d(b))])

        def u(x, t):
            z = xx(x)
            return (0.5 * (u0(z - c * t) + u0(z + c * t))
                    + vint(z - c * t, z + c * t) / (2.0 * c))

        def u_t(x, t):
            z = xx(x)
            return (0.5 * c * (u0p(z + c * t) - u0p(z - c * t))
                    + 0.5 * (v0(z + c * t) + v0(z - c * t)))

        def grad(x, t):
            z = xx(x)
            g = (0.5 * (u0p(z - c * t) + u0p(z + c * t))
                 + (v0(z + c * t) - v0(z - c * t)) / (2.0 * c))
            return g[:, None]

        return AnalyticSolution(kind, 1, c, u=u, u_t=u_t, grad=grad)
    if kind == "ramp_shock_1d":
        v = float(p.get("v", 1.0))

        def xx(x):
            return _pts(x, 1)[:, 0]

        def gate(x, t):
            return (t - xx(x) / c) > 0.0

        return AnalyticSolution(
            kind, 1, c,
            u=lambda x, t: np.where(gate(x, t), v * (t - xx(x) / c), 0.0),
            u_t=lambda x, t: np.where(gate(x, t), v, 0.0),
            grad=lambda x, t: np.where(gate(x, t), -v / c, 0.0)[:, None],
        )
    raise ValueError(f"unknown analytic kind {kind!r}")


# ---------------------------------------------------------------------------
# finite-difference references
# ---------------------------------------------------------------------------

@dataclass
class FDField:
    """Gridded field u(x_i, t_k) with bilinear interpolation."""

    x: np.ndarray          # (n,) for 1d, (n,) radii for radial 2d
    times: np.ndarray
    u: np.ndarray          # (len(times), len(x))
    c: float
    mode: str = "1d"

    def sample(self, points, t):
        """Interpolate at points (m,) / (m, 2) and scalar time t."""
        points = np.asarray(points, dtype=float)
        if self.mode == "radial":
            points = np.atleast_2d(points)
            coord = np.linalg.norm(points, axis=1)
        else:
            coord = np.atleast_1d(points).reshape(-1) if points.ndim <= 1 \
                else points[:, 0]
        kt = np.searchsorted(self.times, t) - 1
        kt = int(np.clip(kt, 0, len(self.times) - 2))
        wt = (t - self.times[kt]) / (self.times[kt + 1] - self.times[kt])
        row = (1.0 - wt) * self.u[kt] + wt * self.u[kt + 1]
        return np.interp(coord, self.x, row)


def fd_reference(kind: str, **kw) -> FDField:
    if kind == "1d":
        return fd_reference_1d(**kw)
    if kind == "radial_2d":
        return fd_reference_radial_2d(**kw)
    raise ValueError(f"unknown FD reference kind {kind!r}")


def fd_reference_1d(a1, a2, c, T, h, dt, bc_kind="dirichlet",
                    g1=None, g2=None, u0=None, v0=None, G=None) -> FDField:
    """Explicit second-order scheme on [a1, a2].

    Dirichlet values are imposed strongly via g1(t), g2(t); Neumann fluxes
    du/dn = g (outward normal) via ghost points.  Refuses unstable steps
    (c dt / h must be <= 1).
    """
    lam = c * dt / h
    if lam > 1.0 + 1e-12:
        raise ValueError(f"unstable: c dt / h = {lam:.3f} > 1")
    n = int(round((a2 - a1) / h)) + 1
    x = np.linspace(a1, a2, n)
    nt = int(round(T / dt))
    times = np.arange(nt + 1) * dt
    zero1 = lambda t: 0.0
    zerox = lambda xs: np.zeros_like(xs)
    g1 = g1 or zero1
    g2 = g2 or zero1
    u0 = u0 or zerox
    v0 = v0 or zerox
    U = np.zeros((nt + 1, n))
    U[0] = u0(x)

    def rhs(xs, t):
        return G(xs, t) if G is not None else np.zeros_like(xs)

    def lap_interior(row, t):
        out = np.zeros_like(row)
        out[1:-1] = (row[2:] - 2.0 * row[1:-1] + row[:-2]) / h**2
        if bc_kind == "neumann":
            # ghost: u[-1] = u[1] - 2 h g1 (outward normal -1 at a1)
            out[0] = 2.0 * (row[1] - row[0] + h * g1(t)) / h**2
            out[-1] = 2.0 * (row[-2] - row[-1] + h * g2(t)) / h**2
        return out

    # first step via Taylor expansion with initial acceleration
    acc0 = c * c * (lap_interior(U[0], 0.0) - rhs(x, 0.0))
    U[1] = U[0] + dt * v0(x) + 0.5 * dt * dt * acc0
    if bc_kind == "dirichlet":
        U[0][0], U[0][-1] = g1(0.0), g2(0.0)
        U[1][0], U[1][-1] = g1(dt), g2(dt)
    for k in range(1, nt):
        t = times[k]
        acc = c * c * (lap_interior(U[k], t) - rhs(x, t))
        U[k + 1] = 2.0 * U[k] - U[k - 1] + dt * dt * acc
        if bc_kind == "dirichlet":
            U[k + 1][0] = g1(times[k + 1])
            U[k + 1][-1] = g2(times[k + 1])
    return FDField(x=x, times=times, u=U, c=c, mode="1d")


def fd_reference_radial_2d(R, c, T, h, dt, bc_kind="dirichlet",
                           g=None, u0=None, v0=None, G=None) -> FDField:
    """Radially symmetric disk solver:  u_tt = c^2 (u_rr + u_r / r) + c^2 G.

    Valid for rotation-invariant data on the disk of radius R.  The origin
    uses the regularized limit u_rr + u_r/r -> 2 u_rr; the rim imposes the
    boundary condition in r.
    """
    lam = c * dt / h
    if lam > 1.0 / math.sqrt(2.0) + 1e-12:
        raise ValueError(f"unstable: c dt / h = {lam:.3f} > 1/sqrt(2)")
    n = int(round(R / h)) + 1
    r = np.linspace(0.0, R, n)
    nt = int(round(T / dt))
    times = np.arange(nt + 1) * dt
    g = g or (lambda t: 0.0)
    u0 = u0 or (lambda rr: np.zeros_like(rr))
    v0 = v0 or (lambda rr: np.zeros_like(rr))
    U = np.zeros((nt + 1, n))
    U[0] = u0(r)

    def rhs(rr, t):
        return G(rr, t) if G is not None else np.zeros_like(rr)

    def lap(row, t):
        out = np.zeros_like(row)
        out[1:-1] = ((row[2:] - 2.0 * row[1:-1] + row[:-2]) / h**2
                     + (row[2:] - row[:-2]) / (2.0 * h * r[1:-1]))
        out[0] = 4.0 * (row[1] - row[0]) / h**2   # symmetric origin
        if bc_kind == "neumann":
            out[-1] = (2.0 * (row[-2] - row[-1] + h * g(t)) / h**2
                       + g(t) / r[-1])
        return out

    acc0 = c * c * (lap(U[0], 0.0) - rhs(r, 0.0))
    U[1] = U[0] + dt * v0(r) + 0.5 * dt * dt * acc0
    if bc_kind == "dirichlet":
        U[0][-1] = g(0.0)
        U[1][-1] = g(dt)
    for k in range(1, nt):
        t = times[k]
        acc = c * c * (lap(U[k], t) - rhs(r, t))
        U[k + 1] = 2.0 * U[k] - U[k - 1] + dt * dt * acc
        if bc_kind == "dirichlet":
            U[k + 1][-1] = g(times[k + 1])
    return FDField(x=r, times=times, u=U, c=c, mode="radial")
