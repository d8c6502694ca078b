"""Closed-form causal kernels of the wave operator in 1, 2 and 3 dimensions.

The wave operator here is  Lu = Laplace(u) - c^-2 u_tt.  Its causal
fundamental solution U (zero before t = 0 and outside the light cone
|x| < c t), the time antiderivative W with dW/dt = U, and the directional
derivative kernel Hdir = dW/dm are:

    N = 1:  U = -(c/2) H(ct - |x|)
            W = -(1/2)(ct - |x|) H(ct - |x|)
            Hdir = (m/2) sgn(x) H(ct - |x|)
    N = 2:  U = -c / (2 pi sqrt(c^2 t^2 - R^2))        (R < ct, else 0)
            W = -(1/(2 pi)) arccosh(ct / R) H(ct - R)
            Hdir = (ct / (2 pi sqrt(c^2 t^2 - R^2))) (x.m / R^2) H(ct - R)
    N = 3:  U = -delta(t - R/c) / (4 pi R)             (impulse on the cone)
            W = -H(ct - R) / (4 pi R)
            Hdir = (x.m / R^2) [ delta(t - R/c)/(4 pi c) + H(ct - R)/(4 pi R) ]

with R = |x|.  The N = 3 impulse parts have no pointwise value and are
returned as (weight, retarded time) descriptors; the quadrature layer maps
them onto retarded-time evaluations of the density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelQuery",
    "KernelValue",
    "RetardedImpulse",
    "FrontSingularityError",
    "SingularOriginError",
    "eval_U",
    "eval_W",
    "eval_H",
    "time_kernel_integrals",
    "time_kernel_second_moment",
]

# relative width of the guard band around the front r = ct for N = 2
FRONT_GUARD_REL = 1e-14


class FrontSingularityError(ValueError):
    """Pointwise evaluation requested on (or too close to) the wave front."""


class SingularOriginError(ValueError):
    """Kernel evaluated at zero source-field offset where it is singular."""


@dataclass(frozen=True)
class RetardedImpulse:
    """Dirac-in-time part of a kernel: weight * delta(t - retarded_time)."""

    weight: float
    retarded_time: float


@dataclass(frozen=True)
class KernelValue:
    """Regular (pointwise) part plus an optional impulse descriptor."""

    regular: float
    impulse: RetardedImpulse | None = None


@dataclass(frozen=True)
class KernelQuery:
    """A single kernel evaluation request.

    ``offset`` is the source-to-field vector x - y, ``direction`` the unit
    vector m of the directional-derivative kernel.
    """

    dim: int
    offset: tuple[float, ...]
    t: float
    c: float
    direction: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if self.c <= 0.0:
            raise ValueError("wave speed must be positive")
        if len(self.offset) != self.dim:
            raise ValueError("offset length does not match dimension")
        if self.direction is not None:
            if len(self.direction) != self.dim:
                raise ValueError("direction length does not match dimension")
            nrm = math.sqrt(sum(d * d for d in self.direction))
            if abs(nrm - 1.0) > 1e-9:
                raise ValueError("direction must be a unit vector")

    @property
    def radius(self) -> float:
        return math.sqrt(sum(z * z for z in self.offset))


def _check_front(r: float, ct: float) -> None:
    if ct > 0.0 and abs(ct * ct - r * r) < FRONT_GUARD_REL * ct * ct:
        raise FrontSingularityError(
            f"query at r={r:.17g}, ct={ct:.17g} lies on the wave front; "
            "use the analytic time integrals instead"
        )


def eval_U(q: KernelQuery) -> KernelValue:
    """Fundamental solution. N = 3 returns the cone impulse as a descriptor."""
    r = q.radius
    ct = q.c * q.t
    if q.dim == 3:
        if r == 0.0:
            raise SingularOriginError("U is singular at zero offset")
        if q.t < 0.0:
            return KernelValue(0.0)
        return KernelValue(0.0, RetardedImpulse(-1.0 / (4.0 * math.pi * r), r / q.c))
    if ct <= 0.0 or r >= ct:
        if q.dim == 2:
            _check_front(r, ct)
        return KernelValue(0.0)
    if q.dim == 1:
        return KernelValue(-0.5 * q.c)
    _check_front(r, ct)
    return KernelValue(-q.c / (2.0 * math.pi * math.sqrt(ct * ct - r * r)))


def eval_W(q: KernelQuery) -> float:
    """Time antiderivative of the fundamental solution (dW/dt = U)."""
    r = q.radius
    ct = q.c * q.t
    if q.dim in (2, 3) and r == 0.0:
        raise SingularOriginError("W is singular at zero offset")
    if ct <= 0.0 or r >= ct:
        return 0.0
    if q.dim == 1:
        return -0.5 * (ct - r)
    if q.dim == 2:
        return -math.acosh(ct / r) / (2.0 * math.pi)
    return -1.0 / (4.0 * math.pi * r)


def eval_H(q: KernelQuery) -> KernelValue:
    """Directional derivative dW/dm. N = 3 carries an impulse part."""
    if q.direction is None:
        raise ValueError("eval_H requires a direction")
    r = q.radius
    ct = q.c * q.t
    xm = float(np.dot(q.offset, q.direction))
    if q.dim == 1:
        x = q.offset[0]
        if ct <= 0.0 or abs(x) >= ct:
            return KernelValue(0.0)
        sgn = 0.0 if x == 0.0 else math.copysign(1.0, x)
        return KernelValue(0.5 * sgn * q.direction[0])
    if r == 0.0:
        raise SingularOriginError("H is singular at zero offset")
    if q.dim == 2:
        if ct <= 0.0 or r >= ct:
            _check_front(r, ct)
            return KernelValue(0.0)
        _check_front(r, ct)
        s = math.sqrt(ct * ct - r * r)
        return KernelValue(ct / (2.0 * math.pi * s) * xm / (r * r))
    # N = 3
    imp = None
    reg = 0.0
    if q.t >= 0.0:
        imp = RetardedImpulse(xm / (r * r) / (4.0 * math.pi * q.c), r / q.c)
    if ct > 0.0 and r < ct:
        reg = xm / (r * r) / (4.0 * math.pi * r)
    return KernelValue(reg, imp)


def time_kernel_integrals(r, c, tau0, tau1):
    """Exact integrals of the arrival-singular time kernels.

    Returns (I0, I1) with

        I0 = int d tau / sqrt(c^2 tau^2 - r^2)
        I1 = int tau d tau / sqrt(c^2 tau^2 - r^2)

    both over [max(tau0, r/c), tau1]; zero when tau1 <= r/c.  Closed forms:
    I0 = arccosh(c tau / r)/c, I1 = sqrt(c^2 tau^2 - r^2)/c^2, evaluated at
    the endpoints.  Accepts scalars or arrays in ``r``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("r must be positive")
    if tau1 < tau0 or tau0 < 0.0:
        raise ValueError("need 0 <= tau0 <= tau1")
    lo = np.maximum(tau0, r / c)
    active = lo < tau1
    lo = np.where(active, lo, tau1)
    # clamp the acosh argument: lo >= r/c up to rounding
    a_hi = np.maximum(c * tau1 / r, 1.0)
    a_lo = np.maximum(c * lo / r, 1.0)
    i0 = np.where(active, (np.arccosh(a_hi) - np.arccosh(a_lo)) / c, 0.0)
    s_hi = np.sqrt(np.maximum((c * tau1) ** 2 - r * r, 0.0))
    s_lo = np.sqrt(np.maximum((c * lo) ** 2 - r * r, 0.0))
    i1 = np.where(active, (s_hi - s_lo) / (c * c), 0.0)
    if np.ndim(r) == 0:
        return float(i0), float(i1)
    return i0, i1


def time_kernel_second_moment(r, c, tau0, tau1):
    """int tau^2 d tau / sqrt(c^2 tau^2 - r^2) over [max(tau0, r/c), tau1].

    Closed form: tau sqrt(c^2 tau^2 - r^2)/(2 c^2) + r^2 arccosh(c tau/r)/(2 c^3).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("r must be positive")
    lo = np.maximum(tau0, r / c)
    active = lo < tau1
    lo = np.where(active, lo, tau1)

    def _anti(tau):
        s = np.sqrt(np.maximum((c * tau) ** 2 - r * r, 0.0))
        a = np.arccosh(np.maximum(c * tau / r, 1.0))
        return tau * s / (2.0 * c * c) + r * r * a / (2.0 * c**3)

    out = np.where(active, _anti(tau1) - _anti(lo), 0.0)
    if np.ndim(r) == 0:
        return float(out)
    return out
