"""Exact and high-accuracy reference solutions used as test oracles.

Three independent routes are provided:
  - the spatially homogeneous oscillation phi(t) = A cn(omega t, k), a
    particular solution of phidd = -V'(phi), evaluated through the
    arithmetic-geometric-mean descending Landen recursion;
  - a high-order adaptive ODE integration of the same oscillator;
  - the small-amplitude standing mode A sin(2 pi x/L) cos(2 pi t/L) of the
    massless linear wave equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import PotentialParams


def agm(a: float, b: float) -> float:
    """Arithmetic-geometric mean of a, b > 0."""
    for _ in range(40):
        if abs(a - b) <= 4e-16 * abs(a):
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def complete_elliptic_k(k2: float) -> float:
    """Complete elliptic integral K(k) with parameter k^2 = k2."""
    if not 0.0 <= k2 < 1.0:
        raise ValueError(f"modulus out of range: k^2 = {k2}")
    return 0.5 * math.pi / agm(1.0, math.sqrt(1.0 - k2))


def jacobi_cn(u: float, k2: float) -> float:
    """cn(u, k) for 0 <= k^2 < 1 by the AGM / descending Landen method."""
    if not 0.0 <= k2 < 1.0:
        raise ValueError(f"modulus out of range: k^2 = {k2}")
    if k2 == 0.0:
        return math.cos(u)
    kk = complete_elliptic_k(k2)
    # reduce to |u| <= K using cn(u + 2K) = -cn(u), cn(-u) = cn(u)
    u = math.fmod(u, 4.0 * kk)
    sign = 1.0
    if u < 0.0:
        u = -u
    if u > 2.0 * kk:
        u = 4.0 * kk - u
    if u > kk:
        u = 2.0 * kk - u
        sign = -1.0

    a = [1.0]
    b = math.sqrt(1.0 - k2)
    c = [math.sqrt(k2)]
    for _ in range(40):
        if abs(c[-1]) <= 1e-17:
            break
        a_next = 0.5 * (a[-1] + b)
        b_next = math.sqrt(a[-1] * b)
        c.append(0.5 * (a[-1] - b))
        a.append(a_next)
        b = b_next
    n = len(a) - 1
    phi = (2.0**n) * a[n] * u
    for i in range(n, 0, -1):
        phi = 0.5 * (phi + math.asin(max(-1.0, min(1.0, c[i] / a[i] * math.sin(phi)))))
    return sign * math.cos(phi)


@dataclass(frozen=True)
class CnSolution:
    """Homogeneous oscillation phi(t) = A cn(omega t, k) with
    omega^2 = r + lambda A^2 and k^2 = lambda A^2 / (2 (r + lambda A^2))."""

    amplitude: float
    p: PotentialParams

    @property
    def omega(self) -> float:
        w2 = self.p.r + self.p.lam * self.amplitude**2
        if w2 <= 0.0:
            raise ValueError("r + lambda A^2 must be positive for the cn oscillation")
        return math.sqrt(w2)

    @property
    def modulus_sq(self) -> float:
        w2 = self.p.r + self.p.lam * self.amplitude**2
        return self.p.lam * self.amplitude**2 / (2.0 * w2)

    @property
    def period(self) -> float:
        return 4.0 * complete_elliptic_k(self.modulus_sq) / self.omega


def cn_value(sol: CnSolution, t) -> float | np.ndarray:
    """phi(t) = A cn(omega t, k); degenerates to A cos(sqrt(r) t) at lambda = 0."""
    if np.isscalar(t):
        return sol.amplitude * jacobi_cn(sol.omega * t, sol.modulus_sq)
    return np.array([sol.amplitude * jacobi_cn(sol.omega * ti, sol.modulus_sq) for ti in t])


def ode_oracle(phi0: float, dphi0: float, p: PotentialParams, t, tol: float = 1e-12):
    """Integrate phidd = -V'(phi) to time(s) t with an adaptive 8th-order
    method at local tolerance tol.  Returns (phi, dphi) at t."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    t_end = float(t_arr.max()) if len(t_arr) else 0.0
    if t_end == 0.0 and np.all(t_arr == 0.0):
        phi = np.full_like(t_arr, phi0)
        dphi = np.full_like(t_arr, dphi0)
        return (float(phi[0]), float(dphi[0])) if np.isscalar(t) else (phi, dphi)

    def rhs(_t, y):
        return [y[1], -p.dv(y[0])]

    res = solve_ivp(
        rhs,
        (0.0, t_end),
        [phi0, dphi0],
        method="DOP853",
        rtol=tol,
        atol=tol,
        t_eval=np.sort(t_arr) if len(t_arr) > 1 else t_arr,
        dense_output=False,
    )
    if not res.success:
        raise RuntimeError(f"oracle integration failed: {res.message}")
    order = np.argsort(np.argsort(t_arr))
    phi = res.y[0][order]
    dphi = res.y[1][order]
    if np.isscalar(t):
        return float(phi[0]), float(dphi[0])
    return phi, dphi


def linear_mode(amplitude: float, length: float, x, t):
    """Standing mode A sin(2 pi x/L) cos(2 pi t/L) of the massless linear
    wave equation; the small-amplitude limit of the sine initial data."""
    if length <= 0:
        raise ValueError("length must be positive")
    k = 2.0 * np.pi / length
    return amplitude * np.sin(k * np.asarray(x, dtype=float)) * np.cos(k * t)
