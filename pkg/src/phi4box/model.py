"""Continuum model shared by all schemes.

The dynamic field phi(x, t) obeys the nonlinear wave equation

    box phi = d0^2 phi - d1^2 phi = -V'(phi),   V(phi) = r/2 phi^2 + lambda/4 phi^4,

on a periodic interval of length L, in c = 1 units.  The covariant
four-field formulation adds a spectator field gamma (with its own,
freely chosen potential Vt) and the two conjugate momenta psi0, psi1,
assembled into the state vector zeta = (phi, psi0, psi1, gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PotentialParams:
    """Coefficients of V(phi) = r/2 phi^2 + lambda/4 phi^4 and of the
    spectator potential Vt(gamma) = r_tilde/2 gamma^2 + lambda_tilde/4 gamma^4.

    lambda (and lambda_tilde) must be >= 0 so the potential is bounded
    below; r may be negative (double well with minima at +-sqrt(-r)).
    """

    r: float = 1.0
    lam: float = 1.0
    r_tilde: float = 0.0
    lam_tilde: float = 0.0

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError(f"quartic coefficient lambda must be >= 0, got {self.lam}")
        if self.lam_tilde < 0.0:
            raise ValueError(f"lambda_tilde must be >= 0, got {self.lam_tilde}")

    def v(self, phi):
        return 0.5 * self.r * phi**2 + 0.25 * self.lam * phi**4

    def dv(self, phi):
        return self.r * phi + self.lam * phi**3

    def d2v(self, phi):
        return self.r + 3.0 * self.lam * phi**2

    def vt(self, gamma):
        return 0.5 * self.r_tilde * gamma**2 + 0.25 * self.lam_tilde * gamma**4

    def dvt(self, gamma):
        return self.r_tilde * gamma + self.lam_tilde * gamma**3

    def d2vt(self, gamma):
        return self.r_tilde + 3.0 * self.lam_tilde * gamma**2


def potential_value(phi, p: PotentialParams):
    """V(phi) = r/2 phi^2 + lambda/4 phi^4."""
    return p.v(phi)


def potential_deriv(phi, p: PotentialParams):
    """V'(phi) = r phi + lambda phi^3."""
    return p.dv(phi)


ALIGNED = "aligned"
LIGHTCONE = "lightcone"


@dataclass(frozen=True)
class GridSpec:
    """Lattice family and geometry.

    aligned:   square lattice of width delta aligned with (x, t), N delta = L.
    lightcone: square lattice of width delta aligned with the light-cone
               directions; a spatial period holds N squares, L = sqrt(2) N delta.
               The staggered rows only close periodically for even N.
    """

    family: str
    n_sites: int
    delta: float
    length: float

    def __post_init__(self):
        if self.family not in (ALIGNED, LIGHTCONE):
            raise ValueError(f"unknown lattice family {self.family!r}")
        if self.n_sites < 4:
            raise ValueError("need at least 4 sites")
        if self.delta <= 0.0 or self.length <= 0.0:
            raise ValueError("delta and length must be positive")
        if self.family == ALIGNED:
            expected = self.n_sites * self.delta
        else:
            if self.n_sites % 2:
                raise ValueError("lightcone lattice needs an even number of sites")
            expected = SQRT2 * self.n_sites * self.delta
        if not math.isclose(expected, self.length, rel_tol=1e-12):
            raise ValueError(
                f"inconsistent {self.family} grid: N*delta relation gives {expected}, length is {self.length}"
            )

    @classmethod
    def aligned(cls, n_sites: int, length: float) -> "GridSpec":
        return cls(ALIGNED, n_sites, length / n_sites, length)

    @classmethod
    def lightcone(cls, n_sites: int, length: float) -> "GridSpec":
        return cls(LIGHTCONE, n_sites, length / (SQRT2 * n_sites), length)

    @property
    def time_step(self) -> float:
        """Row-to-row time spacing: delta (aligned) or delta/sqrt(2) (lightcone)."""
        return self.delta if self.family == ALIGNED else self.delta / SQRT2

    def site_positions(self, time_index: int = 0) -> np.ndarray:
        """x positions of the sites in row `time_index`.

        Aligned rows all sit at x = j delta.  Lightcone rows alternate:
        even rows at sqrt(2) delta j, odd rows shifted by -sqrt(2) delta / 2
        so that the (j, j+sigma_n) stencils close geometrically.
        """
        j = np.arange(self.n_sites, dtype=float)
        if self.family == ALIGNED:
            return j * self.delta
        offset = -(1 + row_parity(time_index)) / 4.0
        return SQRT2 * self.delta * (j + offset)


def row_parity(time_index: int) -> int:
    """sigma_n = 2 (n mod 2) - 1, the alternating offset of staggered rows."""
    return 2 * (time_index % 2) - 1


@dataclass
class ScalarRows:
    """Two consecutive time-rows of a scalar field sampling (the moving
    stencil state of the explicit schemes)."""

    prev: np.ndarray
    curr: np.ndarray
    time_index: int

    def __post_init__(self):
        self.prev = np.asarray(self.prev, dtype=float)
        self.curr = np.asarray(self.curr, dtype=float)
        if self.prev.shape != self.curr.shape or self.prev.ndim != 1:
            raise ValueError("rows must be 1-d arrays of equal length")

    @property
    def parity(self) -> int:
        return row_parity(self.time_index)


PHI, PSI0, PSI1, GAMMA = 0, 1, 2, 3
FIELD_NAMES = ("phi", "psi0", "psi1", "gamma")


@dataclass
class ZetaRow:
    """One time-row of the four-field state zeta = (phi, psi0, psi1, gamma)."""

    phi: np.ndarray
    psi0: np.ndarray
    psi1: np.ndarray
    gamma: np.ndarray
    time_index: int

    def __post_init__(self):
        arrays = []
        for name in FIELD_NAMES:
            a = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, a)
            arrays.append(a)
        n = arrays[0].shape
        if any(a.shape != n or a.ndim != 1 for a in arrays):
            raise ValueError("all four field rows must be 1-d arrays of the same length")

    @property
    def parity(self) -> int:
        return row_parity(self.time_index)

    def stack(self) -> np.ndarray:
        """(N, 4) view-copy in (phi, psi0, psi1, gamma) order."""
        return np.stack([self.phi, self.psi0, self.psi1, self.gamma], axis=1)

    @classmethod
    def from_stack(cls, z: np.ndarray, time_index: int) -> "ZetaRow":
        return cls(z[:, PHI], z[:, PSI0], z[:, PSI1], z[:, GAMMA], time_index)

    @classmethod
    def zeros(cls, n_sites: int, time_index: int) -> "ZetaRow":
        return cls.from_stack(np.zeros((n_sites, 4)), time_index)


def initial_condition_sine(amplitude: float, length: float, x):
    """Periodic initial data phi(x,0) = A sin(2 pi x / L), d0 phi(x,0) = 0."""
    if length <= 0:
        raise ValueError("length must be positive")
    phi = amplitude * np.sin(2.0 * np.pi * np.asarray(x, dtype=float) / length)
    return phi, np.zeros_like(phi)


def exact_initial_energy(amplitude: float, length: float, p: PotentialParams) -> float:
    """Total energy of the sine initial data.

    Closed form of int_0^L [ (d1 phi)^2/2 + V(phi) ] dx at t=0:
    A^2 pi^2 / L + r A^2 L / 4 + 3 lambda A^4 L / 32.
    """
    a2 = amplitude * amplitude
    return a2 * np.pi**2 / length + p.r * a2 * length / 4.0 + 3.0 * p.lam * a2 * a2 * length / 32.0


@dataclass(frozen=True)
class InitialData:
    """Initial profile with the derivatives the bootstraps need."""

    value: callable
    time_deriv: callable
    second_space_deriv: callable


def sine_initial_data(amplitude: float, length: float) -> InitialData:
    k = 2.0 * np.pi / length
    return InitialData(
        value=lambda x: amplitude * np.sin(k * np.asarray(x, dtype=float)),
        time_deriv=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        second_space_deriv=lambda x: -(k * k) * amplitude * np.sin(k * np.asarray(x, dtype=float)),
    )


def homogeneous_initial_data(amplitude: float) -> InitialData:
    """Spatially constant initial state phi = A, phidot = 0 (the homogeneous
    elliptic oscillation of the reference module starts here)."""
    return InitialData(
        value=lambda x: np.full_like(np.asarray(x, dtype=float), float(amplitude)),
        time_deriv=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        second_space_deriv=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    )


def lightcone_map(x0, x1):
    """Map (x^0, x^1) to the light-cone coordinates
    xc0 = (x^0 - x^1)/sqrt(2), xc1 = sqrt(2) x^1 + xc0 = (x^0 + x^1)/sqrt(2)."""
    xc0 = (x0 - x1) / SQRT2
    return xc0, SQRT2 * x1 + xc0


def lightcone_map_inverse(xc0, xc1):
    return (xc0 + xc1) / SQRT2, (xc1 - xc0) / SQRT2


def dwh_matrices_1p1():
    """The 4x4 skew matrices M0, M1 of the non-degenerate 1+1 formulation,
    acting on zeta = (phi, psi0, psi1, gamma). Eigenvalues of each: {i, i, -i, -i}."""
    m0 = np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0, 0.0],
        ]
    )
    m1 = np.array(
        [
            [0.0, 0.0, -1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
        ]
    )
    return m0, m1


def lightcone_matrices_1p1():
    """M0c = (M0 - M1)/sqrt(2), M1c = (M0 + M1)/sqrt(2): the skew matrices of
    the abstract equation rewritten in the light-cone basis."""
    m0, m1 = dwh_matrices_1p1()
    return (m0 - m1) / SQRT2, (m0 + m1) / SQRT2


def hamiltonian_density(z: np.ndarray, p: PotentialParams):
    """H(zeta) = psi0^2/2 - psi1^2/2 + V(phi) + Vt(gamma), zeta stacked (..., 4)."""
    return (
        0.5 * z[..., PSI0] ** 2
        - 0.5 * z[..., PSI1] ** 2
        + p.v(z[..., PHI])
        + p.vt(z[..., GAMMA])
    )


def hamiltonian_gradient(z: np.ndarray, p: PotentialParams) -> np.ndarray:
    """grad H = (V'(phi), psi0, -psi1, Vt'(gamma))."""
    g = np.empty_like(z)
    g[..., PHI] = p.dv(z[..., PHI])
    g[..., PSI0] = z[..., PSI0]
    g[..., PSI1] = -z[..., PSI1]
    g[..., GAMMA] = p.dvt(z[..., GAMMA])
    return g


def continuum_residual(phi, d2_dt, d2_dx, p: PotentialParams):
    """Defect of the equation of motion, d0^2 phi - d1^2 phi + V'(phi), from
    caller-supplied derivative estimates."""
    return d2_dt - d2_dx + p.dv(phi)
