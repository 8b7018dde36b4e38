"""Implicit centered-box scheme on the light-cone lattice (multi-symplectic).

The four-field state zeta = (phi, psi0, psi1, gamma) is advanced cell by
cell.  A cell couples the corners (n-1, j), (n, j), (n, j+sigma_n) and the
single unknown corner (n+1, j); writing Delta0 zeta = zeta_{n+1}^j -
zeta_{n-1}^j and Delta1 zeta = sigma_n (zeta_n^{j+sigma_n} - zeta_n^j),
the midpoint-rule concatenation of the abstract equation
M0c D0 zeta + M1c D1 zeta = grad H(<zeta>) reads

    M0 . Delta0 zeta + M1 . Delta1 zeta = sqrt(2) delta grad H(zbar),

with zbar the four-corner average.  Componentwise:

    Delta0 psi0 + Delta1 psi1 = -sqrt2 delta V'(phibar)
    Delta0 phi  + Delta1 gamma =  sqrt2 delta psi0bar
    Delta0 gamma + Delta1 phi  = -sqrt2 delta psi1bar
    Delta0 psi1 + Delta1 psi0 = -sqrt2 delta Vt'(gammabar)

Each cell is a 4x4 root problem in zeta_{n+1}^j, solved independently per
site (all sites at once through the batched Levenberg-Marquardt engine);
warm starts come from the previous row.  The same module carries the 0+1
midpoint special case and the tangent (linearized) propagation used by the
multi-symplecticity diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    GAMMA,
    LIGHTCONE,
    PHI,
    PSI0,
    PSI1,
    SQRT2,
    GridSpec,
    InitialData,
    PotentialParams,
    ZetaRow,
    sine_initial_data,
)
from .nlsolve import LmProblem, SolverSettings, lm_solve, lm_solve_batched
from .newton import DEFAULT_OVERFLOW_BOUND, DivergenceError


@dataclass
class CellUnknowns:
    """The four unknowns of one cell: zeta at the top corner (n+1, j)."""

    phi: float
    psi0: float
    psi1: float
    gamma: float

    def as_array(self) -> np.ndarray:
        values = np.array([self.phi, self.psi0, self.psi1, self.gamma], dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("cell unknowns must be finite")
        return values

    @classmethod
    def from_array(cls, u) -> "CellUnknowns":
        u = np.asarray(u, dtype=float)
        return cls(float(u[PHI]), float(u[PSI0]), float(u[PSI1]), float(u[GAMMA]))


@dataclass
class MsilccState:
    prev: ZetaRow
    curr: ZetaRow
    grid: GridSpec
    p: PotentialParams
    solver: SolverSettings

    def __post_init__(self):
        if self.grid.family != LIGHTCONE:
            raise ValueError("this scheme runs on the light-cone lattice")
        if len(self.curr.phi) != self.grid.n_sites:
            raise ValueError("row length does not match the grid")
        if self.curr.time_index != self.prev.time_index + 1:
            raise ValueError("rows must be consecutive")

    @property
    def lm_stats(self):
        return getattr(self, "_lm_stats", (0, 0))


def cell_residual(u, known_prev, known_curr, known_curr_s, sigma, delta, p: PotentialParams):
    """Residuals (left minus right side) of the four cell equations for one
    cell; u and the three knowns are 4-vectors in (phi, psi0, psi1, gamma)."""
    u = np.asarray(u, dtype=float)
    b = np.asarray(known_prev, dtype=float)
    s1 = np.asarray(known_curr, dtype=float)
    s2 = np.asarray(known_curr_s, dtype=float)
    avg = 0.25 * (u + b + s1 + s2)
    c = SQRT2 * delta
    return np.array(
        [
            (u[PSI0] - b[PSI0]) + sigma * (s2[PSI1] - s1[PSI1]) + c * p.dv(avg[PHI]),
            (u[PHI] - b[PHI]) + sigma * (s2[GAMMA] - s1[GAMMA]) - c * avg[PSI0],
            (u[GAMMA] - b[GAMMA]) + sigma * (s2[PHI] - s1[PHI]) + c * avg[PSI1],
            (u[PSI1] - b[PSI1]) + sigma * (s2[PSI0] - s1[PSI0]) + c * p.dvt(avg[GAMMA]),
        ]
    )


def cell_jacobian(u, known_prev, known_curr, known_curr_s, sigma, delta, p: PotentialParams):
    """d residual_i / d u_k; only the nonlinear averages couple beyond the
    pairing pattern, each with weight 1/4."""
    u = np.asarray(u, dtype=float)
    avg = 0.25 * (
        u
        + np.asarray(known_prev, dtype=float)
        + np.asarray(known_curr, dtype=float)
        + np.asarray(known_curr_s, dtype=float)
    )
    c = SQRT2 * delta
    j = np.zeros((4, 4))
    j[0, PHI] = 0.25 * c * p.d2v(avg[PHI])
    j[0, PSI0] = 1.0
    j[1, PHI] = 1.0
    j[1, PSI0] = -0.25 * c
    j[2, PSI1] = 0.25 * c
    j[2, GAMMA] = 1.0
    j[3, PSI1] = 1.0
    j[3, GAMMA] = 0.25 * c * p.d2vt(avg[GAMMA])
    return j


def _residual_batch(u, b, s1, s2, sigma, delta, p):
    """Vectorized cell_residual over all sites; arrays are (N, 4)."""
    avg = 0.25 * (u + b + s1 + s2)
    c = SQRT2 * delta
    r = np.empty_like(u)
    r[:, 0] = (u[:, PSI0] - b[:, PSI0]) + sigma * (s2[:, PSI1] - s1[:, PSI1]) + c * p.dv(avg[:, PHI])
    r[:, 1] = (u[:, PHI] - b[:, PHI]) + sigma * (s2[:, GAMMA] - s1[:, GAMMA]) - c * avg[:, PSI0]
    r[:, 2] = (u[:, GAMMA] - b[:, GAMMA]) + sigma * (s2[:, PHI] - s1[:, PHI]) + c * avg[:, PSI1]
    r[:, 3] = (u[:, PSI1] - b[:, PSI1]) + sigma * (s2[:, PSI0] - s1[:, PSI0]) + c * p.dvt(avg[:, GAMMA])
    return r


def _jacobian_batch(u, b, s1, s2, delta, p):
    avg = 0.25 * (u + b + s1 + s2)
    c = SQRT2 * delta
    n = u.shape[0]
    j = np.zeros((n, 4, 4))
    j[:, 0, PHI] = 0.25 * c * p.d2v(avg[:, PHI])
    j[:, 0, PSI0] = 1.0
    j[:, 1, PHI] = 1.0
    j[:, 1, PSI0] = -0.25 * c
    j[:, 2, PSI1] = 0.25 * c
    j[:, 2, GAMMA] = 1.0
    j[:, 3, PSI1] = 1.0
    j[:, 3, GAMMA] = 0.25 * c * p.d2vt(avg[:, GAMMA])
    return j


def _check_overflow(z, time_index, overflow_bound):
    max_abs = float(np.max(np.abs(z)))
    if not np.isfinite(max_abs) or max_abs > overflow_bound:
        raise DivergenceError(time_index, max_abs)


def _cell_tol_scale(b, s1, s2):
    # the cell equations scale with the field magnitudes; below O(1) the
    # absolute tolerance applies unchanged
    return np.maximum(
        1.0,
        np.maximum(
            np.max(np.abs(b), axis=1),
            np.maximum(np.max(np.abs(s1), axis=1), np.max(np.abs(s2), axis=1)),
        ),
    )


def msilcc_step(state: MsilccState, overflow_bound: float = DEFAULT_OVERFLOW_BOUND) -> MsilccState:
    """Advance one row: solve every cell's 4x4 system for zeta_{n+1}^j."""
    sigma = state.curr.parity
    delta = state.grid.delta
    b = state.prev.stack()
    s1 = state.curr.stack()
    s2 = np.roll(s1, -sigma, axis=0)

    def residual(u):
        return _residual_batch(u, b, s1, s2, sigma, delta, state.p)

    def jacobian(u):
        return _jacobian_batch(u, b, s1, s2, delta, state.p)

    u, total_iters, max_iters = lm_solve_batched(
        residual, jacobian, s1.copy(), state.solver, tol_scale=_cell_tol_scale(b, s1, s2)
    )
    _check_overflow(u, state.curr.time_index + 1, overflow_bound)
    nxt = ZetaRow.from_stack(u, state.curr.time_index + 1)
    out = MsilccState(state.curr, nxt, state.grid, state.p, state.solver)
    out._lm_stats = (total_iters, max_iters)
    return out


def solve_single_cell(known_prev, known_curr, known_curr_s, sigma, delta, p, solver=SolverSettings()):
    """Per-cell route through the scalar LM engine (cross-checks the batch)."""
    problem = LmProblem(
        dimension=4,
        residual=lambda u: cell_residual(u, known_prev, known_curr, known_curr_s, sigma, delta, p),
        jacobian=lambda u: cell_jacobian(u, known_prev, known_curr, known_curr_s, sigma, delta, p),
    )
    x, _, _ = lm_solve(problem, np.asarray(known_curr, dtype=float), solver)
    return x


def initial_cell_residual(u, s1, s2, sigma, delta, p: PotentialParams):
    """Initial-row closure: the unknown pair average (zeta_{-1} + zeta_{+1})/2
    is identified with the spatial average (zeta_0^j + zeta_0^{j+sigma})/2,
    eliminating row -1; the cell equations then become linear in zeta_{+1}."""
    u = np.asarray(u, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    b = s1 + s2 - u
    return cell_residual(u, b, s1, s2, sigma, delta, p)


def _initial_residual_batch(u, s1, s2, sigma, delta, p):
    return _residual_batch(u, s1 + s2 - u, s1, s2, sigma, delta, p)


def _initial_jacobian_batch(u, s1, s2, delta, p):
    # the cell averages are u-independent under the closure, so the Jacobian
    # is exactly twice the pairing pattern
    n = u.shape[0]
    j = np.zeros((n, 4, 4))
    j[:, 0, PSI0] = 2.0
    j[:, 1, PHI] = 2.0
    j[:, 2, GAMMA] = 2.0
    j[:, 3, PSI1] = 2.0
    return j


def midpoint_spatial_derivative(row, spacing):
    """Centered difference (f^{j+1} - f^{j-1}) / (2 spacing), periodic."""
    return (np.roll(row, -1) - np.roll(row, 1)) / (2.0 * spacing)


def msilcc_init(
    amplitude: float,
    grid: GridSpec,
    p: PotentialParams,
    solver: SolverSettings = SolverSettings(),
    data: InitialData | None = None,
) -> MsilccState:
    """Assemble row 0 and solve the modified initial cells for row 1.

    Row 0: phi from the initial profile, gamma = 0, and the momenta from
    their definitions psi0 = d0 phi + D1 gamma, psi1 = -d0 gamma - D1 phi
    with midpoint spatial differences on the sampled row.
    """
    if grid.family != LIGHTCONE:
        raise ValueError("this scheme runs on the light-cone lattice")
    if data is None:
        data = sine_initial_data(amplitude, grid.length)
    x0 = grid.site_positions(0)
    spacing = SQRT2 * grid.delta
    phi0 = np.asarray(data.value(x0), dtype=float)
    dphi0 = np.asarray(data.time_deriv(x0), dtype=float)
    gamma0 = np.zeros_like(phi0)
    psi0 = dphi0 + midpoint_spatial_derivative(gamma0, spacing)
    psi1 = -np.zeros_like(phi0) - midpoint_spatial_derivative(phi0, spacing)
    row0 = ZetaRow(phi0, psi0, psi1, gamma0, time_index=0)

    sigma = row0.parity
    s1 = row0.stack()
    s2 = np.roll(s1, -sigma, axis=0)

    def residual(u):
        return _initial_residual_batch(u, s1, s2, sigma, grid.delta, p)

    def jacobian(u):
        return _initial_jacobian_batch(u, s1, s2, grid.delta, p)

    u, total_iters, max_iters = lm_solve_batched(
        residual, jacobian, s1.copy(), solver, tol_scale=_cell_tol_scale(s1, s1, s2)
    )
    row1 = ZetaRow.from_stack(u, time_index=1)
    out = MsilccState(row0, row1, grid, p, solver)
    out._lm_stats = (total_iters, max_iters)
    return out


def msilcc_tangent_step(
    state: MsilccState,
    du_prev: np.ndarray,
    du_curr: np.ndarray,
    next_row: ZetaRow | None = None,
) -> np.ndarray:
    """Propagate a tangent perturbation through the linearized cell solves.

    du_prev, du_curr: (N, 4) perturbations of rows n-1 and n.  Returns the
    (N, 4) perturbation of the solved row n+1 (exact derivative of the
    implicit map, via one linear solve per cell against the cell Jacobian
    evaluated on the base trajectory).
    """
    sigma = state.curr.parity
    delta = state.grid.delta
    c = SQRT2 * delta
    b = state.prev.stack()
    s1 = state.curr.stack()
    s2 = np.roll(s1, -sigma, axis=0)
    if next_row is None:
        next_row = msilcc_step(state).curr
    u = next_row.stack()

    db = du_prev
    ds1 = du_curr
    ds2 = np.roll(du_curr, -sigma, axis=0)
    avg = 0.25 * (u + b + s1 + s2)
    hess = np.zeros((u.shape[0], 4, 4))
    hess[:, PHI, PHI] = state.p.d2v(avg[:, PHI])
    hess[:, PSI0, PSI0] = 1.0
    hess[:, PSI1, PSI1] = -1.0
    hess[:, GAMMA, GAMMA] = state.p.d2vt(avg[:, GAMMA])

    m0 = np.array([[0.0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]])
    m1 = np.array([[0.0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]])
    davg_known = 0.25 * (db + ds1 + ds2)
    rhs = (
        np.einsum("ab,nb->na", m0, db)
        - sigma * np.einsum("ab,nb->na", m1, ds2 - ds1)
        + c * np.einsum("nab,nb->na", hess, davg_known)
    )
    a = m0[None, :, :] - 0.25 * c * hess
    return np.linalg.solve(a, rhs[:, :, None])[:, :, 0]


def midpoint_step_mech(q: float, p_mom: float, delta: float, pot: PotentialParams, solver=SolverSettings(tol_residual=1e-13)):
    """One implicit midpoint step of the 0+1 oscillator:
    p_n - p_{n+1} = delta V'((q_{n+1}+q_n)/2),  q_{n+1} - q_n = delta (p_{n+1}+p_n)/2."""

    def residual(x):
        qm = 0.5 * (x[0] + q)
        return np.array(
            [
                x[1] - p_mom + delta * pot.dv(qm),
                x[0] - q - 0.5 * delta * (x[1] + p_mom),
            ]
        )

    def jacobian(x):
        qm = 0.5 * (x[0] + q)
        return np.array(
            [
                [0.5 * delta * pot.d2v(qm), 1.0],
                [1.0, -0.5 * delta],
            ]
        )

    problem = LmProblem(dimension=2, residual=residual, jacobian=jacobian)
    x, _, _ = lm_solve(problem, np.array([q, p_mom]), solver)
    return float(x[0]), float(x[1])


# --- lattice calculus on the light-cone grid -------------------------------
#
# Cells are labeled by their middle row n and the site j of the rows above
# and below: corners B = (n-1, j), U = (n+1, j), L/R the two middle-row
# sites (n, j) and (n, j+sigma_n) ordered left/right by position.  The cell
# centers form the dual lattice; dual row n carries the opposite parity.


def cell_corner_arrays(z_prev, z_curr, z_next, sigma):
    """(B, L, R, U) stacks for every cell of the middle row; z_* are (N, 4)
    or (N,) arrays and sigma is the middle row's parity."""
    s1 = z_curr
    s2 = np.roll(z_curr, -sigma, axis=0)
    left, right = (s1, s2) if sigma > 0 else (s2, s1)
    return z_prev, left, right, z_next


def cell_average(z_prev, z_curr, z_next, sigma):
    b, l, r, u = cell_corner_arrays(z_prev, z_curr, z_next, sigma)
    return 0.25 * (b + l + r + u)


def cell_d0(z_prev, z_curr, z_next, sigma, delta):
    """Edge-midpoint difference along the x0c (upper-left) direction."""
    b, l, r, u = cell_corner_arrays(z_prev, z_curr, z_next, sigma)
    return ((l + u) - (b + r)) / (2.0 * delta)


def cell_d1(z_prev, z_curr, z_next, sigma, delta):
    """Edge-midpoint difference along the x1c (upper-right) direction."""
    b, l, r, u = cell_corner_arrays(z_prev, z_curr, z_next, sigma)
    return ((r + u) - (b + l)) / (2.0 * delta)


def dual_corner_arrays(w_prev, w_curr, w_next, sigma):
    """(B, L, R, U) of the dual cells centered on the sites of a row with
    parity sigma; w_* are dual-row arrays indexed by cell label j."""
    right = np.roll(w_curr, -((1 - sigma) // 2), axis=0)
    left = np.roll(w_curr, (1 + sigma) // 2, axis=0)
    return w_prev, left, right, w_next


def dual_average(w_prev, w_curr, w_next, sigma):
    b, l, r, u = dual_corner_arrays(w_prev, w_curr, w_next, sigma)
    return 0.25 * (b + l + r + u)


def dual_d0(w_prev, w_curr, w_next, sigma, delta):
    b, l, r, u = dual_corner_arrays(w_prev, w_curr, w_next, sigma)
    return ((l + u) - (b + r)) / (2.0 * delta)


def dual_d1(w_prev, w_curr, w_next, sigma, delta):
    b, l, r, u = dual_corner_arrays(w_prev, w_curr, w_next, sigma)
    return ((r + u) - (b + l)) / (2.0 * delta)
