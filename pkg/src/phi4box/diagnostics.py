"""Discrete stress-energy tensors, conservation residuals, charges and the
dimensionless error metric for the three schemes.

Conventions shared by all schemes:
  - the '+' one-sided variants are the reported ones (the '-' family
    behaves the same and is available for tests);
  - charges are sequential left-to-right sums times the site spacing
    (delta aligned, sqrt(2) delta light-cone), bitwise reproducible;
  - the error metric divides the largest |residual| on the lattice by the
    largest |summand| entering the residual expression, making it
    dimensionless and comparable across schemes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    SQRT2,
    PotentialParams,
    ZetaRow,
    hamiltonian_density,
    lightcone_matrices_1p1,
)
from .msilcc import (
    cell_average,
    cell_corner_arrays,
    cell_d0,
    cell_d1,
    dual_corner_arrays,
)


def seqsum(values: np.ndarray) -> float:
    """Sequential left-to-right sum (fixed order, reproducible bitwise)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    return float(np.cumsum(values)[-1])


@dataclass(frozen=True)
class DeltaMetric:
    """max |residual| divided by the largest |summand| of its expression."""

    raw_residual: float
    scale: float
    value: float


def delta_normalize(residual_field, summand_fields) -> DeltaMetric:
    raw = float(np.max(np.abs(residual_field))) if np.size(residual_field) else 0.0
    scale = 0.0
    for s in summand_fields:
        if np.size(s):
            scale = max(scale, float(np.max(np.abs(s))))
    if scale == 0.0:
        return DeltaMetric(raw, 0.0, 0.0)
    return DeltaMetric(raw, scale, raw / scale)


@dataclass
class DiagnosticsRecord:
    """Per-time-row snapshot of the conservation diagnostics."""

    time: float
    t_over_length: float
    energy: float
    q0: float
    q1: float
    eps0_max: float
    eps1_max: float
    eps0_peak: float
    eps1_peak: float
    energy_plus: float | None = None
    energy_minus: float | None = None
    parity: int | None = None
    diverged: bool = False


# --- Newton (aligned lattice) ----------------------------------------------


def newton_stress_tensor(prev, curr, nxt, delta, p: PotentialParams, sign: int):
    """(T00, T01, T11) at the middle row from the one-sided rules D+- chosen
    by `sign`; T01 = -D0 phi D1 phi, the diagonal entries are the kinetic
    sum +- V(phi)."""
    other = nxt if sign > 0 else prev
    d0 = sign * (other - curr) / delta
    d1 = sign * (np.roll(curr, -sign) - curr) / delta
    kin = 0.5 * d0 * d0 + 0.5 * d1 * d1
    v = p.v(curr)
    return kin + v, -d0 * d1, kin - v


def newton_residual_terms(prev, curr, nxt, delta, p: PotentialParams):
    """The two divergence summands of each conservation law at the middle
    row, using the reported '+' tensor and the '-' rules on it.

    Returns ((a0, b0), (a1, b1)) with eps^mu = a_mu + b_mu.
    """
    t00_c, t01_c, t11_c = newton_stress_tensor(prev, curr, nxt, delta, p, +1)
    # T+ one row earlier only needs rows (prev, curr): D0+ runs prev -> curr
    t00_p, t01_p, t11_p = newton_stress_tensor(None, prev, curr, delta, p, +1)
    a0 = (t00_c - t00_p) / delta
    b0 = (t01_c - np.roll(t01_c, 1)) / delta
    a1 = (t01_c - t01_p) / delta
    b1 = (t11_c - np.roll(t11_c, 1)) / delta
    return (a0, b0), (a1, b1)


def newton_residuals(prev, curr, nxt, delta, p: PotentialParams):
    """eps0, eps1 fields at the middle row ('+' tensor variant)."""
    (a0, b0), (a1, b1) = newton_residual_terms(prev, curr, nxt, delta, p)
    return a0 + b0, a1 + b1


def newton_charges(prev, curr, nxt, delta, p: PotentialParams, sign: int = +1):
    t00, t01, _ = newton_stress_tensor(prev, curr, nxt, delta, p, sign)
    return delta * seqsum(t00), delta * seqsum(t01)


# --- BDdV (light-cone lattice) ----------------------------------------------


def _bddv_potential_part(curr, curr_s, other, p: PotentialParams):
    # generalized (r, lambda) form of -1/4 + (1/8)(1 + phi_{n+-1}^2)(2 + a^2 + b^2)
    ab = curr**2 + curr_s**2
    return p.r / 8.0 * ab + p.r / 4.0 * other**2 + p.lam / 8.0 * other**2 * ab


def bddv_stress_tensor(prev, curr, nxt, time_index, delta, p: PotentialParams, sign: int):
    """(T00, T01, T11) on the cells of row `time_index` (cell j sits between
    sites j and j+sigma) from the one-sided light-cone rules picked by `sign`."""
    from .bddv import bddv_lightcone_derivs

    sigma = 2 * (time_index % 2) - 1
    d0, d1 = bddv_lightcone_derivs(prev, curr, nxt, time_index, delta, sign)
    curr_s = np.roll(curr, -sigma)
    other = nxt if sign > 0 else prev
    kin = 0.5 * d0 * d0 + 0.5 * d1 * d1
    pot = _bddv_potential_part(curr, curr_s, other, p)
    return kin + pot, 0.5 * d0 * d0 - 0.5 * d1 * d1, kin - pot


def bddv_residual_terms(rows, time_index, delta, p: PotentialParams):
    """Divergence summands of both conservation laws at the sites of row
    `time_index`, from the '+' tensor on the two dual rows below.

    rows: the three field rows (n-1, n, n+1).  The '+' tensor at dual row
    n-1 uses rows (n-1, n); at dual row n it uses rows (n, n+1).
    """
    p_prev, p_curr, p_next = rows
    sigma = 2 * (time_index % 2) - 1
    t_here = bddv_stress_tensor(p_prev, p_curr, p_next, time_index, delta, p, +1)
    t_below = bddv_stress_tensor(None, p_prev, p_curr, time_index - 1, delta, p, +1)

    # tensor combinations entering the light-cone divergence
    f_minus_here = t_here[0] - t_here[1]  # T00 - T10
    f_plus_here = t_here[0] + t_here[1]  # T00 + T10
    f_minus_below = t_below[0] - t_below[1]
    f_plus_below = t_below[0] + t_below[1]
    g_minus_here = t_here[1] - t_here[2]  # T01 - T11
    g_plus_here = t_here[1] + t_here[2]
    g_minus_below = t_below[1] - t_below[2]
    g_plus_below = t_below[1] + t_below[2]

    def backward_d0(w_here, w_below):
        left = np.roll(w_here, (1 + sigma) // 2)
        return (left - w_below) / delta

    def backward_d1(w_here, w_below):
        right = np.roll(w_here, -((1 - sigma) // 2))
        return (right - w_below) / delta

    a0 = backward_d0(f_minus_here, f_minus_below) / SQRT2
    b0 = backward_d1(f_plus_here, f_plus_below) / SQRT2
    a1 = backward_d0(g_minus_here, g_minus_below) / SQRT2
    b1 = backward_d1(g_plus_here, g_plus_below) / SQRT2
    return (a0, b0), (a1, b1)


def bddv_residuals(rows, time_index, delta, p: PotentialParams):
    (a0, b0), (a1, b1) = bddv_residual_terms(rows, time_index, delta, p)
    return a0 + b0, a1 + b1


def bddv_charges(prev, curr, nxt, time_index, delta, p: PotentialParams, sign: int = +1):
    t00, t01, _ = bddv_stress_tensor(prev, curr, nxt, time_index, delta, p, sign)
    return SQRT2 * delta * seqsum(t00), SQRT2 * delta * seqsum(t01)


# --- MSILCC (light-cone lattice, four fields) --------------------------------


def _tensor_kernel(zbar, d0, d1, p: PotentialParams):
    """Light-cone tensor components from the dual-field arguments
    (cell average, two cell derivatives), each an (N, 4) array.

    The metric in these coordinates is off-diagonal, so the diagonal
    components carry no H term.
    """
    m0c, m1c = lightcone_matrices_1p1()

    def w(m, a, b):
        return np.einsum("ab,nb,na->n", m, a, b)

    h = hamiltonian_density(zbar, p)
    t00 = 0.5 * w(m0c, d1, zbar)
    t01 = -0.5 * w(m0c, d0, zbar) + h
    t10 = -0.5 * w(m1c, d1, zbar) + h
    t11 = 0.5 * w(m1c, d0, zbar)
    return t00, t01, t10, t11


def _dual_arguments(z_prev: ZetaRow, z_curr: ZetaRow, z_next: ZetaRow, delta):
    sigma = z_curr.parity
    zp, zc, zn = z_prev.stack(), z_curr.stack(), z_next.stack()
    d0 = cell_d0(zp, zc, zn, sigma, delta)
    d1 = cell_d1(zp, zc, zn, sigma, delta)
    zbar = cell_average(zp, zc, zn, sigma)
    return zbar, d0, d1


def msilcc_stress_tensor(z_prev: ZetaRow, z_curr: ZetaRow, z_next: ZetaRow, delta, p: PotentialParams):
    """Light-cone components (T00c, T01c, T10c, T11c) of the discrete
    stress-energy tensor on the cells of the middle row."""
    zbar, d0, d1 = _dual_arguments(z_prev, z_curr, z_next, delta)
    return _tensor_kernel(zbar, d0, d1, p)


def msilcc_cartesian_stress(z_prev, z_curr, z_next, delta, p: PotentialParams):
    """(T00, T01) in the original frame, from the tensor transformation of
    the light-cone components (Jacobian of the coordinate map)."""
    t00c, t01c, t10c, t11c = msilcc_stress_tensor(z_prev, z_curr, z_next, delta, p)
    t00 = 0.5 * (t00c + t01c + t10c + t11c)
    t01 = 0.5 * (-t00c + t01c - t10c + t11c)
    return t00, t01


def msilcc_charges(z_prev, z_curr, z_next, delta, p: PotentialParams):
    t00, t01 = msilcc_cartesian_stress(z_prev, z_curr, z_next, delta, p)
    return SQRT2 * delta * seqsum(t00), SQRT2 * delta * seqsum(t01)


def _quartic_defect_terms(avg_b, avg_l, avg_r, avg_u, delta, lam, corner_cubes=True):
    """Both branches of the conservation defect of one quartic field sector,
    from the four surrounding corner values (dual-cell averages for the
    exact defect, raw cell corners for the local estimator).

    The chain-rule term carries the corner average of the cubes; that is
    what the discrete tensor divergence works out to (re-deriving the
    defect against the direct-divergence route pins this down -- evaluating
    the cube at the averaged argument instead reproduces the divergence
    only through the quadratic sector).  corner_cubes=False selects the
    averaged-argument variant.

    Returns (plus_terms, minus_terms), each a 3-tuple of summand fields
    whose sum is the defect: the two flux evaluations and the chain term.
    """
    if corner_cubes:
        grad = 0.25 * (avg_b**3 + avg_l**3 + avg_r**3 + avg_u**3)
    else:
        grad = (0.25 * (avg_b + avg_l + avg_r + avg_u)) ** 3

    def branch(hi1, hi2, lo1, lo2):
        t_up = lam / (4.0 * delta) * (0.5 * (hi1 + hi2)) ** 4
        t_dn = -lam / (4.0 * delta) * (0.5 * (lo1 + lo2)) ** 4
        t_chain = -lam / (2.0 * delta) * (hi1 + hi2 - lo1 - lo2) * grad
        return t_up, t_dn, t_chain

    plus = branch(avg_u, avg_r, avg_b, avg_l)
    minus = branch(avg_u, avg_l, avg_b, avg_r)
    return plus, minus


def _dual_cell_averages(field_rows, sigma):
    """Averages of the four dual cells around the sites of the middle row,
    from five consecutive rows of one scalar field."""
    r_mm, r_m, r_0, r_p, r_pp = field_rows
    w_below = cell_average(r_mm, r_m, r_0, -sigma)
    w_here = cell_average(r_m, r_0, r_p, sigma)
    w_above = cell_average(r_0, r_p, r_pp, -sigma)
    return dual_corner_arrays(w_below, w_here, w_above, sigma)


def msilcc_residual_exact_terms(phi_rows, gamma_rows, time_index, delta, p: PotentialParams):
    """Summands of the exact conservation defect D_nu Tc^{mu nu} at the sites
    of the middle row (five rows needed).  Only the non-quadratic parts of
    the Hamiltonian contribute: the phi^4 term and, if enabled, gamma^4."""
    sigma = 2 * (time_index % 2) - 1
    avg_b, avg_l, avg_r, avg_u = _dual_cell_averages(phi_rows, sigma)
    plus, minus = _quartic_defect_terms(avg_b, avg_l, avg_r, avg_u, delta, p.lam)
    if p.lam_tilde != 0.0 and gamma_rows is not None:
        gb, gl, gr, gu = _dual_cell_averages(gamma_rows, sigma)
        gplus, gminus = _quartic_defect_terms(gb, gl, gr, gu, delta, p.lam_tilde)
        plus = plus + gplus
        minus = minus + gminus
    return plus, minus


def msilcc_residual_exact(phi_rows, gamma_rows, time_index, delta, p: PotentialParams):
    """(eps0, eps1) exact-defect fields at the sites of the middle row."""
    plus, minus = msilcc_residual_exact_terms(phi_rows, gamma_rows, time_index, delta, p)
    return sum(plus), sum(minus)


def msilcc_residual_estimator_terms(phi_rows, gamma_rows, time_index, delta, p: PotentialParams):
    """Summands of the local three-row estimator of the defect, on the cells
    of the middle row: same structure with the lowest-level averages removed."""
    sigma = 2 * (time_index % 2) - 1

    def per_field(rows, lam):
        r_m, r_0, r_p = rows
        b, l, r, u = cell_corner_arrays(r_m, r_0, r_p, sigma)
        return _quartic_defect_terms(b, l, r, u, delta, lam)

    plus, minus = per_field(phi_rows, p.lam)
    if p.lam_tilde != 0.0 and gamma_rows is not None:
        gplus, gminus = per_field(gamma_rows, p.lam_tilde)
        plus = plus + gplus
        minus = minus + gminus
    return plus, minus


def msilcc_residual_estimator(phi_rows, gamma_rows, time_index, delta, p: PotentialParams):
    plus, minus = msilcc_residual_estimator_terms(phi_rows, gamma_rows, time_index, delta, p)
    return sum(plus), sum(minus)


def msilcc_divergence_oracle(zeta_rows, delta, p: PotentialParams):
    """Direct discrete divergence D_nu Tc^{mu nu} at the sites of the middle
    row, from the dual-field arguments on the three surrounding dual rows.

    The derivative of a nonlinear function of the dual collection is its
    evaluation at edge-averaged arguments (the same rule the scheme itself
    is built from); on a trajectory this route agrees with the closed-form
    defect to rounding, independently of how the latter was derived.
    """
    z_mm, z_m, z_0, z_p, z_pp = zeta_rows
    sigma = z_0.parity

    args_below = _dual_arguments(z_mm, z_m, z_0, delta)
    args_here = _dual_arguments(z_m, z_0, z_p, delta)
    args_above = _dual_arguments(z_0, z_p, z_pp, delta)

    corners = [
        dual_corner_arrays(b, h, a, sigma) for b, h, a in zip(args_below, args_here, args_above)
    ]  # per dual-field kind: (B, L, R, U) arrays

    def edge(i, j):
        # average of two dual corners for every argument kind
        return [0.5 * (c[i] + c[j]) for c in corners]

    b_, l_, r_, u_ = 0, 1, 2, 3
    t_plus0 = _tensor_kernel(*edge(l_, u_), p)  # + edge of the D0 direction
    t_minus0 = _tensor_kernel(*edge(b_, r_), p)
    t_plus1 = _tensor_kernel(*edge(r_, u_), p)  # + edge of the D1 direction
    t_minus1 = _tensor_kernel(*edge(b_, l_), p)

    def div(idx_0, idx_1):
        return (t_plus0[idx_0] - t_minus0[idx_0] + t_plus1[idx_1] - t_minus1[idx_1]) / delta

    eps_mu0 = div(0, 1)  # D0 T^{00} + D1 T^{01}
    eps_mu1 = div(2, 3)  # D0 T^{10} + D1 T^{11}
    return eps_mu0, eps_mu1
