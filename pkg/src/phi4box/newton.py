"""Explicit leapfrog-type integrator on the aligned square lattice.

Forward/backward difference rules
    D0+- phi_n^j = +-(phi_{n+-1}^j - phi_n^j)/delta,
    D1+- phi_n^j = +-(phi_n^{j+-1} - phi_n^j)/delta,
give the discrete equation of motion (D-D+ in both directions)

    (phi_{n+1} - 2 phi_n + phi_{n-1})/delta^2
      - (phi^{j+1} - 2 phi^j + phi^{j-1})/delta^2 = -V'(phi_n^j),

solved explicitly for phi_{n+1}^j.  Unconditionally cheap, second order,
and unstable for strong nonlinearity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ALIGNED, GridSpec, InitialData, PotentialParams, ScalarRows, sine_initial_data

DEFAULT_OVERFLOW_BOUND = 1e6


class DivergenceError(RuntimeError):
    def __init__(self, time_index, max_abs):
        super().__init__(f"field overflow at time row {time_index}: max |phi| = {max_abs:.3e}")
        self.time_index = time_index
        self.max_abs = max_abs


@dataclass
class NewtonState:
    rows: ScalarRows
    grid: GridSpec
    p: PotentialParams

    def __post_init__(self):
        if self.grid.family != ALIGNED:
            raise ValueError("the explicit scheme runs on the aligned lattice")
        if len(self.rows.curr) != self.grid.n_sites:
            raise ValueError("row length does not match the grid")


def d_plus(row, j, delta):
    """Forward difference (row[j+1] - row[j])/delta with periodic wrap."""
    row = np.asarray(row, dtype=float)
    return (row[(j + 1) % len(row)] - row[j]) / delta


def d_minus(row, j, delta):
    """Backward difference (row[j] - row[j-1])/delta with periodic wrap."""
    row = np.asarray(row, dtype=float)
    return (row[j] - row[(j - 1) % len(row)]) / delta


def d_plus_time(prev_row, curr_row, next_row, j, delta, sign):
    """One-sided time difference at the middle row: +-(phi_{n+-1} - phi_n)/delta."""
    other = next_row if sign > 0 else prev_row
    return sign * (other[j] - curr_row[j]) / delta


def laplacian(row, delta):
    """Periodic D1+ D1- second difference."""
    return (np.roll(row, -1) - 2.0 * row + np.roll(row, 1)) / (delta * delta)


def newton_init(
    amplitude: float,
    grid: GridSpec,
    p: PotentialParams,
    data: InitialData | None = None,
) -> NewtonState:
    """Rows 0 and 1 from the initial data.

    Row 1 is the second-order Taylor bootstrap
    phi_1 = phi_0 + delta * d0 phi(x, 0) + delta^2/2 (D1+ D1- phi_0 - V'(phi_0)),
    which keeps the leapfrog core at O(delta^2) global accuracy.
    """
    if grid.family != ALIGNED:
        raise ValueError("the explicit scheme runs on the aligned lattice")
    if data is None:
        data = sine_initial_data(amplitude, grid.length)
    x = grid.site_positions()
    row0 = np.asarray(data.value(x), dtype=float)
    row1 = (
        row0
        + grid.delta * np.asarray(data.time_deriv(x), dtype=float)
        + 0.5 * grid.delta**2 * (laplacian(row0, grid.delta) - p.dv(row0))
    )
    return NewtonState(ScalarRows(row0, row1, time_index=1), grid, p)


def newton_step(state: NewtonState, overflow_bound: float = DEFAULT_OVERFLOW_BOUND) -> NewtonState:
    """One explicit row advance:
    phi_{n+1}^j = -phi_{n-1}^j + phi_n^{j+1} + phi_n^{j-1} - delta^2 V'(phi_n^j)."""
    prev, curr = state.rows.prev, state.rows.curr
    with np.errstate(over="ignore", invalid="ignore"):
        nxt = -prev + np.roll(curr, -1) + np.roll(curr, 1) - state.grid.delta**2 * state.p.dv(curr)
        max_abs = float(np.max(np.abs(nxt)))
    if not np.isfinite(max_abs) or max_abs > overflow_bound:
        raise DivergenceError(state.rows.time_index + 1, max_abs)
    return NewtonState(ScalarRows(curr, nxt, state.rows.time_index + 1), state.grid, state.p)


def discrete_eom_residual(prev, curr, nxt, delta, p: PotentialParams):
    """Defect of the discrete equation of motion at the middle row."""
    d2t = (nxt - 2.0 * curr + prev) / (delta * delta)
    return d2t - laplacian(curr, delta) + p.dv(curr)
