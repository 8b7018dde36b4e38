import math

import numpy as np
import pytest

from phi4box.model import (
    GridSpec,
    PotentialParams,
    ZetaRow,
    exact_initial_energy,
    row_parity,
)
from phi4box.msilcc import (
    MsilccState,
    cell_average,
    cell_d0,
    cell_d1,
    cell_jacobian,
    cell_residual,
    dual_d0,
    dual_d1,
    initial_cell_residual,
    midpoint_step_mech,
    msilcc_init,
    msilcc_step,
    msilcc_tangent_step,
    solve_single_cell,
)
from phi4box.nlsolve import SolverSettings
from phi4box.reference import CnSolution, cn_value, linear_mode

SQRT2 = math.sqrt(2.0)


def test_cell_residual_zero_fields():
    p = PotentialParams(1.0, 1.0)
    r = cell_residual(np.zeros(4), np.zeros(4), np.zeros(4), np.zeros(4), +1, 0.3, p)
    assert np.all(r == 0.0)


def test_cell_residual_free_example():
    # lambda=r=0, Vt=0, delta=1, sigma=+1, knowns zero, u = (1,0,0,0):
    # the phi-update equation's residual is exactly 1
    p = PotentialParams(r=0.0, lam=0.0)
    u = np.array([1.0, 0.0, 0.0, 0.0])
    r = cell_residual(u, np.zeros(4), np.zeros(4), np.zeros(4), +1, 1.0, p)
    assert r[1] == pytest.approx(1.0)
    assert r[0] == 0.0 and r[3] == 0.0


def test_cell_jacobian_entries():
    p = PotentialParams(r=2.0, lam=0.0)
    delta = 0.5
    j = cell_jacobian(np.zeros(4), np.zeros(4), np.zeros(4), np.zeros(4), +1, delta, p)
    assert j[0, 0] == pytest.approx(SQRT2 * delta * p.r / 4.0)
    assert j[0, 1] == 1.0
    assert j[1, 0] == 1.0
    assert j[1, 1] == pytest.approx(-SQRT2 * delta / 4.0)


def test_cell_jacobian_against_finite_differences():
    rng = np.random.default_rng(11)
    p = PotentialParams(r=0.8, lam=1.7, r_tilde=0.3, lam_tilde=0.5)
    h = 1e-6
    for sigma in (-1, 1):
        u, b, s1, s2 = rng.normal(size=(4, 4))
        j = cell_jacobian(u, b, s1, s2, sigma, 0.37, p)
        fd = np.zeros((4, 4))
        for k in range(4):
            up = u.copy()
            up[k] += h
            um = u.copy()
            um[k] -= h
            fd[:, k] = (
                cell_residual(up, b, s1, s2, sigma, 0.37, p)
                - cell_residual(um, b, s1, s2, sigma, 0.37, p)
            ) / (2 * h)
        assert np.max(np.abs(j - fd)) < 1e-6


def test_cell_jacobian_small_delta_pairing():
    p = PotentialParams(1.0, 1.0)
    j = cell_jacobian(np.ones(4), np.ones(4), np.ones(4), np.ones(4), +1, 1e-12, p)
    pairing = np.array(
        [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=float
    )
    assert np.max(np.abs(j - pairing)) < 1e-10


def _step_state(grid, p, rng, scale=0.5):
    z_prev = ZetaRow.from_stack(scale * rng.normal(size=(grid.n_sites, 4)), 0)
    z_curr = ZetaRow.from_stack(scale * rng.normal(size=(grid.n_sites, 4)), 1)
    return MsilccState(z_prev, z_curr, grid, p, SolverSettings())


def test_step_zero_fixed_point():
    grid = GridSpec.lightcone(8, 1.0)
    state = MsilccState(ZetaRow.zeros(8, 0), ZetaRow.zeros(8, 1), grid, PotentialParams(), SolverSettings())
    nxt = msilcc_step(state)
    assert np.all(nxt.curr.stack() == 0.0)


def test_step_residual_at_root():
    rng = np.random.default_rng(12)
    grid = GridSpec.lightcone(16, 1.0)
    p = PotentialParams(1.0, 1.0)
    state = _step_state(grid, p, rng)
    nxt = msilcc_step(state)
    sigma = state.curr.parity
    s1 = state.curr.stack()
    s2 = np.roll(s1, -sigma, axis=0)
    for j in range(grid.n_sites):
        r = cell_residual(
            nxt.curr.stack()[j], state.prev.stack()[j], s1[j], s2[j], sigma, grid.delta, p
        )
        assert np.max(np.abs(r)) < 1e-12


def test_step_linear_case_one_shot():
    # lambda = r = 0: cells are linear; the solve is exact
    rng = np.random.default_rng(13)
    grid = GridSpec.lightcone(16, 1.0)
    p = PotentialParams(r=0.0, lam=0.0)
    state = _step_state(grid, p, rng)
    nxt = msilcc_step(state)
    assert nxt.lm_stats[1] <= 2
    sigma = state.curr.parity
    s1 = state.curr.stack()
    s2 = np.roll(s1, -sigma, axis=0)
    r = cell_residual(nxt.curr.stack()[3], state.prev.stack()[3], s1[3], s2[3], sigma, grid.delta, p)
    assert np.max(np.abs(r)) < 1e-14


def test_batched_step_matches_single_cell_solves():
    rng = np.random.default_rng(14)
    grid = GridSpec.lightcone(8, 1.0)
    p = PotentialParams(1.0, 1.0)
    state = _step_state(grid, p, rng)
    nxt = msilcc_step(state)
    sigma = state.curr.parity
    s1 = state.curr.stack()
    s2 = np.roll(s1, -sigma, axis=0)
    for j in range(grid.n_sites):
        u = solve_single_cell(state.prev.stack()[j], s1[j], s2[j], sigma, grid.delta, p)
        assert np.allclose(u, nxt.curr.stack()[j], atol=1e-12)


def test_init_rejects_aligned_grid():
    with pytest.raises(ValueError):
        msilcc_init(1.0, GridSpec.aligned(8, 1.0), PotentialParams())


def test_init_zero_amplitude():
    state = msilcc_init(0.0, GridSpec.lightcone(8, 1.0), PotentialParams())
    assert np.all(state.prev.stack() == 0.0)
    assert np.all(state.curr.stack() == 0.0)


def test_init_row0_contents():
    grid = GridSpec.lightcone(32, 1.5)
    p = PotentialParams(1.0, 1.0)
    state = msilcc_init(2.0, grid, p)
    x0 = grid.site_positions(0)
    k = 2 * np.pi / grid.length
    assert np.allclose(state.prev.phi, 2.0 * np.sin(k * x0))
    assert np.all(state.prev.gamma == 0.0)
    assert np.all(state.prev.psi0 == 0.0)  # dphi/dt = 0 and gamma = 0
    spacing = SQRT2 * grid.delta
    d1phi = (np.roll(state.prev.phi, -1) - np.roll(state.prev.phi, 1)) / (2 * spacing)
    assert np.allclose(state.prev.psi1, -d1phi)


def test_init_satisfies_modified_cells():
    grid = GridSpec.lightcone(16, 1.5)
    p = PotentialParams(1.0, 1.0)
    state = msilcc_init(1.0, grid, p)
    sigma = row_parity(0)
    s1 = state.prev.stack()
    s2 = np.roll(s1, -sigma, axis=0)
    for j in range(grid.n_sites):
        r = initial_cell_residual(state.curr.stack()[j], s1[j], s2[j], sigma, grid.delta, p)
        assert np.max(np.abs(r)) < 1e-12


def test_init_time_symmetry_of_first_row():
    # with psi0(0) = 0 the closure gives phi_1 = spatial midpoint average:
    # the discrete time derivative vanishes at t=0
    grid = GridSpec.lightcone(64, 1.5)
    p = PotentialParams(1.0, 1.0)
    state = msilcc_init(1.0, grid, p)
    sigma = row_parity(0)
    spatial_avg = 0.5 * (state.prev.phi + np.roll(state.prev.phi, -sigma))
    assert np.max(np.abs(state.curr.phi - spatial_avg)) < 1e-12


def test_init_first_energy_near_exact():
    from phi4box.diagnostics import msilcc_charges

    p = PotentialParams(r=1.0, lam=0.0)
    offsets = []
    for n in (32, 64):
        grid = GridSpec.lightcone(n, 1.5)
        state = msilcc_init(1.0, grid, p)
        nxt = msilcc_step(state)
        q0, _ = msilcc_charges(state.prev, state.curr, nxt.curr, grid.delta, p)
        offsets.append(abs(q0 - exact_initial_energy(1.0, grid.length, p)))
    assert offsets[0] / offsets[1] > 3.0


def test_linear_regime_tracks_eigenmode():
    amp, length, n = 1e-3, 1.5, 64
    p = PotentialParams(r=0.0, lam=1.0)
    grid = GridSpec.lightcone(n, length)
    state = msilcc_init(amp, grid, p)
    worst = 0.0
    while state.curr.time_index < 2 * n:
        state = msilcc_step(state)
        t = state.curr.time_index * grid.time_step
        x = grid.site_positions(state.curr.time_index)
        err = np.max(np.abs(state.curr.phi - linear_mode(amp, length, x, t)))
        worst = max(worst, err)
    assert worst < 0.01 * amp


def test_massless_mode_followed_to_rounding():
    # the box scheme on the light-cone lattice propagates the massless
    # standing mode exactly (characteristics align with the lattice)
    p = PotentialParams(r=0.0, lam=0.0)
    grid = GridSpec.lightcone(32, 1.0)
    state = msilcc_init(1.0, grid, p)
    while state.curr.time_index < 32:
        state = msilcc_step(state)
    t = state.curr.time_index * grid.time_step
    x = grid.site_positions(state.curr.time_index)
    assert np.max(np.abs(state.curr.phi - linear_mode(1.0, 1.0, x, t))) < 1e-12


def test_eigenmode_convergence_second_order():
    # lambda = 0, r = 1: the standing mode acquires the massive dispersion
    # omega = sqrt(k^2 + r); the max error over t <= L/2 falls as delta^2
    p = PotentialParams(r=1.0, lam=0.0)
    length = 1.0
    k = 2 * np.pi / length
    omega = math.sqrt(k * k + p.r)
    errs = []
    for n in (32, 64):
        grid = GridSpec.lightcone(n, length)
        state = msilcc_init(1.0, grid, p)
        worst = 0.0
        while state.curr.time_index < n:
            state = msilcc_step(state)
            t = state.curr.time_index * grid.time_step
            x = grid.site_positions(state.curr.time_index)
            exact = np.sin(k * x) * math.cos(omega * t)
            worst = max(worst, np.max(np.abs(state.curr.phi - exact)))
        errs.append(worst)
    assert 3.5 < errs[0] / errs[1] < 4.5


# --- 0+1 midpoint ------------------------------------------------------------


def test_midpoint_fixed_point():
    q, p_mom = midpoint_step_mech(0.0, 0.0, 0.1, PotentialParams(1.0, 1.0))
    assert q == 0.0 and p_mom == 0.0


def test_midpoint_harmonic_energy_exact():
    pot = PotentialParams(r=1.0, lam=0.0)
    q, p_mom = 1.0, 0.0
    e0 = 0.5 * (q * q + p_mom * p_mom)
    for _ in range(200):
        q, p_mom = midpoint_step_mech(q, p_mom, 0.1, pot)
        assert 0.5 * (q * q + p_mom * p_mom) == pytest.approx(e0, abs=1e-13)


def _bisection_midpoint_oracle(q, p_mom, delta, pot):
    # monotone scalar equation for p': p' - p + delta V'(q + delta (p'+p)/4) = 0
    def f(p_new):
        qbar = q + delta * (p_new + p_mom) / 4.0
        return p_new - p_mom + delta * pot.dv(qbar)

    lo, hi = p_mom - 10.0, p_mom + 10.0
    assert f(lo) * f(hi) < 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    p_new = 0.5 * (lo + hi)
    return q + delta * (p_new + p_mom) / 2.0, p_new


def test_midpoint_against_bisection_oracle():
    pot = PotentialParams(1.0, 1.0)
    got = midpoint_step_mech(1.0, 0.0, 0.1, pot)
    want = _bisection_midpoint_oracle(1.0, 0.0, 0.1, pot)
    assert got[0] == pytest.approx(want[0], abs=1e-10)
    assert got[1] == pytest.approx(want[1], abs=1e-10)


def test_midpoint_second_order_against_cn():
    pot = PotentialParams(1.0, 1.0)
    sol = CnSolution(1.0, pot)
    errs = []
    for steps in (128, 256):
        dt = sol.period / steps
        q, p_mom = 1.0, 0.0
        worst = 0.0
        for i in range(steps):
            q, p_mom = midpoint_step_mech(q, p_mom, dt, pot)
            worst = max(worst, abs(q - cn_value(sol, (i + 1) * dt)))
        errs.append(worst)
    assert 3.5 < errs[0] / errs[1] < 4.5


# --- lattice calculus and multi-symplecticity --------------------------------


def _random_rows(rng, n, count):
    return [rng.normal(size=n) for _ in range(count)]


def test_cross_derivative_identity():
    rng = np.random.default_rng(21)
    n = 16
    delta = 0.3
    rows = _random_rows(rng, n, 5)
    for mid_parity_row in (2,):
        sigma = row_parity(mid_parity_row)
        # first derivatives live on the three dual rows around the middle row
        d0_below = cell_d0(rows[0], rows[1], rows[2], -sigma, delta)
        d0_here = cell_d0(rows[1], rows[2], rows[3], sigma, delta)
        d0_above = cell_d0(rows[2], rows[3], rows[4], -sigma, delta)
        d1_below = cell_d1(rows[0], rows[1], rows[2], -sigma, delta)
        d1_here = cell_d1(rows[1], rows[2], rows[3], sigma, delta)
        d1_above = cell_d1(rows[2], rows[3], rows[4], -sigma, delta)
        d1d0 = dual_d1(d0_below, d0_here, d0_above, sigma, delta)
        d0d1 = dual_d0(d1_below, d1_here, d1_above, sigma, delta)
        assert np.max(np.abs(d1d0 - d0d1)) < 1e-13


def test_quadratic_leibniz_rule():
    rng = np.random.default_rng(22)
    n = 16
    delta = 0.45
    f_rows = _random_rows(rng, n, 3)
    g_rows = _random_rows(rng, n, 3)
    for sigma in (-1, 1):
        for d in (cell_d0, cell_d1):
            favg = cell_average(*f_rows, sigma)
            gavg = cell_average(*g_rows, sigma)
            df = d(*f_rows, sigma, delta)
            dg = d(*g_rows, sigma, delta)
            # derivative of the quadratic form via edge-midpoint products
            if d is cell_d0:
                from phi4box.msilcc import cell_corner_arrays

                fb, fl, fr, fu = cell_corner_arrays(*f_rows, sigma)
                gb, gl, gr, gu = cell_corner_arrays(*g_rows, sigma)
                lhs = (0.5 * (fl + fu) * 0.5 * (gl + gu) - 0.5 * (fb + fr) * 0.5 * (gb + gr)) / delta
            else:
                from phi4box.msilcc import cell_corner_arrays

                fb, fl, fr, fu = cell_corner_arrays(*f_rows, sigma)
                gb, gl, gr, gu = cell_corner_arrays(*g_rows, sigma)
                lhs = (0.5 * (fr + fu) * 0.5 * (gr + gu) - 0.5 * (fb + fl) * 0.5 * (gb + gl)) / delta
            rhs = favg * dg + gavg * df
            assert np.max(np.abs(lhs - rhs)) < 1e-13


def test_discrete_multisymplectic_conservation():
    # two independent tangent perturbations propagated through the linearized
    # scheme leave the discrete light-cone divergence of the symplectic flux
    # at rounding level in every cell
    from phi4box.model import lightcone_matrices_1p1

    rng = np.random.default_rng(23)
    grid = GridSpec.lightcone(16, 1.5)
    p = PotentialParams(1.0, 1.0)
    state = msilcc_init(1.0, grid, p)
    u_rows = [rng.normal(size=(16, 4)), rng.normal(size=(16, 4))]
    v_rows = [rng.normal(size=(16, 4)), rng.normal(size=(16, 4))]
    m0c, m1c = lightcone_matrices_1p1()

    def w(m, a, b):
        return np.einsum("ab,nb,na->n", m, a, b)

    for _ in range(12):
        nxt = msilcc_step(state)
        du = msilcc_tangent_step(state, u_rows[-2], u_rows[-1], nxt.curr)
        dv = msilcc_tangent_step(state, v_rows[-2], v_rows[-1], nxt.curr)
        u_rows.append(du)
        v_rows.append(dv)
        sigma = state.curr.parity
        up, uc, un = u_rows[-3], u_rows[-2], u_rows[-1]
        vp, vc, vn = v_rows[-3], v_rows[-2], v_rows[-1]
        defect = np.zeros(16)
        for m, d in ((m0c, cell_d0), (m1c, cell_d1)):
            du_cell = d(up, uc, un, sigma, grid.delta)
            dv_cell = d(vp, vc, vn, sigma, grid.delta)
            u_avg = cell_average(up, uc, un, sigma)
            v_avg = cell_average(vp, vc, vn, sigma)
            defect += w(m, du_cell, v_avg) + w(m, u_avg, dv_cell)
        scale = max(1.0, np.max(np.abs(u_rows[-1])), np.max(np.abs(v_rows[-1])))
        assert np.max(np.abs(defect)) < 1e-10 * scale
        state = nxt


def test_tangent_step_matches_finite_difference():
    rng = np.random.default_rng(24)
    grid = GridSpec.lightcone(8, 1.0)
    p = PotentialParams(1.0, 1.0)
    state = _step_state(grid, p, rng, scale=0.3)
    du_prev = rng.normal(size=(8, 4))
    du_curr = rng.normal(size=(8, 4))
    tangent = msilcc_tangent_step(state, du_prev, du_curr)
    eps = 1e-6
    tight = SolverSettings(tol_residual=1e-14)
    plus = MsilccState(
        ZetaRow.from_stack(state.prev.stack() + eps * du_prev, 0),
        ZetaRow.from_stack(state.curr.stack() + eps * du_curr, 1),
        grid,
        p,
        tight,
    )
    minus = MsilccState(
        ZetaRow.from_stack(state.prev.stack() - eps * du_prev, 0),
        ZetaRow.from_stack(state.curr.stack() - eps * du_curr, 1),
        grid,
        p,
        tight,
    )
    fd = (msilcc_step(plus).curr.stack() - msilcc_step(minus).curr.stack()) / (2 * eps)
    assert np.max(np.abs(tangent - fd)) < 1e-6
