"""Small dense nonlinear root solves via damped Gauss-Newton / Levenberg-Marquardt.

The systems here are square and tiny (2x2 mechanical midpoint cells, 4x4
field cells), with near-identity Jacobians, so the undamped Gauss-Newton
step is tried first; damping engages multiplicatively only after a
rejected step (x10 per rejection, /10 per acceptance).

Two entry points: `lm_solve` for one problem (pure Python, partial-pivot
elimination), and `lm_solve_batched` for many independent problems at
once (vectorized over the leading axis, same algorithm).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

MU_ESCALATION_LIMIT = 1e12


@dataclass(frozen=True)
class SolverSettings:
    tol_residual: float = 1e-12
    max_iter: int = 50
    lm_damping_init: float = 1e-3

    def __post_init__(self):
        if self.tol_residual <= 0.0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class LmProblem:
    """Square residual system: residual and jacobian map n reals -> n reals / n x n."""

    dimension: int
    residual: Callable
    jacobian: Callable


class SingularNormalEquations(RuntimeError):
    pass


class MaxIterationsError(RuntimeError):
    def __init__(self, x, norm, iterations):
        super().__init__(
            f"no convergence after {iterations} iterations, residual inf-norm {norm:.3e}"
        )
        self.best_x = x
        self.best_norm = norm
        self.iterations = iterations


def _solve_dense(a, b):
    """Partial-pivot Gaussian elimination for the (<= 4x4) normal equations."""
    n = len(b)
    m = [list(a[i]) + [b[i]] for i in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda i: abs(m[i][col]))
        if abs(m[piv][col]) < 1e-300:
            raise SingularNormalEquations("pivot vanished in normal equations")
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
        inv = 1.0 / m[col][col]
        for i in range(col + 1, n):
            f = m[i][col] * inv
            if f != 0.0:
                for k in range(col, n + 1):
                    m[i][k] -= f * m[col][k]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        s = m[i][n] - sum(m[i][k] * x[k] for k in range(i + 1, n))
        x[i] = s / m[i][i]
    return x


def lm_solve(problem: LmProblem, x0, settings: SolverSettings = SolverSettings()):
    """Drive ||residual||_inf below tol_residual from x0.

    Returns (x, iterations, final_norm).  Raises MaxIterationsError with the
    best iterate attached, or SingularNormalEquations if the damped normal
    matrix cannot be factored.
    """
    x = np.array(x0, dtype=float).reshape(problem.dimension)
    mu = 0.0
    iterations = 0
    r = np.asarray(problem.residual(x), dtype=float)
    norm2 = float(r @ r)
    for iterations in range(1, settings.max_iter + 1):
        if np.max(np.abs(r)) <= settings.tol_residual:
            return x, iterations - 1, float(np.max(np.abs(r)))
        j = np.asarray(problem.jacobian(x), dtype=float)
        jtj = j.T @ j
        g = j.T @ r
        while True:
            a = jtj + mu * np.diag(np.diag(jtj))
            try:
                step = np.asarray(_solve_dense(a.tolist(), (-g).tolist()))
            except SingularNormalEquations:
                if mu >= MU_ESCALATION_LIMIT:
                    raise
                mu = settings.lm_damping_init if mu == 0.0 else mu * 10.0
                continue
            trial = x + step
            r_trial = np.asarray(problem.residual(trial), dtype=float)
            trial_norm2 = float(r_trial @ r_trial)
            if trial_norm2 < norm2 or np.max(np.abs(r_trial)) <= settings.tol_residual:
                x, r, norm2 = trial, r_trial, trial_norm2
                mu = 0.0 if mu < 1e-15 else mu / 10.0
                break
            mu = settings.lm_damping_init if mu == 0.0 else mu * 10.0
            if mu > MU_ESCALATION_LIMIT:
                raise MaxIterationsError(x, float(np.max(np.abs(r))), iterations)
    if np.max(np.abs(r)) <= settings.tol_residual:
        return x, iterations, float(np.max(np.abs(r)))
    raise MaxIterationsError(x, float(np.max(np.abs(r))), settings.max_iter)


class BatchSolveError(RuntimeError):
    def __init__(self, indices, norms, iterations):
        worst = int(indices[int(np.argmax(norms))])
        super().__init__(
            f"{len(indices)} cell solve(s) did not converge after {iterations} iterations "
            f"(worst cell {worst}, residual inf-norm {np.max(norms):.3e})"
        )
        self.indices = indices
        self.norms = norms
        self.iterations = iterations


def lm_solve_batched(residual, jacobian, x0, settings: SolverSettings = SolverSettings(), tol_scale=None):
    """Solve M independent n-dim systems at once.

    residual(x) -> (M, n), jacobian(x) -> (M, n, n), x0: (M, n).  All cells
    follow the same accept/reject damping schedule as `lm_solve`, each with
    its own damping parameter.  tol_scale (per-cell, >= 1) rescales the
    convergence tolerance where the equations themselves are large; an
    absolute 1e-12 on terms of magnitude 1e6 sits below the float64
    resolution of the residual.  Returns (x, total_iters, max_cell_iters).
    """
    x = np.array(x0, dtype=float)
    m, n = x.shape
    tol = settings.tol_residual * (np.ones(m) if tol_scale is None else np.asarray(tol_scale))
    mu = np.zeros(m)
    r = residual(x)
    norm2 = np.einsum("ij,ij->i", r, r)
    done = np.max(np.abs(r), axis=1) <= tol
    total_iters = 0
    max_cell_iters = 0
    for _ in range(settings.max_iter):
        if done.all():
            return x, total_iters, max_cell_iters
        act = ~done
        total_iters += int(act.sum())
        max_cell_iters += 1
        j = jacobian(x)[act]
        jtj = np.einsum("mki,mkj->mij", j, j)
        g = np.einsum("mki,mk->mi", j, r[act])
        a = jtj + mu[act, None, None] * (np.eye(n) * jtj)
        try:
            step = np.linalg.solve(a, -g[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError as exc:
            raise SingularNormalEquations(str(exc)) from exc
        trial = x.copy()
        trial[act] += step
        r_trial = residual(trial)
        trial_norm2 = np.einsum("ij,ij->i", r_trial, r_trial)
        better = trial_norm2 < norm2
        hit_tol = np.max(np.abs(r_trial), axis=1) <= tol
        accept = act & (better | hit_tol)
        reject = act & ~(better | hit_tol)
        x[accept] = trial[accept]
        r[accept] = r_trial[accept]
        norm2[accept] = trial_norm2[accept]
        mu[accept] = np.where(mu[accept] < 1e-15, 0.0, mu[accept] / 10.0)
        mu[reject] = np.where(mu[reject] == 0.0, settings.lm_damping_init, mu[reject] * 10.0)
        if np.any(mu > MU_ESCALATION_LIMIT):
            bad = np.flatnonzero(mu > MU_ESCALATION_LIMIT)
            raise BatchSolveError(bad, np.max(np.abs(r[bad]), axis=1), max_cell_iters)
        done = np.max(np.abs(r), axis=1) <= tol
    if done.all():
        return x, total_iters, max_cell_iters
    bad = np.flatnonzero(~done)
    raise BatchSolveError(bad, np.max(np.abs(r[bad]), axis=1), settings.max_iter)
