"""Run orchestration: configs, per-scheme drivers, CSV/JSON emission.

A run advances one scheme from the sine (or homogeneous) initial data,
collects a DiagnosticsRecord per retained time-row and writes them as CSV
(17-significant-digit round-trip floats, fully deterministic) plus a JSON
metadata sidecar.  The dimensionless eps columns divide each row's largest
|residual| by the characteristic scale accumulated over the whole run so
far (the largest residual summand seen on the space-time lattice).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bddv import bddv_init, bddv_step
from .diagnostics import (
    DiagnosticsRecord,
    bddv_charges,
    bddv_residual_terms,
    msilcc_charges,
    msilcc_residual_exact_terms,
    newton_charges,
    newton_residual_terms,
)
from .model import (
    GridSpec,
    PotentialParams,
    homogeneous_initial_data,
    sine_initial_data,
)
from .msilcc import msilcc_init, msilcc_step, midpoint_step_mech
from .newton import DEFAULT_OVERFLOW_BOUND, DivergenceError, newton_init, newton_step
from .nlsolve import SolverSettings

SCHEMES = ("newton", "bddv", "msilcc", "midpoint0d")
INITIAL_PROFILES = ("sine", "homogeneous")

CSV_COLUMNS = (
    "t_over_L",
    "E",
    "E_plus",
    "E_minus",
    "Q0",
    "Q1",
    "eps0_max",
    "eps1_max",
    "eps0_peak",
    "eps1_peak",
    "parity",
    "diverged",
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scheme: str = "msilcc"
    amplitude: float = 1.0
    r: float = 1.0
    lam: float = 1.0
    n_sites: int = 128
    length: float = 1.0
    duration_over_length: float = 1.0
    record_every: int = 1
    tol_residual: float = 1e-12
    max_iter: int = 50
    lm_damping_init: float = 1e-3
    overflow_bound: float = DEFAULT_OVERFLOW_BOUND
    initial_profile: str = "sine"
    out: str | None = None
    format: str = "csv"
    force: bool = False
    snapshots: bool = False
    snapshot_every: int | None = None

    def validate(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r} (choose from {', '.join(SCHEMES)})")
        if self.initial_profile not in INITIAL_PROFILES:
            raise ConfigError(f"unknown initial profile {self.initial_profile!r}")
        if self.duration_over_length <= 0:
            raise ConfigError("duration must be positive")
        if self.record_every < 1:
            raise ConfigError("record-every must be >= 1")
        if self.n_sites < 4:
            raise ConfigError("need at least 4 sites")
        if self.scheme in ("bddv", "msilcc") and self.n_sites % 2:
            raise ConfigError("light-cone schemes need an even number of sites")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.length <= 0:
            raise ConfigError("length must be positive")
        if self.tol_residual <= 0 or self.max_iter < 1:
            raise ConfigError("solver settings out of range")
        return self

    def potential(self) -> PotentialParams:
        return PotentialParams(r=self.r, lam=self.lam)

    def grid(self) -> GridSpec:
        if self.scheme == "newton":
            return GridSpec.aligned(self.n_sites, self.length)
        return GridSpec.lightcone(self.n_sites, self.length)

    def solver(self) -> SolverSettings:
        return SolverSettings(self.tol_residual, self.max_iter, self.lm_damping_init)

    def initial_data(self):
        if self.initial_profile == "sine":
            return sine_initial_data(self.amplitude, self.length)
        return homogeneous_initial_data(self.amplitude)


@dataclass
class RunResult:
    records: list
    snapshots: list  # (time_index, t_over_L, x positions, phi row)
    diverged: bool
    divergence_t_over_length: float | None
    solver_stats: dict
    runtime_seconds: float

    @property
    def energies(self):
        return np.array([rec.energy for rec in self.records])


class _PeakTracker:
    """Running characteristic scale and running peak of the normalized max."""

    def __init__(self):
        self.scale = 0.0
        self.peak = 0.0

    def update(self, terms):
        raw = float(np.max(np.abs(sum(terms)))) if len(terms) else 0.0
        for t in terms:
            self.scale = max(self.scale, float(np.max(np.abs(t))))
        value = raw / self.scale if self.scale > 0.0 else 0.0
        self.peak = max(self.peak, value)
        return value


def _run_newton(config: RunConfig):
    grid = config.grid()
    p = config.potential()
    state = newton_init(config.amplitude, grid, p, config.initial_data())
    rows = [state.rows.prev, state.rows.curr]
    total_rows = int(round(config.duration_over_length * config.length / grid.time_step))
    track0, track1 = _PeakTracker(), _PeakTracker()
    records, snapshots = [], []
    diverged_at = None
    while state.rows.time_index < total_rows:
        try:
            state = newton_step(state, config.overflow_bound)
        except DivergenceError as err:
            diverged_at = err.time_index * grid.time_step / config.length
            break
        rows.append(state.rows.curr)
        if len(rows) > 3:
            rows.pop(0)
        if len(rows) == 3:
            n = state.rows.time_index - 1  # diagnostics live on the middle row
            terms0, terms1 = newton_residual_terms(*rows, grid.delta, p)
            v0 = track0.update(terms0)
            v1 = track1.update(terms1)
            if n % config.record_every == 0:
                e_plus, q1 = newton_charges(*rows, grid.delta, p, +1)
                e_minus, _ = newton_charges(*rows, grid.delta, p, -1)
                t = n * grid.time_step
                records.append(
                    DiagnosticsRecord(
                        time=t,
                        t_over_length=t / config.length,
                        energy=0.5 * (e_plus + e_minus),
                        q0=e_plus,
                        q1=q1,
                        eps0_max=v0,
                        eps1_max=v1,
                        eps0_peak=track0.peak,
                        eps1_peak=track1.peak,
                        energy_plus=e_plus,
                        energy_minus=e_minus,
                    )
                )
            _maybe_snapshot(config, snapshots, grid, n, rows[1])
    return records, snapshots, diverged_at, {}


def _run_bddv(config: RunConfig):
    grid = config.grid()
    p = config.potential()
    state = bddv_init(config.amplitude, grid, p, config.initial_data())
    rows = [state.rows.prev, state.rows.curr]
    total_rows = int(round(config.duration_over_length * config.length / grid.time_step))
    track0, track1 = _PeakTracker(), _PeakTracker()
    records, snapshots = [], []
    diverged_at = None
    while state.rows.time_index < total_rows:
        try:
            state = bddv_step(state, config.overflow_bound)
        except DivergenceError as err:
            diverged_at = err.time_index * grid.time_step / config.length
            break
        rows.append(state.rows.curr)
        if len(rows) > 3:
            rows.pop(0)
        if len(rows) == 3:
            n = state.rows.time_index - 1
            terms0, terms1 = bddv_residual_terms(rows, n, grid.delta, p)
            v0 = track0.update(terms0)
            v1 = track1.update(terms1)
            if n % config.record_every == 0:
                e_plus, q1 = bddv_charges(*rows, n, grid.delta, p, +1)
                e_minus, _ = bddv_charges(*rows, n, grid.delta, p, -1)
                t = n * grid.time_step
                records.append(
                    DiagnosticsRecord(
                        time=t,
                        t_over_length=t / config.length,
                        energy=e_plus,
                        q0=e_plus,
                        q1=q1,
                        eps0_max=v0,
                        eps1_max=v1,
                        eps0_peak=track0.peak,
                        eps1_peak=track1.peak,
                        energy_plus=e_plus,
                        energy_minus=e_minus,
                        parity=2 * (n % 2) - 1,
                    )
                )
            _maybe_snapshot(config, snapshots, grid, n, rows[1])
    return records, snapshots, diverged_at, {}


def _run_msilcc(config: RunConfig):
    grid = config.grid()
    p = config.potential()
    state = msilcc_init(config.amplitude, grid, p, config.solver(), config.initial_data())
    total_lm, max_lm = state.lm_stats
    rows = [state.prev, state.curr]
    total_rows = int(round(config.duration_over_length * config.length / grid.time_step))
    track0, track1 = _PeakTracker(), _PeakTracker()
    records, snapshots = [], []
    diverged_at = None
    while state.curr.time_index < total_rows:
        try:
            state = msilcc_step(state, config.overflow_bound)
        except DivergenceError as err:
            diverged_at = err.time_index * grid.time_step / config.length
            break
        total_lm += state.lm_stats[0]
        max_lm = max(max_lm, state.lm_stats[1])
        rows.append(state.curr)
        if len(rows) > 5:
            rows.pop(0)
        if len(rows) == 5:
            mid = rows[2].time_index
            phi_rows = [z.phi for z in rows]
            gamma_rows = [z.gamma for z in rows]
            terms0, terms1 = msilcc_residual_exact_terms(phi_rows, gamma_rows, mid, grid.delta, p)
            v0 = track0.update(terms0)
            v1 = track1.update(terms1)
            if mid % config.record_every == 0:
                q0, q1 = msilcc_charges(rows[1], rows[2], rows[3], grid.delta, p)
                t = mid * grid.time_step
                records.append(
                    DiagnosticsRecord(
                        time=t,
                        t_over_length=t / config.length,
                        energy=q0,
                        q0=q0,
                        q1=q1,
                        eps0_max=v0,
                        eps1_max=v1,
                        eps0_peak=track0.peak,
                        eps1_peak=track1.peak,
                        parity=rows[2].parity,
                    )
                )
            _maybe_snapshot(config, snapshots, grid, mid, rows[2].phi)
    stats = {"lm_iterations_total": int(total_lm), "lm_iterations_max_per_cell": int(max_lm)}
    return records, snapshots, diverged_at, stats


def _run_midpoint0d(config: RunConfig):
    # 0+1 oscillator q(0) = A, p(0) = 0 with the light-cone row spacing
    p = config.potential()
    dt = config.length / (2 * config.n_sites)
    steps = int(round(config.duration_over_length * config.length / dt))
    q, mom = config.amplitude, 0.0
    solver = SolverSettings(min(config.tol_residual, 1e-13), config.max_iter, config.lm_damping_init)
    records = []
    for n in range(1, steps + 1):
        q, mom = midpoint_step_mech(q, mom, dt, p, solver)
        if n % config.record_every == 0:
            e = 0.5 * mom * mom + p.v(q)
            t = n * dt
            records.append(
                DiagnosticsRecord(
                    time=t,
                    t_over_length=t / config.length,
                    energy=e,
                    q0=e,
                    q1=0.0,
                    eps0_max=0.0,
                    eps1_max=0.0,
                    eps0_peak=0.0,
                    eps1_peak=0.0,
                )
            )
    return records, [], None, {}


def _maybe_snapshot(config, snapshots, grid, time_index, row):
    if not config.snapshots:
        return
    every = config.snapshot_every or config.record_every
    if time_index % every == 0:
        t = time_index * grid.time_step
        snapshots.append((time_index, t / config.length, grid.site_positions(time_index), np.array(row)))


_DRIVERS = {
    "newton": _run_newton,
    "bddv": _run_bddv,
    "msilcc": _run_msilcc,
    "midpoint0d": _run_midpoint0d,
}


def run(config: RunConfig) -> RunResult:
    """Execute one configured run and (optionally) write its artifacts."""
    config.validate()
    started = time.perf_counter()
    records, snapshots, diverged_at, stats = _DRIVERS[config.scheme](config)
    if diverged_at is not None and records:
        records[-1].diverged = True
    result = RunResult(
        records=records,
        snapshots=snapshots,
        diverged=diverged_at is not None,
        divergence_t_over_length=diverged_at,
        solver_stats=stats,
        runtime_seconds=time.perf_counter() - started,
    )
    if config.out is not None:
        write_artifacts(config, result)
    return result


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def record_csv_rows(records) -> list[str]:
    lines = [",".join(CSV_COLUMNS)]
    for rec in records:
        lines.append(
            ",".join(
                [
                    _fmt(rec.t_over_length),
                    _fmt(rec.energy),
                    _fmt(rec.energy_plus),
                    _fmt(rec.energy_minus),
                    _fmt(rec.q0),
                    _fmt(rec.q1),
                    _fmt(rec.eps0_max),
                    _fmt(rec.eps1_max),
                    _fmt(rec.eps0_peak),
                    _fmt(rec.eps1_peak),
                    "" if rec.parity is None else str(rec.parity),
                    "1" if rec.diverged else "0",
                ]
            )
        )
    return lines


def write_artifacts(config: RunConfig, result: RunResult):
    out = Path(config.out)
    if out.exists() and not config.force:
        raise FileExistsError(f"refusing to overwrite {out} (pass force)")
    out.parent.mkdir(parents=True, exist_ok=True)
    if config.format == "csv":
        out.write_text("\n".join(record_csv_rows(result.records)) + "\n", encoding="utf-8")
        meta_path = out.with_suffix(out.suffix + ".meta.json")
    elif config.format == "json":
        payload = {
            "records": [asdict(rec) for rec in result.records],
            "metadata": run_metadata(config, result),
        }
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return
    else:
        raise ConfigError(f"unknown output format {config.format!r}")
    meta_path.write_text(
        json.dumps(run_metadata(config, result), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if config.snapshots and result.snapshots:
        snap_path = out.with_suffix(".fields.csv")
        lines = ["t_over_L,j,x,phi"]
        for _, t_over_length, x, row in result.snapshots:
            for j, (xj, fj) in enumerate(zip(x, row)):
                lines.append(f"{_fmt(t_over_length)},{j},{_fmt(xj)},{_fmt(fj)}")
        snap_path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_metadata(config: RunConfig, result: RunResult) -> dict:
    grid = config.grid() if config.scheme != "midpoint0d" else None
    return {
        "version": __version__,
        "config": asdict(config),
        "grid": None
        if grid is None
        else {"family": grid.family, "n_sites": grid.n_sites, "delta": grid.delta, "length": grid.length},
        "solver_stats": result.solver_stats,
        "diverged": result.diverged,
        "divergence_t_over_L": result.divergence_t_over_length,
        "runtime_seconds": result.runtime_seconds,
        "records": len(result.records),
    }


def load_config_file(path) -> dict:
    """line-based key=value file; '#' comments and blank lines ignored."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values
