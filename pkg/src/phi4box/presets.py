"""Experiment presets: each reproduces one figure's data set at desk scale,
emitting one merged CSV per figure (plus per-run CSVs and, by default, a
rendered PNG next to the data)."""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bddv import SingularUpdateError
from .model import PotentialParams
from .nlsolve import BatchSolveError, MaxIterationsError, SingularNormalEquations
from .reference import CnSolution, cn_value
from .runner import ConfigError, RunConfig, RunResult, _fmt, run

SOLVER_ERRORS = (BatchSolveError, MaxIterationsError, SingularNormalEquations, SingularUpdateError)

PRESETS = (
    "energy-vs-time",
    "error-vs-amplitude",
    "error-vs-time",
    "r-scan",
    "jacobi-compare",
    "field-snapshots",
)

HISTOGRAM_BINS = 128
HISTOGRAM_RANGE = (0.999, 1.001)


def _write(path: Path, lines, force: bool):
    if path.exists() and not force:
        raise FileExistsError(f"refusing to overwrite {path} (pass force)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _amplitude_grid():
    # 32 points per decade over [0.1, 100]
    return np.geomspace(0.1, 100.0, 3 * 32 + 1)


def _r_grid():
    log_side = np.geomspace(0.1, 100.0, 3 * 32 + 1)
    linear = np.linspace(-0.1, 0.1, 21)
    return np.concatenate([-log_side[::-1], linear[1:-1], log_side])


def preset_energy_vs_time(outdir: Path, base: RunConfig, force: bool) -> list[Path]:
    written = []
    merged = ["scheme,t_over_L,E,E_plus,E_minus,parity,diverged"]
    hist_energies = None
    for scheme, duration in (("newton", 8.0), ("bddv", 100.0), ("msilcc", 100.0)):
        cfg = replace(
            base,
            scheme=scheme,
            amplitude=10.0,
            duration_over_length=duration,
            record_every=1,
            out=None,
        )
        result = run(cfg)
        stride = 256 if duration > 1 else 1
        for i, rec in enumerate(result.records):
            if rec.t_over_length <= 1.0 or i % stride == 0 or rec.diverged:
                merged.append(
                    ",".join(
                        [
                            scheme,
                            _fmt(rec.t_over_length),
                            _fmt(rec.energy),
                            _fmt(rec.energy_plus),
                            _fmt(rec.energy_minus),
                            "" if rec.parity is None else str(rec.parity),
                            "1" if rec.diverged else "0",
                        ]
                    )
                )
        if scheme == "msilcc":
            hist_energies = result.energies
    written.append(_write(outdir / "energy_vs_time.csv", merged, force))

    normalized = hist_energies / hist_energies.mean()
    counts, edges = np.histogram(normalized, bins=HISTOGRAM_BINS, range=HISTOGRAM_RANGE)
    hist_lines = ["bin_left,bin_right,count"]
    for k in range(HISTOGRAM_BINS):
        hist_lines.append(f"{_fmt(edges[k])},{_fmt(edges[k + 1])},{counts[k]}")
    written.append(_write(outdir / "energy_histogram.csv", hist_lines, force))
    return written


def _peaks_and_drifts(result: RunResult):
    recs = result.records
    if not recs:
        return None
    q0 = np.array([r.q0 for r in recs])
    q1 = np.array([r.q1 for r in recs])
    q0_drift = float(np.max(np.abs(q0 - q0[0])) / max(abs(q0[0]), 1e-300))
    q1_drift = float(np.max(np.abs(q1 - q1[0])))
    return recs[-1].eps0_peak, recs[-1].eps1_peak, q0_drift, q1_drift


def preset_error_vs_amplitude(outdir: Path, base: RunConfig, force: bool) -> list[Path]:
    merged = ["scheme,A,eps0_peak,eps1_peak,q0_drift,q1_drift,status"]
    for amp in _amplitude_grid():
        for scheme in ("newton", "bddv", "msilcc"):
            cfg = replace(
                base,
                scheme=scheme,
                amplitude=float(amp),
                duration_over_length=1.0,
                record_every=1,
                out=None,
            )
            try:
                result = run(cfg)
            except SOLVER_ERRORS:
                merged.append(f"{scheme},{_fmt(amp)},,,,,solver_failed")
                continue
            stats = _peaks_and_drifts(result)
            if stats is None or result.diverged:
                merged.append(f"{scheme},{_fmt(amp)},,,,,diverged")
                continue
            e0, e1, dq0, dq1 = stats
            merged.append(
                f"{scheme},{_fmt(amp)},{_fmt(e0)},{_fmt(e1)},{_fmt(dq0)},{_fmt(dq1)},ok"
            )
    return [_write(outdir / "error_vs_amplitude.csv", merged, force)]


def preset_error_vs_time(outdir: Path, base: RunConfig, force: bool) -> list[Path]:
    merged = ["scheme,t_over_L,eps0_max,eps1_max,eps0_peak,eps1_peak,q0_drift,q1_drift,diverged"]
    for scheme, duration in (("newton", 100.0), ("bddv", 100.0), ("msilcc", 100.0)):
        cfg = replace(
            base,
            scheme=scheme,
            amplitude=10.0,
            duration_over_length=duration,
            record_every=1,
            out=None,
        )
        result = run(cfg)
        recs = result.records
        if not recs:
            continue
        q0_0 = recs[0].q0
        q1_0 = recs[0].q1
        stride = 256
        for i, rec in enumerate(recs):
            if rec.t_over_length <= 1.0 or i % stride == 0 or rec.diverged:
                dq0 = abs(rec.q0 - q0_0) / max(abs(q0_0), 1e-300)
                dq1 = abs(rec.q1 - q1_0)
                merged.append(
                    ",".join(
                        [
                            scheme,
                            _fmt(rec.t_over_length),
                            _fmt(rec.eps0_max),
                            _fmt(rec.eps1_max),
                            _fmt(rec.eps0_peak),
                            _fmt(rec.eps1_peak),
                            _fmt(dq0),
                            _fmt(dq1),
                            "1" if rec.diverged else "0",
                        ]
                    )
                )
    return [_write(outdir / "error_vs_time.csv", merged, force)]


def preset_r_scan(outdir: Path, base: RunConfig, force: bool) -> list[Path]:
    merged = ["r,eps0_peak,eps1_peak,q0_drift,q1_drift,status"]
    for r in _r_grid():
        cfg = replace(
            base,
            scheme="msilcc",
            amplitude=10.0,
            r=float(r),
            duration_over_length=1.0,
            record_every=1,
            out=None,
        )
        try:
            result = run(cfg)
        except SOLVER_ERRORS:
            merged.append(f"{_fmt(r)},,,,,solver_failed")
            continue
        stats = _peaks_and_drifts(result)
        if stats is None:
            merged.append(f"{_fmt(r)},,,,,diverged")
            continue
        e0, e1, dq0, dq1 = stats
        merged.append(f"{_fmt(r)},{_fmt(e0)},{_fmt(e1)},{_fmt(dq0)},{_fmt(dq1)},ok")
    return [_write(outdir / "r_scan.csv", merged, force)]


def preset_jacobi_compare(outdir: Path, base: RunConfig, force: bool) -> list[Path]:
    amplitude = 1.0
    p = PotentialParams(r=base.r, lam=base.lam)
    sol = CnSolution(amplitude, p)
    merged = ["scheme,j,x,phi,exact,error"]
    summary = ["scheme,max_error"]
    for scheme in ("newton", "bddv", "msilcc"):
        cfg = replace(
            base,
            scheme=scheme,
            amplitude=amplitude,
            initial_profile="homogeneous",
            duration_over_length=1.0,
            record_every=1,
            snapshots=True,
            snapshot_every=1,
            out=None,
        )
        result = run(cfg)
        index, t_over_length, x, row = result.snapshots[-1]
        exact = cn_value(sol, t_over_length * base.length)
        err = np.abs(row - exact)
        for j, (xj, fj) in enumerate(zip(x, row)):
            merged.append(
                f"{scheme},{j},{_fmt(xj)},{_fmt(fj)},{_fmt(exact)},{_fmt(fj - exact)}"
            )
        summary.append(f"{scheme},{_fmt(np.max(err))}")
    paths = [_write(outdir / "jacobi_compare.csv", merged, force)]
    paths.append(_write(outdir / "jacobi_compare_summary.csv", summary, force))
    return paths


def preset_field_snapshots(outdir: Path, base: RunConfig, force: bool) -> list[Path]:
    merged = ["A,t_over_L,j,x,phi"]
    for amp in (0.1, 1.0, 3.0, 10.0):
        cfg = replace(
            base,
            scheme="msilcc",
            amplitude=amp,
            duration_over_length=1.0,
            record_every=1,
            snapshots=True,
            snapshot_every=4,
            out=None,
        )
        result = run(cfg)
        for _, t_over_length, x, row in result.snapshots:
            for j, (xj, fj) in enumerate(zip(x, row)):
                merged.append(f"{_fmt(amp)},{_fmt(t_over_length)},{j},{_fmt(xj)},{_fmt(fj)}")
    return [_write(outdir / "field_snapshots.csv", merged, force)]


_PRESET_FUNCS = {
    "energy-vs-time": preset_energy_vs_time,
    "error-vs-amplitude": preset_error_vs_amplitude,
    "error-vs-time": preset_error_vs_time,
    "r-scan": preset_r_scan,
    "jacobi-compare": preset_jacobi_compare,
    "field-snapshots": preset_field_snapshots,
}


def run_preset(name: str, outdir, base: RunConfig | None = None, force: bool = False, figures: bool = True):
    """Run one preset batch; returns the list of files written."""
    if name not in _PRESET_FUNCS:
        raise ConfigError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    outdir = Path(outdir)
    base = base or RunConfig()
    written = _PRESET_FUNCS[name](outdir, base, force)
    manifest = {
        "preset": name,
        "base_config": {
            "n_sites": base.n_sites,
            "length": base.length,
            "r": base.r,
            "lambda": base.lam,
        },
        "files": [p.name for p in written],
    }
    manifest_path = outdir / f"{name.replace('-', '_')}.meta.json"
    if manifest_path.exists() and not force:
        raise FileExistsError(f"refusing to overwrite {manifest_path} (pass force)")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(manifest_path)
    if figures:
        from . import figures as figmod

        written.extend(figmod.render_preset(name, outdir, force=force))
    return written
