"""Render the preset CSVs to PNG figures (matplotlib, Agg backend)."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SCHEME_STYLE = {
    "newton": dict(color="tab:orange", marker="d", label="explicit (aligned)"),
    "bddv": dict(color="tab:green", marker="^", label="energy-exact (light cone)"),
    "msilcc": dict(color="tab:blue", marker="o", label="multi-symplectic box"),
}


def _read_csv(path: Path):
    with path.open(encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def _save(fig, path: Path, force: bool):
    if path.exists() and not force:
        raise FileExistsError(f"refusing to overwrite {path} (pass force)")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _by_scheme(rows, key="scheme"):
    groups = defaultdict(list)
    for row in rows:
        groups[row[key]].append(row)
    return groups


def _floats(rows, key):
    out = []
    for row in rows:
        if row[key]:
            out.append(float(row[key]))
        else:
            out.append(np.nan)
    return np.asarray(out)


def fig_energy_vs_time(outdir: Path, force: bool):
    rows = _read_csv(outdir / "energy_vs_time.csv")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=False)
    for scheme, group in _by_scheme(rows).items():
        style = SCHEME_STYLE[scheme]
        t = _floats(group, "t_over_L")
        e = _floats(group, "E")
        e /= np.nanmean(e[: max(1, len(e) // 10)])
        axes[0].plot(t[t <= 1], e[t <= 1], ".", ms=2, color=style["color"], label=style["label"])
        axes[1].plot(t[t > 1], e[t > 1], ".", ms=2, color=style["color"])
    axes[0].set_xlabel("t / L")
    axes[1].set_xlabel("t / L")
    axes[0].set_ylabel("E / E(0)")
    axes[0].set_ylim(0.99, 1.01)
    axes[1].set_ylim(0.995, 1.005)
    axes[0].legend(fontsize=8)
    fig.suptitle("total energy against time (A = 10)")
    out = [_save(fig, outdir / "energy_vs_time.png", force)]

    hist = _read_csv(outdir / "energy_histogram.csv")
    lefts = _floats(hist, "bin_left")
    counts = _floats(hist, "count")
    width = float(hist[0]["bin_right"]) - float(hist[0]["bin_left"])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(lefts, counts, width=width, align="edge", color="tab:blue")
    ax.set_xlabel("E / <E>")
    ax.set_ylabel("occurrences")
    ax.set_title("energy histogram, multi-symplectic run")
    out.append(_save(fig, outdir / "energy_histogram.png", force))
    return out


def fig_error_vs_amplitude(outdir: Path, force: bool):
    rows = _read_csv(outdir / "error_vs_amplitude.csv")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for scheme, group in _by_scheme(rows).items():
        style = SCHEME_STYLE[scheme]
        amp = _floats(group, "A")
        eps = _floats(group, "eps0_peak")
        dq0 = _floats(group, "q0_drift")
        axes[0].loglog(amp, eps, style["marker"], ms=4, color=style["color"], label=style["label"])
        axes[1].loglog(amp, dq0, style["marker"], ms=4, color=style["color"])
    axes[0].set_xlabel("A")
    axes[0].set_ylabel(r"$\Delta(\epsilon^0)$")
    axes[0].set_title("stress-energy conservation error")
    axes[1].set_xlabel("A")
    axes[1].set_ylabel(r"$|\Delta Q^0| / Q^0$")
    axes[1].set_title("energy conservation error")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    return [_save(fig, outdir / "error_vs_amplitude.png", force)]


def fig_error_vs_time(outdir: Path, force: bool):
    rows = _read_csv(outdir / "error_vs_time.csv")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for scheme, group in _by_scheme(rows).items():
        style = SCHEME_STYLE[scheme]
        t = _floats(group, "t_over_L")
        axes[0].semilogy(t, _floats(group, "eps0_peak"), "-", color=style["color"], label=style["label"])
        axes[0].semilogy(t, _floats(group, "eps0_max"), ":", color=style["color"], alpha=0.4)
        axes[1].semilogy(t, _floats(group, "q0_drift"), "-", color=style["color"])
    for ax in axes:
        ax.set_xscale("log")
        ax.set_xlabel("t / L")
    axes[0].set_ylabel(r"$\Delta(\epsilon^0)$ (solid: peak, dotted: instantaneous)")
    axes[1].set_ylabel(r"$|\Delta Q^0| / Q^0$")
    axes[0].legend(fontsize=8)
    fig.suptitle("long-time conservation errors (A = 10)")
    return [_save(fig, outdir / "error_vs_time.png", force)]


def fig_r_scan(outdir: Path, force: bool):
    rows = _read_csv(outdir / "r_scan.csv")
    r = _floats(rows, "r")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(r, _floats(rows, "eps0_peak"), "o", ms=3, label=r"$\Delta(\epsilon^0)$")
    ax.plot(r, _floats(rows, "q0_drift"), "^", ms=3, label=r"$|\Delta Q^0|/Q^0$")
    ax.set_xscale("symlog", linthresh=0.1)
    ax.set_yscale("log")
    ax.set_xlabel("r")
    ax.set_title("multi-symplectic box scheme, A = 10, t/L = 1")
    ax.legend(fontsize=8)
    return [_save(fig, outdir / "r_scan.png", force)]


def fig_jacobi_compare(outdir: Path, force: bool):
    rows = _read_csv(outdir / "jacobi_compare.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    first = True
    for scheme, group in _by_scheme(rows).items():
        style = SCHEME_STYLE[scheme]
        x = _floats(group, "x")
        ax.plot(x, _floats(group, "phi"), style["marker"], ms=3, color=style["color"], label=style["label"])
        if first:
            ax.plot(x, _floats(group, "exact"), "r-", lw=1, label="elliptic reference")
            first = False
    ax.set_xlabel("x")
    ax.set_ylabel(r"$\phi(x, t{=}L)$")
    ax.legend(fontsize=8)
    ax.set_title("homogeneous elliptic oscillation after t/L = 1")
    return [_save(fig, outdir / "jacobi_compare.png", force)]


def fig_field_snapshots(outdir: Path, force: bool):
    rows = _read_csv(outdir / "field_snapshots.csv")
    groups = _by_scheme(rows, key="A")
    fig, axes = plt.subplots(1, len(groups), figsize=(4 * len(groups), 3.5), squeeze=False)
    for ax, (amp, group) in zip(axes[0], sorted(groups.items(), key=lambda kv: float(kv[0]))):
        t = _floats(group, "t_over_L")
        j = _floats(group, "j").astype(int)
        phi = _floats(group, "phi")
        n_j = j.max() + 1
        times = np.unique(t)
        grid = np.full((len(times), n_j), np.nan)
        t_index = {tv: i for i, tv in enumerate(times)}
        for tv, jv, fv in zip(t, j, phi):
            grid[t_index[tv], jv] = fv
        mesh = ax.pcolormesh(np.arange(n_j), times, grid, shading="nearest", cmap="RdBu_r")
        fig.colorbar(mesh, ax=ax)
        ax.set_title(f"A = {float(amp):g}")
        ax.set_xlabel("site")
        ax.set_ylabel("t / L")
    fig.tight_layout()
    return [_save(fig, outdir / "field_snapshots.png", force)]


_RENDERERS = {
    "energy-vs-time": fig_energy_vs_time,
    "error-vs-amplitude": fig_error_vs_amplitude,
    "error-vs-time": fig_error_vs_time,
    "r-scan": fig_r_scan,
    "jacobi-compare": fig_jacobi_compare,
    "field-snapshots": fig_field_snapshots,
}


def render_preset(name: str, outdir, force: bool = False):
    return _RENDERERS[name](Path(outdir), force)
