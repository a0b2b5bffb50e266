"""Report figures rendered next to the delimited outputs.

Everything draws through the Agg backend into a file; nothing here
opens a window. Each helper takes the already-computed result objects
so the CLI can reuse the same data for the CSV and the figure.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .comb import CombSpec
from .pumping import BandwidthScanResult
from .synthesis import Signal

__all__ = [
    "save_waveform_figure",
    "save_bench_figure",
    "save_spectrum_figure",
    "save_scan_figure",
    "save_fit_figure",
    "save_xy_figure",
]

_MAX_TRACE_POINTS = 20000


def _decimate(x: np.ndarray, y: np.ndarray):
    if x.size <= _MAX_TRACE_POINTS:
        return x, y
    step = int(np.ceil(x.size / _MAX_TRACE_POINTS))
    return x[::step], y[::step]


def save_waveform_figure(signal: Signal, comb: CombSpec, path: str) -> None:
    """Envelope and PSD panels for one synthesized record."""
    t = np.arange(signal.n_samples) / signal.metadata.sample_rate
    env = np.abs(signal.samples)
    psd = np.abs(np.fft.fft(signal.samples)) ** 2
    psd /= psd.max()
    freqs = np.arange(signal.n_samples) * (
        signal.metadata.sample_rate / signal.n_samples
    )
    keep = freqs <= 1.2 * comb.bandwidth
    fig, (ax_t, ax_f) = plt.subplots(2, 1, figsize=(8, 6))
    ax_t.plot(*_decimate(t * 1e6, env), lw=0.5)
    ax_t.set_xlabel("time (us)")
    ax_t.set_ylabel("|s|")
    ax_t.set_title(
        f"{signal.metadata.method}, N={comb.n_teeth}, "
        f"{signal.n_samples} samples"
    )
    ax_f.semilogy(
        *_decimate(freqs[keep] / 1e6, np.maximum(psd[keep], 1e-18)), lw=0.5
    )
    ax_f.set_xlabel("frequency (MHz)")
    ax_f.set_ylabel("PSD (rel.)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_figure(records, path: str) -> None:
    """Wall time and RMS power versus tooth count, one line per method."""
    fig, (ax_t, ax_p) = plt.subplots(1, 2, figsize=(10, 4))
    methods = []
    for rec in records:
        if rec.method not in methods:
            methods.append(rec.method)
    for method in methods:
        rows = [r for r in records if r.method == method]
        n = [r.n_teeth for r in rows]
        ax_t.loglog(n, [r.wall_time_s for r in rows], "o-", label=method)
        ax_p.loglog(n, [r.rms_power_at_unit_peak for r in rows], "o-", label=method)
    ax_t.set_xlabel("teeth")
    ax_t.set_ylabel("wall time (s)")
    ax_p.set_xlabel("teeth")
    ax_p.set_ylabel("RMS power at unit peak")
    ax_t.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_spectrum_figure(grids, labels, path: str) -> None:
    """Optical-depth spectra overlaid on one axis (frequencies in MHz)."""
    fig, ax = plt.subplots(figsize=(9, 4))
    for grid, label in zip(grids, labels):
        ax.plot(*_decimate(grid.frequencies, grid.values), lw=0.7, label=label)
    ax.set_xlabel("frequency (MHz)")
    ax.set_ylabel("optical depth")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_scan_figure(scan: BandwidthScanResult, path: str) -> None:
    """Parasitic absorption versus pump bandwidth with the knee marked."""
    w = [p.bandwidth for p in scan.points]
    rel = [max(p.parasitic_rel, 1e-12) for p in scan.points]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(w, rel, "o-")
    ax.axhline(scan.threshold_rel, color="grey", ls=":", lw=1)
    if scan.knee is not None:
        ax.axvline(scan.knee, color="red", ls="--", lw=1, label=f"knee {scan.knee:g} MHz")
        ax.legend(fontsize=8)
    ax.set_xlabel("pump bandwidth (MHz)")
    ax.set_ylabel("parasitic / reference OD")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_fit_figure(points: np.ndarray, model_x, model_y, path: str, *, logy=False) -> None:
    """Data points with the fitted curve."""
    fig, ax = plt.subplots(figsize=(7, 4))
    plot = ax.semilogy if logy else ax.plot
    plot(points[:, 0], points[:, 1], "o", ms=4, label="data")
    plot(model_x, model_y, "-", lw=1, label="fit")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_xy_figure(x, ys, labels, path: str, *, xlabel="", ylabel="", logy=False) -> None:
    """Plain multi-line figure for the table-style reports."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for y, label in zip(ys, labels):
        (ax.semilogy if logy else ax.plot)(x, y, "o-", ms=3, lw=1, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if labels and any(labels):
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
