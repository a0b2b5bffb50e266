"""Waveform files and delimited tables.

A waveform is two files: raw interleaved I/Q in little-endian float32
(the wire format of common AWG streaming interfaces) and a JSON
sidecar carrying everything needed to reinterpret the raw data. The
sidecar lives next to the data file with ``.json`` appended.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import ConfigError, ValidationError
from .synthesis import Signal

__all__ = [
    "sidecar_path",
    "write_waveform",
    "read_waveform",
    "write_table",
]

_DTYPE = np.dtype("<f4")


def sidecar_path(path: str) -> str:
    return str(path) + ".json"


def write_waveform(path: str, signal: Signal) -> str:
    """Write raw I/Q plus sidecar; returns the sidecar path.

    Samples are cast to float32, the precision the format carries.
    """
    s = signal.samples
    iq = np.empty(2 * s.size, dtype=_DTYPE)
    iq[0::2] = s.real.astype(_DTYPE)
    iq[1::2] = s.imag.astype(_DTYPE)
    p = signal.metadata
    meta = {
        "format": {"encoding": "interleaved-iq", "dtype": "float32", "byte_order": "little"},
        "n_samples": signal.n_samples,
        "sample_rate_hz": p.sample_rate,
        "duration_s": p.duration,
        "delta_hz": p.comb.delta,
        "bandwidth_hz": p.comb.bandwidth,
        "finesse": p.comb.finesse,
        "method": p.method,
        "phase_constructor": p.phase_constructor,
        "sign": p.sign,
        "peak_norm": signal.peak_norm,
        "sigma_realized_hz": signal.sigma_realized,
    }
    iq.tofile(path)
    side = sidecar_path(path)
    with open(side, "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    return side


def read_waveform(path: str) -> tuple[np.ndarray, dict]:
    """Read raw I/Q and sidecar back; bit-exact against what was written.

    Returns (complex64 samples, sidecar dict). The byte count must
    match the sidecar's sample count exactly.
    """
    side = sidecar_path(path)
    if not os.path.exists(path):
        raise ConfigError(f"waveform file not found: {path}")
    if not os.path.exists(side):
        raise ConfigError(f"sidecar not found: {side}")
    try:
        with open(side) as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse sidecar {side}: {exc}") from exc
    n = meta.get("n_samples")
    if not isinstance(n, int) or n <= 0:
        raise ConfigError(f"{side}: bad or missing n_samples")
    expected = 2 * n * _DTYPE.itemsize
    actual = os.path.getsize(path)
    if actual != expected:
        raise ValidationError(
            f"{path}: size {actual} does not match sidecar "
            f"({n} samples need {expected} bytes)"
        )
    iq = np.fromfile(path, dtype=_DTYPE)
    samples = np.empty(n, dtype=np.complex64)
    samples.real = iq[0::2]
    samples.imag = iq[1::2]
    return samples, meta


def write_table(path: str, header: list[str], rows) -> None:
    """CSV with one header row; values formatted with full precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(value):
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return format(value, ".12g")
    return value
