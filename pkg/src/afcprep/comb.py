"""Closed-form comb geometry, echo efficiency and decay models.

The echo efficiency of a comb with peak depth d and finesse F, read out
after one tooth-spacing delay, is

    eta = (d/F)^2 * exp(-d/F) * sinc^2(pi/F),    sinc(x) = sin(x)/x

The sinc above is the unnormalized convention. ``numpy.sinc`` implements
the normalized one, sin(pi x)/(pi x); swapping conventions silently
changes every efficiency value, so all call sites go through ``_sinc``.

All public frequencies in this module are plain Hz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "CombSpec",
    "CombMeasurement",
    "DecayModel",
    "HoleDecayModel",
    "SpectrumGrid",
    "mean_optical_depth",
    "afc_efficiency",
    "afc_efficiency_with_background",
    "optimal_finesse",
    "efficiency_decay",
    "hole_decay",
    "target_psd",
]

# relative tolerance for "lands exactly on the grid" checks
_ALIGN_RTOL = 1e-9


def _sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


def _require_finite(**values):
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            raise ValidationError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class CombSpec:
    """Comb geometry.

    Parameters
    ----------
    delta : float
        Tooth spacing (Hz). The echo delay is 1/delta.
    bandwidth : float
        Total comb bandwidth (Hz); must be an integer multiple of delta.
    finesse : float
        Ratio of tooth spacing to absorbing-tooth width, strictly > 1.

    Derived quantities: ``pump_finesse`` (the complementary finesse of
    the pump comb), ``pump_tooth_width`` (width of each pump band) and
    ``n_teeth``. One period tiles exactly as
    pump_tooth_width + delta/finesse = delta.
    """

    delta: float
    bandwidth: float
    finesse: float

    def __post_init__(self):
        _require_finite(delta=self.delta, bandwidth=self.bandwidth, finesse=self.finesse)
        if self.delta <= 0:
            raise ValidationError(f"tooth spacing must be positive, got {self.delta}")
        if self.bandwidth <= 0:
            raise ValidationError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.finesse <= 1:
            raise ValidationError(f"finesse must exceed 1, got {self.finesse}")
        ratio = self.bandwidth / self.delta
        if abs(ratio - round(ratio)) > _ALIGN_RTOL * max(ratio, 1.0):
            raise ValidationError(
                "bandwidth must be an integer multiple of the tooth spacing, "
                f"got bandwidth/delta = {ratio!r}"
            )

    @property
    def n_teeth(self) -> int:
        return int(round(self.bandwidth / self.delta))

    @property
    def pump_finesse(self) -> float:
        return 1.0 / (1.0 - 1.0 / self.finesse)

    @property
    def pump_tooth_width(self) -> float:
        return self.delta * (1.0 - 1.0 / self.finesse)


@dataclass(frozen=True)
class CombMeasurement:
    """Measured comb parameters: peak depth, finesse, background depth."""

    peak_od: float
    finesse: float
    background_od: float = 0.0

    def __post_init__(self):
        _require_finite(
            peak_od=self.peak_od, finesse=self.finesse, background_od=self.background_od
        )
        if self.peak_od <= 0:
            raise ValidationError(f"peak optical depth must be positive, got {self.peak_od}")
        if self.finesse <= 1:
            raise ValidationError(f"finesse must exceed 1, got {self.finesse}")
        if self.background_od < 0:
            raise ValidationError(f"background depth must be >= 0, got {self.background_od}")


@dataclass(frozen=True)
class DecayModel:
    """Exponential efficiency decay: eta(t) = eta0 * exp(-4 t / t2_afc)."""

    eta0: float
    t2_afc: float

    def __post_init__(self):
        _require_finite(eta0=self.eta0, t2_afc=self.t2_afc)
        if not 0.0 <= self.eta0 <= 1.0:
            raise ValidationError(f"eta0 must lie in [0, 1], got {self.eta0}")
        if self.t2_afc <= 0:
            raise ValidationError(f"coherence time must be positive, got {self.t2_afc}")


@dataclass(frozen=True)
class HoleDecayModel:
    """Double-exponential hole relaxation.

    d_rel(t) = amp_fast * exp(-t/t1_fast) + amp_slow * exp(-t/t1_slow),
    with t1_fast < t1_slow.
    """

    amp_fast: float
    amp_slow: float
    t1_fast: float
    t1_slow: float

    def __post_init__(self):
        _require_finite(
            amp_fast=self.amp_fast,
            amp_slow=self.amp_slow,
            t1_fast=self.t1_fast,
            t1_slow=self.t1_slow,
        )
        if self.t1_fast <= 0 or self.t1_slow <= 0:
            raise ValidationError("lifetimes must be positive")
        if not self.t1_fast < self.t1_slow:
            raise ValidationError(
                f"fast lifetime must be shorter than slow one, got "
                f"{self.t1_fast} >= {self.t1_slow}"
            )


@dataclass(eq=False)
class SpectrumGrid:
    """Frequency axis with values, plus an optional per-subset column.

    Units are whatever the producer used (Hz for synthesis targets, MHz
    for pumping spectra); the two never mix on one grid.
    """

    frequencies: np.ndarray
    values: np.ndarray
    subset_values: np.ndarray | None = None

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.frequencies.shape != self.values.shape:
            raise ValidationError("frequency axis and values must have equal shape")
        if self.subset_values is not None:
            self.subset_values = np.asarray(self.subset_values, dtype=float)
            if self.subset_values.shape != self.frequencies.shape:
                raise ValidationError("subset column must match the frequency axis")


def mean_optical_depth(d, F):
    """Mean depth of the comb, d/F."""
    _require_finite(d=d, F=F)
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValidationError("peak depth must be >= 0")
    if np.any(np.asarray(F) <= 0):
        raise ValidationError("finesse must be positive")
    out = d / F
    return float(out) if out.ndim == 0 else out


def afc_efficiency(d, F):
    """Echo efficiency (d/F)^2 exp(-d/F) sinc^2(pi/F) for finesse F > 1.

    Uses the unnormalized sinc, see module docstring. Raises instead of
    clamping if a result ever leaves [0, 1); that would indicate a
    modeling mistake, not a quantity to silence.
    """
    _require_finite(d=d, F=F)
    if np.any(np.asarray(d) < 0):
        raise ValidationError("peak depth must be >= 0")
    if np.any(np.asarray(F) <= 1):
        raise ValidationError(f"finesse must exceed 1, got {F!r}")
    dt = np.asarray(d, dtype=float) / np.asarray(F, dtype=float)
    eta = dt**2 * np.exp(-dt) * _sinc(np.pi / np.asarray(F, dtype=float)) ** 2
    if np.any(eta > 1.0) or np.any(eta < 0.0):
        raise ValidationError(f"efficiency left [0, 1): {eta!r}")
    return float(eta) if eta.ndim == 0 else eta


def afc_efficiency_with_background(d, F, d0):
    """Echo efficiency reduced by a residual background depth d0."""
    _require_finite(d0=d0)
    if np.any(np.asarray(d0) < 0):
        raise ValidationError("background depth must be >= 0")
    out = afc_efficiency(d, F) * np.exp(-np.asarray(d0, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def optimal_finesse(d):
    """Finesse maximizing the echo efficiency at fixed depth d:
    F_opt = pi / arctan(2 pi / d)."""
    _require_finite(d=d)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValidationError("peak depth must be positive to optimize finesse")
    out = np.pi / np.arctan(2.0 * np.pi / d)
    return float(out) if out.ndim == 0 else out


def efficiency_decay(storage_time, model: DecayModel, delta=None):
    """Efficiency after a storage time t: eta0 * exp(-4 t / t2_afc).

    The storage time equals one tooth-spacing period 1/delta; if
    ``delta`` (Hz) is passed as well, the pair is checked for
    consistency rather than trusted.
    """
    _require_finite(storage_time=storage_time)
    t = np.asarray(storage_time, dtype=float)
    if np.any(t < 0):
        raise ValidationError("storage time must be >= 0")
    if delta is not None:
        _require_finite(delta=delta)
        if np.any(np.abs(t * np.asarray(delta, dtype=float) - 1.0) > 1e-6):
            raise ValidationError(
                "storage time and tooth spacing are inconsistent; expected "
                "storage_time = 1/delta"
            )
    out = model.eta0 * np.exp(-4.0 * t / model.t2_afc)
    return float(out) if out.ndim == 0 else out


def hole_decay(t, model: HoleDecayModel):
    """Relative hole/anti-hole depth after a delay t."""
    _require_finite(t=t)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("delay must be >= 0")
    out = model.amp_fast * np.exp(-t / model.t1_fast) + model.amp_slow * np.exp(
        -t / model.t1_slow
    )
    return float(out) if out.ndim == 0 else out


def target_psd(spec: CombSpec, grid) -> SpectrumGrid:
    """Ideal pump power spectral density on a frequency grid (Hz).

    One per period: a unit-height band of width ``pump_tooth_width``
    starting at each multiple of ``delta``, zero elsewhere and zero
    outside [0, bandwidth). Band edges are resolved half-open, each
    band holds the bins [n*delta, n*delta + width); the defining rect()
    is zero exactly at its edge points, a measure-zero distinction that
    this convention fixes so that bands and gaps tile the grid exactly.

    The grid must be uniform, with a spacing that divides both the
    tooth spacing and the pump band width, and must sit on the integer
    lattice of that spacing; anything else would smear band edges
    silently and is rejected instead.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValidationError("grid must be a 1-D axis with at least two points")
    _require_finite(grid=grid)
    step = grid[1] - grid[0]
    if step <= 0 or np.max(np.abs(np.diff(grid) - step)) > _ALIGN_RTOL * step:
        raise ValidationError("grid must be uniformly increasing")

    def bins(quantity, name):
        n = quantity / step
        if abs(n - round(n)) > 1e-6 * max(abs(n), 1.0):
            raise ValidationError(
                f"grid spacing {step} Hz does not divide {name} ({quantity} Hz); "
                "band edges would fall between bins"
            )
        return int(round(n))

    per_period = bins(spec.delta, "the tooth spacing")
    per_band = bins(spec.pump_tooth_width, "the pump band width")
    k = grid / step
    if np.max(np.abs(k - np.round(k))) > 1e-6:
        raise ValidationError("grid offset must sit on the integer lattice of its spacing")
    k = np.round(k).astype(np.int64)

    inside = (k >= 0) & (k < spec.n_teeth * per_period)
    values = (inside & (np.mod(k, per_period) < per_band)).astype(float)
    return SpectrumGrid(frequencies=grid, values=values)
