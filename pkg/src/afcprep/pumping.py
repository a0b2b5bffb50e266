"""Rate-equation optical pumping across the inhomogeneous profile.

The ensemble is a grid of frequency classes (detuning delta of the
reference line from zero), each carrying four ground-state populations.
A pump pulse is a flat-top spectral band: every transition falling
inside the band is driven at the configured rate times its relative
strength. Excited-state population is eliminated adiabatically, pumped
population redistributes over the ground states within the same step
via the emission branching table.

Class cleaning (CC) drives one transition per ground state of the
selected classes; spin polarization (SP) drops the band on the probed
line and funnels everything into the reference ground state. A class
counts as selected when the pump bands hit exactly the four intended
transitions and nothing else; classes picking up any additional
resonance, which first happens when the scan width reaches the
splitting between the two upper excited states, fall out of the
selected set and show up as parasitic absorption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .comb import SpectrumGrid
from .errors import ValidationError
from .levels import (
    POLARIZATIONS,
    LevelSystem,
    emission_branching,
    polarization_strengths,
    transition_table,
)

__all__ = [
    "DEFAULT_CC_CENTERS",
    "PumpPulse",
    "PumpSequence",
    "ClassEnsemble",
    "RelaxationParams",
    "BandwidthScanPoint",
    "BandwidthScanResult",
    "initial_ensemble",
    "apply_pulse",
    "apply_relaxation",
    "run_sequence",
    "spectrum_from_ensemble",
    "selected_class_mask",
    "cc_sequence",
    "sp_sequence",
    "bandwidth_limit_scan",
]

# Pump band centers (MHz): one transition per ground state of the
# selected class. The first is the probed line itself.
DEFAULT_CC_CENTERS = (0.0, 3025.5, 5359.7, 6913.7)

_THERMAL = 0.25
_SUM_TOL = 1e-9
_BAND_TOL = 1e-9  # MHz, inclusive band edges
_CENTER_MATCH_TOL = 0.1  # MHz, pump centers must sit on real transitions


@dataclass(frozen=True)
class PumpPulse:
    """One flat-top scanned pump band."""

    center: float
    scan_width: float
    duration: float
    rate: float
    polarization: str = "diag45"

    def __post_init__(self):
        if not (np.isfinite(self.scan_width) and self.scan_width > 0):
            raise ValidationError(f"scan width must be positive, got {self.scan_width}")
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValidationError(f"duration must be positive, got {self.duration}")
        if not (np.isfinite(self.rate) and self.rate >= 0):
            raise ValidationError(f"rate must be non-negative, got {self.rate}")
        if not np.isfinite(self.center):
            raise ValidationError(f"center must be finite, got {self.center}")
        if self.polarization not in POLARIZATIONS:
            raise ValidationError(
                f"unknown polarization {self.polarization!r}, expected one of {POLARIZATIONS}"
            )


@dataclass(frozen=True)
class PumpSequence:
    """Ordered pulses cycled a whole number of times.

    Zero repetitions is allowed and makes run_sequence the identity,
    which is the natural encoding of an unpumped reference.
    """

    pulses: tuple[PumpPulse, ...]
    repetitions: int = 1

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        if not self.pulses:
            raise ValidationError("sequence needs at least one pulse")
        if int(self.repetitions) != self.repetitions or self.repetitions < 0:
            raise ValidationError(f"repetitions must be an integer >= 0, got {self.repetitions}")

    @property
    def total_duration(self) -> float:
        return self.repetitions * sum(p.duration for p in self.pulses)


@dataclass(eq=False)
class ClassEnsemble:
    """Detuning grid, spectral weights, and per-class populations."""

    detunings: np.ndarray
    weights: np.ndarray
    populations: np.ndarray

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.populations = np.asarray(self.populations, dtype=float)
        n = self.detunings.size
        if self.detunings.ndim != 1 or n < 1:
            raise ValidationError("detunings must form a non-empty 1-D grid")
        if self.weights.shape != (n,) or self.populations.shape != (n, 4):
            raise ValidationError(
                f"weights must have shape ({n},) and populations ({n}, 4)"
            )
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValidationError("weights must be finite and non-negative")
        if np.any(self.populations < 0):
            raise ValidationError("populations must be non-negative")
        err = np.max(np.abs(self.populations.sum(axis=1) - 1.0))
        if err > _SUM_TOL:
            raise ValidationError(
                f"per-class populations must sum to 1 within {_SUM_TOL}, "
                f"worst deviation {err:.2e}"
            )

    @property
    def n_classes(self) -> int:
        return self.detunings.size


@dataclass(frozen=True)
class RelaxationParams:
    """Two-component thermalization toward equal ground populations."""

    rate_fast: float
    rate_slow: float
    fraction_fast: float

    def __post_init__(self):
        if not (np.isfinite(self.rate_fast) and self.rate_fast > 0):
            raise ValidationError(f"rate_fast must be positive, got {self.rate_fast}")
        if not (np.isfinite(self.rate_slow) and self.rate_slow > 0):
            raise ValidationError(f"rate_slow must be positive, got {self.rate_slow}")
        if not (0.0 <= self.fraction_fast <= 1.0):
            raise ValidationError(
                f"fraction_fast must lie in [0, 1], got {self.fraction_fast}"
            )


def initial_ensemble(
    levels: LevelSystem, grid_step: float = 1.0, span: float = 6000.0
) -> ClassEnsemble:
    """Thermal ensemble over a symmetric detuning grid.

    The span must cover several inhomogeneous widths so that every
    class with non-negligible weight is represented; classes further
    out carry exponentially vanishing weight and are dropped. Weights
    are scaled so the unpumped spectrum peaks at the configured
    peak_od on the reference line (default line shape, probe along the
    strong axis).
    """
    if not (np.isfinite(grid_step) and grid_step > 0):
        raise ValidationError(f"grid step must be positive, got {grid_step}")
    if not np.isfinite(span) or span < 4.0 * levels.inhom_fwhm:
        raise ValidationError(
            f"span must cover at least 4 inhomogeneous widths "
            f"({4.0 * levels.inhom_fwhm} MHz), got {span}"
        )
    half = math.floor(span / 2.0 / grid_step)
    if half < 1:
        raise ValidationError("degenerate grid: span below one grid step")
    detunings = np.arange(-half, half + 1) * grid_step
    weights = np.exp(-4.0 * math.log(2.0) * (detunings / levels.inhom_fwhm) ** 2)
    populations = np.full((detunings.size, 4), _THERMAL)
    ens = ClassEnsemble(detunings=detunings, weights=weights, populations=populations)

    # the probe must span the line-shape kernel support, otherwise the
    # neighbor-class tail sum is truncated and the peak comes out low
    probe = np.arange(-520, 521) * grid_step
    od = spectrum_from_ensemble(ens, levels, "D2", probe)
    scale = levels.peak_od / float(od.values.max())
    return ClassEnsemble(
        detunings=detunings, weights=weights * scale, populations=populations
    )


def _band_rates(
    ensemble: ClassEnsemble, pulse: PumpPulse, levels: LevelSystem
) -> np.ndarray:
    """Per-class, per-transition pump rates (C, 4, 4) for one pulse."""
    nu = transition_table(levels)
    strengths = polarization_strengths(levels, pulse.polarization)
    pos = nu[None, :, :] + ensemble.detunings[:, None, None]
    inband = np.abs(pos - pulse.center) <= 0.5 * pulse.scan_width + _BAND_TOL
    return pulse.rate * strengths[None, :, :] * inband


def apply_pulse(
    ensemble: ClassEnsemble, pulse: PumpPulse, levels: LevelSystem
) -> ClassEnsemble:
    """Deplete every resonant ground state and redistribute the flux.

    For each class, state g loses p_g (1 - exp(-R_g t)) with R_g the
    summed in-band rate over excited states; the outflux splits over
    excited channels in proportion to their rates and returns to the
    ground manifold through the emission branching table. Per-class
    population is conserved.
    """
    rates = _band_rates(ensemble, pulse, levels)
    total = rates.sum(axis=2)
    depleted = ensemble.populations * -np.expm1(-total * pulse.duration)
    safe = np.where(total > 0.0, total, 1.0)
    share = rates / safe[:, :, None]
    flux_e = np.einsum("cg,cge->ce", depleted, share)
    inflow = flux_e @ emission_branching(levels).T
    populations = ensemble.populations - depleted + inflow
    if np.any(populations < 0):
        worst = float(populations.min())
        raise ValidationError(
            f"pumping produced a negative population ({worst:.3e}); "
            "this indicates an internal bookkeeping bug"
        )
    return ClassEnsemble(
        detunings=ensemble.detunings, weights=ensemble.weights, populations=populations
    )


def apply_relaxation(
    ensemble: ClassEnsemble, params: RelaxationParams, dt: float
) -> ClassEnsemble:
    """Relax populations toward the thermal state for a time dt."""
    if not (np.isfinite(dt) and dt >= 0):
        raise ValidationError(f"dt must be non-negative, got {dt}")
    if dt == 0.0:
        return ClassEnsemble(
            detunings=ensemble.detunings,
            weights=ensemble.weights,
            populations=ensemble.populations.copy(),
        )
    decay = params.fraction_fast * math.exp(-params.rate_fast * dt) + (
        1.0 - params.fraction_fast
    ) * math.exp(-params.rate_slow * dt)
    populations = _THERMAL + (ensemble.populations - _THERMAL) * decay
    return ClassEnsemble(
        detunings=ensemble.detunings, weights=ensemble.weights, populations=populations
    )


def run_sequence(
    ensemble: ClassEnsemble,
    seq: PumpSequence,
    levels: LevelSystem,
    relax: RelaxationParams | None = None,
) -> ClassEnsemble:
    """Fold the sequence over the ensemble, cycling repetitions times.

    Relaxation during pumping is approximated sequentially: after each
    pulse the ensemble relaxes for that pulse's duration.
    """
    for _ in range(seq.repetitions):
        for pulse in seq.pulses:
            ensemble = apply_pulse(ensemble, pulse, levels)
            if relax is not None:
                ensemble = apply_relaxation(ensemble, relax, pulse.duration)
    return ensemble


def _deposit(
    grid: np.ndarray,
    step: float,
    positions: np.ndarray,
    amplitudes: np.ndarray,
) -> np.ndarray:
    """Accumulate line strengths onto the grid with linear bin splitting."""
    out = np.zeros(grid.size)
    x = (positions - grid[0]) / step
    i0 = np.floor(x).astype(np.int64)
    frac = x - i0
    for idx, weight in ((i0, 1.0 - frac), (i0 + 1, frac)):
        ok = (idx >= 0) & (idx < grid.size)
        np.add.at(out, idx[ok], (amplitudes * weight)[ok])
    return out


def spectrum_from_ensemble(
    ensemble: ClassEnsemble,
    levels: LevelSystem,
    polarization: str,
    grid,
    subset=None,
    line_fwhm: float | None = None,
) -> SpectrumGrid:
    """Optical depth over a probe grid (MHz), optionally split by subset.

    OD(f) sums weight * population * strength over every class and
    transition, convolved with a unit-peak Lorentzian of the given FWHM
    (default one grid step; 0 requests bare nearest-bin deposition,
    which the bandwidth scan uses to keep band edges sharp).

    subset restricts the companion column to chosen classes: either a
    (low, high) detuning window or a boolean mask over classes. Lines
    falling outside the grid are simply not probed.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValidationError("probe grid must be 1-D with at least two points")
    step = grid[1] - grid[0]
    if step <= 0 or np.max(np.abs(np.diff(grid) - step)) > 1e-9 * step:
        raise ValidationError("probe grid must be uniformly increasing")
    if line_fwhm is None:
        line_fwhm = step
    if not (np.isfinite(line_fwhm) and line_fwhm >= 0):
        raise ValidationError(f"line FWHM must be non-negative, got {line_fwhm}")

    if subset is None:
        mask = None
    elif isinstance(subset, np.ndarray) and subset.dtype == bool:
        if subset.shape != (ensemble.n_classes,):
            raise ValidationError("subset mask must have one flag per class")
        mask = subset
    else:
        lo, hi = subset
        mask = (ensemble.detunings >= lo) & (ensemble.detunings <= hi)

    nu = transition_table(levels)
    strengths = polarization_strengths(levels, polarization)
    total = np.zeros(grid.size)
    chosen = np.zeros(grid.size) if mask is not None else None
    for g in range(4):
        amp = ensemble.weights * ensemble.populations[:, g]
        for e in range(4):
            if strengths[g, e] == 0.0:
                continue
            pos = nu[g, e] + ensemble.detunings
            line = strengths[g, e] * amp
            total += _deposit(grid, step, pos, line)
            if chosen is not None:
                total_sub = _deposit(grid, step, pos[mask], line[mask])
                chosen += total_sub

    if line_fwhm > 0:
        # unit-peak Lorentzian, truncated where it falls below ~1e-6
        radius = int(math.ceil(500.0 * line_fwhm / step))
        x = np.arange(-radius, radius + 1) * step
        kernel = 1.0 / (1.0 + (2.0 * x / line_fwhm) ** 2)

        def smear(dep):
            return np.convolve(dep, kernel, mode="full")[radius : radius + dep.size]

        total = smear(total)
        if chosen is not None:
            chosen = smear(chosen)
    return SpectrumGrid(frequencies=grid, values=total, subset_values=chosen)


def _inband_line_max(
    ensemble: ClassEnsemble,
    levels: LevelSystem,
    polarization: str,
    half_width: float,
    class_mask: np.ndarray | None = None,
) -> float:
    """Largest summed line strength at any one frequency inside a band.

    The band-limit metric treats lines as deltas: a line contributes
    only at its own position, and lines sharing a position add up.
    Grid deposition would instead smear just-outside lines onto the
    edge bins, polluting the metric with half-bin leakage.
    """
    nu = transition_table(levels)
    strengths = polarization_strengths(levels, polarization)
    pos = (nu[None, :, :] + ensemble.detunings[:, None, None]).ravel()
    amp = (
        ensemble.weights[:, None, None]
        * ensemble.populations[:, :, None]
        * strengths[None, :, :]
    ).ravel()
    keep = np.abs(pos) <= half_width + _BAND_TOL
    if class_mask is not None:
        keep &= np.repeat(class_mask, 16)
    if not keep.any():
        return 0.0
    # group lines coincident to 1e-6 MHz
    _, inverse = np.unique(np.round(pos[keep] * 1e6), return_inverse=True)
    return float(np.bincount(inverse, weights=amp[keep]).max())


def _intended_pairs(levels: LevelSystem, centers) -> list[tuple[int, int]]:
    nu = transition_table(levels)
    pairs = []
    for c in centers:
        dist = np.abs(nu - c)
        g, e = np.unravel_index(int(np.argmin(dist)), nu.shape)
        if dist[g, e] > _CENTER_MATCH_TOL:
            raise ValidationError(
                f"pump center {c} MHz is {dist[g, e]:.2f} MHz away from the "
                "nearest transition; centers must sit on real transitions"
            )
        pairs.append((int(g), int(e)))
    if len(set(pairs)) != len(pairs):
        raise ValidationError("pump centers must address distinct transitions")
    return pairs


def selected_class_mask(
    levels: LevelSystem,
    ensemble: ClassEnsemble,
    centers,
    scan_width: float,
) -> np.ndarray:
    """Classes resonant with exactly the intended transition per band.

    The intended transition of each band is the one its center sits on.
    A class is selected when every band hits its intended transition
    and no band hits anything else; an extra resonance means the class
    is excited outside the four-transition scheme and cannot be counted
    as part of the prepared ensemble.
    """
    pairs = _intended_pairs(levels, centers)
    nu = transition_table(levels)
    pos = nu[None, :, :] + ensemble.detunings[:, None, None]
    ok = np.ones(ensemble.n_classes, dtype=bool)
    for center, (g, e) in zip(centers, pairs):
        inband = np.abs(pos - center) <= 0.5 * scan_width + _BAND_TOL
        ok &= inband[:, g, e]
        inband[:, g, e] = False
        ok &= ~inband.any(axis=(1, 2))
    return ok


def cc_sequence(
    scan_width: float,
    centers=DEFAULT_CC_CENTERS,
    duration: float = 2e-3,
    rate: float = 5e3,
    polarization: str = "diag45",
    repetitions: int = 30,
) -> PumpSequence:
    """Class cleaning: one band per ground state, probed line included."""
    pulses = [
        PumpPulse(center=c, scan_width=scan_width, duration=duration, rate=rate,
                  polarization=polarization)
        for c in centers
    ]
    return PumpSequence(pulses=pulses, repetitions=repetitions)


def sp_sequence(
    scan_width: float,
    centers=DEFAULT_CC_CENTERS,
    duration: float = 2e-3,
    rate: float = 5e3,
    polarization: str = "diag45",
    repetitions: int = 50,
    probe_center: float = 0.0,
) -> PumpSequence:
    """Spin polarization: the cleaning bands minus the probed one."""
    pulses = [
        PumpPulse(center=c, scan_width=scan_width, duration=duration, rate=rate,
                  polarization=polarization)
        for c in centers
        if abs(c - probe_center) > _CENTER_MATCH_TOL
    ]
    if len(pulses) == len(centers):
        raise ValidationError("no pump center matches the probed line")
    return PumpSequence(pulses=pulses, repetitions=repetitions)


@dataclass(frozen=True)
class BandwidthScanPoint:
    bandwidth: float
    parasitic_od: float
    parasitic_rel: float


@dataclass(frozen=True)
class BandwidthScanResult:
    """Per-bandwidth parasitic absorption and the first threshold crossing."""

    points: tuple[BandwidthScanPoint, ...]
    knee: float | None
    threshold_rel: float
    reference_od: float


def bandwidth_limit_scan(
    levels: LevelSystem,
    cc_centers=DEFAULT_CC_CENTERS,
    bandwidths=tuple(range(200, 361, 4)),
    *,
    grid_step: float = 1.0,
    span: float = 6000.0,
    duration: float = 2e-3,
    rate: float = 5e3,
    polarization: str = "diag45",
    probe_polarization: str = "D2",
    cc_repetitions: int = 30,
    sp_repetitions: int = 50,
    threshold_rel: float = 0.10,
    relax: RelaxationParams | None = None,
) -> BandwidthScanResult:
    """Parasitic in-band absorption versus preparation bandwidth.

    For each scan width W the full cleaning plus polarization sequence
    runs, and the metric is the worst in-band excess of the total
    absorption over the selected-class absorption, relative to the
    unpumped peak, with lines treated as deltas at their own positions
    (total minus selected is then just the non-selected classes' worst
    in-band line stack). The knee is the smallest W whose metric
    exceeds the threshold; it lands at the upper excited-state
    splitting, where window classes first pick up a fifth resonance
    and drop out of the selected set.
    """
    bw = [float(w) for w in bandwidths]
    if not bw:
        raise ValidationError("need at least one bandwidth to scan")
    if any(w <= 0 for w in bw):
        raise ValidationError("bandwidths must be positive")

    base = initial_ensemble(levels, grid_step=grid_step, span=span)
    reference = _inband_line_max(base, levels, probe_polarization, 5.0 * grid_step)

    points = []
    for w in sorted(bw):
        cc = cc_sequence(w, cc_centers, duration, rate, polarization, cc_repetitions)
        sp = sp_sequence(w, cc_centers, duration, rate, polarization, sp_repetitions)
        ens = run_sequence(base, cc, levels, relax)
        ens = run_sequence(ens, sp, levels, relax)
        selected = selected_class_mask(levels, ens, cc_centers, w)
        parasitic = _inband_line_max(
            ens, levels, probe_polarization, 0.5 * w, class_mask=~selected
        )
        points.append(
            BandwidthScanPoint(
                bandwidth=w,
                parasitic_od=parasitic,
                parasitic_rel=parasitic / reference,
            )
        )
    knee = next((p.bandwidth for p in points if p.parasitic_rel > threshold_rel), None)
    return BandwidthScanResult(
        points=tuple(points),
        knee=knee,
        threshold_rel=threshold_rel,
        reference_od=reference,
    )
