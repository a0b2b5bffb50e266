"""Comb-burning waveform synthesis and signal metrics.

Four ways to realize a signal whose power spectral density is the pump
comb of ``target_psd``:

``freq-domain``
    Build the spectrum bin by bin (unit magnitude on pump-band bins,
    a prescribed spectral phase) and take one inverse FFT. The on-grid
    PSD is exact by construction and the cost does not depend on the
    number of teeth.
``circular-permutation``
    Sum per-tooth linear chirps in the time domain, each circularly
    delayed inside the record so neighboring teeth decorrelate. Cost
    grows linearly with the number of teeth; kept as the reference
    baseline for the scaling comparison.
``dirac-sum``
    All teeth in phase. The tooth sum collapses to a Dirichlet kernel,
    so the envelope is a pulse train with period 1/delta and the crest
    factor grows as sqrt(N).
``exact-envelope``
    Constant-amplitude signal whose instantaneous frequency sweeps the
    band once per comb period (fast sawtooth) while drifting by one
    pump band width over the record (slow ramp). Crest factor is 1 by
    construction; the PSD is only approximate near band and tooth
    edges.

Spectral grid policy: a record of M = round(T * f_s) samples has bin
spacing f_s / M, which is exactly 1/T_eff for the realized duration
T_eff = M / f_s. The tooth spacing must land on whole bins (rejected
otherwise, silent smearing would corrupt the comb); the pump band
width is snapped to the nearest whole bin count and the realized width
is reported, so synthesis and metrics always share the same mask.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .comb import CombSpec, SpectrumGrid
from .errors import ResourceLimitError, ValidationError

__all__ = [
    "METHODS",
    "PHASE_CONSTRUCTORS",
    "SynthParams",
    "Signal",
    "SignalMetrics",
    "select_phase_constructor",
    "two_scale_phase",
    "schroeder_integral_phase",
    "synth_freq_domain",
    "synth_circular_permutation",
    "synth_dirac_sum",
    "synth_exact_envelope",
    "synthesize",
    "signal_metrics",
]

METHODS = ("freq-domain", "circular-permutation", "dirac-sum", "exact-envelope")

# "zero" is a degenerate diagnostic constructor: it reproduces the
# in-phase (Dirac-comb-like) behavior inside the freq-domain method.
PHASE_CONSTRUCTORS = ("two-scale", "schroeder-integral", "zero")

# Below roughly this tooth count the integral phase yields the lower
# crest factor; above it the two-scale construction wins.
DEFAULT_CONSTRUCTOR_CROSSOVER = 100

MAX_WAVEFORM_BYTES_ENV = "AFCPREP_MAX_WAVEFORM_BYTES"
_DEFAULT_MAX_BYTES = 4 * 1024**3
_ALIGN_RTOL = 1e-9


def select_phase_constructor(n_teeth: int, crossover: int = DEFAULT_CONSTRUCTOR_CROSSOVER) -> str:
    """Pick the phase constructor expected to minimize crest factor."""
    if n_teeth < 1:
        raise ValidationError(f"tooth count must be >= 1, got {n_teeth}")
    return "schroeder-integral" if n_teeth <= crossover else "two-scale"


@dataclass(frozen=True)
class SynthParams:
    """Synthesis request: comb geometry plus record and method choices.

    sign flips the chirp direction of every constructor. envelope is an
    optional per-tooth amplitude profile (length n_teeth) used as a
    precompensation of the pump band magnitudes; it is honored by the
    freq-domain method only, where the coarse tooth phases are then
    recomputed from the weighted tooth powers instead of the uniform
    quadratic rule.
    """

    comb: CombSpec
    duration: float
    sample_rate: float
    method: str = "freq-domain"
    phase_constructor: str = "two-scale"
    sign: int = 1
    envelope: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.phase_constructor not in PHASE_CONSTRUCTORS:
            raise ValidationError(
                f"unknown phase constructor {self.phase_constructor!r}, "
                f"expected one of {PHASE_CONSTRUCTORS}"
            )
        if self.sign not in (1, -1):
            raise ValidationError(f"sign must be +1 or -1, got {self.sign!r}")
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValidationError(f"duration must be positive, got {self.duration}")
        if not (np.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")
        if self.sample_rate <= self.comb.bandwidth:
            raise ValidationError(
                "sample rate must exceed the comb bandwidth for complex baseband, "
                f"got {self.sample_rate} <= {self.comb.bandwidth}"
            )
        if self.duration * self.comb.delta < 1.0 - _ALIGN_RTOL:
            raise ValidationError(
                "record too short: need duration * delta >= 1 so the spectral "
                "grid resolves single teeth"
            )
        if self.n_samples < self.comb.n_teeth:
            raise ValidationError(
                f"{self.n_samples} samples cannot carry {self.comb.n_teeth} teeth"
            )
        if self.envelope is not None:
            env = np.asarray(self.envelope, dtype=float)
            if env.shape != (self.comb.n_teeth,):
                raise ValidationError(
                    f"envelope must have one weight per tooth ({self.comb.n_teeth})"
                )
            if not np.all(np.isfinite(env)) or np.any(env <= 0):
                raise ValidationError("envelope weights must be finite and positive")
            object.__setattr__(self, "envelope", tuple(float(v) for v in env))
            if self.method != "freq-domain":
                raise ValidationError("envelope precompensation requires the freq-domain method")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


@dataclass(eq=False)
class Signal:
    """Peak-normalized complex baseband record with its provenance.

    peak_norm is the pre-normalization peak amplitude (the factor the
    raw construction was divided by); sigma_realized is the pump band
    width actually realized on the spectral grid (Hz).
    """

    samples: np.ndarray
    sample_rate: float
    metadata: SynthParams
    peak_norm: float = 1.0
    sigma_realized: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValidationError("samples must form a non-empty 1-D record")
        if not np.all(np.isfinite(self.samples.view(float))):
            raise ValidationError("samples must be finite")
        if self.samples.size != self.metadata.n_samples:
            raise ValidationError(
                f"record length {self.samples.size} does not match the requested "
                f"round(T*f_s) = {self.metadata.n_samples}"
            )

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


@dataclass(frozen=True)
class SignalMetrics:
    """Crest factor and PSD partition of one record.

    inband_ripple is max/min PSD over the pump-band bins (1 for a
    perfectly flat comb); oob_energy_fraction is the energy landing
    outside those bins divided by the total.
    """

    crest_factor: float
    rms_power: float
    peak_amplitude: float
    oob_energy_fraction: float
    inband_ripple: float

    def __post_init__(self):
        # CF >= 1 holds exactly; allow summation round-off only.
        if self.crest_factor < 1.0 - 1e-9:
            raise ValidationError(f"crest factor below 1: {self.crest_factor!r}")


@dataclass(frozen=True)
class _Grid:
    n_samples: int
    bins_per_tooth: int
    pump_bins: int
    sigma_realized: float
    duration_realized: float


def _max_bytes() -> int:
    raw = os.environ.get(MAX_WAVEFORM_BYTES_ENV)
    if raw is None:
        return _DEFAULT_MAX_BYTES
    try:
        return int(raw)
    except ValueError as exc:
        raise ValidationError(
            f"{MAX_WAVEFORM_BYTES_ENV} must be an integer byte count, got {raw!r}"
        ) from exc


def _comb_grid(comb: CombSpec, n_samples: int, sample_rate: float) -> _Grid:
    """Snap the comb onto the spectral grid of an M-sample record."""
    cap = _max_bytes()
    estimate = 64 * n_samples  # a few complex128 working arrays
    if estimate > cap:
        raise ResourceLimitError(
            f"synthesis of {n_samples} samples needs about {estimate} bytes of "
            f"working memory, above the cap of {cap}; raise "
            f"{MAX_WAVEFORM_BYTES_ENV} to allow it"
        )
    df = sample_rate / n_samples
    a = comb.delta / df
    if abs(a - round(a)) > _ALIGN_RTOL * max(a, 1.0):
        raise ValidationError(
            f"tooth spacing {comb.delta} Hz is not a whole number of spectral "
            f"bins (bin = {df} Hz); choose duration and sample rate so that "
            "delta * duration is an integer"
        )
    a = int(round(a))
    if a * comb.n_teeth >= n_samples:
        raise ValidationError("comb band does not fit below the sampling bandwidth")
    m = int(round(comb.pump_tooth_width / df))
    m = min(max(m, 1), a - 1)
    return _Grid(
        n_samples=n_samples,
        bins_per_tooth=a,
        pump_bins=m,
        sigma_realized=m * df,
        duration_realized=n_samples / sample_rate,
    )


def _pump_mask(comb: CombSpec, n_samples: int, sample_rate: float) -> np.ndarray:
    g = _comb_grid(comb, n_samples, sample_rate)
    k = np.arange(n_samples)
    return (k < comb.n_teeth * g.bins_per_tooth) & (k % g.bins_per_tooth < g.pump_bins)


def two_scale_phase(f, comb: CombSpec, T: float):
    """Spectral phase separating tooth-level and intra-tooth time scales.

    In cycles,

        theta(f) / 2pi = n^2 / (2 N)  +  (f mod delta)^2 T / (2 sigma)

    with n the tooth index of f. The first term is constant across each
    tooth and spreads the tooth impulse train over one comb period; the
    second is delta-periodic and chirps each tooth band over the full
    record duration T.

    Parameters
    ----------
    f : float or array
        Frequency in Hz, 0 <= f < comb.bandwidth.
    comb : CombSpec
    T : float
        Record duration (s).

    Returns
    -------
    Phase in rad (same shape as f). Unbounded; only the fractional
    cycle count is physical.
    """
    if not (np.isfinite(T) and T > 0):
        raise ValidationError(f"duration must be positive, got {T}")
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValidationError("frequency must be finite")
    if np.any(f < 0) or np.any(f >= comb.bandwidth):
        raise ValidationError(
            f"frequency outside the comb band [0, {comb.bandwidth}) Hz"
        )
    q = f / comb.delta
    n = np.floor(q)
    # pull exact tooth boundaries back onto the tooth they start
    on_edge = np.isclose(q, np.round(q), rtol=0.0, atol=1e-9)
    n = np.where(on_edge, np.round(q), n)
    rem = np.where(on_edge, 0.0, f - n * comb.delta)
    coarse = n**2 / (2.0 * comb.n_teeth)
    fine = rem**2 * T / (2.0 * comb.pump_tooth_width)
    out = 2.0 * np.pi * (coarse + fine)
    return float(out) if out.ndim == 0 else out


def schroeder_integral_phase(psd: SpectrumGrid, T: float, sign: int = 1) -> np.ndarray:
    """Integral spectral phase whose group delay tracks cumulative power.

    theta(f) = sign * 2pi T * (double cumulative integral of u^2)
               / (integral of u^2)

    computed with two cumulative sums: the inner one uses half-bin
    midpoints, the outer one is exclusive. On an all-ones grid of M
    bins with T = 1/df this reduces exactly to theta_n = pi n^2 / M,
    the discrete periodic case.

    The second difference of the result is proportional to u^2, which
    is the testable fingerprint of the construction; the absolute and
    linear parts are conventions.
    """
    if sign not in (1, -1):
        raise ValidationError(f"sign must be +1 or -1, got {sign!r}")
    if not (np.isfinite(T) and T > 0):
        raise ValidationError(f"duration must be positive, got {T}")
    u2 = np.asarray(psd.values, dtype=float)
    freqs = np.asarray(psd.frequencies, dtype=float)
    if u2.ndim != 1 or u2.size < 2:
        raise ValidationError("psd must be a 1-D grid with at least two bins")
    if not np.all(np.isfinite(u2)) or np.any(u2 < 0):
        raise ValidationError("psd values must be finite and non-negative")
    total = u2.sum()
    if total <= 0:
        raise ValidationError("psd is identically zero, phase undefined")
    df = freqs[1] - freqs[0]
    if df <= 0 or np.max(np.abs(np.diff(freqs) - df)) > _ALIGN_RTOL * df:
        raise ValidationError("psd grid must be uniformly increasing")
    c = np.cumsum(u2)
    inner = c - 0.5 * u2  # sum over j < k plus half of bin k
    outer = np.concatenate(([0.0], np.cumsum(inner)[:-1]))
    return sign * 2.0 * np.pi * (T * df) * outer / total


def _schroeder_cycles_exact(on: np.ndarray) -> np.ndarray:
    """Fractional cycles of the integral phase for a 0/1 mask.

    Valid on the record's own spectral grid where T * df = 1. Doubled
    integer units keep the half-bin midpoint convention exact:
    cycles_n = DC_n / (2 S) with DC_n and S integers, reduced mod 2S.
    """
    ui = on.astype(np.int64)
    s = int(ui.sum())
    c = np.cumsum(ui)
    ic = 2 * c - ui  # twice the midpoint inner sum
    dc = np.concatenate(([0], np.cumsum(ic)[:-1]))
    return (dc % (2 * s)) / (2.0 * s)


def _coarse_cycles(weights: np.ndarray | None, n_teeth: int) -> np.ndarray:
    """Tooth-level phase in cycles, spreading teeth over one period.

    Flat weights reduce to the exact quadratic rule n^2 / (2N); then
    integer arithmetic avoids accumulating float error over many
    thousands of cycles.
    """
    if weights is None:
        n = np.arange(n_teeth, dtype=np.int64)
        return ((n * n) % (2 * n_teeth)) / (2.0 * n_teeth)
    w2 = np.asarray(weights, dtype=float) ** 2
    cdf = (np.cumsum(w2) - 0.5 * w2) / w2.sum()
    return np.concatenate(([0.0], np.cumsum(cdf)[:-1]))


def _build_spectrum(params: SynthParams, g: _Grid) -> np.ndarray:
    comb = params.comb
    n_teeth, a, m = comb.n_teeth, g.bins_per_tooth, g.pump_bins
    k = np.arange(n_teeth * a)
    tooth = k // a
    j = k % a
    on = j < m

    weights = None if params.envelope is None else np.asarray(params.envelope)
    if params.phase_constructor == "two-scale":
        coarse = _coarse_cycles(weights, n_teeth)[tooth]
        jj = j.astype(np.int64)
        fine = ((jj * jj) % (2 * m)) / (2.0 * m)
        cycles = coarse + fine
    elif params.phase_constructor == "schroeder-integral":
        if weights is None:
            cycles = _schroeder_cycles_exact(on)
        else:
            u2 = np.where(on, weights[tooth] ** 2, 0.0)
            freqs = k * (params.sample_rate / g.n_samples)
            theta = schroeder_integral_phase(
                SpectrumGrid(frequencies=freqs, values=u2), g.duration_realized, 1
            )
            cycles = theta / (2.0 * np.pi)
    else:  # zero
        cycles = np.zeros(k.size)

    amp = np.where(on, 1.0 if weights is None else weights[tooth], 0.0)
    spectrum = np.zeros(g.n_samples, dtype=np.complex128)
    # ifft turns a +quadratic spectral phase into a descending sweep, so
    # the constructor cycles enter negated: sign=+1 always chirps upward.
    spectrum[: k.size] = amp * np.exp(-1j * (2.0 * np.pi * params.sign) * cycles)
    return spectrum


def _as_signal(raw: np.ndarray, params: SynthParams, g: _Grid) -> Signal:
    peak = float(np.max(np.abs(raw)))
    if peak <= 0:
        raise ValidationError("constructed record is identically zero")
    return Signal(
        samples=raw / peak,
        sample_rate=params.sample_rate,
        metadata=params,
        peak_norm=peak,
        sigma_realized=g.sigma_realized,
    )


def synth_freq_domain(params: SynthParams) -> Signal:
    """One-iFFT synthesis with an exact on-grid PSD.

    Cost is one FFT of the full record regardless of tooth count. The
    magnitude spectrum equals the target comb to round-off, so the
    phase constructor changes only how the energy spreads in time.
    """
    g = _comb_grid(params.comb, params.n_samples, params.sample_rate)
    spectrum = _build_spectrum(params, g)
    return _as_signal(np.fft.ifft(spectrum), params, g)


def _golden_stride(n_teeth: int) -> int:
    """Co-prime stride closest to N / golden ratio."""
    if n_teeth == 1:
        return 1
    target = max(1, round(n_teeth / ((1 + math.sqrt(5)) / 2)))
    for offset in range(n_teeth):
        for k in (target - offset, target + offset):
            if 1 <= k < n_teeth and math.gcd(k, n_teeth) == 1:
                return k
    return 1


def synth_circular_permutation(params: SynthParams) -> Signal:
    """Per-tooth chirps summed in time with circularly permuted delays.

    Tooth n is delayed by ((n K) mod N) * T / N, K a fixed co-prime
    stride near N over the golden ratio, so adjacent teeth end up far
    apart in time. One roll plus one running-product tone update per
    tooth: cost is linear in N at fixed record length. Delays are
    rounded to whole samples; the schedule is a decorrelating
    permutation, not a calibrated one, which is all the scaling and
    crest-factor comparisons require.

    The base chirp is the band-limited single-tooth record (the same
    ifft the freq-domain method would produce for N=1), so each rolled
    and modulated copy occupies exactly its own tooth bins and the N=1
    case reproduces synth_freq_domain sample for sample.
    """
    if params.envelope is not None:
        raise ValidationError("envelope precompensation requires the freq-domain method")
    g = _comb_grid(params.comb, params.n_samples, params.sample_rate)
    comb = params.comb
    n_teeth = comb.n_teeth
    t = np.arange(g.n_samples) / params.sample_rate
    jj = np.arange(g.pump_bins, dtype=np.int64)
    base_spec = np.zeros(g.n_samples, dtype=np.complex128)
    base_spec[: g.pump_bins] = np.exp(
        -1j
        * (2.0 * np.pi * params.sign)
        * (((jj * jj) % (2 * g.pump_bins)) / (2.0 * g.pump_bins))
    )
    chirp = np.fft.ifft(base_spec)
    stride = _golden_stride(n_teeth)
    step = np.exp(2j * np.pi * comb.delta * t)
    tone = np.ones(g.n_samples, dtype=np.complex128)
    out = np.zeros(g.n_samples, dtype=np.complex128)
    for n in range(n_teeth):
        delay = round(((n * stride) % n_teeth) * g.n_samples / n_teeth)
        out += tone * np.roll(chirp, delay)
        if n + 1 < n_teeth:
            tone *= step
    return _as_signal(out, params, g)


def synth_dirac_sum(params: SynthParams) -> Signal:
    """In-phase sum of all tooth chirps, via the Dirichlet kernel.

    sum_n exp(2 pi i n delta t) = exp(i pi (N-1) delta t)
                                  * sin(pi N delta t) / sin(pi delta t)

    evaluated with the N cos(pi N x)/cos(pi x) limit where the
    denominator vanishes. The envelope is a pulse train of period
    1/delta with peak N, so RMS power at unit peak falls as 1/N.
    """
    if params.envelope is not None:
        raise ValidationError("envelope precompensation requires the freq-domain method")
    g = _comb_grid(params.comb, params.n_samples, params.sample_rate)
    comb = params.comb
    n_teeth = comb.n_teeth
    t = np.arange(g.n_samples) / params.sample_rate
    x = comb.delta * t
    num = np.sin(np.pi * n_teeth * x)
    den = np.sin(np.pi * x)
    near_zero = np.abs(den) < 1e-9
    ratio = np.where(
        near_zero,
        n_teeth * np.cos(np.pi * n_teeth * x) / np.where(near_zero, np.cos(np.pi * x), 1.0),
        num / np.where(near_zero, 1.0, den),
    )
    dirichlet = np.exp(1j * np.pi * (n_teeth - 1) * x) * ratio
    chirp = np.exp(
        1j * params.sign * np.pi * (g.sigma_realized / g.duration_realized) * t * t
    )
    return _as_signal(chirp * dirichlet, params, g)


def synth_exact_envelope(params: SynthParams) -> Signal:
    """Constant-amplitude record with the two-scale temporal phase.

    In cycles, with P = 1/delta one comb period,

        phi(t) = sigma t^2 / (2 T)
               + (bandwidth * delta / 2) * ((t mod P) - P/2)^2
               + floor(N/2) * delta * t

    The sawtooth instantaneous frequency sweeps the band once per
    period; the slow ramp drifts by one pump band width over the
    record; the last tone recenters the sweep onto [0, bandwidth).
    Crest factor is exactly 1; the price is PSD distortion at band
    and tooth edges. A negative sign conjugates the record and shifts
    it back onto the same band.
    """
    if params.envelope is not None:
        raise ValidationError("envelope precompensation requires the freq-domain method")
    g = _comb_grid(params.comb, params.n_samples, params.sample_rate)
    comb = params.comb
    t = np.arange(g.n_samples) / params.sample_rate
    period = 1.0 / comb.delta
    tau = np.mod(t, period) - 0.5 * period
    cycles = (
        0.5 * g.sigma_realized / g.duration_realized * t * t
        + 0.5 * comb.bandwidth * comb.delta * tau * tau
        + (comb.n_teeth // 2) * comb.delta * t
    )
    samples = np.exp(2j * np.pi * cycles)
    if params.sign < 0:
        shift = (comb.n_teeth - 1) * comb.delta + g.sigma_realized
        samples = np.conj(samples) * np.exp(2j * np.pi * shift * t)
    return Signal(
        samples=samples,
        sample_rate=params.sample_rate,
        metadata=params,
        peak_norm=1.0,
        sigma_realized=g.sigma_realized,
    )


_DISPATCH = {
    "freq-domain": synth_freq_domain,
    "circular-permutation": synth_circular_permutation,
    "dirac-sum": synth_dirac_sum,
    "exact-envelope": synth_exact_envelope,
}


def synthesize(params: SynthParams) -> Signal:
    """Run the method named in params.

    The phase constructor applies to the freq-domain method only; the
    other methods define their own temporal phase.
    """
    return _DISPATCH[params.method](params)


def signal_metrics(sig: Signal, comb: CombSpec) -> SignalMetrics:
    """Crest factor plus the PSD partition against the comb mask."""
    s = sig.samples
    if s.size < 2:
        raise ValidationError("need at least two samples for metrics")
    power = np.abs(s) ** 2
    peak = float(np.sqrt(power.max()))
    rms_power = float(power.mean())
    if rms_power <= 0:
        raise ValidationError("record is identically zero")
    psd = np.abs(np.fft.fft(s)) ** 2
    mask = _pump_mask(comb, sig.n_samples, sig.sample_rate)
    total = psd.sum()
    inband = psd[mask]
    return SignalMetrics(
        crest_factor=peak / math.sqrt(rms_power),
        rms_power=rms_power,
        peak_amplitude=peak,
        oob_energy_fraction=float(psd[~mask].sum() / total),
        inband_ripple=float(inband.max() / inband.min()),
    )
