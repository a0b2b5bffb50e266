"""Rate-equation pumping: conservation, saturation, spectra, bandwidth scan."""

import numpy as np
import pytest

from afcprep import (
    ClassEnsemble,
    PumpPulse,
    PumpSequence,
    RelaxationParams,
    ValidationError,
    apply_pulse,
    apply_relaxation,
    bandwidth_limit_scan,
    initial_ensemble,
    load_level_system,
    run_sequence,
    spectrum_from_ensemble,
)
from afcprep.pumping import (
    DEFAULT_CC_CENTERS,
    cc_sequence,
    selected_class_mask,
    sp_sequence,
)

LEVELS = load_level_system()


def small_ensemble(step=4.0, span=6000.0):
    return initial_ensemble(LEVELS, grid_step=step, span=span)


def test_initial_ensemble_thermal_and_symmetric():
    ens = small_ensemble()
    assert np.allclose(ens.populations, 0.25)
    assert np.allclose(ens.populations.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(ens.weights, ens.weights[::-1], rtol=1e-12)
    assert np.all(ens.weights >= 0)


def test_initial_ensemble_normalized_to_peak_od():
    ens = small_ensemble()
    probe = np.arange(-520, 521) * 4.0
    od = spectrum_from_ensemble(ens, LEVELS, "D2", probe)
    assert od.values.max() == pytest.approx(LEVELS.peak_od, rel=1e-9)


def test_zero_rate_pulse_is_identity():
    ens = small_ensemble()
    pulse = PumpPulse(center=0.0, scan_width=50.0, duration=1e-3, rate=0.0)
    out = apply_pulse(ens, pulse, LEVELS)
    assert np.array_equal(out.populations, ens.populations)


def test_pulse_conserves_per_class_population():
    ens = small_ensemble()
    rng = np.random.default_rng(20260814)
    for _ in range(40):
        pulse = PumpPulse(
            center=rng.uniform(-500, 7500),
            scan_width=rng.uniform(10, 400),
            duration=10 ** rng.uniform(-4, -2),
            rate=10 ** rng.uniform(2, 5),
            polarization=("D2", "b", "diag45")[rng.integers(3)],
        )
        ens = apply_pulse(ens, pulse, LEVELS)
        assert np.max(np.abs(ens.populations.sum(axis=1) - 1.0)) < 1e-9
        assert np.all(ens.populations >= 0)


def test_saturated_sp_polarizes_the_zero_class():
    # three pump bands, the probed line left out: everything funnels
    # into the reference ground state of the resonant class
    ens = ClassEnsemble(
        detunings=np.array([0.0]),
        weights=np.array([1.0]),
        populations=np.full((1, 4), 0.25),
    )
    seq = sp_sequence(250.0, repetitions=50)
    out = run_sequence(ens, seq, LEVELS)
    assert out.populations[0, 3] > 0.99
    assert out.populations[0, 3] > 0.9999999


def test_relaxation_identity_and_thermal_limits():
    ens = small_ensemble()
    ens = apply_pulse(
        ens, PumpPulse(center=0.0, scan_width=100.0, duration=2e-3, rate=5e3), LEVELS
    )
    params = RelaxationParams(rate_fast=1 / 0.370, rate_slow=1 / 4.7, fraction_fast=0.6)
    same = apply_relaxation(ens, params, 0.0)
    assert np.array_equal(same.populations, ens.populations)
    thermal = apply_relaxation(ens, params, 1e6)
    assert np.allclose(thermal.populations, 0.25, atol=1e-12)
    # functional style: the input ensemble is untouched
    before = ens.populations.copy()
    apply_relaxation(ens, params, 1.0)
    assert np.array_equal(ens.populations, before)


def test_relaxation_is_the_two_exponential_mix():
    params = RelaxationParams(rate_fast=2.0, rate_slow=0.1, fraction_fast=0.7)
    ens = ClassEnsemble(
        detunings=np.array([0.0]),
        weights=np.array([1.0]),
        populations=np.array([[0.0, 0.0, 0.0, 1.0]]),
    )
    for dt in (0.05, 0.5, 3.0):
        out = apply_relaxation(ens, params, dt)
        decay = 0.7 * np.exp(-2.0 * dt) + 0.3 * np.exp(-0.1 * dt)
        assert out.populations[0, 3] == pytest.approx(0.25 + 0.75 * decay, rel=1e-12)


def test_run_sequence_zero_repetitions_is_identity():
    ens = small_ensemble()
    seq = PumpSequence(
        pulses=(PumpPulse(center=0.0, scan_width=50.0, duration=1e-3, rate=5e3),),
        repetitions=0,
    )
    out = run_sequence(ens, seq, LEVELS)
    assert np.array_equal(out.populations, ens.populations)


def test_sequence_validation():
    with pytest.raises(ValidationError):
        PumpSequence(pulses=())
    with pytest.raises(ValidationError):
        PumpSequence(
            pulses=(PumpPulse(center=0.0, scan_width=1.0, duration=1e-3, rate=1.0),),
            repetitions=-1,
        )
    with pytest.raises(ValidationError):
        PumpPulse(center=0.0, scan_width=-5.0, duration=1e-3, rate=1.0)
    with pytest.raises(ValidationError):
        PumpPulse(center=0.0, scan_width=5.0, duration=1e-3, rate=1.0, polarization="x")


def test_unpumped_reference_line_is_class_pure():
    # the low-frequency peak is dominated by one frequency class
    ens = small_ensemble()
    selected = selected_class_mask(LEVELS, ens, DEFAULT_CC_CENTERS, 50.0)
    grid = np.arange(-40, 41) * 4.0
    od = spectrum_from_ensemble(ens, LEVELS, "D2", grid, subset=selected)
    k0 = np.argmin(np.abs(grid))
    assert od.subset_values[k0] / od.values[k0] > 0.8


def test_pumping_raises_od_and_opens_windows():
    ens = small_ensemble()
    width = 50.0
    pumped = run_sequence(ens, cc_sequence(width, repetitions=30), LEVELS)
    pumped = run_sequence(pumped, sp_sequence(width, repetitions=50), LEVELS)
    grid = np.arange(-200, 7201) * 1.0
    before = spectrum_from_ensemble(ens, LEVELS, "D2", grid)
    after = spectrum_from_ensemble(pumped, LEVELS, "D2", grid)
    k0 = np.argmin(np.abs(grid))
    assert after.values[k0] > before.values[k0]
    for center in DEFAULT_CC_CENTERS[1:]:
        sel = np.abs(grid - center) <= 0.4 * width
        assert after.values[sel].max() < 0.10 * before.values[sel].max()


def test_selected_class_mask_rejects_extra_resonances():
    ens = small_ensemble(step=1.0)
    narrow = selected_class_mask(LEVELS, ens, DEFAULT_CC_CENTERS, 50.0)
    k0 = np.argmin(np.abs(ens.detunings))
    assert narrow[k0]
    # past the upper-excited splitting every class picks up a second line
    wide = selected_class_mask(LEVELS, ens, DEFAULT_CC_CENTERS, 2 * 300.0)
    assert not wide.any()
    assert narrow.sum() > wide.sum()


def test_bandwidth_scan_finds_the_knee():
    scan = bandwidth_limit_scan(
        LEVELS, bandwidths=(280.0, 284.0, 288.0, 292.0), grid_step=1.0
    )
    assert scan.knee == pytest.approx(288.0)
    assert scan.reference_od == pytest.approx(0.5417, abs=2e-3)
    rel = {p.bandwidth: p.parasitic_rel for p in scan.points}
    assert rel[284.0] < 0.10 < rel[288.0]


def test_bandwidth_scan_no_knee_below_limit():
    scan = bandwidth_limit_scan(LEVELS, bandwidths=(250.0, 270.0), grid_step=1.0)
    assert scan.knee is None
    assert all(p.parasitic_rel < 0.10 for p in scan.points)
