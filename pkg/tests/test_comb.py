"""Closed-form comb figures of merit."""

import numpy as np
import pytest

from afcprep import (
    CombSpec,
    DecayModel,
    HoleDecayModel,
    ValidationError,
    afc_efficiency,
    afc_efficiency_with_background,
    efficiency_decay,
    hole_decay,
    mean_optical_depth,
    optimal_finesse,
    target_psd,
)


def test_efficiency_matches_closed_form():
    rng = np.random.default_rng(20260814)
    for _ in range(200):
        d = rng.uniform(0.05, 8.0)
        f = rng.uniform(1.05, 12.0)
        dt = d / f
        want = dt**2 * np.exp(-dt) * np.sinc(1.0 / f) ** 2
        assert afc_efficiency(d, f) == pytest.approx(want, rel=1e-14)


def test_efficiency_reference_point():
    # depth 2.75 at its optimal finesse
    assert optimal_finesse(2.75) == pytest.approx(2.7123893404517303, rel=1e-12)
    eta = afc_efficiency(2.75, optimal_finesse(2.75))
    assert eta == pytest.approx(0.23330985188544967, rel=1e-12)


def test_background_is_a_pure_attenuation_factor():
    rng = np.random.default_rng(7)
    for _ in range(50):
        d = rng.uniform(0.1, 6.0)
        f = rng.uniform(1.1, 8.0)
        d0 = rng.uniform(0.0, 1.0)
        assert afc_efficiency_with_background(d, f, d0) == pytest.approx(
            afc_efficiency(d, f) * np.exp(-d0), rel=1e-14
        )
    assert afc_efficiency_with_background(2.75, optimal_finesse(2.75), 0.085) == pytest.approx(
        0.21429796502867005, rel=1e-12
    )


def test_optimal_finesse_unit_depth():
    assert optimal_finesse(1.0) == pytest.approx(2.223404224506719, rel=1e-12)


def test_optimal_finesse_is_stationary_point():
    rng = np.random.default_rng(2)
    for _ in range(40):
        d = rng.uniform(0.2, 9.0)
        f_opt = optimal_finesse(d)
        eta = afc_efficiency(d, f_opt)
        for eps in (1e-3, 1e-2):
            assert eta >= afc_efficiency(d, f_opt * (1 + eps))
            assert eta >= afc_efficiency(d, f_opt * (1 - eps))


def test_optimal_finesse_grows_with_depth():
    d = np.linspace(0.1, 10.0, 50)
    f = optimal_finesse(d)
    assert np.all(np.diff(f) > 0)


def test_mean_depth():
    assert mean_optical_depth(2.75, 2.75) == pytest.approx(1.0)
    assert np.allclose(mean_optical_depth(np.array([1.0, 2.0]), 4.0), [0.25, 0.5])


def test_efficiency_rejects_bad_inputs():
    with pytest.raises(ValidationError):
        afc_efficiency(-0.1, 2.0)
    with pytest.raises(ValidationError):
        afc_efficiency(1.0, 1.0)
    with pytest.raises(ValidationError):
        afc_efficiency(np.nan, 2.0)
    with pytest.raises(ValidationError):
        afc_efficiency_with_background(1.0, 2.0, -0.01)
    with pytest.raises(ValidationError):
        optimal_finesse(0.0)


def test_decay_reference_point():
    model = DecayModel(eta0=0.202, t2_afc=348e-6)
    assert efficiency_decay(125e-6, model) == pytest.approx(0.0480136856609427, rel=1e-12)
    assert efficiency_decay(0.0, model) == pytest.approx(0.202)


def test_decay_is_monotone_and_vectorizes():
    model = DecayModel(eta0=0.3, t2_afc=200e-6)
    t = np.linspace(0, 1e-3, 64)
    eta = efficiency_decay(t, model)
    assert eta.shape == t.shape
    assert np.all(np.diff(eta) < 0)


def test_decay_delta_consistency_check():
    model = DecayModel(eta0=0.2, t2_afc=348e-6)
    efficiency_decay(125e-6, model, delta=8e3)  # 1/125us, consistent
    with pytest.raises(ValidationError):
        efficiency_decay(125e-6, model, delta=10e3)


def test_decay_model_validation():
    with pytest.raises(ValidationError):
        DecayModel(eta0=-0.1, t2_afc=1e-3)
    with pytest.raises(ValidationError):
        DecayModel(eta0=0.1, t2_afc=0.0)


def test_hole_decay_sum_of_exponentials():
    model = HoleDecayModel(amp_fast=0.45, amp_slow=0.30, t1_fast=0.370, t1_slow=4.7)
    t = np.geomspace(1e-2, 30.0, 40)
    want = 0.45 * np.exp(-t / 0.370) + 0.30 * np.exp(-t / 4.7)
    assert np.allclose(hole_decay(t, model), want, rtol=1e-14)
    assert hole_decay(0.0, model) == pytest.approx(0.75)
    with pytest.raises(ValidationError):
        HoleDecayModel(amp_fast=0.5, amp_slow=0.3, t1_fast=4.7, t1_slow=0.370)


def test_comb_spec_validation():
    spec = CombSpec(delta=10e6, bandwidth=250e6, finesse=2.45)
    assert spec.n_teeth == 25
    assert spec.pump_tooth_width == pytest.approx(10e6 * (1 - 1 / 2.45))
    assert spec.pump_tooth_width + 10e6 / spec.finesse == pytest.approx(10e6)
    with pytest.raises(ValidationError):
        CombSpec(delta=10e6, bandwidth=247e6, finesse=2.45)
    with pytest.raises(ValidationError):
        CombSpec(delta=10e6, bandwidth=250e6, finesse=1.0)
    with pytest.raises(ValidationError):
        CombSpec(delta=0.0, bandwidth=250e6, finesse=2.0)


def test_target_psd_tiles_the_grid():
    spec = CombSpec(delta=10e6, bandwidth=250e6, finesse=2.5)
    grid = np.arange(-20e6, 270e6, 1e6)
    psd = target_psd(spec, grid)
    assert set(np.unique(psd.values)) <= {0.0, 1.0}
    # band starts at each tooth origin, width delta (1 - 1/F) = 6 MHz
    assert psd.values[np.searchsorted(grid, 0.0)] == 1.0
    assert psd.values[np.searchsorted(grid, 5e6)] == 1.0
    assert psd.values[np.searchsorted(grid, 6e6)] == 0.0  # half-open edge
    assert psd.values[np.searchsorted(grid, 9e6)] == 0.0
    assert np.all(psd.values[grid < 0] == 0)
    assert np.all(psd.values[grid >= 250e6] == 0)
    # per-period duty cycle over the comb span
    inside = (grid >= 0) & (grid < 250e6)
    assert psd.values[inside].mean() == pytest.approx(1 - 1 / 2.5)


def test_target_psd_rejects_misaligned_grids():
    spec = CombSpec(delta=10e6, bandwidth=250e6, finesse=2.45)
    with pytest.raises(ValidationError):
        target_psd(spec, np.arange(0, 250e6, 1e6))  # 1 MHz does not divide 5.918... MHz
    spec = CombSpec(delta=10e6, bandwidth=250e6, finesse=2.5)
    with pytest.raises(ValidationError):
        target_psd(spec, np.arange(0.3e6, 250e6, 1e6))  # off-lattice offset
    with pytest.raises(ValidationError):
        target_psd(spec, np.array([0.0, 1e6, 3e6]))  # non-uniform
