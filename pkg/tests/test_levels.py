"""Level-system loading, constraints, and derived tables."""

import json

import numpy as np
import pytest

from afcprep import (
    ConfigError,
    LevelSystem,
    ValidationError,
    emission_branching,
    load_level_system,
    polarization_strengths,
    transition_table,
)


@pytest.fixture(scope="module")
def levels():
    return load_level_system()


def test_packaged_config_loads(levels):
    assert levels.ground_energies.shape == (4,)
    assert levels.excited_energies.shape == (4,)
    assert levels.peak_od == pytest.approx(0.97)
    assert levels.inhom_fwhm == pytest.approx(1000.0)


def test_transition_offsets_hit_measured_lines(levels):
    nu = transition_table(levels)
    assert nu[3, 0] == pytest.approx(0.0, abs=1e-9)  # reference line
    assert nu[0, 0] == pytest.approx(3025.5, abs=0.1)
    assert nu[1, 2] == pytest.approx(6913.7, abs=0.1)
    assert nu[2, 3] == pytest.approx(5359.7, abs=0.1)
    # upper excited splitting sets the cleaning bandwidth limit
    assert levels.excited_energies[3] - levels.excited_energies[2] == pytest.approx(288.0)


def test_branching_rows_normalized(levels):
    for table in (levels.branching_D2, levels.branching_b):
        assert np.all(table >= 0) and np.all(table <= 1)
        assert np.allclose(table.sum(axis=1), 1.0, atol=0.02)


def test_emission_columns_normalized(levels):
    beta = emission_branching(levels)
    assert np.allclose(beta.sum(axis=0), 1.0, rtol=1e-12)
    assert np.all(beta >= 0)


def test_diag45_is_table_mean(levels):
    want = 0.5 * (levels.branching_D2 + levels.branching_b)
    assert np.allclose(polarization_strengths(levels, "diag45"), want)
    assert np.array_equal(polarization_strengths(levels, "D2"), levels.branching_D2)
    with pytest.raises(ValidationError):
        polarization_strengths(levels, "circular")


def test_energy_constraints_rejected_when_broken(levels):
    with pytest.raises(ValidationError, match="constraint violated"):
        LevelSystem(
            ground_energies=levels.ground_energies + np.array([0, 0, 0, 5.0]),
            excited_energies=levels.excited_energies,
            branching_D2=levels.branching_D2,
            branching_b=levels.branching_b,
            inhom_fwhm=levels.inhom_fwhm,
            peak_od=levels.peak_od,
        )


def test_branching_row_sum_rejected_when_broken(levels):
    bad = levels.branching_D2.copy()
    bad[0] = bad[0] * 1.2
    with pytest.raises(ValidationError, match="sums to"):
        LevelSystem(
            ground_energies=levels.ground_energies,
            excited_energies=levels.excited_energies,
            branching_D2=bad,
            branching_b=levels.branching_b,
            inhom_fwhm=levels.inhom_fwhm,
            peak_od=levels.peak_od,
        )


def test_load_from_explicit_path(tmp_path, levels):
    doc = {
        "ground_energies_mhz": levels.ground_energies.tolist(),
        "excited_energies_mhz": levels.excited_energies.tolist(),
        "branching_D2": levels.branching_D2.tolist(),
        "branching_b": levels.branching_b.tolist(),
        "inhom_fwhm_mhz": 800.0,
        "peak_od": 1.5,
    }
    path = tmp_path / "levels.json"
    path.write_text(json.dumps(doc))
    loaded = load_level_system(path)
    assert loaded.inhom_fwhm == pytest.approx(800.0)
    assert loaded.peak_od == pytest.approx(1.5)


def test_load_errors_are_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_level_system(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ConfigError):
        load_level_system(bad)
    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text(json.dumps({"ground_energies_mhz": [0, 1, 2, 3]}))
    with pytest.raises(ConfigError):
        load_level_system(incomplete)
