"""Hyperfine level structure of the 4-ground x 4-excited pumping system.

Energies are zero-field hyperfine levels in MHz, each manifold relative
to its own lowest state. Four combinations are pinned by the measured
pumping transitions (the constraint validator below); the remaining
freedom, notably the second excited splitting, comes from the shipped
configuration file and is flagged there as literature input.

Transition frequencies are expressed as offsets from the lowest optical
pumping line (highest ground state to lowest excited state), which all
pump and probe frequencies in this package reference as zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ValidationError

__all__ = [
    "POLARIZATIONS",
    "LevelSystem",
    "transition_table",
    "polarization_strengths",
    "emission_branching",
    "load_level_system",
]

POLARIZATIONS = ("D2", "b", "diag45")

_ROW_SUM_TOL = 0.02
_ENERGY_TOL = 0.1

# (label, coefficient vector over (Eg1..Eg4, Ee1..Ee4), required value)
# in MHz; these are the four measured pumping-transition combinations.
_CONSTRAINTS = (
    ("E(4g) - E(1g) = 3025.5", (-1, 0, 0, 1, 0, 0, 0, 0), 3025.5),
    ("[E(4g) - E(3g)] + [E(4e) - E(1e)] = 5359.7", (0, 0, -1, 1, -1, 0, 0, 1), 5359.7),
    ("[E(4g) - E(2g)] + [E(3e) - E(1e)] = 6913.7", (0, -1, 0, 1, -1, 0, 1, 0), 6913.7),
    ("E(4e) - E(3e) = 288", (0, 0, 0, 0, 0, 0, -1, 1), 288.0),
)


@dataclass(eq=False)
class LevelSystem:
    """Level energies, transition-strength tables, and ensemble scales.

    Branching tables are relative absorption strengths, rows indexed by
    ground state, columns by excited state, one table per polarization.
    inhom_fwhm is the Gaussian inhomogeneous width (MHz), peak_od the
    unpumped optical depth of the reference line.
    """

    ground_energies: np.ndarray
    excited_energies: np.ndarray
    branching_D2: np.ndarray
    branching_b: np.ndarray
    inhom_fwhm: float
    peak_od: float

    def __post_init__(self):
        self.ground_energies = np.asarray(self.ground_energies, dtype=float)
        self.excited_energies = np.asarray(self.excited_energies, dtype=float)
        self.branching_D2 = np.asarray(self.branching_D2, dtype=float)
        self.branching_b = np.asarray(self.branching_b, dtype=float)
        problems = []
        for name, arr, shape in (
            ("ground_energies", self.ground_energies, (4,)),
            ("excited_energies", self.excited_energies, (4,)),
            ("branching_D2", self.branching_D2, (4, 4)),
            ("branching_b", self.branching_b, (4, 4)),
        ):
            if arr.shape != shape:
                raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                problems.append(f"{name} contains non-finite entries")
        for name, table in (("branching_D2", self.branching_D2), ("branching_b", self.branching_b)):
            if np.any(table < 0) or np.any(table > 1):
                problems.append(f"{name} strengths must lie in [0, 1]")
            bad = np.abs(table.sum(axis=1) - 1.0) > _ROW_SUM_TOL
            for g in np.flatnonzero(bad):
                problems.append(
                    f"{name} row {g + 1} sums to {table[g].sum():.3f}, "
                    f"outside 1.00 +- {_ROW_SUM_TOL}"
                )
        for name, arr in (
            ("ground_energies", self.ground_energies),
            ("excited_energies", self.excited_energies),
        ):
            if abs(arr[0]) > _ENERGY_TOL:
                problems.append(f"{name} must be relative to the lowest state, got {arr[0]}")
        energies = np.concatenate([self.ground_energies, self.excited_energies])
        for label, coeff, value in _CONSTRAINTS:
            got = float(np.dot(coeff, energies))
            if abs(got - value) > _ENERGY_TOL:
                problems.append(f"constraint violated: {label}, configured value {got:.2f}")
        if not (np.isfinite(self.inhom_fwhm) and self.inhom_fwhm > 0):
            problems.append(f"inhom_fwhm must be positive, got {self.inhom_fwhm}")
        if not (np.isfinite(self.peak_od) and self.peak_od > 0):
            problems.append(f"peak_od must be positive, got {self.peak_od}")
        if problems:
            raise ValidationError("invalid level system:\n  " + "\n  ".join(problems))


def transition_table(levels: LevelSystem) -> np.ndarray:
    """Transition offsets (MHz), entry (g, e), relative to the line
    from the highest ground state to the lowest excited state."""
    eg = levels.ground_energies
    ee = levels.excited_energies
    return (ee[None, :] - eg[:, None]) - (ee[0] - eg[3])


def polarization_strengths(levels: LevelSystem, polarization: str) -> np.ndarray:
    """Relative absorption strengths (4x4) for one polarization.

    diag45 models light polarized halfway between the two crystal axes
    as the equal-weight mean of the two tables.
    """
    if polarization == "D2":
        return levels.branching_D2
    if polarization == "b":
        return levels.branching_b
    if polarization == "diag45":
        return 0.5 * (levels.branching_D2 + levels.branching_b)
    raise ValidationError(
        f"unknown polarization {polarization!r}, expected one of {POLARIZATIONS}"
    )


def emission_branching(levels: LevelSystem) -> np.ndarray:
    """Spontaneous-emission branching, entry (g, e) = P(e decays to g).

    Emission is not polarization-selected, so the two absorption tables
    are averaged and each excited-state column is normalized to unit
    total decay probability.
    """
    mixed = 0.5 * (levels.branching_D2 + levels.branching_b)
    return mixed / mixed.sum(axis=0, keepdims=True)


def _default_config():
    return resources.files("afcprep").joinpath("data/yb171_yso_site2.json")


def load_level_system(path: str | Path | None = None) -> LevelSystem:
    """Read a level-system configuration document (JSON).

    With no path, loads the packaged site-2 defaults. File and schema
    problems raise ConfigError; a readable file with unphysical values
    fails the LevelSystem validator instead.
    """
    source = _default_config() if path is None else Path(path)
    try:
        raw = json.loads(source.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"level-system file not found: {source}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"level-system file is not valid JSON: {source}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("level-system document must be a JSON object")
    try:
        return LevelSystem(
            ground_energies=raw["ground_energies_mhz"],
            excited_energies=raw["excited_energies_mhz"],
            branching_D2=raw["branching_D2"],
            branching_b=raw["branching_b"],
            inhom_fwhm=float(raw["inhom_fwhm_mhz"]),
            peak_od=float(raw["peak_od"]),
        )
    except KeyError as exc:
        raise ConfigError(f"level-system document is missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ConfigError(f"level-system document has a malformed field: {exc}") from exc
