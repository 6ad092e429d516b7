"""Loaders for the bundled measurement data.

The package ships machine-readable copies of the measured coincidence
gains (both fiber lengths), the raw tomography counts, the reported
source characterization, the reported single-photon yield intervals,
and the decoy configurations, so the full analysis and its regression
tests run offline. All loaders return the same types the file readers
in :mod:`mdiqkd.io` produce; the fixture files double as format
examples for user-supplied data.
"""

from __future__ import annotations

from importlib import resources
from typing import Any

from .decoy import DecoyConfig, GainsTable, YieldBounds
from .errors import MissingDataError
from .io import (
    read_count_records,
    read_decoy_config,
    read_gains,
    read_json,
    read_yield_bounds,
)
from .tomography import ProjectiveRecord

__all__ = [
    "data_path",
    "load_count_records",
    "load_decoy_config",
    "load_gains",
    "load_reference_characterization",
    "load_yield_bounds",
]

_GAINS = {"10km": "gains_10km.json", "40km": "gains_40km.json"}
_CONFIGS = {"finite": "decoy_config_finite.json", "infinite": "decoy_config_infinite.json"}
_BOUNDS = {
    "10km-finite": "yield_bounds_10km_finite.json",
    "10km-infinite": "yield_bounds_10km_infinite.json",
    "40km-infinite": "yield_bounds_40km_infinite.json",
}


def data_path(name: str) -> str:
    """Filesystem path of a bundled data file."""
    data_dir = resources.files("mdiqkd").joinpath("data")
    path = data_dir.joinpath(name)
    if not path.is_file():
        available = sorted(
            entry.name for entry in data_dir.iterdir() if entry.name.endswith(".json")
        )
        raise MissingDataError(f"no bundled file {name!r}; available: {available}")
    return str(path)


def load_gains(experiment: str) -> GainsTable:
    """Bundled coincidence gains; ``experiment`` is ``10km`` or ``40km``."""
    if experiment not in _GAINS:
        raise MissingDataError(f"unknown gains set {experiment!r}; want one of {sorted(_GAINS)}")
    return read_gains(data_path(_GAINS[experiment]))


def load_decoy_config(mode: str) -> DecoyConfig:
    """Bundled decoy configuration; ``mode`` is ``finite`` or ``infinite``."""
    if mode not in _CONFIGS:
        raise MissingDataError(f"unknown decoy config {mode!r}; want one of {sorted(_CONFIGS)}")
    return read_decoy_config(data_path(_CONFIGS[mode]))


def load_yield_bounds(table: str) -> YieldBounds:
    """Reported single-photon yield intervals.

    ``table`` is one of ``10km-finite``, ``10km-infinite`` or
    ``40km-infinite``.
    """
    if table not in _BOUNDS:
        raise MissingDataError(f"unknown bounds table {table!r}; want one of {sorted(_BOUNDS)}")
    return read_yield_bounds(data_path(_BOUNDS[table]))


def load_count_records() -> dict[str, tuple[ProjectiveRecord, ...]]:
    """Raw projective tomography counts, grouped by source-state label."""
    return read_count_records(data_path("count_records.json"))


def load_reference_characterization() -> dict[str, Any]:
    """Reported source characterization (Stokes vectors, overlaps, in-plane states)."""
    return read_json(data_path("reference_characterization.json"))
