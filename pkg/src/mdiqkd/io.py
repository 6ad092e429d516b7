"""File formats: count records, gain tables, yield bounds, reports.

Structured data travels as JSON, sweep tables as CSV. Floats are written
through :func:`repr`, the shortest decimal string that round-trips to the
same binary64 value, so golden files are stable across runs and readable
diffs stay small. Every reader raises :class:`~mdiqkd.errors.ParseError`
with file/line context instead of leaking ``json`` or ``KeyError``
internals; writers refuse non-finite numbers outright.

Formats
-------
count records
    A JSON array of objects, one per projective measurement::

        {"state_label": "0Z", "basis_label": "H", "hwp_deg": 0.0,
         "qwp_deg": 0.0, "count": 201311, "time_s": 10.0,
         "dead_time_s": 1e-05, "dark_rate_hz": 50.0}

    Waveplate angles are stored in degrees (the lab's native unit) and
    converted to radians on read.
gain table
    ``{"format": "gain-table/1", "rows": {"0Z,1Z": {"signal,signal":
    {"value": ..., "sigma": ..., "quantum": ...}}}}`` — rows keyed by
    state pair, columns by intensity pair. A CSV variant with header
    ``state_a,state_b,intensity_a,intensity_b,value,sigma,quantum`` is
    accepted on read.
yield bounds
    ``{"format": "yield-bounds/1", "bounds": {"0Z,0Z": {"lower": ...,
    "upper": ...}}}`` — one interval per state pair.
source characterization
    Per-state Stokes vectors with Monte-Carlo spreads, the pairwise
    squared-overlap table, and the rotated/filtered effective states
    consumed by the phase-error analysis.
decoy configuration
    Intensities, selection probabilities, total pulse count, the
    statistical-fluctuation multiplier and the photon-number cutoff.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from typing import Any, Mapping, Sequence

from .decoy import DecoyConfig, GainCell, GainsTable, YieldBounds
from .errors import ParseError
from .tomography import BASIS_LABELS, ProjectiveRecord

__all__ = [
    "decoy_config_from_payload",
    "read_count_records",
    "read_decoy_config",
    "read_gains",
    "read_json",
    "read_yield_bounds",
    "sha256_of_file",
    "write_gains",
    "write_json",
    "write_sweep_csv",
    "write_yield_bounds",
]

#: column order of the sweep CSV; ``status`` flags per-point failures
SWEEP_COLUMNS = ("distance_km", "delta", "R_losstol", "R_gllp", "eX_U", "E_Z", "status")

_COUNT_FIELDS = (
    "state_label",
    "basis_label",
    "hwp_deg",
    "qwp_deg",
    "count",
    "time_s",
    "dead_time_s",
    "dark_rate_hz",
)
_GAIN_CSV_HEADER = (
    "state_a",
    "state_b",
    "intensity_a",
    "intensity_b",
    "value",
    "sigma",
    "quantum",
)


def sha256_of_file(path: str) -> str:
    """Hex SHA-256 digest of a file's bytes, prefixed ``sha256:``."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def read_json(path: str) -> Any:
    """Parse a JSON file, mapping syntax errors to :class:`ParseError`.

    The diagnostic carries the offending line and column so a broken
    input can be fixed without re-running under a debugger.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from exc


def write_json(payload: Any, path: str) -> None:
    """Write ``payload`` as indented JSON with round-trip-exact floats."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, allow_nan=False)
        handle.write("\n")


def _require(mapping: Mapping[str, Any], key: str, context: str) -> Any:
    if key not in mapping:
        raise ParseError(f"{context}: missing required field {key!r}")
    return mapping[key]


def _as_float(value: Any, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{context}: expected a number, got {value!r}")
    result = float(value)
    if not math.isfinite(result):
        raise ParseError(f"{context}: non-finite value {value!r}")
    return result


def _check_format(payload: Any, expected: str, path: str) -> Mapping[str, Any]:
    if not isinstance(payload, Mapping):
        raise ParseError(f"{path}: expected a JSON object, got {type(payload).__name__}")
    declared = payload.get("format")
    if declared != expected:
        raise ParseError(f"{path}: expected format {expected!r}, found {declared!r}")
    return payload


# ---------------------------------------------------------------------------
# count records


def read_count_records(path: str) -> dict[str, tuple[ProjectiveRecord, ...]]:
    """Read projective count records grouped by state label.

    Returns a mapping ``state_label -> records`` preserving file order
    within each state. Each state must come with all four analysis bases;
    missing bases surface later as reconstruction errors, so only the
    record syntax is validated here.
    """
    payload = read_json(path)
    if not isinstance(payload, Sequence) or isinstance(payload, (str, bytes)):
        raise ParseError(f"{path}: expected a JSON array of count records")
    grouped: dict[str, list[ProjectiveRecord]] = {}
    for index, entry in enumerate(payload):
        context = f"{path}: record {index}"
        if not isinstance(entry, Mapping):
            raise ParseError(f"{context}: expected an object")
        for field_name in _COUNT_FIELDS:
            _require(entry, field_name, context)
        state = entry["state_label"]
        basis = entry["basis_label"]
        if not isinstance(state, str) or not state:
            raise ParseError(f"{context}: state_label must be a non-empty string")
        if basis not in BASIS_LABELS:
            raise ParseError(
                f"{context}: basis_label {basis!r} not one of {BASIS_LABELS}"
            )
        count = entry["count"]
        if isinstance(count, bool) or not isinstance(count, int):
            raise ParseError(f"{context}: count must be an integer")
        record = ProjectiveRecord(
            basis_label=basis,
            hwp_angle=math.radians(_as_float(entry["hwp_deg"], context)),
            qwp_angle=math.radians(_as_float(entry["qwp_deg"], context)),
            raw_count=count,
            acquisition_time=_as_float(entry["time_s"], context),
            dead_time=_as_float(entry["dead_time_s"], context),
            dark_rate=_as_float(entry["dark_rate_hz"], context),
        )
        grouped.setdefault(state, []).append(record)
    return {state: tuple(records) for state, records in grouped.items()}


# ---------------------------------------------------------------------------
# gain tables


def _pair_key(pair: tuple[str, str]) -> str:
    return f"{pair[0]},{pair[1]}"


def _split_pair(key: str, context: str) -> tuple[str, str]:
    parts = key.split(",")
    if len(parts) != 2 or not all(parts):
        raise ParseError(f"{context}: malformed pair key {key!r} (want 'a,b')")
    return parts[0], parts[1]


def read_gains(path: str) -> GainsTable:
    """Read a gain table from JSON (or CSV, selected by extension)."""
    if path.lower().endswith(".csv"):
        return _read_gains_csv(path)
    payload = _check_format(read_json(path), "gain-table/1", path)
    rows = _require(payload, "rows", path)
    if not isinstance(rows, Mapping):
        raise ParseError(f"{path}: 'rows' must be an object keyed by state pair")
    cells: dict[tuple[str, str, str, str], GainCell] = {}
    for row_key, columns in rows.items():
        state_a, state_b = _split_pair(row_key, path)
        if not isinstance(columns, Mapping):
            raise ParseError(f"{path}: row {row_key!r} must be an object")
        for column_key, cell in columns.items():
            intensity_a, intensity_b = _split_pair(column_key, path)
            context = f"{path}: cell {row_key} / {column_key}"
            if not isinstance(cell, Mapping):
                raise ParseError(f"{context}: expected an object")
            sigma = cell.get("sigma")
            cells[(state_a, state_b, intensity_a, intensity_b)] = GainCell(
                value=_as_float(_require(cell, "value", context), context),
                sigma=None if sigma is None else _as_float(sigma, context),
                quantum=_as_float(cell.get("quantum", 0.0), context),
            )
    return GainsTable(cells=cells)


def _read_gains_csv(path: str) -> GainsTable:
    cells: dict[tuple[str, str, str, str], GainCell] = {}
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty CSV") from None
        if tuple(header) != _GAIN_CSV_HEADER:
            raise ParseError(
                f"{path}: bad CSV header {header!r}, want {list(_GAIN_CSV_HEADER)}"
            )
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_GAIN_CSV_HEADER):
                raise ParseError(f"{path}: line {line}: expected 7 columns")
            context = f"{path}: line {line}"
            sigma_text = row[5].strip()
            cells[(row[0], row[1], row[2], row[3])] = GainCell(
                value=_as_float(_parse_number(row[4], context), context),
                sigma=None if not sigma_text else _as_float(
                    _parse_number(sigma_text, context), context
                ),
                quantum=_as_float(_parse_number(row[6] or "0", context), context),
            )
    return GainsTable(cells=cells)


def _parse_number(text: str, context: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{context}: not a number: {text!r}") from None


def write_gains(gains: GainsTable, path: str) -> None:
    """Write a gain table as JSON, rows grouped by state pair."""
    rows: dict[str, dict[str, dict[str, float | None]]] = {}
    for (state_a, state_b, intensity_a, intensity_b), cell in gains.cells.items():
        row = rows.setdefault(_pair_key((state_a, state_b)), {})
        row[_pair_key((intensity_a, intensity_b))] = {
            "value": cell.value,
            "sigma": cell.sigma,
            "quantum": cell.quantum,
        }
    write_json({"format": "gain-table/1", "rows": rows}, path)


# ---------------------------------------------------------------------------
# yield bounds


def read_yield_bounds(path: str) -> YieldBounds:
    """Read per-pair single-photon yield intervals."""
    payload = _check_format(read_json(path), "yield-bounds/1", path)
    entries = _require(payload, "bounds", path)
    if not isinstance(entries, Mapping):
        raise ParseError(f"{path}: 'bounds' must be an object keyed by state pair")
    bounds: dict[tuple[str, str], tuple[float, float]] = {}
    for key, interval in entries.items():
        pair = _split_pair(key, path)
        context = f"{path}: bounds[{key!r}]"
        if not isinstance(interval, Mapping):
            raise ParseError(f"{context}: expected an object")
        bounds[pair] = (
            _as_float(_require(interval, "lower", context), context),
            _as_float(_require(interval, "upper", context), context),
        )
    return YieldBounds(bounds=bounds)


def write_yield_bounds(bounds: YieldBounds, path: str) -> None:
    """Write per-pair yield intervals in first-seen pair order."""
    entries = {
        _pair_key(pair): {"lower": low, "upper": high}
        for pair, (low, high) in bounds.bounds.items()
    }
    write_json({"format": "yield-bounds/1", "bounds": entries}, path)


# ---------------------------------------------------------------------------
# decoy configuration


def decoy_config_from_payload(payload: Any, context: str) -> DecoyConfig:
    """Build a :class:`DecoyConfig` from an already-parsed JSON object."""
    if not isinstance(payload, Mapping):
        raise ParseError(f"{context}: expected an object")

    def mapping_of_floats(key: str) -> dict[str, float]:
        raw = _require(payload, key, context)
        if not isinstance(raw, Mapping):
            raise ParseError(f"{context}: {key!r} must be an object")
        return {
            str(label): _as_float(value, f"{context}: {key}[{label!r}]")
            for label, value in raw.items()
        }

    n_cut = payload.get("n_cut", 7)
    if isinstance(n_cut, bool) or not isinstance(n_cut, int):
        raise ParseError(f"{context}: n_cut must be an integer")
    return DecoyConfig(
        intensities=mapping_of_floats("intensities"),
        intensity_probs=mapping_of_floats("intensity_probs"),
        state_probs=mapping_of_floats("state_probs"),
        total_pulses=_as_float(_require(payload, "total_pulses", context), context),
        k_sigma=_as_float(payload.get("k_sigma", 0.0), context),
        n_cut=n_cut,
    )


def read_decoy_config(path: str) -> DecoyConfig:
    """Read intensities, probabilities and statistics settings."""
    payload = _check_format(read_json(path), "decoy-config/1", path)
    return decoy_config_from_payload(payload, path)


# ---------------------------------------------------------------------------
# sweep tables


def write_sweep_csv(points: Sequence[Any], path: str) -> None:
    """Write sweep points as CSV in grid order.

    ``points`` are :class:`~mdiqkd.simulate.SweepPoint` items. Failed
    points keep their numeric columns empty and carry the failure text in
    ``status``, so downstream plotting can drop them without guessing.
    """
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SWEEP_COLUMNS)
        for point in points:
            failed = point.status != "ok"
            writer.writerow(
                [
                    repr(float(point.distance_km)),
                    repr(float(point.delta)),
                    "" if failed else repr(float(point.rate_losstol)),
                    "" if failed else repr(float(point.rate_gllp)),
                    "" if failed else repr(float(point.phase_error_upper)),
                    "" if failed else repr(float(point.signal_qber_z)),
                    point.status,
                ]
            )
