"""Command-line orchestration for the full analysis pipeline.

Three subcommands cover the workflow end to end:

``mdiqkd tomo``
    Raw projective counts -> Monte-Carlo state characterization
    (Stokes vectors with spreads, squared overlaps, rotated/filtered
    in-plane states).
``mdiqkd keyrate``
    Measured gains + characterization + decoy configuration ->
    single-photon yield bounds -> phase-error bound -> secure key rate,
    reported with every intermediate quantity.
``mdiqkd simulate``
    Channel/sweep configuration -> plot-ready CSV of the certified rate
    and the basis-independence comparator versus distance and flaw angle.

Every command is deterministic given its inputs, flags and seed, and
each report embeds the tool version plus a SHA-256 hash of every input
file. Exit codes: 0 success, 2 unreadable or malformed input, 3
reconstruction non-convergence, 4 missing data (state, pair or cell), 5
mutually inconsistent data (infeasible constraint system).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from typing import Any, Mapping, Sequence

from . import __version__
from .decoy import (
    DecoyConfig,
    GainsTable,
    PAIR_ORDER,
    YieldBounds,
    bound_Q11Z,
    bound_all_pairs,
    pulse_counts,
)
from .errors import (
    ConvergenceError,
    DataInconsistencyError,
    DomainError,
    MdiqkdError,
    MissingDataError,
    ParseError,
    PhysicalityError,
    SingularSystemError,
)
from .io import (
    decoy_config_from_payload,
    read_count_records,
    read_decoy_config,
    read_gains,
    read_json,
    read_yield_bounds,
    sha256_of_file,
    write_json,
    write_sweep_csv,
)
from .keyrate import (
    DEFAULT_EC_EFFICIENCY,
    KeyRateInputs,
    secure_key_rate,
)
from .losstol import bound_phase_error
from .qstate import (
    StokesVector,
    density_from_stokes,
    fidelity,
    rotate_to_common_Y,
    virtual_states,
)
from .simulate import ChannelModel, run_sweep
from .tomography import monte_carlo, reconstruct_from_records, stokes_from_density

__all__ = ["main"]

#: seed offset between per-state Monte-Carlo runs, so the three states
#: draw from disjoint substream families under one user-facing seed
_STATE_SEED_STRIDE = 1000003

_SOURCE_STATES = ("0Z", "1Z", "0X")
_Z_PAIRS = (("0Z", "0Z"), ("0Z", "1Z"), ("1Z", "0Z"), ("1Z", "1Z"))


def _provenance(inputs: Mapping[str, str]) -> dict[str, Any]:
    return {
        "tool": {"name": "mdiqkd", "version": __version__},
        "inputs": {
            role: {"path": path, "hash": sha256_of_file(path)}
            for role, path in inputs.items()
        },
    }


# ---------------------------------------------------------------------------
# tomo


def _cmd_tomo(args: argparse.Namespace) -> int:
    grouped = read_count_records(args.counts)
    missing = [label for label in _SOURCE_STATES if label not in grouped]
    if missing:
        raise MissingDataError(
            f"{args.counts}: no records for state(s) {', '.join(missing)}"
        )

    states: dict[str, Any] = {}
    rhos: dict[str, Any] = {}
    for index, label in enumerate(_SOURCE_STATES):
        records = grouped[label]
        if args.n_samples > 0:
            result = monte_carlo(
                records,
                n_samples=args.n_samples,
                angle_sigma=args.angle_sigma,
                seed=args.seed + index * _STATE_SEED_STRIDE,
            )
            rho, std = result.rho, list(result.stokes_std)
        else:
            rho, std = reconstruct_from_records(records), None
        rhos[label] = rho
        stokes = stokes_from_density(rho)
        states[label] = {
            "stokes": [stokes.s1, stokes.s2, stokes.s3],
            "stokes_std": std,
        }

    overlaps = {
        f"{a},{b}": {"value": fidelity(rhos[a], rhos[b]) ** 2}
        for a, b in (("0Z", "1Z"), ("0X", "0Z"), ("0X", "1Z"))
    }
    characterization = rotate_to_common_Y(rhos["0Z"], rhos["1Z"], rhos["0X"])

    os.makedirs(args.out, exist_ok=True)
    payload = {
        "format": "source-characterization/1",
        "states": states,
        "overlaps": overlaps,
        "common_circular_component": characterization.common_SY,
        "in_plane": {
            label: [s.s1, s.s3]
            for label, s in zip(_SOURCE_STATES, characterization.in_plane)
        },
        "seed": args.seed,
        "n_samples": args.n_samples,
        "angle_sigma_rad": args.angle_sigma,
        "provenance": _provenance({"counts": args.counts}),
    }
    out_path = os.path.join(args.out, "characterization.json")
    write_json(payload, out_path)
    if args.format == "text":
        text_path = os.path.join(args.out, "characterization.txt")
        _write_text(_render_characterization(payload), text_path)
        print(f"wrote {text_path}")
    print(f"wrote {out_path}")
    for label in _SOURCE_STATES:
        entry = states[label]
        print(f"{label}: stokes = {_fmt_triple(entry['stokes'])}", end="")
        if entry["stokes_std"] is not None:
            print(f" +/- {_fmt_triple(entry['stokes_std'])}", end="")
        print()
    return 0


def _fmt_triple(values: Sequence[float]) -> str:
    return "(" + ", ".join(f"{v: .4f}" for v in values) + ")"


def _render_characterization(payload: Mapping[str, Any]) -> str:
    lines = ["state   S1        S2        S3"]
    for label in _SOURCE_STATES:
        entry = payload["states"][label]
        cells = [f"{v: .4f}" for v in entry["stokes"]]
        lines.append(f"{label:6s}" + "  ".join(cells))
        if entry["stokes_std"] is not None:
            spreads = [f"{v: .4f}" for v in entry["stokes_std"]]
            lines.append("  +/-  " + "  ".join(spreads))
    lines.append("")
    lines.append("squared overlaps:")
    for key, entry in payload["overlaps"].items():
        lines.append(f"  {key}: {entry['value']:.4f}")
    lines.append("")
    lines.append(
        f"common circular component: {payload['common_circular_component']: .6f}"
    )
    return "\n".join(lines) + "\n"


def _write_text(text: str, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


# ---------------------------------------------------------------------------
# keyrate


def _in_plane_states(payload: Mapping[str, Any], path: str) -> dict[str, StokesVector]:
    in_plane = payload.get("in_plane")
    if not isinstance(in_plane, Mapping):
        raise ParseError(f"{path}: characterization lacks an 'in_plane' object")
    states: dict[str, StokesVector] = {}
    for label in _SOURCE_STATES:
        if label not in in_plane:
            raise MissingDataError(f"{path}: no in-plane state for {label}")
        component = in_plane[label]
        if not isinstance(component, Sequence) or len(component) != 2:
            raise ParseError(f"{path}: in_plane[{label!r}] must be [s1, s3]")
        states[label] = StokesVector(float(component[0]), 0.0, float(component[1]))
    return states


def _signal_z_statistics(gains: GainsTable) -> tuple[float, float]:
    """Pooled signal-intensity gain and bit error rate in the key basis."""
    cells = {
        (sa, sb): gains.gain(sa, sb, "signal", "signal").value for sa, sb in _Z_PAIRS
    }
    total = sum(cells.values())
    if total <= 0.0:
        raise DomainError("signal-intensity key-basis gains sum to zero")
    same_bit = cells[("0Z", "0Z")] + cells[("1Z", "1Z")]
    return total / 4.0, same_bit / total


def _cmd_keyrate(args: argparse.Namespace) -> int:
    gains = read_gains(args.gains)
    characterization = read_json(args.characterization)
    config = read_decoy_config(args.decoy_config)

    if args.mode == "infinite":
        config = dataclasses.replace(config, k_sigma=0.0)
    if args.k is not None:
        config = dataclasses.replace(config, k_sigma=args.k)
    if args.n_cut is not None:
        config = dataclasses.replace(config, n_cut=args.n_cut)

    counts = pulse_counts(config)
    if args.yield_bounds is not None:
        bounds = read_yield_bounds(args.yield_bounds)
    else:
        bounds = bound_all_pairs(gains, counts, config)
    q11z_lower = bound_Q11Z(gains, counts, config)

    states = _in_plane_states(characterization, args.characterization)
    virtual = virtual_states(
        density_from_stokes(states["0Z"]), density_from_stokes(states["1Z"])
    )
    phase = bound_phase_error(bounds, states, states, virtual, virtual)

    signal_gain, signal_qber = _signal_z_statistics(gains)
    probability_z = config.state_probs["0Z"] + config.state_probs["1Z"]
    signal_pulses = (
        config.total_pulses
        * config.intensity_probs["signal"] ** 2
        * probability_z**2
    )
    inputs = KeyRateInputs(
        single_photon_gain_lower=q11z_lower,
        phase_error_upper=phase.value,
        signal_gain=signal_gain,
        signal_qber=signal_qber,
        ec_efficiency=DEFAULT_EC_EFFICIENCY,
        signal_pulse_count=signal_pulses,
    )
    result = secure_key_rate(inputs)

    os.makedirs(args.out, exist_ok=True)
    provenance_inputs = {
        "gains": args.gains,
        "characterization": args.characterization,
        "decoy_config": args.decoy_config,
    }
    if args.yield_bounds is not None:
        provenance_inputs["yield_bounds"] = args.yield_bounds
    report = {
        "format": "keyrate-report/1",
        "mode": args.mode,
        "k_sigma": config.k_sigma,
        "n_cut": config.n_cut,
        "yield_bounds": {
            f"{sa},{sb}": {"lower": lo, "upper": hi}
            for (sa, sb), (lo, hi) in (
                ((pair), bounds.interval(*pair)) for pair in PAIR_ORDER
            )
        },
        "yield_bounds_source": "provided" if args.yield_bounds else "computed",
        "single_photon_gain_lower": q11z_lower,
        "phase_error": {
            "upper": phase.value,
            "correct_lower": phase.correct_lower,
            "error_upper": phase.error_upper,
            "active_constraints": list(phase.active_constraints),
        },
        "signal_gain_z": signal_gain,
        "signal_qber_z": signal_qber,
        "signal_pulse_count": signal_pulses,
        "ec_efficiency": DEFAULT_EC_EFFICIENCY,
        "rate": result.rate,
        "key_length": result.key_length,
        "positive": result.rate > 0.0,
        "provenance": _provenance(provenance_inputs),
    }
    out_path = os.path.join(args.out, "keyrate_report.json")
    write_json(report, out_path)
    if args.format == "text":
        text_path = os.path.join(args.out, "keyrate_report.txt")
        _write_text(_render_keyrate(report), text_path)
        print(f"wrote {text_path}")
    print(f"wrote {out_path}")
    print(
        f"mode={args.mode} eX_U={phase.value:.4f} "
        f"Q11Z_L={q11z_lower:.4e} E_Z={signal_qber:.4f} "
        f"Q_Z={signal_gain:.4e} R={result.rate:.4e}"
    )
    return 0


def _render_keyrate(report: Mapping[str, Any]) -> str:
    header = (
        f"{'mode':>10s} {'eX_U':>10s} {'Q11Z_L':>12s} "
        f"{'E_Z':>10s} {'Q_Z':>12s} {'R':>12s}"
    )
    row = (
        f"{report['mode']:>10s} {report['phase_error']['upper']:>10.4f} "
        f"{report['single_photon_gain_lower']:>12.4e} "
        f"{report['signal_qber_z']:>10.4f} {report['signal_gain_z']:>12.4e} "
        f"{report['rate']:>12.4e}"
    )
    lines = [header, row, "", "single-photon yield bounds:"]
    for pair, interval in report["yield_bounds"].items():
        lines.append(
            f"  {pair}: [{interval['lower']:.4e}, {interval['upper']:.4e}]"
        )
    lines.append("")
    lines.append(f"key length: {report['key_length']} bits")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# simulate


def _channel_from_payload(payload: Any, context: str) -> ChannelModel:
    if payload is None:
        return ChannelModel()
    if not isinstance(payload, Mapping):
        raise ParseError(f"{context}: 'channel' must be an object")
    known = {field.name for field in dataclasses.fields(ChannelModel)}
    unknown = set(payload) - known
    if unknown:
        raise ParseError(
            f"{context}: unknown channel field(s) {sorted(unknown)}; "
            f"known: {sorted(known)}"
        )
    return ChannelModel(**{key: float(value) for key, value in payload.items()})


def _float_list(payload: Any, key: str, context: str) -> list[float]:
    values = payload.get(key)
    if not isinstance(values, Sequence) or isinstance(values, (str, bytes)):
        raise ParseError(f"{context}: {key!r} must be an array of numbers")
    return [float(v) for v in values]


def _cmd_simulate(args: argparse.Namespace) -> int:
    payload = read_json(args.config)
    context = args.config
    if not isinstance(payload, Mapping):
        raise ParseError(f"{context}: expected a JSON object")
    model = _channel_from_payload(payload.get("channel"), context)
    distances = _float_list(payload, "distances_km", context)
    deltas = _float_list(payload, "deltas", context)
    if "decoy_config" not in payload:
        raise ParseError(f"{context}: missing 'decoy_config' object")
    config = decoy_config_from_payload(payload["decoy_config"], context)
    ec_efficiency = float(payload.get("ec_efficiency", DEFAULT_EC_EFFICIENCY))

    points = run_sweep(model, distances, deltas, config, ec_efficiency)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "sweep.csv")
    write_sweep_csv(points, out_path)
    print(f"wrote {out_path}")
    failed = sum(1 for p in points if p.status != "ok")
    print(f"{len(points)} grid points, {failed} failed")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdiqkd",
        description=(
            "Security analysis for measurement-device-independent QKD with "
            "imperfect sources."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    tomo = commands.add_parser(
        "tomo", help="reconstruct source states from projective counts"
    )
    tomo.add_argument("counts", help="JSON array of projective count records")
    tomo.add_argument("--seed", type=int, default=0, help="Monte-Carlo seed")
    tomo.add_argument(
        "--n-samples",
        type=int,
        default=0,
        help="Monte-Carlo samples per state (0: point estimate only)",
    )
    tomo.add_argument(
        "--angle-sigma",
        type=float,
        default=0.0017453292519943296,
        help="waveplate angle spread in radians (default: 0.1 degrees)",
    )
    tomo.add_argument("--out", default=".", help="output directory")
    tomo.add_argument("--format", choices=("json", "text"), default="json")
    tomo.set_defaults(handler=_cmd_tomo)

    keyrate = commands.add_parser(
        "keyrate", help="bound yields and phase error, then compute the key rate"
    )
    keyrate.add_argument("gains", help="gain table (JSON or CSV)")
    keyrate.add_argument("characterization", help="source characterization (JSON)")
    keyrate.add_argument("decoy_config", help="decoy configuration (JSON)")
    keyrate.add_argument(
        "--mode",
        choices=("finite", "infinite"),
        default="finite",
        help="finite keeps the configured statistical windows; infinite pins them to zero",
    )
    keyrate.add_argument(
        "--k",
        type=float,
        default=None,
        help="override the statistical-window multiplier",
    )
    keyrate.add_argument(
        "--n-cut", type=int, default=None, help="override the photon-number cutoff"
    )
    keyrate.add_argument(
        "--yield-bounds",
        default=None,
        help="use precomputed single-photon yield bounds instead of solving",
    )
    keyrate.add_argument("--out", default=".", help="output directory")
    keyrate.add_argument("--format", choices=("json", "text"), default="json")
    keyrate.set_defaults(handler=_cmd_keyrate)

    simulate = commands.add_parser(
        "simulate", help="sweep the channel model over distance and flaw angle"
    )
    simulate.add_argument("config", help="sweep configuration (JSON)")
    simulate.add_argument(
        "--seed",
        type=int,
        default=0,
        help="reserved; the channel model is analytic and needs no randomness",
    )
    simulate.add_argument("--out", default=".", help="output directory")
    simulate.add_argument("--format", choices=("csv",), default="csv")
    simulate.set_defaults(handler=_cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, PhysicalityError) as exc:
        print(f"error: invalid input data: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: reconstruction did not converge: {exc}", file=sys.stderr)
        return 3
    except MissingDataError as exc:
        print(f"error: missing data: {exc}", file=sys.stderr)
        return 4
    except (DataInconsistencyError, SingularSystemError) as exc:
        print(f"error: inconsistent data: {exc}", file=sys.stderr)
        return 5
    except MdiqkdError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
