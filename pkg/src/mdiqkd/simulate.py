"""Analytic channel simulator for end-to-end pipeline exercises.

This is a declared stand-in model, not a measured-device emulation: it
produces gain tables with the right structure and scale so the decoy,
phase-error and key-rate stages can be driven over distance/flaw grids
(and compared against the quantum-coin analysis). Its design constraints:

* gains are exact double-Poisson mixtures of per-sector yields in
  [0, 1], so decoy bounding is feasible on them by construction;
* the (1, 1) sector applies a genuine two-qubit relay element, so for
  perfect sources and detectors the single-photon phase-error rate is
  exactly zero and the certified bound must reproduce that;
* everything is closed-form and deterministic — identical inputs give
  identical bytes.

Relay model: the successful outcome projects onto the symmetric Bell
state; an interference-visibility error ``v`` classically mixes in the
distinguishable-photon coincidence term. Sectors with more photons use
the same polarization factor with threshold-detection arrival
probabilities. Dark counts add a two-detector accidental floor and a
one-sided-click accidental term with documented constant factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .decoy import (
    DecoyConfig,
    GainCell,
    GainsTable,
    INTENSITY_PAIRS,
    YieldBounds,
    poisson_pmf,
)
from .errors import DomainError, MdiqkdError
from .keyrate import (
    GllpInputs,
    KeyRateInputs,
    KeyRateResult,
    gllp_delta_ini,
    gllp_flawed_states,
    gllp_phase_error,
    secure_key_rate,
)
from .losstol import bound_phase_error
from .qstate import DensityMatrix, StokesVector, stokes_from_density, virtual_states

#: photon-number ceiling for the forward model (Poisson tail < 1e-20
#: for the weak intensities this package works with)
_FORWARD_CUTOFF = 24

#: fraction of symmetric-Bell coincidences the linear-optics relay keeps
#: after beam-splitter output-pattern post-selection
_RELAY_DUTY_FACTOR = 0.25

#: chance that a lone stray click pairs with a dark count on the one
#: detector combination that mimics the successful outcome
_DARK_SINGLE_FACTOR = 0.5

#: number of detector pairings whose double-dark coincidence mimics the
#: successful outcome
_DARK_DOUBLE_FACTOR = 2.0

_KET_H = np.array([1.0, 0.0], dtype=complex)
_KET_V = np.array([0.0, 1.0], dtype=complex)
_BELL_SYMMETRIC = (np.kron(_KET_H, _KET_V) + np.kron(_KET_V, _KET_H)) / math.sqrt(2)
_P_BELL = np.outer(_BELL_SYMMETRIC, _BELL_SYMMETRIC.conj())
_P_CLASSICAL = 0.5 * (
    np.outer(np.kron(_KET_H, _KET_V), np.kron(_KET_H, _KET_V).conj())
    + np.outer(np.kron(_KET_V, _KET_H), np.kron(_KET_V, _KET_H).conj())
)


@dataclass(frozen=True)
class ChannelModel:
    """Symmetric-relay channel and detection parameters."""

    fiber_loss_coeff: float = 0.2  # dB / km
    distance_a_km: float = 5.0
    distance_b_km: float = 5.0
    detector_efficiency: float = 0.2
    dark_prob_per_window: float = 1.5e-5
    bsm_visibility_error: float = 0.015

    def __post_init__(self):
        if self.fiber_loss_coeff < 0 or self.distance_a_km < 0 or self.distance_b_km < 0:
            raise DomainError("loss coefficient and distances must be nonnegative")
        if not 0.0 < self.detector_efficiency <= 1.0:
            raise DomainError("detector_efficiency must lie in (0, 1]")
        if not 0.0 <= self.dark_prob_per_window < 1.0:
            raise DomainError("dark_prob_per_window must lie in [0, 1)")
        if not 0.0 <= self.bsm_visibility_error <= 1.0:
            raise DomainError("bsm_visibility_error must lie in [0, 1]")

    def transmittance_a(self) -> float:
        return self.detector_efficiency * 10.0 ** (
            -self.fiber_loss_coeff * self.distance_a_km / 10.0
        )

    def transmittance_b(self) -> float:
        return self.detector_efficiency * 10.0 ** (
            -self.fiber_loss_coeff * self.distance_b_km / 10.0
        )


@dataclass(frozen=True)
class SimulatedGains:
    """Forward-model output: the gain table plus signal-intensity Z stats."""

    gains: GainsTable
    signal_gain_z: float
    signal_qber_z: float


@dataclass(frozen=True)
class SweepPoint:
    """One (distance, flaw angle) grid point of a comparison sweep."""

    distance_km: float
    delta: float
    rate_losstol: float | None
    rate_gllp: float | None
    phase_error_upper: float | None
    signal_qber_z: float | None
    status: str  # "ok" or "failed: <reason>"


def _relay_element(visibility_error: float) -> np.ndarray:
    return (1.0 - visibility_error) * _P_BELL + visibility_error * _P_CLASSICAL


def _sector_yield(
    m: int,
    n: int,
    polarization_factor: float,
    eta_a: float,
    eta_b: float,
    dark: float,
) -> float:
    """Total yield of the (m, n) photon-number sector, clamped to [0, 1]."""
    arrive_a = 1.0 - (1.0 - eta_a) ** m
    arrive_b = 1.0 - (1.0 - eta_b) ** n
    coincidence = (
        arrive_a * arrive_b * _RELAY_DUTY_FACTOR * polarization_factor
        if m and n
        else 0.0
    )
    accidental = (
        _DARK_SINGLE_FACTOR * dark * (arrive_a * (1.0 - arrive_b) + arrive_b * (1.0 - arrive_a))
        + _DARK_DOUBLE_FACTOR * dark * dark * (1.0 - arrive_a) * (1.0 - arrive_b)
    )
    return min(max(coincidence + accidental, 0.0), 1.0)


def simulate_gains(
    model: ChannelModel,
    states: Mapping[str, DensityMatrix],
    config: DecoyConfig,
) -> SimulatedGains:
    """Closed-form gain table for every pair of the given source states.

    ``states`` maps state labels to the density matrices each party
    sends (both parties use the same set). Gains are untruncated
    double-Poisson mixtures of the sector yields, so they are exactly
    representable by the decoy model.
    """
    relay = _relay_element(model.bsm_visibility_error)
    eta_a, eta_b = model.transmittance_a(), model.transmittance_b()
    dark = model.dark_prob_per_window

    labels = list(states)
    pol = {
        (la, lb): float(
            np.trace(relay @ np.kron(states[la].matrix, states[lb].matrix)).real
        )
        for la in labels
        for lb in labels
    }

    weights = {
        label: np.array(
            [poisson_pmf(m, config.intensities[label]) for m in range(_FORWARD_CUTOFF)]
        )
        for label in config.intensities
    }

    cells: dict[tuple[str, str, str, str], GainCell] = {}
    for la, lb in pol:
        sector = np.array(
            [
                [
                    _sector_yield(m, n, pol[(la, lb)], eta_a, eta_b, dark)
                    for n in range(_FORWARD_CUTOFF)
                ]
                for m in range(_FORWARD_CUTOFF)
            ]
        )
        for ia, ib in INTENSITY_PAIRS:
            q = float(weights[ia] @ sector @ weights[ib])
            cells[(la, lb, ia, ib)] = GainCell(value=min(max(q, 0.0), 1.0))

    table = GainsTable(cells=cells)
    z_pairs = [(a, b) for a in ("0Z", "1Z") for b in ("0Z", "1Z")]
    zz = [table.gain(a, b, "signal", "signal").value for a, b in z_pairs]
    total = sum(zz)
    same_bit = table.gain("0Z", "0Z", "signal", "signal").value + table.gain(
        "1Z", "1Z", "signal", "signal"
    ).value
    return SimulatedGains(
        gains=table,
        signal_gain_z=total / 4.0,
        signal_qber_z=same_bit / total if total > 0 else 0.0,
    )


def _states_from_flaw(delta: float) -> dict[str, DensityMatrix]:
    kets = gllp_flawed_states(delta)
    labels = ("0Z", "1Z", "0X", "1X")
    return {lbl: DensityMatrix.pure(ket) for lbl, ket in zip(labels, kets)}


def single_photon_yields(
    model: ChannelModel, states: Mapping[str, DensityMatrix]
) -> dict[tuple[str, str], float]:
    """Exact (1, 1)-sector yield of every state pair under the model.

    These are the quantities the decoy analysis estimates from measured
    gains; the simulator knows them in closed form, which is what an
    asymptotic rate-versus-distance comparison should consume.
    """
    relay = _relay_element(model.bsm_visibility_error)
    eta_a, eta_b = model.transmittance_a(), model.transmittance_b()
    out: dict[tuple[str, str], float] = {}
    for la in states:
        for lb in states:
            pol = float(
                np.trace(relay @ np.kron(states[la].matrix, states[lb].matrix)).real
            )
            out[(la, lb)] = _sector_yield(
                1, 1, pol, eta_a, eta_b, model.dark_prob_per_window
            )
    return out


def _subset_stokes(
    states: Mapping[str, DensityMatrix], labels: Sequence[str]
) -> dict[str, StokesVector]:
    out = {}
    for lbl in labels:
        s = stokes_from_density(states[lbl])
        out[lbl] = StokesVector(s.s1, 0.0, s.s3)  # flawed states are in-plane
    return out


def rate_at_point(
    model: ChannelModel,
    delta: float,
    config: DecoyConfig,
    ec_efficiency: float = 1.16,
) -> tuple[KeyRateResult, KeyRateResult, float, float]:
    """Loss-tolerant and quantum-coin rates for one simulated grid point.

    Returns ``(rate_losstol, rate_gllp, phase_error_upper,
    signal_qber_z)``. This is an asymptotic comparison: both analyses
    consume the model's exact single-photon-pair yields (what the decoy
    stage would estimate from measured gains, without its finite
    intensity-grid slack) and the same simulated signal-intensity Z
    statistics; they differ only in the phase-error treatment.
    """
    states = _states_from_flaw(delta)
    sim = simulate_gains(model, states, config)
    y11 = single_photon_yields(model, states)

    z_pairs = [(a, b) for a in ("0Z", "1Z") for b in ("0Z", "1Z")]
    y11z_pooled = sum(y11[p] for p in z_pairs) / 4.0
    mu = config.intensities["signal"]
    q11z = mu * mu * math.exp(-2.0 * mu) * y11z_pooled

    three_labels = ("0Z", "1Z", "0X")
    pinned = YieldBounds(
        bounds={
            (a, b): (y11[(a, b)], y11[(a, b)])
            for a in three_labels
            for b in three_labels
        }
    )
    three = _subset_stokes(states, three_labels)
    vir = virtual_states(states["0Z"], states["1Z"])
    phase = bound_phase_error(pinned, three, three, vir, vir)

    lt_inputs = KeyRateInputs(
        single_photon_gain_lower=q11z,
        phase_error_upper=phase.value,
        signal_gain=sim.signal_gain_z,
        signal_qber=sim.signal_qber_z,
        ec_efficiency=ec_efficiency,
        signal_pulse_count=1.0,
    )
    rate_lt = secure_key_rate(lt_inputs)

    x_cells = {
        (a, b): sim.gains.gain(a, b, "signal", "signal").value
        for a in ("0X", "1X")
        for b in ("0X", "1X")
    }
    x_total = sum(x_cells.values())
    ex_bit = (
        (x_cells[("0X", "1X")] + x_cells[("1X", "0X")]) / x_total
        if x_total > 0
        else 0.0
    )
    kets = gllp_flawed_states(delta)
    delta_ini = gllp_delta_ini(kets, kets)
    inflated = gllp_phase_error(
        GllpInputs(delta=delta, y11=y11z_pooled, ex_bit=ex_bit), delta_ini
    )
    gllp_inputs = replace(lt_inputs, phase_error_upper=inflated.value)
    rate_gllp = secure_key_rate(gllp_inputs)
    return rate_lt, rate_gllp, phase.value, sim.signal_qber_z


def _uniform_counts(
    gains: GainsTable, config: DecoyConfig
) -> dict[tuple[str, str, str, str], float]:
    """Pulse-pair counts for every simulated cell (uniform state choice).

    The simulator works with whatever state set it was given (three
    canonical states, or four when the comparator's flawed X pair is
    included), so cell counts split the total evenly across the states
    actually present rather than using the three-state send
    probabilities.
    """
    labels_a, labels_b = gains.state_labels()
    counts: dict[tuple[str, str, str, str], float] = {}
    for sa, sb, ia, ib in gains.cells:
        counts[(sa, sb, ia, ib)] = (
            config.total_pulses
            * config.intensity_probs[ia]
            * config.intensity_probs[ib]
            / (len(labels_a) * len(labels_b))
        )
    return counts


def run_sweep(
    model: ChannelModel,
    distances_km: Sequence[float],
    deltas: Sequence[float],
    config: DecoyConfig,
    ec_efficiency: float = 1.16,
) -> list[SweepPoint]:
    """Rate comparison over a (distance, flaw) grid.

    Distances set both fiber arms to half the total span. A failure at
    one grid point (infeasible bounds, degenerate states) marks that
    point and the sweep continues.
    """
    points: list[SweepPoint] = []
    for dist in distances_km:
        arm = dist / 2.0
        m = replace(model, distance_a_km=arm, distance_b_km=arm)
        for delta in deltas:
            try:
                rate_lt, rate_gllp, ex_u, e_z = rate_at_point(
                    m, delta, config, ec_efficiency
                )
                points.append(
                    SweepPoint(
                        distance_km=dist,
                        delta=delta,
                        rate_losstol=rate_lt.rate,
                        rate_gllp=rate_gllp.rate,
                        phase_error_upper=ex_u,
                        signal_qber_z=e_z,
                        status="ok",
                    )
                )
            except MdiqkdError as exc:
                points.append(
                    SweepPoint(
                        distance_km=dist,
                        delta=delta,
                        rate_losstol=None,
                        rate_gllp=None,
                        phase_error_upper=None,
                        signal_qber_z=None,
                        status=f"failed: {exc}",
                    )
                )
    return points
