"""Secure key rate assembly, plus the quantum-coin comparator analysis.

The loss-tolerant rate combines the certified single-photon quantities
with the measured signal-intensity statistics:

    R = Q11_L * [1 - h(eX_U)] - Q_sig * f_ec * h(E_sig)

Negative rates are meaningful (the protocol certifies no key) and are
preserved; presentation layers may clamp with an explicit flag.

The comparator implements the older quantum-coin treatment of state
preparation flaws, in which channel loss amplifies the basis dependence
of the source: the coin imbalance grows as ``delta_ini / Y11`` and feeds
an inflated phase-error estimate. It is included to quantify what the
rejected-data analysis buys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .qstate import DensityMatrix, fidelity

#: hard-coded error-correction inefficiency used by the bundled reports
DEFAULT_EC_EFFICIENCY = 1.16


@dataclass(frozen=True)
class KeyRateInputs:
    """Everything the asymptotic rate formula consumes."""

    single_photon_gain_lower: float  # certified lower bound, Z basis, signal
    phase_error_upper: float  # certified upper bound on the 1-photon phase error
    signal_gain: float  # measured Z-basis gain at signal intensity
    signal_qber: float  # measured Z-basis bit error rate at signal intensity
    ec_efficiency: float  # error-correction inefficiency, >= 1
    signal_pulse_count: float  # Z-basis signal pulse pairs contributing to the key

    def __post_init__(self):
        for name in ("single_photon_gain_lower", "signal_gain"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")
        for name in ("phase_error_upper", "signal_qber"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1]")
        if self.ec_efficiency < 1.0:
            raise DomainError("ec_efficiency must be >= 1")
        if self.signal_pulse_count < 0:
            raise DomainError("signal_pulse_count must be nonnegative")


@dataclass(frozen=True)
class KeyRateResult:
    """Asymptotic rate per pulse pair and the implied key length."""

    rate: float  # may be negative: no certified key
    key_length: float  # rate * signal_pulse_count, same sign as rate


@dataclass(frozen=True)
class GllpInputs:
    """Inputs to the quantum-coin phase-error inflation."""

    delta: float  # preparation flaw angle (radians)
    y11: float  # single-photon-pair yield at the relay
    ex_bit: float  # measured X-basis bit error rate

    def __post_init__(self):
        if self.y11 <= 0.0:
            raise DomainError("y11 must be positive")
        if not 0.0 <= self.ex_bit <= 1.0:
            raise DomainError("ex_bit must lie in [0, 1]")


@dataclass(frozen=True)
class GllpPhaseError:
    """Inflated phase-error estimate, or the admission that none exists."""

    value: float
    vacuous: bool


def binary_entropy(x: float) -> float:
    """Shannon entropy of a bit, in bits; 0 at both endpoints."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def secure_key_rate(inputs: KeyRateInputs) -> KeyRateResult:
    """Asymptotic secure key rate per signal-intensity Z pulse pair.

    The privacy-amplification term ``1 - h(eX)`` is valid for phase-error
    rates up to one half; beyond that the phase-error estimate certifies
    nothing, so the term is floored at zero rather than allowed to climb
    back up the far side of the entropy curve.
    """
    privacy = 1.0 - binary_entropy(min(inputs.phase_error_upper, 0.5))
    rate = (
        inputs.single_photon_gain_lower * privacy
        - inputs.signal_gain
        * inputs.ec_efficiency
        * binary_entropy(inputs.signal_qber)
    )
    return KeyRateResult(rate=rate, key_length=rate * inputs.signal_pulse_count)


def gllp_flawed_states(delta: float) -> tuple[np.ndarray, ...]:
    """The four pure test states with preparation flaw angle ``delta``.

    Returned in the order (0Z, 1Z, 0X, 1X) as unit kets in the Z
    eigenbasis. At ``delta = 0`` these are the ideal BB84 states.
    """
    half = 0.5 * delta
    quarter = 0.25 * delta
    return (
        np.array([1.0, 0.0]),
        np.array([-math.sin(half), math.cos(half)]),
        np.array(
            [math.cos(math.pi / 4 + quarter), math.sin(math.pi / 4 + quarter)]
        ),
        np.array(
            [math.cos(-math.pi / 4 + quarter), math.sin(-math.pi / 4 + quarter)]
        ),
    )


def _basis_mixtures(states: Sequence[np.ndarray]) -> tuple[DensityMatrix, DensityMatrix]:
    """(rho_Z, rho_X) equal mixtures from the 4 states in (0Z, 1Z, 0X, 1X) order."""
    if len(states) != 4:
        raise DomainError("need the four states in (0Z, 1Z, 0X, 1X) order")
    kets = [np.asarray(s, dtype=complex) for s in states]

    def mix(a: np.ndarray, b: np.ndarray) -> DensityMatrix:
        return DensityMatrix.from_matrix(
            0.5 * (np.outer(a, a.conj()) + np.outer(b, b.conj()))
        )

    return mix(kets[0], kets[1]), mix(kets[2], kets[3])


def gllp_delta_ini(
    states_a: Sequence[np.ndarray], states_b: Sequence[np.ndarray]
) -> float:
    """Initial quantum-coin imbalance of a pair of flawed BB84 sources.

    ``(1/2) [1 - F(rho_X, rho_Z)_A * F(rho_X, rho_Z)_B]`` with the basis
    mixtures of each party's four states; 0 for basis-independent
    sources, at most 1/2.
    """
    product = 1.0
    for states in (states_a, states_b):
        rho_z, rho_x = _basis_mixtures(states)
        product *= fidelity(rho_x, rho_z)
    value = 0.5 * (1.0 - product)
    return min(max(value, 0.0), 0.5)


def gllp_phase_error(inputs: GllpInputs, delta_ini: float) -> GllpPhaseError:
    """Quantum-coin inflated phase-error estimate.

    The coin imbalance ``delta_ini / y11`` enters the square-root
    inflation of the measured X-basis error rate. Once the imbalance
    reaches 1 the inequality constrains nothing and the result is
    reported as vacuous (value pinned to 1).
    """
    if not 0.0 <= delta_ini <= 0.5:
        raise DomainError(f"delta_ini {delta_ini} outside [0, 1/2]")
    imbalance = delta_ini / inputs.y11
    if imbalance >= 1.0:
        return GllpPhaseError(value=1.0, vacuous=True)
    ex = inputs.ex_bit
    root = math.sqrt(ex) + 2.0 * math.sqrt(imbalance) * (
        math.sqrt((1.0 - imbalance) * (1.0 - ex))
        - math.sqrt(imbalance * ex)
    )
    value = min(root * root, 1.0)
    return GllpPhaseError(value=value, vacuous=value >= 1.0)
