"""Decoy-state bounds on the single-photon-pair yield.

Each party sends phase-randomized weak coherent pulses at one of three
intensities, so every observed coincidence gain is a double-Poisson
mixture of unobservable photon-number-resolved yields ``Y[m, n]``. For a
given state pair, the yields feasible for the nine measured gains form a
polytope, and linear programs over it give certified lower/upper bounds
on ``Y[1, 1]``.

Statistical windows: with ``k_sigma > 0`` each gain ``Q`` measured on
``N_cell`` pulse pairs is held within ``Q (1 +/- k / sqrt(N_cell Q))``
(for ``Q == 0``, within ``[0, k^2 / N_cell]``, the usual Poisson ceiling
for zero observed events); ``k_sigma == 0`` means asymptotic equality
constraints. Photon numbers above ``n_cut`` are dropped from the
truncated sum; since each dropped term contributes at most its Poisson
weight, the truncation mass is subtracted from the window floor, which
keeps the relaxation sound. Gains quoted at finite print precision may
carry a ``quantum`` (one unit in the last printed place); the window is
widened by half a quantum on each side so the polytope contains every
gain that rounds to the printed value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    ConvergenceError,
    DataInconsistencyError,
    DomainError,
    MissingDataError,
)
from .lp import EQUAL, GREATER, LESS, LinearProgram, solve

INTENSITY_LABELS = ("signal", "decoy1", "decoy2")
STATE_LABELS = ("0Z", "1Z", "0X")

#: state pairs in the canonical reporting order (Alice label, Bob label)
PAIR_ORDER: tuple[tuple[str, str], ...] = (
    ("0Z", "0Z"),
    ("0Z", "1Z"),
    ("1Z", "0Z"),
    ("1Z", "1Z"),
    ("0X", "0Z"),
    ("0X", "1Z"),
    ("0Z", "0X"),
    ("1Z", "0X"),
    ("0X", "0X"),
)

#: intensity pairs in the canonical reporting order (Alice, Bob)
INTENSITY_PAIRS: tuple[tuple[str, str], ...] = tuple(
    (ia, ib) for ia in INTENSITY_LABELS for ib in INTENSITY_LABELS
)


def poisson_pmf(m: int, mean: float) -> float:
    """P(N = m) for N ~ Poisson(mean); exact 1 at (0, 0.0)."""
    if mean < 0:
        raise DomainError("negative Poisson mean")
    if mean == 0.0:
        return 1.0 if m == 0 else 0.0
    return math.exp(-mean + m * math.log(mean) - math.lgamma(m + 1))


@dataclass(frozen=True)
class DecoyConfig:
    """Intensities, send probabilities and statistical settings."""

    intensities: Mapping[str, float]  # signal > decoy1 > decoy2 >= 0
    intensity_probs: Mapping[str, float]
    state_probs: Mapping[str, float]
    total_pulses: float
    k_sigma: float = 0.0
    n_cut: int = 7

    def __post_init__(self):
        for label in INTENSITY_LABELS:
            if label not in self.intensities:
                raise DomainError(f"missing intensity {label!r}")
            if label not in self.intensity_probs:
                raise DomainError(f"missing intensity probability {label!r}")
        mu = self.intensities["signal"]
        nu1 = self.intensities["decoy1"]
        nu2 = self.intensities["decoy2"]
        if not (mu > nu1 > nu2 >= 0.0):
            raise DomainError(
                f"intensities must satisfy signal > decoy1 > decoy2 >= 0, "
                f"got {mu}, {nu1}, {nu2}"
            )
        for label in STATE_LABELS:
            if label not in self.state_probs:
                raise DomainError(f"missing state probability {label!r}")
        for probs in (self.intensity_probs, self.state_probs):
            total = sum(probs.values())
            if abs(total - 1.0) > 1e-9:
                raise DomainError(f"probabilities sum to {total}, expected 1")
            if any(p < 0 for p in probs.values()):
                raise DomainError("negative probability")
        if self.total_pulses <= 0:
            raise DomainError("total_pulses must be positive")
        if self.k_sigma < 0:
            raise DomainError("k_sigma must be >= 0")
        if self.n_cut < 2:
            raise DomainError("n_cut must be >= 2")


@dataclass(frozen=True)
class GainCell:
    """One measured coincidence gain, with optional print-precision slack."""

    value: float
    sigma: float | None = None
    quantum: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"gain {self.value} outside [0, 1]")
        if self.sigma is not None and self.sigma < 0:
            raise DomainError("negative gain sigma")
        if self.quantum < 0:
            raise DomainError("negative gain quantum")


@dataclass(frozen=True)
class GainsTable:
    """Coincidence gains keyed by (state A, state B, intensity A, intensity B)."""

    cells: Mapping[tuple[str, str, str, str], GainCell] = field(default_factory=dict)

    def gain(self, sa: str, sb: str, ia: str, ib: str) -> GainCell:
        key = (sa, sb, ia, ib)
        if key not in self.cells:
            raise MissingDataError(
                f"no gain for state pair ({sa}, {sb}) at intensities ({ia}, {ib})"
            )
        return self.cells[key]

    def pair_cells(self, sa: str, sb: str) -> dict[tuple[str, str], GainCell]:
        """All nine intensity cells for one state pair (error if any missing)."""
        return {
            (ia, ib): self.gain(sa, sb, ia, ib) for ia, ib in INTENSITY_PAIRS
        }

    def state_labels(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """Distinct (Alice, Bob) state labels present, in first-seen order."""
        seen_a: list[str] = []
        seen_b: list[str] = []
        for sa, sb, _, _ in self.cells:
            if sa not in seen_a:
                seen_a.append(sa)
            if sb not in seen_b:
                seen_b.append(sb)
        return tuple(seen_a), tuple(seen_b)


@dataclass(frozen=True)
class YieldBounds:
    """Certified [lower, upper] for Y[1, 1], one interval per state pair."""

    bounds: Mapping[tuple[str, str], tuple[float, float]]

    def __post_init__(self):
        for pair, (lo, hi) in self.bounds.items():
            if not (0.0 <= lo <= hi <= 1.0 + 1e-12):
                raise DomainError(f"bounds {lo}, {hi} for pair {pair} not ordered in [0, 1]")

    def interval(self, sa: str, sb: str) -> tuple[float, float]:
        key = (sa, sb)
        if key not in self.bounds:
            raise MissingDataError(f"no yield bounds for state pair ({sa}, {sb})")
        return self.bounds[key]


def pulse_counts(config: DecoyConfig) -> dict[tuple[str, str, str, str], float]:
    """Expected pulse-pair count behind every (state, intensity) cell."""
    counts: dict[tuple[str, str, str, str], float] = {}
    for sa in STATE_LABELS:
        for sb in STATE_LABELS:
            for ia, ib in INTENSITY_PAIRS:
                counts[(sa, sb, ia, ib)] = (
                    config.total_pulses
                    * config.intensity_probs[ia]
                    * config.intensity_probs[ib]
                    * config.state_probs[sa]
                    * config.state_probs[sb]
                )
    return counts


def _cell_window(
    cell: GainCell, n_cell: float, k: float, tail: float
) -> tuple[float, float]:
    """Feasible [lo, hi] for the truncated Poisson-mixture sum of one cell."""
    q = cell.value
    if k == 0.0:
        lo, hi = q, q
    elif q > 0.0:
        fluct = k / math.sqrt(n_cell * q)
        lo, hi = q * (1.0 - fluct), q * (1.0 + fluct)
    else:
        lo, hi = 0.0, k * k / n_cell
    half_quantum = 0.5 * cell.quantum
    # A negative floor is a vacuous constraint (yields are nonnegative); keep
    # it as-is rather than clamping so window widths stay k-monotone.
    return lo - half_quantum - tail, hi + half_quantum


def _bound_from_cells(
    cells: Mapping[tuple[str, str], GainCell],
    n_pulses: Mapping[tuple[str, str], float],
    config: DecoyConfig,
    pair_name: str,
) -> tuple[float, float]:
    """Min/max Y[1, 1] over the yield polytope of one state pair."""
    n_ph = config.n_cut + 1
    n_vars = n_ph * n_ph

    coeffs = {
        label: np.array(
            [poisson_pmf(m, config.intensities[label]) for m in range(n_ph)]
        )
        for label in INTENSITY_LABELS
    }

    rows = []
    lo_list = []
    hi_list = []
    row_names = []
    for ia, ib in INTENSITY_PAIRS:
        cell = cells[(ia, ib)]
        weights = np.outer(coeffs[ia], coeffs[ib]).reshape(n_vars)
        tail = 1.0 - weights.sum()
        lo, hi = _cell_window(cell, n_pulses[(ia, ib)], config.k_sigma, tail)
        rows.append(weights)
        lo_list.append(lo)
        hi_list.append(hi)
        row_names.append(f"{pair_name} at intensities ({ia}, {ib})")

    a = np.array(rows)
    objective = np.zeros(n_vars)
    objective[1 * n_ph + 1] = 1.0

    results = []
    for sense in (LESS, GREATER):  # minimize, then maximize
        lp = LinearProgram(
            c=objective,
            A=a,
            b_lo=np.array(lo_list),
            b_hi=np.array(hi_list),
            x_lo=np.zeros(n_vars),
            x_hi=np.ones(n_vars),
            sense="min" if sense == LESS else "max",
        )
        sol = solve(lp)
        if sol.status == "infeasible":
            offending = (
                row_names[sol.offending_row]
                if sol.offending_row is not None and sol.offending_row < len(row_names)
                else "unknown constraint"
            )
            raise DataInconsistencyError(
                f"gain table for {pair_name} admits no photon-number yield "
                f"decomposition; tightest conflict at {offending}",
                constraint=offending,
            )
        if sol.status != "optimal":
            raise ConvergenceError(
                f"yield bound LP for {pair_name} ended with status {sol.status}"
            )
        results.append(sol.objective_value)

    y_lo = min(max(results[0], 0.0), 1.0)
    y_hi = min(max(results[1], 0.0), 1.0)
    if y_lo > y_hi:  # only possible through rounding at the clamp
        y_lo = y_hi
    return y_lo, y_hi


def bound_yield_11(
    pair: tuple[str, str],
    gains: GainsTable,
    counts: Mapping[tuple[str, str, str, str], float],
    config: DecoyConfig,
) -> tuple[float, float]:
    """Certified [lower, upper] on Y[1, 1] for one state pair."""
    sa, sb = pair
    cells = gains.pair_cells(sa, sb)
    n_pulses = {
        (ia, ib): counts[(sa, sb, ia, ib)] for ia, ib in INTENSITY_PAIRS
    }
    return _bound_from_cells(cells, n_pulses, config, f"state pair ({sa}, {sb})")


def bound_all_pairs(
    gains: GainsTable,
    counts: Mapping[tuple[str, str, str, str], float],
    config: DecoyConfig,
) -> YieldBounds:
    """Yield bounds for all nine canonical state pairs."""
    return YieldBounds(
        bounds={
            pair: bound_yield_11(pair, gains, counts, config) for pair in PAIR_ORDER
        }
    )


def pooled_z_cells(gains: GainsTable) -> dict[tuple[str, str], GainCell]:
    """Basis-level ZZ gains: the equal-weight mix of the four Z state pairs.

    Each party's two Z states are sent with equal probability, so the
    per-(intensity pair) gain of the pooled ZZ "pair" is the average of
    the four underlying cells. Print-precision quanta average the same
    way; sigmas combine in quadrature.
    """
    pooled: dict[tuple[str, str], GainCell] = {}
    z_pairs = [(sa, sb) for sa in ("0Z", "1Z") for sb in ("0Z", "1Z")]
    for ia, ib in INTENSITY_PAIRS:
        cells = [gains.gain(sa, sb, ia, ib) for sa, sb in z_pairs]
        value = sum(c.value for c in cells) / 4.0
        quantum = sum(c.quantum for c in cells) / 4.0
        sigmas = [c.sigma for c in cells]
        sigma = (
            math.sqrt(sum(s * s for s in sigmas)) / 4.0
            if all(s is not None for s in sigmas)
            else None
        )
        pooled[(ia, ib)] = GainCell(value=value, sigma=sigma, quantum=quantum)
    return pooled


def bound_Q11Z(
    gains: GainsTable,
    counts: Mapping[tuple[str, str, str, str], float],
    config: DecoyConfig,
) -> float:
    """Lower bound on the signal-intensity single-photon-pair gain in Z.

    Pools the four Z-basis state pairs into one basis-level gain table,
    bounds its Y[1, 1] from below, and multiplies by the double-Poisson
    weight of the (1, 1) component at signal intensity.
    """
    pooled = pooled_z_cells(gains)
    p_z_a = config.state_probs["0Z"] + config.state_probs["1Z"]
    n_pulses = {
        (ia, ib): (
            config.total_pulses
            * config.intensity_probs[ia]
            * config.intensity_probs[ib]
            * p_z_a
            * p_z_a
        )
        for ia, ib in INTENSITY_PAIRS
    }
    y_lo, _ = _bound_from_cells(pooled, n_pulses, config, "pooled Z basis")
    mu = config.intensities["signal"]
    return mu * mu * math.exp(-2.0 * mu) * y_lo


def forward_gains(
    yields: np.ndarray,
    config: DecoyConfig,
) -> dict[tuple[str, str], float]:
    """Exact double-Poisson mixture gains from a full yield matrix.

    ``yields`` has shape (M, M) with M > n_cut; entries above n_cut feed
    the untruncated forward model, so bounds computed from these gains
    must still bracket ``yields[1, 1]`` (soundness test hook).
    """
    m_max = yields.shape[0]
    gains: dict[tuple[str, str], float] = {}
    for ia, ib in INTENSITY_PAIRS:
        wa = np.array([poisson_pmf(m, config.intensities[ia]) for m in range(m_max)])
        wb = np.array([poisson_pmf(n, config.intensities[ib]) for n in range(m_max)])
        gains[(ia, ib)] = float(wa @ yields @ wb)
    return gains
