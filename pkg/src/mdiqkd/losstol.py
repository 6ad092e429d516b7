"""Phase-error estimation from rejected-data coincidence statistics.

The measurement relay, however adversarial, acts on each in-plane state
pair through nine effective Pauli-transmission coefficients ``q``: the
post-selected yield of any pair of in-plane Bloch vectors is the bilinear
form ``Y(a, b) = sum_t sum_t' q[t, t'] a_t b_t'`` with Pauli labels ``t
in {I, X, Z}`` and ``a_I = 1``. Nine linearly independent state pairs
therefore pin ``q`` exactly, and interval yield data pins it to a
polytope; optimizing the virtual X-basis yields over that polytope gives
a certified upper bound on the single-photon phase-error rate without
ever sending the virtual states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .decoy import PAIR_ORDER, YieldBounds
from .errors import (
    ConvergenceError,
    DataInconsistencyError,
    DomainError,
    PhysicalityError,
    SingularSystemError,
)
from .lp import LinearProgram, solve
from .qstate import ALGEBRAIC_TOL, PHYSICALITY_TOL, StokesVector, VirtualState

#: Pauli index pairs in transmission order: (Alice label, Bob label)
PAULI_ORDER: tuple[tuple[str, str], ...] = (
    ("I", "I"),
    ("I", "X"),
    ("I", "Z"),
    ("X", "I"),
    ("X", "X"),
    ("X", "Z"),
    ("Z", "I"),
    ("Z", "X"),
    ("Z", "Z"),
)

#: virtual-state index pairs counted as phase errors. The labeling is
#: conventional and pinned by the ideal-case oracle: for perfect BB84
#: sources and a relay projecting onto the symmetric Bell state, the
#: anti-correlated virtual pairs below get exactly zero yield.
ERROR_VIRTUAL_PAIRS: tuple[tuple[int, int], ...] = ((0, 1), (1, 0))
CORRECT_VIRTUAL_PAIRS: tuple[tuple[int, int], ...] = ((0, 0), (1, 1))

#: number of in-plane grid directions used for the physicality polytope
GRID_DIRECTIONS = 8

_CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class TransmissionRow:
    """Bilinear-form coefficients of one state pair against ``q``."""

    coefficients: np.ndarray  # shape (9,), transmission order

    def __post_init__(self):
        arr = np.asarray(self.coefficients, dtype=float)
        if arr.shape != (9,):
            raise DomainError(f"transmission row must have 9 entries, got {arr.shape}")
        object.__setattr__(self, "coefficients", arr)


@dataclass(frozen=True)
class PauliTransmission:
    """The nine effective Pauli-pair transmission coefficients of the relay."""

    q: np.ndarray  # shape (9,), transmission order

    def __post_init__(self):
        arr = np.asarray(self.q, dtype=float)
        if arr.shape != (9,):
            raise DomainError(f"transmission vector must have 9 entries, got {arr.shape}")
        if not -PHYSICALITY_TOL <= arr[0] <= 1.0 + PHYSICALITY_TOL:
            raise PhysicalityError(
                f"identity-pair transmission {arr[0]} outside [0, 1]"
            )
        object.__setattr__(self, "q", arr)

    def grid_yields(self) -> np.ndarray:
        """Yields on the fixed grid of in-plane unit-vector pairs."""
        grid = _grid_vectors()
        rows = np.array(
            [build_row(a, b).coefficients for a in grid for b in grid]
        )
        return rows @ self.q

    def validate_physical(self, tol: float = PHYSICALITY_TOL) -> None:
        """Raise unless every grid yield lies in [0, 1] within ``tol``."""
        yields = self.grid_yields()
        if yields.min() < -tol or yields.max() > 1.0 + tol:
            raise PhysicalityError(
                f"grid yields span [{yields.min():.3e}, {yields.max():.3e}], "
                "outside [0, 1]"
            )


@dataclass(frozen=True)
class TransmissionSystem:
    """The 9x9 linear system tying ``q`` to the canonical pair yields."""

    matrix: np.ndarray  # shape (9, 9); rows follow PAIR_ORDER
    condition_number: float


@dataclass(frozen=True)
class PhaseErrorBound:
    """Certified phase-error bound with the underlying LP optima."""

    value: float
    correct_lower: float
    error_upper: float
    active_constraints: tuple[str, ...]


def _grid_vectors() -> list[StokesVector]:
    angles = 2.0 * np.pi * np.arange(GRID_DIRECTIONS) / GRID_DIRECTIONS
    return [
        StokesVector(float(np.cos(t)), 0.0, float(np.sin(t))) for t in angles
    ]


def build_row(alice: StokesVector, bob: StokesVector) -> TransmissionRow:
    """Coefficient row of one (Alice, Bob) in-plane state pair."""
    for name, s in (("Alice", alice), ("Bob", bob)):
        if abs(s.s2) > ALGEBRAIC_TOL:
            raise DomainError(
                f"{name} state has circular component {s.s2}; the transmission "
                "form is defined on the X-Z plane only"
            )
    ax, az = alice.s1, alice.s3
    bx, bz = bob.s1, bob.s3
    return TransmissionRow(
        coefficients=np.array(
            [1.0, bx, bz, ax, ax * bx, ax * bz, az, az * bx, az * bz]
        )
    )


def build_system(
    states_a: Mapping[str, StokesVector], states_b: Mapping[str, StokesVector]
) -> TransmissionSystem:
    """Assemble the 9x9 yield system over the canonical state pairs."""
    rows = np.array(
        [
            build_row(states_a[sa], states_b[sb]).coefficients
            for sa, sb in PAIR_ORDER
        ]
    )
    condition = float(np.linalg.cond(rows))
    if not np.isfinite(condition) or condition > _CONDITION_LIMIT:
        raise SingularSystemError(
            f"state pairs span a degenerate yield system (condition number "
            f"{condition:.3e}); three distinct states per party are required"
        )
    return TransmissionSystem(matrix=rows, condition_number=condition)


def solve_q_exact(
    system: TransmissionSystem, yields: Sequence[float]
) -> PauliTransmission:
    """Recover ``q`` exactly from the nine canonical pair yields."""
    y = np.asarray(yields, dtype=float)
    if y.shape != (9,):
        raise DomainError(f"need 9 yields in canonical pair order, got {y.shape}")
    q = np.linalg.solve(system.matrix, y)
    residual = float(np.max(np.abs(system.matrix @ q - y)))
    scale = float(np.max(np.abs(y)))
    if residual > 1e-10 * max(scale, 1.0):
        raise ConvergenceError(
            f"linear solve residual {residual:.3e} exceeds tolerance"
        )
    return PauliTransmission(q=q)


def _virtual_row(va: VirtualState, vb: VirtualState) -> np.ndarray:
    """Weighted transmission row of one virtual-state pair."""
    sa = _virtual_direction(va)
    sb = _virtual_direction(vb)
    return va.weight * vb.weight * build_row(sa, sb).coefficients


def _virtual_direction(v: VirtualState) -> StokesVector:
    from .qstate import stokes_from_density

    s = stokes_from_density(v.state)
    if abs(s.s2) > 1e-9:
        raise DomainError(
            f"virtual state has circular component {s.s2}; filter the source "
            "states into the X-Z plane first"
        )
    return StokesVector(s.s1, 0.0, s.s3)


def phase_error_exact(
    q: PauliTransmission,
    virtual_a: Sequence[VirtualState],
    virtual_b: Sequence[VirtualState],
) -> float:
    """Single-photon phase-error rate for exactly known transmission."""
    yields = {
        (j, k): float(_virtual_row(virtual_a[j], virtual_b[k]) @ q.q)
        for j in (0, 1)
        for k in (0, 1)
    }
    error = sum(yields[p] for p in ERROR_VIRTUAL_PAIRS)
    total = sum(yields.values())
    if total <= 0.0:
        raise DomainError(
            "all virtual yields vanish; the phase-error rate is undefined"
        )
    return min(max(error / total, 0.0), 1.0)


def bound_phase_error(
    bounds: YieldBounds,
    states_a: Mapping[str, StokesVector],
    states_b: Mapping[str, StokesVector],
    virtual_a: Sequence[VirtualState],
    virtual_b: Sequence[VirtualState],
) -> PhaseErrorBound:
    """Certified upper bound on the phase-error rate from interval yields.

    Two linear programs over the transmission polytope — the interval
    constraints from the nine canonical pairs, intersected with the
    physicality box and the [0, 1] grid-yield cuts — minimize the
    correctly-correlated virtual yield and maximize the erroneous one.
    The bound combines the optima as ``errU / (errU + corrL)``.
    """
    system = build_system(states_a, states_b)

    row_names = [f"state pair ({sa}, {sb})" for sa, sb in PAIR_ORDER]
    lo = np.empty(9)
    hi = np.empty(9)
    for i, (sa, sb) in enumerate(PAIR_ORDER):
        lo[i], hi[i] = bounds.interval(sa, sb)

    grid = _grid_vectors()
    grid_rows = np.array(
        [build_row(a, b).coefficients for a in grid for b in grid]
    )
    row_names += [
        f"grid direction pair {i}" for i in range(grid_rows.shape[0])
    ]

    a_mat = np.vstack([system.matrix, grid_rows])
    b_lo = np.concatenate([lo, np.zeros(grid_rows.shape[0])])
    b_hi = np.concatenate([hi, np.ones(grid_rows.shape[0])])
    x_lo = np.array([0.0] + [-1.0] * 8)
    x_hi = np.ones(9)

    c_correct = sum(
        _virtual_row(virtual_a[j], virtual_b[k]) for j, k in CORRECT_VIRTUAL_PAIRS
    )
    c_error = sum(
        _virtual_row(virtual_a[j], virtual_b[k]) for j, k in ERROR_VIRTUAL_PAIRS
    )

    optima = []
    active: list[str] = []
    for c, sense in ((c_correct, "min"), (c_error, "max")):
        lp = LinearProgram(
            c=c,
            A=a_mat,
            b_lo=b_lo,
            b_hi=b_hi,
            x_lo=x_lo,
            x_hi=x_hi,
            sense=sense,
            # transmission rows have O(1) coefficients; keep tiny yield
            # intervals from inflating them past the precision budget
            scale_floor=1.0,
        )
        sol = solve(lp)
        if sol.status == "infeasible":
            offending = (
                row_names[sol.offending_row]
                if sol.offending_row is not None and sol.offending_row < len(row_names)
                else "unknown constraint"
            )
            raise DataInconsistencyError(
                "yield intervals admit no physical Pauli transmission; "
                f"tightest conflict at {offending}",
                constraint=offending,
            )
        if sol.status != "optimal":
            raise ConvergenceError(
                f"phase-error LP ({sense}) ended with status {sol.status}"
            )
        optima.append(sol.objective_value)
        active += [
            row_names[i] for i in sol.active_rows if i < len(row_names)
        ]

    correct_lower = max(optima[0], 0.0)
    error_upper = optima[1]
    if error_upper <= 0.0:
        value = 0.0
    else:
        value = 1.0 / (1.0 + correct_lower / error_upper)
    return PhaseErrorBound(
        value=min(max(value, 0.0), 1.0),
        correct_lower=correct_lower,
        error_upper=error_upper,
        active_constraints=tuple(dict.fromkeys(active)),
    )
