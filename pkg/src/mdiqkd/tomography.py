"""Single-qubit state tomography from projective count data.

Counts from the four projections {H, V, D, R} are normalized for detector
dead time and dark counts, then a physical density matrix is fit by
maximum likelihood over a Cholesky-like parameterization. Monte-Carlo
resampling (Poisson counts, Gaussian waveplate angles) propagates the
measurement uncertainty to the Stokes parameters.

The projection produced by the analyzer is ``U_hwp(theta)^dag
U_qwp(phi)^dag |H>`` for half- and quarter-wave plates with fast axes at
``theta`` and ``phi``; the nominal settings are H=(0,0), V=(45deg,0),
D=(22.5deg,0) and R=(0,45deg).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, DomainError
from .qstate import (
    DensityMatrix,
    SourceCharacterization,
    StokesVector,
    stokes_from_density,
)

BASIS_LABELS = ("H", "V", "D", "R")

#: nominal waveplate settings (hwp, qwp) in radians for each projection
NOMINAL_ANGLES: dict[str, tuple[float, float]] = {
    "H": (0.0, 0.0),
    "V": (np.pi / 4, 0.0),
    "D": (np.pi / 8, 0.0),
    "R": (0.0, np.pi / 4),
}

#: tolerance for checking a record's angles against its basis label
ANGLE_TOL = 1e-9

#: maximally mixed starting point for the optimizer restart
_T_MIXED = np.array([np.sqrt(0.5), np.sqrt(0.5), 0.0, 0.0])


@dataclass(frozen=True)
class ProjectiveRecord:
    """One projective measurement: counts accumulated behind an analyzer."""

    basis_label: str
    hwp_angle: float  # radians
    qwp_angle: float  # radians
    raw_count: int
    acquisition_time: float  # seconds
    dead_time: float  # seconds
    dark_rate: float  # counts / second

    def __post_init__(self):
        if self.basis_label not in BASIS_LABELS:
            raise DomainError(f"unknown basis label {self.basis_label!r}")
        if self.raw_count < 0:
            raise DomainError("negative raw count")
        if self.raw_count * self.dead_time >= self.acquisition_time:
            raise DomainError(
                "detector dead longer than the acquisition window "
                f"({self.raw_count} counts x {self.dead_time} s >= {self.acquisition_time} s)"
            )
        nominal = NOMINAL_ANGLES[self.basis_label]
        if (
            abs(self.hwp_angle - nominal[0]) > ANGLE_TOL
            or abs(self.qwp_angle - nominal[1]) > ANGLE_TOL
        ):
            raise DomainError(
                f"angles ({self.hwp_angle}, {self.qwp_angle}) do not match the "
                f"nominal settings {nominal} for basis {self.basis_label}"
            )


@dataclass(frozen=True)
class TomographyResult:
    """Point estimate plus the Monte-Carlo Stokes distribution."""

    rho: DensityMatrix
    stokes_mean: StokesVector
    stokes_std: tuple[float, float, float]
    samples: tuple[StokesVector, ...]


def normalize_count(rec: ProjectiveRecord) -> float:
    """Dead-time- and dark-corrected count rate, clamped at zero.

    The detector is blind for ``raw_count * dead_time`` out of the
    acquisition window, so the live rate is ``n / (t - n tau)``; the dark
    rate is then subtracted. Slightly negative results (dark fluctuation
    on a near-empty channel) are clamped to 0 so downstream likelihood
    denominators stay positive.
    """
    live = rec.acquisition_time - rec.raw_count * rec.dead_time
    if live <= 0:
        raise DomainError("non-positive live time")
    return max(rec.raw_count / live - rec.dark_rate, 0.0)


def projector(theta: float, phi: float) -> np.ndarray:
    """Pure projection state behind HWP(theta) + QWP(phi), as a unit ket."""
    c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
    u_hwp = np.array([[c2, s2], [s2, -c2]], dtype=complex)
    c, s = np.cos(phi), np.sin(phi)
    u_qwp = np.array(
        [
            [c * c + 1j * s * s, (1 - 1j) * c * s],
            [(1 - 1j) * c * s, s * s + 1j * c * c],
        ]
    )
    ket = u_hwp.conj().T @ u_qwp.conj().T @ np.array([1.0, 0.0], dtype=complex)
    return ket / np.linalg.norm(ket)


def _rho_from_t(t: np.ndarray) -> np.ndarray:
    """Physical density matrix from the 4-real lower-triangular factor."""
    t1, t2, t3, t4 = t
    factor = np.array([[t1, 0.0], [t3 + 1j * t4, t2]])
    m = factor.conj().T @ factor
    trace = np.trace(m).real
    if trace <= 0.0:
        return np.eye(2, dtype=complex) / 2.0
    return m / trace


def _t_from_rho(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`_rho_from_t` (Cholesky-style), with tiny flooring."""
    r11 = max(m[1, 1].real, 1e-12)
    t2 = np.sqrt(r11)
    t3 = m[1, 0].real / t2
    t4 = m[1, 0].imag / t2
    t1 = np.sqrt(max(m[0, 0].real - t3 * t3 - t4 * t4, 1e-12))
    return np.array([t1, t2, t3, t4])


def _linear_inversion(rates: Mapping[str, float]) -> np.ndarray:
    """Direct Stokes estimate, radially projected into the Bloch ball."""
    total = rates["H"] + rates["V"]
    s = np.array(
        [
            2.0 * rates["D"] / total - 1.0,
            1.0 - 2.0 * rates["R"] / total,
            (rates["H"] - rates["V"]) / total,
        ]
    )
    norm = np.linalg.norm(s)
    if norm > 1.0:
        s = s / norm
    return s


def _likelihood(
    t: np.ndarray, rates: Mapping[str, float], projs: Mapping[str, np.ndarray]
) -> float:
    rho = _rho_from_t(t)
    total = rates["H"] + rates["V"]
    value = 0.0
    for label in BASIS_LABELS:
        ket = projs[label]
        p = max((ket.conj() @ rho @ ket).real, 1e-12)
        expected = total * p
        value += (expected - rates[label]) ** 2 / (2.0 * expected)
    return value


def mle_reconstruct(
    rates: Mapping[str, float],
    projectors_by_basis: Mapping[str, np.ndarray],
    warm_start: DensityMatrix | None = None,
) -> DensityMatrix:
    """Physical density matrix maximizing the Gaussian-count likelihood.

    Derivative-free simplex descent over the four factor parameters,
    started from the (physically projected) linear-inversion estimate and
    restarted once from the maximally mixed factor; the lower of the two
    minima wins. With ``warm_start`` (the reconstruction of nearby data,
    e.g. the unperturbed counts during Monte-Carlo resampling) the descent
    starts there instead and the restart is skipped, which converges in a
    fraction of the iterations for the same optimum. Deterministic: no
    randomness anywhere in the descent.
    """
    total = rates["H"] + rates["V"]
    if not total > 0:
        raise DomainError("need H + V rates > 0 to set the intensity scale")

    if warm_start is not None:
        starts = (_t_from_rho(warm_start.as_matrix()),)
    else:
        s = _linear_inversion(rates)
        rho0 = 0.5 * np.array(
            [[1.0 + s[2], s[0] - 1j * s[1]], [s[0] + 1j * s[1], 1.0 - s[2]]]
        )
        starts = (_t_from_rho(rho0), _T_MIXED)
    best = None
    for start in starts:
        res = minimize(
            _likelihood,
            start,
            args=(rates, projectors_by_basis),
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 8000, "maxfev": 12000},
        )
        if best is None or res.fun < best.fun:
            best = res
    if not best.success and best.fun > 1e-6 * total:
        raise ConvergenceError(
            f"likelihood descent exhausted its budget at L = {best.fun:.3e}"
        )
    return DensityMatrix.from_matrix(_rho_from_t(best.x))


def _substream(seed: int, sample_index: int, tag: int) -> np.random.Generator:
    """Counter-based RNG substream independent of evaluation order.

    The Philox key packs ``(sample_index, tag)`` into its second 64-bit
    word, so every (seed, sample, tag) triple owns a disjoint stream and
    samples can be drawn in any order, or in parallel, without changing
    the result.
    """
    if not 0 <= tag < 16:
        raise DomainError(f"substream tag {tag} outside [0, 16)")
    return np.random.Generator(
        np.random.Philox(key=[seed, (sample_index << 4) | tag])
    )


def _records_by_basis(records: Sequence[ProjectiveRecord]) -> dict[str, ProjectiveRecord]:
    by_basis = {rec.basis_label: rec for rec in records}
    if sorted(by_basis) != sorted(BASIS_LABELS):
        raise DomainError(
            f"need exactly one record per basis {BASIS_LABELS}, got "
            f"{[r.basis_label for r in records]}"
        )
    return by_basis


def reconstruct_from_records(records: Sequence[ProjectiveRecord]) -> DensityMatrix:
    """Normalize four records and run the maximum-likelihood fit."""
    by_basis = _records_by_basis(records)
    rates = {label: normalize_count(by_basis[label]) for label in BASIS_LABELS}
    projs = {label: projector(*NOMINAL_ANGLES[label]) for label in BASIS_LABELS}
    return mle_reconstruct(rates, projs)


def monte_carlo(
    records: Sequence[ProjectiveRecord],
    n_samples: int,
    angle_sigma: float,
    seed: int,
) -> TomographyResult:
    """Propagate count and angle uncertainty through the reconstruction.

    Per sample: counts are redrawn as Poisson with the observed count as
    mean, both waveplate angles are redrawn as Gaussian around nominal
    with ``angle_sigma``, and the fit is re-run. The point estimate is the
    fit of the unperturbed data. Sample ``i`` draws from a counter-based
    substream keyed ``(seed, i)``, so results do not depend on evaluation
    order. Dark-count subtraction always uses the record's nominal dark
    rate. More than 1% failed samples fails the whole call.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    by_basis = _records_by_basis(records)
    point = reconstruct_from_records(records)

    samples: list[StokesVector] = []
    failures = 0
    for i in range(n_samples):
        rng = _substream(seed, i, 0)
        rates: dict[str, float] = {}
        projs: dict[str, np.ndarray] = {}
        for label in BASIS_LABELS:
            rec = by_basis[label]
            n_sim = int(rng.poisson(rec.raw_count))
            live = rec.acquisition_time - n_sim * rec.dead_time
            if live <= 0:
                failures += 1
                break
            rates[label] = max(n_sim / live - rec.dark_rate, 0.0)
            theta = rec.hwp_angle + rng.normal(0.0, angle_sigma)
            phi = rec.qwp_angle + rng.normal(0.0, angle_sigma)
            projs[label] = projector(theta, phi)
        else:
            try:
                rho = mle_reconstruct(rates, projs)
            except (ConvergenceError, DomainError):
                failures += 1
                continue
            samples.append(stokes_from_density(rho))
    if failures > 0.01 * n_samples:
        raise ConvergenceError(
            f"{failures}/{n_samples} Monte-Carlo samples failed to reconstruct"
        )

    arr = np.array([s.as_array() for s in samples])
    mean = arr.mean(axis=0)
    std = arr.std(axis=0)
    return TomographyResult(
        rho=point,
        stokes_mean=StokesVector(*mean),
        stokes_std=(float(std[0]), float(std[1]), float(std[2])),
        samples=tuple(samples),
    )


@dataclass(frozen=True)
class WorstCaseResult:
    """Outcome of the worst-case state selection over Monte-Carlo draws."""

    characterization: SourceCharacterization
    value: float
    mean: float
    std: float


def worst_case_states(
    samples: Sequence[SourceCharacterization],
    eX_functional: Callable[[SourceCharacterization], float],
) -> WorstCaseResult:
    """Pick the sampled state set maximizing a phase-error functional.

    Evaluates the callback on every sample, then returns the maximizer
    among samples whose value lies within 4 standard deviations of the
    sample mean (a tail cut against pathological reconstructions), along
    with the mean and standard deviation of the functional over all
    samples.
    """
    if len(samples) == 0:
        raise DomainError("empty sample list")
    values = np.array([eX_functional(s) for s in samples])
    mean = float(values.mean())
    std = float(values.std())
    eligible = np.abs(values - mean) <= 4.0 * std + 1e-300
    idx = int(np.argmax(np.where(eligible, values, -np.inf)))
    return WorstCaseResult(
        characterization=samples[idx],
        value=float(values[idx]),
        mean=mean,
        std=std,
    )
