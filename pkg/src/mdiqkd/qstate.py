"""Single-qubit state algebra on the Bloch (Poincare) sphere.

Density matrices, Stokes vectors, fidelity, eigendecomposition with a
deterministic phase convention, the virtual-state construction used by the
rejected-data security analysis, the common-Y reference-frame rotation, and
the filtering map that projects states onto the X-Z plane.

Conventions
-----------
* ``rho = (I + s1*sigma_x + s2*sigma_y + s3*sigma_z) / 2``.
* ``s3`` is the H/V (computational, Z) axis, ``s1`` the D/A (X) axis and
  ``s2`` the R/L (circular, Y) axis.
* All physicality tolerances are fixed module constants, not knobs, so that
  golden tests are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, PhysicalityError

#: absolute tolerance for algebraic identities (hermiticity, round trips)
ALGEBRAIC_TOL = 1e-12
#: absolute tolerance for physicality checks (norms, eigenvalues)
PHYSICALITY_TOL = 1e-9

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class DensityMatrix:
    """A 2x2 Hermitian, positive-semidefinite, unit-trace matrix."""

    m00: complex
    m01: complex
    m10: complex
    m11: complex

    def __post_init__(self):
        if abs(self.m01 - np.conj(self.m10)) > ALGEBRAIC_TOL:
            raise PhysicalityError(
                f"matrix is not Hermitian: m01={self.m01}, m10*={np.conj(self.m10)}"
            )
        trace = self.m00 + self.m11
        if abs(trace - 1.0) > ALGEBRAIC_TOL:
            raise PhysicalityError(f"trace is {trace}, expected 1")
        eigs = np.linalg.eigvalsh(self.matrix)
        if eigs.min() < -PHYSICALITY_TOL:
            raise PhysicalityError(f"negative eigenvalue {eigs.min():.3e}")

    @property
    def matrix(self) -> np.ndarray:
        """The state as a plain 2x2 complex array."""
        return np.array([[self.m00, self.m01], [self.m10, self.m11]], dtype=complex)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "DensityMatrix":
        """Build from a 2x2 array, enforcing exact Hermiticity of the result.

        The off-diagonals are averaged ((m01 + m10*)/2) so that tiny
        numerical asymmetry from upstream arithmetic does not accumulate;
        asymmetry beyond ``ALGEBRAIC_TOL`` still raises.
        """
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2):
            raise DomainError(f"expected a 2x2 matrix, got shape {m.shape}")
        if abs(m[0, 1] - np.conj(m[1, 0])) > ALGEBRAIC_TOL:
            raise PhysicalityError("matrix is not Hermitian")
        off = 0.5 * (m[0, 1] + np.conj(m[1, 0]))
        return cls(
            complex(m[0, 0].real), complex(off), complex(np.conj(off)), complex(m[1, 1].real)
        )

    @classmethod
    def pure(cls, ket: np.ndarray) -> "DensityMatrix":
        """Projector onto a (normalized copy of a) pure state 2-vector."""
        v = np.asarray(ket, dtype=complex).reshape(2)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise DomainError("zero vector has no associated state")
        v = v / norm
        return cls.from_matrix(np.outer(v, v.conj()))


@dataclass(frozen=True)
class StokesVector:
    """Bloch coordinates (s1, s2, s3) of a single-qubit state."""

    s1: float
    s2: float
    s3: float

    def __post_init__(self):
        if self.norm() > 1.0 + PHYSICALITY_TOL:
            raise PhysicalityError(f"Bloch vector has norm {self.norm():.12f} > 1")

    def norm(self) -> float:
        return float(np.sqrt(self.s1**2 + self.s2**2 + self.s3**2))

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3])


@dataclass(frozen=True)
class VirtualState:
    """A normalized virtual state together with its occurrence weight."""

    state: DensityMatrix
    weight: float

    def __post_init__(self):
        if not (0.0 <= self.weight <= 1.0 + PHYSICALITY_TOL):
            raise PhysicalityError(f"virtual-state weight {self.weight} outside [0, 1]")


@dataclass(frozen=True)
class SourceCharacterization:
    """Three source states expressed in the common-Y frame.

    ``rho_0Z``, ``rho_1Z`` and ``rho_0X`` are the rotated density matrices,
    ``common_SY`` their shared circular Stokes component in that frame, and
    ``in_plane`` the three effective states after filtering to the X-Z
    plane (s2 = 0), in the order (0Z, 1Z, 0X).
    """

    rho_0Z: DensityMatrix
    rho_1Z: DensityMatrix
    rho_0X: DensityMatrix
    common_SY: float
    in_plane: tuple[StokesVector, StokesVector, StokesVector]

    def __post_init__(self):
        for s in self.in_plane:
            if abs(s.s2) > PHYSICALITY_TOL:
                raise PhysicalityError(f"in-plane state has s2 = {s.s2:.3e} != 0")


def stokes_from_density(rho: DensityMatrix) -> StokesVector:
    """Bloch decomposition: the (s1, s2, s3) with rho = (I + s.sigma)/2."""
    m = rho.matrix
    return StokesVector(
        s1=float(2.0 * m[0, 1].real),
        s2=float(-2.0 * m[0, 1].imag),
        s3=float((m[0, 0] - m[1, 1]).real),
    )


def density_from_stokes(s: StokesVector) -> DensityMatrix:
    """Inverse Bloch decomposition; rejects vectors outside the unit ball."""
    m = 0.5 * (IDENTITY + s.s1 * SIGMA_X + s.s2 * SIGMA_Y + s.s3 * SIGMA_Z)
    return DensityMatrix.from_matrix(m)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity F = Tr[sqrt(sqrt(rho) sigma sqrt(rho))] in [0, 1].

    For a pair of qubits this is evaluated with the closed two-dimensional
    form F^2 = Tr[rho sigma] + 2 sqrt(det(rho) det(sigma)), which avoids
    matrix square roots and is exact for 2x2 states.
    """
    a, b = rho.matrix, sigma.matrix
    cross = float(np.trace(a @ b).real)
    det_term = float(np.linalg.det(a).real) * float(np.linalg.det(b).real)
    # dets are >= 0 up to roundoff for PSD unit-trace matrices
    f_sq = cross + 2.0 * np.sqrt(max(det_term, 0.0))
    return float(np.sqrt(min(max(f_sq, 0.0), 1.0)))


def eigendecompose(rho: DensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and phase-fixed orthonormal eigenvectors.

    Returns ``(w, V)`` with ``w[0] >= w[1]`` and ``V[:, i]`` the eigenvector
    for ``w[i]``. Deterministic conventions:

    * each eigenvector's first component of magnitude > 1e-12 is made
      real-positive (global-phase fix);
    * exactly degenerate spectra (|w0 - w1| <= 1e-12) return the
      computational basis vectors.

    Eigenvalues are clamped to [0, 1] within physicality tolerance.
    """
    w, v = np.linalg.eigh(rho.matrix)
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]
    if abs(w[0] - w[1]) <= ALGEBRAIC_TOL:
        return np.clip(w, 0.0, 1.0), np.eye(2, dtype=complex)
    for i in range(2):
        col = v[:, i]
        for comp in col:
            if abs(comp) > ALGEBRAIC_TOL:
                v[:, i] = col * (np.conj(comp) / abs(comp))
                break
    return np.clip(w, 0.0, 1.0), v


def virtual_states(
    rho_0Z: DensityMatrix, rho_1Z: DensityMatrix
) -> tuple[VirtualState, VirtualState]:
    """Virtual X-basis states implied by the two Z-basis source states.

    In the entanglement-based picture the sender holds a purification of
    each Z state (built on one shared extension basis); measuring the
    ancilla in the X basis steers the emitted system into one of two
    sub-normalized operators

        sigma_j = 1/4 [ (rho_0Z + rho_1Z)
                        + (-1)^j sum_i l_i(0Z) l_i(1Z)
                          (|g_i(0Z)><g_i(1Z)| + h.c.) ],   j in {0, 1},

    where ``l_i = sqrt(eigenvalue_i)`` and ``g_i`` the phase-fixed
    eigenvectors, paired in descending-eigenvalue order. Returns the two
    outcomes as (weight, normalized state); weights sum to 1.
    """
    w0, v0 = eigendecompose(rho_0Z)
    w1, v1 = eigendecompose(rho_1Z)
    lam0 = np.sqrt(w0)
    lam1 = np.sqrt(w1)
    base = 0.25 * (rho_0Z.matrix + rho_1Z.matrix)
    cross = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        outer = np.outer(v0[:, i], v1[:, i].conj())
        cross += lam0[i] * lam1[i] * (outer + outer.conj().T)
    cross *= 0.25

    result = []
    for j in (0, 1):
        op = base + (-1) ** j * cross
        weight = float(np.trace(op).real)
        if weight < 1e-12:
            raise PhysicalityError(
                f"virtual outcome {j} has weight {weight:.3e}; cannot normalize"
            )
        result.append(VirtualState(DensityMatrix.from_matrix(op / weight), weight))
    return result[0], result[1]


def _rotation_matrix(axis_angle: np.ndarray) -> np.ndarray:
    """SO(3) element from an axis-angle 3-vector (Rodrigues formula)."""
    theta = np.linalg.norm(axis_angle)
    if theta < 1e-300:
        return np.eye(3)
    k = axis_angle / theta
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(theta) * kx + (1 - np.cos(theta)) * (kx @ kx)


def _rotate_density(rho: DensityMatrix, rot: np.ndarray) -> DensityMatrix:
    s = stokes_from_density(rho).as_array()
    r = rot @ s
    return density_from_stokes(StokesVector(*r))


def rotate_to_common_Y(
    rho_0Z: DensityMatrix, rho_1Z: DensityMatrix, rho_0X: DensityMatrix
) -> SourceCharacterization:
    """Find a Bloch frame where all three states share one s2 component.

    A single SO(3) rotation applied to all three Bloch vectors always
    suffices because any three points lie in some plane; the rotation turns
    that plane parallel to the X-Z plane. The rotation is found by damped
    Newton iteration on an axis-angle parameterization, starting from the
    identity, solving the two equality constraints

        s2(R a) = s2(R b)   and   s2(R a) = s2(R c).

    The converged frame keeps the 0Z state in the upper hemisphere
    (s3 > 0) so the Z-bit labeling survives the rotation. The returned
    characterization also carries the three filtered in-plane states (see
    :func:`filter_to_plane`).

    Raises :class:`ConvergenceError` if 200 iterations do not reach a
    residual of 1e-12.
    """
    vecs = [stokes_from_density(r).as_array() for r in (rho_0Z, rho_1Z, rho_0X)]

    def residual(axis_angle: np.ndarray) -> np.ndarray:
        rot = _rotation_matrix(axis_angle)
        y = [rot @ v for v in vecs]
        return np.array([y[0][1] - y[1][1], y[0][1] - y[2][1]])

    v = np.zeros(3)
    r = residual(v)
    for _ in range(200):
        if np.max(np.abs(r)) <= 1e-12:
            break
        # least-squares Newton step through a finite-difference Jacobian
        h = 1e-7
        jac = np.empty((2, 3))
        for k in range(3):
            dv = np.zeros(3)
            dv[k] = h
            jac[:, k] = (residual(v + dv) - residual(v - dv)) / (2 * h)
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        scale = 1.0
        for _ in range(40):
            cand = v + scale * step
            rc = residual(cand)
            if np.linalg.norm(rc) < np.linalg.norm(r):
                v, r = cand, rc
                break
            scale *= 0.5
        else:  # no improving step; treat as stalled
            break
    if np.max(np.abs(r)) > 1e-12:
        raise ConvergenceError(
            f"common-Y frame search stalled with residual {np.max(np.abs(r)):.3e}"
        )

    rot = _rotation_matrix(v)
    if (rot @ vecs[0])[2] < 0.0:
        # compose with a half-turn about Y: preserves every s2, flips s3
        rot = np.diag([-1.0, 1.0, -1.0]) @ rot

    rotated = [rot @ w for w in vecs]
    common_sy = float(rotated[0][1])
    in_plane = tuple(
        filter_to_plane(StokesVector(*w), common_sy) for w in rotated
    )
    rho_rot = [_rotate_density(r, rot) for r in (rho_0Z, rho_1Z, rho_0X)]
    return SourceCharacterization(
        rho_0Z=rho_rot[0],
        rho_1Z=rho_rot[1],
        rho_0X=rho_rot[2],
        common_SY=common_sy,
        in_plane=in_plane,  # type: ignore[arg-type]
    )


def filter_q(common_SY: float) -> float:
    """The filter parameter q in [0, 1] for a given out-of-plane component.

    Solves ``S_Y (1 - 2q + 2q^2) = 2q - 1``, i.e. the quadratic
    ``2 S_Y q^2 - 2 (S_Y + 1) q + (S_Y + 1) = 0``, picking the root inside
    [0, 1]; at S_Y = 0 both roots coincide with q = 1/2.
    """
    if abs(common_SY) >= 1.0:
        raise DomainError(f"|S_Y| = {abs(common_SY)} >= 1: filter undefined")
    if common_SY == 0.0:
        return 0.5
    disc = (common_SY + 1.0) * (1.0 - common_SY)
    q = ((common_SY + 1.0) - np.sqrt(disc)) / (2.0 * common_SY)
    if not (-ALGEBRAIC_TOL <= q <= 1.0 + ALGEBRAIC_TOL):
        raise DomainError(f"no filter root in [0, 1] for S_Y = {common_SY}")
    return float(min(max(q, 0.0), 1.0))


def filter_to_plane(s: StokesVector, common_SY: float) -> StokesVector:
    """Map a state with circular component ``common_SY`` onto the X-Z plane.

    The filtering argument shows a state (s1, S_Y, s3) is equivalent, for
    the security analysis, to the in-plane state (s1/f, 0, s3/f) with
    ``f(q) = 2 (1-q) q / (1 - 2q + 2q^2)`` and q from :func:`filter_q`.
    The input must already carry the common circular component.
    """
    if abs(s.s2 - common_SY) > PHYSICALITY_TOL:
        raise DomainError(
            f"state has s2 = {s.s2}, expected the common value {common_SY}"
        )
    q = filter_q(common_SY)
    f = 2.0 * (1.0 - q) * q / (1.0 - 2.0 * q + 2.0 * q * q)
    s1, s3 = s.s1 / f, s.s3 / f
    norm = float(np.hypot(s1, s3))
    if norm > 1.0 + PHYSICALITY_TOL:
        raise PhysicalityError(
            f"filtered vector has norm {norm:.12f} > 1; inconsistent inputs"
        )
    return StokesVector(s1, 0.0, s3)
