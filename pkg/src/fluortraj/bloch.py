"""Qubit state representations and validity diagnostics.

States are handled in two equivalent forms: a :class:`BlochVector`
``(x, y, z)`` with ``x**2 + y**2 + z**2 <= 1``, and a 2x2 complex density
matrix (a plain numpy array in the ``{|e>, |g>}`` basis, ``|e>`` first).
All conversions are pure functions; nothing here mutates its input.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import InvalidStateError

#: Admissible overshoot of |q| past the pure-state sphere.  Values in
#: (1, 1 + BALL_TOL] are renormalized onto the sphere; larger ones raise.
BALL_TOL = 1e-9

#: Tolerance on hermiticity and unit trace of a density matrix.
MATRIX_TOL = 1e-12

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


class BlochVector(NamedTuple):
    """Qubit state as real coordinates ``(x, y, z)`` in the unit ball."""

    x: float
    y: float
    z: float

    @property
    def array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def purity(self) -> float:
        """tr(rho^2) of the corresponding density matrix."""
        return 0.5 * (1.0 + self.x**2 + self.y**2 + self.z**2)


EXCITED = BlochVector(0.0, 0.0, 1.0)
GROUND = BlochVector(0.0, 0.0, -1.0)
PLUS_X = BlochVector(1.0, 0.0, 0.0)
MINUS_X = BlochVector(-1.0, 0.0, 0.0)


class StateDiagnostics(NamedTuple):
    """Scalar diagnostics of a candidate density matrix."""

    hermiticity_deviation: float
    trace_deviation: float
    min_eigenvalue: float
    purity: float


def as_bloch(q) -> BlochVector:
    """Coerce a length-3 sequence to a :class:`BlochVector`."""
    if isinstance(q, BlochVector):
        return q
    x, y, z = (float(v) for v in q)
    return BlochVector(x, y, z)


def bloch_to_density(q) -> np.ndarray:
    """Density matrix ``(1 + x sx + y sy + z sz) / 2`` for a Bloch vector.

    Raises
    ------
    InvalidStateError
        If any component is non-finite or ``|q| > 1 + BALL_TOL``.
    """
    q = as_bloch(q)
    if not all(math.isfinite(v) for v in q):
        raise InvalidStateError(f"non-finite Bloch components: {q}")
    n = q.norm()
    if n > 1.0 + BALL_TOL:
        raise InvalidStateError(f"Bloch vector leaves the unit ball: |q| = {n!r}")
    if n > 1.0:
        q = BlochVector(q.x / n, q.y / n, q.z / n)
    x, y, z = q
    return 0.5 * np.array(
        [[1.0 + z, x - 1.0j * y], [x + 1.0j * y, 1.0 - z]], dtype=complex
    )


def density_to_bloch(rho: np.ndarray, check: bool = True) -> BlochVector:
    """Bloch coordinates ``q_i = tr(sigma_i rho)``.

    With ``check=True`` (default) the input is validated against the
    hermiticity/trace/positivity contract first.
    """
    rho = np.asarray(rho, dtype=complex)
    if check:
        check_state(rho)
    x = float((rho[0, 1] + rho[1, 0]).real)
    y = float((rho[1, 0] - rho[0, 1]).imag)
    z = float((rho[0, 0] - rho[1, 1]).real)
    return BlochVector(x, y, z)


def validate_state(rho: np.ndarray) -> StateDiagnostics:
    """Diagnostics of a 2x2 matrix as a density-matrix candidate.

    Never raises and never mutates the input; use :func:`check_state` to
    enforce the contract.
    """
    rho = np.asarray(rho, dtype=complex)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace_dev = float(abs(rho[0, 0] + rho[1, 1] - 1.0))
    sym = 0.5 * (rho + rho.conj().T)
    eigvals = np.linalg.eigvalsh(sym)
    pur = float(np.trace(rho @ rho).real)
    return StateDiagnostics(herm, trace_dev, float(eigvals[0]), pur)


def check_state(rho: np.ndarray, eig_tol: float = 1e-12) -> StateDiagnostics:
    """Validate a density matrix, raising :class:`InvalidStateError` on failure."""
    diag = validate_state(rho)
    if not np.all(np.isfinite(np.asarray(rho))):
        raise InvalidStateError("density matrix has non-finite entries")
    if diag.hermiticity_deviation > MATRIX_TOL:
        raise InvalidStateError(
            f"not Hermitian: deviation {diag.hermiticity_deviation:.3e}"
        )
    if diag.trace_deviation > MATRIX_TOL:
        raise InvalidStateError(f"trace differs from 1 by {diag.trace_deviation:.3e}")
    if diag.min_eigenvalue < -eig_tol:
        raise InvalidStateError(
            f"not positive semidefinite: min eigenvalue {diag.min_eigenvalue:.3e}"
        )
    return diag


def polar_angle(q) -> float:
    """Angle ``atan2(x, z)`` in (-pi, pi] on the xz great circle.

    0 maps to the excited state ``(0, 0, 1)`` and pi to the ground state.
    """
    q = as_bloch(q)
    angle = math.atan2(q.x, q.z)
    # atan2(-0.0, z < 0) returns -pi; fold onto the (-pi, pi] branch
    return math.pi if angle == -math.pi else angle


def circle_state(theta: float) -> BlochVector:
    """Pure state ``(sin theta, 0, cos theta)`` on the xz great circle."""
    return BlochVector(math.sin(theta), 0.0, math.cos(theta))
