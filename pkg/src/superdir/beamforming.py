"""Excitation solvers for maximum directivity.

Directivity of an excitation ``a`` is the Rayleigh quotient
``|a^T v0|^2 / (a^T B a*)``; it is maximized by ``a* = B^-1 v0`` with the
value ``v0^H B^-1 v0``. Every excitation returned here is scaled so that
``a^T B a* = 1`` and rotated so its largest entry is real and positive.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .coupling import CouplingMatrix, coupling_from_patterns
from .errors import (
    DegenerateExcitationError,
    DegenerateSteeringError,
    InvalidArgumentError,
    SingularCouplingError,
)
from .patterns import ArrayGeometry, Direction, ElementPattern, SphereGrid, TranslatedPattern

ILL_CONDITIONED = 1e-12  # smallest/largest eigenvalue ratio that triggers the warning
LOADING = 1e-12  # diagonal loading, relative to the mean diagonal of B


def radiated_power(a, b) -> float:
    """``a^T B a*`` for a Hermitian ``b``."""
    a = np.asarray(a, dtype=complex)
    return float(np.real(a @ np.asarray(b) @ a.conj()))


def normalize_excitation(a, b) -> np.ndarray:
    """Scale ``a`` to unit radiated power and make its largest entry real positive."""
    a = np.asarray(a, dtype=complex).ravel()
    if not np.all(np.isfinite(a)) or not np.any(a):
        raise DegenerateExcitationError("excitation is zero or non-finite")
    power = radiated_power(a, b)
    if not power > 0:
        raise DegenerateExcitationError("excitation radiates no power")
    a = a / np.sqrt(power)
    k = np.argmax(np.abs(a))
    a = a * (abs(a[k]) / a[k])
    a[k] = abs(a[k])
    return a


def directivity_quotient(a, c: CouplingMatrix) -> float:
    """Directivity ``|a^T v0|^2 / (a^T B a*)`` of excitation ``a``."""
    a = np.asarray(a, dtype=complex).ravel()
    if a.size != c.size:
        raise InvalidArgumentError(f"excitation has {a.size} entries, array has {c.size}")
    power = radiated_power(a, c.b)
    if not power > 0:
        raise DegenerateExcitationError("excitation radiates no power")
    return float(abs(a @ c.v0) ** 2 / power)


@dataclass(frozen=True, eq=False)
class BeamformResult:
    """Excitation with its directivity.

    Attributes
    ----------
    excitation : (M,) complex ndarray
        Normalized excitation, ``a^T B a* = 1``.
    directivity : float
        Rayleigh quotient of ``excitation``.
    method : str
        ``"eepb"``, ``"iep"``, ``"mrt"`` or ``"ocrb"``.
    warnings : tuple of str
        Conditioning notes raised while solving.
    """

    excitation: np.ndarray
    directivity: float
    method: str
    warnings: tuple[str, ...] = field(default=())

    @property
    def regularized(self) -> bool:
        return any("loading" in w for w in self.warnings)


def _solve_hermitian(b: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, list[str]]:
    notes = []
    w = np.linalg.eigvalsh(b)
    if w[-1] <= 0:
        raise SingularCouplingError("coupling matrix is zero")
    if w[0] < ILL_CONDITIONED * w[-1]:
        notes.append(f"coupling matrix ill-conditioned (eigenvalue ratio {w[0] / w[-1]:.3g})")
    try:
        return linalg.cho_solve(linalg.cho_factor(b), rhs), notes
    except linalg.LinAlgError:
        pass
    loading = LOADING * np.trace(b).real / b.shape[0]
    notes.append(f"diagonal loading {loading:.3g} applied")
    try:
        return linalg.cho_solve(linalg.cho_factor(b + loading * np.eye(b.shape[0])), rhs), notes
    except linalg.LinAlgError as exc:
        raise SingularCouplingError("coupling matrix is singular beyond regularization") from exc


def eepb_solve(c: CouplingMatrix) -> BeamformResult:
    """Maximum-directivity excitation for the coupling data ``c``.

    Solves ``B x = v0`` by Cholesky factorization and returns ``a = x*``.
    When the factorization fails a small diagonal load is added and the
    result carries a warning. The reported directivity is the quotient of
    the returned excitation, which equals ``v0^H B^-1 v0`` whenever ``B`` is
    well conditioned.

    Raises
    ------
    DegenerateSteeringError
        If ``v0`` is zero.
    SingularCouplingError
        If ``B`` cannot be factored even after loading.
    """
    if not np.any(c.v0):
        raise DegenerateSteeringError("steering vector is zero")
    x, notes = _solve_hermitian(np.asarray(c.b), c.v0)
    a = normalize_excitation(x.conj(), c.b)
    return BeamformResult(a, directivity_quotient(a, c), "eepb", tuple(notes))


def iep_coupling(geometry: ArrayGeometry, iep: ElementPattern, grid: SphereGrid,
                 u0: Direction) -> CouplingMatrix:
    """Coupling data of the coupling-free model ``exp(j k r_i . u) f(u)``."""
    patterns = [TranslatedPattern(iep, r, geometry.wavenumber) for r in geometry.positions]
    return coupling_from_patterns(patterns, grid, u0)


def iep_solve(geometry: ArrayGeometry, iep: ElementPattern, grid: SphereGrid,
              u0: Direction) -> BeamformResult:
    """Traditional beamforming that treats every element as the isolated pattern."""
    result = eepb_solve(iep_coupling(geometry, iep, grid, u0))
    return BeamformResult(result.excitation, result.directivity, "iep", result.warnings)


def mrt(c: CouplingMatrix) -> BeamformResult:
    """Conjugate-steering excitation ``a = v0*``."""
    if not np.any(c.v0):
        raise DegenerateSteeringError("steering vector is zero")
    a = normalize_excitation(c.v0.conj() / np.linalg.norm(c.v0), c.b)
    return BeamformResult(a, directivity_quotient(a, c), "mrt")
