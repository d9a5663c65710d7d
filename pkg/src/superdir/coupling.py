"""Beam coupling factors from patterns or from lossless network data.

The coupling matrix ``B`` is the sphere average of pairwise products of
element patterns, ``B_ij = (1/4pi) * integral f_i . conj(f_j) dOmega``.
For lossless arrays it follows from energy conservation in terms of the
scattering matrix, generalized scattering matrix, or impedance matrix.
Absolute scale differs between routes (the network routes carry the
``eta / 4pi`` factors); every quantity used downstream is a ratio of
quadratic forms and is insensitive to it, provided ``B`` and the steering
vector share one unit convention.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CouplingMatrixError,
    IllConditionedNetworkError,
    InvalidArgumentError,
    RouteMismatchError,
)
from .patterns import (
    ArrayGeometry,
    CombinedPattern,
    Direction,
    ElementPattern,
    SphereGrid,
    evaluate_fields,
)

ETA0 = 376.730313668  # free-space impedance, ohms
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10


def check_coupling_matrix(b, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate that ``b`` is Hermitian PSD within relative ``tol``; return it."""
    b = np.asarray(b, dtype=complex)
    if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] < 1:
        raise InvalidArgumentError(f"coupling matrix must be square, got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise CouplingMatrixError("coupling matrix has non-finite entries")
    scale = np.max(np.abs(b))
    if scale == 0:
        return b
    asym = np.max(np.abs(b - b.conj().T))
    if asym > tol * scale:
        raise CouplingMatrixError(f"coupling matrix not Hermitian (asymmetry {asym / scale:.3g})")
    w = np.linalg.eigvalsh(0.5 * (b + b.conj().T))
    if w[0] < -PSD_TOL * max(w[-1], 0.0) or w[-1] < 0:
        raise CouplingMatrixError(
            f"coupling matrix not positive semidefinite (eigenvalues {w[0]:.3g} .. {w[-1]:.3g})"
        )
    return b


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Coupling matrix with the steering data for one target direction.

    Attributes
    ----------
    b : (M, M) complex ndarray
        Hermitian PSD beam-coupling-factor matrix.
    v0 : (M,) complex ndarray
        Element fields at the target direction (co-polar projection).
    d_f0 : (M,) float ndarray
        Total element power ``|f_i(u0)|^2`` at the target direction.
        Defaults to ``|v0|^2``.
    cross_polar : float
        Fraction of target-direction power not captured by ``v0``.
    route : str
        Label of the route that produced ``b``.
    """

    b: np.ndarray
    v0: np.ndarray
    d_f0: np.ndarray | None = None
    cross_polar: float = 0.0
    route: str = "given"

    def __post_init__(self):
        b = np.array(check_coupling_matrix(self.b))
        v0 = np.array(self.v0, dtype=complex).ravel()
        if v0.size != b.shape[0]:
            raise InvalidArgumentError(f"v0 has {v0.size} entries for a {b.shape[0]}-element B")
        d_f0 = np.abs(v0) ** 2 if self.d_f0 is None else np.array(self.d_f0, dtype=float).ravel()
        if d_f0.size != v0.size or np.any(d_f0 < 0):
            raise InvalidArgumentError("d_f0 must hold one nonnegative value per element")
        for arr in (b, v0, d_f0):
            arr.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "v0", v0)
        object.__setattr__(self, "d_f0", d_f0)
        object.__setattr__(self, "cross_polar", float(self.cross_polar))

    @property
    def size(self) -> int:
        return self.v0.size

    def scaled(self, factor: float) -> "CouplingMatrix":
        """Same steering data with ``b`` multiplied by a positive ``factor``."""
        return CouplingMatrix(self.b * factor, self.v0, self.d_f0, self.cross_polar, self.route)


# --- pattern routes ----------------------------------------------------------


def bcf_integrate(patterns: Sequence[ElementPattern], grid: SphereGrid) -> np.ndarray:
    """Coupling matrix by quadrature of the element patterns over ``grid``."""
    patterns = list(patterns)
    if not patterns:
        raise InvalidArgumentError("need at least one pattern")
    fields = evaluate_fields(patterns, grid.theta, grid.phi)  # (M, 2, N)
    m = len(patterns)
    flat = fields.reshape(m, -1)
    w = np.tile(grid.weights, 2)
    full = (flat * w) @ flat.conj().T / (4 * np.pi)
    upper = np.triu(full)
    return upper + np.triu(full, 1).conj().T


def co_polarization(fields: np.ndarray) -> np.ndarray:
    """Unit (theta, phi) polarization of the summed fields ``fields`` (M, 2).

    The vector is phase-rotated so its dominant component is real positive.
    """
    fields = np.asarray(fields, dtype=complex)
    norms = np.linalg.norm(fields, axis=1)
    total = fields.sum(axis=0)
    if np.linalg.norm(total) <= 1e-12 * max(norms.max(initial=0.0), 1e-300):
        total = fields[np.argmax(norms)] if norms.size and norms.max() > 0 else np.array([1, 0], complex)
    pol = total / np.linalg.norm(total)
    k = np.argmax(np.abs(pol))
    return pol * (abs(pol[k]) / pol[k])


def steering_at(patterns: Sequence[ElementPattern], u0: Direction,
                return_cross_polar: bool = False):
    """Steering vector and element powers at ``u0``.

    Each element field is projected on the polarization of the summed field
    so the steering vector is scalar. With ``return_cross_polar`` the
    fraction of power lost to that projection is returned as a third item.
    """
    patterns = list(patterns)
    if not patterns:
        raise InvalidArgumentError("need at least one pattern")
    fields = evaluate_fields(patterns, u0.theta, u0.phi)[:, :, 0]  # (M, 2)
    pol = co_polarization(fields)
    v0 = fields @ pol.conj()
    d_f0 = np.sum(np.abs(fields) ** 2, axis=1)
    if not return_cross_polar:
        return v0, d_f0
    total = d_f0.sum()
    residual = float((total - np.sum(np.abs(v0) ** 2)) / total) if total > 0 else 0.0
    return v0, d_f0, max(residual, 0.0)


def coupling_from_patterns(patterns: Sequence[ElementPattern], grid: SphereGrid,
                           u0: Direction) -> CouplingMatrix:
    b = bcf_integrate(patterns, grid)
    v0, d_f0, xpol = steering_at(patterns, u0, return_cross_polar=True)
    return CouplingMatrix(b, v0, d_f0, xpol, route="integrate")


def isotropic_coupling(geometry: ArrayGeometry, u0: Direction) -> CouplingMatrix:
    """Closed-form coupling of isotropic radiators: ``B_ij = sinc(k |r_i - r_j|)``."""
    r = geometry.positions
    dist = np.linalg.norm(r[:, None, :] - r[None, :, :], axis=-1)
    b = np.sinc(geometry.wavenumber * dist / np.pi).astype(complex)
    v0 = np.exp(1j * geometry.wavenumber * (r @ u0.unit_vector))
    return CouplingMatrix(b, v0, route="sinc")


# --- network routes ----------------------------------------------------------


def _square(name, value, m):
    arr = np.asarray(value, dtype=complex)
    if arr.shape != (m, m):
        raise InvalidArgumentError(f"{name} must have shape ({m}, {m}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class NetworkData:
    """Port data of an M-port antenna array.

    Attributes
    ----------
    z0 : (M,) complex
        Per-port reference (generator) impedances, ohms.
    s : (M, M) complex, optional
        Scattering matrix, referenced to ``s_ref`` ohms (or to ``z0`` when
        ``s_ref`` is None).
    z : (M, M) complex, optional
        Impedance matrix, ohms.
    eta : float
        Free-space impedance, ohms.
    s_ref : float, optional
        Real reference impedance in which ``s`` was measured.
    """

    z0: np.ndarray
    s: np.ndarray | None = None
    z: np.ndarray | None = None
    eta: float = ETA0
    s_ref: float | None = None

    def __post_init__(self):
        z0 = np.atleast_1d(np.asarray(self.z0, dtype=complex)).ravel()
        m = z0.size
        if m < 1:
            raise InvalidArgumentError("need at least one port")
        if np.any(z0.real <= 0):
            raise InvalidArgumentError("reference impedances need positive real parts")
        if self.s is None and self.z is None:
            raise InvalidArgumentError("network data needs an S or a Z matrix")
        s = None if self.s is None else _square("s", self.s, m)
        z = None if self.z is None else _square("z", self.z, m)
        if z is not None:
            r = 0.5 * (z + z.conj().T)
            w = np.linalg.eigvalsh(r)
            if w[0] < -1e-9 * max(abs(w[-1]), 1e-300):
                raise InvalidArgumentError("Re(Z) is not positive semidefinite (active network)")
        if self.s_ref is not None and not float(self.s_ref) > 0:
            raise InvalidArgumentError("s_ref must be a positive resistance")
        if not float(self.eta) > 0:
            raise InvalidArgumentError("eta must be positive")
        object.__setattr__(self, "z0", z0)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "eta", float(self.eta))
        if self.s_ref is not None:
            object.__setattr__(self, "s_ref", float(self.s_ref))

    @property
    def size(self) -> int:
        return self.z0.size

    def uniform_real_reference(self) -> float | None:
        """The common real reference impedance, or None if ports differ."""
        z0 = self.z0
        if np.all(z0.imag == 0) and np.all(z0.real == z0.real[0]):
            return float(z0.real[0])
        return None


def bcf_from_s(net: NetworkData) -> np.ndarray:
    """Coupling matrix of a lossless array from its scattering matrix.

    Requires every port to share one real reference impedance.
    """
    if net.s is None:
        raise RouteMismatchError("scattering route needs an S matrix")
    ref = net.uniform_real_reference()
    if ref is None:
        raise RouteMismatchError(
            "scattering route needs equal real reference impedances; "
            "use the generalized scattering route"
        )
    if net.s_ref is not None and net.s_ref != ref:
        raise RouteMismatchError(
            f"S is referenced to {net.s_ref} ohm but ports are terminated in {ref} ohm; "
            "use the generalized scattering route"
        )
    s = net.s
    b = net.eta / (16 * np.pi * ref) * (np.eye(net.size) - s.T @ s.conj())
    return check_coupling_matrix(b)


def generalized_s(net: NetworkData, base: float | None = None) -> np.ndarray:
    """Renormalize ``net.s`` from a real ``base`` impedance to the complex ports ``net.z0``.

    Power-wave renormalization with ``Gamma_i = (z0_i - base) / (z0_i + base)``.
    ``base`` defaults to ``net.s_ref``, then to the common real port impedance.
    """
    if net.s is None:
        raise RouteMismatchError("generalized scattering route needs an S matrix")
    if base is None:
        base = net.s_ref if net.s_ref is not None else net.uniform_real_reference()
    if base is None:
        raise InvalidArgumentError("the real impedance S was measured in must be given")
    base = float(base)
    if not base > 0:
        raise InvalidArgumentError("base impedance must be positive")
    m = net.size
    gamma = (net.z0 - base) / (net.z0 + base)
    g = (1 - gamma) / np.abs(1 - gamma.conj()) * np.sqrt(1 - np.abs(gamma) ** 2)
    lhs = np.eye(m) - gamma[:, None] * net.s
    if np.linalg.cond(lhs) > 1e12:
        raise IllConditionedNetworkError("I - Gamma S is singular")
    core = (net.s - np.diag(gamma.conj())) @ np.linalg.inv(lhs)
    return (core / g.conj()[:, None]) * g[None, :]


def bcf_from_generalized_s(s_g, net: NetworkData) -> np.ndarray:
    """Coupling matrix from generalized S-parameters at complex port impedances."""
    m = net.size
    s_g = _square("s_g", s_g, m)
    r = net.z0.real
    if np.any(r <= 0):
        raise InvalidArgumentError("reference impedances need positive real parts")
    scale = 1.0 / np.sqrt(r)
    inner = np.eye(m) - s_g.T @ s_g.conj()
    b = net.eta / (16 * np.pi) * scale[:, None] * inner * scale[None, :]
    return check_coupling_matrix(b)


def bcf_from_z(net: NetworkData) -> np.ndarray:
    """Coupling matrix from the impedance matrix and generator impedances.

    Uses the Hermitian part of ``Z`` as the resistive part; for a reciprocal
    network this is the entrywise real part.
    """
    if net.z is None:
        raise RouteMismatchError("impedance route needs a Z matrix")
    total = net.z + np.diag(net.z0)
    if np.linalg.cond(total) > 1e12:
        raise IllConditionedNetworkError("Z + Z0 is singular")
    y = np.linalg.inv(total)
    r = 0.5 * (net.z + net.z.conj().T)
    b = net.eta / (4 * np.pi) * (y.T @ r.conj() @ y.conj())
    return check_coupling_matrix(b)


def s_from_z(z, z0: float) -> np.ndarray:
    """Scattering matrix ``(Z - z0 I)(Z + z0 I)^-1`` at a real reference ``z0``."""
    z = np.asarray(z, dtype=complex)
    eye = np.eye(z.shape[0])
    return (z - z0 * eye) @ np.linalg.inv(z + z0 * eye)


def embedded_from_isolated(isolated: Sequence[ElementPattern], z, z0) -> list[ElementPattern]:
    """Embedded patterns of a minimum-scattering array driven through ``z0``.

    ``isolated[j]`` is the field radiated per unit current at port ``j``.
    Driving port ``i`` with a unit generator voltage sets the port currents
    to column ``i`` of ``(Z + Z0)^-1``.
    """
    isolated = list(isolated)
    m = len(isolated)
    z = _square("z", z, m)
    z0 = np.broadcast_to(np.asarray(z0, dtype=complex), (m,))
    y = np.linalg.inv(z + np.diag(z0))
    return [CombinedPattern(y[:, i], isolated) for i in range(m)]
