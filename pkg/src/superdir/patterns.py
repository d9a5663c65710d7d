"""Far-field patterns, sphere quadrature and directivity.

Patterns are complex, polarized far fields expressed in the standard
spherical basis (theta-hat, phi-hat). Every pattern shares one global phase
origin, so an element displaced to ``r`` carries the factor
``exp(1j * k * r . u)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegeneratePatternError,
    InterpolationDomainError,
    InvalidArgumentError,
)

TWO_PI = 2.0 * np.pi
_ANGLE_TOL = 1e-12


def unit_vectors(theta, phi):
    """Cartesian unit vectors for broadcastable arrays of angles, shape (..., 3)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack(
        np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), np.cos(theta)),
        axis=-1,
    )


def theta_hat(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ct = np.cos(theta)
    return np.stack(
        np.broadcast_arrays(ct * np.cos(phi), ct * np.sin(phi), -np.sin(theta)),
        axis=-1,
    )


def phi_hat(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack(
        np.broadcast_arrays(-np.sin(phi), np.cos(phi), np.zeros_like(theta)),
        axis=-1,
    )


@dataclass(frozen=True)
class Direction:
    """A direction on the unit sphere, angles in radians.

    ``phi`` is wrapped into [0, 2*pi). ``theta`` must lie in [0, pi].
    """

    theta: float
    phi: float

    def __post_init__(self):
        theta = float(self.theta)
        phi = float(self.phi)
        if not (np.isfinite(theta) and np.isfinite(phi)):
            raise InvalidArgumentError("direction angles must be finite")
        if theta < -_ANGLE_TOL or theta > np.pi + _ANGLE_TOL:
            raise InvalidArgumentError(f"theta={theta} outside [0, pi]")
        theta = min(max(theta, 0.0), np.pi)
        phi = phi % TWO_PI
        if phi >= TWO_PI:
            phi = 0.0
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_degrees(cls, theta_deg: float, phi_deg: float) -> "Direction":
        return cls(np.deg2rad(theta_deg), np.deg2rad(phi_deg))

    @classmethod
    def from_vector(cls, vector) -> "Direction":
        v = np.asarray(vector, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidArgumentError("direction vector must be finite and nonzero")
        v = v / norm
        return cls(np.arctan2(np.hypot(v[0], v[1]), v[2]), np.arctan2(v[1], v[0]))

    @property
    def unit_vector(self) -> np.ndarray:
        return unit_vectors(self.theta, self.phi)

    def degrees(self) -> tuple[float, float]:
        return float(np.rad2deg(self.theta)), float(np.rad2deg(self.phi))


ENDFIRE = Direction.from_degrees(90.0, 270.0)


@dataclass(frozen=True)
class PolarizedField:
    e_theta: complex
    e_phi: complex

    @property
    def power(self) -> float:
        return abs(self.e_theta) ** 2 + abs(self.e_phi) ** 2

    def as_array(self) -> np.ndarray:
        return np.array([self.e_theta, self.e_phi], dtype=complex)


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Quadrature nodes and solid-angle weights covering the unit sphere."""

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        for name in ("theta", "phi", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.theta.shape == self.phi.shape == self.weights.shape):
            raise InvalidArgumentError("grid arrays must share one shape")
        if np.any(self.weights <= 0):
            raise InvalidArgumentError("quadrature weights must be positive")

    def __len__(self) -> int:
        return self.weights.size

    @property
    def nodes(self) -> list[Direction]:
        return [Direction(t, p) for t, p in zip(self.theta, self.phi)]

    def integrate(self, values) -> complex | float:
        """Sum of ``weights * values`` over the nodes."""
        return np.sum(self.weights * np.asarray(values))


def make_sphere_grid(n_theta: int = 64, n_phi: int = 128) -> SphereGrid:
    """Gauss-Legendre nodes in cos(theta) crossed with uniform phi nodes."""
    if int(n_theta) != n_theta or int(n_phi) != n_phi:
        raise InvalidArgumentError("node counts must be integers")
    n_theta, n_phi = int(n_theta), int(n_phi)
    if n_theta < 2 or n_phi < 4:
        raise InvalidArgumentError(
            f"need n_theta >= 2 and n_phi >= 4, got ({n_theta}, {n_phi})"
        )
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = TWO_PI * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ww = np.repeat(w, n_phi).reshape(n_theta, n_phi) * (TWO_PI / n_phi)
    return SphereGrid(tt.ravel(), pp.ravel(), ww.ravel())


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element positions (meters) and operating wavelength (meters)."""

    positions: np.ndarray
    wavelength: float = 1.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1 and pos.size == 3:
            pos = pos.reshape(1, 3)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise InvalidArgumentError("positions must have shape (M, 3) with M >= 1")
        if not np.all(np.isfinite(pos)):
            raise InvalidArgumentError("positions must be finite")
        wl = float(self.wavelength)
        if not (np.isfinite(wl) and wl > 0):
            raise InvalidArgumentError("wavelength must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "wavelength", wl)

    @classmethod
    def linear(cls, m: int, spacing: float, wavelength: float = 1.0, axis: str = "y"):
        """Uniform linear array with element ``i`` at ``i * spacing`` along ``axis``."""
        if m < 1:
            raise InvalidArgumentError("need at least one element")
        col = "xyz".index(axis)
        pos = np.zeros((m, 3))
        pos[:, col] = spacing * np.arange(m)
        return cls(pos, wavelength)

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.wavelength


# --- patterns ---------------------------------------------------------------


class ElementPattern:
    """A complex polarized far-field pattern.

    Subclasses implement :meth:`field`, which evaluates the theta and phi
    components on broadcastable arrays of angles (radians).
    """

    kind = "abstract"

    def field(self, theta, phi) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def __call__(self, u: Direction) -> PolarizedField:
        et, ep = self.field(u.theta, u.phi)
        return PolarizedField(complex(et), complex(ep))

    def power(self, theta, phi) -> np.ndarray:
        et, ep = self.field(theta, phi)
        return np.abs(et) ** 2 + np.abs(ep) ** 2


def _phase_factor(position, k, theta, phi):
    if not np.any(position):
        return np.ones(np.broadcast(np.asarray(theta), np.asarray(phi)).shape, complex)
    return np.exp(1j * k * (unit_vectors(theta, phi) @ position))


class IsotropicPattern(ElementPattern):
    """Unit-magnitude, theta-polarized scalar radiator."""

    kind = "analytic-isotropic"

    def __init__(self, position=(0.0, 0.0, 0.0), wavenumber: float = TWO_PI):
        self.position = np.asarray(position, dtype=float).reshape(3)
        self.wavenumber = float(wavenumber)

    def field(self, theta, phi):
        f = _phase_factor(self.position, self.wavenumber, theta, phi)
        return f, np.zeros_like(f)


class HertzianDipolePattern(ElementPattern):
    """Short dipole along ``axis``; magnitude sin(angle to axis)."""

    kind = "analytic-hertzian-dipole"

    def __init__(self, position=(0.0, 0.0, 0.0), wavenumber: float = TWO_PI,
                 axis=(0.0, 0.0, 1.0)):
        axis = np.asarray(axis, dtype=float).reshape(3)
        norm = np.linalg.norm(axis)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidArgumentError("dipole axis must be a nonzero vector")
        if abs(norm - 1.0) > 1e-9:
            raise InvalidArgumentError("dipole axis must have unit norm")
        self.axis = axis / norm
        self.position = np.asarray(position, dtype=float).reshape(3)
        self.wavenumber = float(wavenumber)

    def field(self, theta, phi):
        f = _phase_factor(self.position, self.wavenumber, theta, phi)
        # Transverse part of the axis, sign chosen so a z-dipole gives +sin(theta).
        et = -(theta_hat(theta, phi) @ self.axis)
        ep = -(phi_hat(theta, phi) @ self.axis)
        return et * f, ep * f


class SampledPattern(ElementPattern):
    """Pattern tabulated on a regular (theta, phi) lattice.

    Off-lattice values come from bilinear interpolation of the complex
    components; phi wraps around the circle. A lattice whose last phi
    repeats the first one (e.g. 0 and 360 degrees) drops the duplicate column.
    A single-theta lattice describes one conical cut and is only defined on it.
    """

    kind = "sampled-grid"

    def __init__(self, theta, phi, e_theta, e_phi):
        theta = np.asarray(theta, dtype=float).ravel()
        phi = np.asarray(phi, dtype=float).ravel()
        e_theta = np.asarray(e_theta, dtype=complex)
        e_phi = np.asarray(e_phi, dtype=complex)
        shape = (theta.size, phi.size)
        if e_theta.shape != shape or e_phi.shape != shape:
            raise InvalidArgumentError(
                f"field arrays must have shape {shape}, got {e_theta.shape}, {e_phi.shape}"
            )
        if theta.size > 1 and np.any(np.diff(theta) <= 0):
            raise InvalidArgumentError("theta lattice must be strictly increasing")
        if phi.size > 1 and np.any(np.diff(phi) <= 0):
            raise InvalidArgumentError("phi lattice must be strictly increasing")
        if theta.min() < -_ANGLE_TOL or theta.max() > np.pi + _ANGLE_TOL:
            raise InvalidArgumentError("theta lattice outside [0, pi]")
        if phi.size > 1 and phi[-1] - phi[0] >= TWO_PI - 1e-9:
            phi = phi[:-1]
            e_theta = e_theta[:, :-1]
            e_phi = e_phi[:, :-1]
        if phi.size > 1 and phi[-1] - phi[0] >= TWO_PI:
            raise InvalidArgumentError("phi lattice spans more than one turn")
        self.theta = theta
        self.phi = phi
        self.e_theta = e_theta
        self.e_phi = e_phi

    def _theta_index(self, theta):
        t = self.theta
        lo, hi = t[0], t[-1]
        tol = 1e-9 * max(1.0, abs(hi))
        if np.any(theta < lo - tol) or np.any(theta > hi + tol):
            bad = theta[(theta < lo - tol) | (theta > hi + tol)][0]
            raise InterpolationDomainError(
                f"theta={np.rad2deg(bad):.6g} deg outside sampled range "
                f"[{np.rad2deg(lo):.6g}, {np.rad2deg(hi):.6g}] deg"
            )
        if t.size == 1:
            zeros = np.zeros(theta.shape, dtype=int)
            return zeros, zeros, np.zeros(theta.shape)
        i = np.clip(np.searchsorted(t, theta, side="right") - 1, 0, t.size - 2)
        w = np.clip((theta - t[i]) / (t[i + 1] - t[i]), 0.0, 1.0)
        return i, i + 1, w

    def _phi_index(self, phi):
        p = self.phi
        n = p.size
        if n == 1:
            zeros = np.zeros(phi.shape, dtype=int)
            return zeros, zeros, np.zeros(phi.shape)
        ext = np.append(p, p[0] + TWO_PI)
        q = np.mod(phi - p[0], TWO_PI) + p[0]
        j = np.clip(np.searchsorted(ext, q, side="right") - 1, 0, n - 1)
        w = np.clip((q - ext[j]) / (ext[j + 1] - ext[j]), 0.0, 1.0)
        return j, (j + 1) % n, w

    def field(self, theta, phi):
        theta, phi = np.broadcast_arrays(
            np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
        )
        shape = theta.shape
        theta = theta.ravel()
        phi = phi.ravel()
        i0, i1, wt = self._theta_index(theta)
        j0, j1, wp = self._phi_index(phi)
        out = []
        for arr in (self.e_theta, self.e_phi):
            v = ((1 - wt) * (1 - wp) * arr[i0, j0] + (1 - wt) * wp * arr[i0, j1]
                 + wt * (1 - wp) * arr[i1, j0] + wt * wp * arr[i1, j1])
            out.append(v.reshape(shape))
        return out[0], out[1]


class TranslatedPattern(ElementPattern):
    """``base`` re-referenced to the global origin from a phase center at ``position``."""

    kind = "translated"

    def __init__(self, base: ElementPattern, position, wavenumber: float):
        self.base = base
        self.position = np.asarray(position, dtype=float).reshape(3)
        self.wavenumber = float(wavenumber)

    def field(self, theta, phi):
        et, ep = self.base.field(theta, phi)
        f = _phase_factor(self.position, self.wavenumber, theta, phi)
        return et * f, ep * f


class CombinedPattern(ElementPattern):
    """Weighted sum ``sum_i c_i f_i(u)``."""

    kind = "combination"

    def __init__(self, coefficients, patterns: Sequence[ElementPattern]):
        coefficients = np.asarray(coefficients, dtype=complex).ravel()
        patterns = list(patterns)
        if coefficients.size != len(patterns):
            raise InvalidArgumentError(
                f"{coefficients.size} coefficients for {len(patterns)} patterns"
            )
        self.coefficients = coefficients
        self.patterns = patterns

    def field(self, theta, phi):
        shape = np.broadcast(np.asarray(theta), np.asarray(phi)).shape
        et = np.zeros(shape, dtype=complex)
        ep = np.zeros(shape, dtype=complex)
        for c, pat in zip(self.coefficients, self.patterns):
            if c == 0:
                continue
            ft, fp = pat.field(theta, phi)
            et += c * ft
            ep += c * fp
        return et, ep


def isotropic_eep(geometry: ArrayGeometry, index: int) -> IsotropicPattern:
    """Isotropic element ``index`` of ``geometry`` with its displaced phase center."""
    _check_index(geometry, index)
    return IsotropicPattern(geometry.positions[index], geometry.wavenumber)


def hertzian_dipole_eep(geometry: ArrayGeometry, index: int,
                        axis=(0.0, 0.0, 1.0)) -> HertzianDipolePattern:
    _check_index(geometry, index)
    return HertzianDipolePattern(geometry.positions[index], geometry.wavenumber, axis)


def _check_index(geometry, index):
    if not (0 <= int(index) < geometry.size):
        raise InvalidArgumentError(f"element index {index} out of range 0..{geometry.size - 1}")


def array_pattern(excitation, patterns: Sequence[ElementPattern]) -> CombinedPattern:
    """Total pattern ``F(u) = sum_i a_i f_i(u)`` of excited element patterns."""
    return CombinedPattern(excitation, patterns)


def iep_array_pattern(excitation, geometry: ArrayGeometry,
                      iep: ElementPattern) -> CombinedPattern:
    """Pattern-multiplication model: one isolated pattern copied to every position."""
    excitation = np.asarray(excitation, dtype=complex).ravel()
    if excitation.size != geometry.size:
        raise InvalidArgumentError(
            f"{excitation.size} excitations for {geometry.size} elements"
        )
    shifted = [TranslatedPattern(iep, r, geometry.wavenumber) for r in geometry.positions]
    return CombinedPattern(excitation, shifted)


def directivity_from_pattern(pattern: ElementPattern, grid: SphereGrid,
                             u0: Direction) -> float:
    """Peak-to-average power ratio, averaged over ``grid``, peak taken at ``u0``."""
    total = grid.integrate(pattern.power(grid.theta, grid.phi)) / (4 * np.pi)
    if not total > 0:
        raise DegeneratePatternError("pattern radiates no power on the grid")
    return float(pattern(u0).power / total)


def planar_directivity(pattern: ElementPattern, theta0: float, n_phi: int = 3600) -> float:
    """Directivity restricted to the conical cut ``theta = theta0``.

    The cut average uses the trapezoid rule on ``n_phi`` uniform samples,
    which on a periodic integrand is the plain sample mean.
    """
    if n_phi < 8:
        raise InvalidArgumentError("n_phi must be at least 8")
    phi = TWO_PI * np.arange(n_phi) / n_phi
    p = pattern.power(np.full(n_phi, float(theta0)), phi)
    mean = p.mean()
    if not mean > 0:
        raise DegeneratePatternError("pattern is zero on the requested cut")
    return float(p.max() / mean)


def evaluate_fields(patterns: Sequence[ElementPattern], theta, phi) -> np.ndarray:
    """Stack of element fields, shape (M, 2, N) for N evaluation points."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    out = []
    for pat in patterns:
        et, ep = pat.field(theta, phi)
        out.append(np.stack([et, ep]))
    return np.array(out)
