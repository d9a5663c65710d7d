"""Sensitivity of superdirective excitations to random excitation errors.

Each port excitation is perturbed to ``a_i (1 + alpha_i) exp(j delta_i)``
with independent zero-mean Gaussian ``alpha_i`` and ``delta_i``. The
closed-form sensitivity measure is the normalized variance

    Xi(a) = (a^T D_f0 a*) / |a^T v0|^2,   D_f0 = diag(|f_i(u0)|^2),

bounded below by ``1 / (v0^H D_f0^-1 v0)``, which is ``1/M`` when the
steering vector carries the full element field.

Random draws come from Philox streams keyed by the seed, with the sample
index in the high counter word. Sample ``i`` is therefore the same
whichever worker draws it, and results do not depend on thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .beamforming import directivity_quotient, normalize_excitation
from .coupling import CouplingMatrix
from .errors import (
    DegenerateSteeringError,
    InvalidArgumentError,
    UndefinedVarianceError,
)
from .patterns import (
    CombinedPattern,
    Direction,
    ElementPattern,
    SphereGrid,
    evaluate_fields,
)

THREADS_ENV = "SUPERDIR_THREADS"
CHUNK = 2048


@dataclass(frozen=True)
class ErrorModel:
    """Standard deviations of the relative amplitude error and the phase error (radians)."""

    sigma_amp: float = 0.0
    sigma_phase: float = 0.0

    def __post_init__(self):
        if not (self.sigma_amp >= 0 and self.sigma_phase >= 0):
            raise InvalidArgumentError("error standard deviations must be nonnegative")

    @classmethod
    def from_degrees(cls, sigma_amp: float, sigma_phase_deg: float) -> "ErrorModel":
        return cls(float(sigma_amp), float(np.deg2rad(sigma_phase_deg)))

    @property
    def amp_variance(self) -> float:
        return self.sigma_amp ** 2

    @property
    def phase_variance(self) -> float:
        return self.sigma_phase ** 2


def sample_generator(seed: int, index: int) -> np.random.Generator:
    """Generator for Monte Carlo sample ``index`` under ``seed``."""
    if seed < 0 or index < 0:
        raise InvalidArgumentError("seed and index must be nonnegative")
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(index)]))


def perturb(a, em: ErrorModel, rng: np.random.Generator) -> np.ndarray:
    """One perturbed copy of ``a``.

    Draws ``2M`` standard normals from ``rng``: the ``M`` amplitude errors
    first, then the ``M`` phase errors.
    """
    a = np.asarray(a, dtype=complex).ravel()
    z = rng.standard_normal(2 * a.size)
    alpha = em.sigma_amp * z[: a.size]
    delta = em.sigma_phase * z[a.size:]
    return a * (1 + alpha) * np.exp(1j * delta)


def worker_count(workers: int | None = None) -> int:
    """Worker count from the argument, else ``SUPERDIR_THREADS``, else the CPU count."""
    if workers is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError as exc:
                raise InvalidArgumentError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
        else:
            workers = os.cpu_count() or 1
    return max(1, int(workers))


def perturbed_excitations(a, em: ErrorModel, n: int, seed: int,
                          workers: int | None = None) -> np.ndarray:
    """``n`` perturbed excitations, shape (n, M), row ``i`` drawn from stream ``(seed, i)``."""
    if n < 1:
        raise InvalidArgumentError("need at least one sample")
    a = np.asarray(a, dtype=complex).ravel()
    out = np.empty((n, a.size), dtype=complex)

    def fill(start):
        for i in range(start, min(start + CHUNK, n)):
            out[i] = perturb(a, em, sample_generator(seed, i))

    starts = range(0, n, CHUNK)
    workers = min(worker_count(workers), len(starts))
    if workers == 1:
        for s in starts:
            fill(s)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(fill, starts))
    return out


def fluctuation_h(d0: float, samples) -> float:
    """Mean squared deviation of ``samples`` from the error-free directivity ``d0``."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise InvalidArgumentError("need at least one sample")
    return float(np.mean((samples - d0) ** 2))


def normalized_variance(a, c: CouplingMatrix) -> float:
    """``Xi = (a^T D_f0 a*) / |a^T v0|^2``."""
    a = np.asarray(a, dtype=complex).ravel()
    main = abs(a @ c.v0) ** 2
    if not main > 0:
        raise UndefinedVarianceError("excitation has no main-lobe field")
    return float(np.sum(c.d_f0 * np.abs(a) ** 2) / main)


def min_normalized_variance(c: CouplingMatrix) -> float:
    """Lower bound ``1 / (v0^H D_f0^-1 v0)`` of :func:`normalized_variance`."""
    if np.any(c.d_f0 <= 0):
        raise DegenerateSteeringError("an element has no field at the target direction")
    return float(1.0 / np.sum(np.abs(c.v0) ** 2 / c.d_f0))


def min_variance_excitation(c: CouplingMatrix) -> np.ndarray:
    """Excitation ``a_i = conj(v0_i) / d_f0_i`` attaining the variance bound.

    With ``d_f0 = |v0|^2`` this is ``a_i = 1 / f_i(u0)``.
    """
    if np.any(c.d_f0 <= 0) or np.any(c.v0 == 0):
        raise DegenerateSteeringError("an element has no field at the target direction")
    return normalize_excitation(c.v0.conj() / c.d_f0, c.b)


def field_variance(a, c: CouplingMatrix, em: ErrorModel, exact: bool = True) -> float:
    """Variance of the perturbed main-lobe field relative to ``|F0(u0)|^2``.

    The exact value is ``(1 + s_a^2 - exp(-s_d^2)) * Xi``. With
    ``exact=False`` the amplitude-only approximation
    ``s_a^2 * exp(s_d^2) * Xi`` is returned instead; it ignores the spread
    that phase errors add and underestimates the variance.
    """
    xi = normalized_variance(a, c)
    if exact:
        return (1 + em.amp_variance - np.exp(-em.phase_variance)) * xi
    return em.amp_variance * np.exp(em.phase_variance) * xi


def expected_pattern(a, patterns: Sequence[ElementPattern], em: ErrorModel) -> CombinedPattern:
    """Mean perturbed pattern, ``F0(u) exp(-s_d^2 / 2)``."""
    a = np.asarray(a, dtype=complex).ravel()
    return CombinedPattern(a * np.exp(-em.phase_variance / 2), patterns)


def expected_power_pattern(a, patterns: Sequence[ElementPattern], em: ErrorModel,
                           u: Direction, exact: bool = True) -> float:
    """Mean perturbed power at ``u``.

    The exact mean is
    ``|F0(u)|^2 exp(-s_d^2) + (1 + s_a^2 - exp(-s_d^2)) sum_i |a_i f_i(u)|^2``.
    With ``exact=False`` the background coefficient is ``s_a^2`` alone,
    which drops the incoherent power scattered by phase errors.
    """
    a = np.asarray(a, dtype=complex).ravel()
    fields = evaluate_fields(patterns, u.theta, u.phi)[:, :, 0]
    coherent = np.sum(np.abs(a @ fields) ** 2)
    incoherent = np.sum(np.abs(a) ** 2 * np.sum(np.abs(fields) ** 2, axis=1))
    fade = np.exp(-em.phase_variance)
    floor = (1 + em.amp_variance - fade) if exact else em.amp_variance
    return float(coherent * fade + floor * incoherent)


@dataclass(frozen=True, eq=False)
class MonteCarloReport:
    """Directivity statistics of perturbed excitations.

    Attributes
    ----------
    d0 : float
        Error-free directivity.
    samples : (n,) float ndarray
        Directivity of each perturbed excitation, in sample-index order.
    h : float
        Mean squared deviation of ``samples`` from ``d0``.
    mean_d : float
        Sample mean.
    seed, n : int
        Generator seed and sample count.
    """

    d0: float
    samples: np.ndarray
    h: float
    mean_d: float
    seed: int
    n: int

    def histogram(self, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
        """Equal-width bins over the sample range; returns ``(edges, counts)``."""
        counts, edges = np.histogram(self.samples, bins=bins)
        return edges, counts


def _quotient_directivities(x, c):
    # elementwise reductions keep each value independent of the batch length
    out = np.empty(x.shape[0])
    for s in range(0, x.shape[0], CHUNK):
        xs = x[s:s + CHUNK]
        main = np.abs(np.sum(xs * c.v0, axis=1)) ** 2
        power = np.sum(xs[:, :, None] * c.b * xs.conj()[:, None, :], axis=(1, 2)).real
        out[s:s + CHUNK] = main / power
    return out


def _pattern_directivities(x, patterns, grid, u0):
    fields = evaluate_fields(patterns, grid.theta, grid.phi)  # (M, 2, N)
    peak = evaluate_fields(patterns, u0.theta, u0.phi)[:, :, 0]  # (M, 2)
    mean_power = np.empty(x.shape[0])
    for s in range(0, x.shape[0], 256):
        total = np.einsum("sm,mcn->scn", x[s:s + 256], fields)
        mean_power[s:s + 256] = (np.abs(total) ** 2).sum(axis=1) @ grid.weights / (4 * np.pi)
    return np.sum(np.abs(x @ peak) ** 2, axis=1) / mean_power


def monte_carlo(a, c: CouplingMatrix, em: ErrorModel, n: int, seed: int = 0, *,
                patterns: Sequence[ElementPattern] | None = None,
                grid: SphereGrid | None = None, u0: Direction | None = None,
                workers: int | None = None) -> MonteCarloReport:
    """Directivity of ``n`` perturbed copies of ``a``.

    By default each sample is scored with the Rayleigh quotient of ``c``.
    Passing ``patterns``, ``grid`` and ``u0`` scores it by integrating the
    full perturbed pattern instead.
    """
    a = np.asarray(a, dtype=complex).ravel()
    x = perturbed_excitations(a, em, n, seed, workers)
    full = (patterns, grid, u0)
    if all(v is None for v in full):
        d0 = directivity_quotient(a, c)
        samples = _quotient_directivities(x, c)
    elif any(v is None for v in full):
        raise InvalidArgumentError("pattern mode needs patterns, grid and u0 together")
    else:
        d0 = float(_pattern_directivities(a[None, :], patterns, grid, u0)[0])
        samples = _pattern_directivities(x, patterns, grid, u0)
    samples.setflags(write=False)
    return MonteCarloReport(float(d0), samples, fluctuation_h(d0, samples),
                            float(samples.mean()), int(seed), int(n))
