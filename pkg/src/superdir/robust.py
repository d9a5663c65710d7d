"""Maximum directivity under a fixed normalized variance.

Maximizing ``|a^T v0|^2 / (a^T B a*)`` subject to ``Xi(a) = xi`` leads to
stationary points ``a* = K(p)^-1 v0`` with

    M_xi = xi v0 v0^H - D_f0,      K(p) = B + p M_xi,

for a real scalar ``p``. The admissible values of ``p`` make
``v0^H K^-1 M_xi K^-1 v0`` vanish, which is equivalent to
``det W(p) = 0`` where ``W = [v0, K M_xi^-1 K V]`` and the columns of ``V``
span the orthogonal complement of ``v0``. ``det W`` is a polynomial of
degree ``2(M - 1)`` in ``p``; it is recovered by interpolation at
Chebyshev points and its roots come from the companion matrix.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .beamforming import directivity_quotient, normalize_excitation
from .coupling import CouplingMatrix
from .errors import (
    ConstraintDegenerateError,
    DegenerateSteeringError,
    InfeasibleConstraintError,
    NumericalConditioningError,
    SuperdirError,
)
from .sensitivity import min_normalized_variance, normalized_variance, worker_count

IMAG_TOL = 1e-6  # relative size of Im(p) above which a root is discarded
XI_TOL = 1e-6  # relative constraint mismatch above which a root is discarded
SINGULAR_COND = 1e12
RETRY_STEP = 1e-9


def orthogonal_complement(v0) -> np.ndarray:
    """Orthonormal basis of the complement of ``v0``, shape (M, M - 1).

    The columns are columns 2..M of the Householder reflector that maps
    ``v0 / |v0|`` onto a multiple of ``e_1``.
    """
    v0 = np.asarray(v0, dtype=complex).ravel()
    norm = np.linalg.norm(v0)
    if norm == 0:
        raise DegenerateSteeringError("steering vector is zero")
    u = v0 / norm
    phase = u[0] / abs(u[0]) if u[0] != 0 else 1.0
    w = u.copy()
    w[0] += phase
    w /= np.linalg.norm(w)
    reflector = np.eye(v0.size) - 2 * np.outer(w, w.conj())
    return reflector[:, 1:]


def constraint_matrix(c: CouplingMatrix, xi: float) -> np.ndarray:
    """``M_xi = xi v0 v0^H - D_f0``."""
    return xi * np.outer(c.v0, c.v0.conj()) - np.diag(c.d_f0)


def _inverse_constraint(c, xi):
    m_xi = constraint_matrix(c, xi)
    if np.linalg.cond(m_xi) > SINGULAR_COND:
        raise ConstraintDegenerateError(f"constraint matrix is singular at xi = {xi!r}")
    return m_xi, np.linalg.inv(m_xi)


def build_w(p: complex, c: CouplingMatrix, xi: float, basis: np.ndarray,
            _m=None) -> np.ndarray:
    """``W(p) = [v0, K M_xi^-1 K V]`` with ``K = B + p M_xi``."""
    m_xi, m_inv = _m if _m is not None else _inverse_constraint(c, xi)
    k = c.b + p * m_xi
    return np.column_stack([c.v0, k @ m_inv @ k @ basis])


@dataclass(frozen=True, eq=False)
class DetPolynomial:
    """Interpolated ``det W(p)``.

    Attributes
    ----------
    coefficients : (2M - 1,) complex ndarray
        Ascending-power coefficients in ``p``.
    scale : float
        Half-width of the interpolation interval.
    leading_ratio : float
        ``|leading coefficient| / max |coefficient|`` in the scaled variable
        ``p / scale``; a small value means the degree is numerically lower.
    """

    coefficients: np.ndarray
    scale: float
    leading_ratio: float

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def scaled_coefficients(self) -> np.ndarray:
        return self.coefficients * self.scale ** np.arange(self.coefficients.size)

    def __call__(self, p):
        return np.polynomial.polynomial.polyval(np.asarray(p) / self.scale,
                                                self.scaled_coefficients())

    def roots(self) -> np.ndarray:
        return np.polynomial.polynomial.polyroots(self.scaled_coefficients()) * self.scale


def det_w_polynomial(c: CouplingMatrix, xi: float, basis: np.ndarray | None = None,
                     _m=None, scale: float | None = None) -> DetPolynomial:
    """Coefficients of ``det W(p)`` from its values at ``2M - 1`` Chebyshev points.

    The points span ``[-scale, scale]``, by default with
    ``scale = |B|_2 / |M_xi|_2``.
    """
    if basis is None:
        basis = orthogonal_complement(c.v0)
    m_xi, m_inv = _m if _m is not None else _inverse_constraint(c, xi)
    n = 2 * (c.size - 1)
    if scale is None:
        scale = np.linalg.norm(c.b, 2) / np.linalg.norm(m_xi, 2)
    # Fitting in t = p / scale keeps the Vandermonde system well conditioned.
    t = np.cos(np.pi * (np.arange(n + 1) + 0.5) / (n + 1))
    vander = np.vander(t, n + 1, increasing=True)
    if np.linalg.cond(vander) > SINGULAR_COND:
        raise NumericalConditioningError("interpolation system is singular")
    values = np.array([np.linalg.det(build_w(scale * ti, c, xi, basis, (m_xi, m_inv)))
                       for ti in t])
    scaled = np.linalg.solve(vander, values)
    top = np.max(np.abs(scaled))
    ratio = float(abs(scaled[-1]) / top) if top > 0 else 0.0
    coefficients = scaled / scale ** np.arange(n + 1)
    return DetPolynomial(coefficients, float(scale), ratio)


@dataclass(frozen=True)
class RootDiagnostic:
    """Outcome of one root of ``det W``."""

    p: complex
    status: str
    directivity: float | None = None
    xi: float | None = None


@dataclass(frozen=True, eq=False)
class RobustSolution:
    """Constrained optimum.

    Attributes
    ----------
    xi : float
        Requested normalized variance.
    roots : (2M - 2,) complex ndarray
        Polished roots of ``det W``.
    chosen_p : float
        Root that gave the excitation.
    excitation : (M,) complex ndarray
        Normalized excitation ``a``.
    directivity, xi_achieved : float
        Directivity and normalized variance of ``excitation``.
    residual : float
        ``|v0^H K^-1 M_xi K^-1 v0|`` normalized by
        ``|v0|^2 |K^-1|^2 max(D_f0)``.
    polynomial : DetPolynomial
    diagnostics : tuple of RootDiagnostic
    xi_used : float
        Constraint value actually solved; differs from ``xi`` after the
        singular-constraint retry.
    """

    xi: float
    roots: np.ndarray
    chosen_p: float
    excitation: np.ndarray
    directivity: float
    xi_achieved: float
    residual: float
    polynomial: DetPolynomial
    diagnostics: tuple[RootDiagnostic, ...] = field(default=())
    xi_used: float | None = None


def _newton_det(p, c, basis, m_xi, m_inv, steps=30):
    """Polish a root of ``det W`` using ``d log det W / dp = tr(W^-1 W')``."""
    for _ in range(steps):
        k = c.b + p * m_xi
        kv = k @ basis
        w = np.column_stack([c.v0, k @ m_inv @ kv])
        dw = np.column_stack([np.zeros_like(c.v0), 2 * kv])
        try:
            trace = np.trace(np.linalg.solve(w, dw))
        except np.linalg.LinAlgError:
            break
        if trace == 0 or not np.isfinite(trace):
            break
        step = 1 / trace
        p = p - step
        if abs(step) <= 1e-15 * (1 + abs(p)):
            break
    return p


def _residual(p, c, m_xi):
    """Normalized stationarity residual and the solution ``x = K^-1 v0``."""
    k = c.b + p * m_xi
    x = np.linalg.solve(k, c.v0)
    sigma_min = np.linalg.svd(k, compute_uv=False)[-1]
    norm = np.linalg.norm(c.v0) ** 2 * np.max(c.d_f0) / sigma_min ** 2
    return float(abs(np.vdot(x, m_xi @ x)) / norm), x


def _newton_real(p, c, m_xi, steps=5):
    """Refine a real root of ``g(p) = x^H M_xi x`` with ``x = K(p)^-1 v0``."""
    best, _ = _residual(p, c, m_xi)
    for _ in range(steps):
        k = c.b + p * m_xi
        x = np.linalg.solve(k, c.v0)
        y = m_xi @ x
        g = np.real(np.vdot(x, y))
        dg = -2 * np.real(np.vdot(y, np.linalg.solve(k, y)))
        if dg == 0 or not np.isfinite(dg):
            break
        trial = p - g / dg
        res, _ = _residual(trial, c, m_xi)
        if not res < best:
            break
        p, best = trial, res
    return p


def _solve_once(c: CouplingMatrix, xi: float, requested: float) -> RobustSolution:
    m_xi, m_inv = _inverse_constraint(c, xi)
    basis = orthogonal_complement(c.v0)
    poly = det_w_polynomial(c, xi, basis, (m_xi, m_inv))
    roots = np.array([_newton_det(complex(r), c, basis, m_xi, m_inv) for r in poly.roots()])

    # Near the variance bound M_xi is nearly singular and the real roots
    # move out to |p| ~ |M_xi^-1|^(1/2), far beyond the first interval.
    # Refitting on wider intervals finds them.
    candidates = list(roots)
    top = np.linalg.norm(c.b, 2) * np.linalg.norm(m_inv, 2)
    scale = poly.scale * 10
    while scale <= top:
        wide = det_w_polynomial(c, xi, basis, (m_xi, m_inv), scale)
        candidates += [_newton_det(complex(r), c, basis, m_xi, m_inv) for r in wide.roots()]
        scale *= 10
    unique = []
    for r in candidates:
        if all(abs(r - q) > 1e-8 * (1 + abs(q)) for q in unique):
            unique.append(r)

    diagnostics = []
    best = None
    for root in unique:
        if abs(root.imag) > IMAG_TOL * (1 + abs(root.real)):
            diagnostics.append(RootDiagnostic(complex(root), "complex"))
            continue
        p = _newton_real(float(root.real), c, m_xi)
        k = c.b + p * m_xi
        if np.linalg.cond(k) > 1e14:
            diagnostics.append(RootDiagnostic(complex(p), "singular K"))
            continue
        residual, x = _residual(p, c, m_xi)
        try:
            a = normalize_excitation(x.conj(), c.b)
            d = directivity_quotient(a, c)
            achieved = normalized_variance(a, c)
        except SuperdirError as exc:
            diagnostics.append(RootDiagnostic(complex(p), f"degenerate: {exc}"))
            continue
        if abs(achieved - xi) > XI_TOL * xi:
            diagnostics.append(RootDiagnostic(complex(p), "constraint mismatch", d, achieved))
            continue
        diagnostics.append(RootDiagnostic(complex(p), "feasible", d, achieved))
        if best is None or d > best[1]:
            best = (float(p), d, a, achieved, residual)

    if best is None:
        raise InfeasibleConstraintError(
            f"no root of det W satisfies xi = {requested!r}", diagnostics)
    p, d, a, achieved, residual = best
    return RobustSolution(requested, roots, p, a, d, achieved, residual, poly,
                          tuple(diagnostics), xi)


def ocrb_solve(c: CouplingMatrix, xi: float) -> RobustSolution:
    """Excitation of maximum directivity with normalized variance ``xi``.

    Raises
    ------
    InfeasibleConstraintError
        If ``xi`` lies below the variance bound or no root of ``det W``
        reproduces it.
    ConstraintDegenerateError
        If ``M_xi`` stays singular after one retry with ``xi`` nudged up by
        a relative ``1e-9``.
    """
    xi = float(xi)
    bound = min_normalized_variance(c)
    if not xi >= bound * (1 - 1e-12):
        raise InfeasibleConstraintError(
            f"xi = {xi!r} is below the lower bound {bound!r}",
            [RootDiagnostic(0j, f"bound {bound!r}")])
    try:
        return _solve_once(c, xi, xi)
    except ConstraintDegenerateError:
        return _solve_once(c, max(xi, bound) * (1 + RETRY_STEP), xi)


@dataclass(frozen=True)
class SweepPoint:
    xi: float
    directivity: float | None
    p: float | None
    residual: float | None
    error: str | None = None


def tradeoff_sweep(c: CouplingMatrix, xi_values: Sequence[float],
                   workers: int | None = None) -> list[SweepPoint]:
    """One constrained solve per ``xi``, in input order; failures are recorded, not raised."""

    def one(xi):
        try:
            sol = ocrb_solve(c, xi)
        except SuperdirError as exc:
            return SweepPoint(float(xi), None, None, None, f"{type(exc).__name__}: {exc}")
        return SweepPoint(float(xi), sol.directivity, sol.chosen_p, sol.residual)

    xi_values = [float(x) for x in xi_values]
    workers = min(worker_count(workers), max(len(xi_values), 1))
    if workers == 1:
        return [one(x) for x in xi_values]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(one, xi_values))
