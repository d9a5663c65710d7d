import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import stats

from oracles import random_hpd, sinc_array
from superdir.beamforming import eepb_solve, mrt
from superdir.coupling import CouplingMatrix, coupling_from_patterns
from superdir.errors import DegenerateSteeringError, InvalidArgumentError, UndefinedVarianceError
from superdir.patterns import ENDFIRE, ArrayGeometry, Direction, array_pattern, isotropic_eep
from superdir.robust import ocrb_solve
from superdir.sensitivity import (
    THREADS_ENV,
    ErrorModel,
    expected_pattern,
    expected_power_pattern,
    field_variance,
    fluctuation_h,
    min_normalized_variance,
    min_variance_excitation,
    monte_carlo,
    normalized_variance,
    perturb,
    perturbed_excitations,
    sample_generator,
    worker_count,
)

# Xi of the optimum excitation of the sinc arrays, computed with mpmath
SINC_XI0 = {(2, 0.05): 11.6003, (3, 0.1): 28.0644, (4, 0.15): 36.7594, (5, 0.3): 1.44156}


def draw(a, em, n, seed):
    """Perturbed copies of ``a`` drawn in one vectorized batch."""
    rng = np.random.default_rng(seed)
    amp = 1 + em.sigma_amp * rng.standard_normal((n, a.size))
    return a * amp * np.exp(1j * em.sigma_phase * rng.standard_normal((n, a.size)))


def sinc_coupling(m, d):
    b, v0 = sinc_array(m, d)
    return CouplingMatrix(b, v0)


# --- error model and sampling --------------------------------------------------


def test_error_model_units():
    em = ErrorModel.from_degrees(0.1, 5.0)
    assert_allclose(em.sigma_phase, np.deg2rad(5))
    assert_allclose(em.amp_variance, 0.01)
    with pytest.raises(InvalidArgumentError):
        ErrorModel(-0.1, 0.0)


def test_zero_error_is_identity():
    a = np.array([1 + 2j, -0.5j])
    assert_allclose(perturb(a, ErrorModel(), sample_generator(0, 0)), a)


def test_perturb_draw_order():
    a = np.array([2.0, 3.0j])
    z = sample_generator(9, 4).standard_normal(4)
    expected = a * (1 + 0.1 * z[:2]) * np.exp(0.2j * z[2:])
    assert_allclose(perturb(a, ErrorModel(0.1, 0.2), sample_generator(9, 4)), expected)


def test_perturbation_statistics():
    n = 1_000_000
    a = np.ones(n, dtype=complex)
    em = ErrorModel(0.1, 0.3)
    x = perturb(a, em, sample_generator(1, 0))
    amp, phase = np.abs(x) - 1, np.angle(x)
    assert abs(amp.mean()) < 5 * 0.1 / np.sqrt(n)
    assert_allclose(amp.std(), 0.1, rtol=5e-3)
    assert_allclose(phase.std(), 0.3, rtol=5e-3)
    # the mean field fades by exp(-s_d^2 / 2)
    assert abs(x.mean() - np.exp(-0.045)) < 5 * 0.31 / np.sqrt(n)
    assert stats.kstest(phase / 0.3, "norm").pvalue > 1e-3


def test_sample_streams_are_independent_of_batching():
    a = np.array([1, 1j, -1])
    em = ErrorModel(0.05, 0.1)
    batch = perturbed_excitations(a, em, 5000, seed=3, workers=4)
    assert_allclose(batch[4321], perturb(a, em, sample_generator(3, 4321)))
    assert np.array_equal(batch, perturbed_excitations(a, em, 5000, seed=3, workers=1))
    assert not np.array_equal(batch, perturbed_excitations(a, em, 5000, seed=4, workers=1))


def test_sampling_argument_errors():
    with pytest.raises(InvalidArgumentError):
        sample_generator(-1, 0)
    with pytest.raises(InvalidArgumentError):
        perturbed_excitations([1], ErrorModel(), 0, 0)


def test_worker_count(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert worker_count() == 3
    assert worker_count(5) == 5
    assert worker_count(0) == 1
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(InvalidArgumentError):
        worker_count()


# --- fluctuation and normalized variance ---------------------------------------


def test_fluctuation_examples():
    assert fluctuation_h(5.0, [5.0, 5.0]) == 0
    assert_allclose(fluctuation_h(1.0, [0.0, 2.0, 4.0]), (1 + 1 + 9) / 3)
    with pytest.raises(InvalidArgumentError):
        fluctuation_h(1.0, [])


@pytest.mark.parametrize("m, d", sorted(SINC_XI0))
def test_optimum_xi_examples(m, d):
    c = sinc_coupling(m, d)
    assert_allclose(normalized_variance(eepb_solve(c).excitation, c), SINC_XI0[m, d], rtol=1e-5)


def test_uniform_excitation_xi():
    c = sinc_coupling(4, 0.2)
    assert_allclose(normalized_variance(mrt(c).excitation, c), 0.25, rtol=1e-12)
    assert_allclose(min_normalized_variance(c), 0.25)


def test_xi_is_scale_invariant(rng):
    c = CouplingMatrix(random_hpd(rng, 3, 10), [1, 2j, -0.5])
    a = rng.normal(size=3) + 1j * rng.normal(size=3)
    assert_allclose(normalized_variance(a, c), normalized_variance((2 - 3j) * a, c), rtol=1e-13)


def test_min_variance_excitation_attains_bound(rng):
    for _ in range(20):
        m = rng.integers(2, 7)
        v0 = rng.uniform(0.2, 2, m) * np.exp(1j * rng.uniform(0, 2 * np.pi, m))
        d_f0 = np.abs(v0) ** 2 * rng.uniform(1, 2, m)  # includes cross-polar power
        c = CouplingMatrix(random_hpd(rng, m, 10), v0, d_f0)
        bound = min_normalized_variance(c)
        assert_allclose(normalized_variance(min_variance_excitation(c), c), bound, rtol=1e-12)
        for _ in range(50):
            a = rng.normal(size=m) + 1j * rng.normal(size=m)
            assert normalized_variance(a, c) >= bound * (1 - 1e-12)


def test_variance_errors():
    c = CouplingMatrix(np.eye(2), [1, 0])
    with pytest.raises(UndefinedVarianceError):
        normalized_variance([0, 1], c)
    with pytest.raises(DegenerateSteeringError):
        min_normalized_variance(c)
    with pytest.raises(DegenerateSteeringError):
        min_variance_excitation(c)


# --- field variance and expected power -------------------------------------------


def test_field_variance_forms():
    c = sinc_coupling(3, 0.1)
    a = eepb_solve(c).excitation
    em = ErrorModel(0.05, 0.2)
    xi = normalized_variance(a, c)
    assert_allclose(field_variance(a, c, em), (1.0025 - np.exp(-0.04)) * xi)
    assert_allclose(field_variance(a, c, em, exact=False), 0.0025 * np.exp(0.04) * xi)
    assert field_variance(a, c, ErrorModel()) == 0


def test_exact_field_variance_matches_sampling(rng):
    c = CouplingMatrix(random_hpd(rng, 4, 30), rng.normal(size=4) + 1j * rng.normal(size=4))
    a = eepb_solve(c).excitation
    em = ErrorModel(0.08, 0.15)
    x = draw(a, em, 400_000, seed=11)
    f = x @ c.v0
    sampled = np.var(f) / abs(a @ c.v0) ** 2
    assert_allclose(sampled, field_variance(a, c, em), rtol=0.02)


def test_expected_pattern_fades_coherently(grid):
    geo = ArrayGeometry.linear(3, 0.2)
    pats = [isotropic_eep(geo, i) for i in range(3)]
    a = np.array([1, -1j, 0.5])
    em = ErrorModel(0.1, 0.4)
    mean = expected_pattern(a, pats, em)
    base = array_pattern(a, pats)
    theta, phi = grid.theta[:50], grid.phi[:50]
    assert_allclose(np.stack(mean.field(theta, phi)), np.exp(-0.08) * np.stack(base.field(theta, phi)))


def test_expected_power_matches_sampling():
    geo = ArrayGeometry.linear(3, 0.1)
    pats = [isotropic_eep(geo, i) for i in range(3)]
    c = sinc_coupling(3, 0.1)
    a = eepb_solve(c).excitation
    em = ErrorModel(0.05, np.deg2rad(10))
    u = Direction.from_degrees(60, 30)
    x = draw(a, em, 300_000, seed=2)
    fields = np.array([p(u).e_theta for p in pats])
    sampled = np.mean(np.abs(x @ fields) ** 2)
    assert_allclose(expected_power_pattern(a, pats, em, u), sampled, rtol=0.01)
    assert expected_power_pattern(a, pats, em, u, exact=False) < 0.9 * sampled


def test_expected_power_without_errors_is_pattern_power():
    geo = ArrayGeometry.linear(2, 0.25)
    pats = [isotropic_eep(geo, i) for i in range(2)]
    a = np.array([1, 1j])
    u = Direction.from_degrees(80, 200)
    assert_allclose(expected_power_pattern(a, pats, ErrorModel(), u), array_pattern(a, pats)(u).power)


# --- Monte Carlo -------------------------------------------------------------------


def test_monte_carlo_without_errors():
    c = sinc_coupling(3, 0.1)
    a = eepb_solve(c).excitation
    rep = monte_carlo(a, c, ErrorModel(), 100)
    assert_allclose(rep.samples, rep.d0, rtol=1e-12)
    assert rep.h < 1e-20 and rep.n == 100 and rep.seed == 0


def test_monte_carlo_deterministic_across_workers():
    c = sinc_coupling(4, 0.15)
    a = eepb_solve(c).excitation
    em = ErrorModel.from_degrees(0.01, 1.0)
    r1 = monte_carlo(a, c, em, 10_000, seed=7, workers=1)
    r8 = monte_carlo(a, c, em, 10_000, seed=7, workers=8)
    assert np.array_equal(r1.samples, r8.samples)
    assert r1.h == r8.h
    with pytest.raises(ValueError):
        r1.samples[0] = 0


def test_monte_carlo_histogram():
    c = sinc_coupling(2, 0.2)
    rep = monte_carlo(eepb_solve(c).excitation, c, ErrorModel(0.05, 0.05), 1000, seed=1)
    edges, counts = rep.histogram(20)
    assert edges.size == 21 and counts.sum() == 1000
    assert edges[0] == rep.samples.min() and edges[-1] == rep.samples.max()


def test_superdirective_excitation_fluctuates_more_than_uniform():
    c = sinc_coupling(4, 0.15)
    em = ErrorModel.from_degrees(0.01, 1.0)
    h_opt = monte_carlo(eepb_solve(c).excitation, c, em, 5000, seed=5).h
    h_mrt = monte_carlo(mrt(c).excitation, c, em, 5000, seed=5).h
    assert h_opt > 100 * h_mrt


def test_pattern_mode_agrees_with_quotient_mode(grid):
    geo = ArrayGeometry.linear(3, 0.1)
    pats = [isotropic_eep(geo, i) for i in range(3)]
    c = coupling_from_patterns(pats, grid, ENDFIRE)
    a = eepb_solve(c).excitation
    em = ErrorModel.from_degrees(0.02, 2.0)
    q = monte_carlo(a, c, em, 600, seed=3)
    p = monte_carlo(a, c, em, 600, seed=3, patterns=pats, grid=grid, u0=ENDFIRE)
    assert_allclose(p.samples, q.samples, rtol=1e-9)
    assert_allclose(p.d0, q.d0, rtol=1e-9)
    with pytest.raises(InvalidArgumentError):
        monte_carlo(a, c, em, 10, patterns=pats)


def test_fluctuation_ranks_follow_normalized_variance():
    c = sinc_coupling(3, 0.1)
    xi0 = SINC_XI0[3, 0.1]
    excitations = [eepb_solve(c).excitation, mrt(c).excitation]
    for f in (0.2, 0.6):
        excitations.append(ocrb_solve(c, 1 / 3 + f * (xi0 - 1 / 3)).excitation)
    em = ErrorModel.from_degrees(0.005, 0.3)
    xi = [normalized_variance(a, c) for a in excitations]
    h = [monte_carlo(a, c, em, 20_000, seed=8).h for a in excitations]
    assert list(np.argsort(xi)) == list(np.argsort(h))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 16), st.integers(1, 300))
def test_monte_carlo_sample_prefix_is_stable(seed, n):
    c = sinc_coupling(2, 0.3)
    a = eepb_solve(c).excitation
    em = ErrorModel(0.05, 0.05)
    short = monte_carlo(a, c, em, n, seed=seed, workers=1)
    long = monte_carlo(a, c, em, n + 5, seed=seed, workers=2)
    assert np.array_equal(short.samples, long.samples[:n])


def test_moderate_constraint_is_more_robust_and_more_directive_on_average():
    # five elements at 0.3 wavelength; the bound 1/5 leaves little room,
    # so the constraint is placed at 0.7 of the optimum's variance
    c = sinc_coupling(5, 0.3)
    base = eepb_solve(c)
    xi0 = normalized_variance(base.excitation, c)
    robust = ocrb_solve(c, 0.7 * xi0)
    em = ErrorModel.from_degrees(0.05, 5.0)
    rep_e = monte_carlo(base.excitation, c, em, 10_000, seed=9)
    rep_o = monte_carlo(robust.excitation, c, em, 10_000, seed=9)
    assert rep_o.h < rep_e.h
    assert rep_o.mean_d > rep_e.mean_d
