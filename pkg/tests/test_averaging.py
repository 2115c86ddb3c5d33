import numpy as np
import pytest

from qctl.adiabatic import diagonal_drift, spectral_path
from qctl.averaging import (
    FitError,
    averaged_flow_check,
    conjugated_perturbation,
    fit_slope,
    flow_deviation_from_identity,
    osc_integral,
)
from qctl.controls import (
    PerturbationSpec,
    PulseParams,
    get_profile,
    perturbation_from_spec,
    rwa_generator,
)
from qctl.schrodinger import Generator, StepLimitError, StepPolicy
from qctl.smallmat import ContractViolationError

from conftest import random_unitary

SINE = get_profile("sine")
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def sine_data_integrand():
    a = lambda s: np.sin(np.pi * np.asarray(s))
    h = lambda s: -(2.0 / np.pi) * np.sin(np.pi * np.asarray(s))
    return a, h


class TestOscIntegral:
    def test_closed_form_constant_data(self):
        # a == 1, h == 0, beta = 1: integral = eps^(a+1) (e^{i tau/eps^(a+1)} - 1)/i
        one = lambda s: np.ones_like(np.asarray(s, dtype=float))
        zero = lambda s: np.zeros_like(np.asarray(s, dtype=float))
        for eps, alpha, tau in ((0.3, 1.5, 1.0), (0.15, 1.0, 0.73)):
            got = osc_integral(one, zero, beta=1.0, alpha=alpha, epsilon=eps, tau=tau)
            scale = eps ** (alpha + 1.0)
            expected = scale * (np.exp(1j * tau / scale) - 1.0) / 1j
            assert abs(got - expected) <= 1e-10

    def test_zero_horizon(self):
        a, h = sine_data_integrand()
        assert osc_integral(a, h, 4.0, 1.5, 0.1, tau=0.0) == 0.0

    def test_panel_refinement_converged(self):
        a, h = sine_data_integrand()
        got = osc_integral(a, h, 4.0, 1.5, 0.1, tau=1.0)
        brute = _refined_integral(a, h, 4.0, 1.5, 0.1, 1.0, refine=4)
        assert abs(got - brute) <= 1e-8 * abs(brute)

    def test_trivial_bound(self):
        a, h = sine_data_integrand()
        bound = 2.0 / np.pi  # integral of |sin(pi s)|
        for eps in (0.3, 0.1, 0.05):
            assert abs(osc_integral(a, h, 4.0, 1.5, eps)) <= bound + 1e-12

    def test_sup_over_tau_scaling_exponent(self):
        a, h = sine_data_integrand()
        taus = np.linspace(0.05, 1.0, 20)
        mags = []
        for eps in (0.2, 0.1, 0.05):
            mags.append((eps, max(abs(osc_integral(a, h, 4.0, 1.5, eps, tau=float(t)))
                                  for t in taus)))
        report = fit_slope(mags)
        assert report.slope == pytest.approx(2.5, abs=0.3)

    def test_panel_cap(self):
        a, h = sine_data_integrand()
        with pytest.raises(StepLimitError):
            osc_integral(a, h, 4.0, 1.5, 0.01, panel_cap=100)

    def test_rejects_zero_beta(self):
        a, h = sine_data_integrand()
        with pytest.raises(ContractViolationError):
            osc_integral(a, h, 0.0, 1.5, 0.1)


def _refined_integral(a, h, beta, alpha, eps, tau, refine):
    """Brute panel-quadrature at `refine`x density (oracle for convergence)."""
    from numpy.polynomial.legendre import leggauss

    nodes, weights = leggauss(5)
    period = 2.0 * np.pi * eps ** (alpha + 1.0) / abs(beta)
    n_panels = int(np.ceil(tau / (period / (16.0 * refine))))
    width = tau / n_panels
    mids = (np.arange(n_panels) + 0.5) * width
    ss = (mids[:, None] + (width / 2.0) * nodes[None, :]).ravel()
    rate = np.longdouble(beta) / np.longdouble(eps) ** np.longdouble(alpha + 1.0)
    wrapped = np.asarray(np.mod(rate * ss.astype(np.longdouble),
                                2 * np.longdouble(np.pi)), dtype=float)
    vals = np.asarray(a(ss), dtype=complex) * np.exp(1j * (wrapped + np.asarray(h(ss)) / eps))
    return complex(np.sum(vals.reshape(n_panels, 5) @ weights) * width / 2.0)


def sine_reference_inputs(eps, alpha=1.5, grid=2048):
    ref = diagonal_drift(spectral_path(rwa_generator(SINE), grid))
    p_fn, gamma_fn, lam_sup = ref.interpolators()
    spec = PerturbationSpec.from_profile(SINE, PulseParams(epsilon=eps, alpha=alpha))
    return p_fn, gamma_fn, spec, lam_sup


class TestConjugatedPerturbation:
    def test_identity_paths_reduce_to_spec(self):
        eps = 0.05
        spec = PerturbationSpec.from_profile(SINE, PulseParams(epsilon=eps, alpha=1.5))
        ident = lambda t: np.broadcast_to(np.eye(2, dtype=complex),
                                          np.asarray(t).shape + (2, 2)).copy()
        zero = lambda t: np.zeros(np.asarray(t).shape + (2,))
        gen = conjugated_perturbation(ident, zero, spec, eps, gamma_rate=0.0)
        taus = np.linspace(0.0, 1.0, 65)
        np.testing.assert_allclose(gen.sample(taus),
                                   perturbation_from_spec(spec, eps).sample(taus), atol=1e-13)

    def test_zero_spec_gives_zero(self):
        spec = PerturbationSpec(dim=2, alpha=1.5, terms=())
        ident = lambda t: np.broadcast_to(np.eye(2, dtype=complex),
                                          np.asarray(t).shape + (2, 2)).copy()
        zero = lambda t: np.zeros(np.asarray(t).shape + (2,))
        gen = conjugated_perturbation(ident, zero, spec, 0.1, gamma_rate=0.0)
        assert np.max(np.abs(gen.sample(np.linspace(0.0, 1.0, 9)))) == 0.0

    def test_diagonal_conjugation_preserves_magnitudes(self, rng):
        eps = 0.05
        spec = PerturbationSpec.from_profile(SINE, PulseParams(epsilon=eps, alpha=1.5))
        u = random_unitary(rng, 2)
        p_fn = lambda t: np.broadcast_to(u, np.asarray(t).shape + (2, 2)).copy()
        gamma = lambda t: np.stack([0.7 * np.asarray(t), -0.2 * np.asarray(t)], axis=-1)
        gen = conjugated_perturbation(p_fn, gamma, spec, eps, gamma_rate=0.7)
        taus = np.linspace(0.0, 1.0, 33)
        m = gen.sample(taus)
        b = perturbation_from_spec(spec, eps).sample(taus)
        bare = np.conj(np.swapaxes(p_fn(taus), -1, -2)) @ b @ p_fn(taus)
        np.testing.assert_allclose(np.abs(m), np.abs(bare), atol=1e-12 / eps * 0.05)

    def test_skew_with_interpolated_paths(self):
        eps = 0.04
        p_fn, gamma_fn, spec, lam_sup = sine_reference_inputs(eps)
        gen = conjugated_perturbation(p_fn, gamma_fn, spec, eps, gamma_rate=lam_sup)
        g = gen.sample(np.linspace(0.0, 1.0, 101))
        defect = np.max(np.abs(g + np.conj(np.swapaxes(g, -1, -2))))
        assert defect <= 1e-12 * max(1.0, np.max(np.abs(g)))


class TestFlowDeviation:
    def test_zero_generator(self):
        gen = Generator(dim=2, sample=lambda t: np.zeros(np.asarray(t).shape + (2, 2),
                                                         dtype=complex), freq_bound=0.0)
        assert flow_deviation_from_identity(gen) == pytest.approx(0.0, abs=1e-12)

    def test_constant_rotation_closed_form(self):
        theta = 0.05
        gen = Generator(dim=2, sample=lambda t: np.broadcast_to(
            -1j * theta * SX, np.asarray(t).shape + (2, 2)).copy(), freq_bound=2.0 * theta)
        got = flow_deviation_from_identity(gen)
        assert got == pytest.approx(2.0 * abs(np.sin(theta / 2.0)), abs=1e-9)

    def test_conjugated_sine_deviation_scaling(self):
        # deviation of the conjugated remainder flow from Id shrinks with eps;
        # the bound's exponent is alpha - 1, the fit must clear 0.3
        devs = []
        for eps in (0.08, 0.04, 0.02):
            p_fn, gamma_fn, spec, lam_sup = sine_reference_inputs(eps)
            gen = conjugated_perturbation(p_fn, gamma_fn, spec, eps, gamma_rate=lam_sup)
            devs.append((eps, flow_deviation_from_identity(gen)))
        report = fit_slope(devs)
        assert report.slope >= 1.5 - 0.2  # alpha - 1 = 0.5 is a bound; actual decay is faster


class TestAveragedFlowCheck:
    def test_zero_perturbation_flagged_below_floor(self):
        gen_a = rwa_generator(SINE)
        zero = lambda eps: Generator(dim=2, sample=lambda t: np.zeros(
            np.asarray(t).shape + (2, 2), dtype=complex), freq_bound=0.0)
        report = averaged_flow_check(gen_a, zero, 1.0, [0.4, 0.2, 0.1], floor=1e-7)
        assert report.below_floor and report.passed is None
        assert len(report.excluded) == 3 and np.isnan(report.slope)

    def test_bounded_oscillation_first_order(self):
        # A = 0, B_eps = -i sigma_x cos(tau/eps): flow deviation is O(eps)
        gen_a = Generator(dim=2, sample=lambda t: np.zeros(np.asarray(t).shape + (2, 2),
                                                           dtype=complex), freq_bound=0.0)

        def family(eps):
            def sample(taus):
                taus = np.asarray(taus, dtype=float)
                g = np.zeros(taus.shape + (2, 2), dtype=complex)
                c = np.cos(taus / eps)
                g[..., 0, 1] = -1j * c
                g[..., 1, 0] = -1j * c
                return g

            return Generator(dim=2, sample=sample, freq_bound=1.0 / eps + 2.0)

        report = averaged_flow_check(gen_a, family, 1.0, [0.02, 0.01, 0.005])
        assert report.passed and report.slope >= 0.8
        errs = [err for _, err in report.pairs]
        assert all(a >= b for a, b in zip(errs, errs[1:]))  # monotone in eps

    def test_requires_three_epsilons(self):
        gen_a = rwa_generator(SINE)
        with pytest.raises(FitError):
            averaged_flow_check(gen_a, lambda e: gen_a, 1.0, [0.1, 0.05])


class TestFitSlope:
    def test_exact_power_law(self):
        eps = np.array([0.3, 0.1, 0.03, 0.01])
        report = fit_slope(list(zip(eps, 7.0 * eps**1.5)))
        assert report.slope == pytest.approx(1.5, abs=1e-12)
        assert report.r_squared >= 1.0 - 1e-12
        assert report.intercept == pytest.approx(np.log(7.0), abs=1e-10)

    def test_constant_errors(self):
        report = fit_slope([(0.4, 2.0), (0.2, 2.0), (0.1, 2.0)])
        assert report.slope == pytest.approx(0.0, abs=1e-14)

    def test_scale_invariance(self):
        pairs = [(0.4, 0.3), (0.2, 0.11), (0.1, 0.04)]
        r1 = fit_slope(pairs)
        r2 = fit_slope([(e, 13.0 * err) for e, err in pairs])
        assert r2.slope == pytest.approx(r1.slope, abs=1e-12)
        assert r2.intercept == pytest.approx(r1.intercept + np.log(13.0), abs=1e-10)

    def test_pairs_sorted_descending(self):
        report = fit_slope([(0.1, 0.01), (0.4, 0.3), (0.2, 0.05)])
        assert [e for e, _ in report.pairs] == [0.4, 0.2, 0.1]

    def test_floor_exclusion(self):
        report = fit_slope([(0.4, 0.3), (0.2, 0.11), (0.1, 0.04), (0.05, 1e-12)], floor=1e-9)
        assert report.excluded == ((0.05, 1e-12),)
        assert len(report.pairs) == 3

    def test_too_few_pairs(self):
        with pytest.raises(FitError):
            fit_slope([(0.4, 0.3), (0.2, 0.1)])

    def test_duplicate_epsilon(self):
        with pytest.raises(FitError):
            fit_slope([(0.4, 0.3), (0.4, 0.2), (0.1, 0.05)])

    def test_expected_exponent_verdict(self):
        eps = np.array([0.3, 0.1, 0.03])
        good = fit_slope(list(zip(eps, eps**1.0)), expected=1.0)
        bad = fit_slope(list(zip(eps, eps**0.5)), expected=1.0)
        assert good.passed is True
        assert bad.passed is False
