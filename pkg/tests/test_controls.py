import numpy as np
import pytest

from qctl.controls import (
    drift_rate,
    ControlProfile,
    PerturbationSpec,
    PerturbationTerm,
    PulseParams,
    TrigPoly,
    carrier_phase,
    carrier_rate,
    complex_generator,
    gap_premise,
    get_profile,
    is_transfer_profile,
    lab_generator,
    perturbation_from_spec,
    profile_catalog,
    real_pulse,
    rotated_generator,
    rotating_frame,
    rwa_generator,
    rwa_residual,
)
from qctl.smallmat import ContractViolationError, eig_hermitian, hermiticity_defect

SINE = get_profile("sine")
LD = np.longdouble


def params(eps=0.01, alpha=1.5, E=1.0, delta=1.0):
    return PulseParams(epsilon=eps, alpha=alpha, E=E, delta=delta)


class TestTrigPoly:
    def test_evaluation(self):
        p = TrigPoly(a0=0.5, sin_coeffs=(1.0, 0.0, -2.0), cos_coeffs=(0.25,))
        taus = np.linspace(0.0, 1.0, 7)
        expected = (0.5 + np.sin(np.pi * taus) - 2.0 * np.sin(3 * np.pi * taus)
                    + 0.25 * np.cos(np.pi * taus))
        np.testing.assert_allclose(p(taus), expected, atol=1e-15)

    def test_derivative_matches_finite_difference(self):
        p = TrigPoly(a0=0.3, sin_coeffs=(0.7, -0.2), cos_coeffs=(0.1, 0.4))
        dp = p.derivative()
        taus = np.linspace(0.05, 0.95, 11)
        h = 1e-6
        fd = (p(taus + h) - p(taus - h)) / (2.0 * h)
        np.testing.assert_allclose(dp(taus), fd, atol=1e-7)

    def test_sup_bound(self):
        p = TrigPoly(a0=-1.0, sin_coeffs=(2.0,), cos_coeffs=(0.5,))
        taus = np.linspace(0.0, 2.0, 4001)
        assert np.max(np.abs(p(taus))) <= p.sup_bound() + 1e-12


class TestProfiles:
    def test_catalog_contents(self):
        names = set(profile_catalog())
        assert {"sine", "flat", "flat-phase-only"} <= names

    def test_sine_profile_fields(self):
        taus = np.linspace(0.0, 1.0, 33)
        np.testing.assert_allclose(SINE.v(taus), np.sin(np.pi * taus), atol=1e-15)
        np.testing.assert_allclose(SINE.phi(taus), -np.sin(np.pi * taus) / np.pi, atol=1e-15)
        np.testing.assert_allclose(SINE.dphi(taus), -np.cos(np.pi * taus), atol=1e-14)
        assert SINE.v_sup == pytest.approx(1.0)
        assert SINE.dphi_sup == pytest.approx(1.0)

    def test_transfer_predicate(self):
        assert is_transfer_profile(SINE)
        assert not is_transfer_profile(get_profile("flat"))
        assert not is_transfer_profile(get_profile("flat-phase-only"))

    def test_gap_premise(self):
        # min of v^2 + phi'^2/4 for the sine profile sits at the endpoints: 1/4
        assert gap_premise(SINE) == pytest.approx(0.25, abs=1e-9)
        assert gap_premise(get_profile("flat-phase-only")) == pytest.approx(0.25, abs=1e-12)

    def test_phi_zero_enforced(self):
        with pytest.raises(ContractViolationError, match="phi"):
            ControlProfile.from_trig("bad", TrigPoly(a0=1.0), TrigPoly(cos_coeffs=(0.3,)))

    def test_unknown_profile(self):
        with pytest.raises(ContractViolationError, match="unknown profile"):
            get_profile("nope")

    def test_coupling_scale(self):
        scaled = SINE.with_coupling_scale(0.25)
        taus = np.linspace(0.0, 1.0, 9)
        np.testing.assert_allclose(scaled.v(taus), 0.25 * SINE.v(taus))
        assert scaled.v_sup == pytest.approx(0.25)
        np.testing.assert_allclose(scaled.dphi(taus), SINE.dphi(taus))


class TestPulseParams:
    def test_alpha_warning(self):
        with pytest.warns(UserWarning, match="alpha"):
            PulseParams(epsilon=0.1, alpha=1.0)

    def test_epsilon_bounds(self):
        with pytest.raises(ContractViolationError):
            PulseParams(epsilon=0.0, alpha=1.5)
        with pytest.raises(ContractViolationError):
            PulseParams(epsilon=1.2, alpha=1.5)

    def test_lab_time(self):
        assert params(eps=0.01, alpha=1.5).lab_time == pytest.approx(1e5, rel=1e-12)


class TestRealPulse:
    def test_zero_at_zero_envelope(self):
        u = real_pulse(SINE, params())
        assert float(u(0.0)) == pytest.approx(0.0, abs=1e-12)

    def test_flat_profile_at_origin(self):
        # alpha = 1 is allowed for exploration (warning, not rejection)
        with pytest.warns(UserWarning, match="alpha"):
            p = params(eps=0.1, alpha=1.0)
        u = real_pulse(get_profile("flat"), p)
        assert float(u(np.asarray(0.0))) == pytest.approx(20.0, rel=1e-14)

    def test_extended_precision_phase_value(self):
        # 200*cos(1e5 - 100/pi) evaluated at 60-digit precision with epsilon
        # taken as the binary double 0.01: -180.01815636595515...
        u = real_pulse(SINE, params(eps=0.01, alpha=1.5, E=1.0))
        assert float(u(np.asarray(0.5))) == pytest.approx(-180.01815636595515, abs=1e-8)

    def test_amplitude_bound(self):
        p = params(eps=0.05, alpha=1.5)
        u = real_pulse(SINE, p)
        taus = np.linspace(0.0, 1.0, 20001)
        assert np.max(np.abs(u(taus))) <= 2.0 / p.epsilon * SINE.v_sup + 1e-9

    def test_real_part_relation(self):
        # u = 2 Re(w) with w the co-rotating complex control
        p = params()
        u = real_pulse(SINE, p)
        gen = complex_generator(SINE, p)
        taus = np.linspace(0.0, 1.0, 1001)
        w = 1j * gen.sample(taus)[:, 0, 1]
        np.testing.assert_allclose(u(taus), 2.0 * np.real(w), atol=1e-12 * 2.0 / p.epsilon)


class TestLabGenerator:
    def test_delta_zero_is_free_evolution(self):
        gen = lab_generator(SINE, params(delta=0.0))
        g = gen.sample(np.linspace(0.0, 1.0, 11))
        assert np.max(np.abs(g[:, 0, 1])) == 0.0
        np.testing.assert_allclose(g[:, 0, 0], g[0, 0, 0])

    def test_traceless(self):
        g = lab_generator(SINE, params()).sample(np.linspace(0.0, 1.0, 101))
        np.testing.assert_allclose(np.trace(1j * g, axis1=-2, axis2=-1), 0.0, atol=1e-16)

    def test_diagonal_magnitude(self):
        g = lab_generator(SINE, params(eps=0.01, alpha=1.5, E=1.0)).sample(np.asarray([0.3]))
        assert abs(g[0, 0, 0]) == pytest.approx(1e5, rel=1e-12)

    def test_freq_bound_formula(self):
        p = params(eps=0.01, alpha=1.5, E=1.0, delta=1.0)
        gen = lab_generator(SINE, p)
        expected = 2.0 * 1e5 + 1.0 / 0.01 + 2.0 / 0.01
        assert gen.freq_bound == pytest.approx(expected, rel=1e-9)


class TestComplexGenerator:
    def test_offdiagonal_modulus(self):
        p = params()
        g = complex_generator(SINE, p).sample(np.linspace(0.1, 0.9, 33))
        np.testing.assert_allclose(np.abs(g[:, 0, 1]),
                                   SINE.v(np.linspace(0.1, 0.9, 33)) / p.epsilon, rtol=1e-12)

    def test_diagonal_at_zero_envelope(self):
        g = complex_generator(SINE, params()).sample(np.asarray([0.0]))
        assert abs(g[0, 0, 1]) == 0.0 and abs(g[0, 1, 0]) == 0.0

    def test_hermitian_part(self):
        g = complex_generator(SINE, params()).sample(np.linspace(0.0, 1.0, 101))
        assert hermiticity_defect(1j * g) <= 1e-15


class TestRotatingFrame:
    def test_identity_at_zero(self):
        u = rotating_frame(SINE, params())(np.asarray([0.0]))[0]
        np.testing.assert_allclose(u, np.eye(2), atol=1e-15)

    def test_unit_determinant(self):
        u = rotating_frame(SINE, params())(np.linspace(0.0, 1.0, 64))
        np.testing.assert_allclose(np.linalg.det(u), 1.0, atol=1e-14)

    def test_builders_match_extended_precision_reference(self):
        # float64 pulse against a longdouble re-derivation of the same formula
        p = params()
        taus = np.linspace(0.0, 1.0, 257)
        theta_ld = carrier_phase(SINE, p, taus, dtype=LD)
        g64 = lab_generator(SINE, p).sample(taus)
        u_ld = (2 / LD(p.epsilon)) * SINE.v(taus.astype(LD)) * np.cos(2 * theta_ld)
        assert np.max(np.abs(1j * g64[:, 0, 1] - u_ld.astype(complex))) <= 1e-12 * (2.0 / p.epsilon)
        u_frame = rotating_frame(SINE, p)(taus)
        np.testing.assert_allclose(u_frame[:, 0, 0],
                                   np.exp(1j * theta_ld).astype(complex), atol=1e-13)

    def test_carrier_rate_formula(self):
        p = params()
        taus = np.linspace(0.0, 1.0, 11)
        expected = p.E * p.carrier_scale + SINE.dphi(taus) / (2.0 * p.epsilon)
        np.testing.assert_allclose(carrier_rate(SINE, p, taus), expected, rtol=1e-14)


class TestRwaGenerator:
    def test_value_at_zero(self):
        g = rwa_generator(SINE).sample(np.asarray([0.0]))[0]
        np.testing.assert_allclose(g, -1j * np.diag([0.5, -0.5]), atol=1e-15)

    def test_value_at_midpoint(self):
        g = rwa_generator(SINE).sample(np.asarray([0.5]))[0]
        np.testing.assert_allclose(g, -1j * np.array([[0.0, 1.0], [1.0, 0.0]]), atol=1e-15)

    def test_eigenvalues_closed_form(self):
        rng = np.random.default_rng(11)
        taus = rng.uniform(0.0, 1.0, 100)
        gs = rwa_generator(SINE).sample(taus)
        expected = np.sqrt(SINE.v(taus) ** 2 + SINE.dphi(taus) ** 2 / 4.0)
        for g, lam in zip(gs, expected):
            dec = eig_hermitian(1j * g)
            np.testing.assert_allclose(dec.values, [-lam, lam], atol=1e-12)


class TestRwaResidual:
    def test_zero_diagonal(self):
        g = rwa_residual(SINE, params()).sample(np.linspace(0.0, 1.0, 65))
        assert np.max(np.abs(g[:, 0, 0])) == 0.0
        assert np.max(np.abs(g[:, 1, 1])) == 0.0

    def test_offdiagonal_modulus(self):
        p = params()
        taus = np.linspace(0.0, 1.0, 65)
        g = rwa_residual(SINE, p).sample(taus)
        np.testing.assert_allclose(np.abs(g[:, 0, 1]), SINE.v(taus) / p.epsilon, atol=1e-10)

    def test_skew_structure(self):
        g = rwa_residual(SINE, params()).sample(np.linspace(0.0, 1.0, 65))
        np.testing.assert_allclose(g[:, 1, 0], -np.conj(g[:, 0, 1]), atol=0.0)

    def test_rotated_equals_scaled_rwa_plus_residual(self):
        p = params()
        taus = np.linspace(0.0, 1.0, 301)
        lhs = rotated_generator(SINE, p).sample(taus)
        rhs = rwa_generator(SINE).sample(taus) / p.epsilon + rwa_residual(SINE, p).sample(taus)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 / p.epsilon)

    def test_frame_identity_at_random_taus(self):
        # U G_lab U* + (dU/dtau) U* == (1/eps)A + B_eps entrywise at 1000
        # random taus.  The builders share one float64 carrier phase, so the
        # identity is exact in that common input; the check is assembled in
        # extended precision because the 1e5-magnitude diagonal cancellation
        # alone costs ~1.5e-11 in float64 arithmetic.
        p = params()
        rng = np.random.default_rng(3)
        taus = rng.uniform(0.0, 1.0, 1000)
        theta = carrier_phase(SINE, p, taus).astype(np.clongdouble)  # builders' phase
        eip = np.exp(1j * theta)
        g_lab = lab_generator(SINE, p).sample(taus).astype(np.clongdouble)
        # dTheta/dtau: the shared rounded carrier rate plus the analytic slow
        # part, extended so the cancellation against the drift is exact
        rate = (LD(drift_rate(p, p.E))
                + SINE.dphi(taus.astype(LD)) / (2 * LD(p.epsilon)))
        u_mat = np.zeros_like(g_lab)
        u_mat[:, 0, 0] = eip
        u_mat[:, 1, 1] = 1.0 / eip
        du_ustar = np.zeros_like(g_lab)
        du_ustar[:, 0, 0] = 1j * rate
        du_ustar[:, 1, 1] = -1j * rate
        lhs = u_mat @ g_lab @ np.conj(np.swapaxes(u_mat, -1, -2)) + du_ustar
        rhs = (rwa_generator(SINE).sample(taus).astype(np.clongdouble) / LD(p.epsilon)
               + rwa_residual(SINE, p).sample(taus).astype(np.clongdouble))
        assert float(np.max(np.abs(lhs - rhs))) <= 1e-12


class TestPerturbationSpec:
    def test_zero_envelope_gives_zero(self):
        spec = PerturbationSpec(dim=2, alpha=1.5, terms=(
            PerturbationTerm(j=0, k=1, beta=4.0, v=lambda t: np.zeros_like(np.asarray(t)),
                             h=lambda t: np.zeros_like(np.asarray(t)), v_sup=0.0, dh_sup=0.0),))
        g = perturbation_from_spec(spec, 0.1).sample(np.linspace(0.0, 1.0, 9))
        assert np.max(np.abs(g)) == 0.0

    def test_specializes_to_rwa_residual(self):
        p = params()
        spec = PerturbationSpec.from_profile(SINE, p)
        taus = np.linspace(0.0, 1.0, 257)
        g1 = perturbation_from_spec(spec, p.epsilon).sample(taus)
        g2 = rwa_residual(SINE, p).sample(taus)
        np.testing.assert_allclose(g1, g2, atol=1e-9 / p.epsilon * 0.01)

    def test_three_level_skewness(self):
        rng = np.random.default_rng(1)
        terms = tuple(
            PerturbationTerm(j=j, k=k, beta=b,
                             v=TrigPoly(sin_coeffs=(a,)), h=TrigPoly(sin_coeffs=(c,)),
                             v_sup=abs(a), dh_sup=abs(c) * np.pi)
            for (j, k), b, a, c in zip(((0, 1), (0, 2), (1, 2)), (4.0, 6.0, 2.0),
                                       (1.0, 0.5, 0.8), (0.3, -0.2, 0.1))
        )
        spec = PerturbationSpec(dim=3, alpha=1.5, terms=terms)
        g = perturbation_from_spec(spec, 0.05).sample(rng.uniform(0.0, 1.0, 50))
        defect = np.max(np.abs(g + np.conj(np.swapaxes(g, -1, -2))))
        assert defect <= 1e-15 * np.max(np.abs(g))

    def test_rejects_zero_beta(self):
        with pytest.raises(ContractViolationError, match="beta"):
            PerturbationTerm(j=0, k=1, beta=0.0, v=lambda t: t, h=lambda t: t,
                             v_sup=1.0, dh_sup=1.0)

    def test_rejects_bad_indices(self):
        with pytest.raises(ContractViolationError):
            PerturbationTerm(j=1, k=1, beta=1.0, v=lambda t: t, h=lambda t: t,
                             v_sup=1.0, dh_sup=1.0)
