import numpy as np
import pytest

from bussgang import mimo, nonlinearity as nl, scalar
from bussgang.errors import DomainMismatch, JointCovarianceNotPSD, ValidationError
from bussgang.sampling import RandomStream, SignalSource

# exact C_eta for the third-order map under unit-power inputs with
# correlation 0.99, from the Gaussian moment (permanent) expansion
THIRD_ORDER_ETA_099 = np.array([[2.0, 1.940598], [1.940598, 2.0]])
SQRT_2_OVER_PI = 0.7978845608028654


class TestElementwiseDistortion:
    def test_heterogeneous_branches(self):
        d = mimo.ElementwiseDistortion((nl.third_order(), nl.identity()))
        x = np.array([[1 + 1j, 2.0 + 0j]])
        np.testing.assert_allclose(d(x), [[2 + 2j, 2.0]])

    def test_uniform_fast_path_matches_scalar(self):
        qs = (nl.uniform_quantizer(3, step=0.3), nl.uniform_quantizer(3, step=0.7))
        d = mimo.ElementwiseDistortion(qs)
        x = np.random.default_rng(0).standard_normal((500, 2)) @ [[1, 1j], [0.5, 1]]
        expected = np.column_stack([nl.apply(q, x[:, m]) for m, q in enumerate(qs)])
        np.testing.assert_array_equal(d(x), expected)

    def test_rejects_real_branch(self):
        with pytest.raises(DomainMismatch):
            mimo.ElementwiseDistortion((nl.sign(),))

    def test_branch_count_checked(self):
        with pytest.raises(ValueError):
            mimo.gain_matrix(mimo.ElementwiseDistortion.repeat(nl.one_bit(), 3), np.eye(2), RandomStream(), 20_000)


class TestGainMatrix:
    def test_matches_scalar_at_one_dimension(self):
        U = nl.soft_clipper(0.9)
        s = scalar.gain_correlation(U, 1.5, RandomStream(4), 30_000)
        G = mimo.gain_matrix(U, [[1.5]], RandomStream(4), 30_000)
        assert G.B[0, 0] == s.value
        assert G.std_error[0, 0] == s.std_error

    def test_diagonal_matches_elementwise_gains(self, correlated_cx):
        U = nl.one_bit()
        G = mimo.gain_matrix(U, correlated_cx, RandomStream(6), 200_000)
        d = mimo.elementwise_gain_diag(U, correlated_cx, RandomStream(7), 200_000)
        exact = 2 / np.sqrt(np.pi * np.real(np.diag(correlated_cx)))
        assert np.all(np.abs(np.diag(G.B) - exact) < 4 * np.diag(G.std_error))
        assert np.all(np.abs(d - exact) < 4 * np.diag(G.std_error))

    def test_strongly_correlated_pair_stays_diagonal(self):
        C = np.array([[1.0, 0.9], [0.9, 1.0]])
        G = mimo.gain_matrix(nl.one_bit(), C, RandomStream(8), 200_000)
        d = mimo.elementwise_gain_diag(nl.one_bit(), C, RandomStream(8), 200_000)
        band = 4 * np.hypot(G.std_error, np.diag(np.diag(G.std_error)))
        assert np.all(np.abs(G.B - np.diag(d)) < band)

    def test_rank_deficient_embeds_scalar_result(self):
        v = np.array([1, 1j]) / np.sqrt(2)
        C = 2 * np.outer(v, v.conj())
        G = mimo.gain_matrix(nl.one_bit(), C, RandomStream(2), 200_000)
        assert G.used_pseudo_inverse
        # x = v s with s ~ CN(0, 2): the 1-D regression of z on s
        np.testing.assert_allclose(G.B @ v, [SQRT_2_OVER_PI, 1j * SQRT_2_OVER_PI], atol=4e-3)

    def test_too_few_samples(self):
        with pytest.raises(ValidationError):
            mimo.gain_matrix(nl.one_bit(), np.eye(2), RandomStream(), 100)


class TestDistortionCorrelation:
    def test_third_order_exact(self):
        C = np.array([[1.0, 0.99], [0.99, 1.0]])
        d = mimo.distortion_correlation(nl.third_order(), C, RandomStream(42), 400_000)
        assert np.all(np.abs(d.C_eta - THIRD_ORDER_ETA_099) < 4 * d.C_eta_std_error)
        rho = d.correlation_coefficients()
        assert abs(rho[0, 1]) == pytest.approx(0.9703, abs=0.02)

    def test_independent_inputs_give_diagonal(self):
        d = mimo.distortion_correlation(nl.one_bit(), np.eye(3), RandomStream(1), 100_000)
        off = ~np.eye(3, dtype=bool)
        assert np.all(np.abs(d.C_eta[off]) < 4 * d.C_eta_std_error[off])
        assert d.diagnostics.psd_margin > -4 * d.diagnostics.eps_mc

    def test_shared_sample_matches_single(self, correlated_cx):
        dists = [nl.uniform_quantizer(b, step=0.3) for b in (2, 4)]
        many = mimo.distortion_correlations(dists, correlated_cx, RandomStream(3), 20_000)
        one = mimo.distortion_correlation(dists[1], correlated_cx, RandomStream(3), 20_000)
        np.testing.assert_allclose(many[1].C_eta, one.C_eta, rtol=1e-12, atol=1e-15)

    def test_lean_mode_skips_extras(self, correlated_cx):
        (d,) = mimo.distortion_correlations([nl.one_bit()], correlated_cx, RandomStream(3), 20_000, lean=True)
        assert np.all(np.isfinite(d.C_eta)) and np.isnan(d.diagnostics.orthogonality_std_error)


class TestGeneralDecomposition:
    def test_qpsk_third_order_is_linear(self):
        # |x|^2 is constant on QPSK, so U(x) = C x exactly
        d = mimo.decompose_general(nl.third_order(), SignalSource("qpsk", power=2.0), RandomStream(), 20_000)
        assert d.B[0, 0] == pytest.approx(2.0, abs=1e-12)
        assert abs(d.C_eta[0, 0]) < 1e-10

    def test_gaussian_source_agrees_with_gaussian_path(self, correlated_cx):
        src = SignalSource("complex_gaussian_vector", C_x=correlated_cx)
        g = mimo.decompose_general(nl.one_bit(), src, RandomStream(9), 100_000)
        h = mimo.distortion_correlation(nl.one_bit(), correlated_cx, RandomStream(9), 100_000)
        assert np.all(np.abs(g.B - h.B) < 4 * h.B_std_error)

    def test_callable_with_crosstalk(self):
        mix = np.array([[1.0, 0.3], [0.0, 1.0]])

        def crosstalk(x):
            return nl.apply(nl.one_bit(), x) @ mix.T

        d = mimo.decompose_general(crosstalk, SignalSource("complex_gaussian_vector", C_x=np.eye(2)), RandomStream(), 50_000)
        assert abs(d.B[0, 1] - 0.3 * 2 / np.sqrt(np.pi)) < 4 * d.B_std_error[0, 1]


class TestMimoTheorem:
    def test_random_joint_covariance(self):
        rng = np.random.default_rng(12)
        G = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        K = G @ G.conj().T / 4
        res = mimo.verify_mimo_theorem(nl.one_bit(), K[:2, :2], K[2:, 2:], K[:2, 2:], RandomStream(1), 200_000)
        assert res.within
        assert res.max_dev < 4 * np.max(res.std_error)

    def test_joint_covariance_must_be_psd(self):
        with pytest.raises(JointCovarianceNotPSD):
            mimo.verify_mimo_theorem(nl.one_bit(), np.eye(1), np.eye(1), [[2.0]], RandomStream(), 20_000)
