import numpy as np
import pytest

from volterra_mv import (
    BuiltinLinearMeanField,
    CoefficientSet,
    EmpiricalMeasure,
    default_sampler,
    lions_fd_check,
    lipschitz_probe,
)


class TestBuiltin:
    def test_linear_form(self):
        coeffs = BuiltinLinearMeanField(a=2.0, b=3.0, sigma0=0.5).coefficients()
        mu = EmpiricalMeasure(points=np.array([[1.0], [3.0]]))
        x = np.array([[4.0]])
        assert coeffs.drift(0.0, x, mu)[0, 0] == pytest.approx(2.0 * 4.0 + 3.0 * 2.0)
        assert coeffs.diffusion(0.0, x, mu)[0, 0, 0] == 0.5
        assert coeffs.drift_gradient(0.0, x, mu)[0, 0, 0] == 2.0
        assert coeffs.drift_measure_derivative(0.0, x[0], mu, x)[0, 0, 0] == 3.0

    def test_affine_diffusion(self):
        coeffs = BuiltinLinearMeanField(a=0.0, b=0.0, sigma0=1.0, sigma1=0.5).coefficients()
        mu = EmpiricalMeasure.dirac([0.0])
        x = np.array([[2.0]])
        assert coeffs.diffusion(0.0, x, mu)[0, 0, 0] == pytest.approx(1.0 + 0.5 * 2.0)

    def test_multidimensional(self):
        a = np.array([[0.0, 1.0], [-1.0, 0.0]])
        coeffs = BuiltinLinearMeanField(a=a, b=0.0, sigma0=np.eye(2), d=2, m=2).coefficients()
        mu = EmpiricalMeasure.dirac([0.0, 0.0])
        x = np.array([[1.0, 2.0]])
        np.testing.assert_allclose(coeffs.drift(0.0, x, mu)[0], a @ x[0])


class TestLipschitzProbe:
    def test_constant_coefficients(self):
        coeffs = BuiltinLinearMeanField(a=0.0, b=0.0, sigma0=1.0).coefficients()
        rep = lipschitz_probe(coeffs, default_sampler(), n_samples=12, seed=0)
        assert rep.l1_hat == pytest.approx(0.0, abs=1e-12)
        assert not rep.falsified

    def test_pure_state_feedback_ratio(self):
        coeffs = BuiltinLinearMeanField(a=2.0, b=0.0, sigma0=0.0).coefficients()
        rep = lipschitz_probe(coeffs, default_sampler(), n_samples=40, seed=1)
        assert rep.l1_hat <= 2.0 + 1e-9
        assert rep.l1_hat >= 1.5  # most pairs differ in measure too, ratio below 2

    def test_never_falsifies_builtin_constants(self):
        for seed, n in ((0, 10), (1, 25), (2, 60)):
            coeffs = BuiltinLinearMeanField(a=1.5, b=0.7, sigma0=1.0).coefficients()
            rep = lipschitz_probe(coeffs, default_sampler(), n_samples=n, seed=seed)
            assert not rep.falsified

    def test_superlinear_drift_falsified(self):
        def b(t, x, mu):
            return x**2

        def sigma(t, x, mu):
            return np.zeros((*x.shape, 1))

        coeffs = CoefficientSet(b=b, sigma=sigma, d=1, m=1, constants={"L1": 19.0})
        rep = lipschitz_probe(coeffs, default_sampler(box=10.0), n_samples=60, seed=3)
        assert "L1" in rep.falsified

    def test_sample_count_validated(self):
        coeffs = BuiltinLinearMeanField().coefficients()
        with pytest.raises(ValueError):
            lipschitz_probe(coeffs, default_sampler(), n_samples=1)


class TestMeasureDerivativeCheck:
    def test_builtin_exact_for_constant_direction(self):
        coeffs = BuiltinLinearMeanField(a=0.3, b=1.7, sigma0=1.0).coefficients()
        rng = np.random.default_rng(2)
        mu = EmpiricalMeasure(points=rng.normal(size=(50, 1)))
        rep = lions_fd_check(
            coeffs, 0.0, np.array([0.4]), mu,
            direction=lambda pts: np.ones_like(pts),
            eps_list=[1e-1, 1e-2, 1e-3],
        )
        assert rep.passed
        assert rep.discrepancies.max() <= 1e-10

    def test_builtin_exact_large_support(self):
        coeffs = BuiltinLinearMeanField(a=0.0, b=0.9, sigma0=1.0).coefficients()
        rng = np.random.default_rng(4)
        mu = EmpiricalMeasure(points=rng.normal(size=(1000, 1)))
        rep = lions_fd_check(
            coeffs, 0.0, np.array([0.0]), mu,
            direction=lambda pts: np.sin(pts),
            eps_list=[1e-1, 1e-2, 1e-3, 1e-4],
        )
        assert rep.passed

    def test_squared_mean_drift(self):
        # b(mu) = mean(mu)^2 at delta_2 along the constant direction:
        # difference quotient (2 + eps)^2 - 4 over eps -> 4, pairing 2*mean = 4
        def b(t, x, mu):
            mval = mu.mean()[0]
            return np.full_like(x, mval * mval)

        def sigma(t, x, mu):
            return np.zeros((*x.shape, 1))

        def lions(t, x, mu, y):
            y = np.asarray(y)
            return np.full((*y.shape[:-1], 1, 1), 2.0 * mu.mean()[0])

        coeffs = CoefficientSet(b=b, sigma=sigma, lions_b=lions, d=1, m=1)
        mu = EmpiricalMeasure.dirac([2.0])
        rep = lions_fd_check(
            coeffs, 0.0, np.array([0.0]), mu,
            direction=lambda pts: np.ones_like(pts),
            eps_list=[1e-1, 1e-2, 1e-3, 1e-4],
        )
        assert rep.passed
        # the quotient is 4 + eps, so the discrepancy is exactly eps
        np.testing.assert_allclose(rep.discrepancies, rep.eps_values, rtol=1e-6)

    def test_measure_independent_drift(self):
        coeffs = BuiltinLinearMeanField(a=1.0, b=0.0, sigma0=1.0).coefficients()
        mu = EmpiricalMeasure(points=np.array([[1.0], [2.0]]))
        rep = lions_fd_check(
            coeffs, 0.0, np.array([0.5]), mu,
            direction=lambda pts: pts,
            eps_list=[1e-2, 1e-3],
        )
        assert rep.passed
        assert rep.discrepancies.max() == 0.0

    def test_eps_list_validation(self):
        coeffs = BuiltinLinearMeanField(b=1.0).coefficients()
        mu = EmpiricalMeasure.dirac([0.0])
        with pytest.raises(ValueError):
            lions_fd_check(coeffs, 0.0, np.array([0.0]), mu,
                           direction=lambda p: p, eps_list=[1e-3, 1e-2])
