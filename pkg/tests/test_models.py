import math

import numpy as np
import pytest
from scipy import stats

from tdofprior.errors import DomainError
from tdofprior.mathcore import SpdMatrix
from tdofprior.models import (
    CopulaModel,
    DofSupport,
    MarginSpec,
    MvtParams,
    corr_matrix,
    log_beta_rho,
    log_copula_density,
    log_half_cauchy,
    log_prior_nuisance_copula,
    log_prior_nuisance_mvt,
    loglik_copula_full,
    loglik_mvt,
    logpdf_mvnormal,
    logpdf_mvt,
    sample_copula_observations,
    sample_mvt,
    sample_tcopula,
)

SUPPORT = DofSupport(30)


def mvt(mu, sigma, nu, support=SUPPORT):
    return MvtParams(np.asarray(mu, dtype=float), SpdMatrix(np.asarray(sigma, dtype=float)), nu, support)


def bivariate_copula(rho, nu, margins=None, support=SUPPORT):
    margins = margins or (MarginSpec(0.0, 1.0, 3), MarginSpec(0.0, 1.0, 3))
    return CopulaModel(nu=nu, margins=margins, rho=rho, support=support)


class TestDofSupport:
    def test_validation(self):
        with pytest.raises(DomainError):
            DofSupport(2)
        s = DofSupport(30)
        assert list(s.values())[:3] == [1, 2, 3]
        assert s.is_normal(30) and not s.is_normal(29)
        with pytest.raises(DomainError):
            s.validate(31)


class TestLogpdfMvt:
    def test_cauchy_mode(self):
        p = mvt([0.0], [[1.0]], 1)
        assert logpdf_mvt(np.array([0.0]), p) == pytest.approx(math.log(1.0 / math.pi), rel=1e-12)

    @pytest.mark.parametrize("nu", [1, 3, 17, 29])
    def test_bivariate_center_independent_of_dof(self, nu):
        p = mvt([0.5, -0.2], np.eye(2), nu)
        value = logpdf_mvt(np.array([0.5, -0.2]), p)
        assert value == pytest.approx(math.log(1.0 / (2.0 * math.pi)), rel=1e-12)

    def test_integrates_to_one_on_box(self):
        # Simpson grid over a large box; tail mass outside is ~1e-4
        p = mvt([0.0, 0.0], np.eye(2), 3)
        grid = np.linspace(-40.0, 40.0, 1601)
        gx, gy = np.meshgrid(grid, grid, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        dens = np.exp(logpdf_mvt(pts, p)).reshape(gx.shape)
        from scipy.integrate import simpson

        total = simpson(simpson(dens, x=grid, axis=1), x=grid)
        assert total == pytest.approx(1.0, abs=5e-3)

    def test_normal_limit_agreement(self):
        support = DofSupport(5001)
        sigma = np.array([[1.3, 0.4], [0.4, 0.9]])
        p = mvt([0.1, -0.3], sigma, 5000, support)
        rng = np.random.default_rng(0)
        x = rng.multivariate_normal([0.1, -0.3], sigma, size=50)
        t_vals = logpdf_mvt(x, p)
        n_vals = logpdf_mvnormal(x, np.array([0.1, -0.3]), SpdMatrix(sigma))
        assert np.max(np.abs(t_vals - n_vals)) < 1e-2

    def test_nu_max_routes_to_normal(self):
        p = mvt([0.0, 0.0], np.eye(2), 30)
        x = np.array([0.7, -1.1])
        assert logpdf_mvt(x, p) == logpdf_mvnormal(x, np.zeros(2), SpdMatrix(np.eye(2)))

    def test_dimension_mismatch(self):
        p = mvt([0.0, 0.0], np.eye(2), 3)
        with pytest.raises(DomainError):
            logpdf_mvt(np.array([1.0, 2.0, 3.0]), p)

    def test_affine_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = rng.standard_normal((2, 2))
            sigma = a @ a.T + 0.5 * np.eye(2)
            mu = rng.standard_normal(2)
            p = mvt(mu, sigma, 6)
            std = mvt(np.zeros(2), np.eye(2), 6)
            x = rng.standard_normal(2) * 2.0
            s = SpdMatrix(sigma)
            z = s.solve_half(x - mu)
            lhs = logpdf_mvt(x, p)
            rhs = logpdf_mvt(z, std) - 0.5 * s.logdet
            assert lhs == pytest.approx(rhs, abs=1e-10)


class TestLogpdfMvnormal:
    def test_univariate_standard(self):
        v = logpdf_mvnormal(np.array([0.0]), np.array([0.0]), SpdMatrix(np.eye(1)))
        assert v == pytest.approx(math.log(1.0 / math.sqrt(2.0 * math.pi)), rel=1e-12)

    def test_bivariate_center(self):
        v = logpdf_mvnormal(np.array([1.0, 2.0]), np.array([1.0, 2.0]), SpdMatrix(np.eye(2)))
        assert v == pytest.approx(math.log(1.0 / (2.0 * math.pi)), rel=1e-12)


class TestCopulaDensity:
    def test_center_value_cauchy(self):
        c = bivariate_copula(0.0, 1)
        v = log_copula_density(np.array([0.5, 0.5]), c)
        assert v == pytest.approx(math.log(math.pi / 2.0), rel=1e-10)

    def test_gaussian_independence_exactly_zero(self):
        c = bivariate_copula(0.0, 30)
        rng = np.random.default_rng(1)
        u = rng.uniform(0.02, 0.98, size=(50, 2))
        assert np.all(log_copula_density(u, c) == 0.0)

    def test_integrates_to_one_mc(self):
        c = bivariate_copula(0.5, 3)
        rng = np.random.default_rng(7)
        u = rng.uniform(1e-12, 1.0, size=(1_000_000, 2))
        vals = np.exp(log_copula_density(u, c))
        mean = vals.mean()
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(mean - 1.0) <= 3.0 * se

    def test_permutation_symmetry(self):
        c = bivariate_copula(0.37, 5)
        u = np.array([[0.2, 0.9], [0.65, 0.05]])
        direct = log_copula_density(u, c)
        swapped = log_copula_density(u[:, ::-1].copy(), c)
        assert np.allclose(direct, swapped, atol=1e-12)

    def test_boundary_rejected(self):
        c = bivariate_copula(0.0, 3)
        with pytest.raises(DomainError):
            log_copula_density(np.array([0.0, 0.5]), c)
        with pytest.raises(DomainError):
            log_copula_density(np.array([0.5, 1.0]), c)


class TestLoglik:
    def test_single_row_at_center(self):
        p = mvt([0.0, 0.0], np.eye(2), 4)
        v = loglik_mvt(np.zeros((1, 2)), p)
        assert v == pytest.approx(math.log(1.0 / (2.0 * math.pi)), rel=1e-12)

    def test_additivity_and_exchangeability(self):
        p = mvt([0.0, 0.0], np.eye(2), 4)
        row = np.array([[0.3, -0.4]])
        two = np.vstack([row, row])
        assert loglik_mvt(two, p) == pytest.approx(2.0 * loglik_mvt(row, p), rel=1e-12)
        rng = np.random.default_rng(0)
        data = rng.standard_normal((20, 2))
        shuffled = data[rng.permutation(20)]
        assert loglik_mvt(data, p) == pytest.approx(loglik_mvt(shuffled, p), rel=1e-12)

    def test_copula_independence_reduces_to_margins(self):
        margins = (MarginSpec(0.1, 1.3, 4), MarginSpec(-0.2, 0.8, 6))
        c = bivariate_copula(0.0, 30, margins)
        rng = np.random.default_rng(5)
        data = rng.standard_normal((40, 2))
        from tdofprior.mathcore import t_logpdf_std

        expected = 0.0
        for j, m in enumerate(margins):
            r = (data[:, j] - m.mu) / m.sigma
            expected += float(np.sum(t_logpdf_std(r, float(m.nu)))) - len(data) * math.log(m.sigma)
        assert loglik_copula_full(data, c) == pytest.approx(expected, rel=1e-12)

    def test_location_shift_invariance(self):
        margins = (MarginSpec(0.1, 1.3, 4), MarginSpec(-0.2, 0.8, 6))
        c = bivariate_copula(0.4, 5, margins)
        rng = np.random.default_rng(6)
        data = rng.standard_normal((30, 2))
        delta = 2.7
        shifted_margins = (
            MarginSpec(0.1 + delta, 1.3, 4),
            MarginSpec(-0.2, 0.8, 6),
        )
        c_shifted = bivariate_copula(0.4, 5, shifted_margins)
        data_shifted = data.copy()
        data_shifted[:, 0] += delta
        assert loglik_copula_full(data_shifted, c_shifted) == pytest.approx(
            loglik_copula_full(data, c), rel=1e-12
        )

    def test_single_point_against_scalar_pipeline(self):
        # independent scalar route through scipy.stats for one observation
        margins = (MarginSpec(0.05, 1.1, 5), MarginSpec(-0.1, 0.7, 7))
        rho, nu = 0.45, 6
        c = bivariate_copula(rho, nu, margins)
        x = np.array([[0.42, -0.33]])

        u = [stats.t.cdf((x[0, j] - m.mu) / m.sigma, df=m.nu) for j, m in enumerate(margins)]
        y = [stats.t.ppf(v, df=nu) for v in u]
        det = 1.0 - rho**2
        qf = (y[0] ** 2 - 2 * rho * y[0] * y[1] + y[1] ** 2) / det
        joint = (
            math.lgamma((nu + 2) / 2.0)
            - math.lgamma(nu / 2.0)
            - math.log(nu * math.pi)
            - 0.5 * math.log(det)
            - (nu + 2) / 2.0 * math.log1p(qf / nu)
        )
        copula_term = joint - sum(math.log(stats.t.pdf(v, df=nu)) for v in y)
        margin_term = sum(
            math.log(stats.t.pdf((x[0, j] - m.mu) / m.sigma, df=m.nu) / m.sigma)
            for j, m in enumerate(margins)
        )
        assert loglik_copula_full(x, c) == pytest.approx(copula_term + margin_term, rel=1e-9)


class TestSampling:
    def test_mvt_mean_recovery(self):
        sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
        p = mvt([3.0, -1.0], sigma, 10)
        x = sample_mvt(p, 100_000, 11)
        sd = np.sqrt(np.diag(sigma) * 10.0 / 8.0)
        for j, target in enumerate((3.0, -1.0)):
            se = sd[j] / math.sqrt(len(x))
            assert abs(x[:, j].mean() - target) < 4.0 * se

    def test_mvt_covariance_scaling(self):
        sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
        p = mvt([0.0, 0.0], sigma, 10)
        x = sample_mvt(p, 100_000, 12)
        cov = np.cov(x, rowvar=False)
        expected = sigma * 10.0 / 8.0
        assert np.max(np.abs(cov - expected) / expected) < 0.05

    def test_seed_reproducibility(self):
        p = mvt([0.0, 0.0], np.eye(2), 4)
        a = sample_mvt(p, 100, 99)
        b = sample_mvt(p, 100, 99)
        assert np.array_equal(a, b)

    def test_cauchy_median(self):
        p = mvt([2.0], [[1.0]], 1)
        x = sample_mvt(p, 100_000, 13)
        se = math.pi / (2.0 * math.sqrt(len(x)))
        assert abs(np.median(x) - 2.0) < 4.0 * se

    def test_normal_route_at_nu_max(self):
        p = mvt([0.0, 0.0], np.eye(2), 30)
        x = sample_mvt(p, 50_000, 14)
        assert abs(np.var(x[:, 0]) - 1.0) < 0.05

    def test_tcopula_margins_uniform(self):
        u = sample_tcopula(0.5, 4, 10_000, 21)
        for j in range(2):
            assert stats.kstest(u[:, j], "uniform").pvalue > 0.01

    def test_tcopula_kendall_tau(self):
        u = sample_tcopula(0.69, 4, 100_000, 22)
        tau = stats.kendalltau(u[:, 0], u[:, 1]).statistic
        assert abs(tau - 0.487) < 0.02

    def test_tcopula_deterministic(self):
        assert np.array_equal(sample_tcopula(0.3, 5, 50, 7), sample_tcopula(0.3, 5, 50, 7))

    def test_copula_observation_generation(self):
        c = bivariate_copula(0.5, 5, (MarginSpec(1.0, 2.0, 3), MarginSpec(0.0, 1.0, 3)))
        x = sample_copula_observations(c, 50_000, 31)
        assert abs(np.median(x[:, 0]) - 1.0) < 0.05
        assert abs(np.median(x[:, 1])) < 0.03


class TestNuisancePriors:
    def test_identity_scale(self):
        assert log_prior_nuisance_mvt(SpdMatrix(np.eye(2))) == 0.0

    def test_scaled_identity(self):
        assert log_prior_nuisance_mvt(SpdMatrix(4.0 * np.eye(2))) == pytest.approx(
            -1.5 * math.log(16.0), rel=1e-12
        )

    def test_determinant_homogeneity(self):
        sigma = np.array([[2.0, 0.3], [0.3, 1.5]])
        base = log_prior_nuisance_mvt(SpdMatrix(sigma))
        scaled = log_prior_nuisance_mvt(SpdMatrix(3.0 * sigma))
        assert scaled - base == pytest.approx(-1.5 * 2.0 * math.log(3.0), rel=1e-12)

    def test_beta_rho_at_zero(self):
        # Beta(1/2,1/2) density at 1/2 is 2/pi; the rho parameterization keeps
        # the constant 1/2 Jacobian
        assert log_beta_rho(0.0) == pytest.approx(math.log(2.0 / math.pi) + math.log(0.5), rel=1e-12)

    def test_rho_symmetry(self):
        margins = (MarginSpec(0.0, 1.0, 3), MarginSpec(0.0, 1.0, 3))
        for rho in (0.3, 0.71):
            plus = log_prior_nuisance_copula(bivariate_copula(rho, 5, margins))
            minus = log_prior_nuisance_copula(bivariate_copula(-rho, 5, margins))
            assert plus == pytest.approx(minus, rel=1e-12)

    def test_scale_tail(self):
        values = [
            log_prior_nuisance_copula(
                bivariate_copula(0.0, 5, (MarginSpec(0.0, s, 3), MarginSpec(0.0, 1.0, 3)))
            )
            for s in (1.0, 10.0, 1e4, 1e8)
        ]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < values[0] - 30.0

    def test_half_cauchy(self):
        assert log_half_cauchy(-1.0) == -math.inf
        assert log_half_cauchy(1.0) == pytest.approx(math.log(2.0 / math.pi) - math.log(2.0), rel=1e-12)


class TestModelValidation:
    def test_margin_scale_positive(self):
        with pytest.raises(DomainError):
            MarginSpec(0.0, 0.0, 3)

    def test_rho_bounds(self):
        with pytest.raises(DomainError):
            bivariate_copula(1.0, 3)

    def test_corr_needs_unit_diagonal(self):
        bad = SpdMatrix(np.array([[1.2, 0.1], [0.1, 1.0]]))
        with pytest.raises(DomainError):
            CopulaModel(nu=3, margins=(MarginSpec(0, 1, 3), MarginSpec(0, 1, 3)), corr=bad)

    def test_exactly_one_parameterization(self):
        with pytest.raises(DomainError):
            CopulaModel(nu=3, margins=(MarginSpec(0, 1, 3), MarginSpec(0, 1, 3)))

    def test_corr_matrix_helper(self):
        assert np.array_equal(corr_matrix(0.5), np.array([[1.0, 0.5], [0.5, 1.0]]))

    def test_mu_dimension(self):
        with pytest.raises(DomainError):
            MvtParams(np.zeros(3), SpdMatrix(np.eye(2)), 3, SUPPORT)
