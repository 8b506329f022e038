import math

import numpy as np
import pytest
from scipy import integrate, stats

from tdofprior.divergence import (
    KLGrid,
    McEstimate,
    build_kl_grid,
    kl_copula_is,
    kl_copula_mc,
    kl_normal_t,
    kl_t_normal,
    kl_t_t,
)
from tdofprior.errors import DomainError
from tdofprior.mathcore import SpdMatrix
from tdofprior.models import DofSupport, MvtParams, logpdf_mvt, sample_mvt


@pytest.fixture(scope="module")
def grid_d1():
    return build_kl_grid(1)


@pytest.fixture(scope="module")
def grid_d3():
    return build_kl_grid(3)


class TestKlTT:
    def test_published_values(self):
        assert kl_t_t(1, 1, 2) == pytest.approx(1.131e-1, abs=5e-4)
        assert kl_t_t(2, 2, 1) == pytest.approx(7.944e-2, abs=5e-4)

    def test_identical_dofs(self):
        for d in (1, 2, 3):
            assert abs(kl_t_t(d, 5, 5)) < 1e-9

    def test_asymmetry(self):
        forward = kl_t_t(1, 1, 2)
        backward = kl_t_t(1, 2, 1)
        assert forward > 0 and backward > 0
        assert forward == pytest.approx(1.131e-1, abs=5e-4)
        assert backward == pytest.approx(6.210e-2, abs=5e-4)

    def test_neighbor_argmin_sample(self):
        for d in (1, 2):
            for nu in (2, 7, 15, 29):
                assert kl_t_t(d, nu, nu + 1) < kl_t_t(d, nu, nu - 1)

    def test_domain(self):
        with pytest.raises(DomainError):
            kl_t_t(0, 3, 4)
        with pytest.raises(DomainError):
            kl_t_t(2, 0.5, 4)

    def test_mc_oracle_agreement(self):
        # independent route: sample the numerator t and average the log ratio
        support = DofSupport(40)
        p3 = MvtParams(np.zeros(2), SpdMatrix(np.eye(2)), 3, support)
        p4 = MvtParams(np.zeros(2), SpdMatrix(np.eye(2)), 4, support)
        x = sample_mvt(p3, 200_000, 17)
        log_ratio = logpdf_mvt(x, p3) - logpdf_mvt(x, p4)
        se = log_ratio.std(ddof=1) / math.sqrt(len(x))
        assert abs(log_ratio.mean() - kl_t_t(2, 3, 4)) <= 3.0 * se


class TestKlNormalT:
    def test_nonnegative_and_decreasing(self):
        values = [kl_normal_t(2, nup) for nup in (50, 100, 200, 500)]
        assert all(v > 0 for v in values)
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_direct_quadrature_oracle_d1(self):
        # independent formulation: integrate phi(x) log(phi(x)/t(x)) directly
        for nup in (5.0, 29.0):
            const = math.lgamma((nup + 1) / 2) - math.lgamma(nup / 2) - 0.5 * math.log(math.pi * nup)

            def integrand(x):
                log_phi = -0.5 * math.log(2 * math.pi) - 0.5 * x * x
                log_t = const - (nup + 1) / 2 * math.log1p(x * x / nup)
                return math.exp(log_phi) * (log_phi - log_t)

            direct, _ = integrate.quad(integrand, -40, 40, limit=400)
            assert kl_normal_t(1, nup) == pytest.approx(direct, abs=1e-9)

    def test_truncation_point_magnitude(self):
        # The exact Normal-vs-t divergence at the truncation point is of order
        # 1e-3: the Normal and the unit-scale t with 29 dof differ mostly by
        # the t's variance inflation 29/27.  (It is nowhere near the 1e-6
        # scale of the contiguous t-vs-t divergences.)
        value = kl_normal_t(1, 29)
        assert value == pytest.approx(1.7312e-3, rel=1e-3)
        assert value > kl_t_t(1, 29, 28)

    def test_mc_oracle_d2(self):
        rng = np.random.default_rng(23)
        x = rng.standard_normal((400_000, 2))
        support = DofSupport(40)
        p = MvtParams(np.zeros(2), SpdMatrix(np.eye(2)), 7, support)
        log_phi = -math.log(2 * math.pi) - 0.5 * np.sum(x * x, axis=1)
        log_ratio = log_phi - logpdf_mvt(x, p)
        se = log_ratio.std(ddof=1) / math.sqrt(len(x))
        assert abs(log_ratio.mean() - kl_normal_t(2, 7)) <= 3.0 * se


class TestKlTNormal:
    def test_infinite_below_three_dofs(self):
        assert kl_t_normal(1, 2) == math.inf
        assert kl_t_normal(2, 1) == math.inf

    def test_mc_oracle(self):
        support = DofSupport(40)
        p = MvtParams(np.zeros(2), SpdMatrix(np.eye(2)), 29, support)
        x = sample_mvt(p, 400_000, 29)
        log_phi = -math.log(2 * math.pi) - 0.5 * np.sum(x * x, axis=1)
        log_ratio = logpdf_mvt(x, p) - log_phi
        se = log_ratio.std(ddof=1) / math.sqrt(len(x))
        assert abs(log_ratio.mean() - kl_t_normal(2, 29)) <= 3.0 * se


class TestCopulaEstimators:
    def test_identical_dofs_mc(self):
        est = kl_copula_mc(2, 4, 4, 0.3, 10_000, 1)
        assert est.value == 0.0 and est.std_error == 0.0

    def test_identical_dofs_is(self):
        est = kl_copula_is(2, 4, 4, 0.3, 10_000, 1)
        assert est.value == 0.0
        assert est.ess == 10_000.0

    def test_cross_estimator_agreement(self):
        for nu in (1, 2, 3):
            for rho in (0.0, 0.5):
                mc = kl_copula_mc(2, nu, nu + 1, rho, 20_000, 100 + nu)
                imp = kl_copula_is(2, nu, nu + 1, rho, 20_000, 200 + nu)
                combined = math.hypot(mc.std_error, imp.std_error)
                assert abs(mc.value - imp.value) <= 3.0 * combined

    def test_nonnegative_up_to_noise(self):
        for nu, nup, rho in [(1, 2, 0.0), (2, 1, 0.5), (5, 6, 0.25), (3, 30, 0.0)]:
            est = kl_copula_mc(2, nu, nup, rho, 20_000, 7)
            assert est.value >= -3.0 * est.std_error

    def test_deterministic(self):
        a = kl_copula_mc(2, 2, 3, 0.4, 15_000, 77)
        b = kl_copula_mc(2, 2, 3, 0.4, 15_000, 77)
        assert a.value == b.value and a.std_error == b.std_error

    def test_gaussian_denominator_at_nu_max(self):
        support = DofSupport(30)
        # with the support convention, dof 30 is the Gaussian copula, which
        # is much farther from t(5) than t(30) is
        with_support = kl_copula_mc(2, 5, 30, 0.0, 30_000, 5, support=support)
        contiguous = kl_copula_mc(2, 5, 30, 0.0, 30_000, 5, support=None)
        assert with_support.value > contiguous.value

    def test_is_proposal_uses_smaller_dof(self):
        # numerator dof larger than denominator: proposal is the denominator,
        # so weights are nondegenerate and the estimate still matches MC
        imp = kl_copula_is(2, 6, 2, 0.3, 30_000, 11)
        mc = kl_copula_mc(2, 6, 2, 0.3, 30_000, 12)
        assert imp.ess > 0.01 * 30_000
        assert abs(imp.value - mc.value) <= 3.0 * math.hypot(imp.std_error, mc.std_error)

    def test_sample_count_guard(self):
        with pytest.raises(DomainError):
            kl_copula_mc(2, 2, 3, 0.0, 500, 1)
        with pytest.raises(DomainError):
            kl_copula_is(2, 2, 3, 0.0, 999, 1)

    def test_mc_estimate_validation(self):
        with pytest.raises(DomainError):
            McEstimate(0.0, -1.0, 100, 0)
        with pytest.raises(DomainError):
            McEstimate(0.0, 0.0, 1, 0)


class TestLocationScaleInvariance:
    def test_shared_nuisance_cancels(self):
        rng = np.random.default_rng(41)
        a = rng.standard_normal((2, 2))
        sigma = a @ a.T + 0.3 * np.eye(2)
        mu = rng.standard_normal(2)
        support = DofSupport(40)
        p3 = MvtParams(mu, SpdMatrix(sigma), 3, support)
        p4 = MvtParams(mu, SpdMatrix(sigma), 4, support)
        x = sample_mvt(p3, 200_000, 42)
        log_ratio = logpdf_mvt(x, p3) - logpdf_mvt(x, p4)
        se = log_ratio.std(ddof=1) / math.sqrt(len(x))
        assert abs(log_ratio.mean() - kl_t_t(2, 3, 4)) <= 3.0 * se


class TestKlGrid:
    def test_published_row_d3(self, grid_d3):
        assert grid_d3.dkl_prev[4] == pytest.approx(4.307e-3, abs=5e-5)
        assert grid_d3.dkl_next[4] == pytest.approx(2.654e-3, abs=5e-5)

    def test_truncation_row_contiguous_reading(self, grid_d1):
        assert grid_d1.dkl_prev[29] == pytest.approx(2.040e-6, abs=2e-8)

    def test_all_entries_nonnegative(self, grid_d1):
        assert np.all(grid_d1.dkl_prev[1:] >= 0)
        assert np.all(grid_d1.dkl_next[:-1] >= 0)
        assert grid_d1.normal_vs_prev >= 0 and grid_d1.prev_vs_normal >= 0

    def test_monotone_decay(self, grid_d1, grid_d3):
        for grid in (grid_d1, grid_d3):
            assert np.all(np.diff(grid.dkl_prev[1:]) < 0)
            assert np.all(np.diff(grid.dkl_next[:-1]) < 0)

    def test_boundary_cells_are_nan(self, grid_d1):
        assert math.isnan(grid_d1.dkl_prev[0])
        assert math.isnan(grid_d1.dkl_next[29])

    def test_csv_round_trip_bit_exact(self, grid_d1):
        text = grid_d1.to_csv()
        back = KLGrid.from_csv(text)
        assert np.array_equal(grid_d1.dkl_prev, back.dkl_prev, equal_nan=True)
        assert np.array_equal(grid_d1.dkl_next, back.dkl_next, equal_nan=True)
        assert back.normal_vs_prev == grid_d1.normal_vs_prev
        assert back.prev_vs_normal == grid_d1.prev_vs_normal
        assert back.to_csv() == text

    def test_csv_schema_header(self, grid_d1):
        assert grid_d1.to_csv().splitlines()[0] == "d,nu,dkl_prev,dkl_next,method,tol"

    def test_nu_max_guard(self):
        with pytest.raises(DomainError):
            build_kl_grid(1, nu_max=2)


class TestHeavyTailFlag:
    def test_neighbor_divergence_not_flagged(self):
        est = kl_copula_mc(2, 3, 4, 0.2, 20_000, 9)
        assert est.heavy_tail_warning is False
