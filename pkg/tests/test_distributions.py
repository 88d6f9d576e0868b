import numpy as np
import pytest
from scipy import stats

from evolvolin import (
    LowRankUniform,
    PointMass,
    Rademacher,
    SampleBatch,
    UniformBox,
    check_niceness,
    make_incoherent,
    make_smooth,
    sample,
)
from evolvolin.distributions import NicenessError, make_rng

BASES = [
    PointMass(),
    UniformBox(0.5),
    Rademacher(0.6),
    LowRankUniform.random(6, 2, 0.4, make_rng(0)),
]


class TestMakeSmooth:
    def test_pure_noise(self):
        h = make_smooth(PointMass(), 1.0, 9)
        assert np.array_equal(h.covariance.sigma, np.eye(9))
        assert h.g_bound == pytest.approx(np.sqrt(27.0), rel=1e-8)

    def test_additive_variance(self):
        h = make_smooth(UniformBox(0.5), 0.5, 4)
        assert np.allclose(h.covariance.diagonal, 0.75)

    def test_rejects_excess_variance(self):
        with pytest.raises(NicenessError):
            make_smooth(UniformBox(0.9), 0.5, 3)

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ValueError):
            make_smooth(PointMass(), 0.0, 3)

    @pytest.mark.parametrize("base", BASES, ids=lambda b: type(b).__name__)
    def test_covariance_monte_carlo(self, base):
        h = make_smooth(base, 0.5, 6)
        x = sample(h, 1_000_000, 5).matrix
        emp = x.T @ x / x.shape[0]
        assert np.max(np.abs(emp - h.covariance.sigma)) < 5e-3

    @pytest.mark.parametrize("base", BASES, ids=lambda b: type(b).__name__)
    def test_mean_zero(self, base):
        x = sample(make_smooth(base, 0.5, 6), 1_000_000, 6).matrix
        assert np.max(np.abs(x.mean(axis=0))) < 5e-3

    def test_noise_marginal_is_uniform(self):
        h = make_smooth(PointMass(), 0.7, 1)
        x = sample(h, 20_000, 9).matrix[:, 0]
        a = np.sqrt(3.0) * 0.7
        assert stats.kstest(x, stats.uniform(-a, 2 * a).cdf).pvalue > 1e-3


class TestMakeIncoherent:
    def test_diagonal_when_rho_zero(self):
        h = make_incoherent(0.2, 0.5, 5, rho=0.0)
        assert np.array_equal(h.covariance.sigma, np.eye(5))
        assert h.covariance.coherence() == 0.0

    def test_equicorrelated_entries(self):
        h = make_incoherent(0.1, 0.5, 3, "equicorrelated", rho=0.1)
        off = h.covariance.sigma[~np.eye(3, dtype=bool)]
        assert np.allclose(off, 0.1)

    def test_rho_above_mu_rejected(self):
        with pytest.raises(ValueError):
            make_incoherent(0.1, 0.5, 3, rho=0.2)

    def test_variance_floor(self):
        with pytest.raises(NicenessError):
            make_incoherent(0.1, 0.9, 3, variance=0.5)

    @pytest.mark.parametrize("structure", ["equicorrelated", "banded"])
    def test_covariance_monte_carlo(self, structure):
        h = make_incoherent(0.25, 0.5, 8, structure, variance=0.8)
        x = sample(h, 1_000_000, 2).matrix
        emp = x.T @ x / x.shape[0]
        assert np.max(np.abs(emp - h.covariance.sigma)) < 5e-3


class TestSample:
    def test_deterministic(self):
        h = make_smooth(UniformBox(0.3), 0.5, 5)
        assert sample(h, 50, (1, 2, 3)).to_csv() == sample(h, 50, (1, 2, 3)).to_csv()
        assert sample(h, 50, (1, 2, 3)).to_csv() != sample(h, 50, (1, 2, 4)).to_csv()

    def test_vanishing_noise(self):
        x = sample(make_smooth(PointMass(), 1e-6, 4), 100, 0).matrix
        assert np.max(np.abs(x)) < 2e-6

    def test_within_support(self):
        h = make_smooth(Rademacher(0.7), 0.7, 10)
        x = sample(h, 10_000, 1).matrix
        assert np.sqrt((x ** 2).sum(axis=1)).max() <= h.g_bound

    def test_csv_header(self):
        text = sample(make_smooth(PointMass(), 0.5, 3), 2, 0).to_csv()
        lines = text.split("\n")
        assert lines[0] == "x1,x2,x3" and len(lines) == 4 and "\r" not in text

    def test_count_validated(self):
        with pytest.raises(ValueError):
            sample(make_smooth(PointMass(), 0.5, 3), 0, 0)


class TestNiceness:
    @pytest.mark.parametrize("handle", [
        make_smooth(UniformBox(0.5), 0.5, 5),
        make_incoherent(0.125, 0.5, 5, variance=0.9),
    ], ids=["smooth", "incoherent"])
    def test_well_formed_passes(self, handle):
        assert check_niceness(handle, sample(handle, 100_000, 3)).passed

    def test_injected_outlier_fails_support(self):
        h = make_smooth(UniformBox(0.5), 0.5, 5)
        x = sample(h, 1000, 3).matrix.copy()
        x[0] *= 10 * h.g_bound
        rep = check_niceness(h, SampleBatch(x))
        assert not rep.support_ok and not rep.passed

    def test_delta_floor_moment(self):
        h = make_smooth(PointMass(), 0.3, 4)
        rep = check_niceness(h, sample(h, 100_000, 8))
        assert 0.085 <= rep.second_moment_min <= rep.second_moment_max <= 0.095
