import numpy as np
import pytest

from evolvolin import CovarianceModel, PointMass, ProblemParams, SparseVector, make_incoherent, make_smooth
from evolvolin.core_model import best_projection, expected_loss
from evolvolin.distributions import make_rng
from evolvolin.framework import theory_params_bn
from evolvolin.oracles import (
    GeneratorStarvation,
    _generate,
    monte_carlo_loss,
    omp_reference,
    random_target,
    run_claim_suite,
    verify_claim_apple,
    verify_claim_banana,
    verify_claim_cantaloupe,
    verify_claim_date,
    verify_claim_elderberry,
)


def diag(*d):
    return CovarianceModel(np.diag(d))


class TestMonteCarlo:
    def test_equal_functions(self):
        f = SparseVector(3, [0], [1.0])
        assert monte_carlo_loss(f, f, make_smooth(PointMass(), 1.0, 3), 1000, 0) == (0.0, 0.0)

    def test_unit_variance(self):
        h = make_smooth(PointMass(), 1.0, 3)
        est, se = monte_carlo_loss(SparseVector(3, [0], [1.0]), SparseVector.zeros(3), h,
                                   1_000_000, 1)
        assert abs(est - 1.0) < 3 * se

    def test_agrees_with_exact(self):
        n = 8
        h = make_incoherent(0.2, 0.5, n, variance=0.7)
        rng = make_rng(2)
        f = random_target(rng, n, 3, 0.5, 1.0)
        w = random_target(rng, n, 2, 0.1, 0.8)
        est, se = monte_carlo_loss(f, w, h, 1_000_000, 3)
        assert abs(est - expected_loss(f, w, h.covariance)) < 3 * se


class TestOmp:
    def test_orthogonal_order(self):
        f = SparseVector(4, [0, 1], [3.0, 1.0])
        res = omp_reference(f, CovarianceModel.identity(4), 2)
        assert res.order == [0, 1]

    def test_exact_recovery(self):
        rng = make_rng(0)
        a = rng.standard_normal((6, 6))
        cov = CovarianceModel(a @ a.T + np.eye(6))
        f = SparseVector(6, [1, 4], [1.0, -2.0])
        res = omp_reference(f, cov, 2)
        assert set(res.order) == f.support
        assert np.allclose(res.coefficients.to_dense(), f.to_dense())

    def test_incoherent_random_recovery(self):
        for j in range(200):
            rng = make_rng((5, j))
            k = int(rng.integers(1, 5))
            n = int(rng.integers(k + 1, 30))
            h = make_incoherent(1 / (2 * k), 1.0, n, rho=1 / (2 * k))
            f = random_target(rng, n, k, 0.0, rng.uniform(0.5, 2.0))
            assert set(omp_reference(f, h.covariance, k).order) == f.support


class TestApple:
    def test_exact_cancellation(self):
        cov = CovarianceModel(np.array([[1.0, 0.2], [0.2, 1.0]]))
        f = SparseVector(2, [0, 1], [1.0, 0.5])
        fs = best_projection(f, [0], cov).projection
        w = fs * -2.0
        rep = verify_claim_apple(f, w, [0], cov)
        assert rep.precondition_met and rep.passed
        assert expected_loss(fs, w * -0.5, cov) == pytest.approx(0.0, abs=1e-24)

    def test_zero_everything(self):
        f = SparseVector(2, [1], [1.0])
        rep = verify_claim_apple(f, SparseVector.zeros(2), [0], CovarianceModel.identity(2))
        assert rep.precondition_met and rep.required_decrease == 0.0 and rep.passed

    def test_precondition_guard(self):
        f = SparseVector(2, [0], [1.0])
        rep = verify_claim_apple(f, SparseVector(2, [0], [1.0]), [0], CovarianceModel.identity(2))
        assert not rep.precondition_met and rep.passed is None


class TestBanana:
    def test_at_projection(self):
        f = SparseVector(3, [0, 2], [1.0, 0.5])
        cov = diag(1.0, 1.0, 1.0)
        rep = verify_claim_banana(f, SparseVector(3, [0], [1.0]), [0], cov, 5184, 10, 1.0)
        assert rep.required_decrease == 0.0 and rep.passed

    def test_single_index_exact(self):
        f = SparseVector(3, [0, 2], [1.0, 0.5])
        cov = diag(0.8, 0.8, 0.8)
        w = SparseVector(3, [0], [0.4])
        rep = verify_claim_banana(f, w, [0], cov, 5184, 10, 0.8)
        assert rep.witness["index"] == 0
        rs_sq = expected_loss(best_projection(f, [0], cov).projection, w, cov)
        # the grid contains the exact vertex beta, which removes all of r^S
        assert rep.passed and rep.required_decrease <= rs_sq

    def test_box_check_flags_small_b(self):
        f = SparseVector(2, [0], [1.0])
        rep = verify_claim_banana(f, SparseVector(2, [0], [0.1]), [0], diag(1.0, 1.0),
                                  5184, 0.5, 1.0)
        assert rep.checks["box"] is False and rep.passed is False


class TestCantaloupe:
    def problem(self, n=4, k=1):
        return ProblemParams(n, k, 1.0, 1.0, 0.01, 1.0, 10.0)

    def test_from_zero(self):
        p = self.problem()
        f = SparseVector(4, [0], [1.0])
        rep = verify_claim_cantaloupe(f, SparseVector.zeros(4), [], CovarianceModel.identity(4),
                                      theory_params_bn(p), p)
        assert rep.precondition_met and rep.passed
        assert rep.witness["index"] == 0
        assert rep.checks["adding_bound"]

    def test_precondition_needs_missing_index(self):
        p = self.problem()
        f = SparseVector(4, [0], [1.0])
        rep = verify_claim_cantaloupe(f, f, [0], CovarianceModel.identity(4),
                                      theory_params_bn(p), p)
        assert not rep.precondition_met

    def test_swap_at_full_capacity(self):
        # k = 1, delta = 1, l = u = 1 gives the smallest capacity K = 5184
        p = self.problem(n=5190)
        tp = theory_params_bn(p)
        K = tp.sparsity_cap
        cov = CovarianceModel.identity(p.n)
        f = SparseVector(p.n, [p.n - 1], [1.0])
        S = list(range(K))
        radius = p.l ** 2 * p.delta ** 2 / (4 * tp.cap_k * tp.cap_b)
        vals = make_rng(0).uniform(0.5, 1.0, K)
        w = SparseVector(p.n, S, vals * 0.9 * radius / np.linalg.norm(vals))
        rep = verify_claim_cantaloupe(f, w, S, cov, tp, p)
        assert rep.precondition_met and "removed" in rep.witness
        assert rep.passed and rep.notes["removal_bound"]


class TestDate:
    def test_orthogonal_witness(self):
        cov = diag(1.0, 2.0, 1.0, 1.0)
        f = SparseVector(4, [0, 1], [0.5, 0.6])
        rep = verify_claim_date(f, SparseVector.zeros(4), [], cov, 2, 0.05, 20.0)
        # |f_i| * ||e^i||: 0.5 vs 0.6 * sqrt(2)
        assert rep.witness["index"] == 1 and rep.passed

    def test_guard_small_loss(self):
        f = SparseVector(3, [0], [0.1])
        rep = verify_claim_date(f, SparseVector.zeros(3), [], CovarianceModel.identity(3),
                                1, 0.05, 10.0)
        assert not rep.precondition_met and rep.passed is None

    def test_equicorrelated(self):
        k, n = 3, 12
        h = make_incoherent(1 / (2 * k), 1.0, n, rho=1 / (2 * k))
        f = SparseVector(n, [1, 5, 9], [1.0, -0.8, 0.6])
        rep = verify_claim_date(f, SparseVector.zeros(n), [], h.covariance, k, 0.05, 30.0)
        assert rep.passed and rep.checks["separation"]


class TestElderberry:
    def test_at_projection(self):
        f = SparseVector(3, [0, 1], [1.0, 0.5])
        cov = make_incoherent(0.25, 1.0, 3, rho=0.25).covariance
        fs = best_projection(f, [0], cov).projection
        rep = verify_claim_elderberry(f, fs, [0], cov, 2, 20.0)
        assert rep.required_decrease == pytest.approx(0.0, abs=1e-20) and rep.passed

    def test_scaling_branch(self):
        f = SparseVector(3, [0], [1.0])
        cov = CovarianceModel.identity(3)
        rep = verify_claim_elderberry(f, SparseVector(3, [0], [3.0]), [0], cov, 1, 10.0)
        assert rep.witness["move"] == "scaling" and rep.passed

    def test_coherence_guard(self):
        cov = CovarianceModel(np.array([[1.0, 0.9], [0.9, 1.0]]))
        rep = verify_claim_elderberry(SparseVector(2, [0], [1.0]), SparseVector.zeros(2), [],
                                      cov, 1, 10.0)
        assert not rep.precondition_met


class TestSuites:
    @pytest.mark.parametrize("claim", ["lemma1", "apple", "banana", "cantaloupe", "date",
                                       "elderberry"])
    def test_small_suite_passes(self, claim):
        reps = run_claim_suite(claim, 40, seed=3)
        assert all(r.passed for r in reps)

    def test_suite_deterministic(self):
        a = run_claim_suite("date", 3, seed=1)
        b = run_claim_suite("date", 3, seed=1)
        assert [r.achieved_decrease for r in a] == [r.achieved_decrease for r in b]

    def test_strictness_detects(self):
        reps = run_claim_suite("lemma1", 100, seed=0, strictness=2.0)
        assert any(r.passed is False for r in reps)

    def test_starvation(self):
        with pytest.raises(GeneratorStarvation):
            _generate(lambda rng: None, lambda d: True, make_rng(0))
