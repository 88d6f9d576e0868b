import numpy as np
import pytest
from scipy import stats

from evolvolin import SparseVector
from evolvolin.distributions import make_rng
from evolvolin.mutators import Move, bn_mutate_one, bn_neighborhood, opt_neighborhood

N = 20


@pytest.fixture
def w():
    return SparseVector(N, [2, 7, 11], [0.5, -1.0, 2.0])


class TestBNMutator:
    def test_branch_frequencies(self, w):
        neigh = bn_neighborhood(w, (30, 10.0), N, 1_000_000, make_rng(0))
        freq = np.bincount(neigh.kinds, minlength=5) / len(neigh)
        assert abs(freq[Move.SCALING] - 1 / 3) < 0.002
        assert abs(freq[Move.ADJUSTING] - 1 / 3) < 0.002
        assert abs(freq[Move.ADDING] - 1 / 3) < 0.002

    def test_swap_at_capacity(self, w):
        neigh = bn_neighborhood(w, (3, 10.0), N, 3000, make_rng(1))
        third = neigh.kinds == Move.SWAPPING
        assert third.sum() > 800 and not np.any(neigh.kinds == Move.ADDING)
        for j in np.flatnonzero(third)[:200]:
            v = neigh.member(j)
            assert v.sparsity == 3
            assert int(neigh.removed[j]) not in v.support

    def test_adding_below_capacity(self, w):
        neigh = bn_neighborhood(w, (5, 10.0), N, 3000, make_rng(2))
        for j in np.flatnonzero(neigh.kinds == Move.ADDING)[:200]:
            v = neigh.member(j)
            assert v.sparsity == 4 and w.support < v.support
            assert abs(v.get(int(neigh.index[j]))) <= 10.0

    def test_value_distributions(self, w):
        neigh = bn_neighborhood(w, (30, 4.0), N, 60_000, make_rng(3))
        gamma = neigh.gamma[neigh.kinds == Move.SCALING]
        vals = neigh.value[neigh.kinds == Move.ADJUSTING]
        assert stats.kstest(gamma, stats.uniform(-1, 2).cdf).pvalue > 1e-3
        assert stats.kstest(vals, stats.uniform(-4, 8).cdf).pvalue > 1e-3
        idx = neigh.index[neigh.kinds == Move.ADJUSTING]
        assert set(np.unique(idx)) == w.support

    def test_added_index_uniform_outside_support(self, w):
        neigh = bn_neighborhood(w, (30, 4.0), N, 60_000, make_rng(4))
        idx = neigh.index[neigh.kinds == Move.ADDING]
        counts = np.bincount(idx, minlength=N)
        assert counts[list(w.support)].sum() == 0
        outside = np.delete(counts, list(w.support))
        assert stats.chisquare(outside).pvalue > 1e-3

    def test_unit_scaling_is_identity(self, w):
        assert w * 1.0 == w

    def test_singleton_and_reproducible(self, w):
        assert len(bn_neighborhood(w, (30, 4.0), N, 1, make_rng(5))) == 1
        a = bn_neighborhood(w, (30, 4.0), N, 50, make_rng(6)).members
        b = bn_neighborhood(w, (30, 4.0), N, 50, make_rng(6)).members
        assert a == b

    def test_empty_support_noops(self):
        z = SparseVector.zeros(N)
        neigh = bn_neighborhood(z, (30, 4.0), N, 300, make_rng(7))
        for j in range(len(neigh)):
            v = neigh.member(j)
            if neigh.kinds[j] == Move.ADDING:
                assert v.sparsity == 1
            else:
                assert v == z

    def test_mutate_one(self, w):
        prop = bn_mutate_one(w, (30, 4.0), N, make_rng(8))
        assert prop.move in (Move.SCALING, Move.ADJUSTING, Move.ADDING)
        assert isinstance(prop.result, SparseVector)

    def test_m_validated(self, w):
        with pytest.raises(ValueError):
            bn_neighborhood(w, (30, 4.0), N, 0, make_rng(0))


class TestOptMutator:
    def test_lambda_zero_never_adds(self, w):
        for seed in range(50):
            assert opt_neighborhood(w, 5, 4.0, N, 10, 0.0, make_rng(seed)).kind_tag == "non-adding"

    def test_gate_frequency(self, w):
        tags = [opt_neighborhood(w, 5, 4.0, N, 2, 0.3, make_rng(s)).kind_tag
                for s in range(4000)]
        rate = tags.count("adding") / len(tags)
        assert abs(rate - 0.3) < 4 * np.sqrt(0.3 * 0.7 / len(tags))

    def test_full_support_adding_is_identity(self, w):
        neigh = opt_neighborhood(w, 3, 4.0, N, 20, 1.0, make_rng(1))
        assert neigh.kind_tag == "adding"
        assert all(v == w for v in neigh.members)

    def test_non_adding_mix(self, w):
        neigh = opt_neighborhood(w, 5, 4.0, N, 400_000, 0.0, make_rng(2))
        freq = np.bincount(neigh.kinds, minlength=5) / len(neigh)
        assert abs(freq[Move.IDENTICAL] - 0.5) < 0.004
        assert abs(freq[Move.SCALING] - 0.25) < 0.004
        assert abs(freq[Move.ADJUSTING] - 0.25) < 0.004
        assert freq[Move.ADDING] == freq[Move.SWAPPING] == 0

    def test_adding_members(self, w):
        neigh = opt_neighborhood(w, 5, 4.0, N, 100, 1.0, make_rng(3))
        for v in neigh.members:
            assert v.sparsity == 4 and w.support < v.support

    def test_lambda_validated(self, w):
        with pytest.raises(ValueError):
            opt_neighborhood(w, 5, 4.0, N, 10, 1.5, make_rng(0))
