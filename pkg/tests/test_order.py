import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from xsdr.benchmark import gen_model
from xsdr.order import PermutationWorkspace, estimate_order, lambda_stat, permutation_test
from xsdr.sdr import SdrOptions

SIR = SdrOptions(method="sir", flavor="classical")


class TestLambdaStat:
    def test_full_sum(self):
        assert lambda_stat([3.0, 2.0, 1.0], 0, 10) == 60

    def test_empty_sum(self):
        assert lambda_stat([3.0, 2.0, 1.0], 3, 10) == 0

    def test_example(self):
        assert lambda_stat([3.0, 2.0, 1.0], 1, 10) == 30

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            lambda_stat([1.0, 0.5], 3, 5)

    @given(st.lists(st.floats(1e-6, 10), min_size=1, max_size=8), st.integers(1, 500))
    def test_strictly_decreasing(self, values, n):
        eta = np.sort(values)[::-1]
        stats_ = [lambda_stat(eta, m, n) for m in range(eta.size + 1)]
        assert all(a > b for a, b in zip(stats_, stats_[1:]))


class TestWorkspace:
    def test_split_and_identity_reassembly(self, rng):
        Z = rng.standard_normal((20, 4))
        U, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        w = PermutationWorkspace.split(Z, U, 1)
        assert w.W1.shape == (20, 1) and w.W2.shape == (20, 3)
        np.testing.assert_allclose(w.reassemble(np.arange(20)), Z, atol=1e-12)

    def test_permutation_keeps_leading_block(self, rng):
        Z = rng.standard_normal((15, 3))
        U, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        w = PermutationWorkspace.split(Z, U, 2)
        Zs = w.reassemble(rng.permutation(15))
        np.testing.assert_allclose(Zs @ U[:, :2], w.W1, atol=1e-12)


class TestPermutationTest:
    def test_strong_signal_gives_zero(self, rng):
        X = rng.standard_normal((200, 3))
        step = permutation_test(X, X[:, 0], SIR, 0, B=50, rng=1)
        assert step.pvalue == 0
        assert step.statistic > step.permuted.max()

    def test_pvalue_support(self, rng):
        X = rng.standard_normal((80, 3))
        y = X[:, 0] + rng.standard_normal(80)
        for B in (1, 7, 20):
            step = permutation_test(X, y, SIR, 1, B=B, rng=2)
            assert 0 <= step.pvalue <= 1
            assert step.pvalue * B == pytest.approx(round(step.pvalue * B))
            assert step.permuted.shape == (B,)

    def test_seeded_reproducible(self, rng):
        X, y = gen_model("I", 80, rng=3)
        opts = SdrOptions(method="dr", flavor="pooled", lam=0.1)
        a = permutation_test(X, y, opts, 1, B=20, rng=5)
        b = permutation_test(X, y, opts, 1, B=20, rng=5)
        assert np.array_equal(a.permuted, b.permuted)

    def test_observed_matches_estimator_spectrum(self):
        from xsdr.sdr import fit_sdr

        X, y = gen_model("I", 90, rng=4)
        est = fit_sdr(X, y, method="save", flavor="classical", d=2)
        step = permutation_test(X, y, SdrOptions(method="save", flavor="classical", d=2), 2, B=3, rng=0)
        assert step.statistic == pytest.approx(lambda_stat(est.eigenvalues, 2, 90), rel=1e-12)

    def test_bad_arguments(self, rng):
        X = rng.standard_normal((30, 3))
        with pytest.raises(ValueError):
            permutation_test(X, X[:, 0], SIR, 3, B=5)
        with pytest.raises(ValueError):
            permutation_test(X, X[:, 0], SIR, 0, B=0)

    def test_null_pvalues_uniform(self):
        pvals = []
        for rep in range(200):
            rng = np.random.default_rng([99, rep])
            X = rng.standard_normal((100, 4))
            y = rng.permutation(X[:, 0] + 0.5 * rng.standard_normal(100))
            pvals.append(permutation_test(X, y, SIR, 0, B=99, rng=rng).pvalue)
        assert stats.kstest(pvals, "uniform").statistic < 0.15

    def test_refit_option_runs(self):
        X, y = gen_model("V", 60, rng=5)
        opts = SdrOptions(method="sir", flavor="pooled", lam=0.1, levels=(0.25, 0.5, 0.75))
        step = permutation_test(X, y, opts, 1, B=3, rng=0, refit_expectiles=True)
        assert 0 <= step.pvalue <= 1


class TestEstimateOrder:
    def test_noiseless_single_index(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng([7, seed])
            X = rng.standard_normal((500, 4))
            hits += estimate_order(X, X[:, 0], SIR, alpha=0.1, B=200, rng=rng).d_hat == 1
        assert hits >= 90

    def test_smallest_accepted(self, rng):
        X = rng.standard_normal((150, 3))
        y = X[:, 0] + 0.5 * X[:, 1] ** 2
        res = estimate_order(X, y, SdrOptions(method="dr", flavor="classical"), B=50, rng=3)
        rejected = [s.rejected for s in res.steps]
        assert rejected[:-1] == [True] * (len(rejected) - 1)
        if res.d_hat < 3:
            assert not rejected[-1] and res.steps[-1].m == res.d_hat
        assert all(s.rejected == (s.pvalue < 0.1) for s in res.steps)
        assert res.to_dict()["d_hat"] == res.d_hat

    def test_all_rejected_gives_p(self, monkeypatch, rng):
        import xsdr.order as order
        from dataclasses import replace

        real = order.permutation_test

        def always_reject(*args, **kwargs):
            return replace(real(*args, **kwargs), pvalue=0.0)

        monkeypatch.setattr(order, "permutation_test", always_reject)
        X = rng.standard_normal((40, 3))
        res = order.estimate_order(X, X[:, 0], SIR, B=2, rng=0)
        assert res.d_hat == 3 and len(res.steps) == 3

    def test_alpha_range(self, rng):
        with pytest.raises(ValueError):
            estimate_order(rng.standard_normal((20, 2)), np.arange(20.0), SIR, alpha=1.5)

    def test_model_v_underestimates_with_refit(self):
        counts = np.zeros(7, dtype=int)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for rep in range(10):
                data_ss, test_ss = np.random.SeedSequence([7, rep]).spawn(2)
                X, y = gen_model("V", 300, rng=np.random.default_rng(data_ss))
                res = estimate_order(X, y, SdrOptions(method="dr", flavor="pooled"), B=50,
                                     rng=np.random.default_rng(test_ss), refit_expectiles=True)
                counts[res.d_hat] += 1
        assert counts.argmax() == 1
        assert counts[0] >= 2
