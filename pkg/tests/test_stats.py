import math

import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, strategies as st

from wristsim import stats
from oracles import brute_wilcoxon_p, permutation_posthoc_p
from wristsim.errors import DegenerateError, DomainError

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestRanks:
    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=30))
    def test_matches_scipy_average(self, xs):
        assert np.allclose(stats.average_ranks(xs), sps.rankdata(xs))

    @given(st.lists(finite, min_size=1, max_size=40))
    def test_rank_sum(self, xs):
        n = len(xs)
        assert math.isclose(stats.average_ranks(xs).sum(), n * (n + 1) / 2)

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            stats.average_ranks([1.0, float("nan")])


class TestCorrelation:
    @given(st.lists(st.tuples(finite, finite), min_size=5, max_size=30))
    def test_pearson_matches_scipy(self, pairs):
        x, y = map(np.array, zip(*pairs))
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            with pytest.raises(DegenerateError):
                stats.pearson(x, y)
            return
        ref = sps.pearsonr(x, y)
        got = stats.pearson(x, y)
        assert got.statistic == pytest.approx(ref.statistic, abs=1e-9)
        assert got.p_value == pytest.approx(ref.pvalue, abs=1e-7)

    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=5, max_size=25))
    def test_spearman_matches_scipy_with_ties(self, pairs):
        x, y = map(np.array, zip(*pairs))
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            return
        ref = sps.spearmanr(x, y)
        got = stats.spearman(x, y)
        assert got.statistic == pytest.approx(ref.statistic, abs=1e-9)
        assert got.p_value == pytest.approx(ref.pvalue, abs=1e-7)

    def test_spearman_closed_form_without_ties(self, rng):
        for _ in range(50):
            n = int(rng.integers(5, 30))
            x, y = rng.permutation(n), rng.permutation(n)
            d = x - y
            expected = 1 - 6 * float(d @ d) / (n * (n * n - 1))
            assert abs(stats.spearman(x, y).statistic - expected) < 1e-12

    def test_exact_spearman_against_scipy_permutation(self):
        x = [3.1, 1.2, 5.5, 4.0, 2.2, 6.1, 0.3]
        y = [2.0, 1.0, 4.5, 5.0, 3.3, 5.9, 1.1]
        ref = sps.spearmanr(x, y)
        exact = stats.spearman(x, y, exact=True)
        perm = sps.permutation_test((y,), lambda a: sps.spearmanr(x, a).statistic,
                                    permutation_type="pairings", n_resamples=np.inf)
        assert exact.statistic == pytest.approx(ref.statistic)
        assert exact.p_value == pytest.approx(perm.pvalue, abs=1e-9)

    def test_exact_spearman_limit(self):
        with pytest.raises(DomainError):
            stats.spearman(range(10), range(10), exact=True)


class TestWilcoxon:
    def test_brute_force_enumeration(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 13))
            d = rng.integers(-6, 7, size=n).astype(float)
            if not np.any(d):
                d[0] = 1.0
            assert stats.wilcoxon_signed_rank(d, np.zeros(n)).p_value == pytest.approx(
                brute_wilcoxon_p(d), abs=1e-12)

    def test_matches_scipy_exact_without_ties(self, rng):
        for _ in range(30):
            n = int(rng.integers(5, 20))
            x, y = rng.normal(size=n), rng.normal(size=n)
            ref = sps.wilcoxon(x, y, method="exact")
            got = stats.wilcoxon_signed_rank(x, y)
            assert got.statistic == pytest.approx(ref.statistic)
            assert got.p_value == pytest.approx(ref.pvalue, abs=1e-12)

    def test_all_same_sign(self):
        assert stats.wilcoxon_signed_rank([1, 2, 3, 4, 5], [0] * 5).p_value == 0.0625

    def test_all_zero(self):
        with pytest.raises(DegenerateError):
            stats.wilcoxon_signed_rank([1, 2], [1, 2])

    def test_large_n_normal(self, rng):
        x = rng.normal(size=40)
        got = stats.wilcoxon_signed_rank(x, np.zeros(40))
        ref = sps.wilcoxon(x, method="approx", correction=False)
        assert got.method == "wilcoxon-normal"
        assert got.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    @given(st.lists(st.integers(-20, 20), min_size=1, max_size=20))
    def test_null_is_symmetric_distribution(self, xs):
        ranks = stats.average_ranks(np.abs(np.array(xs, dtype=float)) + 1)
        values, probs = stats.signed_rank_null(ranks)
        assert probs.sum() == pytest.approx(1.0)
        total = ranks.sum()
        assert np.allclose(np.sort(total - values), values)


class TestFriedman:
    def test_matches_scipy(self, rng):
        for _ in range(30):
            m = rng.integers(0, 5, size=(int(rng.integers(3, 12)), 3)).astype(float)
            if np.all(np.ptp(m, axis=1) == 0):
                continue
            ref = sps.friedmanchisquare(*m.T)
            got = stats.friedman(m)
            assert got.statistic == pytest.approx(ref.statistic, abs=1e-9)
            assert got.p_value == pytest.approx(ref.pvalue, abs=1e-9)

    def test_invariant_under_row_monotone_transform(self, rng):
        for _ in range(20):
            m = rng.normal(size=(8, 4))
            t = np.vstack([np.exp(r) * 3 + i for i, r in enumerate(m)])
            assert stats.friedman(t).statistic == pytest.approx(stats.friedman(m).statistic, abs=1e-12)

    def test_all_rows_tied(self):
        r = stats.friedman(np.ones((4, 3)))
        assert (r.statistic, r.p_value) == (0.0, 1.0)

    def test_shape_checks(self):
        with pytest.raises(DomainError):
            stats.friedman([[1, 2, 3]])
        with pytest.raises(DomainError):
            stats.friedman([[1, 2], [3]])


class TestPosthoc:
    def test_exact_against_permutation(self):
        rng = np.random.default_rng(7)
        m = rng.integers(0, 4, size=(6, 3)).astype(float)
        oracle = permutation_posthoc_p(m, 40_000, rng)
        for res in stats.posthoc_pairwise(m, correction="none"):
            i, j = int(res.pair[0][1:]), int(res.pair[1][1:])
            assert res.p_value == pytest.approx(oracle[(i, j)], abs=0.01)

    def test_normal_method_is_dunn(self, fixture_records):
        from wristsim.core_types import columns

        cols = columns(fixture_records, ["MEg", "JNDp", "MEp"])
        m = np.column_stack([cols["MEg"], cols["JNDp"], cols["MEp"]])
        got = {r.pair: r.p_unadjusted for r in
               stats.posthoc_pairwise(m, ["MEg", "JNDp", "MEp"], method="normal")}
        # frozen from the Dunn z = |R_i - R_j| / sqrt(n k (k+1) / 6), n=11, k=3
        assert got[("MEg", "JNDp")] == pytest.approx(2 * sps.norm.sf(16 / math.sqrt(22)))
        assert got[("MEg", "MEp")] == pytest.approx(0.0190, abs=5e-4)
        assert got[("JNDp", "MEp")] == pytest.approx(0.286, abs=5e-4)

    def test_bonferroni_caps(self, rng):
        m = rng.normal(size=(5, 4))
        raw = stats.posthoc_pairwise(m, correction="none")
        adj = stats.posthoc_pairwise(m)
        for a, b in zip(raw, adj):
            assert b.p_value == pytest.approx(min(1.0, 6 * a.p_value))

    @given(st.lists(st.lists(st.integers(0, 3), min_size=3, max_size=3), min_size=2, max_size=6))
    def test_null_is_a_distribution(self, rows):
        ranks = stats.row_ranks(np.array(rows, dtype=float))
        values, probs = stats.rank_sum_difference_null(ranks, 0, 2)
        assert probs.sum() == pytest.approx(1.0)
        assert np.allclose(values, -values[::-1])

    def test_bad_options(self):
        with pytest.raises(DomainError):
            stats.posthoc_pairwise(np.eye(3), correction="holm")
        with pytest.raises(DomainError):
            stats.posthoc_pairwise(np.eye(3), labels=["a"])


class TestNormality:
    def test_statistic_matches_reference_implementation(self, rng):
        x = rng.normal(size=15)
        z = (x - x.mean()) / x.std(ddof=1)
        ref = sps.kstest(z, "norm").statistic
        assert stats.normality_screen(x, n_resamples=500).statistic == pytest.approx(ref)

    def test_calibrated_on_normal_samples(self):
        # 100 screens at alpha 0.05; the count of rejections is Binomial(100, 0.05)
        rng = np.random.default_rng(2024)
        rejections = sum(stats.normality_screen(rng.normal(size=200), n_resamples=4000).p_value <= 0.05
                         for _ in range(100))
        assert rejections <= 11  # P(X > 11) < 0.001

    def test_rejects_bimodal(self):
        x = np.r_[np.full(10, -5.0), np.full(10, 5.0)] + np.linspace(0, 0.1, 20)
        assert stats.normality_screen(x).p_value < 0.01

    def test_guards(self):
        with pytest.raises(DomainError):
            stats.normality_screen([1, 2, 3])
        with pytest.raises(DegenerateError):
            stats.normality_screen([2.0] * 8)


class TestDescriptivesAndMatrix:
    @given(st.lists(finite, min_size=2, max_size=30))
    def test_descriptives(self, xs):
        d = stats.descriptives(xs)
        assert d.mean == pytest.approx(np.mean(xs), abs=1e-9)
        assert d.std == pytest.approx(np.std(xs, ddof=1), abs=1e-9)
        assert d.median == np.median(xs)

    def test_single_value(self):
        d = stats.descriptives([4.0])
        assert d.std == 0.0 and d.notes

    def test_matrix_excludes_constant(self):
        table = {"a": [1, 2, 3, 4, 5], "b": [5, 3, 4, 1, 2], "c": [1, 1, 1, 1, 1]}
        cm = stats.correlation_matrix(table)
        assert tuple(cm.excluded) == ("c",)
        assert len(list(cm.pairs())) == 1
        rho, p = cm.cell("a", "b")
        assert rho == pytest.approx(sps.spearmanr(table["a"], table["b"]).statistic)

    def test_matrix_csv_round_trip(self, tmp_path, rng):
        import csv

        table = {k: rng.normal(size=8) for k in "wxyz"}
        cm = stats.correlation_matrix(table)
        path = tmp_path / "m.csv"
        stats.write_matrix_csv(cm, path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        for row in rows:
            rho, p = cm.cell(row["measure_a"], row["measure_b"])
            assert float(row["rho"]) == rho and float(row["p_value"]) == p
