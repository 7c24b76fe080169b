"""k-NN, cross-validation plans, ANOVA, and the studentized-range machinery."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ridgesense import features, learn
from ridgesense.learn import CvPlan, KnnConfig


def _dataset(vectors, labels):
    vectors = np.asarray(vectors, dtype=float)
    return features.LabeledDataset(vectors, list(labels), [{} for _ in labels])


def _random_dataset(rng, n_per_class=8, classes=("a", "b", "c"), scale=1.0):
    rows, labels = [], []
    for ci, cls in enumerate(classes):
        center = np.zeros(66)
        center[ci] = 5.0
        rows.append(rng.normal(loc=center, scale=scale, size=(n_per_class, 66)))
        labels += [cls] * n_per_class
    return _dataset(np.vstack(rows), labels)


def _knn_oracle(train_vecs, train_labels, query, k):
    """Exhaustive-sort reference: stable sort, majority, mean-distance tie-break."""
    d = np.sqrt(np.sum((train_vecs - query) ** 2, axis=1))
    order = np.argsort(d, kind="stable")[:k]
    votes = {}
    for i in order:
        votes.setdefault(train_labels[i], []).append(d[i])
    return min(votes.items(), key=lambda kv: (-len(kv[1]), float(np.mean(kv[1])), kv[0]))[0]


class TestKnn:
    def test_hand_example(self):
        vecs = np.zeros((4, 66))
        vecs[0, 0], vecs[1, 0], vecs[2, 0], vecs[3, 0] = 0.0, 0.1, 10.0, 10.1
        ds = _dataset(vecs, ["lo", "lo", "hi", "hi"])
        q = np.zeros(66)
        q[0] = 1.0
        assert learn.knn_predict(ds, q, KnnConfig(k=3)) == "lo"

    def test_matches_oracle_on_random_points(self):
        rng = np.random.default_rng(12)
        ds = _random_dataset(rng, n_per_class=20, scale=3.0)
        for _ in range(50):
            q = rng.normal(size=66)
            assert learn.knn_predict(ds, q) == _knn_oracle(
                ds.vectors, ds.labels, q, 5
            )

    def test_vote_tie_breaks_to_closer_mean(self):
        vecs = np.zeros((4, 66))
        vecs[0, 0], vecs[1, 0] = 1.0, 1.2  # class a: mean dist 1.1
        vecs[2, 0], vecs[3, 0] = 1.1, 2.0  # class b: mean dist 1.55
        ds = _dataset(vecs, ["a", "a", "b", "b"])
        assert learn.knn_predict(ds, np.zeros(66), KnnConfig(k=4)) == "a"

    @given(scale=st.floats(0.01, 100.0))
    @settings(max_examples=20, deadline=None)
    def test_global_scale_invariance(self, scale):
        rng = np.random.default_rng(7)
        ds = _random_dataset(rng, n_per_class=10, scale=2.0)
        q = rng.normal(size=66)
        scaled = _dataset(ds.vectors * scale, ds.labels)
        assert learn.knn_predict(ds, q) == learn.knn_predict(scaled, q * scale)

    def test_empty_train_raises(self):
        with pytest.raises(ValueError):
            learn.knn_predict(
                features.LabeledDataset(np.zeros((0, 66)), [], []), np.zeros(66)
            )


class TestStratifiedFolds:
    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_balance_disjoint_union(self, seed):
        rng = np.random.default_rng(seed)
        sizes = rng.integers(5, 20, size=3)
        labels = [c for c, n in zip("abc", sizes) for _ in range(n)]
        ds = _dataset(np.zeros((len(labels), 66)), labels)
        plan = CvPlan(folds=5, repeats=2, seed=seed)
        folds = learn.stratified_folds(ds, plan)
        assert folds.shape == (2, len(labels))
        labels_arr = np.asarray(labels, dtype=object)
        for rep in range(2):
            for cls, n in zip("abc", sizes):
                counts = np.bincount(folds[rep][labels_arr == cls], minlength=5)
                assert counts.max() - counts.min() <= 1  # within-class balance
                assert counts.sum() == n

    def test_deterministic(self):
        ds = _dataset(np.zeros((30, 66)), ["a"] * 15 + ["b"] * 15)
        plan = CvPlan(folds=5, repeats=3, seed=11)
        assert np.array_equal(learn.stratified_folds(ds, plan), learn.stratified_folds(ds, plan))

    def test_small_class_raises(self):
        ds = _dataset(np.zeros((7, 66)), ["a"] * 4 + ["b"] * 3)
        with pytest.raises(ValueError, match="fewer members"):
            learn.stratified_folds(ds, CvPlan(folds=5, repeats=1))


class TestEvaluate:
    def test_model_counts(self):
        rng = np.random.default_rng(3)
        ds = _random_dataset(rng)
        dist = learn.evaluate(ds, CvPlan(folds=5, repeats=10, seed=1))
        assert dist.accuracies.size == 50
        assert learn.PLAN_50_MODELS.folds * learn.PLAN_50_MODELS.repeats == 50
        assert learn.PLAN_300_MODELS.folds * learn.PLAN_300_MODELS.repeats == 300

    def test_separable_data_is_perfect(self):
        rng = np.random.default_rng(4)
        ds = _random_dataset(rng, scale=0.05)
        dist = learn.evaluate(ds, CvPlan(folds=5, repeats=2, seed=0))
        assert dist.mean == 1.0

    def test_modes_differ_but_both_deterministic(self):
        rng = np.random.default_rng(5)
        ds = _random_dataset(rng, scale=4.0)
        plan = CvPlan(folds=5, repeats=4, seed=2)
        a1 = learn.evaluate(ds, plan, normalize_mode="fold-safe")
        a2 = learn.evaluate(ds, plan, normalize_mode="fold-safe")
        b = learn.evaluate(ds, plan, normalize_mode="full")
        assert np.array_equal(a1.accuracies, a2.accuracies)
        assert b.accuracies.size == a1.accuracies.size
        with pytest.raises(ValueError):
            learn.evaluate(ds, plan, normalize_mode="bogus")


class TestAnova:
    def test_fixture_oracle(self):
        # [1,2,3], [2,3,4], [3,4,5]: SSB = 6, SSW = 6, F = (6/2)/(6/6) = 3
        f, p, dfb, dfw = learn.anova_oneway([[1, 2, 3], [2, 3, 4], [3, 4, 5]])
        assert f == pytest.approx(3.0, rel=1e-12)
        assert (dfb, dfw) == (2, 6)
        assert p == pytest.approx(float(stats.f.sf(3.0, 2, 6)), rel=1e-9)

    def test_matches_scipy_f_oneway(self):
        rng = np.random.default_rng(6)
        groups = [rng.normal(loc=m, size=12) for m in (0.0, 0.5, 0.3, 1.0)]
        f, p, _, _ = learn.anova_oneway(groups)
        ref = stats.f_oneway(*groups)
        assert f == pytest.approx(ref.statistic, rel=1e-9)
        assert p == pytest.approx(ref.pvalue, rel=1e-6)

    def test_two_groups_f_equals_t_squared(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.normal(size=rng.integers(5, 15))
            b = rng.normal(loc=0.4, size=rng.integers(5, 15))
            f, _, _, _ = learn.anova_oneway([a, b])
            t = stats.ttest_ind(a, b, equal_var=True).statistic
            assert f == pytest.approx(t**2, rel=1e-9, abs=1e-12)

    def test_degenerate_groups(self):
        f, p, _, _ = learn.anova_oneway([[2.0, 2.0], [2.0, 2.0]])
        assert (f, p) == (0.0, 1.0)
        f, p, _, _ = learn.anova_oneway([[1.0, 1.0], [2.0, 2.0]])
        assert f == float("inf") and p == 0.0

    @given(shift=st.floats(-100, 100), scale=st.floats(0.01, 100))
    @settings(max_examples=25, deadline=None)
    def test_affine_invariance(self, shift, scale):
        rng = np.random.default_rng(8)
        groups = [rng.normal(loc=m, size=10) for m in (0.0, 1.0, 0.5)]
        f1, _, _, _ = learn.anova_oneway(groups)
        f2, _, _, _ = learn.anova_oneway([g * scale + shift for g in groups])
        assert f2 == pytest.approx(f1, rel=1e-7)


class TestStudentizedRange:
    def test_cdf_matches_scipy(self):
        for q, k, df in ((3.0, 3, 10), (2.0, 4, 20), (4.5, 5, 8), (3.5, 3, 60)):
            ours = learn.studentized_range_cdf(q, k, df)
            ref = float(stats.studentized_range.cdf(q, k, df))
            assert ours == pytest.approx(ref, abs=2e-4)

    def test_tabulated_critical_value(self):
        # classic table entry: q_0.05 for 3 groups, 10 df is 3.88
        assert learn.q_critical(0.05, 3, 10) == pytest.approx(3.88, abs=0.02)

    def test_critical_value_matches_scipy_ppf(self):
        for alpha, k, df in ((0.05, 3, 10), (0.01, 4, 30), (0.05, 6, 12)):
            ours = learn.q_critical(alpha, k, df)
            ref = float(stats.studentized_range.ppf(1 - alpha, k, df))
            assert ours == pytest.approx(ref, rel=1e-3)

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            learn.q_critical(1.5, 3, 10)


class TestTukey:
    def test_matches_scipy_significance(self):
        rng = np.random.default_rng(9)
        groups = [rng.normal(loc=m, scale=0.5, size=15) for m in (0.0, 0.2, 1.5)]
        ours = learn.tukey_hsd(groups, alpha=0.05)
        ref = stats.tukey_hsd(*groups)
        for res in ours:
            i, j = res.group_a, res.group_b
            assert res.significant == (ref.pvalue[i, j] < 0.05)
            assert res.mean_diff == pytest.approx(
                groups[i].mean() - groups[j].mean(), rel=1e-12
            )

    def test_identical_groups_not_significant(self):
        g = [1.0, 2.0, 3.0]
        for res in learn.tukey_hsd([g, g, g]):
            assert not res.significant and res.q == 0.0

    def test_group_ids_carried(self):
        res = learn.tukey_hsd([[1, 2, 3], [5, 6, 7]], group_ids=["flat", "ridged"])
        assert (res[0].group_a, res[0].group_b) == ("flat", "ridged")
