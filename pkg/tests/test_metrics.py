import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daln import metrics
from daln.checks import random_simplex


class TestSelfCorrelation:
    def test_one_hot_spread(self):
        z = np.eye(4)
        sc = metrics.self_correlation(z)
        assert sc.i_a == 4 and sc.i_e == 0

    def test_uniform_2x2(self):
        sc = metrics.self_correlation(np.full((2, 2), 0.5))
        np.testing.assert_allclose(sc.r, [[0.5, 0.5], [0.5, 0.5]])
        assert sc.i_a == pytest.approx(1.0) and sc.i_e == pytest.approx(1.0)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 50), st.integers(2, 10), st.integers(0, 2**32 - 1))
    def test_identities(self, b, k, seed):
        z = random_simplex(np.random.default_rng(seed), b, k)
        sc = metrics.self_correlation(z)
        assert abs(sc.i_a + sc.i_e - b) <= 1e-9
        assert abs(sc.i_a - float(np.sum(z * z))) <= 1e-9
        assert sc.i_a >= 0 and sc.i_e >= 0
        assert np.allclose(sc.r, sc.r.T, atol=1e-10)
        assert np.min(np.linalg.eigvalsh(sc.r)) >= -1e-10

    def test_rejects_off_simplex(self):
        with pytest.raises(ValueError):
            metrics.self_correlation(np.array([[0.7, 0.7]]))


def loop_confusion(preds, labels, k):
    conf = [[0] * k for _ in range(k)]
    for row, y in zip(preds, labels):
        best = 0
        for j in range(1, k):
            if row[j] > row[best]:
                best = j
        conf[y][best] += 1
    return np.array(conf)


class TestConfusion:
    def test_perfect(self):
        conf, acc, rec = metrics.confusion_and_accuracy(np.eye(3), [0, 1, 2])
        assert np.array_equal(conf, np.eye(3, dtype=int))
        assert acc == 1.0 and np.all(rec == 1.0)

    def test_all_class_zero(self):
        preds = np.tile([0.9, 0.1], (4, 1))
        conf, acc, rec = metrics.confusion_and_accuracy(preds, [0, 1, 0, 1])
        assert acc == 0.5
        np.testing.assert_array_equal(rec, [1.0, 0.0])

    def test_tie_goes_to_lowest_index(self):
        conf, _, _ = metrics.confusion_and_accuracy(np.array([[0.5, 0.5]]), [1])
        assert conf[1, 0] == 1

    def test_loop_oracle(self):
        rng = np.random.default_rng(0)
        preds = random_simplex(rng, 50, 4)
        labels = rng.integers(0, 4, 50)
        conf, acc, rec = metrics.confusion_and_accuracy(preds, labels)
        expected = loop_confusion(preds, labels, 4)
        assert np.array_equal(conf, expected)
        assert conf.sum() == 50
        assert acc == pytest.approx(np.trace(expected) / 50)

    def test_label_error(self):
        with pytest.raises(ValueError):
            metrics.confusion_and_accuracy(np.eye(2), [0, 2])


class TestDeterminacy:
    def test_all_certain(self):
        assert metrics.determinacy_ratio(np.eye(3), [0, 1, 2]) == 1.0

    def test_all_hesitant(self):
        preds = np.tile([0.6, 0.4], (5, 1))
        assert metrics.determinacy_ratio(preds, [0] * 5) == 0.0

    def test_hand_counted_fixture(self):
        # 6 correct (3 of them >= 0.9) and 4 wrong
        preds = np.array([
            [0.95, 0.05], [0.92, 0.08], [0.10, 0.90],  # correct, certain
            [0.60, 0.40], [0.30, 0.70], [0.80, 0.20],  # correct, hesitant
            [0.99, 0.01], [0.05, 0.95], [0.70, 0.30], [0.40, 0.60],  # wrong
        ])
        labels = [0, 0, 1, 0, 1, 0, 1, 0, 1, 0]
        assert metrics.determinacy_ratio(preds, labels) == 0.5

    def test_none_correct(self):
        assert metrics.determinacy_ratio(np.eye(2), [1, 0]) == 0.0


class TestPerClassCorrect:
    def test_perfect_gives_class_sizes(self):
        labels = np.array([0, 0, 1, 2, 2, 2])
        preds = np.eye(3)[labels]
        np.testing.assert_array_equal(metrics.per_class_correct(preds, labels), [2, 1, 3])

    def test_all_wrong(self):
        labels = np.array([0, 1, 2])
        preds = np.eye(3)[(labels + 1) % 3]
        np.testing.assert_array_equal(metrics.per_class_correct(preds, labels), [0, 0, 0])

    def test_loop_oracle(self):
        rng = np.random.default_rng(1)
        preds = random_simplex(rng, 40, 3)
        labels = rng.integers(0, 3, 40)
        expected = [0, 0, 0]
        for row, y in zip(preds, labels):
            if int(np.argmax(row)) == y:
                expected[y] += 1
        np.testing.assert_array_equal(metrics.per_class_correct(preds, labels), expected)


class TestProxyADistance:
    def test_indistinguishable(self):
        rng = np.random.default_rng(0)
        fs = rng.normal(size=(200, 4))
        ft = fs[rng.permutation(200)]
        assert metrics.proxy_a_distance(fs, ft) == pytest.approx(0.0, abs=0.15)

    def test_separable(self):
        rng = np.random.default_rng(1)
        fs = rng.normal(size=(100, 3))
        ft = rng.normal(size=(100, 3)) + 20
        assert metrics.proxy_a_distance(fs, ft) == pytest.approx(2.0, abs=0.1)

    def test_reproducible(self):
        rng = np.random.default_rng(2)
        fs, ft = rng.normal(size=(60, 3)), rng.normal(size=(50, 3)) + 0.5
        assert metrics.proxy_a_distance(fs, ft, seed=4) == metrics.proxy_a_distance(fs, ft, seed=4)

    def test_degenerate_folds(self):
        with pytest.raises(ValueError):
            metrics.proxy_a_distance(np.ones((1, 2)), np.ones((1, 2)))


def loop_mmd(xs, xt, hs):
    def k(a, b):
        d = sum((ai - bi) ** 2 for ai, bi in zip(a, b))
        return sum(math.exp(-d / h) for h in hs)

    m, n = len(xs), len(xt)
    ss = sum(k(xs[i], xs[j]) for i in range(m) for j in range(m) if i != j) / (m * (m - 1))
    tt = sum(k(xt[i], xt[j]) for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
    if m == n:
        st_ = sum(k(xs[i], xt[j]) for i in range(m) for j in range(n) if i != j) / (m * (m - 1))
    else:
        st_ = sum(k(xs[i], xt[j]) for i in range(m) for j in range(n)) / (m * n)
    return ss + tt - 2 * st_


class TestMmd:
    def test_identical_sets(self):
        x = np.random.default_rng(0).normal(size=(30, 3))
        assert abs(metrics.mmd_rbf(x, x.copy(), biased=True)) <= 1e-9
        assert abs(metrics.mmd_rbf(x, x.copy())) <= 1e-6

    def test_far_apart(self):
        rng = np.random.default_rng(1)
        xs, xt = rng.normal(size=(200, 2)), rng.normal(size=(200, 2))
        xt[:, 0] += 10
        assert metrics.mmd_rbf(xs, xt) > 0.5

    @pytest.mark.parametrize("sizes", [(8, 8), (8, 6)])
    def test_loop_oracle(self, sizes):
        rng = np.random.default_rng(2)
        xs, xt = rng.normal(size=(sizes[0], 2)), rng.normal(size=(sizes[1], 2)) + 0.3
        hs = metrics.default_bandwidths(xs, xt)
        assert metrics.mmd_rbf(xs, xt) == pytest.approx(loop_mmd(xs, xt, hs), abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            xs, xt = rng.normal(size=(20, 2)), rng.normal(size=(25, 2)) + rng.uniform(0, 2)
            assert metrics.mmd_rbf(xs, xt) == pytest.approx(metrics.mmd_rbf(xt, xs), abs=1e-12)

    def test_nonnegative_on_shifted_samples(self):
        # overlapping samples can dip below zero; that is the price of unbiasedness
        rng = np.random.default_rng(4)
        for _ in range(50):
            xs, xt = rng.normal(size=(20, 2)), rng.normal(size=(25, 2)) + rng.uniform(1, 3)
            assert metrics.mmd_rbf(xs, xt) >= -1e-6

    def test_unbiased_can_dip_below_zero_biased_cannot(self):
        rng = np.random.default_rng(3)
        values = [metrics.mmd_rbf(rng.normal(size=(20, 2)), rng.normal(size=(25, 2))) for _ in range(30)]
        assert min(values) < 0
        for _ in range(30):
            xs, xt = rng.normal(size=(20, 2)), rng.normal(size=(25, 2))
            assert metrics.mmd_rbf(xs, xt, biased=True) >= -1e-12

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError):
            metrics.mmd_rbf(np.ones((1, 2)), np.ones((4, 2)))


def test_report_json_round_trip():
    rep = metrics.MetricsReport(epoch=3, accuracy=0.5, per_class_recall=[1.0, 0.0], confusion=[[2, 0], [2, 0]],
                                per_class_correct=[2, 0], determinacy_ratio=0.25, l_cls=0.1, mmd=0.2)
    back = metrics.MetricsReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
    assert "\n" not in rep.to_json()
