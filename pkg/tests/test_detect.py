import numpy as np
import pytest
from numpy.testing import assert_allclose
from spnforensics.core import Fingerprint, NoiseResidual
from spnforensics.detect import (Hypothesis, ScoreSet, SimilarityKind, decide, median_table, modulate,
                                 ncc, pce, roc, similarity, threshold_for_fpr)
from spnforensics.errors import DataError, DegenerateSignalError, DimensionError, InsufficientDataError
from spnforensics.statutil import pairwise_auc


class TestNcc:
    def test_orthogonal(self):
        w = np.array([[1.0, -1.0], [1.0, -1.0]])
        k = np.array([[1.0, 1.0], [-1.0, -1.0]])
        s = ncc(w, k)
        assert s.value == 0.0
        assert s.kind is SimilarityKind.NCC

    def test_self_and_negated(self):
        k = np.random.default_rng(0).normal(size=(8, 9))
        assert_allclose(ncc(NoiseResidual(k), Fingerprint(k)).value, 1.0, rtol=1e-6)
        assert_allclose(ncc(-k, k).value, -1.0)
        # invariant to offset and positive scale
        assert_allclose(ncc(3 * k + 7, k).value, 1.0)

    def test_errors(self):
        with pytest.raises(DegenerateSignalError):
            ncc(np.ones((3, 3)), np.eye(3))
        with pytest.raises(DimensionError):
            ncc(np.eye(3), np.eye(4))


def test_modulate():
    k = np.array([[0.1, -0.2]])
    y = np.array([[10.0, 100.0]])
    assert_allclose(modulate(k, y), [[1.0, -20.0]])


def test_similarity_with_probe():
    rng = np.random.default_rng(1)
    k = rng.normal(0, 0.01, (16, 16))
    y = rng.uniform(10, 240, (16, 16))
    assert_allclose(similarity(k * y, k, y).value, 1.0)
    assert similarity(k * y, k).value < 0.99
    assert similarity(k * y, k, y, kind='pce').kind is SimilarityKind.PCE


class TestPce:
    def setup_method(self):
        self.fp = np.random.default_rng(2).normal(size=(64, 64))

    def test_self_match(self):
        s = pce(self.fp, self.fp)
        assert s.value > 1000
        assert s.peak_offset == (0, 0)

    def test_sign(self):
        assert pce(-self.fp, self.fp).value < -1000

    def test_shift_found_by_search(self):
        w = np.roll(self.fp, (3, 7), axis=(0, 1))
        assert abs(pce(w, self.fp).value) < 100
        s = pce(w, self.fp, search='full')
        assert s.value > 1000
        assert s.peak_offset == (3, 7)
        assert pce(np.roll(self.fp, (-2, -5), axis=(0, 1)), self.fp, 'full').peak_offset == (-2, -5)

    def test_unrelated(self):
        other = np.random.default_rng(3).normal(size=(64, 64))
        assert abs(pce(other, self.fp).value) < 50

    def test_errors(self):
        with pytest.raises(DataError):
            pce(self.fp, self.fp, search='some')
        with pytest.raises(DataError):
            pce(self.fp[:8, :8], self.fp[:8, :8], exclusion_radius=5)


def test_decide():
    assert decide(0.5, 0.1) is Hypothesis.H1
    assert decide(0.1, 0.1) is Hypothesis.H0
    k = np.random.default_rng(6).normal(size=(32, 32))
    assert decide(pce(k, k), 60) is Hypothesis.H1


class TestRoc:
    def test_perfect(self):
        curve = roc(ScoreSet([0.9, 0.8], [0.2, 0.1]))
        assert curve.auc == 1.0
        assert curve.tpr_at(0.01) == 1.0

    def test_identical_distributions(self):
        assert roc(ScoreSet([0.5, 0.5], [0.5, 0.5])).auc == 0.5

    def test_interleaved(self):
        curve = roc(ScoreSet([0.9, 0.8], [0.85, 0.1]))
        assert curve.auc == 0.75
        assert curve.rows()[0] == (0.0, 0.0)
        assert curve.rows()[-1] == (1.0, 1.0)
        assert curve.tpr_at(0.25) == 0.5

    def test_matches_pairwise_count(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            h1 = np.round(rng.normal(1, 1, 40), 1)
            h0 = np.round(rng.normal(0, 1, 55), 1)
            assert roc(ScoreSet(list(h1), list(h0))).auc == pairwise_auc(h1, h0)

    def test_one_class(self):
        with pytest.raises(InsufficientDataError):
            roc(ScoreSet([0.3], []))


def test_score_set():
    ss = ScoreSet()
    ss.add(0.4, 'H1')
    ss.add(0.1, Hypothesis.H0)
    ss.extend(ScoreSet([0.5], [0.2]))
    assert ss.h1 == [0.4, 0.5]
    assert ss.h0 == [0.1, 0.2]
    with pytest.raises(ValueError):
        ss.add(0.3, 'H2')


def test_median_table():
    grid = {
        ('camA', 'wavelet'): ScoreSet([0.1, 0.3, 0.2], [0.0]),
        ('camA', 'spncnn'): ScoreSet([0.4, 0.6], []),
        ('camB', 'wavelet'): ScoreSet([], [0.05, 0.01, 0.03]),
    }
    t = median_table(grid)
    assert t.row_labels == ['camA', 'camB']
    assert t.col_labels == ['wavelet', 'spncnn']
    assert_allclose(t.cell('camA', 'wavelet'), 0.2)
    assert_allclose(t.cell('camA', 'spncnn'), 0.5)
    assert np.isnan(t.cell('camB', 'spncnn'))
    header, body = t.rows()
    assert header == ['', 'wavelet', 'spncnn']
    assert body[1] == ['camB', '', '']
    assert_allclose(median_table(grid, 'H0').cell('camB', 'wavelet'), 0.03)


class TestThreshold:
    def test_empirical(self):
        h0 = np.arange(1, 101) / 100.0
        t = threshold_for_fpr(h0, 0.05)
        assert t == 0.95
        assert np.sum(h0 > t) == 5

    def test_parametric(self):
        h0 = np.random.default_rng(5).normal(0, 1, 3000)
        assert_allclose(threshold_for_fpr(h0, 0.01, 'parametric'), 2.326, atol=0.25)

    def test_errors(self):
        with pytest.raises(DataError):
            threshold_for_fpr([0.1], 1.0)
        with pytest.raises(DataError):
            threshold_for_fpr([0.1], 0.1, 'bootstrap')
        with pytest.raises(InsufficientDataError):
            threshold_for_fpr([], 0.1)
