"""
Similarity between residuals and fingerprints (NCC, signed PCE), the
threshold decision, and the ROC / median-table evaluation harness.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import numpy as np
from scipy import fft
from .errors import DataError, DegenerateSignalError, InsufficientDataError
from .nputil import require_same_shape
from .statutil import NullModel, roc_counts, tpr_at_fpr, trapezoid_auc

__all__ = [
    'SimilarityKind',
    'SimilarityScore',
    'Hypothesis',
    'ScoreSet',
    'RocCurve',
    'MedianTable',
    'NullModel',
    'ncc',
    'modulate',
    'pce',
    'decide',
    'roc',
    'median_table',
    'threshold_for_fpr',
    'similarity',
    'SCORE_HEADER',
]

logger = logging.getLogger(__name__)

PCE_EXCLUSION_RADIUS = 5
SCORE_HEADER = ['probe_path', 'camera_id', 'extractor', 'patch_w', 'patch_h',
                'kind', 'value', 'dy', 'dx', 'label']


class SimilarityKind(enum.Enum):
    NCC = 'ncc'
    PCE = 'pce'


class Hypothesis(enum.Enum):
    H0 = 'H0'
    H1 = 'H1'


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    kind: SimilarityKind = SimilarityKind.NCC
    peak_offset: Optional[Tuple[int, int]] = None

    def __float__(self):
        return float(self.value)


def _raw(a):
    return np.asarray(a.data if hasattr(a, 'data') else a, dtype=np.float64)


def _centered(a, what):
    a = a - a.mean()
    norm = np.sqrt(np.sum(a * a))
    if not norm > 0:
        raise DegenerateSignalError('%s has zero variance' % what)
    return a, norm


def ncc(w, ref):
    """
    Pearson correlation of the flattened **w** and **ref**.

    **Arguments**

        - **w** :class:`NoiseResidual` or array
        - **ref** :class:`Fingerprint`, template array from :func:`modulate`, or array

    **Returns**

        :class:`SimilarityScore` of kind ``ncc``
    """
    a, b = _raw(w), _raw(ref)
    require_same_shape(a, b, what='residual and reference')
    a, na = _centered(a, 'residual')
    b, nb = _centered(b, 'reference')
    value = float(np.sum(a * b) / (na * nb))
    return SimilarityScore(min(1.0, max(-1.0, value)), SimilarityKind.NCC)


def modulate(fp, probe):
    """Template ``k * y``: the fingerprint scaled by the probe's intensities."""
    k, y = _raw(fp), _raw(probe)
    require_same_shape(k, y, what='fingerprint and probe')
    return k * y


def _signed_offset(i, n):
    return int(i) if i <= n // 2 else int(i) - n


def pce(w, fp, search='none', exclusion_radius=PCE_EXCLUSION_RADIUS):
    """
    Signed peak-to-correlation energy.

    The normalized circular cross-correlation surface of **w** and **fp** is
    computed in the frequency domain. The peak is taken at zero shift
    (``search='none'``) or at the surface maximum (``search='full'``); the
    score is ``sign(peak) peak^2`` over the mean squared surface outside the
    ``(2r+1) x (2r+1)`` neighbourhood of the peak.

    **Returns**

        :class:`SimilarityScore` of kind ``pce`` with ``peak_offset`` (dy, dx)
        such that **w** matches **fp** circularly shifted by it.
    """
    if search not in ('none', 'full'):
        raise DataError("search must be 'none' or 'full', got %r" % (search,))
    a, b = _raw(w), _raw(fp)
    h, wd = require_same_shape(a, b, what='residual and fingerprint')
    a, na = _centered(a, 'residual')
    b, nb = _centered(b, 'fingerprint')
    surface = fft.irfft2(fft.rfft2(a) * np.conj(fft.rfft2(b)), s=(h, wd)) / (na * nb)
    if search == 'full':
        py, px = np.unravel_index(np.argmax(surface), surface.shape)
    else:
        py, px = 0, 0
    peak = surface[py, px]
    r = exclusion_radius
    keep = np.ones(surface.shape, dtype=bool)
    rows = np.arange(py - r, py + r + 1) % h
    cols = np.arange(px - r, px + r + 1) % wd
    keep[np.ix_(rows, cols)] = False
    if not keep.any():
        raise DataError('exclusion neighbourhood covers the whole %dx%d surface' % (h, wd))
    energy = float(np.mean(surface[keep] ** 2))
    if not energy > 0:
        raise DegenerateSignalError('correlation surface has no energy outside the peak')
    value = float(np.sign(peak) * peak * peak / energy)
    return SimilarityScore(value, SimilarityKind.PCE, (_signed_offset(py, h), _signed_offset(px, wd)))


def similarity(w, fp, probe=None, kind='ncc', search='none'):
    """
    Score a residual against a fingerprint; with **probe** the fingerprint is
    first modulated by the probe's intensities.
    """
    ref = modulate(fp, probe) if probe is not None else _raw(fp)
    kind = SimilarityKind(kind)
    if kind is SimilarityKind.NCC:
        return ncc(w, ref)
    return pce(w, ref, search)


def decide(score, tau):
    """``H1`` iff the score exceeds **tau** strictly."""
    return Hypothesis.H1 if float(score) > tau else Hypothesis.H0


@dataclass
class ScoreSet:
    h1: List[float] = field(default_factory=list)
    h0: List[float] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)

    def add(self, value, label):
        label = Hypothesis(label)
        (self.h1 if label is Hypothesis.H1 else self.h0).append(float(value))

    def extend(self, other):
        self.h1.extend(other.h1)
        self.h0.extend(other.h0)
        return self


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def tpr_at(self, fpr):
        return tpr_at_fpr(self.fpr, self.tpr, fpr)

    def rows(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc(scores):
    """
    ROC of a :class:`ScoreSet` with H1 as the positive class.

    Thresholds sweep every distinct observed score, so tied scores form a
    single step; the trapezoidal AUC equals the pairwise win fraction with
    ties counted as one half.
    """
    if not scores.h1 or not scores.h0:
        raise InsufficientDataError('ROC needs H1 and H0 scores (got %d and %d)'
                                    % (len(scores.h1), len(scores.h0)))
    thresholds, tp, fp = roc_counts(scores.h1, scores.h0)
    return RocCurve(fp / float(fp[-1]), tp / float(tp[-1]), thresholds, trapezoid_auc(tp, fp))


@dataclass(frozen=True)
class MedianTable:
    """Median score per (row, column) cell, e.g. probe camera x extractor."""
    row_labels: List[str]
    col_labels: List[str]
    values: np.ndarray

    def cell(self, row, col):
        return float(self.values[self.row_labels.index(row), self.col_labels.index(col)])

    def rows(self, fmt='%.4f'):
        header = [''] + list(self.col_labels)
        body = [[r] + [('' if np.isnan(v) else fmt % v) for v in self.values[i]]
                for i, r in enumerate(self.row_labels)]
        return header, body


def median_table(grid, hypothesis='H1'):
    """
    **Arguments**

        - **grid** mapping ``(row, col) -> ScoreSet``
        - **hypothesis** which scores to summarize. Default ``'H1'``.

    **Returns**

        :class:`MedianTable`; cells without scores hold NaN
    """
    hyp = Hypothesis(hypothesis)
    rows, cols = [], []
    for r, c in grid:
        if r not in rows:
            rows.append(r)
        if c not in cols:
            cols.append(c)
    values = np.full((len(rows), len(cols)), np.nan)
    for (r, c), ss in grid.items():
        vals = ss.h1 if hyp is Hypothesis.H1 else ss.h0
        if vals:
            values[rows.index(r), cols.index(c)] = np.median(vals)
    return MedianTable(rows, cols, values)


def threshold_for_fpr(h0_scores, fpr, method='empirical'):
    """
    Decision threshold for a target false-positive rate.

    ``'empirical'`` picks the smallest observed H0 score that at most
    ``floor(fpr * n)`` H0 scores exceed; ``'parametric'`` inverts a
    :class:`NullModel` fitted to the H0 scores.
    """
    if not 0.0 < fpr < 1.0:
        raise DataError('target false-positive rate must lie in (0, 1), got %r' % (fpr,))
    h0 = np.sort(np.asarray(h0_scores, dtype=np.float64).ravel())
    if h0.size == 0:
        raise InsufficientDataError('no H0 scores')
    if method == 'parametric':
        return NullModel.fit(h0).threshold(fpr)
    if method != 'empirical':
        raise DataError('unknown threshold method %r' % (method,))
    allowed = int(np.floor(fpr * h0.size))
    return float(h0[h0.size - allowed - 1])
