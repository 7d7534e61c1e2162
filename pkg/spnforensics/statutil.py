import logging
from dataclasses import dataclass
import numpy as np
from iminuit import Minuit
from scipy import stats
from .errors import DataError, InsufficientDataError, NumericError

__all__ = [
    'roc_counts',
    'trapezoid_auc',
    'pairwise_auc',
    'tpr_at_fpr',
    'spearman',
    'NullModel',
    'xintercept',
    'first_neg',
]

logger = logging.getLogger(__name__)


def _two_classes(pos, neg):
    pos = np.asarray(pos, dtype=np.float64).ravel()
    neg = np.asarray(neg, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise InsufficientDataError('both classes need at least one score (got %d positive, %d negative)'
                                    % (pos.size, neg.size))
    return pos, neg


def roc_counts(pos, neg):
    """
    Operating points of the rule ``score >= t`` for every distinct observed
    score ``t`` (descending), preceded by the empty rule.

    **Returns**

        (thresholds, true-positive counts, false-positive counts); counts are
        integers, thresholds[0] is +inf.
    """
    pos, neg = _two_classes(pos, neg)
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    sp, sn = np.sort(pos), np.sort(neg)
    tp = pos.size - np.searchsorted(sp, thresholds, side='left')
    fp = neg.size - np.searchsorted(sn, thresholds, side='left')
    return (np.concatenate([[np.inf], thresholds]),
            np.concatenate([[0], tp]).astype(np.int64),
            np.concatenate([[0], fp]).astype(np.int64))


def trapezoid_auc(tp, fp):
    # exact in integers: sum of dFP * (TP_i + TP_{i-1}) over 2 * P * N
    tp = [int(v) for v in tp]
    fp = [int(v) for v in fp]
    twice = sum((fp[i] - fp[i - 1]) * (tp[i] + tp[i - 1]) for i in range(1, len(tp)))
    return twice / (2 * tp[-1] * fp[-1])


def pairwise_auc(pos, neg):
    """
    Fraction of (positive, negative) pairs ranked correctly, ties counting
    one half. Quadratic; meant for checking :func:`roc_counts`.
    """
    pos, neg = _two_classes(pos, neg)
    wins = int(np.sum(pos[:, None] > neg[None, :]))
    ties = int(np.sum(pos[:, None] == neg[None, :]))
    return (2 * wins + ties) / (2 * pos.size * neg.size)


def xintercept(x0, y0, x1, y1):
    m = (y1 - y0) / (x1 - x0)
    return -y0 / m + x0


def first_neg(y, direction='r'):
    if direction == 'l':
        xlist = range(len(y) - 1, -1, -1)
    else:
        xlist = range(len(y))
    for i in xlist:
        if y[i] < 0:
            return i
    raise ValueError('They are all positive what are you tying to find?')


def tpr_at_fpr(fpr, tpr, target):
    """
    True-positive rate of a ROC curve at false-positive rate **target**,
    linearly interpolated between operating points.
    """
    fpr = np.asarray(fpr, dtype=float)
    tpr = np.asarray(tpr, dtype=float)
    if target >= fpr[-1]:
        return float(tpr[-1])
    i = first_neg(target - fpr)
    if tpr[i] == tpr[i - 1]:
        return float(tpr[i])
    # the line crosses fpr == target; solve on swapped axes
    return float(xintercept(tpr[i - 1], fpr[i - 1] - target, tpr[i], fpr[i] - target))


def spearman(x, y):
    """Spearman rank correlation of two equally long sequences."""
    if len(x) != len(y) or len(x) < 2:
        raise InsufficientDataError('spearman needs two sequences of equal length >= 2')
    return float(stats.spearmanr(x, y).correlation)


@dataclass(frozen=True)
class NullModel:
    """
    Generalized normal fit to scores under the no-fingerprint hypothesis:
    density ``beta / (2 scale Gamma(1/beta)) exp(-|x - loc|^beta / scale^beta)``.
    """
    loc: float
    scale: float
    beta: float
    nll: float
    valid: bool

    @classmethod
    def fit(cls, scores, print_level=0):
        """
        Unbinned maximum-likelihood fit of **scores** minimized by MIGRAD.

        **Arguments**

            - **scores** H0 scores, at least 3 distinct values
            - **print_level** minuit verbosity
        """
        x = np.asarray(scores, dtype=np.float64).ravel()
        if np.unique(x).size < 3:
            raise InsufficientDataError('null model fit needs at least 3 distinct scores')

        def nll(loc, log_scale, beta):
            return -float(np.sum(stats.gennorm.logpdf(x, beta, loc=loc, scale=np.exp(log_scale))))

        sd = float(np.std(x))
        minuit = Minuit(nll, loc=float(np.median(x)), log_scale=np.log(sd * np.sqrt(2.0)), beta=2.0)
        minuit.errordef = Minuit.LIKELIHOOD
        minuit.print_level = print_level
        minuit.strategy = 2
        minuit.limits['beta'] = (0.2, 20.0)
        minuit.migrad()
        if not np.isfinite(minuit.fval):
            raise NumericError('null model likelihood is not finite')
        if not minuit.valid:
            logger.info('null model fit did not converge cleanly (fval %.6g)', minuit.fval)
        v = minuit.values
        return cls(float(v['loc']), float(np.exp(v['log_scale'])), float(v['beta']),
                   float(minuit.fval), bool(minuit.valid))

    def sf(self, t):
        """Probability of an H0 score strictly above **t**."""
        return stats.gennorm.sf(t, self.beta, loc=self.loc, scale=self.scale)

    def threshold(self, fpr):
        """Threshold whose H0 exceedance probability is **fpr**."""
        if not 0.0 < fpr < 1.0:
            raise DataError('target false-positive rate must lie in (0, 1)')
        return float(stats.gennorm.isf(fpr, self.beta, loc=self.loc, scale=self.scale))
