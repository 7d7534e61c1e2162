"""
Manipulation localization: sliding-window correlation maps, a linear
predictor of the correlation expected from local image content, and
pixel-level evaluation of ``delta = measured - predicted``.
"""
import logging
from dataclasses import dataclass
from typing import Tuple
import numpy as np
from scipy import ndimage
from .core import DEFAULT_SATURATION_LEVEL, Image
from .detect import RocCurve, modulate, ncc
from .errors import DataError, DegenerateSignalError, DimensionError, InsufficientDataError
from .nputil import window_starts
from .statutil import roc_counts, trapezoid_auc

__all__ = [
    'FEATURE_NAMES',
    'CorrelationMap',
    'FeatureVector',
    'PredictorModel',
    'sliding_corr',
    'extract_features',
    'window_features',
    'fit_predictor',
    'predict_map',
    'delta_map',
    'upsample_to_pixels',
    'pixel_roc',
    'collect_training_windows',
    'localization_maps',
    'per_image_pixel_auc',
]

logger = logging.getLogger(__name__)

FEATURE_NAMES = ('mean_intensity', 'texture', 'saturation_fraction', 'edge_energy')
TEXTURE_NEIGHBOURHOOD = 5


@dataclass(frozen=True, eq=False)
class CorrelationMap:
    """
    One value per window position; window ``(i, j)`` covers rows
    ``tops[i]:tops[i]+window`` and columns ``lefts[j]:lefts[j]+window``.
    """
    values: np.ndarray
    window: int
    stride: int
    image_shape: Tuple[int, int]
    degenerate: np.ndarray = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        expected = (len(self.tops), len(self.lefts))
        if values.shape != expected:
            raise DimensionError('map of shape %s does not fit window %d / stride %d on %s (expected %s)'
                                 % (values.shape, self.window, self.stride, self.image_shape, expected))
        if not np.all(np.isfinite(values)):
            raise DataError('correlation map contains non-finite values')
        degenerate = np.zeros(values.shape, dtype=bool) if self.degenerate is None \
            else np.array(self.degenerate, dtype=bool)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'degenerate', degenerate)
        object.__setattr__(self, 'image_shape', tuple(self.image_shape))

    @property
    def shape(self):
        return self.values.shape

    @property
    def tops(self):
        return window_starts(self.image_shape[0], self.window, self.stride)

    @property
    def lefts(self):
        return window_starts(self.image_shape[1], self.window, self.stride)

    def same_geometry(self, other):
        return (self.window == other.window and self.stride == other.stride
                and self.image_shape == other.image_shape)

    def with_values(self, values):
        return CorrelationMap(values, self.window, self.stride, self.image_shape, self.degenerate)


@dataclass(frozen=True)
class FeatureVector:
    mean_intensity: float
    texture: float
    saturation_fraction: float
    edge_energy: float

    def to_array(self):
        return np.array([self.mean_intensity, self.texture, self.saturation_fraction, self.edge_energy])


@dataclass(frozen=True)
class PredictorModel:
    """``rho_hat = weights[:-1] . features + weights[-1]``."""
    weights: np.ndarray
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    rms: float = 0.0
    ridge: bool = False

    def __post_init__(self):
        if len(self.weights) != len(self.feature_names) + 1:
            raise DimensionError('predictor needs one weight per feature plus a bias')

    def predict(self, features):
        f = np.asarray(features, dtype=np.float64)
        return f @ self.weights[:-1] + self.weights[-1]


def _check_window(shape, window, stride):
    if window < 2 or stride < 1:
        raise DataError('window must be >= 2 and stride >= 1')
    if window > min(shape):
        raise DimensionError('window %d exceeds the %dx%d image' % (window, shape[0], shape[1]))


def sliding_corr(img, fp, extractor, window=64, stride=8, residual=None):
    """
    Correlation of the probe's residual with the fingerprint in every window.

    The extractor runs once on the whole image; each window compares the
    residual crop with the fingerprint crop (modulated by the probe when the
    extractor's residuals scale with intensity). Windows where either crop
    is constant get the value 0 and are flagged in ``degenerate``.

    **Arguments**

        - **img** probe :class:`Image`
        - **fp** :class:`Fingerprint` on the probe's grid
        - **extractor** callable Image -> NoiseResidual
        - **window**, **stride** pixels. Default 64, 8.
        - **residual** precomputed extractor output, to skip extraction

    **Returns**

        :class:`CorrelationMap`
    """
    if img.shape != fp.shape:
        raise DimensionError('probe %s and fingerprint %s are not aligned' % (img.shape, fp.shape))
    _check_window(img.shape, window, stride)
    w = (residual if residual is not None else extractor(img)).data
    ref = modulate(fp, img) if getattr(extractor, 'modulated', True) else fp.data.astype(np.float64)
    tops = window_starts(img.height, window, stride)
    lefts = window_starts(img.width, window, stride)
    values = np.zeros((len(tops), len(lefts)))
    degenerate = np.zeros(values.shape, dtype=bool)
    for i, t in enumerate(tops):
        for j, l in enumerate(lefts):
            region = (slice(t, t + window), slice(l, l + window))
            try:
                values[i, j] = ncc(w[region], ref[region]).value
            except DegenerateSignalError:
                degenerate[i, j] = True
    if degenerate.any():
        logger.debug('%d of %d windows are degenerate', int(degenerate.sum()), degenerate.size)
    return CorrelationMap(values, window, stride, img.shape, degenerate)


def _box_means(a, tops, lefts, bh, bw):
    s = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    s[1:, 1:] = np.cumsum(np.cumsum(a, axis=0), axis=1)
    t = tops[:, None]
    l = lefts[None, :]
    total = s[t + bh, l + bw] - s[t, l + bw] - s[t + bh, l] + s[t, l]
    return total / float(bh * bw)


def extract_features(img, window=64, stride=8, saturation_level=DEFAULT_SATURATION_LEVEL):
    """
    Content features of every window position.

    - ``mean_intensity``: mean pixel value
    - ``texture``: mean of ``1 / (1 + v)`` with ``v`` the 5x5 local variance
    - ``saturation_fraction``: share of pixels at or above **saturation_level**
    - ``edge_energy``: mean absolute forward difference, averaged over both axes

    **Returns**

        array of shape (rows, cols, 4) in :data:`FEATURE_NAMES` order
    """
    _check_window(img.shape, window, stride)
    x = img.data
    tops = window_starts(img.height, window, stride)
    lefts = window_starts(img.width, window, stride)
    m = ndimage.uniform_filter(x, TEXTURE_NEIGHBOURHOOD, mode='reflect')
    m2 = ndimage.uniform_filter(x * x, TEXTURE_NEIGHBOURHOOD, mode='reflect')
    local_var = np.maximum(m2 - m * m, 0.0)
    gx = np.abs(np.diff(x, axis=1))
    gy = np.abs(np.diff(x, axis=0))
    return np.stack([
        _box_means(x, tops, lefts, window, window),
        _box_means(1.0 / (1.0 + local_var), tops, lefts, window, window),
        _box_means((x >= saturation_level).astype(np.float64), tops, lefts, window, window),
        0.5 * (_box_means(gx, tops, lefts, window, window - 1)
               + _box_means(gy, tops, lefts, window - 1, window)),
    ], axis=-1)


def window_features(pixels, saturation_level=DEFAULT_SATURATION_LEVEL):
    """:class:`FeatureVector` of a single window."""
    pixels = np.asarray(pixels, dtype=np.float64)
    f = extract_features(Image(pixels), min(pixels.shape), 1, saturation_level)[0, 0]
    return FeatureVector(*(float(v) for v in f))


def fit_predictor(features, rhos, feature_names=FEATURE_NAMES):
    """
    Least-squares linear predictor of correlation from window features.

    Falls back to ridge regression with ``lambda = 1e-6 trace(X^T X)`` when
    the design matrix (features plus a constant column) is rank deficient.

    **Arguments**

        - **features** (n, f) array
        - **rhos** n measured correlations

    **Returns**

        :class:`PredictorModel`
    """
    f = np.asarray(features, dtype=np.float64).reshape(len(rhos), -1)
    y = np.asarray(rhos, dtype=np.float64)
    if f.shape[1] != len(feature_names):
        raise DimensionError('%d feature columns for %d names' % (f.shape[1], len(feature_names)))
    p = f.shape[1] + 1
    if len(y) < p:
        raise InsufficientDataError('predictor needs at least %d windows, got %d' % (p, len(y)))
    x = np.hstack([f, np.ones((len(y), 1))])
    ridge = np.linalg.matrix_rank(x) < p
    if ridge:
        gram = x.T @ x
        lam = 1e-6 * np.trace(gram)
        logger.info('design matrix is rank deficient; ridge fallback with lambda %.3g', lam)
        weights = np.linalg.solve(gram + lam * np.eye(p), x.T @ y)
    else:
        weights = np.linalg.lstsq(x, y, rcond=None)[0]
    rms = float(np.sqrt(np.mean((x @ weights - y) ** 2)))
    return PredictorModel(weights, tuple(feature_names), rms, bool(ridge))


def predict_map(model, img, like):
    """Predicted correlation on the geometry of the measured map **like**."""
    f = extract_features(img, like.window, like.stride)
    return like.with_values(np.clip(model.predict(f), -1.0, 1.0))


def delta_map(measured, predicted):
    """Elementwise ``measured - predicted``; strongly negative means the fingerprint is missing."""
    if not measured.same_geometry(predicted) or measured.shape != predicted.shape:
        raise DimensionError('correlation maps differ in geometry')
    return CorrelationMap(measured.values - predicted.values, measured.window, measured.stride,
                          measured.image_shape, measured.degenerate | predicted.degenerate)


def upsample_to_pixels(cmap):
    """
    Per-pixel mean of the values of all windows covering the pixel.

    **Returns**

        (values, coverage count); uncovered pixels hold NaN
    """
    acc = np.zeros(cmap.image_shape)
    count = np.zeros(cmap.image_shape, dtype=np.int64)
    win = cmap.window
    for i, t in enumerate(cmap.tops):
        for j, l in enumerate(cmap.lefts):
            acc[t:t + win, l:l + win] += cmap.values[i, j]
            count[t:t + win, l:l + win] += 1
    out = np.full(cmap.image_shape, np.nan)
    np.divide(acc, count, out=out, where=count > 0)
    return out, count


def pixel_roc(deltas, truths):
    """
    Pixel-level ROC of localization maps, aggregated over probes.

    A pixel is called manipulated when its upsampled delta lies below the
    threshold, so ``-delta`` is the score and the truth mask the positive
    class. Pixels not covered by any window are left out.

    **Arguments**

        - **deltas** :class:`CorrelationMap` or list of them
        - **truths** boolean mask or list of masks, image-sized

    **Returns**

        :class:`spnforensics.detect.RocCurve`
    """
    if isinstance(deltas, CorrelationMap):
        deltas, truths = [deltas], [truths]
    if len(deltas) != len(truths):
        raise DimensionError('%d maps for %d masks' % (len(deltas), len(truths)))
    pos, neg = [], []
    for delta, truth in zip(deltas, truths):
        truth = np.asarray(truth, dtype=bool)
        if truth.shape != delta.image_shape:
            raise DimensionError('mask %s does not match image %s' % (truth.shape, delta.image_shape))
        values, count = upsample_to_pixels(delta)
        covered = count > 0
        pos.append(-values[covered & truth])
        neg.append(-values[covered & ~truth])
    pos, neg = np.concatenate(pos), np.concatenate(neg)
    if pos.size == 0 or neg.size == 0:
        raise InsufficientDataError('pixel ROC needs manipulated and pristine pixels')
    thresholds, tp, fp = roc_counts(pos, neg)
    return RocCurve(fp / float(fp[-1]), tp / float(tp[-1]), thresholds, trapezoid_auc(tp, fp))


def collect_training_windows(images, fp, extractor, window=64, stride=8, max_windows=None, seed=0):
    """
    Features and measured correlations of non-degenerate windows of pristine
    **images**, optionally subsampled to **max_windows**.

    **Returns**

        (features (n, 4), rhos (n,))
    """
    feats, rhos = [], []
    for img in images:
        cmap = sliding_corr(img, fp, extractor, window, stride)
        f = extract_features(img, window, stride)
        ok = ~cmap.degenerate
        feats.append(f[ok])
        rhos.append(cmap.values[ok])
    feats = np.concatenate(feats) if feats else np.zeros((0, len(FEATURE_NAMES)))
    rhos = np.concatenate(rhos) if rhos else np.zeros(0)
    if max_windows is not None and len(rhos) > max_windows:
        pick = np.sort(np.random.default_rng(seed).choice(len(rhos), max_windows, replace=False))
        feats, rhos = feats[pick], rhos[pick]
    logger.info('collected %d training windows from %d images', len(rhos), len(images))
    return feats, rhos


def localization_maps(img, fp, extractor, model, window=64, stride=8):
    """
    **Returns**

        (measured, predicted, delta) :class:`CorrelationMap` triple
    """
    measured = sliding_corr(img, fp, extractor, window, stride)
    predicted = predict_map(model, img, measured)
    return measured, predicted, delta_map(measured, predicted)


def per_image_pixel_auc(probes, masks, fp, extractor, model, window=64, stride=8):
    """Pixel AUC of every probe on its own."""
    aucs = []
    for img, mask in zip(probes, masks):
        delta = localization_maps(img, fp, extractor, model, window, stride)[2]
        aucs.append(pixel_roc(delta, mask).auc)
    return aucs
