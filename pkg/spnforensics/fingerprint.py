"""
Maximum-likelihood PRNU estimation ``k = sum(w x) / sum(x^2)`` and cleanup
of non-unique artifacts.
"""
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional
import numpy as np
from scipy import ndimage
from .core import Fingerprint, FingerprintKind, Image, saturation_mask
from .errors import InsufficientDataError, SaturationWarning
from .io import load_image
from .nputil import require_same_shape, zero_mean_rows_cols

__all__ = [
    'MLE_EPSILON',
    'MleAccumulator',
    'mle_absorb',
    'mle_finalize',
    'clean_nua',
    'mle_weights',
    'estimate_fingerprint',
]

logger = logging.getLogger(__name__)

MLE_EPSILON = 1e-6
SATURATED_IMAGE_FRACTION = 0.5


@dataclass
class MleAccumulator:
    """
    Running per-pixel sums of ``w x`` and ``x^2``. The grid is fixed by the
    first absorbed image.
    """
    numerator: Optional[np.ndarray] = None
    denominator: Optional[np.ndarray] = None
    count: int = 0

    @property
    def shape(self):
        return None if self.numerator is None else self.numerator.shape

    def absorb(self, img, w):
        x = img.data if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
        wd = w.data if hasattr(w, 'data') else np.asarray(w, dtype=np.float64)
        require_same_shape(x, wd, what='image and residual')
        if self.numerator is None:
            self.numerator = np.zeros(x.shape)
            self.denominator = np.zeros(x.shape)
        else:
            require_same_shape(self.numerator, x, what='accumulator and image')
        self.numerator += wd * x
        self.denominator += x * x
        self.count += 1
        return self

    def merge(self, other):
        """Elementwise sum of two accumulators, as a new accumulator."""
        if other.count == 0:
            return MleAccumulator(None if self.numerator is None else self.numerator.copy(),
                                  None if self.denominator is None else self.denominator.copy(),
                                  self.count)
        if self.count == 0:
            return other.merge(self)
        require_same_shape(self.numerator, other.numerator, what='accumulators')
        return MleAccumulator(self.numerator + other.numerator,
                              self.denominator + other.denominator,
                              self.count + other.count)

    def finalize(self, eps=MLE_EPSILON, kind=FingerprintKind.MLE_ESTIMATE):
        if self.count < 1:
            raise InsufficientDataError('cannot finalize an empty accumulator')
        k = np.zeros(self.numerator.shape)
        np.divide(self.numerator, self.denominator, out=k, where=self.denominator >= eps)
        return Fingerprint(k, kind)


def mle_absorb(acc, img, w):
    """
    Add one image and its residual to **acc** (in place).

    **Returns**

        **acc**
    """
    return acc.absorb(img, w)


def mle_finalize(acc, eps=MLE_EPSILON, kind=FingerprintKind.MLE_ESTIMATE):
    """
    ``numerator / denominator`` per pixel; pixels whose denominator is below
    **eps** are set to 0.
    """
    return acc.finalize(eps, kind)


def _dft_wiener(a):
    # keep the noise-like part of every Fourier magnitude: peaks standing out
    # of their local spectral neighbourhood are shrunk towards it
    noise_var = a.var()
    if noise_var <= 0:
        return a
    spectrum = np.fft.fft2(a)
    mag = np.abs(spectrum) / np.sqrt(a.size)
    sq = mag * mag
    local = np.min([ndimage.uniform_filter(sq, size=s, mode='wrap') for s in (3, 5, 7, 9)], axis=0)
    est = np.maximum(local - noise_var, 0.0)
    return np.real(np.fft.ifft2(spectrum * (noise_var / (est + noise_var))))


def clean_nua(fp, wiener=False):
    """
    Remove non-unique artifacts from **fp**.

    Every row is made zero-mean, then every column. With **wiener** the
    result is additionally filtered in the Fourier domain so that magnitude
    peaks are suppressed down to their local average.
    """
    a = zero_mean_rows_cols(fp.data)
    if wiener:
        a = _dft_wiener(a)
    return Fingerprint(a, fp.kind)


def _as_image(item):
    if isinstance(item, Image):
        return item
    return load_image(item)


def mle_weights(img, extractor):
    """
    Per-pixel intensities paired with the extractor's residual in the MLE.

    Extractors whose output is modulated by scene content (``w = k x``) use
    the image itself; extractors that estimate ``k`` directly use unit weights,
    which makes the estimate a plain average.
    """
    if getattr(extractor, 'modulated', True):
        return img.data
    return np.ones(img.shape)


def _residual_pair(item, extractor):
    img = _as_image(item)
    if saturation_mask(img).fraction > SATURATED_IMAGE_FRACTION:
        name = item if isinstance(item, (str, os.PathLike)) else 'image'
        warnings.warn(SaturationWarning('%s is mostly saturated' % (name,)))
    return mle_weights(img, extractor), extractor(img)


def estimate_fingerprint(images, extractor=None, threads=1, clean=True, wiener=False,
                         kind=None):
    """
    Fingerprint of the camera that took **images**.

    **Arguments**

        - **images** iterable of :class:`Image` or image paths
        - **extractor** callable Image -> NoiseResidual.
          Default :class:`spnforensics.denoise.WaveletExtractor`.
        - **threads** worker threads for residual extraction. Absorption
          order is fixed, so the result does not depend on it.
        - **clean** apply :func:`clean_nua`. Default True.
        - **wiener** Fourier-domain step of :func:`clean_nua`. Default False.
        - **kind** fingerprint kind; default is the extractor's
          ``fingerprint_kind`` (``MLE_ESTIMATE`` when absent)

    **Returns**

        (:class:`Fingerprint`, :class:`MleAccumulator`)
    """
    if extractor is None:
        from .denoise import WaveletExtractor
        extractor = WaveletExtractor()
    if kind is None:
        kind = getattr(extractor, 'fingerprint_kind', FingerprintKind.MLE_ESTIMATE)
    items = list(images)
    acc = MleAccumulator()
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        step = max(1, 2 * int(threads))
        for start in range(0, len(items), step):
            chunk = items[start:start + step]
            for x, w in pool.map(lambda it: _residual_pair(it, extractor), chunk):
                acc.absorb(x, w)
                logger.debug('absorbed image %d/%d', acc.count, len(items))
    fp = acc.finalize(kind=kind)
    if clean:
        fp = clean_nua(fp, wiener)
    logger.info('estimated %dx%d fingerprint from %d images', fp.width, fp.height, acc.count)
    return fp, acc
