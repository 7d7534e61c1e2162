"""
Wavelet-domain local Wiener denoiser and noise residuals.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Tuple
import numpy as np
import pywt
from scipy import ndimage
from .core import FingerprintKind, Image, NoiseResidual
from .errors import DataError, DimensionError, ShallowDecompositionWarning

__all__ = [
    'WaveletDenoiserConfig',
    'wavelet_decompose',
    'wavelet_reconstruct',
    'wavelet_denoise',
    'WaveletDenoiser',
    'residual',
    'WaveletExtractor',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WaveletDenoiserConfig:
    levels: int = 4
    sigma0: float = 3.0
    window_sizes: Tuple[int, ...] = (3, 5, 7, 9)
    wavelet: str = 'db8'
    mode: str = 'symmetric'

    def __post_init__(self):
        object.__setattr__(self, 'window_sizes', tuple(int(w) for w in self.window_sizes))
        if self.levels < 1:
            raise DataError('levels must be >= 1, got %r' % (self.levels,))
        if not self.sigma0 > 0:
            raise DataError('sigma0 must be positive, got %r' % (self.sigma0,))
        if not self.window_sizes:
            raise DataError('at least one window size is required')
        for w in self.window_sizes:
            if w < 3 or w % 2 == 0:
                raise DataError('window sizes must be odd and >= 3, got %r' % (w,))


def _check_depth(shape, cfg):
    need = 2 ** cfg.levels
    if min(shape) < need:
        raise DimensionError('a %dx%d image is too small for %d decomposition levels (needs %d)'
                             % (shape[0], shape[1], cfg.levels, need))
    filt = pywt.Wavelet(cfg.wavelet).dec_len
    if cfg.levels > min(pywt.dwt_max_level(n, filt) for n in shape):
        warnings.warn(ShallowDecompositionWarning(
            '%dx%d image is smaller than the %s support at level %d; coarse bands are mostly boundary'
            % (shape[0], shape[1], cfg.wavelet, cfg.levels)))


def wavelet_decompose(a, cfg=WaveletDenoiserConfig()):
    """
    Multi-level 2-D decomposition ``[cA_n, (cH_n, cV_n, cD_n), ..., (cH_1, cV_1, cD_1)]``.
    """
    a = np.asarray(a, dtype=np.float64)
    _check_depth(a.shape, cfg)
    with warnings.catch_warnings():
        # depth is validated above
        warnings.simplefilter('ignore', UserWarning)
        return pywt.wavedec2(a, cfg.wavelet, mode=cfg.mode, level=cfg.levels)


def wavelet_reconstruct(coeffs, shape, cfg=WaveletDenoiserConfig()):
    """Inverse of :func:`wavelet_decompose`, cropped to **shape**."""
    out = pywt.waverec2(coeffs, cfg.wavelet, mode=cfg.mode)
    return out[:shape[0], :shape[1]]


def _wiener_band(c, cfg):
    s0 = cfg.sigma0 ** 2
    sq = c * c
    local = np.min([ndimage.uniform_filter(sq, size=w, mode='reflect') for w in cfg.window_sizes], axis=0)
    var = np.maximum(local - s0, 0.0)
    return c * (var / (var + s0))


def wavelet_denoise(img, cfg=WaveletDenoiserConfig()):
    """
    Attenuate every detail coefficient by the local Wiener factor
    ``s2 / (s2 + sigma0^2)``, where ``s2`` is the smallest local second
    moment over **cfg.window_sizes** less ``sigma0^2`` (floored at zero).
    The approximation band passes through unchanged.

    **Arguments**

        - **img** :class:`Image`, at least ``2**levels`` pixels on each side
        - **cfg** :class:`WaveletDenoiserConfig`

    **Returns**

        denoised :class:`Image` (clipped to [0, 255])
    """
    coeffs = wavelet_decompose(img.data, cfg)
    out = [coeffs[0]]
    for bands in coeffs[1:]:
        out.append(tuple(_wiener_band(c, cfg) for c in bands))
    den = wavelet_reconstruct(out, img.shape, cfg)
    return Image(np.clip(den, 0.0, 255.0), img.color_origin)


class WaveletDenoiser(object):
    def __init__(self, cfg=None):
        self.cfg = cfg if cfg is not None else WaveletDenoiserConfig()

    def __call__(self, img):
        return wavelet_denoise(img, self.cfg)

    def __repr__(self):
        return 'WaveletDenoiser(%r)' % (self.cfg,)


def residual(img, denoiser=None):
    """
    Noise residual ``w = x - F(x)``.

    **Arguments**

        - **img** :class:`Image`
        - **denoiser** callable Image -> Image. Default :class:`WaveletDenoiser`.
    """
    if denoiser is None:
        denoiser = WaveletDenoiser()
    return NoiseResidual(img.data - denoiser(img).data)


class WaveletExtractor(object):
    """Residual extractor backed by :func:`wavelet_denoise`."""
    name = 'wavelet'
    fingerprint_kind = FingerprintKind.MLE_ESTIMATE
    modulated = True

    def __init__(self, cfg=None):
        self.denoiser = WaveletDenoiser(cfg)

    def __call__(self, img):
        return residual(img, self.denoiser)
