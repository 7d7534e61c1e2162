"""
Shared raster containers.

All containers wrap a read-only 2-D numpy array in row-major (height, width)
order. Images carry intensities in [0, 255] as float64, fingerprints carry
dimensionless multiplicative factors as float32 (their on-disk precision).
"""
import enum
from dataclasses import dataclass
import numpy as np
from .errors import DataError, DimensionError

__all__ = [
    'ColorOrigin',
    'FingerprintKind',
    'Image',
    'Fingerprint',
    'NoiseResidual',
    'SaturationMask',
    'DEFAULT_SATURATION_LEVEL',
    'saturation_mask',
]

DEFAULT_SATURATION_LEVEL = 253.0


class ColorOrigin(enum.Enum):
    NATIVE_GRAY = 'native-gray'
    LUMA_CONVERTED = 'luma-converted'


class FingerprintKind(enum.IntEnum):
    GROUND_TRUTH_K = 0
    MLE_ESTIMATE = 1
    CNN_AGGREGATE = 2


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    if a.ndim != 2:
        raise DimensionError('expected a 2-D raster, got shape %s' % (a.shape,))
    a.flags.writeable = False
    return a


class _Raster(object):
    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True, eq=False)
class Image(_Raster):
    data: np.ndarray
    color_origin: ColorOrigin = ColorOrigin.NATIVE_GRAY

    def __post_init__(self):
        data = _frozen(self.data, np.float64)
        if not np.all(np.isfinite(data)):
            raise DataError('image contains non-finite intensities')
        if data.size and (data.min() < 0.0 or data.max() > 255.0):
            raise DataError('image intensities outside [0, 255]')
        object.__setattr__(self, 'data', data)

    def crop(self, top, left, height, width):
        return Image(self.data[top:top + height, left:left + width], self.color_origin)


@dataclass(frozen=True, eq=False)
class Fingerprint(_Raster):
    data: np.ndarray
    kind: FingerprintKind = FingerprintKind.MLE_ESTIMATE

    def __post_init__(self):
        data = _frozen(self.data, np.float32)
        if not np.all(np.isfinite(data)):
            raise DataError('fingerprint contains non-finite values')
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'kind', FingerprintKind(self.kind))

    def crop(self, top, left, height, width):
        return Fingerprint(self.data[top:top + height, left:left + width], self.kind)


@dataclass(frozen=True, eq=False)
class NoiseResidual(_Raster):
    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data, np.float64)
        if not np.all(np.isfinite(data)):
            raise DataError('noise residual contains non-finite values')
        object.__setattr__(self, 'data', data)

    def crop(self, top, left, height, width):
        return NoiseResidual(self.data[top:top + height, left:left + width])


@dataclass(frozen=True, eq=False)
class SaturationMask(_Raster):
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'data', _frozen(self.data, bool))

    @property
    def fraction(self):
        return float(self.data.mean()) if self.data.size else 0.0


def saturation_mask(img, level=DEFAULT_SATURATION_LEVEL):
    """
    Flag pixels at or above **level**.

    **Arguments**

        - **img** :class:`Image`
        - **level** intensity in (0, 255]. Default 253.

    **Returns**

        :class:`SaturationMask`, true where saturated.
    """
    if not 0.0 < level <= 255.0:
        raise DataError('saturation level must lie in (0, 255], got %r' % (level,))
    return SaturationMask(img.data >= level)
