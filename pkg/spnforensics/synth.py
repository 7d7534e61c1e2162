"""
Synthetic camera following the multiplicative imaging model
``x = clamp(x_o (1 + k) + theta, 0, 255)``, so fingerprint estimation,
identification, localization and video attribution can all be checked
against a known ground-truth ``k``.
"""
import enum
import logging
from dataclasses import dataclass
import numpy as np
from scipy import ndimage
from .core import Fingerprint, FingerprintKind, Image
from .errors import DataError, DimensionError
from .nputil import zero_mean_rows_cols

__all__ = [
    'SceneKind',
    'SceneModel',
    'SyntheticCamera',
    'TamperMode',
    'Rect',
    'gen_prnu',
    'synthesize',
    'inject_tamper',
    'degrade',
    'synthesize_video',
]

logger = logging.getLogger(__name__)


class SceneKind(enum.Enum):
    FLAT = 'flat'
    GRADIENT = 'gradient'
    TEXTURE = 'texture'


class TamperMode(enum.Enum):
    FOREIGN_CAMERA = 'foreign-camera'
    SMOOTH = 'smooth'


def _value_noise(height, width, octaves, rng):
    # sum of bilinearly interpolated random lattices, finest lattice spacing 4px
    acc = np.zeros((height, width))
    norm = 0.0
    for o in range(octaves):
        cell = 4 * 2 ** (octaves - 1 - o)
        amp = 0.5 ** (octaves - 1 - o)
        grid = rng.uniform(-1.0, 1.0, (height // cell + 2, width // cell + 2))
        yy, xx = np.meshgrid(np.arange(height) / cell, np.arange(width) / cell, indexing='ij')
        acc += amp * ndimage.map_coordinates(grid, [yy, xx], order=1)
        norm += amp
    return acc / norm


@dataclass(frozen=True)
class SceneModel:
    """
    Noise-free scene content ``x_o``.

    ``flat`` is the constant **level**; ``gradient`` ramps linearly from
    **low** to **high** across the width; ``texture`` adds value noise with
    **octaves** lattices and peak deviation **amplitude** around **level**.
    Every rendering is clipped to [0, 255].
    """
    width: int
    height: int
    kind: SceneKind = SceneKind.FLAT
    level: float = 128.0
    low: float = 32.0
    high: float = 224.0
    octaves: int = 4
    amplitude: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', SceneKind(self.kind))
        if self.width < 1 or self.height < 1:
            raise DataError('scene dimensions must be positive')
        if self.kind is SceneKind.TEXTURE and self.octaves < 1:
            raise DataError('texture scenes need at least one octave')

    @property
    def shape(self):
        return (self.height, self.width)

    def render(self, rng=None):
        """Scene raster; only ``texture`` consumes randomness from **rng**."""
        if self.kind is SceneKind.FLAT:
            out = np.full(self.shape, float(self.level))
        elif self.kind is SceneKind.GRADIENT:
            ramp = np.linspace(self.low, self.high, self.width) if self.width > 1 \
                else np.array([self.low], dtype=float)
            out = np.broadcast_to(ramp, self.shape).copy()
        else:
            rng = np.random.default_rng(rng)
            out = self.level + self.amplitude * _value_noise(self.height, self.width, self.octaves, rng)
        return np.clip(out, 0.0, 255.0)


@dataclass(frozen=True, eq=False)
class SyntheticCamera:
    k: Fingerprint
    theta_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.theta_sigma < 0:
            raise DataError('theta_sigma must be non-negative, got %r' % (self.theta_sigma,))
        if abs(float(np.mean(self.k.data, dtype=np.float64))) > 1e-6:
            raise DataError('camera fingerprint must be zero-mean')

    @property
    def shape(self):
        return self.k.shape

    @classmethod
    def random(cls, width, height, strength, theta_sigma=0.0, seed=0):
        """Camera with a freshly drawn :func:`gen_prnu` fingerprint seeded by **seed**."""
        return cls(gen_prnu(width, height, strength, seed), theta_sigma, seed)


def gen_prnu(width, height, strength, seed):
    """
    Ground-truth PRNU factor: i.i.d. N(0, strength^2), then zero-meaned
    along rows and columns.

    **Arguments**

        - **width**, **height** pixels, both >= 1
        - **strength** standard deviation in (0, 0.1]
        - **seed** integer seed

    **Returns**

        :class:`Fingerprint` of kind ``GROUND_TRUTH_K``
    """
    if width < 1 or height < 1:
        raise DataError('fingerprint dimensions must be positive')
    if not 0.0 < strength <= 0.1:
        raise DataError('strength must lie in (0, 0.1], got %r' % (strength,))
    rng = np.random.default_rng(seed)
    field = rng.standard_normal((height, width)) * strength
    return Fingerprint(zero_mean_rows_cols(field), FingerprintKind.GROUND_TRUTH_K)


def synthesize(scene, cam, seed):
    """
    Render one image of **scene** through **cam**.

    **Arguments**

        - **scene** :class:`SceneModel` with the fingerprint's dimensions
        - **cam** :class:`SyntheticCamera`
        - **seed** per-image seed; scene texture and additive noise derive from
          ``(cam.seed, seed)``

    **Returns**

        :class:`Image`
    """
    if scene.shape != cam.shape:
        raise DimensionError('scene %s and camera fingerprint %s differ in shape'
                             % (scene.shape, cam.shape))
    scene_ss, noise_ss = np.random.SeedSequence([cam.seed, seed]).spawn(2)
    xo = scene.render(np.random.default_rng(scene_ss))
    x = xo * (1.0 + cam.k.data.astype(np.float64))
    if cam.theta_sigma > 0:
        x = x + np.random.default_rng(noise_ss).standard_normal(x.shape) * cam.theta_sigma
    return Image(np.clip(x, 0.0, 255.0))


@dataclass(frozen=True)
class Rect:
    top: int
    left: int
    height: int
    width: int

    @property
    def area(self):
        return self.height * self.width

    @property
    def slices(self):
        return (slice(self.top, self.top + self.height), slice(self.left, self.left + self.width))

    def within(self, shape):
        h, w = shape
        return (self.top >= 0 and self.left >= 0 and self.height >= 0 and self.width >= 0
                and self.top + self.height <= h and self.left + self.width <= w)

    @classmethod
    def centered(cls, shape, area_fraction):
        """Centered square-ish region covering about **area_fraction** of **shape**."""
        h, w = shape
        rh = int(round(h * np.sqrt(area_fraction)))
        rw = int(round(w * np.sqrt(area_fraction)))
        return cls((h - rh) // 2, (w - rw) // 2, rh, rw)


def inject_tamper(img, rect, mode, donor=None, blur_sigma=3.0):
    """
    Replace **rect** of **img**.

    **Arguments**

        - **img** :class:`Image`
        - **rect** :class:`Rect` inside the image
        - **mode** ``'foreign-camera'`` pastes the same region of **donor**
          (an image taken by a different camera); ``'smooth'`` pastes a
          Gaussian-blurred copy of the image itself.
        - **donor** :class:`Image` with the dimensions of **img**
        - **blur_sigma** Gaussian width for ``'smooth'``. Default 3.

    **Returns**

        (tampered :class:`Image`, boolean mask true inside **rect**)
    """
    mode = TamperMode(mode)
    if not rect.within(img.shape):
        raise DataError('tamper region %s outside a %dx%d image' % (rect, img.height, img.width))
    mask = np.zeros(img.shape, dtype=bool)
    if rect.area == 0:
        return img, mask
    mask[rect.slices] = True
    out = img.data.copy()
    if mode is TamperMode.FOREIGN_CAMERA:
        if donor is None:
            raise DataError('foreign-camera tampering needs a donor image')
        if donor.shape != img.shape:
            raise DimensionError('donor %s and image %s differ in shape' % (donor.shape, img.shape))
        out[rect.slices] = donor.data[rect.slices]
    else:
        out[rect.slices] = ndimage.gaussian_filter(img.data, blur_sigma, mode='reflect')[rect.slices]
    return Image(out, img.color_origin), mask


def degrade(img, blur_sigma=0.0, quant_step=1.0):
    """
    Compression-like damage: optional Gaussian blur, then quantization of
    intensities to multiples of **quant_step**.
    """
    if blur_sigma < 0 or quant_step <= 0:
        raise DataError('blur_sigma must be >= 0 and quant_step > 0')
    x = img.data
    if blur_sigma > 0:
        x = ndimage.gaussian_filter(x, blur_sigma, mode='reflect')
    if quant_step != 1.0 or blur_sigma > 0:
        x = np.rint(x / quant_step) * quant_step
    return Image(np.clip(x, 0.0, 255.0), img.color_origin)


def synthesize_video(scene, cam, n_frames, seed, gop=10, other_blur=0.6, other_quant=6.0):
    """
    Frames of a synthetic video taken by **cam** (whose fingerprint already
    has video geometry).

    Every **gop**-th frame, starting with the first, is an ``'I'`` frame and
    left untouched; the remaining frames pass through :func:`degrade` with
    **other_blur** and **other_quant**.

    **Returns**

        (list of :class:`Image`, list of frame types)
    """
    if n_frames < 0 or gop < 1:
        raise DataError('n_frames must be >= 0 and gop >= 1')
    frames, types = [], []
    children = np.random.SeedSequence([cam.seed, seed]).spawn(n_frames)
    for i, child in enumerate(children):
        img = synthesize(scene, cam, int(child.generate_state(1)[0]))
        if i % gop == 0:
            types.append('I')
        else:
            img = degrade(img, other_blur, other_quant)
            types.append('other')
        frames.append(img)
    logger.debug('synthesized %d video frames (%d I-frames)', n_frames, types.count('I'))
    return frames, types
