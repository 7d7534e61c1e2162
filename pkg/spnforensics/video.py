"""
Video source attribution from frames stored as image files: mapping a
still-image fingerprint onto the video grid, per-frame scores and
multi-frame aggregation.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple
import numpy as np
from scipy import ndimage
from .core import Fingerprint, Image
from .detect import modulate, pce
from .errors import DataError, DimensionError, InsufficientDataError
from .fingerprint import MleAccumulator, clean_nua, estimate_fingerprint, mle_weights
from .io import list_images, load_image, read_csv
from .nputil import block_mean

__all__ = [
    'FRAME_TYPES',
    'FrameSet',
    'FrameScore',
    'AlignmentParams',
    'align_fingerprint',
    'aggregate_video_fp',
    'pce_vs_n',
    'per_frame_scores',
]

logger = logging.getLogger(__name__)

FRAME_TYPES = ('I', 'other')


@dataclass
class FrameSet:
    """
    Frames in temporal order, each an :class:`Image` or an image path, with
    optional per-frame types (``'I'`` or ``'other'``).
    """
    frames: list
    frame_types: Optional[List[str]] = None
    _shape: Optional[Tuple[int, int]] = field(default=None, repr=False)

    def __post_init__(self):
        self.frames = list(self.frames)
        if self.frame_types is not None:
            self.frame_types = list(self.frame_types)
            if len(self.frame_types) != len(self.frames):
                raise DimensionError('%d frame types for %d frames' % (len(self.frame_types), len(self.frames)))
            bad = set(self.frame_types) - set(FRAME_TYPES)
            if bad:
                raise DataError('unknown frame types %s' % sorted(bad))

    def __len__(self):
        return len(self.frames)

    @property
    def shape(self):
        if self._shape is None and self.frames:
            self._shape = self.load(0).shape
        return self._shape

    def load(self, i):
        item = self.frames[i]
        img = item if isinstance(item, Image) else load_image(item)
        if self._shape is not None and img.shape != self._shape:
            raise DimensionError('frame %d is %s, expected %s' % (i, img.shape, self._shape))
        if self._shape is None:
            self._shape = img.shape
        return img

    def frame_type(self, i):
        return self.frame_types[i] if self.frame_types is not None else 'all'

    def head(self, n):
        types = None if self.frame_types is None else self.frame_types[:n]
        return FrameSet(self.frames[:n], types, self._shape)

    @classmethod
    def from_directory(cls, directory, sidecar=None):
        """
        Frames of **directory** in file-name order. **sidecar** is a CSV with
        columns ``frame_index, frame_type``; frames it does not list are
        ``'other'``.
        """
        paths = list_images(directory)
        types = None
        if sidecar is None and os.path.exists(os.path.join(directory, 'frames.csv')):
            sidecar = os.path.join(directory, 'frames.csv')
        if sidecar is not None:
            types = ['other'] * len(paths)
            for row in read_csv(sidecar):
                idx = int(row['frame_index'])
                if not 0 <= idx < len(paths):
                    raise DataError('%s: frame index %d out of range' % (sidecar, idx))
                types[idx] = row['frame_type'].strip()
        return cls(paths, types)


@dataclass(frozen=True)
class AlignmentParams:
    """
    Still-to-video geometry: crop **crop_size** at **crop_offset** (both
    (rows, cols) in still pixels), then resize by **scale**.
    """
    crop_offset: Tuple[int, int] = (0, 0)
    crop_size: Optional[Tuple[int, int]] = None
    scale: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, 'scale', Fraction(self.scale).limit_denominator(10000))
        if self.scale <= 0:
            raise DataError('scale must be positive')

    @classmethod
    def centered(cls, still_shape, crop_size, scale=Fraction(1)):
        h, w = still_shape
        ch, cw = crop_size
        return cls(((h - ch) // 2, (w - cw) // 2), (ch, cw), scale)

    def crop_for(self, still_shape):
        size = tuple(self.crop_size) if self.crop_size is not None else tuple(still_shape)
        top, left = self.crop_offset
        if top < 0 or left < 0 or top + size[0] > still_shape[0] or left + size[1] > still_shape[1]:
            raise DataError('crop %s at %s does not fit a %s still' % (size, self.crop_offset, still_shape))
        return top, left, size

    def video_shape(self, still_shape):
        _, _, (ch, cw) = self.crop_for(still_shape)
        vh, vw = ch * self.scale, cw * self.scale
        if vh.denominator != 1 or vw.denominator != 1:
            raise DataError('crop %dx%d scaled by %s is not a whole number of pixels' % (ch, cw, self.scale))
        return int(vh), int(vw)


def align_fingerprint(fp_still, params, video_shape=None):
    """
    Map a still-image fingerprint onto the video grid: crop, then downscale
    by block averaging when ``1 / scale`` is an integer, or resample
    bilinearly otherwise.
    """
    top, left, (ch, cw) = params.crop_for(fp_still.shape)
    out_shape = params.video_shape(fp_still.shape)
    if video_shape is not None and tuple(video_shape) != out_shape:
        raise DimensionError('alignment yields %s, video frames are %s' % (out_shape, tuple(video_shape)))
    crop = fp_still.data[top:top + ch, left:left + cw].astype(np.float64)
    inv = 1 / params.scale
    if params.scale == 1:
        data = crop
    elif inv.denominator == 1:
        data = block_mean(crop, int(inv), int(inv))
    else:
        data = ndimage.zoom(crop, (out_shape[0] / ch, out_shape[1] / cw), order=1, mode='nearest')
        if data.shape != out_shape:
            raise DimensionError('resampling produced %s instead of %s' % (data.shape, out_shape))
    return Fingerprint(data, fp_still.kind)


def aggregate_video_fp(frames, extractor, first_n=None, threads=1, clean=True):
    """
    MLE fingerprint of the first **first_n** frames (all by default), with
    residuals from **extractor**; identical to
    :func:`spnforensics.fingerprint.estimate_fingerprint` on those frames.
    """
    n = len(frames) if first_n is None else first_n
    if n < 1 or len(frames) == 0:
        raise InsufficientDataError('no frames to aggregate')
    if n > len(frames):
        raise DataError('first_n %d exceeds the %d available frames' % (n, len(frames)))
    imgs = (frames.load(i) for i in range(n))
    return estimate_fingerprint(imgs, extractor, threads=threads, clean=clean)[0]


def pce_vs_n(frames, fp_video, extractor, n_grid, clean=True):
    """
    PCE between the aggregate of the first N frames and **fp_video**, for
    each N of the increasing **n_grid**. Frames are absorbed once.

    **Returns**

        list of (N, pce)
    """
    grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(grid[:-1], grid[1:])) or (grid and grid[0] < 1):
        raise DataError('n_grid must be positive and strictly increasing, got %s' % (grid,))
    if grid and grid[-1] > len(frames):
        raise DataError('n_grid reaches %d but only %d frames exist' % (grid[-1], len(frames)))
    kind = getattr(extractor, 'fingerprint_kind', fp_video.kind)
    acc = MleAccumulator()
    curve = []
    for n in grid:
        while acc.count < n:
            img = frames.load(acc.count)
            acc.absorb(mle_weights(img, extractor), extractor(img))
        agg = acc.finalize(kind=kind)
        if clean:
            agg = clean_nua(agg)
        curve.append((n, pce(agg, fp_video).value))
        logger.debug('N=%d: pce %.4g', n, curve[-1][1])
    return curve


@dataclass(frozen=True)
class FrameScore:
    index: int
    frame_type: str
    pce: float


def per_frame_scores(frames, fp_video, extractor, threads=1):
    """
    PCE of every frame's residual against **fp_video** (modulated by the
    frame for intensity-scaled extractors).

    **Returns**

        (list of :class:`FrameScore`, dict frame type -> mean PCE); the
        summary has the single group ``'all'`` for untyped frames.
    """
    modulated = getattr(extractor, 'modulated', True)

    def score(i):
        img = frames.load(i)
        ref = modulate(fp_video, img) if modulated else fp_video
        return FrameScore(i, frames.frame_type(i), pce(extractor(img), ref).value)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        scores = list(pool.map(score, range(len(frames))))
    summary = {}
    for t in sorted(set(s.frame_type for s in scores)):
        summary[t] = float(np.mean([s.pce for s in scores if s.frame_type == t]))
    return scores, summary
