"""
Camera-specific fingerprint extractor: a plain stack of 3x3 convolutions
trained to map single image patches onto the co-located crop of the
camera's MLE fingerprint.
"""
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Tuple
import numpy as np
from .core import DEFAULT_SATURATION_LEVEL, FingerprintKind, NoiseResidual, saturation_mask
from .errors import DataError, DimensionError, FewPatchesWarning, InsufficientDataError, NumericError
from .nn import (EVAL, TRAIN, AdamState, BatchNormLayer, Block, ConvLayer, Network,
                 adam_step, backward, flatten_grads, forward, mse_loss)

__all__ = [
    'SpnCnnConfig',
    'PatchSet',
    'TileConfig',
    'EpochRecord',
    'build_spncnn',
    'parameter_count',
    'sample_patches',
    'train',
    'train_gaussian_baseline',
    'extract',
    'SpnCnnExtractor',
    'GaussianBaselineExtractor',
]

logger = logging.getLogger(__name__)

INPUT_SCALE = 255.0
DECAY_MODES = ('lr', 'l2')


@dataclass(frozen=True)
class SpnCnnConfig:
    """
    Architecture and training parameters.

    ``lr_decay`` multiplies the learning rate every ``decay_period`` epochs
    when ``decay_mode`` is ``'lr'``; with ``'l2'`` the learning rate stays
    fixed and ``lr_decay`` is the L2 weight-decay coefficient instead.
    Targets are multiplied by ``target_gain`` during training.
    """
    depth: int = 17
    width: int = 64
    patch: int = 40
    batch: int = 128
    epochs: int = 100
    lr: float = 1e-3
    lr_decay: float = 0.2
    decay_period: int = 30
    decay_mode: str = 'lr'
    max_patches_per_image: int = 1000
    max_saturated_fraction: float = 0.01
    saturation_level: float = DEFAULT_SATURATION_LEVEL
    target_gain: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.depth < 3:
            raise DataError('depth must be >= 3, got %r' % (self.depth,))
        if self.width < 1:
            raise DataError('width must be >= 1, got %r' % (self.width,))
        if self.patch < 8:
            raise DataError('patch must be >= 8, got %r' % (self.patch,))
        if self.batch < 1 or self.epochs < 0 or self.decay_period < 1:
            raise DataError('batch and decay_period must be >= 1 and epochs >= 0')
        if not 0.0 < self.lr_decay <= 1.0:
            raise DataError('lr_decay must lie in (0, 1], got %r' % (self.lr_decay,))
        if self.decay_mode not in DECAY_MODES:
            raise DataError('decay_mode must be one of %s' % (DECAY_MODES,))
        if not self.lr > 0 or not self.target_gain > 0:
            raise DataError('lr and target_gain must be positive')
        if self.max_patches_per_image < 1:
            raise DataError('max_patches_per_image must be >= 1')

    def learning_rate(self, epoch):
        """Learning rate of 1-based **epoch**."""
        if self.decay_mode == 'l2':
            return self.lr
        return self.lr * self.lr_decay ** ((epoch - 1) // self.decay_period)

    @property
    def weight_decay(self):
        return self.lr_decay if self.decay_mode == 'l2' else 0.0


@dataclass(frozen=True)
class TileConfig:
    tile: int = 400
    overlap: int = 20

    def __post_init__(self):
        if self.tile < 1 or self.overlap < 0:
            raise DataError('tile must be positive and overlap non-negative')
        if self.overlap >= self.tile:
            raise DataError('overlap %d must be smaller than tile %d' % (self.overlap, self.tile))


@dataclass
class PatchSet:
    """
    Training patches of one epoch: (n, patch, patch) intensity inputs,
    matching fingerprint crops and ``(image_index, top, left)`` per patch.
    """
    inputs: np.ndarray
    targets: np.ndarray
    coords: List[Tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.inputs) != len(self.targets) or len(self.inputs) != len(self.coords):
            raise DimensionError('inputs, targets and coordinates differ in count')

    def __len__(self):
        return len(self.inputs)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_loss: float
    lr: float
    n_patches: int


def build_spncnn(cfg=SpnCnnConfig(), rng=None):
    """
    Fresh network: conv(1->width)+ReLU, then depth-2 blocks of
    conv(width->width)+BN+ReLU, then conv(width->1).

    Kernels are He-normal from **rng** (default: seeded by ``cfg.seed``).
    """
    rng = np.random.default_rng(cfg.seed if rng is None else rng)
    blocks = [Block(ConvLayer.he_normal(1, cfg.width, rng), None, True)]
    for _ in range(cfg.depth - 2):
        blocks.append(Block(ConvLayer.he_normal(cfg.width, cfg.width, rng),
                            BatchNormLayer.fresh(cfg.width), True))
    blocks.append(Block(ConvLayer.he_normal(cfg.width, 1, rng), None, False))
    return Network(blocks)


def parameter_count(net):
    """Stored values: kernels, biases and the four batch-norm vectors."""
    n = 0
    for block in net.blocks:
        n += block.conv.kernels.size + block.conv.bias.size
        if block.bn is not None:
            n += 4 * block.bn.channels
    return n


def _sample_image(img, sat, fp_data, cfg, rng, index):
    p = cfg.patch
    h, w = img.shape
    if h < p or w < p:
        raise DimensionError('image %d (%dx%d) is smaller than a %dx%d patch' % (index, h, w, p, p))
    occupied = np.zeros((h, w), dtype=bool)
    limit = int(cfg.max_saturated_fraction * p * p)
    inputs, targets, coords = [], [], []
    for _ in range(3 * cfg.max_patches_per_image):
        if len(coords) >= cfg.max_patches_per_image:
            break
        top = int(rng.integers(0, h - p + 1))
        left = int(rng.integers(0, w - p + 1))
        region = (slice(top, top + p), slice(left, left + p))
        if occupied[region].any():
            continue
        if np.count_nonzero(sat[region]) > limit:
            continue
        occupied[region] = True
        inputs.append(img.data[region])
        targets.append(fp_data[region] if fp_data is not None else np.zeros((p, p), dtype=np.float32))
        coords.append((index, top, left))
    return inputs, targets, coords


def sample_patches(images, fp, cfg, epoch_seed):
    """
    Greedy non-overlapping random patches from every image.

    Per image, positions are drawn until ``max_patches_per_image`` are
    accepted or ``3 * max_patches_per_image`` draws are spent. A draw is
    rejected when it overlaps an accepted patch or when more than
    ``max_saturated_fraction`` of its pixels are saturated.

    **Arguments**

        - **images** list of :class:`Image` on the grid of **fp**
        - **fp** :class:`Fingerprint` supplying the targets, or None for
          zero targets
        - **cfg** :class:`SpnCnnConfig`
        - **epoch_seed** seed of this sampling round

    **Returns**

        :class:`PatchSet`
    """
    fp_data = None
    if fp is not None:
        fp_data = fp.data
        for i, img in enumerate(images):
            if img.shape != fp.shape:
                raise DimensionError('image %d %s is not on the fingerprint grid %s' % (i, img.shape, fp.shape))
    streams = np.random.SeedSequence([cfg.seed, epoch_seed]).spawn(len(images))
    inputs, targets, coords = [], [], []
    for i, (img, ss) in enumerate(zip(images, streams)):
        sat = saturation_mask(img, cfg.saturation_level).data
        a, b, c = _sample_image(img, sat, fp_data, cfg, np.random.default_rng(ss), i)
        inputs += a
        targets += b
        coords += c
    p = cfg.patch
    if inputs:
        ps = PatchSet(np.stack(inputs), np.stack(targets).astype(np.float32), coords)
    else:
        ps = PatchSet(np.zeros((0, p, p)), np.zeros((0, p, p), dtype=np.float32), [])
    logger.debug('sampled %d patches from %d images', len(ps), len(images))
    return ps


def _fit(net, images, fp, cfg, progress, make_batch):
    net = net.copy()
    params = net.parameters()
    state = AdamState.for_params(params, lr=cfg.lr)
    history = []
    warned = False
    for epoch in range(1, cfg.epochs + 1):
        ps = sample_patches(images, fp, cfg, epoch)
        n = len(ps)
        if n == 0:
            raise InsufficientDataError('no usable training patches in epoch %d' % epoch)
        if n < cfg.batch and not warned:
            warnings.warn(FewPatchesWarning('only %d patches for a batch of %d' % (n, cfg.batch)))
            warned = True
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, epoch, 1]))
        order = rng.permutation(n)
        state.lr = cfg.learning_rate(epoch)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch)):
            idx = order[start:start + cfg.batch]
            x, t = make_batch(ps, idx, rng)
            out, tape = forward(net, x, TRAIN)
            loss, g = mse_loss(out, t)
            if not np.isfinite(loss):
                raise NumericError('non-finite loss in epoch %d, batch %d' % (epoch, b), epoch, b)
            grads, _ = backward(tape, g)
            try:
                adam_step(params, flatten_grads(grads), state, cfg.weight_decay)
            except NumericError as exc:
                raise NumericError('%s (epoch %d, batch %d)' % (exc, epoch, b), epoch, b)
            total += loss * len(idx)
        record = EpochRecord(epoch, total / n, state.lr, n)
        history.append(record)
        logger.info('epoch %d: loss %.6g, lr %.3g, %d patches', epoch, record.mean_loss, record.lr, n)
        if progress is not None:
            progress(record)
    return net, history


def train(net, images, fp, cfg=SpnCnnConfig(), progress=None):
    """
    Fit **net** so that patches of **images** map onto the co-located crops
    of **fp**. Inputs are scaled to [0, 1]; targets stay in fingerprint units
    (times ``cfg.target_gain``).

    Patches are resampled every epoch, shuffled and fed in minibatches of
    ``cfg.batch`` to Adam on the MSE loss. The run is deterministic in
    ``cfg.seed``; **net** itself is left untouched.

    **Arguments**

        - **net** :class:`Network`, usually from :func:`build_spncnn`
        - **images** list of :class:`Image` aligned with **fp**
        - **fp** target :class:`Fingerprint`
        - **cfg** :class:`SpnCnnConfig`
        - **progress** optional callable receiving each :class:`EpochRecord`

    **Returns**

        (trained :class:`Network`, list of :class:`EpochRecord`)
    """
    dtype = net.dtype

    def make_batch(ps, idx, rng):
        x = (ps.inputs[idx] / INPUT_SCALE).astype(dtype)[:, None]
        t = (ps.targets[idx].astype(np.float64) * cfg.target_gain).astype(dtype)[:, None]
        return x, t

    return _fit(net, images, fp, cfg, progress, make_batch)


def train_gaussian_baseline(net, images, sigma=3.0, cfg=SpnCnnConfig(), progress=None):
    """
    Train **net** as a blind Gaussian-noise extractor: each patch gets fresh
    N(0, sigma^2) noise, the input is ``(patch + noise) / 255`` and the
    target is the noise itself in intensity units.

    **Returns**

        (trained :class:`Network`, list of :class:`EpochRecord`)
    """
    if not sigma > 0:
        raise DataError('baseline noise sigma must be positive, got %r' % (sigma,))
    dtype = net.dtype

    def make_batch(ps, idx, rng):
        patches = ps.inputs[idx]
        noise = rng.standard_normal(patches.shape) * sigma
        x = ((patches + noise) / INPUT_SCALE).astype(dtype)[:, None]
        return x, noise.astype(dtype)[:, None]

    return _fit(net, images, None, cfg, progress, make_batch)


def _tile_starts(n, tile, overlap):
    if n <= tile:
        return [0]
    step = tile - overlap
    starts = list(range(0, n - tile, step))
    starts.append(n - tile)
    return starts


def _owners(n, starts, length):
    # index of the tile in which each position lies deepest; image borders
    # count as infinitely deep
    depth = np.full((len(starts), n), -1.0)
    pos = np.arange(n)
    for i, s in enumerate(starts):
        inside = (pos >= s) & (pos < s + length)
        lo = pos - s if s > 0 else np.full(n, np.inf)
        hi = s + length - 1 - pos if s + length < n else np.full(n, np.inf)
        depth[i, inside] = np.minimum(lo, hi)[inside]
    return np.argmax(depth, axis=0)


def _run(net, x):
    return forward(net, x, EVAL, record=False)[0][0, 0]


def extract(net, img, tiling=TileConfig(), threads=1):
    """
    Apply **net** to **img** in eval mode, tile by tile.

    Neighbouring tiles overlap by ``tiling.overlap`` pixels; every output
    pixel is taken from the tile in which it lies deepest (largest distance
    to a tile side that is not also an image border).

    **Returns**

        :class:`NoiseResidual` with the image's dimensions
    """
    if net.in_channels != 1 or net.out_channels != 1:
        raise DataError('extraction needs a single-channel network, got %d -> %d channels'
                        % (net.in_channels, net.out_channels))
    h, w = img.shape
    x = (img.data / INPUT_SCALE).astype(net.dtype)[None, None]
    if h <= tiling.tile and w <= tiling.tile:
        return NoiseResidual(_run(net, x))
    if tiling.overlap < net.receptive_radius:
        raise DataError('tile overlap %d is below the receptive radius %d'
                        % (tiling.overlap, net.receptive_radius))
    th, tw = min(tiling.tile, h), min(tiling.tile, w)
    ys = _tile_starts(h, tiling.tile, tiling.overlap)
    xs = _tile_starts(w, tiling.tile, tiling.overlap)
    own_y, own_x = _owners(h, ys, th), _owners(w, xs, tw)
    jobs = [(i, j) for i in range(len(ys)) for j in range(len(xs))]
    logger.debug('extracting %dx%d image in %d tiles', h, w, len(jobs))

    def run_tile(job):
        i, j = job
        return _run(net, x[:, :, ys[i]:ys[i] + th, xs[j]:xs[j] + tw])

    out = np.zeros((h, w), dtype=net.dtype)
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        for (i, j), tile_out in zip(jobs, pool.map(run_tile, jobs)):
            rows = np.nonzero(own_y == i)[0]
            cols = np.nonzero(own_x == j)[0]
            if rows.size == 0 or cols.size == 0:
                continue
            r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
            out[r0:r1, c0:c1] = tile_out[r0 - ys[i]:r1 - ys[i], c0 - xs[j]:c1 - xs[j]]
    return NoiseResidual(out)


class SpnCnnExtractor(object):
    """
    Residual extractor backed by a trained network. The output estimates the
    fingerprint directly (divided back by the training **gain**).
    """
    name = 'spncnn'
    fingerprint_kind = FingerprintKind.CNN_AGGREGATE
    modulated = False

    def __init__(self, net, tiling=None, gain=1.0, threads=1):
        self.net = net
        self.tiling = tiling if tiling is not None else TileConfig()
        self.gain = gain
        self.threads = threads

    def __call__(self, img):
        ret = extract(self.net, img, self.tiling, self.threads)
        if self.gain != 1.0:
            ret = NoiseResidual(ret.data / self.gain)
        return ret


class GaussianBaselineExtractor(SpnCnnExtractor):
    """Network trained by :func:`train_gaussian_baseline`; outputs noise in intensity units."""
    name = 'gaussian-baseline'
    fingerprint_kind = FingerprintKind.MLE_ESTIMATE
    modulated = True
