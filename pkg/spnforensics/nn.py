"""
Minimal differentiable layer stack: 3x3 convolution, batch normalization,
ReLU, mean squared error and Adam, with exact backward passes and a
central-difference gradient checker.

Tensors are plain numpy arrays in (batch, channels, height, width) layout.
Parameters are float32 unless a network is explicitly promoted with
:meth:`Network.astype`.
"""
import copy
import logging
from dataclasses import dataclass, field
from typing import List, Optional
import numpy as np
from .errors import DataError, DimensionError, NumericError

__all__ = [
    'ConvLayer',
    'BatchNormLayer',
    'Block',
    'Network',
    'Tape',
    'AdamState',
    'tensor4',
    'conv2d',
    'conv2d_backward',
    'batchnorm',
    'batchnorm_backward',
    'forward',
    'backward',
    'mse_loss',
    'adam_step',
    'grad_check',
]

logger = logging.getLogger(__name__)

# Channel contractions run on row blocks of this fixed size so every output
# pixel goes through an identically shaped matrix product.
ROW_CHUNK = 4096

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1

TRAIN = 'train'
EVAL = 'eval'


def tensor4(a, dtype=None):
    a = np.asarray(a, dtype=dtype)
    if a.ndim != 4:
        raise DimensionError('expected (batch, channels, height, width), got shape %s' % (a.shape,))
    return a


@dataclass
class ConvLayer:
    kernels: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.kernels.ndim != 4 or self.kernels.shape[2:] != (3, 3):
            raise DimensionError('kernels must be out x in x 3 x 3, got %s' % (self.kernels.shape,))
        if self.bias.shape != (self.kernels.shape[0],):
            raise DimensionError('bias must have one entry per output channel')

    @property
    def in_channels(self):
        return self.kernels.shape[1]

    @property
    def out_channels(self):
        return self.kernels.shape[0]

    @classmethod
    def he_normal(cls, in_channels, out_channels, rng, dtype=np.float32):
        std = np.sqrt(2.0 / (in_channels * 9))
        kernels = (rng.standard_normal((out_channels, in_channels, 3, 3)) * std).astype(dtype)
        return cls(kernels, np.zeros(out_channels, dtype=dtype))

    @classmethod
    def identity(cls, channels=1, dtype=np.float32):
        kernels = np.zeros((channels, channels, 3, 3), dtype=dtype)
        for c in range(channels):
            kernels[c, c, 1, 1] = 1
        return cls(kernels, np.zeros(channels, dtype=dtype))


@dataclass
class BatchNormLayer:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = BN_EPSILON
    momentum: float = BN_MOMENTUM

    def __post_init__(self):
        if np.any(self.running_var < 0):
            raise DataError('running variance must be non-negative')

    @property
    def channels(self):
        return self.gamma.shape[0]

    @classmethod
    def fresh(cls, channels, dtype=np.float32):
        return cls(np.ones(channels, dtype=dtype), np.zeros(channels, dtype=dtype),
                   np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype))


@dataclass
class Block:
    """One convolution, optionally followed by batch normalization and ReLU."""
    conv: ConvLayer
    bn: Optional[BatchNormLayer] = None
    relu: bool = False

    # container tag bits
    BN_BIT = 1
    RELU_BIT = 2

    @property
    def tag(self):
        return (self.BN_BIT if self.bn is not None else 0) | (self.RELU_BIT if self.relu else 0)


@dataclass
class Network:
    blocks: List[Block] = field(default_factory=list)

    def __post_init__(self):
        if not self.blocks:
            raise DataError('a network needs at least one block')
        for prev, nxt in zip(self.blocks[:-1], self.blocks[1:]):
            if prev.conv.out_channels != nxt.conv.in_channels:
                raise DimensionError('block channel counts do not chain')
            if nxt.bn is not None and nxt.bn.channels != nxt.conv.out_channels:
                raise DimensionError('batch-norm width does not match its convolution')

    @property
    def depth(self):
        return len(self.blocks)

    @property
    def in_channels(self):
        return self.blocks[0].conv.in_channels

    @property
    def out_channels(self):
        return self.blocks[-1].conv.out_channels

    @property
    def receptive_radius(self):
        return self.depth

    @property
    def dtype(self):
        return self.blocks[0].conv.kernels.dtype

    def parameters(self):
        """Trainable arrays in a fixed order (kernels, bias[, gamma, beta] per block)."""
        ret = []
        for block in self.blocks:
            ret.append(block.conv.kernels)
            ret.append(block.conv.bias)
            if block.bn is not None:
                ret.append(block.bn.gamma)
                ret.append(block.bn.beta)
        return ret

    def copy(self):
        return copy.deepcopy(self)

    def astype(self, dtype):
        ret = self.copy()
        for block in ret.blocks:
            block.conv.kernels = block.conv.kernels.astype(dtype)
            block.conv.bias = block.conv.bias.astype(dtype)
            if block.bn is not None:
                for name in ('gamma', 'beta', 'running_mean', 'running_var'):
                    setattr(block.bn, name, getattr(block.bn, name).astype(dtype))
        return ret


def flatten_grads(grads):
    """Gradients in the order of :meth:`Network.parameters`."""
    ret = []
    for g in grads:
        ret.append(g['kernels'])
        ret.append(g['bias'])
        if 'gamma' in g:
            ret.append(g['gamma'])
            ret.append(g['beta'])
    return ret


def _rowwise_matmul(a, b):
    p, c = a.shape
    out = np.empty((p, b.shape[1]), dtype=np.result_type(a, b))
    tail = None
    for start in range(0, p, ROW_CHUNK):
        stop = min(start + ROW_CHUNK, p)
        if stop - start == ROW_CHUNK:
            out[start:stop] = a[start:stop] @ b
        else:
            if tail is None:
                tail = np.zeros((ROW_CHUNK, c), dtype=a.dtype)
            tail[:stop - start] = a[start:stop]
            out[start:stop] = (tail @ b)[:stop - start]
    return out


def _pad_channels_last(x, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    return xp.transpose(0, 2, 3, 1)


def conv2d(x, layer, pad=1):
    """
    Same-size 3x3 cross-correlation (no kernel flip) with zero padding.

    out[b, o, y, x] = bias[o] + sum_{c,i,j} K[o, c, i, j] * xpad[b, c, y + i, x + j]
    """
    x = tensor4(x)
    b, c, h, w = x.shape
    if c != layer.in_channels:
        raise DimensionError('input has %d channels, layer expects %d' % (c, layer.in_channels))
    ho, wo = h + 2 * pad - 2, w + 2 * pad - 2
    xp = _pad_channels_last(x, pad)
    out = np.zeros((b * ho * wo, layer.out_channels), dtype=np.result_type(x, layer.kernels))
    for i in range(3):
        for j in range(3):
            cols = np.ascontiguousarray(xp[:, i:i + ho, j:j + wo, :]).reshape(-1, c)
            out += _rowwise_matmul(cols, layer.kernels[:, :, i, j].T)
    out += layer.bias
    return np.ascontiguousarray(out.reshape(b, ho, wo, -1).transpose(0, 3, 1, 2))


def conv2d_backward(dout, x, layer, pad=1):
    """
    Gradients of :func:`conv2d`.

    **Returns**

        (dx, dkernels, dbias)
    """
    b, c, h, w = x.shape
    o = layer.out_channels
    ho, wo = dout.shape[2:]
    dout_rows = np.ascontiguousarray(dout.transpose(0, 2, 3, 1)).reshape(-1, o)
    xp = _pad_channels_last(x, pad)
    dxp = np.zeros(xp.shape, dtype=dout.dtype)
    dkernels = np.zeros_like(layer.kernels)
    for i in range(3):
        for j in range(3):
            cols = np.ascontiguousarray(xp[:, i:i + ho, j:j + wo, :]).reshape(-1, c)
            dkernels[:, :, i, j] = dout_rows.T @ cols
            dxp[:, i:i + ho, j:j + wo, :] += (dout_rows @ layer.kernels[:, :, i, j]).reshape(b, ho, wo, c)
    dbias = dout.sum(axis=(0, 2, 3)).astype(layer.bias.dtype)
    dx = dxp[:, pad:pad + h, pad:pad + w, :].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), dkernels, dbias


def _bn_forward(x, layer, mode, update_stats=True):
    if x.shape[1] != layer.channels:
        raise DimensionError('input has %d channels, batch-norm has %d' % (x.shape[1], layer.channels))
    shape = (1, -1, 1, 1)
    if mode == TRAIN:
        n = x.shape[0] * x.shape[2] * x.shape[3]
        if n < 2:
            raise DataError('batch statistics undefined for a single value per channel')
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        if update_stats:
            m = layer.momentum
            layer.running_mean[...] = (1 - m) * layer.running_mean + m * mean
            layer.running_var[...] = (1 - m) * layer.running_var + m * var
    elif mode == EVAL:
        mean, var = layer.running_mean, layer.running_var
    else:
        raise DataError('unknown mode %r' % (mode,))
    invstd = (1.0 / np.sqrt(var + layer.epsilon)).astype(x.dtype)
    xhat = (x - mean.reshape(shape).astype(x.dtype)) * invstd.reshape(shape)
    out = xhat * layer.gamma.reshape(shape) + layer.beta.reshape(shape)
    return out, (xhat, invstd, mode)


def batchnorm(x, layer, mode=TRAIN):
    """
    Per-channel normalization over (batch, height, width).

    In ``'train'`` mode the batch statistics are used and the layer's running
    statistics move towards them by ``momentum``; ``'eval'`` uses the running
    statistics.
    """
    return _bn_forward(tensor4(x), layer, mode)[0]


def batchnorm_backward(dout, cache, layer):
    """
    **Returns**

        (dx, dgamma, dbeta)
    """
    xhat, invstd, mode = cache
    shape = (1, -1, 1, 1)
    dgamma = (dout * xhat).sum(axis=(0, 2, 3)).astype(layer.gamma.dtype)
    dbeta = dout.sum(axis=(0, 2, 3)).astype(layer.beta.dtype)
    dxhat = dout * layer.gamma.reshape(shape)
    if mode == EVAL:
        return dxhat * invstd.reshape(shape), dgamma, dbeta
    n = dout.shape[0] * dout.shape[2] * dout.shape[3]
    dx = (invstd.reshape(shape) / n) * (
        n * dxhat
        - dxhat.sum(axis=(0, 2, 3), keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True))
    return dx, dgamma, dbeta


@dataclass
class Tape:
    network: Network
    mode: str
    records: list
    output_shape: tuple


def forward(net, x, mode=EVAL, update_stats=True, record=True):
    """
    Run **net** on **x**.

    **Arguments**

        - **net** :class:`Network`
        - **x** (batch, channels, height, width) array
        - **mode** ``'train'`` or ``'eval'``
        - **update_stats** move running batch-norm statistics in train mode.
          Default True.
        - **record** keep the intermediates needed by :func:`backward`.
          Inference passes ``False`` to bound memory.

    **Returns**

        (output, :class:`Tape`)
    """
    x = tensor4(x)
    if x.shape[1] != net.in_channels:
        raise DimensionError('network expects %d input channels, got %d' % (net.in_channels, x.shape[1]))
    x = x.astype(net.dtype, copy=False)
    records = []
    for block in net.blocks:
        rec = {'x': x}
        z = conv2d(x, block.conv)
        if block.bn is not None:
            z, rec['bn'] = _bn_forward(z, block.bn, mode, update_stats)
        if block.relu:
            rec['mask'] = z > 0
            z = z * rec['mask']
        if record:
            records.append(rec)
        x = z
    return x, Tape(net, mode, records, x.shape)


def backward(tape, grad_out):
    """
    Backpropagate **grad_out** through the layers recorded on **tape**.

    **Returns**

        (grads, grad_input) where grads holds one dict per block with keys
        ``kernels``, ``bias`` and, for normalized blocks, ``gamma``, ``beta``.
    """
    grad_out = tensor4(grad_out)
    if len(tape.records) != tape.network.depth:
        raise DataError('tape was recorded without intermediates')
    if grad_out.shape != tape.output_shape:
        raise DimensionError('gradient shape %s does not match tape output %s'
                             % (grad_out.shape, tape.output_shape))
    g = grad_out.astype(tape.network.dtype, copy=False)
    grads = [None] * len(tape.records)
    for idx in range(len(tape.records) - 1, -1, -1):
        block = tape.network.blocks[idx]
        rec = tape.records[idx]
        entry = {}
        if block.relu:
            g = g * rec['mask']
        if block.bn is not None:
            g, entry['gamma'], entry['beta'] = batchnorm_backward(g, rec['bn'], block.bn)
        g, entry['kernels'], entry['bias'] = conv2d_backward(g, rec['x'], block.conv)
        grads[idx] = entry
    return grads, g


def mse_loss(pred, target):
    """
    Mean of squared differences, accumulated in double precision.

    **Returns**

        (loss, grad) with grad = 2 (pred - target) / count
    """
    if np.shape(pred) != np.shape(target):
        raise DimensionError('prediction %s and target %s differ in shape'
                             % (np.shape(pred), np.shape(target)))
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(np.asarray(pred).dtype)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr=1e-3, **kwd):
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params], lr=lr, **kwd)


def adam_step(params, grads, state, weight_decay=0.0):
    """
    One bias-corrected Adam update, applied in place.

    **Arguments**

        - **params** list of arrays, updated in place
        - **grads** matching list of gradients
        - **state** :class:`AdamState`, updated in place
        - **weight_decay** optional L2 coefficient added to the gradients

    **Returns**

        (params, state)
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError('parameter, gradient and moment lists differ in length')
    for idx, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise DimensionError('gradient %d has shape %s, parameter %s' % (idx, g.shape, p.shape))
        if not np.all(np.isfinite(g)):
            raise NumericError('non-finite gradient in parameter %d (shape %s, %d bad entries)'
                               % (idx, p.shape, int(np.sum(~np.isfinite(g)))))
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = g.astype(np.float64)
        if weight_decay:
            g = g + weight_decay * p
        m[...] = state.beta1 * m + (1 - state.beta1) * g
        v[...] = state.beta2 * v + (1 - state.beta2) * g * g
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p[...] = p - step
    return params, state


def grad_check(net, x, target, eps=1e-3, n_params=200, seed=0, backward_fn=backward):
    """
    Largest relative disagreement between analytic and central-difference
    gradients of the MSE loss, over a random subset of trainable parameters.

    The check runs in train mode on a float64 copy of **net**; **net** itself
    is never modified.

    **Arguments**

        - **net** small :class:`Network`
        - **x**, **target** input and target tensors
        - **eps** finite-difference step. Default 1e-3.
        - **n_params** number of parameters checked (all if fewer). Default 200.
        - **seed** selects the parameter subset
        - **backward_fn** backward implementation under test

    **Returns**

        max over checked parameters of ``|a - n| / max(|a| + |n|, 1e-6)``
    """
    net64 = net.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)

    def loss_at():
        out, _ = forward(net64, x, TRAIN, update_stats=False)
        return mse_loss(out, target)[0]

    out, tape = forward(net64, x, TRAIN, update_stats=False)
    _, g = mse_loss(out, target)
    grads, _ = backward_fn(tape, g)
    params = net64.parameters()
    analytic = flatten_grads(grads)

    sizes = np.array([p.size for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_params, total), replace=False)

    worst = 0.0
    for flat in np.sort(picks):
        k = int(np.searchsorted(offsets, flat, side='right') - 1)
        p = params[k].reshape(-1)
        i = int(flat - offsets[k])
        saved = p[i]
        p[i] = saved + eps
        lp = loss_at()
        p[i] = saved - eps
        lm = loss_at()
        p[i] = saved
        numeric = (lp - lm) / (2 * eps)
        a = float(analytic[k].reshape(-1)[i])
        rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-6)
        worst = max(worst, rel)
    logger.debug('grad_check checked %d of %d parameters, max rel err %.3g', len(picks), total, worst)
    return worst
