"""
Reading and writing of images, fingerprint/network containers and tabular
results.

Container layouts (all little-endian):

* fingerprint: ``b'SPNF'``, u8 version, u8 kind, u32 width, u32 height,
  then width*height float32 values in row-major order.
* network: ``b'SPNN'``, u8 version, u16 block count, then per block: u8 tag
  (bit 0 batch-norm, bit 1 ReLU), u16 in-channels, u16 out-channels,
  out*in*9 kernel floats, out bias floats and, with batch-norm, out floats
  each of running mean, running variance, gamma and beta.
"""
import csv
import json
import logging
import os
import struct
import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError
from .core import ColorOrigin, Fingerprint, FingerprintKind, Image
from .errors import CorruptContainerError, DataError, ImageReadError
from .nn import BatchNormLayer, Block, ConvLayer, Network
from .nputil import stretch_to_uint8

__all__ = [
    'LUMA_WEIGHTS',
    'load_image',
    'save_image',
    'list_images',
    'save_fingerprint',
    'load_fingerprint',
    'save_network',
    'load_network',
    'write_csv',
    'read_csv',
    'write_json',
    'save_pgm_map',
]

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
IMAGE_SUFFIXES = ('.png', '.pgm')

FP_MAGIC = b'SPNF'
NET_MAGIC = b'SPNN'
VERSION = 1
_FP_HEADER = struct.Struct('<4sBBII')
_NET_HEADER = struct.Struct('<4sBH')
_BLOCK_HEADER = struct.Struct('<BHH')
_U32_MAX = 2 ** 32 - 1
_U16_MAX = 2 ** 16 - 1


def _luma(rgb):
    # r + g' (g - r) + b' (b - r) equals the weighted sum because the weights
    # sum to one, and it returns v exactly for gray pixels (v, v, v).
    r, g, b = (rgb[..., i].astype(np.float64) for i in range(3))
    return np.clip(r + LUMA_WEIGHTS[1] * (g - r) + LUMA_WEIGHTS[2] * (b - r), 0.0, 255.0)


def load_image(path):
    """
    Read an 8-bit grayscale or RGB(A) PNG/PGM as an :class:`Image`.

    RGB inputs are converted to luma with weights (0.299, 0.587, 0.114).
    """
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ('I', 'I;16', 'I;16B', 'I;16L', 'F'):
                raise ImageReadError(path, 'unsupported bit depth (mode %s)' % mode)
            if mode == 'L':
                return Image(np.asarray(im, dtype=np.float64), ColorOrigin.NATIVE_GRAY)
            if mode in ('1', 'LA'):
                return Image(np.asarray(im.convert('L'), dtype=np.float64), ColorOrigin.NATIVE_GRAY)
            if mode in ('RGB', 'RGBA', 'P'):
                rgb = np.asarray(im.convert('RGB'))
                return Image(_luma(rgb), ColorOrigin.LUMA_CONVERTED)
            raise ImageReadError(path, 'unsupported image mode %s' % mode)
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageReadError(path, str(exc))


def save_image(img, path):
    """Write an :class:`Image` (or 2-D array) rounded to 8 bits; PNG or PGM by suffix."""
    data = img.data if isinstance(img, Image) else np.asarray(img)
    pixels = np.clip(np.rint(data), 0, 255).astype(np.uint8)
    fmt = 'PPM' if str(path).lower().endswith('.pgm') else 'PNG'
    PILImage.fromarray(pixels, mode='L').save(path, format=fmt)


def list_images(directory):
    """Sorted image files (PNG/PGM) directly inside **directory**."""
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(IMAGE_SUFFIXES))
    return [os.path.join(directory, n) for n in names]


def save_fingerprint(fp, path):
    h, w = fp.shape
    if w > _U32_MAX or h > _U32_MAX:
        raise DataError('fingerprint dimensions overflow the container')
    payload = np.ascontiguousarray(fp.data, dtype='<f4').tobytes()
    with open(path, 'wb') as f:
        f.write(_FP_HEADER.pack(FP_MAGIC, VERSION, int(fp.kind), w, h))
        f.write(payload)


def load_fingerprint(path):
    with open(path, 'rb') as f:
        blob = f.read()
    if len(blob) < _FP_HEADER.size:
        raise CorruptContainerError('%s: corrupt container (truncated header)' % path)
    magic, version, kind, w, h = _FP_HEADER.unpack_from(blob)
    if magic != FP_MAGIC:
        raise CorruptContainerError('%s: corrupt container (bad magic %r)' % (path, magic))
    if version != VERSION:
        raise CorruptContainerError('%s: unsupported container version %d' % (path, version))
    try:
        kind = FingerprintKind(kind)
    except ValueError:
        raise CorruptContainerError('%s: corrupt container (unknown kind %d)' % (path, kind))
    expected = _FP_HEADER.size + 4 * w * h
    if len(blob) != expected:
        raise CorruptContainerError('%s: corrupt container (%d bytes, expected %d)'
                                    % (path, len(blob), expected))
    data = np.frombuffer(blob, dtype='<f4', count=w * h, offset=_FP_HEADER.size)
    return Fingerprint(data.reshape(h, w).astype(np.float32), kind)


def save_network(net, path):
    if net.depth > _U16_MAX:
        raise DataError('too many blocks for the container')
    parts = [_NET_HEADER.pack(NET_MAGIC, VERSION, net.depth)]
    for block in net.blocks:
        conv = block.conv
        parts.append(_BLOCK_HEADER.pack(block.tag, conv.in_channels, conv.out_channels))
        arrays = [conv.kernels, conv.bias]
        if block.bn is not None:
            bn = block.bn
            arrays += [bn.running_mean, bn.running_var, bn.gamma, bn.beta]
        parts.extend(np.ascontiguousarray(a, dtype='<f4').tobytes() for a in arrays)
    with open(path, 'wb') as f:
        f.write(b''.join(parts))


class _Reader(object):
    def __init__(self, blob, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def unpack(self, st):
        if self.pos + st.size > len(self.blob):
            raise CorruptContainerError('%s: corrupt container (truncated)' % self.path)
        ret = st.unpack_from(self.blob, self.pos)
        self.pos += st.size
        return ret

    def floats(self, n, shape):
        if self.pos + 4 * n > len(self.blob):
            raise CorruptContainerError('%s: corrupt container (truncated)' % self.path)
        a = np.frombuffer(self.blob, dtype='<f4', count=n, offset=self.pos)
        self.pos += 4 * n
        return a.reshape(shape).astype(np.float32)


def load_network(path):
    with open(path, 'rb') as f:
        reader = _Reader(f.read(), path)
    magic, version, count = reader.unpack(_NET_HEADER)
    if magic != NET_MAGIC:
        raise CorruptContainerError('%s: corrupt container (bad magic %r)' % (path, magic))
    if version != VERSION:
        raise CorruptContainerError('%s: unsupported container version %d' % (path, version))
    blocks = []
    for _ in range(count):
        tag, cin, cout = reader.unpack(_BLOCK_HEADER)
        if tag > (Block.BN_BIT | Block.RELU_BIT):
            raise CorruptContainerError('%s: corrupt container (unknown block tag %d)' % (path, tag))
        conv = ConvLayer(reader.floats(cout * cin * 9, (cout, cin, 3, 3)), reader.floats(cout, (cout,)))
        bn = None
        if tag & Block.BN_BIT:
            mean, var, gamma, beta = (reader.floats(cout, (cout,)) for _ in range(4))
            bn = BatchNormLayer(gamma, beta, mean, var)
        blocks.append(Block(conv, bn, bool(tag & Block.RELU_BIT)))
    if reader.pos != len(reader.blob):
        raise CorruptContainerError('%s: corrupt container (trailing bytes)' % path)
    return Network(blocks)


def write_csv(path, header, rows):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])
    logger.info('wrote %s', path)


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path):
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


def write_json(path, obj):
    with open(path, 'w') as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=_json_default)
        f.write('\n')
    logger.info('wrote %s', path)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError('%r is not JSON serializable' % (o,))


def save_pgm_map(values, path):
    """Linearly stretch a real-valued map onto 0..255 and store it as binary PGM."""
    PILImage.fromarray(stretch_to_uint8(values), mode='L').save(path, format='PPM')
