import numpy as np
from .errors import DimensionError


# for converting numpy array to double
def float2double(a):
    if a is None or (isinstance(a, np.ndarray) and a.dtype == np.float64):
        return a
    else:
        return np.asarray(a, dtype=np.float64)


def require_same_shape(*arrays, **kwd):
    what = kwd.get('what', 'arrays')
    shapes = [np.shape(a) for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        raise DimensionError('%s disagree in shape: %s' % (what, shapes))
    return shapes[0]


def zero_mean_rows_cols(a):
    """
    Subtract each row's mean from that row, then each column's mean from
    that column. Computed in double precision.
    """
    a = float2double(a)
    a = a - a.mean(axis=1, keepdims=True)
    return a - a.mean(axis=0, keepdims=True)


def window_starts(n, window, stride):
    """
    Top-left offsets of every full window of size **window** stepped by
    **stride** along an axis of length **n**.
    """
    if window > n:
        return np.zeros(0, dtype=int)
    return np.arange(0, n - window + 1, stride)


def block_mean(a, fy, fx):
    h, w = a.shape
    if h % fy or w % fx:
        raise DimensionError('%dx%d does not tile into %dx%d blocks' % (h, w, fy, fx))
    return float2double(a).reshape(h // fy, fy, w // fx, fx).mean(axis=(1, 3))


def stretch_to_uint8(a):
    """
    Map **a** linearly onto 0..255 (NaNs become 0). A constant array maps to 128.
    """
    a = float2double(a)
    finite = np.isfinite(a)
    if not finite.any():
        return np.zeros(a.shape, dtype=np.uint8)
    lo, hi = a[finite].min(), a[finite].max()
    if hi <= lo:
        out = np.full(a.shape, 128.0)
    else:
        out = (a - lo) * (255.0 / (hi - lo))
    out[~finite] = 0
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
