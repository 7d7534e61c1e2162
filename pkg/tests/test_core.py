import numpy as np
import pytest
from numpy.testing import assert_array_equal
from spnforensics.core import (ColorOrigin, Fingerprint, FingerprintKind, Image, NoiseResidual,
                               saturation_mask)
from spnforensics.errors import DataError, DimensionError
from spnforensics.nputil import block_mean, stretch_to_uint8, window_starts, zero_mean_rows_cols


def test_image_rejects_out_of_range():
    with pytest.raises(DataError):
        Image(np.array([[0.0, 256.0]]))
    with pytest.raises(DataError):
        Image(np.array([[np.nan, 1.0]]))
    with pytest.raises(DimensionError):
        Image(np.zeros(4))


def test_image_is_read_only_copy():
    a = np.full((2, 3), 7.0)
    img = Image(a)
    a[0, 0] = 0
    assert img.data[0, 0] == 7.0
    assert img.shape == (2, 3)
    assert (img.height, img.width) == (2, 3)
    assert img.color_origin is ColorOrigin.NATIVE_GRAY
    with pytest.raises(ValueError):
        img.data[0, 0] = 1.0


def test_fingerprint_is_float32_and_crops():
    fp = Fingerprint(np.arange(12.0).reshape(3, 4), FingerprintKind.CNN_AGGREGATE)
    assert fp.data.dtype == np.float32
    c = fp.crop(1, 1, 2, 2)
    assert_array_equal(c.data, [[5, 6], [9, 10]])
    assert c.kind is FingerprintKind.CNN_AGGREGATE
    assert Fingerprint(np.zeros((1, 1)), 0).kind is FingerprintKind.GROUND_TRUTH_K


def test_residual_rejects_non_finite():
    with pytest.raises(DataError):
        NoiseResidual(np.array([[np.inf]]))


def test_saturation_mask():
    assert not saturation_mask(Image(np.zeros((4, 4)))).data.any()
    assert saturation_mask(Image(np.full((4, 4), 255.0))).data.all()
    m = saturation_mask(Image(np.array([[250.0, 253.0, 254.0]])), 253)
    assert_array_equal(m.data, [[False, True, True]])
    assert m.fraction == pytest.approx(2 / 3.)
    with pytest.raises(DataError):
        saturation_mask(Image(np.zeros((1, 1))), 0)


def test_zero_mean_rows_cols():
    rng = np.random.default_rng(0)
    a = zero_mean_rows_cols(rng.standard_normal((5, 7)))
    np.testing.assert_allclose(a.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(a.mean(axis=1), 0, atol=1e-12)
    np.testing.assert_allclose(zero_mean_rows_cols(a), a, atol=1e-9)
    assert zero_mean_rows_cols(np.array([[3.5]]))[0, 0] == 0


def test_window_starts():
    assert_array_equal(window_starts(128, 64, 64), [0, 64])
    assert_array_equal(window_starts(10, 4, 3), [0, 3, 6])
    assert len(window_starts(3, 4, 1)) == 0


def test_block_mean():
    assert_array_equal(block_mean(np.array([[0.1, 0.3], [0.2, 0.2]]), 2, 2), [[0.2]])
    with pytest.raises(DimensionError):
        block_mean(np.zeros((3, 4)), 2, 2)


def test_stretch_to_uint8():
    assert_array_equal(stretch_to_uint8([[-1.0, 0.0, 1.0]]), [[0, 128, 255]])
    assert_array_equal(stretch_to_uint8([[2.0, 2.0]]), [[128, 128]])
    assert_array_equal(stretch_to_uint8([[np.nan, 0.0, 1.0]]), [[0, 0, 255]])
