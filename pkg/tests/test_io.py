import os
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from PIL import Image as PILImage
from spnforensics.core import ColorOrigin, Fingerprint, FingerprintKind, Image
from spnforensics.errors import CorruptContainerError, ImageReadError
from spnforensics.io import (list_images, load_fingerprint, load_image, load_network, read_csv,
                             save_fingerprint, save_image, save_network, save_pgm_map, write_csv,
                             write_json)
from spnforensics.nn import EVAL, forward
from spnforensics.spncnn import SpnCnnConfig, build_spncnn


def test_load_pgm_identity(tmpdir):
    path = str(tmpdir.join('a.pgm'))
    with open(path, 'wb') as f:
        f.write(b'P5\n2 2\n255\n' + bytes([0, 255, 128, 64]))
    img = load_image(path)
    assert_array_equal(img.data, [[0, 255], [128, 64]])
    assert img.color_origin is ColorOrigin.NATIVE_GRAY


def test_load_rgb_luma(tmpdir):
    path = str(tmpdir.join('rgb.png'))
    px = np.array([[[255, 255, 255], [100, 200, 50]]], dtype=np.uint8)
    PILImage.fromarray(px, mode='RGB').save(path)
    img = load_image(path)
    assert img.color_origin is ColorOrigin.LUMA_CONVERTED
    assert img.data[0, 0] == 255.0
    assert_allclose(img.data[0, 1], 153.0, atol=1e-9)


def test_load_rejects_16_bit(tmpdir):
    path = str(tmpdir.join('deep.png'))
    PILImage.fromarray(np.full((2, 2), 1000, dtype=np.uint16)).save(path)
    with pytest.raises(ImageReadError) as exc:
        load_image(path)
    assert exc.value.path == path


def test_load_missing_or_garbage(tmpdir):
    with pytest.raises(ImageReadError):
        load_image(str(tmpdir.join('missing.png')))
    path = str(tmpdir.join('junk.png'))
    with open(path, 'wb') as f:
        f.write(b'not an image')
    with pytest.raises(ImageReadError):
        load_image(path)


def test_save_image_rounds_and_lists(tmpdir):
    save_image(Image(np.array([[0.4, 254.6]])), str(tmpdir.join('b.png')))
    save_image(Image(np.array([[10.0, 20.0]])), str(tmpdir.join('a.pgm')))
    tmpdir.join('notes.txt').write('x')
    paths = list_images(str(tmpdir))
    assert [os.path.basename(p) for p in paths] == ['a.pgm', 'b.png']
    assert_array_equal(load_image(paths[1]).data, [[0, 255]])
    assert_array_equal(load_image(paths[0]).data, [[10, 20]])


def test_fingerprint_container_layout(tmpdir):
    path = str(tmpdir.join('one.spnf'))
    save_fingerprint(Fingerprint(np.array([[0.5]]), FingerprintKind.MLE_ESTIMATE), path)
    with open(path, 'rb') as f:
        blob = f.read()
    assert len(blob) == 14 + 4
    assert blob[:4] == b'SPNF'
    fp = load_fingerprint(path)
    assert fp.data[0, 0] == 0.5
    assert fp.kind is FingerprintKind.MLE_ESTIMATE


def test_fingerprint_container_roundtrip(tmpdir):
    path = str(tmpdir.join('fp.spnf'))
    data = np.random.default_rng(0).standard_normal((5, 7)).astype(np.float32)
    save_fingerprint(Fingerprint(data, FingerprintKind.CNN_AGGREGATE), path)
    fp = load_fingerprint(path)
    assert_array_equal(fp.data, data)
    assert fp.kind is FingerprintKind.CNN_AGGREGATE


@pytest.mark.parametrize('mangle', [
    lambda b: b[:-1],
    lambda b: b[:10],
    lambda b: b'XXXX' + b[4:],
    lambda b: b[:4] + bytes([9]) + b[5:],
    lambda b: b[:5] + bytes([7]) + b[6:],
    lambda b: b + b'\0',
])
def test_fingerprint_container_corrupt(tmpdir, mangle):
    path = str(tmpdir.join('fp.spnf'))
    save_fingerprint(Fingerprint(np.ones((2, 3))), path)
    with open(path, 'rb') as f:
        blob = f.read()
    with open(path, 'wb') as f:
        f.write(mangle(blob))
    with pytest.raises(CorruptContainerError):
        load_fingerprint(path)


class TestNetworkContainer:
    def setup_method(self):
        self.net = build_spncnn(SpnCnnConfig(depth=4, width=3, seed=5))
        self.x = np.random.default_rng(1).uniform(0, 1, (1, 1, 9, 9)).astype(np.float32)

    def test_roundtrip_forward(self, tmpdir):
        path = str(tmpdir.join('n.spnn'))
        save_network(self.net, path)
        back = load_network(path)
        assert back.depth == self.net.depth
        assert [b.tag for b in back.blocks] == [b.tag for b in self.net.blocks]
        a = forward(self.net, self.x, EVAL)[0]
        b = forward(back, self.x, EVAL)[0]
        assert_array_equal(a, b)

    def test_truncated(self, tmpdir):
        path = str(tmpdir.join('n.spnn'))
        save_network(self.net, path)
        with open(path, 'rb') as f:
            blob = f.read()
        for cut in (3, 10, len(blob) - 4):
            with open(path, 'wb') as f:
                f.write(blob[:cut])
            with pytest.raises(CorruptContainerError):
                load_network(path)

    def test_trailing_and_magic(self, tmpdir):
        path = str(tmpdir.join('n.spnn'))
        save_network(self.net, path)
        with open(path, 'rb') as f:
            blob = f.read()
        for bad in (blob + b'\0\0\0\0', b'SPNF' + blob[4:]):
            with open(path, 'wb') as f:
                f.write(bad)
            with pytest.raises(CorruptContainerError):
                load_network(path)


def test_csv_and_json(tmpdir):
    path = str(tmpdir.join('t.csv'))
    write_csv(path, ['a', 'b'], [(1, 0.1), (2, np.float32(0.5))])
    rows = read_csv(path)
    assert rows == [{'a': '1', 'b': '0.1'}, {'a': '2', 'b': '0.5'}]
    jpath = str(tmpdir.join('t.json'))
    write_json(jpath, {'x': np.arange(3), 'y': np.float64(1.5)})
    assert tmpdir.join('t.json').read() == '{\n  "x": [\n    0,\n    1,\n    2\n  ],\n  "y": 1.5\n}\n'


def test_save_pgm_map(tmpdir):
    path = str(tmpdir.join('m.pgm'))
    save_pgm_map(np.array([[-1.0, 1.0]]), path)
    assert_array_equal(load_image(path).data, [[0, 255]])
