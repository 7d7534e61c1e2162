import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from spnforensics.core import Fingerprint, FingerprintKind, Image
from spnforensics.errors import DataError, DimensionError
from spnforensics.synth import (Rect, SceneKind, SceneModel, SyntheticCamera, degrade, gen_prnu,
                                inject_tamper, synthesize, synthesize_video)


def test_gen_prnu_deterministic():
    a = gen_prnu(32, 16, 0.02, seed=3)
    b = gen_prnu(32, 16, 0.02, seed=3)
    assert_array_equal(a.data, b.data)
    assert a.shape == (16, 32)
    assert a.kind is FingerprintKind.GROUND_TRUTH_K
    assert not np.array_equal(a.data, gen_prnu(32, 16, 0.02, seed=4).data)


def test_gen_prnu_statistics():
    k = gen_prnu(256, 256, 0.02, seed=0).data.astype(np.float64)
    assert 0.018 <= k.std() <= 0.022
    assert_allclose(k.mean(axis=0), 0, atol=1e-6)
    assert_allclose(k.mean(axis=1), 0, atol=1e-6)


def test_gen_prnu_degenerate():
    assert gen_prnu(1, 1, 0.05, seed=0).data[0, 0] == 0
    with pytest.raises(DataError):
        gen_prnu(8, 8, 0.0, seed=0)
    with pytest.raises(DataError):
        gen_prnu(8, 8, 0.2, seed=0)


def test_synthesize_identity():
    scene = SceneModel(16, 8, SceneKind.GRADIENT)
    cam = SyntheticCamera(Fingerprint(np.zeros((8, 16)), FingerprintKind.GROUND_TRUTH_K))
    img = synthesize(scene, cam, seed=0)
    assert_array_equal(img.data, scene.render())
    assert img.data[0, 0] == 32.0
    assert img.data[0, -1] == 224.0


def test_synthesize_multiplicative():
    k = np.zeros((4, 4))
    k[1, 2] = 0.05
    k[3, 0] = -0.05
    cam = SyntheticCamera(Fingerprint(k, FingerprintKind.GROUND_TRUTH_K))
    img = synthesize(SceneModel(4, 4, 'flat', level=100), cam, seed=0)
    assert_allclose(img.data[1, 2], 105.0, rtol=1e-6)
    assert_allclose(img.data[3, 0], 95.0, rtol=1e-6)
    assert img.data[0, 0] == 100.0


def test_synthesize_noise_is_seeded():
    cam = SyntheticCamera.random(32, 32, 0.02, theta_sigma=2.0, seed=1)
    scene = SceneModel(32, 32, 'texture')
    a = synthesize(scene, cam, 5)
    assert_array_equal(a.data, synthesize(scene, cam, 5).data)
    assert not np.array_equal(a.data, synthesize(scene, cam, 6).data)
    assert a.data.min() >= 0 and a.data.max() <= 255


def test_camera_validation():
    with pytest.raises(DataError):
        SyntheticCamera(Fingerprint(np.full((2, 2), 0.1)))
    with pytest.raises(DataError):
        SyntheticCamera(Fingerprint(np.zeros((2, 2))), theta_sigma=-1)
    cam = SyntheticCamera.random(8, 8, 0.02)
    with pytest.raises(DimensionError):
        synthesize(SceneModel(9, 8), cam, 0)


def test_texture_scene_varies():
    scene = SceneModel(64, 64, 'texture', amplitude=60)
    x = scene.render(np.random.default_rng(0))
    assert x.std() > 5
    assert x.min() >= 0 and x.max() <= 255
    assert_array_equal(x, scene.render(np.random.default_rng(0)))


class TestTamper:
    def setup_method(self):
        self.shape = (64, 64)
        own = SyntheticCamera.random(64, 64, 0.05, 2.0, seed=1)
        other = SyntheticCamera.random(64, 64, 0.05, 2.0, seed=2)
        scene = SceneModel(64, 64, 'texture')
        self.img = synthesize(scene, own, 0)
        self.donor = synthesize(scene, other, 0)

    def test_centered_rect(self):
        r = Rect.centered(self.shape, 0.25)
        assert (r.top, r.left, r.height, r.width) == (16, 16, 32, 32)
        assert r.area == 1024
        assert r.within(self.shape)

    def test_zero_area(self):
        out, mask = inject_tamper(self.img, Rect(3, 3, 0, 0), 'smooth')
        assert_array_equal(out.data, self.img.data)
        assert not mask.any()

    def test_foreign_camera(self):
        r = Rect(10, 20, 8, 12)
        out, mask = inject_tamper(self.img, r, 'foreign-camera', self.donor)
        assert mask.sum() == 96
        assert_array_equal(out.data[mask], self.donor.data[mask])
        assert_array_equal(out.data[~mask], self.img.data[~mask])

    def test_smooth(self):
        out, mask = inject_tamper(self.img, Rect(0, 0, 32, 32), 'smooth')
        assert np.abs(np.diff(out.data[mask].reshape(32, 32), axis=1)).mean() < \
            np.abs(np.diff(self.img.data[:32, :32], axis=1)).mean()

    def test_errors(self):
        with pytest.raises(DataError):
            inject_tamper(self.img, Rect(60, 60, 8, 8), 'smooth')
        with pytest.raises(DataError):
            inject_tamper(self.img, Rect(0, 0, 8, 8), 'foreign-camera')
        with pytest.raises(ValueError):
            inject_tamper(self.img, Rect(0, 0, 8, 8), 'bogus')


def test_degrade():
    img = Image(np.linspace(0, 250, 64).reshape(8, 8))
    out = degrade(img, 0.0, 10.0)
    assert np.all(np.mod(out.data, 10.0) == 0)
    assert_array_equal(degrade(img).data, img.data)
    with pytest.raises(DataError):
        degrade(img, -1.0)


def test_synthesize_video_types():
    cam = SyntheticCamera.random(32, 32, 0.05, 2.0, seed=3)
    frames, types = synthesize_video(SceneModel(32, 32, 'texture'), cam, 12, seed=0, gop=5)
    assert len(frames) == 12
    assert types == ['I', 'other', 'other', 'other', 'other'] * 2 + ['I', 'other']
    again, _ = synthesize_video(SceneModel(32, 32, 'texture'), cam, 12, seed=0, gop=5)
    assert_array_equal(frames[7].data, again[7].data)
