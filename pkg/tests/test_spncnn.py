import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from spnforensics.core import Fingerprint, FingerprintKind, Image
from spnforensics.errors import DataError, DimensionError, FewPatchesWarning, InsufficientDataError
from spnforensics.nn import EVAL, forward
from spnforensics.spncnn import (GaussianBaselineExtractor, SpnCnnConfig, SpnCnnExtractor, TileConfig,
                                 build_spncnn, extract, parameter_count, sample_patches, train,
                                 train_gaussian_baseline)


def _images(n, shape, seed=0, high=200):
    rng = np.random.default_rng(seed)
    return [Image(rng.uniform(20, high, shape)) for _ in range(n)]


def _overlaps(a, b, p):
    return abs(a[1] - b[1]) < p and abs(a[2] - b[2]) < p


class TestConfig:
    def test_default_architecture(self):
        net = build_spncnn(SpnCnnConfig(width=2))
        assert net.depth == 17
        assert sum(b.bn is not None for b in net.blocks) == 15
        assert sum(b.relu for b in net.blocks) == 16
        assert not net.blocks[0].bn and net.blocks[0].relu
        assert net.blocks[-1].bn is None and not net.blocks[-1].relu
        assert net.receptive_radius == 17

    def test_parameter_count(self):
        assert parameter_count(build_spncnn(SpnCnnConfig(depth=3, width=4))) == 241

    def test_learning_rate_schedule(self):
        cfg = SpnCnnConfig()
        assert cfg.learning_rate(1) == 1e-3
        assert cfg.learning_rate(30) == 1e-3
        assert_allclose(cfg.learning_rate(31), 2e-4)
        assert_allclose(cfg.learning_rate(61), 4e-5)
        assert cfg.weight_decay == 0.0

    def test_l2_mode(self):
        cfg = SpnCnnConfig(decay_mode='l2', lr_decay=0.01)
        assert cfg.learning_rate(90) == cfg.lr
        assert cfg.weight_decay == 0.01

    @pytest.mark.parametrize('kwd', [dict(depth=2), dict(width=0), dict(patch=4), dict(lr_decay=0),
                                     dict(decay_mode='cosine'), dict(lr=0), dict(batch=0)])
    def test_invalid(self, kwd):
        with pytest.raises(DataError):
            SpnCnnConfig(**kwd)

    def test_seeded_build(self):
        a = build_spncnn(SpnCnnConfig(depth=3, width=4, seed=5))
        b = build_spncnn(SpnCnnConfig(depth=3, width=4, seed=5))
        for p, q in zip(a.parameters(), b.parameters()):
            assert_array_equal(p, q)


class TestSamplePatches:
    def setup_method(self):
        self.cfg = SpnCnnConfig(patch=40, max_patches_per_image=1000)

    def test_patch_sized_image(self):
        ps = sample_patches(_images(1, (40, 40)), None, self.cfg, 1)
        assert len(ps) <= 1

    def test_packing_bound_and_no_overlap(self):
        ps = sample_patches(_images(1, (400, 400)), None, self.cfg, 1)
        assert 0 < len(ps) <= 100
        for i, a in enumerate(ps.coords):
            for b in ps.coords[i + 1:]:
                assert not _overlaps(a, b, 40)

    def test_saturated_image(self):
        ps = sample_patches([Image(np.full((120, 120), 255.0))], None, self.cfg, 1)
        assert len(ps) == 0
        assert ps.inputs.shape == (0, 40, 40)

    def test_targets_are_colocated(self):
        fp = Fingerprint(np.random.default_rng(1).normal(0, 0.01, (100, 90)))
        imgs = _images(2, (100, 90))
        ps = sample_patches(imgs, fp, SpnCnnConfig(patch=20, max_patches_per_image=5), 3)
        assert len(ps) > 0
        for (i, top, left), x, t in zip(ps.coords, ps.inputs, ps.targets):
            assert_array_equal(x, imgs[i].data[top:top + 20, left:left + 20])
            assert_array_equal(t, fp.data[top:top + 20, left:left + 20])

    def test_epochs_resample(self):
        cfg = SpnCnnConfig(patch=20, max_patches_per_image=5)
        imgs = _images(1, (200, 200))
        assert sample_patches(imgs, None, cfg, 1).coords == sample_patches(imgs, None, cfg, 1).coords
        assert sample_patches(imgs, None, cfg, 1).coords != sample_patches(imgs, None, cfg, 2).coords

    def test_errors(self):
        with pytest.raises(DimensionError):
            sample_patches(_images(1, (30, 30)), None, self.cfg, 1)
        fp = Fingerprint(np.zeros((50, 50)))
        with pytest.raises(DimensionError):
            sample_patches(_images(1, (60, 60)), fp, self.cfg, 1)


class TestTrain:
    def setup_method(self):
        self.cfg = SpnCnnConfig(depth=3, width=4, patch=8, batch=8, epochs=2,
                                max_patches_per_image=6, seed=11)
        self.images = _images(3, (24, 24), seed=2)
        self.fp = Fingerprint(np.random.default_rng(3).normal(0, 0.01, (24, 24)))

    def test_deterministic(self):
        net = build_spncnn(self.cfg)
        a, ha = train(net, self.images, self.fp, self.cfg)
        b, hb = train(net, self.images, self.fp, self.cfg)
        assert ha == hb
        for p, q in zip(a.parameters(), b.parameters()):
            assert_array_equal(p, q)

    def test_history_and_input_untouched(self):
        net = build_spncnn(self.cfg)
        before = [p.copy() for p in net.parameters()]
        seen = []
        trained, history = train(net, self.images, self.fp, self.cfg, progress=seen.append)
        assert [r.epoch for r in history] == [1, 2]
        assert seen == history
        assert all(np.isfinite(r.mean_loss) and r.n_patches > 0 for r in history)
        for p, q in zip(before, net.parameters()):
            assert_array_equal(p, q)
        assert any(not np.array_equal(p, q) for p, q in zip(before, trained.parameters()))

    def test_few_patches_warning(self):
        cfg = SpnCnnConfig(depth=3, width=2, patch=8, batch=64, epochs=1, max_patches_per_image=2)
        with pytest.warns(FewPatchesWarning):
            train(build_spncnn(cfg), self.images, self.fp, cfg)

    def test_no_usable_patches(self):
        imgs = [Image(np.full((24, 24), 255.0))]
        with pytest.raises(InsufficientDataError):
            train(build_spncnn(self.cfg), imgs, self.fp, self.cfg)

    def test_gaussian_baseline(self):
        net, history = train_gaussian_baseline(build_spncnn(self.cfg), self.images, 3.0, self.cfg)
        assert len(history) == 2
        with pytest.raises(DataError):
            train_gaussian_baseline(build_spncnn(self.cfg), self.images, 0.0, self.cfg)

    @pytest.mark.slow
    def test_overfits_single_patch(self):
        cfg = SpnCnnConfig(depth=4, width=8, patch=16, batch=1, epochs=200,
                           max_patches_per_image=1, seed=1)
        img = _images(1, (16, 16), seed=4)
        fp = Fingerprint(np.random.default_rng(5).normal(0, 0.01, (16, 16)))
        _, history = train(build_spncnn(cfg), img, fp, cfg)
        assert history[-1].mean_loss < 0.1 * history[0].mean_loss


class TestExtract:
    def setup_method(self):
        self.net = build_spncnn(SpnCnnConfig(depth=3, width=3, seed=7))
        self.img = _images(1, (50, 47), seed=8)[0]

    def _whole(self, img):
        return forward(self.net, (img.data / 255.0).astype(np.float32)[None, None], EVAL)[0][0, 0]

    def test_single_tile(self):
        out = extract(self.net, self.img)
        assert out.shape == (50, 47)
        assert_array_equal(out.data, self._whole(self.img))

    def test_tiles_match_whole_image(self):
        tiled = extract(self.net, self.img, TileConfig(20, 10))
        assert_array_equal(tiled.data, self._whole(self.img))
        threaded = extract(self.net, self.img, TileConfig(20, 10), threads=3)
        assert_array_equal(threaded.data, tiled.data)

    def test_overlap_below_radius(self):
        with pytest.raises(DataError):
            extract(self.net, self.img, TileConfig(20, 2))
        with pytest.raises(DataError):
            TileConfig(20, 20)

    def test_multichannel_net_rejected(self):
        net = build_spncnn(SpnCnnConfig(depth=3, width=3))
        net.blocks.pop()
        with pytest.raises(DataError):
            extract(net, self.img)

    def test_extractors(self):
        cnn = SpnCnnExtractor(self.net, gain=4.0)
        assert not cnn.modulated
        assert cnn.fingerprint_kind is FingerprintKind.CNN_AGGREGATE
        assert_allclose(cnn(self.img).data, extract(self.net, self.img).data / 4.0)
        base = GaussianBaselineExtractor(self.net)
        assert base.modulated and base.name == 'gaussian-baseline'
