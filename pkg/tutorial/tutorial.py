# -*- coding: utf-8 -*-
# <nbformat>3.0</nbformat>

# <headingcell level=1>

# spnforensics Basic Tutorial

# <markdowncell>

# Every camera sensor multiplies the light it records by a slightly different
# gain at each pixel. That pattern, the PRNU fingerprint, survives in every
# image the camera takes and tells cameras apart even of the same model.
#
# This tutorial runs the whole toolkit on synthetic cameras:
#
# * estimating a fingerprint from flat-field images
# * identifying the source of a probe with NCC and PCE
# * ROC curves and thresholds for a target false-positive rate
# * training a small SPN-CNN extractor
# * localizing a pasted region
# * attributing a video

# <codecell>

import numpy as np
import matplotlib.pyplot as plt
import spnforensics as spn

# <markdowncell>

# ## Cameras and scenes
#
# A synthetic camera holds a ground-truth fingerprint ``k``; ``synthesize``
# renders ``x = clip(x_o (1 + k) + theta)``.

# <codecell>

W = H = 128
cam = spn.SyntheticCamera.random(W, H, strength=0.05, theta_sigma=2.0, seed=1)
other = spn.SyntheticCamera.random(W, H, strength=0.05, theta_sigma=2.0, seed=2)
flat = spn.SceneModel(W, H, 'flat')
texture = spn.SceneModel(W, H, 'texture')
plt.imshow(spn.synthesize(texture, cam, 0).data, cmap='gray');

# <markdowncell>

# ## Fingerprint estimation
#
# Residuals of flat-field images are aggregated by maximum likelihood and
# cleaned of row/column artifacts.

# <codecell>

flats = [spn.synthesize(flat, cam, i) for i in range(40)]
fp, acc = spn.estimate_fingerprint(flats)
print(np.corrcoef(fp.data.ravel(), cam.k.data.ravel())[0, 1])

# <markdowncell>

# ## Identification

# <codecell>

extractor = spn.WaveletExtractor()
scores = spn.ScoreSet()
for i in range(30):
    for c, label in ((cam, 'H1'), (other, 'H0')):
        probe = spn.synthesize(texture, c, 1000 + i)
        scores.add(spn.similarity(extractor(probe), fp, probe).value, label)
curve = spn.roc(scores)
spn.draw_roc(curve)
print('AUC', curve.auc)
print('threshold at 1% FPR', spn.threshold_for_fpr(scores.h0, 0.01))
print('parametric threshold', spn.threshold_for_fpr(scores.h0, 0.01, 'parametric'))

# <markdowncell>

# ## SPN-CNN
#
# A small network learns to map image patches onto the fingerprint. It
# outputs the fingerprint itself, so it is compared without modulation.

# <codecell>

cfg = spn.SpnCnnConfig(depth=5, width=16, patch=32, batch=32, epochs=3, max_patches_per_image=20)
train_imgs = [spn.synthesize(texture, cam, 2000 + i) for i in range(10)]
net, history = spn.train(spn.build_spncnn(cfg), train_imgs, fp, cfg)
print([round(r.mean_loss, 8) for r in history])
cnn = spn.SpnCnnExtractor(net)
probe = spn.synthesize(texture, cam, 3000)
print(spn.similarity(cnn(probe), fp).value, spn.similarity(extractor(probe), fp, probe).value)

# <markdowncell>

# ## Localization
#
# Windows where the measured correlation falls well below the correlation
# predicted from image content have lost the fingerprint.

# <codecell>

model = spn.fit_predictor(*spn.collect_training_windows(train_imgs[:4], fp, extractor, 32, 8))
donor = spn.synthesize(texture, other, 4000)
tampered, mask = spn.inject_tamper(spn.synthesize(texture, cam, 4000),
                                   spn.Rect.centered((H, W), 0.25), 'foreign-camera', donor)
measured, predicted, delta = spn.localization_maps(tampered, fp, extractor, model, 32, 8)
spn.draw_correlation_map(delta, pixels=True)
print('pixel AUC', spn.pixel_roc(delta, mask).auc)

# <markdowncell>

# ## Video
#
# Aggregating frames builds a video fingerprint; its PCE against the
# camera's fingerprint grows with the number of frames.

# <codecell>

frames, types = spn.synthesize_video(texture, cam, 20, seed=0)
frames = spn.FrameSet(frames, types)
curve = spn.pce_vs_n(frames, fp, extractor, [1, 5, 10, 20])
spn.draw_pce_curve({'matching camera': curve})
