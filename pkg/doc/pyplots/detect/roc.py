from spnforensics import (SceneModel, ScoreSet, SyntheticCamera, WaveletExtractor,
                          estimate_fingerprint, roc, similarity, synthesize)
from spnforensics.plotting import draw_roc
import matplotlib.pyplot as plt

shape = (128, 128)
flat = SceneModel(shape[1], shape[0], 'flat')
texture = SceneModel(shape[1], shape[0], 'texture')
own = SyntheticCamera.random(shape[1], shape[0], 0.03, 2.0, seed=1)
other = SyntheticCamera.random(shape[1], shape[0], 0.03, 2.0, seed=2)

fp, _ = estimate_fingerprint([synthesize(flat, own, i) for i in range(30)])
extractor = WaveletExtractor()

curves = {}
for size in (32, 64):
    scores = ScoreSet()
    for i in range(40):
        for cam, label in ((own, 'H1'), (other, 'H0')):
            probe = synthesize(texture, cam, 100 + i).crop(0, 0, size, size)
            s = similarity(extractor(probe), fp.crop(0, 0, size, size), probe)
            scores.add(s.value, label)
    curves['%dx%d' % (size, size)] = roc(scores)

draw_roc(curves)
plt.title('Source identification, wavelet residuals')
