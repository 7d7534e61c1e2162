from spnforensics import (Rect, SceneModel, SyntheticCamera, WaveletExtractor,
                          collect_training_windows, estimate_fingerprint, fit_predictor,
                          inject_tamper, localization_maps, synthesize)
from spnforensics.plotting import draw_correlation_map
import matplotlib.pyplot as plt

flat = SceneModel(192, 192, 'flat')
texture = SceneModel(192, 192, 'texture')
own = SyntheticCamera.random(192, 192, 0.05, 2.0, seed=1)
donor_cam = SyntheticCamera.random(192, 192, 0.05, 2.0, seed=2)
extractor = WaveletExtractor()

fp, _ = estimate_fingerprint([synthesize(flat, own, i) for i in range(30)])
pristine = [synthesize(texture, own, 100 + i) for i in range(4)]
model = fit_predictor(*collect_training_windows(pristine, fp, extractor, 48, 8))

probe = synthesize(texture, own, 500)
donor = synthesize(texture, donor_cam, 500)
tampered, mask = inject_tamper(probe, Rect.centered(probe.shape, 0.25), 'foreign-camera', donor)
measured, predicted, delta = localization_maps(tampered, fp, extractor, model, 48, 8)

plt.figure(figsize=(10, 4))
plt.subplot(121)
plt.imshow(mask, cmap='gray')
plt.title('tampered region')
draw_correlation_map(delta, ax=plt.subplot(122), pixels=True)
plt.title('measured - predicted correlation')
