from spnforensics import (FrameSet, SceneModel, SyntheticCamera, WaveletExtractor, pce_vs_n,
                          synthesize_video)
from spnforensics.plotting import draw_pce_curve
import matplotlib.pyplot as plt

scene = SceneModel(96, 96, 'texture', amplitude=30)
own = SyntheticCamera.random(96, 96, 0.05, 2.0, seed=1)
other = SyntheticCamera.random(96, 96, 0.05, 2.0, seed=2)
frames, types = synthesize_video(scene, own, 30, seed=0)
frames = FrameSet(frames, types)
grid = [1, 2, 5, 10, 20, 30]
extractor = WaveletExtractor()

draw_pce_curve({
    'matching camera': pce_vs_n(frames, own.k, extractor, grid),
    'other camera': pce_vs_n(frames, other.k, extractor, grid),
})
plt.title('PCE of the aggregated video fingerprint')
