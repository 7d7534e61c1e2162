"""
spnforensics - Camera sensor pattern noise forensics.

Fingerprint estimation, source identification, manipulation localization
and video attribution, with wavelet and learned (SPN-CNN) residual
extractors.
"""
from .errors import *
from .core import *
from .io import *
from .synth import *
from .denoise import *
from .fingerprint import *
from .nn import *
from .spncnn import *
from .statutil import *
from .detect import *
from .localize import *
from .video import *
from .pipeline import *
from .plotting import *
from .version import __version__

__all__ = (
    errors.__all__
    + core.__all__
    + io.__all__
    + synth.__all__
    + denoise.__all__
    + fingerprint.__all__
    + nn.__all__
    + spncnn.__all__
    + statutil.__all__
    + [n for n in detect.__all__ if n != 'NullModel']
    + localize.__all__
    + video.__all__
    + pipeline.__all__
    + plotting.__all__
    + ['__version__']
)
