"""
Batch evaluation over probe cameras, fingerprints and extractors.
"""
import itertools as itt
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional
from .core import Image
from .detect import Hypothesis, ScoreSet, roc, similarity
from .errors import DimensionError
from .io import load_image

__all__ = [
    'ScoreRow',
    'evaluate_grid',
    'pool_cameras',
    'patch_size_study',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreRow:
    probe_path: str
    camera_id: str
    extractor: str
    patch_w: int
    patch_h: int
    kind: str
    value: float
    dy: Optional[int]
    dx: Optional[int]
    label: str

    def as_list(self):
        return [self.probe_path, self.camera_id, self.extractor, self.patch_w, self.patch_h,
                self.kind, self.value, '' if self.dy is None else self.dy,
                '' if self.dx is None else self.dx, self.label]


def _center_box(shape, patch):
    if patch is None:
        return 0, 0, shape[0], shape[1]
    ph, pw = (patch, patch) if isinstance(patch, int) else patch
    if ph > shape[0] or pw > shape[1]:
        raise DimensionError('%dx%d patch does not fit a %dx%d probe' % (ph, pw, shape[0], shape[1]))
    return (shape[0] - ph) // 2, (shape[1] - pw) // 2, ph, pw


def _probe_name(item, i):
    return item if isinstance(item, str) else 'probe-%d' % i


def evaluate_grid(probes, fingerprints, extractors, patch=None, kind='ncc', threads=1):
    """
    Score every probe against every fingerprint with every extractor.

    A score is H1 when the probe's camera owns the fingerprint and H0
    otherwise. Probes are center-cropped to **patch** before extraction.

    **Arguments**

        - **probes** dict camera id -> list of :class:`Image` or paths
        - **fingerprints** dict camera id -> :class:`Fingerprint` on the
          probes' grid
        - **extractors** dict name -> extractor
        - **patch** side (or (h, w)) of the center crop; None for full probes
        - **kind** ``'ncc'`` or ``'pce'``
        - **threads** worker threads over probes

    **Returns**

        (dict (probe camera, extractor name) -> :class:`ScoreSet`,
        list of :class:`ScoreRow`)
    """
    jobs = []
    for cam, items in probes.items():
        for i, item in enumerate(items):
            for name in extractors:
                jobs.append((cam, i, item, name))

    def run(job):
        cam, i, item, name = job
        img = item if isinstance(item, Image) else load_image(item)
        top, left, ph, pw = _center_box(img.shape, patch)
        crop = img.crop(top, left, ph, pw)
        extractor = extractors[name]
        w = extractor(crop)
        modulated = getattr(extractor, 'modulated', True)
        rows = []
        for fcam, fp in fingerprints.items():
            ref = fp.crop(top, left, ph, pw)
            s = similarity(w, ref, crop if modulated else None, kind)
            label = Hypothesis.H1 if fcam == cam else Hypothesis.H0
            dy, dx = s.peak_offset if s.peak_offset is not None else (None, None)
            rows.append(ScoreRow(_probe_name(item, i), fcam, name, pw, ph, s.kind.value,
                                 s.value, dy, dx, label.value))
        return (cam, name), rows

    grid = {}
    for cam, name in itt.product(probes, extractors):
        grid[(cam, name)] = ScoreSet(metadata={'camera_id': cam, 'extractor': name, 'patch': patch})
    all_rows = []
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        for key, rows in pool.map(run, jobs):
            for row in rows:
                grid[key].add(row.value, row.label)
            all_rows.extend(rows)
    logger.info('scored %d probe/extractor pairs against %d fingerprints', len(jobs), len(fingerprints))
    return grid, all_rows


def pool_cameras(grid, size=None):
    """
    Pool the per-camera score sets of an :func:`evaluate_grid` result by
    extractor.

    **Returns**

        dict extractor name -> (:class:`ScoreSet`, :class:`RocCurve`), in the
        grid's extractor order
    """
    pooled = {}
    for (cam, name), scores in grid.items():
        if name not in pooled:
            pooled[name] = ScoreSet(metadata={'extractor': name, 'patch': size})
        pooled[name].extend(scores)
    ret = {}
    for name, scores in pooled.items():
        ret[name] = (scores, roc(scores))
        logger.info('%s @ %s: AUC %.4f', name, size, ret[name][1].auc)
    return ret


def patch_size_study(probes, fingerprints, extractors, sizes, kind='ncc', threads=1):
    """
    ROC per (extractor, patch size), pooling all probe cameras.

    **Returns**

        dict (extractor name, size) -> (:class:`ScoreSet`, :class:`RocCurve`)
    """
    ret = {}
    for size in sizes:
        grid, _ = evaluate_grid(probes, fingerprints, extractors, size, kind, threads)
        for name, result in pool_cameras(grid, size).items():
            ret[(name, size)] = result
    return ret
