"""
Command-line interface.

Every subcommand writes its outputs plus a :class:`RunManifest` (JSON)
next to them; ``spnforensics replay MANIFEST`` re-executes a recorded run.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Dict, List
import numpy as np
from tqdm import tqdm
from . import config
from .core import Image
from .denoise import WaveletDenoiserConfig, WaveletExtractor
from .detect import SCORE_HEADER, decide, median_table, similarity, threshold_for_fpr
from .errors import DataError, InsufficientDataError, NumericError, UsageError
from .fingerprint import estimate_fingerprint
from .io import (list_images, load_fingerprint, load_image, load_network, save_fingerprint,
                 save_image, save_network, save_pgm_map, write_csv, write_json)
from .localize import (collect_training_windows, fit_predictor, localization_maps, pixel_roc,
                       upsample_to_pixels)
from .nn import Block, ConvLayer, Network, grad_check
from .pipeline import evaluate_grid, pool_cameras
from .spncnn import (DECAY_MODES, GaussianBaselineExtractor, SpnCnnConfig, SpnCnnExtractor,
                     TileConfig, build_spncnn, parameter_count, train, train_gaussian_baseline)
from .synth import (Rect, SceneKind, SceneModel, SyntheticCamera, TamperMode, inject_tamper,
                    synthesize, synthesize_video)
from .version import __version__
from .video import AlignmentParams, FrameSet, align_fingerprint, pce_vs_n, per_frame_scores

__all__ = [
    'RunManifest',
    'build_parser',
    'run',
    'main',
]

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s: %(message)s'
EXTRACTORS = ('wavelet', 'spncnn', 'gaussian-baseline')
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
# gradcheck finite-difference steps
FULL_EPS, LINEAR_EPS = 1e-6, 1e-3
# parser bookkeeping that is not a run parameter
_INTERNAL = ('func', 'inputs')


@dataclass
class RunManifest:
    command: str
    argv: List[str]
    params: Dict[str, object]
    seed: int
    threads: int
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    version: str = __version__
    started: str = ''
    finished: str = ''

    def save(self, path):
        write_json(path, asdict(self))

    @classmethod
    def load(cls, path):
        try:
            with open(path) as f:
                d = json.load(f)
            return cls(**d)
        except (ValueError, TypeError) as exc:
            raise DataError('%s: not a run manifest (%s)' % (path, exc))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError('%s%s: error: %s' % (self.format_usage(), self.prog, message))


def _now():
    return datetime.now(timezone.utc).isoformat()


def _sha256(path):
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            h.update(chunk)
    return 'sha256:' + h.hexdigest()


def _expand(paths):
    ret = []
    for p in paths:
        if os.path.isdir(p):
            for root, dirs, names in os.walk(p):
                dirs.sort()
                ret.extend(os.path.join(root, n) for n in sorted(names)
                           if not n.endswith('manifest.json'))
        else:
            ret.append(p)
    return ret


def _input_paths(args):
    ret = []
    for name in tuple(getattr(args, 'inputs', ())) + ('config',):
        value = getattr(args, name, None)
        if value is None:
            continue
        values = value if isinstance(value, list) else [value]
        if name == 'net':
            values = [_split_net(v)[1] for v in values]
        ret.extend(values)
    return _expand(ret)


def _check_inputs(manifest):
    changed = []
    for path, digest in sorted(manifest.inputs.items()):
        if not os.path.isfile(path):
            changed.append('%s (missing)' % path)
        elif _sha256(path) != digest:
            changed.append(path)
    if changed:
        raise DataError('inputs changed since the recorded run: %s' % ', '.join(changed))


def _manifest_path(args):
    out = getattr(args, 'out', None)
    if out is None:
        return None
    if os.path.isdir(out):
        return os.path.join(out, 'manifest.json')
    return out + '.manifest.json'


def _fraction(text):
    try:
        ret = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError('not a fraction: %r' % (text,))
    if ret <= 0:
        raise argparse.ArgumentTypeError('scale must be positive')
    return str(ret)


def _alignment(args):
    return AlignmentParams(tuple(args.crop_offset),
                           None if args.crop_size is None else tuple(args.crop_size),
                           Fraction(args.scale))


def _images(directory):
    paths = list_images(directory)
    if not paths:
        raise InsufficientDataError('no PNG/PGM images in %s' % directory)
    return paths


def _split_net(value):
    """``NAME=PATH`` -> (NAME, PATH); a bare path serves every network extractor."""
    name, sep, path = value.partition('=')
    if sep and name in EXTRACTORS:
        return name, path
    return None, value


def _net_for(args, name):
    nets = [_split_net(v) for v in (args.net or [])]
    named = [p for n, p in nets if n == name]
    bare = [p for n, p in nets if n is None]
    if len(named) > 1 or (not named and len(bare) > 1):
        raise UsageError('more than one --net for %s' % name)
    if named:
        return named[0]
    if bare:
        return bare[0]
    raise UsageError('--extractor %s needs --net (or --net %s=PATH)' % (name, name))


def _make_extractor(args, name=None):
    name = name or args.extractor
    if name == 'wavelet':
        return WaveletExtractor(WaveletDenoiserConfig(levels=args.levels, sigma0=args.sigma0))
    cls = SpnCnnExtractor if name == 'spncnn' else GaussianBaselineExtractor
    return cls(load_network(_net_for(args, name)), TileConfig(args.tile, args.overlap),
               args.target_gain, args.threads)


def _save_raster(data, out, pgm):
    np.save(out, np.asarray(data, dtype=np.float32))
    outputs = [out]
    if pgm:
        save_pgm_map(data, pgm)
        outputs.append(pgm)
    logger.info('wrote %s', out)
    return outputs


def _cmd_synth(args):
    os.makedirs(args.out, exist_ok=True)
    cam = SyntheticCamera.random(args.width, args.height, args.strength, args.theta_sigma, args.seed)
    scene = SceneModel(args.width, args.height, SceneKind(args.scene), level=args.level,
                       octaves=args.octaves, amplitude=args.amplitude)
    fp_path = os.path.join(args.out, 'k.spnf')
    save_fingerprint(cam.k, fp_path)
    outputs = [fp_path]
    suffix = '.' + args.format
    if args.video:
        frames, types = synthesize_video(scene, cam, args.n, args.seed, args.gop)
        for i, img in enumerate(frames):
            outputs.append(os.path.join(args.out, 'frame_%04d%s' % (i, suffix)))
            save_image(img, outputs[-1])
        outputs.append(os.path.join(args.out, 'frames.csv'))
        write_csv(outputs[-1], ['frame_index', 'frame_type'], enumerate(types))
        return outputs
    donor_cam = None
    if args.tamper_fraction > 0:
        os.makedirs(os.path.join(args.out, 'masks'), exist_ok=True)
        if TamperMode(args.tamper_mode) is TamperMode.FOREIGN_CAMERA:
            donor_cam = SyntheticCamera.random(args.width, args.height, args.strength,
                                               args.theta_sigma, args.seed + 1)
    for i in range(args.n):
        img = synthesize(scene, cam, i)
        if args.tamper_fraction > 0:
            donor = synthesize(scene, donor_cam, i) if donor_cam is not None else None
            rect = Rect.centered(img.shape, args.tamper_fraction)
            img, mask = inject_tamper(img, rect, args.tamper_mode, donor)
            outputs.append(os.path.join(args.out, 'masks', 'mask_%04d.png' % i))
            save_image(Image(mask * 255.0), outputs[-1])
        outputs.append(os.path.join(args.out, 'img_%04d%s' % (i, suffix)))
        save_image(img, outputs[-1])
    logger.info('synthesized %d images into %s', args.n, args.out)
    return outputs


def _cmd_fingerprint(args):
    extractor = _make_extractor(args)
    fp, acc = estimate_fingerprint(_images(args.images), extractor, threads=args.threads,
                                   clean=not args.no_clean, wiener=args.wiener)
    save_fingerprint(fp, args.out)
    logger.info('fingerprint from %d images written to %s', acc.count, args.out)
    return [args.out]


def _cmd_residual(args):
    w = _make_extractor(args)(load_image(args.image))
    return _save_raster(w.data, args.out, args.pgm)


def _cmd_extract(args):
    ext = SpnCnnExtractor(load_network(args.net), TileConfig(args.tile, args.overlap),
                          args.target_gain, args.threads)
    return _save_raster(ext(load_image(args.image)).data, args.out, args.pgm)


def _cmd_train(args):
    cfg = SpnCnnConfig(depth=args.depth, width=args.width, patch=args.patch, batch=args.batch,
                       epochs=args.epochs, lr=args.lr, lr_decay=args.lr_decay,
                       decay_period=args.decay_period, decay_mode=args.decay_mode,
                       max_patches_per_image=args.max_patches, target_gain=args.target_gain,
                       seed=args.seed)
    images = [load_image(p) for p in _images(args.images)]
    net = build_spncnn(cfg)
    logger.info('training %d-layer network with %d parameters on %d images',
                cfg.depth, parameter_count(net), len(images))
    with tqdm(total=cfg.epochs, desc='train', unit='epoch', disable=not args.progress,
              file=sys.stderr) as bar:
        def progress(record):
            bar.update(1)
            bar.set_postfix(loss='%.4g' % record.mean_loss, lr='%.2g' % record.lr)

        if args.baseline_sigma is not None:
            net, history = train_gaussian_baseline(net, images, args.baseline_sigma, cfg, progress)
        else:
            if args.fp is None:
                raise UsageError('train needs --fp (or --baseline-sigma)')
            # a still-image fingerprint is mapped onto the training frames first
            fp = align_fingerprint(load_fingerprint(args.fp), _alignment(args), images[0].shape)
            net, history = train(net, images, fp, cfg, progress)
    save_network(net, args.out)
    hist = args.history or args.out + '.history.csv'
    write_csv(hist, ['epoch', 'mean_loss', 'lr'], [(r.epoch, r.mean_loss, r.lr) for r in history])
    return [args.out, hist]


def _score_rows(probe_path, img, fp, extractor, args):
    w = extractor(img)
    probe = img if extractor.modulated else None
    rows = []
    for kind, tau in (('ncc', args.tau), ('pce', args.pce_tau)):
        s = similarity(w, fp, probe, kind, args.search if kind == 'pce' else 'none')
        label = '' if tau is None else decide(s, tau).value
        dy, dx = s.peak_offset if s.peak_offset is not None else ('', '')
        rows.append([probe_path, args.camera_id, extractor.name, img.width, img.height,
                     kind, s.value, dy, dx, label])
    return rows


def _cmd_identify(args):
    extractor = _make_extractor(args)
    fp = load_fingerprint(args.fp)
    if args.camera_id is None:
        args.camera_id = os.path.splitext(os.path.basename(args.fp))[0]
    rows = []
    for path in args.probe:
        rows.extend(_score_rows(path, load_image(path), fp, extractor, args))
    write_csv(args.out, SCORE_HEADER, rows)
    return [args.out]


def _camera_probes(directory):
    cams = sorted(d for d in os.listdir(directory) if os.path.isdir(os.path.join(directory, d)))
    if not cams:
        raise InsufficientDataError('%s has no camera subdirectories' % directory)
    return {c: _images(os.path.join(directory, c)) for c in cams}


def _fingerprints(directory):
    names = sorted(n for n in os.listdir(directory) if n.endswith('.spnf'))
    if not names:
        raise InsufficientDataError('no .spnf fingerprints in %s' % directory)
    return {os.path.splitext(n)[0]: load_fingerprint(os.path.join(directory, n)) for n in names}


def _threshold_or_none(h0, fpr, method):
    try:
        return threshold_for_fpr(h0, fpr, method)
    except InsufficientDataError as exc:
        logger.warning('no %s threshold: %s', method, exc)
        return None


def _cmd_evaluate(args):
    os.makedirs(args.out, exist_ok=True)
    probes = _camera_probes(args.probes)
    fps = _fingerprints(args.fps)
    extractors = {name: _make_extractor(args, name) for name in args.extractors}
    outputs = []
    all_rows, roc_rows, summary = [], [], {}
    for size in (args.patch or [None]):
        tag = 'full' if size is None else str(size)
        grid, rows = evaluate_grid(probes, fps, extractors, size, args.kind, args.threads)
        all_rows.extend(r.as_list() for r in rows)
        for hyp in ('H1', 'H0'):
            header, body = median_table(grid, hyp).rows()
            outputs.append(os.path.join(args.out, 'median_%s_%s.csv' % (hyp.lower(), tag)))
            write_csv(outputs[-1], header, body)
        for name, (pooled, curve) in pool_cameras(grid, size).items():
            roc_rows.extend([name, tag, f, t] for f, t in curve.rows())
            summary['%s/%s' % (name, tag)] = {
                'auc': curve.auc,
                'tpr_at_fpr': curve.tpr_at(args.fpr),
                'threshold_empirical': _threshold_or_none(pooled.h0, args.fpr, 'empirical'),
                'threshold_parametric': _threshold_or_none(pooled.h0, args.fpr, 'parametric'),
                'n_h1': len(pooled.h1),
                'n_h0': len(pooled.h0),
            }
    outputs.append(os.path.join(args.out, 'scores.csv'))
    write_csv(outputs[-1], SCORE_HEADER, all_rows)
    outputs.append(os.path.join(args.out, 'roc.csv'))
    write_csv(outputs[-1], ['extractor', 'patch', 'fpr', 'tpr'], roc_rows)
    outputs.append(os.path.join(args.out, 'summary.json'))
    write_json(outputs[-1], {'kind': args.kind, 'fpr': args.fpr, 'results': summary})
    return outputs


def _cmd_localize(args):
    os.makedirs(args.out, exist_ok=True)
    fp = load_fingerprint(args.fp)
    extractor = _make_extractor(args)
    train_imgs = [load_image(p) for p in _images(args.train_images)]
    feats, rhos = collect_training_windows(train_imgs, fp, extractor, args.window, args.stride,
                                           args.max_windows, args.seed)
    model = fit_predictor(feats, rhos)
    img = load_image(args.probe)
    measured, predicted, delta = localization_maps(img, fp, extractor, model, args.window, args.stride)
    rows = []
    for i, t in enumerate(delta.tops):
        for j, l in enumerate(delta.lefts):
            rows.append([i, j, t, l, measured.values[i, j], predicted.values[i, j],
                         delta.values[i, j], int(delta.degenerate[i, j])])
    outputs = [os.path.join(args.out, 'delta.csv'), os.path.join(args.out, 'delta.pgm'),
               os.path.join(args.out, 'summary.json')]
    write_csv(outputs[0], ['row', 'col', 'top', 'left', 'rho', 'rho_hat', 'delta', 'degenerate'], rows)
    save_pgm_map(upsample_to_pixels(delta)[0], outputs[1])
    summary = {
        'extractor': extractor.name,
        'weights': model.weights,
        'feature_names': list(model.feature_names),
        'rms': model.rms,
        'ridge': model.ridge,
        'n_training_windows': len(rhos),
    }
    if args.mask is not None:
        mask = load_image(args.mask).data >= 128
        summary['pixel_auc'] = pixel_roc(delta, mask).auc
        logger.info('pixel AUC %.4f', summary['pixel_auc'])
    write_json(outputs[2], summary)
    return outputs


def _default_grid(n):
    grid = [k for k in (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000) if k < n]
    return grid + [n]


def _cmd_video_attr(args):
    os.makedirs(args.out, exist_ok=True)
    frames = FrameSet.from_directory(args.frames, args.sidecar)
    if len(frames) == 0:
        raise InsufficientDataError('no frames in %s' % args.frames)
    fp_video = align_fingerprint(load_fingerprint(args.fp), _alignment(args), frames.shape)
    extractor = _make_extractor(args)
    curve = pce_vs_n(frames, fp_video, extractor, args.n_grid or _default_grid(len(frames)),
                     clean=not args.no_clean)
    scores, by_type = per_frame_scores(frames, fp_video, extractor, args.threads)
    outputs = [os.path.join(args.out, n)
               for n in ('curve.csv', 'frame_scores.csv', 'summary.json', 'fp_video.spnf')]
    write_csv(outputs[0], ['n', 'pce'], curve)
    write_csv(outputs[1], ['frame_index', 'frame_type', 'pce'],
              [(s.index, s.frame_type, s.pce) for s in scores])
    write_json(outputs[2], {'extractor': extractor.name, 'n_frames': len(frames),
                            'mean_pce_by_type': by_type, 'final_pce': curve[-1][1]})
    save_fingerprint(fp_video, outputs[3])
    return outputs


def _cmd_gradcheck(args):
    rng = np.random.default_rng(args.seed)
    if args.linear:
        blocks = [Block(ConvLayer.he_normal(1, args.width, rng))]
        blocks += [Block(ConvLayer.he_normal(args.width, args.width, rng)) for _ in range(args.depth - 2)]
        blocks.append(Block(ConvLayer.he_normal(args.width, 1, rng)))
        net = Network(blocks)
    else:
        net = build_spncnn(SpnCnnConfig(depth=args.depth, width=args.width, seed=args.seed), rng)
    x = rng.uniform(0.0, 1.0, (args.batch, 1, args.size, args.size))
    target = rng.standard_normal(x.shape) * 0.01
    # linear stacks are quadratic in every weight; otherwise the step must not cross a ReLU kink
    eps = args.eps if args.eps is not None else (LINEAR_EPS if args.linear else FULL_EPS)
    err = grad_check(net, x, target, eps, args.params, args.seed)
    tolerance = args.tolerance if args.tolerance is not None else (1e-6 if args.linear else 1e-3)
    result = {'max_rel_error': err, 'tolerance': tolerance, 'passed': err < tolerance,
              'depth': args.depth, 'width': args.width, 'linear': args.linear, 'eps': eps}
    print(json.dumps(result, sort_keys=True))
    outputs = []
    if args.out is not None:
        write_json(args.out, result)
        outputs.append(args.out)
    if not result['passed']:
        raise NumericError('gradient check failed: max relative error %.3g >= %.3g' % (err, tolerance))
    return outputs


def _cmd_replay(args):
    manifest = RunManifest.load(args.manifest_file)
    logger.info('replaying %s run from %s', manifest.command, manifest.started)
    if manifest.version != __version__:
        logger.warning('manifest was written by version %s, running %s', manifest.version, __version__)
    _check_inputs(manifest)
    return manifest.argv


def _common():
    p = _Parser(add_help=False)
    g = p.add_argument_group('common options')
    g.add_argument('-v', '--verbose', action='count', default=0, help='-v info, -vv debug')
    g.add_argument('--seed', type=int, default=0, help='seed of all randomness')
    g.add_argument('--threads', type=int, default=1, help='worker threads')
    g.add_argument('--config', help='key = value file with option defaults')
    return p


def _alignment_opts():
    p = _Parser(add_help=False)
    g = p.add_argument_group('still-to-video alignment')
    g.add_argument('--crop-offset', type=int, nargs=2, default=[0, 0], metavar=('TOP', 'LEFT'))
    g.add_argument('--crop-size', type=int, nargs=2, metavar=('H', 'W'))
    g.add_argument('--scale', type=_fraction, default='1', help='still-to-video scale, e.g. 1/2')
    return p


def _extractor_opts(default='wavelet'):
    p = _Parser(add_help=False)
    g = p.add_argument_group('extractor')
    g.add_argument('--extractor', choices=EXTRACTORS, default=default)
    g.add_argument('--net', action='append', metavar='[NAME=]PATH',
                   help='SPNN network file; repeat as spncnn=PATH and gaussian-baseline=PATH '
                        'to give each network extractor its own')
    g.add_argument('--levels', type=int, default=4, help='wavelet decomposition levels')
    g.add_argument('--sigma0', type=float, default=3.0, help='wavelet noise std')
    g.add_argument('--tile', type=int, default=400)
    g.add_argument('--overlap', type=int, default=20)
    g.add_argument('--target-gain', type=float, default=1.0)
    return p


def build_parser():
    parser = _Parser(prog='spnforensics', description='Camera sensor pattern noise forensics.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True
    common = _common()
    ext = _extractor_opts()
    align = _alignment_opts()

    sp = sub.add_parser('synth', parents=[common], help='render a synthetic camera image set')
    sp.add_argument('--out', required=True, help='output directory')
    sp.add_argument('--n', type=int, default=50, help='number of images or frames')
    sp.add_argument('--width', type=int, default=256)
    sp.add_argument('--height', type=int, default=256)
    sp.add_argument('--strength', type=float, default=0.02, help='PRNU standard deviation')
    sp.add_argument('--theta-sigma', type=float, default=2.0, help='additive noise std')
    sp.add_argument('--scene', choices=[k.value for k in SceneKind], default='flat')
    sp.add_argument('--level', type=float, default=128.0)
    sp.add_argument('--octaves', type=int, default=4)
    sp.add_argument('--amplitude', type=float, default=60.0)
    sp.add_argument('--format', choices=('png', 'pgm'), default='png')
    sp.add_argument('--tamper-fraction', type=float, default=0.0, help='tampered area share')
    sp.add_argument('--tamper-mode', choices=[m.value for m in TamperMode], default='foreign-camera')
    sp.add_argument('--video', action='store_true', help='write frames plus frames.csv')
    sp.add_argument('--gop', type=int, default=10, help='I-frame period')
    sp.set_defaults(func=_cmd_synth, inputs=())

    sp = sub.add_parser('fingerprint', parents=[common, ext], help='estimate a camera fingerprint')
    sp.add_argument('--images', required=True, help='directory of flat-field images')
    sp.add_argument('--out', required=True, help='SPNF output file')
    sp.add_argument('--wiener', action='store_true', help='Fourier-domain Wiener cleanup')
    sp.add_argument('--no-clean', action='store_true', help='skip row/column zero-meaning')
    sp.set_defaults(func=_cmd_fingerprint, inputs=('images', 'net'))

    sp = sub.add_parser('residual', parents=[common, ext], help='noise residual of one image')
    sp.add_argument('--image', required=True)
    sp.add_argument('--out', required=True, help='.npy output (float32)')
    sp.add_argument('--pgm', help='optional PGM visualization')
    sp.set_defaults(func=_cmd_residual, inputs=('image', 'net'))

    sp = sub.add_parser('train', parents=[common, align], help='train an SPN-CNN extractor')
    sp.add_argument('--images', required=True)
    sp.add_argument('--fp', help='target SPNF fingerprint')
    sp.add_argument('--out', required=True, help='SPNN output file')
    sp.add_argument('--history', help='loss history CSV (default OUT.history.csv)')
    sp.add_argument('--depth', type=int, default=17)
    sp.add_argument('--width', type=int, default=64)
    sp.add_argument('--patch', type=int, default=40)
    sp.add_argument('--batch', type=int, default=128)
    sp.add_argument('--epochs', type=int, default=100)
    sp.add_argument('--lr', type=float, default=1e-3)
    sp.add_argument('--lr-decay', type=float, default=0.2)
    sp.add_argument('--decay-period', type=int, default=30)
    sp.add_argument('--decay-mode', choices=DECAY_MODES, default='lr')
    sp.add_argument('--max-patches', type=int, default=1000, help='patches per image per epoch')
    sp.add_argument('--target-gain', type=float, default=1.0)
    sp.add_argument('--baseline-sigma', type=float, help='train the Gaussian-noise baseline instead')
    sp.add_argument('--progress', action='store_true', help='progress bar on stderr')
    sp.set_defaults(func=_cmd_train, inputs=('images', 'fp'))

    sp = sub.add_parser('extract', parents=[common], help='apply a trained network to one image')
    sp.add_argument('--net', required=True)
    sp.add_argument('--image', required=True)
    sp.add_argument('--out', required=True, help='.npy output (float32)')
    sp.add_argument('--pgm', help='optional PGM visualization')
    sp.add_argument('--tile', type=int, default=400)
    sp.add_argument('--overlap', type=int, default=20)
    sp.add_argument('--target-gain', type=float, default=1.0)
    sp.set_defaults(func=_cmd_extract, inputs=('net', 'image'))

    sp = sub.add_parser('identify', parents=[common, ext], help='score probes against a fingerprint')
    sp.add_argument('--probe', required=True, nargs='+')
    sp.add_argument('--fp', required=True)
    sp.add_argument('--out', required=True, help='score CSV')
    sp.add_argument('--camera-id', help='label of the fingerprint (default: file stem)')
    sp.add_argument('--search', choices=('none', 'full'), default='none', help='PCE peak search')
    sp.add_argument('--tau', type=float, help='NCC decision threshold')
    sp.add_argument('--pce-tau', type=float, help='PCE decision threshold')
    sp.set_defaults(func=_cmd_identify, inputs=('probe', 'fp', 'net'))

    sp = sub.add_parser('evaluate', parents=[common, ext], help='ROC and median tables')
    sp.add_argument('--probes', required=True, help='directory with one subdirectory per camera')
    sp.add_argument('--fps', required=True, help='directory of CAMERA.spnf fingerprints')
    sp.add_argument('--out', required=True, help='output directory')
    sp.add_argument('--extractors', nargs='+', choices=EXTRACTORS, default=['wavelet'])
    sp.add_argument('--patch', type=int, nargs='+', help='center-crop sizes (default full probe)')
    sp.add_argument('--kind', choices=('ncc', 'pce'), default='ncc')
    sp.add_argument('--fpr', type=float, default=0.01, help='target false-positive rate')
    sp.set_defaults(func=_cmd_evaluate, inputs=('probes', 'fps', 'net'))

    sp = sub.add_parser('localize', parents=[common, ext], help='manipulation heat map of a probe')
    sp.add_argument('--probe', required=True)
    sp.add_argument('--fp', required=True)
    sp.add_argument('--train-images', required=True, help='pristine images for the predictor')
    sp.add_argument('--out', required=True, help='output directory')
    sp.add_argument('--mask', help='ground-truth mask (white = manipulated)')
    sp.add_argument('--window', type=int, default=64)
    sp.add_argument('--stride', type=int, default=8)
    sp.add_argument('--max-windows', type=int, default=20000)
    sp.set_defaults(func=_cmd_localize, inputs=('probe', 'fp', 'train_images', 'mask', 'net'))

    sp = sub.add_parser('video-attr', parents=[common, ext, align], help='video source attribution')
    sp.add_argument('--frames', required=True, help='directory of frame images')
    sp.add_argument('--sidecar', help='frame_index,frame_type CSV (default FRAMES/frames.csv)')
    sp.add_argument('--fp', required=True, help='still-image SPNF fingerprint')
    sp.add_argument('--out', required=True, help='output directory')
    sp.add_argument('--n-grid', type=int, nargs='+', help='frame counts of the PCE curve')
    sp.add_argument('--no-clean', action='store_true')
    sp.set_defaults(func=_cmd_video_attr, inputs=('frames', 'sidecar', 'fp', 'net'))

    sp = sub.add_parser('gradcheck', parents=[common], help='check backpropagation numerically')
    sp.add_argument('--depth', type=int, default=4)
    sp.add_argument('--width', type=int, default=8)
    sp.add_argument('--size', type=int, default=12, help='input side')
    sp.add_argument('--batch', type=int, default=2)
    sp.add_argument('--eps', type=float,
                    help='finite-difference step (default %g, or %g with --linear)' % (FULL_EPS, LINEAR_EPS))
    sp.add_argument('--params', type=int, default=200, help='parameters checked')
    sp.add_argument('--linear', action='store_true', help='convolutions only')
    sp.add_argument('--tolerance', type=float)
    sp.add_argument('--out', help='JSON result file')
    sp.set_defaults(func=_cmd_gradcheck, inputs=())

    sp = sub.add_parser('replay', parents=[common], help='re-execute a recorded run')
    sp.add_argument('manifest_file', metavar='MANIFEST')
    sp.set_defaults(func=_cmd_replay, inputs=('manifest_file',))
    parser.commands = sub.choices
    return parser


def _parse(parser, argv):
    # --config must be applied before parsing so it can satisfy required options
    pre = _Parser(add_help=False)
    pre.add_argument('--config')
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith('-')), None)
    if known.config is not None and command in parser.commands:
        sub = parser.commands[command]
        values = config.apply_config(sub, config.load_config(known.config))
        for action in sub._actions:
            if action.dest in values:
                action.required = False
    return parser.parse_args(argv)


def _configure_logging(verbose):
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _execute(args, argv):
    if args.command == 'replay':
        return run(_cmd_replay(args))
    started = _now()
    # hashed before the run so outputs written next to the inputs are not taken for inputs;
    # missing inputs are reported by the command itself
    inputs = {}
    if _manifest_path(args) is not None:
        inputs = {p: _sha256(p) for p in _input_paths(args) if os.path.isfile(p)}
    outputs = args.func(args)
    path = _manifest_path(args)
    if path is not None:
        params = {k: v for k, v in vars(args).items() if k not in _INTERNAL}
        manifest = RunManifest(args.command, list(argv), params, args.seed, args.threads,
                               inputs, {p: _sha256(p) for p in outputs},
                               started=started, finished=_now())
        manifest.save(path)
    return EXIT_OK


def run(argv=None):
    """
    Execute one command line and return its exit code.

    **Arguments**

        - **argv** argument list without the program name; default
          ``sys.argv[1:]``

    **Returns**

        0 on success, 1 on usage errors, 2 on data errors (bad or missing
        inputs), 3 on numeric failures
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        _configure_logging(args.verbose)
        return _execute(args, argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except UsageError as exc:
        sys.stderr.write('%s\n' % exc)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        sys.stderr.write('spnforensics: error: %s\n' % exc)
        return EXIT_DATA
    except NumericError as exc:
        sys.stderr.write('spnforensics: numeric failure: %s\n' % exc)
        return EXIT_NUMERIC


def main():
    return run()


if __name__ == '__main__':
    raise SystemExit(main())
