# -*- coding: utf-8 -*-
# matplotlib is optional; every function imports it lazily and skips it
# entirely with no_plot=True
import numpy as np
from .localize import upsample_to_pixels

__all__ = [
    'draw_roc',
    'draw_correlation_map',
    'draw_pce_curve',
    'draw_pixel_auc_scatter',
]


def _axis(ax, no_plot):
    if no_plot:
        return None
    from matplotlib import pyplot as plt
    return plt.gca() if ax is None else ax


def draw_roc(curves, ax=None, grid=True, no_plot=False):
    """
    Draw one or more ROC curves with their AUC in the legend.

    **Arguments**

        - **curves** :class:`RocCurve` or dict label -> :class:`RocCurve`
        - **ax** Optional matplotlib axis instance on which to draw the plot
        - **grid** If True, draw gridlines
        - **no_plot** return the data without drawing

    **Returns**

        dict label -> (fpr, tpr, auc)
    """
    if not isinstance(curves, dict):
        curves = {'': curves}
    ax = _axis(ax, no_plot)
    ret = {}
    for label, c in curves.items():
        ret[label] = (c.fpr, c.tpr, c.auc)
        if ax is not None:
            name = ('%s (AUC %.3f)' % (label, c.auc)) if label else 'AUC %.3f' % c.auc
            ax.step(c.fpr, c.tpr, where='post', label=name)
    if ax is not None:
        ax.plot([0, 1], [0, 1], 'k:', lw=1)
        ax.set_xlabel('false positive rate')
        ax.set_ylabel('true positive rate')
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.legend(loc='lower right')
        if grid:
            ax.grid(grid)
    return ret


def draw_correlation_map(cmap, ax=None, pixels=False, colormap='RdBu', no_plot=False):
    """
    Heat map of a :class:`CorrelationMap`, on the window grid or upsampled to
    pixels.

    **Returns**

        the drawn 2-D array
    """
    values = upsample_to_pixels(cmap)[0] if pixels else cmap.values
    ax = _axis(ax, no_plot)
    if ax is not None:
        lim = np.nanmax(np.abs(values)) if np.isfinite(values).any() else 1.0
        im = ax.imshow(values, cmap=colormap, vmin=-lim, vmax=lim, interpolation='nearest')
        ax.figure.colorbar(im, ax=ax)
    return values


def draw_pce_curve(curves, ax=None, grid=True, logy=True, no_plot=False):
    """
    PCE against the number of aggregated frames.

    **Arguments**

        - **curves** dict label -> list of (N, pce)

    **Returns**

        dict label -> (N array, pce array)
    """
    ax = _axis(ax, no_plot)
    ret = {}
    for label, curve in curves.items():
        n = np.array([c[0] for c in curve])
        v = np.array([c[1] for c in curve], dtype=float)
        ret[label] = (n, v)
        if ax is not None:
            ax.plot(n, v, 'o-', label=label)
    if ax is not None:
        if logy:
            ax.set_yscale('symlog')
        ax.set_xlabel('frames')
        ax.set_ylabel('PCE')
        ax.legend()
        if grid:
            ax.grid(grid)
    return ret


def draw_pixel_auc_scatter(auc_x, auc_y, labels=('wavelet', 'spncnn'), ax=None, no_plot=False):
    """
    Per-image pixel AUC of two extractors against each other.

    **Returns**

        (x, y, number of images where y >= x)
    """
    x = np.asarray(auc_x, dtype=float)
    y = np.asarray(auc_y, dtype=float)
    wins = int(np.sum(y >= x))
    ax = _axis(ax, no_plot)
    if ax is not None:
        ax.scatter(x, y, s=12)
        ax.plot([0, 1], [0, 1], 'k:', lw=1)
        ax.set_xlabel('pixel AUC, %s' % labels[0])
        ax.set_ylabel('pixel AUC, %s' % labels[1])
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
    return x, y, wins
