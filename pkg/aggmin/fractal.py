"""Structure diagnostics for computed states: dimension, hierarchy, gaps, symmetry."""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import ndimage, stats
from scipy.cluster.hierarchy import linkage
from scipy.spatial import cKDTree

from .errors import DimensionError, ParameterError, ResolutionError
from .measure import CantorIterate, ParticleEnsemble

logger = logging.getLogger(__name__)


def _points(data) -> Tuple[np.ndarray, np.ndarray]:
    """Positions and weights; raw arrays get uniform weights and 1-D input becomes a column."""
    if isinstance(data, ParticleEnsemble):
        return data.positions, data.weights
    pts = np.asarray(data, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts, np.full(pts.shape[0], 1.0 / max(1, pts.shape[0]))


class DimensionEstimate(BaseModel):
    """Box counts over a scale window and the fitted log-log slope.

    slope is 0 with no fit when the data has fewer than two distinct points.
    """

    scales: List[float]
    counts: List[int]
    slope: float
    intercept: float = 0.0
    r2: Optional[float] = None
    window: Tuple[float, float]
    decades: float

    def to_csv(self, path):
        np.savetxt(
            path,
            np.column_stack([self.scales, self.counts]),
            delimiter=",",
            header="eps,count",
            comments="",
            fmt=["%.17g", "%d"],
        )


def _default_scales(extent: float, count: int = 10) -> np.ndarray:
    return extent * 2.0 ** -np.arange(1, count + 1)


def box_count(points: np.ndarray, eps: float) -> int:
    """Occupied eps-boxes on a grid anchored at the bounding-box minimum."""
    lo, hi = points.min(axis=0), points.max(axis=0)
    boxes = np.maximum(np.ceil((hi - lo) / eps).astype(np.int64), 1)
    idx = np.floor((points - lo) / eps).astype(np.int64)
    idx = np.clip(idx, 0, boxes - 1)
    return int(np.unique(idx, axis=0).shape[0])


def box_dimension(data, scales: Optional[Sequence[float]] = None) -> DimensionEstimate:
    """Slope of log N(eps) against log(1/eps) by least squares."""
    if scales is not None and np.any(np.asarray(scales, dtype=float) <= 0):
        raise ParameterError("box scales must be > 0")
    if isinstance(data, CantorIterate):
        default = data.M ** -np.arange(1, data.k + 1)
        eps = np.asarray(scales if scales is not None else default, dtype=float)
        counts = np.array([data.boxes(e) for e in eps])
        distinct = data.count > 1
    else:
        pts, _ = _points(data)
        extent = float(np.max(pts.max(axis=0) - pts.min(axis=0))) if pts.shape[0] else 0.0
        distinct = pts.shape[0] >= 2 and extent > 0
        if not distinct:
            eps = np.asarray(scales if scales is not None else [1.0], dtype=float)
            counts = np.ones(eps.size, dtype=int)
        else:
            eps = np.asarray(scales if scales is not None else _default_scales(extent), dtype=float)
            counts = np.array([box_count(pts, e) for e in eps])
    window = (float(eps.min()), float(eps.max()))
    decades = math.log10(window[1] / window[0]) if window[0] > 0 else 0.0
    if not distinct or eps.size < 2:
        return DimensionEstimate(
            scales=eps.tolist(), counts=counts.tolist(), slope=0.0, window=window, decades=decades
        )
    if window[1] / window[0] < 16:
        logger.warning("box scales span only a factor %.3g", window[1] / window[0])
    fit = stats.linregress(np.log(1 / eps), np.log(counts))
    return DimensionEstimate(
        scales=eps.tolist(),
        counts=counts.tolist(),
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r2=float(fit.rvalue**2),
        window=window,
        decades=decades,
    )


class Layer(BaseModel):
    """A plateau of constant cluster count; scale is the geometric mean of its ends."""

    count: int
    scale: float
    scale_hi: float
    scale_lo: float


class HierarchyReport(BaseModel):
    """Layers from the coarsest scale down with ratios between consecutive layer scales."""

    layers: List[Layer]
    ratios: List[float]
    base_scale: float
    ratio_hint: float

    @property
    def counts(self) -> List[int]:
        return [layer.count for layer in self.layers]


def hierarchy_layers(
    data, base_scale: Optional[float] = None, ratio_hint: float = 0.15, samples_per_level: int = 8
) -> HierarchyReport:
    """Single-linkage cluster counts swept over base_scale * ratio_hint^t.

    A layer is a run of at least half a level of samples with one constant
    count above 1. Layers are listed from the coarsest scale down.
    """
    pts, _ = _points(data)
    if pts.shape[0] < 4:
        raise ParameterError("hierarchy needs at least 4 points, got {}".format(pts.shape[0]))
    if not 0 < ratio_hint < 1:
        raise ParameterError("ratio_hint must lie in (0, 1), got {}".format(ratio_hint))
    heights = np.sort(linkage(pts, method="single")[:, 2])
    positive = heights[heights > 0]
    if positive.size == 0:
        return HierarchyReport(layers=[], ratios=[], base_scale=0.0, ratio_hint=ratio_hint)
    top = base_scale if base_scale is not None else float(heights[-1]) * (1 + 1e-9)
    levels = int(math.ceil(math.log(positive[0] / top) / math.log(ratio_hint))) + 1
    t = np.arange(levels * samples_per_level + 1) / samples_per_level
    scales = top * ratio_hint**t
    counts = pts.shape[0] - np.searchsorted(heights, scales, side="right")

    layers = []
    minimum = samples_per_level / 2
    start = 0
    for i in range(1, counts.size + 1):
        if i < counts.size and counts[i] == counts[start]:
            continue
        run = i - start
        if counts[start] > 1 and run >= minimum:
            hi_s, lo_s = float(scales[start]), float(scales[i - 1])
            if not layers or layers[-1].count != counts[start]:
                layer = Layer(
                    count=int(counts[start]),
                    scale=math.sqrt(hi_s * lo_s),
                    scale_hi=hi_s,
                    scale_lo=lo_s,
                )
                layers.append(layer)
        start = i
    ratios = [b.scale / a.scale for a, b in zip(layers[:-1], layers[1:])]
    logger.debug("hierarchy: counts %s", [layer.count for layer in layers])
    return HierarchyReport(layers=layers, ratios=ratios, base_scale=top, ratio_hint=ratio_hint)


def isolated_points(data, gap_factor: float = 8.0) -> List[int]:
    """Indices whose nearest-neighbour distance exceeds gap_factor times the median one."""
    pts, _ = _points(data)
    if pts.shape[0] < 2:
        raise ParameterError("need at least 2 points, got {}".format(pts.shape[0]))
    dist, _ = cKDTree(pts).query(pts, k=2)
    nearest = dist[:, 1]
    return np.flatnonzero(nearest > gap_factor * np.median(nearest)).tolist()


class AsymmetrySpectrum(BaseModel):
    edges: List[float]
    masses: List[float]
    magnitudes: List[List[float]]
    modes: int
    index: float

    def to_csv(self, path):
        rows = [
            (b, m + 1, mag) for b, row in enumerate(self.magnitudes) for m, mag in enumerate(row)
        ]
        np.savetxt(
            path,
            np.array(rows, dtype=float).reshape(-1, 3),
            delimiter=",",
            header="bin,m,magnitude",
            comments="",
            fmt=["%d", "%d", "%.17g"],
        )


def asymmetry(data, bins: int = 6, modes: int = 4) -> AsymmetrySpectrum:
    """Angular Fourier magnitudes per radial bin around the centre of mass."""
    pts, w = _points(data)
    if pts.shape[1] != 2:
        raise DimensionError("asymmetry is defined for d=2, got d={}".format(pts.shape[1]))
    if bins < 1 or modes < 1:
        raise ParameterError("bins and modes must be >= 1")
    centred = pts - w @ pts / w.sum()
    r = np.sqrt((centred**2).sum(axis=1))
    theta = np.arctan2(centred[:, 1], centred[:, 0])
    edges = np.linspace(0.0, r.max() * (1 + 1e-12) if r.max() > 0 else 1.0, bins + 1)
    which = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, bins - 1)
    m = np.arange(1, modes + 1)
    masses = np.zeros(bins)
    mags = np.zeros((bins, modes))
    for b in range(bins):
        sel = which == b
        mass = w[sel].sum()
        masses[b] = mass
        if mass > 0:
            mags[b] = np.abs(np.exp(-1j * np.outer(theta[sel], m)).T @ w[sel]) / mass
    total = masses.sum()
    index = math.sqrt(float(masses @ (mags**2).mean(axis=1)) / total) if total > 0 else 0.0
    return AsymmetrySpectrum(
        edges=edges.tolist(),
        masses=masses.tolist(),
        magnitudes=mags.tolist(),
        modes=modes,
        index=index,
    )


class SuperlevelReport(BaseModel):
    occupied: bool
    eps0: float
    delta: float
    h: float
    peak_density: float


def histogram_density(pts, weights, h, pad):
    """Mass per unit volume on h-cells covering the points plus pad on every side."""
    lo = pts.min(axis=0) - pad
    hi = pts.max(axis=0) + pad
    cells = np.maximum(np.ceil((hi - lo) / h).astype(int), 1)
    edges = [lo[i] + np.arange(cells[i] + 1) * h for i in range(pts.shape[1])]
    hist, _ = np.histogramdd(pts, bins=edges, weights=weights)
    return hist / h ** pts.shape[1]


def superlevel_interior(
    data, eps0: float, delta: float, h: Optional[float] = None
) -> SuperlevelReport:
    """Whether some delta-ball of histogram cells lies inside {density >= eps0}."""
    pts, w = _points(data)
    h = delta / 4 if h is None else h
    if h > delta / 4:
        raise ResolutionError("histogram cell {} exceeds delta/4 = {}".format(h, delta / 4))
    density = histogram_density(pts, w, h, pad=delta)
    reach = int(math.floor(delta / h))
    offsets = np.arange(-reach, reach + 1)
    mesh = np.meshgrid(*([offsets] * pts.shape[1]), indexing="ij")
    footprint = sum(o**2 for o in mesh) * h * h <= delta * delta
    core = ndimage.binary_erosion(density >= eps0, structure=footprint)
    return SuperlevelReport(
        occupied=bool(core.any()), eps0=eps0, delta=delta, h=h, peak_density=float(density.max())
    )


def support_measure(data, gap_factor: float = 8.0) -> float:
    """One-dimensional support size: span minus gaps above gap_factor times the median gap."""
    pts, _ = _points(data)
    if pts.shape[1] != 1:
        raise DimensionError("support measure is one-dimensional, got d={}".format(pts.shape[1]))
    x = np.sort(pts[:, 0])
    if x.size < 2:
        return 0.0
    gaps = np.diff(x)
    reference = float(np.median(gaps))
    if reference == 0:
        positive = gaps[gaps > 0]
        if positive.size == 0:
            logger.warning("support measure of %d coincident points is 0", x.size)
            return 0.0
        logger.warning("median gap is 0, measuring gaps against the median positive gap")
        reference = float(np.median(positive))
    large = gaps > gap_factor * reference
    return float(x[-1] - x[0] - gaps[large].sum())
