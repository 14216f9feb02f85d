"""Fourier-side diagnostics: negative windows of W-hat and concavity witnesses.

A witness is a mean-zero grid measure of diameter at most delta whose
energy is negative. It is built from a pair of smooth bumps placed on a
negative window of W-hat, transformed back to space and cut to a ball.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import optimize

from .energy import energy
from .errors import DimensionError, ParameterError, WitnessNotFoundError
from .measure import GridMeasure, mu_hat, require_mean_zero
from .potential import HierGauss

logger = logging.getLogger(__name__)

WITNESS_CELLS = 256
BUMP_NODES = 129
TABLE_NODES = 4097
ESCALATION_POLICY = "windows by increasing centre until E < 0"


def decay_exponent(spec) -> float:
    """alpha with W-hat ~ |xi|^(-alpha) at infinity."""
    if hasattr(spec, "alpha"):
        return spec.alpha
    return spec.b + spec.d


class Window(BaseModel):
    lo: float
    hi: float
    depth: float
    argmin: float
    c1: float
    j: Optional[int] = None

    @property
    def center(self) -> float:
        return (self.lo + self.hi) / 2

    @property
    def width(self) -> float:
        return self.hi - self.lo


class WindowScan(BaseModel):
    family: str
    xi_min: float
    xi_max: float
    samples: int
    windows: List[Window]
    xi: List[float] = Field(default_factory=list, exclude=True, repr=False)
    values: List[float] = Field(default_factory=list, exclude=True, repr=False)


def _edge(spec, a, b):
    return optimize.brentq(lambda x: spec.fourier_hat(x), a, b, xtol=1e-14, rtol=1e-12)


def scan_windows(spec, xi_max: float, samples: int = 100_000, xi_min: float = 1e-3) -> WindowScan:
    """All maximal runs of negative W-hat samples on a log grid over [xi_min, xi_max]."""
    if not 0 < xi_min < xi_max:
        raise ParameterError("need 0 < xi_min < xi_max, got {} and {}".format(xi_min, xi_max))
    xi = np.geomspace(xi_min, xi_max, samples)
    values = np.asarray(spec.fourier_hat(xi))
    negative = values < 0
    alpha = decay_exponent(spec)
    windows = []
    padded = np.concatenate([[False], negative, [False]]).astype(int)
    starts = np.flatnonzero(np.diff(padded) == 1)
    stops = np.flatnonzero(np.diff(padded) == -1) - 1
    for i0, i1 in zip(starts, stops):
        lo = _edge(spec, xi[i0 - 1], xi[i0]) if i0 > 0 else xi[i0]
        hi = _edge(spec, xi[i1], xi[i1 + 1]) if i1 + 1 < samples else xi[i1]
        k = i0 + int(np.argmin(values[i0 : i1 + 1]))
        width = hi - lo
        mid = (lo + hi) / 2
        inner = np.linspace(mid - width / 4, mid + width / 4, 257)
        sup = float(np.max(spec.fourier_hat(inner)))
        window = Window(
            lo=float(lo),
            hi=float(hi),
            depth=float(values[k]),
            argmin=float(xi[k]),
            c1=-sup * (width / 2) ** alpha,
        )
        if isinstance(spec, HierGauss):
            level = math.log(window.argmin / math.sqrt(spec.alpha)) / math.log(1 / spec.lam)
            window.j = int(round(level))
        windows.append(window)
    logger.info("%s: %d negative windows on [%g, %g]", spec.family, len(windows), xi_min, xi_max)
    return WindowScan(
        family=spec.family,
        xi_min=xi_min,
        xi_max=xi_max,
        samples=samples,
        windows=windows,
        xi=xi.tolist(),
        values=values.tolist(),
    )


class WitnessAttempt(BaseModel):
    center: float
    width: float
    j: Optional[int] = None
    status: str
    energy: Optional[float] = None


class ConcavityWitness(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    delta: float
    energy: float
    window: Window
    bump_scale: float
    xi_center: float
    bump: str = "exp(-1/(1-|4x|^2)), unit mass"
    h: float
    mean_defect: float
    diameter: float
    imag_residue: float
    tried: List[WitnessAttempt]
    policy: str = ESCALATION_POLICY
    grid: GridMeasure = Field(exclude=True, repr=False)

    @property
    def accepted(self) -> bool:
        return self.energy < 0 and self.diameter <= self.delta and self.mean_defect <= 1e-12


def bump(eta2):
    """Mollifier exp(-1/(1 - 16 |eta|^2)) as a function of |eta|^2."""
    s = 16 * np.asarray(eta2, dtype=float)
    inside = s < 1
    out = np.zeros_like(s)
    out[inside] = np.exp(-1 / (1 - s[inside]))
    return out


def bump_transform(d: int, radii) -> Tuple[np.ndarray, float]:
    """Radial transform of the unit-mass bump at ``radii`` and the largest imaginary residue.

    The bump is integrated over a symmetric grid; marginalising over all but
    the first axis leaves a one-dimensional cosine sum.
    """
    eta = np.linspace(-0.25, 0.25, BUMP_NODES)
    step = eta[1] - eta[0]
    mesh = np.meshgrid(*([eta] * d), indexing="ij")
    values = bump(sum(m**2 for m in mesh)) * step**d
    marginal = values.reshape(BUMP_NODES, -1).sum(axis=1)
    phase = np.outer(eta, np.asarray(radii, dtype=float))
    total = marginal.sum()
    real = marginal @ np.cos(phase) / total
    imag = marginal @ np.sin(phase) / total
    return real, float(np.max(np.abs(imag)))


def _witness_grid(spec, delta, window, cells):
    d = spec.dimension
    h = delta / cells
    half = cells // 2
    grid = GridMeasure.centered(h, [2 * half + 1] * d)
    centres = grid.centers()
    radius = np.sqrt((centres**2).sum(axis=1))
    keep = radius + h * math.sqrt(d) / 2 <= delta / 2
    scale = window.width
    xi_j = window.center
    radii = np.linspace(0.0, scale * delta * math.sqrt(d) / 2, TABLE_NODES)
    table, imag = bump_transform(d, radii)
    profile = np.interp(scale * radius, radii, table)
    mu1 = 2 * np.cos(xi_j * centres[:, 0]) * scale**d * profile / (2 * math.pi) ** d
    masses = np.where(keep, mu1 * h**d, 0.0)
    masses[keep] -= masses[keep].sum() / keep.sum()
    values = masses.reshape(grid.extents)
    peak = float(np.max(np.abs(mu1))) or 1.0
    return GridMeasure(grid.origin, h, values), imag * scale**d * 2 / (2 * math.pi) ** d / peak


def build_witness(
    spec,
    delta: float,
    windows: Union[WindowScan, Window, Sequence[Window]],
    cells: int = WITNESS_CELLS,
) -> ConcavityWitness:
    """First window (by increasing centre) whose bump pair gives E[mu] < 0."""
    if not delta > 0:
        raise ParameterError("delta must be > 0, got {}".format(delta))
    if spec.dimension > 3:
        raise DimensionError("witnesses are built for d <= 3, got d={}".format(spec.dimension))
    if isinstance(windows, WindowScan):
        candidates = list(windows.windows)
    elif isinstance(windows, Window):
        candidates = [windows]
    else:
        candidates = list(windows)
    candidates.sort(key=lambda w: w.center)
    h = delta / cells
    nyquist = math.pi / h
    tried = []
    for window in candidates:
        attempt = WitnessAttempt(center=window.center, width=window.width, j=window.j, status="")
        tried.append(attempt)
        if window.width < 4 * math.pi / delta:
            attempt.status = "too_narrow"
            continue
        if window.center + window.width / 4 >= nyquist:
            attempt.status = "aliased"
            continue
        grid, residue = _witness_grid(spec, delta, window, cells)
        value = energy(spec, grid)
        attempt.energy = value
        if value >= 0:
            attempt.status = "positive"
            logger.info(
                "delta=%g: window at %.4g gives E=%.3g, escalating", delta, window.center, value
            )
            continue
        attempt.status = "accepted"
        witness = ConcavityWitness(
            delta=delta,
            energy=value,
            window=window,
            bump_scale=window.width,
            xi_center=window.center,
            h=h,
            mean_defect=grid.mean_defect(),
            diameter=grid.diameter(),
            imag_residue=residue,
            tried=tried,
            grid=grid,
        )
        logger.info("delta=%g: witness from window at %.4g, E=%.3g", delta, window.center, value)
        return witness
    logger.error({"delta": delta, "tried": [t.model_dump() for t in tried]})
    raise WitnessNotFoundError(delta, tried)


class FlicForm(BaseModel):
    band: Tuple[float, float]
    band_integral: float
    energy: float
    ratio: Optional[float] = None


def _gauss_panels(lo, hi, panels, order=16):
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def band_integral(mu: GridMeasure, r: float, R: float) -> float:
    """int_{r <= |xi| <= R} |mu_hat(xi)|^2 d xi."""
    d = mu.dimension
    pts = mu.centers()[mu.values.ravel() != 0]
    if pts.shape[0] == 0:
        return 0.0
    extent = float(np.max(np.sqrt((pts**2).sum(axis=1)))) * 2 + mu.h
    panels = int(math.ceil((R - r) * extent / math.pi)) + 4
    rad, rw = _gauss_panels(r, R, panels)
    if d == 1:
        xi = np.concatenate([rad, -rad])[:, None]
        w = np.concatenate([rw, rw])
        return float(np.dot(w, np.abs(mu_hat(mu, xi)) ** 2))
    if d == 2:
        n_theta = max(64, int(math.ceil(2 * R * extent)) + 16)
        theta = 2 * math.pi * np.arange(n_theta) / n_theta
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        xi = (rad[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
        w = (rw * rad)[:, None] * np.full(n_theta, 2 * math.pi / n_theta)[None, :]
        return float(np.dot(w.ravel(), np.abs(mu_hat(mu, xi)) ** 2))
    if d == 3:
        n_cos = max(16, int(math.ceil(R * extent)) + 16)
        cz, cw = np.polynomial.legendre.leggauss(n_cos)
        n_phi = 2 * n_cos
        phi = 2 * math.pi * np.arange(n_phi) / n_phi
        sz = np.sqrt(1 - cz**2)
        dirs = np.stack(
            [
                sz[:, None] * np.cos(phi)[None, :],
                sz[:, None] * np.sin(phi)[None, :],
                np.broadcast_to(cz[:, None], (n_cos, n_phi)),
            ],
            axis=-1,
        ).reshape(-1, 3)
        ang_w = (cw[:, None] * np.full(n_phi, 2 * math.pi / n_phi)[None, :]).ravel()
        total = 0.0
        for node, weight in zip(rad, rw):
            total += weight * node**2 * float(np.dot(ang_w, np.abs(mu_hat(mu, node * dirs)) ** 2))
        return total
    raise DimensionError("band integrals are implemented for d <= 3, got d={}".format(d))


def flic_form(spec, mu: GridMeasure, band: Tuple[float, float]) -> FlicForm:
    """Band integral of |mu_hat|^2 next to E[mu], for estimating the FLIC constant."""
    r, R = band
    if not 0 <= r < R:
        raise ParameterError("band must satisfy 0 <= r < R, got {}".format(band))
    if mu.abs_mass == 0:
        return FlicForm(band=(r, R), band_integral=0.0, energy=0.0)
    require_mean_zero(mu)
    value = band_integral(mu, r, R)
    e = energy(spec, mu)
    ratio = e / value if value > 0 else None
    return FlicForm(band=(r, R), band_integral=value, energy=e, ratio=ratio)
