"""Exact piecewise-polynomial verification of the Cantor steady states.

W_k' is piecewise linear and rho_k is piecewise constant, so every
convolution below is again piecewise polynomial. Segment integrals are done
with Gauss-Legendre rules that are exact for the degrees involved; nothing is
sampled on a grid.
"""

import logging
import math
import time
from functools import lru_cache
from typing import Dict, List, Optional, Sequence

import numpy as np
from numpy.polynomial import legendre
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, Field

from .errors import BreakpointOverflowError, ParameterError, ProbeOnSupportError
from .measure import CantorIterate, cantor_iterate
from .potential import check_cantor_parameters

logger = logging.getLogger(__name__)

COALESCE_TOL = 1e-14
MAX_BREAKPOINTS = 500_000
DEFAULT_K_MAX = 8

_PAIR_CHUNK = 1 << 20


class PiecewisePoly(object):
    """Polynomials on consecutive segments, stored in each segment's window coordinate.

    On segment i = [p_i, p_{i+1}] the value is sum_m c[i, m] t^m with
    t = (2x - p_i - p_{i+1}) / (p_{i+1} - p_i). The first and last segments
    extend to -inf and +inf.
    """

    def __init__(
        self, breakpoints, coeffs, parity: Optional[str] = None, jumps: Sequence[float] = ()
    ):
        bp = np.asarray(breakpoints, dtype=float)
        c = np.asarray(coeffs, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ParameterError("need at least two breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise ParameterError("breakpoints must be strictly increasing")
        if c.ndim != 2 or c.shape[0] != bp.size - 1:
            raise ParameterError("expected coefficients of shape ({}, deg+1)".format(bp.size - 1))
        self.breakpoints = bp
        self.coeffs = c
        self.parity = parity
        self.jumps = tuple(jumps)
        # segment i owns [edges[i], edges[i+1]) with unbounded outer segments
        self._edges = np.concatenate([[-np.inf], bp[1:-1], [np.inf]])

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def n_segments(self) -> int:
        return self.coeffs.shape[0]

    def __repr__(self):
        return "PiecewisePoly(segments={}, degree={}, domain=[{:.6g}, {:.6g}])".format(
            self.n_segments, self.degree, self.breakpoints[0], self.breakpoints[-1]
        )

    @classmethod
    def from_function(cls, func, breakpoints, degree: int, **kwargs) -> "PiecewisePoly":
        """Interpolate ``func`` at Chebyshev nodes inside every segment.

        Exact whenever ``func`` is a polynomial of at most ``degree`` on each segment.
        """
        bp = np.asarray(breakpoints, dtype=float)
        t = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
        mid = (bp[:-1] + bp[1:]) / 2
        half = (bp[1:] - bp[:-1]) / 2
        x = mid[:, None] + half[:, None] * t[None, :]
        values = np.asarray(func(x.ravel()), dtype=float).reshape(x.shape)
        vander = P.polyvander(t, degree)
        coeffs = np.linalg.solve(vander, values.T).T
        return cls(bp, coeffs, **kwargs)

    def segment_index(self, x):
        idx = np.searchsorted(self._edges, x, side="right") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def _eval_segments(self, x, idx, coeffs=None):
        c = self.coeffs if coeffs is None else coeffs
        a = self.breakpoints[idx]
        b = self.breakpoints[idx + 1]
        t = (2 * x - a - b) / (b - a)
        out = c[idx, -1]
        for m in range(c.shape[1] - 2, -1, -1):
            out = out * t + c[idx, m]
        return out

    def __call__(self, x, nu: int = 0):
        if nu:
            return self.derivative(nu)(x)
        arr = np.asarray(x, dtype=float)
        out = self._eval_segments(arr, self.segment_index(arr))
        return float(out) if np.ndim(x) == 0 else out

    def derivative(self, nu: int = 1) -> "PiecewisePoly":
        c = self.coeffs
        scale = 2 / np.diff(self.breakpoints)
        for _ in range(nu):
            c = P.polyder(c, axis=1) * scale[:, None]
        parity = {"odd": "even", "even": "odd"}.get(self.parity) if nu % 2 else self.parity
        return PiecewisePoly(self.breakpoints, c, parity=parity)

    def antiderivative(self, anchor: Optional[float] = None) -> "PiecewisePoly":
        """Continuous antiderivative, zero at ``anchor`` (or at the left breakpoint)."""
        c = P.polyint(self.coeffs, lbnd=-1, axis=1) * (np.diff(self.breakpoints) / 2)[:, None]
        totals = c.sum(axis=1)  # value at t = 1
        c[:, 0] += np.concatenate([[0.0], np.cumsum(totals[:-1])])
        parity = {"odd": "even", "even": "odd"}.get(self.parity)
        out = PiecewisePoly(self.breakpoints, c, parity=parity)
        if anchor is not None:
            out.coeffs[:, 0] -= out(anchor)
        return out

    def extrema_on(self, lo: float, hi: float) -> np.ndarray:
        """Values at the candidate extremum points of the function on [lo, hi]."""
        pts = [lo, hi]
        inner = self.breakpoints[(self.breakpoints > lo) & (self.breakpoints < hi)]
        pts.extend(inner.tolist())
        first, last = self.segment_index(lo), self.segment_index(hi)
        for i in range(int(first), int(last) + 1):
            der = P.polyder(self.coeffs[i])
            if der.size < 2 or not np.any(der[1:]):
                continue
            a, b = self.breakpoints[i], self.breakpoints[i + 1]
            for root in P.polyroots(der):
                if abs(root.imag) > 1e-12:
                    continue
                x = (a + b) / 2 + (b - a) / 2 * root.real
                if lo < x < hi:
                    pts.append(x)
        return self(np.array(pts))

    def max_abs_on(self, intervals) -> float:
        best = 0.0
        for lo, hi in np.asarray(intervals, dtype=float):
            best = max(best, float(np.max(np.abs(self.extrema_on(lo, hi)))))
        return best


def _gauss_nodes(degree):
    return legendre.leggauss(degree // 2 + 1)


def convolve_at(f: PiecewisePoly, rho: CantorIterate, x) -> np.ndarray:
    """(f * rho)(x), integrating every polynomial piece with an exact Gauss rule."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a, b = rho.lefts, rho.rights
    nodes, weights = _gauss_nodes(f.degree)
    edges = f._edges
    out = np.empty(x.size)
    step = max(1, _PAIR_CHUNK // a.size)
    for start in range(0, x.size, step):
        xs = x[start : start + step, None]
        u_lo = xs - b[None, :]
        u_hi = xs - a[None, :]
        first = f.segment_index(u_lo)
        last = f.segment_index(u_hi)
        acc = np.zeros(u_lo.shape)
        for offset in range(int((last - first).max()) + 1):
            seg = np.minimum(first + offset, f.n_segments - 1)
            valid = first + offset <= last
            lo = np.maximum(u_lo, edges[seg])
            hi = np.minimum(u_hi, edges[seg + 1])
            half = np.where(valid & (hi > lo), (hi - lo) / 2, 0.0)
            mid = (hi + lo) / 2
            mid = np.where(half > 0, mid, f.breakpoints[seg])
            for t, w in zip(nodes, weights):
                acc += w * half * f._eval_segments(mid + half * t, seg)
        out[start : start + step] = acc.sum(axis=1) * rho.height
    return out


def coalesce(points, tol: float = COALESCE_TOL) -> np.ndarray:
    pts = np.sort(np.asarray(points, dtype=float))
    keep = np.concatenate([[True], np.diff(pts) > tol])
    return pts[keep]


def exact_convolve(
    f: PiecewisePoly, rho: CantorIterate, max_breakpoints: int = MAX_BREAKPOINTS
) -> PiecewisePoly:
    """f * rho as a PiecewisePoly of one degree higher."""
    kinks = f.breakpoints[1:-1]
    ends = np.concatenate([rho.lefts, rho.rights])
    needed = kinks.size * ends.size
    if needed > max_breakpoints:
        raise BreakpointOverflowError(
            "convolution needs up to {} breakpoints (limit {})".format(needed, max_breakpoints)
        )
    candidates = (kinks[:, None] + ends[None, :]).ravel()
    span = [f.breakpoints[0] + rho.lefts[0], f.breakpoints[-1] + rho.rights[-1]]
    bp = coalesce(np.concatenate([candidates, span]))
    logger.debug("exact_convolve: %d segments, degree %d", bp.size - 1, f.degree + 1)
    return PiecewisePoly.from_function(lambda x: convolve_at(f, rho, x), bp, f.degree + 1)


# Cantor potential W_k


def _omega(M, alpha, k, x):
    """The connecting part omega_k on x > 0 (identically zero at k = 0)."""
    if k == 0:
        return np.zeros_like(x)
    out = np.where(x >= 1, 0.5, 0.0)
    slope = 2 / (alpha - 2)
    for j in range(1, k + 1):
        Mj = M**j
        core = (x >= (M - 2) / Mj) & (x <= M / Mj)
        out = np.where(core, -(M - 0.5) + Mj * x, out)
        ramp = (x >= (M - alpha) / Mj) & (x <= (M - 2) / Mj)
        if j < k:
            flat = (x >= 1 / Mj) & (x <= (M - alpha) / Mj)
            out = np.where(flat, 0.5, out)
            out = np.where(ramp, -1.5 + slope * (M - 2) - slope * Mj * x, out)
        else:
            out = np.where(ramp, -1.5 + 0.75 * slope * (M - 2) - 0.75 * slope * Mj * x, out)
    return out


def cantor_breakpoints(M: float, alpha: float, k: int) -> np.ndarray:
    """Positive kinks of W_k': 1, (M-alpha), (M-2), M times M^-j for j = 1..k."""
    pts = []
    for j in range(1, k + 1):
        pts.extend(np.array([1.0, M - alpha, M - 2, M]) / M**j)
    return coalesce(pts) if pts else np.empty(0)


@lru_cache(maxsize=64)
def cantor_derivative(M: float, alpha: float, k: int) -> PiecewisePoly:
    """W_k' as an odd piecewise-linear function with the sgn jump at 0."""
    check_cantor_parameters(M, alpha, k)
    newton = M / (2 * M - 4)

    def wprime(x):
        ax = np.abs(x)
        return np.sign(x) * (newton * (-1 + 2 * ax) + _omega(M, alpha, k, ax))

    pos = cantor_breakpoints(M, alpha, k)
    # beyond |x| = 2 the outer segments extend the linear tail exactly
    pos = coalesce(np.concatenate([pos, [1.0, 2.0]]))
    bp = np.concatenate([-pos[::-1], [0.0], pos])
    return PiecewisePoly.from_function(wprime, bp, 1, parity="odd", jumps=(0.0,))


@lru_cache(maxsize=64)
def cantor_potential(M: float, alpha: float, k: int) -> PiecewisePoly:
    """W_k, normalised by W_k(0) = 0."""
    return cantor_derivative(M, alpha, k).antiderivative(anchor=0.0)


@lru_cache(maxsize=64)
def generated_potential(M: float, alpha: float, k: int) -> PiecewisePoly:
    """V_k = W_k * rho_k."""
    return exact_convolve(cantor_potential(M, alpha, k), cantor_iterate(M, k))


@lru_cache(maxsize=64)
def generated_field(M: float, alpha: float, k: int) -> PiecewisePoly:
    """W_k' * rho_k."""
    return exact_convolve(cantor_derivative(M, alpha, k), cantor_iterate(M, k))


def gate(M: float, alpha: float) -> bool:
    return (M + 2) / 3 < alpha <= 2 * (M - 10) / 5


def holder_exponent(M: float) -> float:
    return 1 - 1 / (1 + math.log(2) / math.log(M))


def predicted_dimension(M: float) -> float:
    return math.log(2) / math.log(M)


class Margin(BaseModel):
    x: float
    margin: float


class CantorVerification(BaseModel):
    M: float
    alpha: float
    k: int
    plateau: float
    plateau_convention: str = "W_k(0) = 0"
    steady_residual: Optional[float] = None
    plateau_spread: Optional[float] = None
    plateau_mirror_gap: Optional[float] = None
    margins: List[Margin] = []
    min_margin: Optional[float] = None
    gate: bool
    holder_exponent: float
    breakpoints: int
    tolerance: float
    passed: bool
    elapsed: float = Field(0.0, exclude=True)


def verify_steady(M: float, alpha: float, k: int, tolerance: float = 1e-10) -> CantorVerification:
    """Max |W_k' * rho_k| over supp rho_k from the exact convolution."""
    check_cantor_parameters(M, alpha, k)
    start = time.perf_counter()
    rho = cantor_iterate(M, k)
    field = generated_field(M, alpha, k)
    potential = generated_potential(M, alpha, k)
    residual = field.max_abs_on(rho.intervals)
    plateau = potential(0.0)
    spread = max(
        float(np.max(np.abs(potential.extrema_on(lo, hi) - plateau))) for lo, hi in rho.intervals
    )
    mirror = abs(potential(1.0) - plateau)
    passed = residual <= tolerance and mirror <= tolerance
    result = CantorVerification(
        M=M,
        alpha=alpha,
        k=k,
        plateau=plateau,
        steady_residual=residual,
        plateau_spread=spread,
        plateau_mirror_gap=mirror,
        gate=gate(M, alpha),
        holder_exponent=holder_exponent(M),
        breakpoints=field.n_segments + 1,
        tolerance=tolerance,
        passed=passed,
        elapsed=time.perf_counter() - start,
    )
    if not passed:
        logger.error(result.model_dump())
    else:
        logger.info("Cantor M=%g alpha=%g k=%d steady, residual %.3g", M, alpha, k, residual)
    return result


def verify_margin(
    M: float, alpha: float, k: int, probes, tolerance: float = 1e-10
) -> CantorVerification:
    """(W_k * rho_k)(x0) - c_k at probes off the support."""
    check_cantor_parameters(M, alpha, k)
    start = time.perf_counter()
    probes = np.atleast_1d(np.asarray(probes, dtype=float))
    rho = cantor_iterate(M, k)
    on_support = probes[rho.contains(probes)]
    if on_support.size:
        raise ProbeOnSupportError(on_support.tolist())
    potential = generated_potential(M, alpha, k)
    plateau = potential(0.0)
    margins = potential(probes) - plateau
    min_margin = float(margins.min()) if margins.size else None
    passed = bool(np.all(margins > 0))
    if not passed:
        logger.error({"M": M, "alpha": alpha, "k": k, "nonpositive": probes[margins <= 0].tolist()})
    return CantorVerification(
        M=M,
        alpha=alpha,
        k=k,
        plateau=plateau,
        margins=[Margin(x=float(x), margin=float(m)) for x, m in zip(probes, margins)],
        min_margin=min_margin,
        gate=gate(M, alpha),
        holder_exponent=holder_exponent(M),
        breakpoints=potential.n_segments + 1,
        tolerance=tolerance,
        passed=passed,
        elapsed=time.perf_counter() - start,
    )


class MarginProfile(BaseModel):
    M: float
    alpha: float
    levels: List[int]
    probes: List[float]
    margins: List[List[float]]
    uniform: bool


def margin_profile(M: float, alpha: float, probes, levels: Sequence[int]) -> MarginProfile:
    """Margins at fixed probes across levels; uniform if none drops below half its first value."""
    levels = list(levels)
    probes = np.atleast_1d(np.asarray(probes, dtype=float))
    rows = [verify_margin(M, alpha, k, probes) for k in levels]
    table = np.array([[m.margin for m in row.margins] for row in rows])
    uniform = bool(np.all(table > 0) and np.all(table >= 0.5 * table[0][None, :]))
    return MarginProfile(
        M=M,
        alpha=alpha,
        levels=levels,
        probes=probes.tolist(),
        margins=table.tolist(),
        uniform=uniform,
    )


def self_similarity_check(M: float, alpha: float, k: int, samples: int = 257) -> float:
    """Residual of V_k(x) - V_k(0) = (V_{k-1}(Mx) - V_{k-1}(0)) / (2M) on [0, 1/M]."""
    if k < 1:
        raise ParameterError("self-similarity needs k >= 1, got {}".format(k))
    check_cantor_parameters(M, alpha, k)
    x = np.linspace(0.0, 1.0 / M, samples)
    v_k = generated_potential(M, alpha, k)
    v_prev = generated_potential(M, alpha, k - 1)
    lhs = v_k(x) - v_k(0.0)
    rhs = (v_prev(M * x) - v_prev(0.0)) / (2 * M)
    return float(np.max(np.abs(lhs - rhs)))


def second_derivative_residual(M: float, alpha: float, k: int, per_interval: int = 5) -> float:
    """max |W_k'' * rho_k| inside supp rho_k, relative to (M/2)^k M/(M-2).

    W_k'' is the piecewise-constant derivative of W_k' plus -M/(M-2) delta_0
    from the sgn jump.
    """
    check_cantor_parameters(M, alpha, k)
    rho = cantor_iterate(M, k)
    regular = exact_convolve(cantor_derivative(M, alpha, k).derivative(), rho)
    frac = (np.arange(per_interval) + 0.5) / per_interval
    x = (rho.lefts[:, None] + rho.length * frac[None, :]).ravel()
    jump = M / (M - 2)
    residual = regular(x) - jump * rho.height
    return float(np.max(np.abs(residual)) / (rho.height * jump))


def moment_checks(M: float, k: int) -> Dict[str, float]:
    """Per-interval zeroth and first moment defects between levels k-1 and k."""
    if k < 1:
        raise ParameterError("moment checks need k >= 1, got {}".format(k))
    fine = cantor_iterate(M, k)
    coarse = cantor_iterate(M, k - 1)
    zeroth = 0.0
    first = 0.0
    for i in range(coarse.count):
        kids = (2 * i, 2 * i + 1)
        zeroth = max(zeroth, abs(sum(fine.moment(0, c) for c in kids) - coarse.moment(0, i)))
        first = max(first, abs(sum(fine.moment(1, c) for c in kids) - coarse.moment(1, i)))
    return {"zeroth": zeroth, "first": first}


def mirror_residual(M: float, alpha: float, k: int) -> float:
    """max |V_k(x) - V_k(1 - x)| over the breakpoints of V_k inside [0, 1]."""
    potential = generated_potential(M, alpha, k)
    bp = potential.breakpoints
    x = bp[(bp >= 0) & (bp <= 1)]
    return float(np.max(np.abs(potential(x) - potential(1 - x))))


def potential_profile(M: float, alpha: float, k: int, x) -> np.ndarray:
    return generated_potential(M, alpha, k)(np.asarray(x, dtype=float))


def default_probes(
    M: float, level: int = 2, count: int = 64, clearance: float = 2e-3
) -> np.ndarray:
    """Probes on [-0.2, 1.2] at least ``clearance`` from supp rho_level, plus -0.1, 0.5 and 1.1."""
    rho = cantor_iterate(M, level)
    grid = np.concatenate([np.linspace(-0.2, 1.2, 8 * count), [-0.1, 0.5, 1.1]])
    lo, hi = rho.lefts, rho.rights
    outside = np.maximum(lo[None, :] - grid[:, None], grid[:, None] - hi[None, :])
    gap = np.min(np.maximum(outside, 0.0), axis=1)
    keep = grid[gap >= clearance]
    fixed = keep[np.isin(keep, [-0.1, 0.5, 1.1])]
    rest = np.setdiff1d(keep, fixed)
    if rest.size:
        rest = rest[np.linspace(0, rest.size - 1, min(count, rest.size)).astype(int)]
    return np.unique(np.concatenate([fixed, rest]))
