"""Interaction energy, generated potentials and steady-state residuals.

Particle ensembles use direct pair sums without self-pairs. Grid measures use
FFT convolution against a kernel table whose centre entry is the cell average
of the kernel, so integrable singularities stay finite.
"""

import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate, linalg, optimize, signal, special
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .errors import DimensionError, NumericalError, ParameterError, RangeError, SingularityError
from .measure import (
    CantorIterate,
    GridMeasure,
    ParticleEnsemble,
    _support,
    mu_hat,
    require_mean_zero,
)
from .potential import R_MIN, CantorPotential, cell_average, explicit_window, integrable

logger = logging.getLogger(__name__)

PROBES_PER_AXIS = 64
PROBE_INFLATION = 1.25

_CHUNK = 1 << 22


def _kernel_values(spec, r, order: int = 0):
    """W^(order)(r) for r >= 0, with r = 0 allowed only where W is continuous."""
    r = np.asarray(r, dtype=float)
    zero = r == 0
    if np.any(zero):
        if spec.small_r_exponent() <= 0 or order > 0:
            raise SingularityError("kernel {} is singular at coincident points".format(spec.family))
        r = np.where(zero, R_MIN, r)
    return spec.evaluate(r, order)


def _kernel_table(spec, h: float, shape, order: int):
    """Kernel sampled at every lattice offset reachable on a grid of ``shape``.

    order 0 gives W, order 2 the Laplacian, and order 1 a list of the d
    gradient components. The zero offset holds the cell average.
    """
    d = len(shape)
    axes = [np.arange(-(n - 1), n) * h for n in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    r = np.sqrt(sum(m**2 for m in mesh))
    centre = tuple(n - 1 for n in shape)
    safe = np.where(r == 0, h, r)
    if order == 0:
        table = spec.evaluate(safe, 0)
        table[centre] = cell_average(spec, h, d)
        return table
    if not integrable(spec, order, d):
        raise SingularityError(
            "order-{} derivative of {} is not integrable in d={}".format(order, spec.family, d)
        )
    if order == 1:
        radial = spec.evaluate(safe, 1) / safe
        comps = []
        for m in mesh:
            comp = radial * m
            comp[centre] = 0.0
            comps.append(comp)
        return comps
    table = spec.evaluate(safe, 2) + (d - 1) * spec.evaluate(safe, 1) / safe
    table[centre] = cell_average(spec, h, d, laplacian=True)
    return table


def _check_dimension(spec, measure):
    d = measure.dimension
    if spec.dimension != d:
        raise DimensionError(
            "kernel is {}-dimensional but the measure lives in d={}".format(spec.dimension, d)
        )


def _check_grid_singularity(spec, grid: GridMeasure):
    if not integrable(spec, 0, grid.dimension) and np.any(grid.values != 0):
        logger.error({"family": spec.family, "d": grid.dimension, "h": grid.h})
        raise SingularityError(
            "{} is not locally integrable in d={}".format(spec.family, grid.dimension)
        )


def _grid_convolve(values, table):
    return signal.fftconvolve(values, table, mode="same")


def energy(spec, measure) -> float:
    """E = 1/2 sum_{i != j} w_i w_j W(x_i - x_j), or its grid analogue."""
    if isinstance(spec, CantorPotential) and isinstance(measure, CantorIterate):
        return _cantor_energy(spec, measure)
    _check_dimension(spec, measure)
    if isinstance(measure, ParticleEnsemble):
        if measure.n == 1:
            return 0.0
        r = pdist(measure.positions)
        i, j = np.triu_indices(measure.n, 1)
        return float(np.dot(measure.weights[i] * measure.weights[j], _kernel_values(spec, r)))
    if isinstance(measure, GridMeasure):
        _check_grid_singularity(spec, measure)
        table = _kernel_table(spec, measure.h, measure.extents, 0)
        potential = _grid_convolve(measure.values, table)
        return 0.5 * float(np.sum(measure.values * potential))
    raise ParameterError("unsupported measure type {}".format(type(measure).__name__))


def _cantor_energy(spec: CantorPotential, rho: CantorIterate) -> float:
    from .cantor import generated_potential

    if spec.m_ratio != rho.M or spec.cantor_level != rho.k:
        raise ParameterError("Cantor kernel and iterate disagree on (M, k)")
    primitive = generated_potential(rho.M, spec.alpha, rho.k).antiderivative()
    total = np.sum(primitive(rho.rights) - primitive(rho.lefts))
    return 0.5 * rho.height * float(total)


class PotentialField(object):
    """V = W * measure bound to one kernel and one measure, with cached samples."""

    def __init__(self, spec, measure):
        if not isinstance(measure, CantorIterate):
            _check_dimension(spec, measure)
        self.spec = spec
        self.measure = measure
        self._cache = {}

    def __repr__(self):
        return "PotentialField({}, {})".format(self.spec.family, type(self.measure).__name__)

    def sample(self, points=None, order: int = 0) -> np.ndarray:
        """V, grad V (shape (n, d)) or Laplacian V at ``points``.

        ``points=None`` on a grid measure samples every cell centre.
        """
        if order not in (0, 1, 2):
            raise ParameterError("order must be 0, 1 or 2, got {}".format(order))
        key = (order, None if points is None else np.asarray(points, dtype=float).tobytes())
        if key not in self._cache:
            self._cache[key] = self._compute(points, order)
        return self._cache[key]

    def _compute(self, points, order):
        if isinstance(self.measure, CantorIterate):
            return self._cantor(points, order)
        if points is None:
            if not isinstance(self.measure, GridMeasure):
                points = self.measure.positions
            else:
                return self._grid_fft(order)
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None] if self.measure.dimension == 1 else pts[None, :]
        if pts.shape[1] != self.measure.dimension:
            raise DimensionError(
                "points have {} coordinates, measure has d={}".format(
                    pts.shape[1], self.measure.dimension
                )
            )
        return self._direct(pts, order)

    def _cantor(self, points, order):
        from .cantor import cantor_derivative, exact_convolve, generated_field, generated_potential

        spec, rho = self.spec, self.measure
        same_ratio = isinstance(spec, CantorPotential) and spec.m_ratio == rho.M
        if not same_ratio or spec.cantor_level != rho.k:
            raise ParameterError("a Cantor iterate needs the matching Cantor kernel")
        if points is None:
            raise ParameterError("Cantor fields need explicit sample points")
        x = np.asarray(points, dtype=float).reshape(-1)
        if order == 0:
            return generated_potential(rho.M, spec.alpha, rho.k)(x)
        if order == 1:
            return generated_field(rho.M, spec.alpha, rho.k)(x)[:, None]
        regular = exact_convolve(cantor_derivative(rho.M, spec.alpha, rho.k).derivative(), rho)
        jump = rho.M / (rho.M - 2)
        return regular(x) - jump * rho.density(x)

    def _grid_fft(self, order):
        grid = self.measure
        _check_grid_singularity(self.spec, grid)
        table = _kernel_table(self.spec, grid.h, grid.extents, order)
        if order == 1:
            comps = [_grid_convolve(grid.values, t).ravel() for t in table]
            return np.stack(comps, axis=-1)
        return _grid_convolve(grid.values, table).ravel()

    def _direct(self, pts, order):
        sources, weights = _support(self.measure)
        charged = weights != 0
        sources, weights = sources[charged], weights[charged]
        d = pts.shape[1]
        on_grid = isinstance(self.measure, GridMeasure)
        centre = None
        out = np.zeros((pts.shape[0], d)) if order == 1 else np.zeros(pts.shape[0])
        step = max(1, _CHUNK // max(1, sources.shape[0]))
        for start in range(0, pts.shape[0], step):
            diff = pts[start : start + step, None, :] - sources[None, :, :]
            r = np.sqrt((diff**2).sum(axis=-1))
            zero = r == 0
            safe = np.where(zero, 1.0, r)
            if order == 0:
                vals = self.spec.evaluate(safe, 0)
            elif order == 1:
                vals = self.spec.evaluate(safe, 1) / safe
            else:
                vals = self.spec.evaluate(safe, 2) + (d - 1) * self.spec.evaluate(safe, 1) / safe
            if np.any(zero):
                if on_grid and order != 1:
                    if centre is None:
                        if not integrable(self.spec, order, d):
                            raise SingularityError(
                                "kernel is not integrable at a charged cell centre"
                            )
                        centre = cell_average(self.spec, self.measure.h, d, laplacian=order == 2)
                    vals = np.where(zero, centre, vals)
                else:
                    # self-pairs of particles, and the odd gradient at a cell centre, drop out
                    vals = np.where(zero, 0.0, vals)
            if order == 1:
                out[start : start + step] = np.einsum("ps,psk,s->pk", vals, diff, weights)
            else:
                out[start : start + step] = vals @ weights
        return out


def field(spec, measure, points=None, order: int = 0) -> np.ndarray:
    return PotentialField(spec, measure).sample(points, order)


class ELResidual(BaseModel):
    steady_max: float
    d2_violation: float
    plateau: float
    min_probe_value: Optional[float] = None
    probes: int = 0
    eps0: float = math.inf
    resolution: float


def _support_points(measure, support):
    points, weights = _support(measure)
    if support is None:
        return points[weights != 0]
    support = np.asarray(support)
    if support.dtype == bool:
        return points[support.reshape(-1)]
    return np.atleast_2d(support.astype(float))


def _resolution(measure, support_pts):
    if isinstance(measure, GridMeasure):
        return measure.h
    if support_pts.shape[0] < 2:
        return 0.0
    dist, _ = cKDTree(support_pts).query(support_pts, k=2)
    return float(np.median(dist[:, 1]))


def probe_grid(
    support_pts, h: float, eps0: float = math.inf, per_axis: int = PROBES_PER_AXIS
) -> np.ndarray:
    """Off-support probes: inflated bounding box, minus a tube of radius 2h around the support."""
    lo, hi = support_pts.min(axis=0), support_pts.max(axis=0)
    mid = (lo + hi) / 2
    half = np.maximum((hi - lo) / 2, h) * PROBE_INFLATION
    axes = [np.linspace(m - s, m + s, per_axis) for m, s in zip(mid, half)]
    mesh = np.meshgrid(*axes, indexing="ij")
    probes = np.stack([m.ravel() for m in mesh], axis=-1)
    dist, _ = cKDTree(support_pts).query(probes)
    keep = dist > 2 * h
    if math.isfinite(eps0):
        keep &= dist <= eps0
    return probes[keep]


def el_residual(
    spec, measure, eps0: float = math.inf, support=None, probes: bool = True
) -> ELResidual:
    """Steadiness on the support and the off-support condition V >= 2E/mass."""
    if isinstance(measure, CantorIterate):
        return _cantor_el_residual(spec, measure, eps0)
    handle = PotentialField(spec, measure)
    support_pts = _support_points(measure, support)
    if support_pts.shape[0] == 0:
        raise ParameterError("measure has empty support")
    h = _resolution(measure, support_pts)
    if isinstance(measure, GridMeasure):
        grad = handle.sample(None, 1)
        if support is None:
            mask = measure.values.ravel() != 0
            grad = grad[mask]
        elif np.asarray(support).dtype == bool:
            grad = grad[np.asarray(support).reshape(-1)]
        else:
            grad = handle.sample(support_pts, 1)
    else:
        grad = handle.sample(support_pts, 1)
    steady = float(np.max(np.sqrt((grad**2).sum(axis=-1))))
    mass = measure.total_mass
    plateau = 2 * energy(spec, measure) / mass
    result = ELResidual(
        steady_max=steady, d2_violation=0.0, plateau=plateau, eps0=eps0, resolution=h
    )
    if probes:
        pts = probe_grid(support_pts, h, eps0)
        if pts.shape[0]:
            low = float(np.min(handle.sample(pts, 0)))
            result.min_probe_value = low
            result.probes = pts.shape[0]
            result.d2_violation = max(0.0, plateau - low)
    logger.debug("el_residual %s: %s", spec.family, result.model_dump())
    return result


def _cantor_el_residual(spec, rho: CantorIterate, eps0: float) -> ELResidual:
    from .cantor import generated_field, generated_potential

    if not isinstance(spec, CantorPotential):
        raise ParameterError("a Cantor iterate needs the Cantor kernel")
    steady = generated_field(rho.M, spec.alpha, rho.k).max_abs_on(rho.intervals)
    potential = generated_potential(rho.M, spec.alpha, rho.k)
    plateau = 2 * energy(spec, rho) / rho.mass
    h = 1.5 / (PROBES_PER_AXIS - 1)
    x = np.linspace(-0.25, 1.25, PROBES_PER_AXIS)
    outside = np.maximum(rho.lefts[None, :] - x[:, None], x[:, None] - rho.rights[None, :])
    gap = np.min(np.maximum(outside, 0.0), axis=1)
    keep = gap > 2 * h
    if math.isfinite(eps0):
        keep &= gap <= eps0
    pts = x[keep]
    result = ELResidual(
        steady_max=steady, d2_violation=0.0, plateau=plateau, eps0=eps0, resolution=h
    )
    if pts.size:
        low = float(np.min(potential(pts)))
        result.min_probe_value = low
        result.probes = int(pts.size)
        result.d2_violation = max(0.0, plateau - low)
    return result


# explicit minimizers


def _sphere_area(d: int) -> float:
    """|S^(d-1)|, which is 2 for d = 1."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def _half_beta(d: int, q: float, extra: int = 0) -> float:
    # |S^(d-1)| * int_0^1 r^(d-1+extra) (1-r^2)^q dr
    return _sphere_area(d) * 0.5 * special.beta((d + extra) / 2, q + 1)


def unit_ball_field(d: int, b: float, q: float, u: float) -> float:
    """Radial component at u e_1 of int_B (1-|y|^2)^q |x-y|^(b-2) (x-y) dy."""
    if d == 1:
        left, _ = integrate.quad(lambda s: (1 - s) ** q, -1, u, weight="alg", wvar=(q, b - 1))
        right, _ = integrate.quad(lambda s: -((1 + s) ** q), u, 1, weight="alg", wvar=(b - 1, q))
        return left + right
    ring = _sphere_area(d - 1)

    def angular(s):
        def f(theta):
            c = math.cos(theta)
            z2 = u * u + s * s - 2 * u * s * c
            return z2 ** ((b - 2) / 2) * (u - s * c) * math.sin(theta) ** (d - 2)

        value, _ = integrate.quad(f, 0, math.pi, limit=200)
        return value

    def inner(s):
        return (1 - s * s) ** q * s ** (d - 1) * angular(s)

    def outer(s):
        # (1 - s)^q goes into the quadrature weight
        return (1 + s) ** q * s ** (d - 1) * angular(s)

    left, _ = integrate.quad(inner, 0, u, limit=200)
    right, _ = integrate.quad(outer, u, 1, weight="alg", wvar=(0, q), limit=200)
    return ring * (left + right)


def _cap_primitive(y, c, q):
    """int_0^y (c^2 - t^2)^q dt for |y| clipped to c."""
    c = np.asarray(c, dtype=float)
    safe = np.where(c > 0, c, 1.0)
    t2 = np.minimum((np.asarray(y) / safe) ** 2, 1.0)
    scale = 0.5 * safe ** (2 * q + 1) * special.beta(0.5, q + 1)
    value = np.sign(y) * scale * special.betainc(0.5, q + 1, t2)
    return np.where(c > 0, value, 0.0)


class ExplicitMinimizer(BaseModel):
    """Radial minimizer of |x|^a/a - |x|^b/b for a in {2, 4} on the ball of radius R."""

    model_config = ConfigDict(frozen=True)

    d: int
    a: int
    b: float
    R: float
    A: Optional[float] = None
    A1: Optional[float] = None
    A2: Optional[float] = None
    analytic_radius: Optional[float] = None

    @property
    def exponent(self) -> float:
        return 1 - (self.b + self.d) / 2

    def _terms(self):
        """(coefficient, exponent) pairs with rho = sum coef (R^2 - r^2)^q."""
        p = self.exponent
        if self.a == 2:
            return [(self.A, p)]
        return [(self.A1 * self.R**2, p), (self.A2, p + 1)]

    def density(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < self.R
        gap = np.where(inside, self.R**2 - r**2, 1.0)
        out = sum(coef * gap**q for coef, q in self._terms())
        out = np.where(inside, out, 0.0)
        return float(out) if np.ndim(r) == 0 else out

    def mass(self) -> float:
        """Total mass by one-dimensional quadrature with the edge singularity as a weight."""
        S = _sphere_area(self.d)
        total = 0.0
        for coef, q in self._terms():
            value, _ = integrate.quad(
                lambda r: r ** (self.d - 1) * (self.R + r) ** q,
                0,
                self.R,
                weight="alg",
                wvar=(0, q),
            )
            total += coef * value
        return S * total

    def second_moment(self) -> float:
        return sum(
            coef * self.R ** (self.d + 2 + 2 * q) * _half_beta(self.d, q, 2)
            for coef, q in self._terms()
        )

    def radial_residual(self, r) -> np.ndarray:
        """Radial derivative of W * rho at radius r, by nested radial quadrature."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty(r.size)
        for i, u in enumerate(r):
            s = u / self.R
            if self.a == 2:
                out[i] = u - self.A * self.R * unit_ball_field(self.d, self.b, self.exponent, s)
            else:
                m2 = self.second_moment()
                p = self.exponent
                phi1 = unit_ball_field(self.d, self.b, p, s)
                phi2 = unit_ball_field(self.d, self.b, p + 1, s)
                repulsion = self.A1 * phi1 + self.A2 * phi2
                out[i] = u**3 + u * m2 * (1 + 2 / self.d) - self.R**3 * repulsion
        return out

    def to_grid(self, h: float, nodes: int = 8) -> GridMeasure:
        """Exact cell masses on a centred grid with an odd number of cells per axis.

        The last axis is integrated in closed form, the others by Gauss-Legendre.
        """
        if not h > 0:
            raise ParameterError("cell size must be > 0, got {}".format(h))
        m = int(math.ceil(self.R / h - 0.5))
        n = 2 * m + 1
        origin = np.full(self.d, -(m + 0.5) * h)
        edges = -(m + 0.5) * h + np.arange(n + 1) * h
        if self.d == 1:
            c2 = np.array([self.R**2])
            cols = self._column_masses(edges, c2)
            return GridMeasure(origin, h, cols[0])
        t, w = np.polynomial.legendre.leggauss(nodes)
        centres = (np.arange(n) - m) * h
        coords = (centres[:, None] + h / 2 * t[None, :]).ravel()
        weights = np.tile(w * h / 2, n)
        k = self.d - 1
        mesh = np.meshgrid(*([coords] * k), indexing="ij")
        wmesh = np.meshgrid(*([weights] * k), indexing="ij")
        rho2 = sum(g**2 for g in mesh).ravel()
        wt = np.prod(np.stack([g.ravel() for g in wmesh]), axis=0)
        out = np.empty((rho2.size, n))
        step = max(1, _CHUNK // (n + 1))
        for start in range(0, rho2.size, step):
            c2 = self.R**2 - rho2[start : start + step]
            out[start : start + step] = self._column_masses(edges, c2)
        out *= wt[:, None]
        # fold the quadrature nodes back onto their cells
        out = out.reshape((n, nodes) * k + (n,))
        for axis in range(k):
            out = out.sum(axis=axis + 1)
        return GridMeasure(origin, h, out)

    def _column_masses(self, edges, c2):
        c2 = np.maximum(c2, 0.0)
        c = np.sqrt(c2)[:, None]
        y = edges[None, :]
        total = 0.0
        for coef, q in self._terms():
            prim = _cap_primitive(np.clip(y, -c, c), c, q)
            total = total + coef * np.diff(prim, axis=1)
        return total


def explicit_minimizer(d: int, a: int, b: float) -> ExplicitMinimizer:
    """Closed-form radial minimizer.

    R (and A1, A2 for a = 4) come from the mass and steadiness conditions.
    """
    if a not in (2, 4) or not explicit_window(a, b, d):
        logger.error({"d": d, "a": a, "b": b})
        raise RangeError("no explicit minimizer for a={}, b={} in d={}".format(a, b, d))
    if a == 2:
        return _newtonian_like(d, b)
    return _quartic(d, b)


def _newtonian_like(d, b):
    A = -d * math.gamma(d / 2) * math.sin((b + d) * math.pi / 2)
    A /= (b + d - 2) * math.pi ** (d / 2 + 1)
    p = 1 - (b + d) / 2
    # mass = A |S| R^(2-b) B(d/2, p+1) / 2
    analytic = (A * _half_beta(d, p)) ** (-1 / (2 - b))

    def defect(R):
        return ExplicitMinimizer(d=d, a=2, b=b, R=R, A=A).mass() - 1

    hi = 2 * analytic
    while defect(hi) < 0:
        hi *= 2
    R = optimize.brentq(defect, hi / 1e3, hi, xtol=1e-14, rtol=1e-13)
    if abs(R - analytic) > 1e-6 * analytic:
        logger.error({"d": d, "b": b, "quadrature_R": R, "analytic_R": analytic})
        raise NumericalError(
            "radius from quadrature {} disagrees with the closed form {}".format(R, analytic)
        )
    return ExplicitMinimizer(d=d, a=2, b=b, R=R, A=A, analytic_radius=analytic)


COLLOCATION = (1 / 3, 2 / 3)


def _quartic(d, b):
    p = 1 - (b + d) / 2
    k1, k2 = _half_beta(d, p), _half_beta(d, p + 1)
    c1, c2 = _half_beta(d, p, 2), _half_beta(d, p + 1, 2)
    grow = 1 + 2 / d
    s = np.array(COLLOCATION)
    phi1 = np.array([unit_ball_field(d, b, p, x) for x in s])
    phi2 = np.array([unit_ball_field(d, b, p + 1, x) for x in s])

    # phi1 ~ kappa1 s and phi2 ~ kappa2 s + kappa3 s^3 reduce the system to a quadratic in A1
    kappa1 = phi1[0] / s[0]
    kappa2, kappa3 = np.linalg.solve(np.column_stack([s, s**3]), phi2)
    if not kappa3 > 0:
        raise NumericalError(
            "cubic coefficient of the repulsive field is not positive ({})".format(kappa3)
        )
    A2 = 1 / kappa3
    roots = np.roots(
        [
            k1 * kappa1,
            kappa1 * A2 * k2 + kappa2 * A2 * k1 - grow * c1,
            kappa2 * k2 * A2**2 - grow * c2 * A2,
        ]
    )
    guesses = [x.real for x in roots if abs(x.imag) < 1e-12 and x.real >= 0 and x.real + A2 >= 0]
    if not guesses:
        raise NumericalError("no admissible amplitude for a=4, b={}, d={}".format(b, d))
    A1 = min(guesses)
    R = (1 / (A1 * k1 + A2 * k2)) ** (1 / (4 - b))

    def system(v):
        a1, a2, r = v
        scale = r ** (4 - b)
        m2_over_r2 = scale * (a1 * c1 + a2 * c2)
        res = s**3 + s * m2_over_r2 * grow - a1 * phi1 - a2 * phi2
        return [scale * (a1 * k1 + a2 * k2) - 1, res[0], res[1]]

    sol = optimize.root(system, [A1, A2, R], method="hybr", options={"xtol": 1e-13})
    if not sol.success:
        logger.error({"d": d, "b": b, "message": sol.message})
        raise NumericalError("a=4 coefficient solve failed: {}".format(sol.message))
    A1, A2, R = (float(v) for v in sol.x)
    if A1 < 0 or A1 + A2 < 0 or R <= 0:
        raise NumericalError(
            "a=4 solution violates positivity (A1={}, A2={}, R={})".format(A1, A2, R)
        )
    return ExplicitMinimizer(d=d, a=4, b=b, R=R, A1=A1, A2=A2)


# positivity identity for -|x|^b / b in one dimension

FREQUENCY_NODES = 1 << 16
_PANEL = 64


class IdentityCheck(BaseModel):
    b: float
    lhs: float
    energy: float
    rhs_integral: float
    fitted_c: float
    predicted_c: float
    truncation: float
    cutoff: float
    positive: bool


def predicted_constant(b: float) -> float:
    """Gamma(b) sin(pi b / 2) / pi, continued by 1/2 at b = 0."""
    if b == 0:
        return 0.5
    return math.gamma(b) * math.sin(math.pi * b / 2) / math.pi


def _second_primitive(x, b):
    # G'' = -|x|^b / b, or -ln|x| at b = 0, with G(0) = 0
    ax = np.abs(x)
    if b == 0:
        safe = np.where(ax > 0, ax, 1.0)
        return np.where(ax > 0, -(ax**2 / 2) * (np.log(safe) - 1.5), 0.0)
    return -(ax ** (b + 2)) / (b * (b + 1) * (b + 2))


def _tail_integral(omega, b, cutoff):
    """int_cutoff^inf xi^(-b-3) cos(omega xi) d xi."""
    if omega == 0:
        return cutoff ** (-b - 2) / (b + 2)
    value, _ = integrate.quad(lambda x: x ** (-b - 3), cutoff, np.inf, weight="cos", wvar=omega)
    return value


def appendix_identity_check(b: float, mu: GridMeasure) -> IdentityCheck:
    """Compare int (W*mu) mu with int |xi|^(-b-1) |mu_hat|^2 for W = -|x|^b/b.

    ``mu`` is read as a piecewise-constant density, so the left side uses the
    exact cell-to-cell kernel and the right side the exact transform.
    """
    if not 0 <= b < 1:
        raise ParameterError("b must lie in [0, 1), got {}".format(b))
    if mu.dimension != 1:
        raise DimensionError("the identity is one-dimensional, got d={}".format(mu.dimension))
    require_mean_zero(mu)
    h = mu.h
    n = mu.values.size
    offsets = np.arange(n) * h
    table = _second_primitive(offsets + h, b) - 2 * _second_primitive(offsets, b)
    table = (table + _second_primitive(offsets - h, b)) / h**2
    lhs = float(mu.values @ linalg.toeplitz(table) @ mu.values)

    cutoff = 32 * math.pi / h
    panels = FREQUENCY_NODES // _PANEL
    t, w = np.polynomial.legendre.leggauss(_PANEL)
    lo = np.arange(panels) / panels
    nodes = (lo[:, None] + (t[None, :] + 1) / (2 * panels)).ravel()
    weights = np.tile(w / (2 * panels), panels)
    xi = cutoff * nodes**2
    spectrum = np.abs(mu_hat(mu, xi[:, None])) ** 2 * np.sinc(xi * h / (2 * math.pi)) ** 2
    integrand = xi ** (-b - 1) * spectrum * 2 * cutoff * nodes
    head = 2 * float(np.dot(weights, integrand))

    # sinc^2 = 2 (1 - cos(xi h)) / (xi h)^2 turns the tail into cosine integrals
    r = np.correlate(mu.values, mu.values, mode="full")
    coef = np.zeros(2 * n + 1)
    coef[1:-1] += r
    coef[2:] -= r / 2
    coef[:-2] -= r / 2
    lags = np.arange(-n, n + 1)
    tail = 0.0
    for lag, c in zip(lags, coef):
        if c != 0:
            tail += c * _tail_integral(abs(lag) * h, b, cutoff)
    tail *= 2 * 2 / h**2
    rhs = head + tail
    fitted = lhs / rhs
    result = IdentityCheck(
        b=b,
        lhs=lhs,
        energy=lhs / 2,
        rhs_integral=rhs,
        fitted_c=fitted,
        predicted_c=predicted_constant(b),
        truncation=tail,
        cutoff=cutoff,
        positive=lhs > 0,
    )
    if not result.positive:
        logger.error(result.model_dump())
    return result
