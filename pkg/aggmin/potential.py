"""Interaction kernel families.

Every family is a frozen pydantic model with a ``family`` discriminator so a
kernel can round-trip through JSON. Kernels are radial: ``evaluate(r, order)``
returns W, W' or W'' as functions of the radius r > 0.
"""

import logging
import math
from functools import lru_cache
from typing import Annotated, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator
from scipy import integrate, optimize

from .errors import DomainError, ParameterError, UnsupportedSpecError

logger = logging.getLogger(__name__)

# callers must not sample radii below this
R_MIN = 1e-12


class RieszConstant(BaseModel):
    """Coefficient c with F[c |x|^(alpha-d)] = |xi|^(-alpha) away from the origin."""

    model_config = ConfigDict(frozen=True)

    d: int
    alpha: float
    value: float
    log_branch: bool = False


def riesz_constant(d: int, alpha: float) -> RieszConstant:
    if d < 1:
        raise DomainError("dimension must be a positive integer, got {}".format(d))
    if not 0 < alpha < d + 2:
        raise DomainError("alpha must lie in (0, d+2) = (0, {}), got {}".format(d + 2, alpha))
    scale = math.pi ** (d / 2) * 2**alpha * math.gamma(alpha / 2)
    if alpha == d:
        # c |x|^0 is read as -2/(pi^{d/2} 2^alpha Gamma(alpha/2)) ln|x|
        return RieszConstant(d=d, alpha=alpha, value=-2.0 / scale, log_branch=True)
    return RieszConstant(d=d, alpha=alpha, value=math.gamma((d - alpha) / 2) / scale)


def _radius(r):
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("radius must be > 0, got min {}".format(np.min(arr) if arr.size else r))
    return arr


def _power_term(r, p, order):
    # |x|^p / p, read as ln|x| at p = 0
    if order == 0:
        return np.log(r) if p == 0 else r**p / p
    if order == 1:
        return r ** (p - 1)
    return (p - 1) * r ** (p - 2)


def _riesz_term(r, d, alpha, order):
    const = riesz_constant(d, alpha)
    c = const.value
    if const.log_branch:
        if order == 0:
            return c * np.log(r)
        if order == 1:
            return c / r
        return -c / r**2
    e = alpha - d
    if order == 0:
        return c * r**e
    if order == 1:
        return c * e * r ** (e - 1)
    return c * e * (e - 1) * r ** (e - 2)


class _Potential(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    @property
    def dimension(self) -> int:
        return self.d  # type: ignore[attr-defined]

    def evaluate(self, r, order: int = 0):
        """W(r), W'(r) or W''(r) for r > 0 (scalar in, float out)."""
        if order not in (0, 1, 2):
            raise ParameterError("order must be 0, 1 or 2, got {}".format(order))
        arr = _radius(r)
        out = self._kernel(arr, order)
        return float(out) if np.ndim(r) == 0 else out

    def fourier_hat(self, xi):
        family = self.family  # type: ignore[attr-defined]
        raise UnsupportedSpecError("{} has no closed-form Fourier transform".format(family))

    def small_r_exponent(self) -> float:
        """Power p of the singular part, W^(n) ~ r^(p-n) near 0 (p = 0 for a logarithm)."""
        raise NotImplementedError

    def _kernel(self, r, order):
        raise NotImplementedError


class PowerLaw(_Potential):
    family: Literal["power_law"] = "power_law"
    a: float
    b: float
    d: int = 1

    @model_validator(mode="after")
    def _check(self):
        if self.d < 1:
            raise ParameterError("dimension must be >= 1, got {}".format(self.d))
        if not self.a > self.b > -self.d:
            raise ParameterError(
                "power law requires a > b > -d, got a={}, b={}, d={}".format(self.a, self.b, self.d)
            )
        return self

    def _kernel(self, r, order):
        return _power_term(r, self.a, order) - _power_term(r, self.b, order)

    def fourier_hat(self, xi):
        if self.a != 2:
            raise UnsupportedSpecError(
                "Fourier transform of a power law needs a=2, got a={}".format(self.a)
            )
        # |x|^2/2 only charges xi = 0
        return RepulsivePower(b=self.b, d=self.d).fourier_hat(xi)

    def small_r_exponent(self):
        return self.b


class RepulsivePower(_Potential):
    """Pure repulsion W = -|x|^b / b (W = -ln|x| at b = 0)."""

    family: Literal["repulsive_power"] = "repulsive_power"
    b: float
    d: int = 1

    @model_validator(mode="after")
    def _check(self):
        if self.d < 1:
            raise ParameterError("dimension must be >= 1, got {}".format(self.d))
        if not self.b > -self.d:
            raise ParameterError(
                "repulsive power requires b > -d, got b={}, d={}".format(self.b, self.d)
            )
        return self

    def _kernel(self, r, order):
        return -_power_term(r, self.b, order)

    def fourier_hat(self, xi):
        upper = 1.0 if self.d == 1 else 2.0
        if not -self.d < self.b < upper:
            raise UnsupportedSpecError(
                "Fourier transform of -|x|^b/b needs -d < b < {} in d={}, got b={}".format(
                    upper, self.d, self.b
                )
            )
        xi = _radius(xi)
        const = riesz_constant(self.d, self.b + self.d)
        scale = -1.0 / const.value if const.log_branch else -1.0 / (self.b * const.value)
        out = scale * xi ** (-(self.b + self.d))
        return float(out) if np.ndim(xi) == 0 else out

    def small_r_exponent(self):
        return self.b


class RieszQuad(_Potential):
    family: Literal["riesz_quad"] = "riesz_quad"
    d: int
    alpha: float
    c2: float = 1.0

    @model_validator(mode="after")
    def _check(self):
        if self.d < 1:
            raise ParameterError("dimension must be >= 1, got {}".format(self.d))
        if not 0 < self.alpha < self.d + 2:
            raise ParameterError("alpha must lie in (0, d+2), got {}".format(self.alpha))
        if self.c2 < 0:
            raise ParameterError("c2 must be >= 0, got {}".format(self.c2))
        return self

    def _kernel(self, r, order):
        quad = (self.c2 * r**2 / 2, self.c2 * r, self.c2 * np.ones_like(r))[order]
        return _riesz_term(r, self.d, self.alpha, order) + quad

    def fourier_hat(self, xi):
        xi = _radius(xi)
        out = xi ** (-self.alpha)
        return float(out) if np.ndim(xi) == 0 else out

    def small_r_exponent(self):
        return self.alpha - self.d


class HierGauss(_Potential):
    """Riesz kernel plus quadratic confinement minus a ladder of K Gaussians."""

    family: Literal["hier_gauss"] = "hier_gauss"
    d: int
    alpha: float
    lam: float = Field(alias="lambda")
    c_w: float
    k_trunc: int
    c2: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        if self.d < 1:
            raise ParameterError("dimension must be >= 1, got {}".format(self.d))
        if not 0 < self.alpha < self.d + 2:
            raise ParameterError("alpha must lie in (0, d+2), got {}".format(self.alpha))
        if self.d == 1 and 1 < self.alpha < 2:
            raise ParameterError("alpha in (1, 2) is not supported in one dimension")
        if not 0 < self.lam < 1:
            raise ParameterError("lambda must lie in (0, 1), got {}".format(self.lam))
        if self.c_w < 0:
            raise ParameterError("c_w must be >= 0, got {}".format(self.c_w))
        if self.k_trunc < 0:
            raise ParameterError("k_trunc must be >= 0, got {}".format(self.k_trunc))
        return self

    def _levels(self):
        return np.arange(1, self.k_trunc + 1, dtype=float)

    def _kernel(self, r, order):
        base = RieszQuad.model_construct(d=self.d, alpha=self.alpha, c2=self.c2)._kernel(r, order)
        if self.k_trunc == 0 or self.c_w == 0:
            return base
        k = self._levels()
        width2 = self.lam ** (2 * k)
        rr = np.expand_dims(r, -1)
        gauss = np.exp(-(rr**2) / (2 * width2))
        if order == 0:
            terms = -self.lam ** ((self.alpha - self.d) * k) * gauss
        elif order == 1:
            terms = self.lam ** ((self.alpha - self.d - 2) * k) * rr * gauss
        else:
            terms = self.lam ** ((self.alpha - self.d - 2) * k) * (1 - rr**2 / width2) * gauss
        return base + self.c_w * terms.sum(axis=-1)

    def fourier_hat(self, xi):
        xi = _radius(xi)
        out = xi ** (-self.alpha)
        if self.k_trunc and self.c_w:
            k = self._levels()
            xx = np.expand_dims(xi, -1)
            gauss = np.exp(-(self.lam ** (2 * k)) * xx**2 / 2)
            ladder = (self.lam ** (self.alpha * k) * gauss).sum(axis=-1)
            out = out - (2 * math.pi) ** (self.d / 2) * self.c_w * ladder
        return float(out) if np.ndim(xi) == 0 else out

    def truncation_bound(self) -> float:
        """Bound on the dropped tail of the Gaussian ladder beyond level K."""
        q = self.lam ** (self.alpha - self.d)
        if q >= 1:
            return math.inf
        return self.lam ** ((self.alpha - self.d) * (self.k_trunc + 1)) / (1 - q)

    def small_r_exponent(self):
        return self.alpha - self.d


class CantorPotential(_Potential):
    """W_k of the Cantor construction; the piecewise work lives in ``aggmin.cantor``."""

    family: Literal["cantor"] = "cantor"
    m_ratio: float
    alpha: float
    cantor_level: int

    @model_validator(mode="after")
    def _check(self):
        check_cantor_parameters(self.m_ratio, self.alpha, self.cantor_level)
        return self

    @property
    def dimension(self) -> int:
        return 1

    def _kernel(self, r, order):
        from .cantor import cantor_potential

        poly = cantor_potential(self.m_ratio, self.alpha, self.cantor_level)
        return poly(r, nu=order)

    def small_r_exponent(self):
        return 1.0


PotentialSpec = Annotated[
    Union[PowerLaw, RepulsivePower, RieszQuad, HierGauss, CantorPotential],
    Field(discriminator="family"),
]

_SPEC_ADAPTER = TypeAdapter(PotentialSpec)


def load_spec(data) -> "_Potential":
    """Build a PotentialSpec from a dict or a JSON string."""
    if isinstance(data, (str, bytes)):
        return _SPEC_ADAPTER.validate_json(data)
    return _SPEC_ADAPTER.validate_python(data)


def dump_spec(spec) -> Dict:
    return spec.model_dump(by_alias=True)


def check_cantor_parameters(M: float, alpha: float, k: Optional[int] = None):
    if not M > 3:
        raise ParameterError("Cantor ratio M must be > 3, got {}".format(M))
    if not 2 < alpha <= M - 1:
        raise ParameterError(
            "Cantor alpha must lie in (2, M-1] = (2, {}], got {}".format(M - 1, alpha)
        )
    if k is not None and not 0 <= k <= 40:
        raise ParameterError("Cantor level must lie in [0, 40], got {}".format(k))


def evaluate(spec, r, order: int = 0):
    return spec.evaluate(r, order)


def fourier_hat(spec, xi):
    return spec.fourier_hat(xi)


def truncation_bound(spec) -> float:
    if not isinstance(spec, HierGauss):
        return 0.0
    return spec.truncation_bound()


class Thresholds(BaseModel):
    model_config = ConfigDict(frozen=True)

    d: int
    alpha: float
    c_small: float
    C_big: float
    fractal_range_ok: bool


def thresholds(d: int, alpha: float) -> Thresholds:
    """c(d,alpha) and C(d,alpha) bracketing the Gaussian ladder weight c_W."""
    if d == 1:
        admissible = 0 < alpha <= 1 or 2 <= alpha < 3
    else:
        admissible = d >= 2 and 0 < alpha < d + 2
    if not admissible:
        raise DomainError("alpha={} is not admissible in d={}".format(alpha, d))
    c_small = alpha ** (-alpha / 2) * math.exp(alpha / 2) * (2 * math.pi) ** (-d / 2)
    const = riesz_constant(d, alpha)
    slope = -const.value if const.log_branch else const.value * (d - alpha)
    gap = d + 2 - alpha
    C_big = (math.e / gap) ** (gap / 2) * slope
    if d == 1:
        ok = 2 <= alpha < 3
    else:
        ok = (d + 2) / 2 < alpha < d + 2
    return Thresholds(d=d, alpha=alpha, c_small=c_small, C_big=C_big, fractal_range_ok=ok)


class SignScan(BaseModel):
    crossings: List[float]
    r_min: float
    r_max: float
    samples: int

    @property
    def unique(self) -> bool:
        return len(self.crossings) == 1

    @property
    def r_w(self) -> Optional[float]:
        return self.crossings[0] if self.unique else None


def sign_changes(
    spec, r_min: float = 1e-6, r_max: float = 10.0, samples: int = 100_000
) -> SignScan:
    """Dense log-spaced scan of W' with every sign change refined by bisection."""
    if not 0 < r_min < r_max:
        raise DomainError("need 0 < r_min < r_max, got {} and {}".format(r_min, r_max))
    r = np.geomspace(r_min, r_max, samples)
    dw = spec.evaluate(r, 1)
    sign = np.sign(dw)
    nz = np.flatnonzero(sign)
    crossings = []
    for i, j in zip(nz[:-1], nz[1:]):
        if sign[i] == sign[j]:
            continue
        root = optimize.brentq(lambda x: spec.evaluate(x, 1), r[i], r[j], xtol=1e-14, rtol=1e-12)
        crossings.append(float(root))
    logger.debug("W' sign scan of %s: %d crossings", spec.family, len(crossings))
    return SignScan(crossings=crossings, r_min=r_min, r_max=r_max, samples=samples)


def integrable(spec, order: int, d: int) -> bool:
    """Whether the order-th radial derivative of W is locally integrable in d dimensions."""
    return spec.small_r_exponent() - order > -d


@lru_cache(maxsize=256)
def cell_average(spec, h: float, d: int, laplacian: bool = False) -> float:
    """Mean of W (or of its Laplacian) over the centred cube [-h/2, h/2]^d."""
    if h <= 0:
        raise DomainError("cell size must be > 0, got {}".format(h))
    if d == 1 and not laplacian and isinstance(spec, (PowerLaw, RepulsivePower)):
        return _power_cell_average_1d(spec, h)

    def integrand(r):
        if laplacian:
            return spec.evaluate(r, 2) + (d - 1) * spec.evaluate(r, 1) / r
        return spec.evaluate(r, 0)

    half = h / 2
    if d == 1:
        value, _ = integrate.quad(integrand, 0, half, limit=200)
        return 2 * value / h
    # one of the 2^d d! wedges x_1 >= x_2 >= ... >= 0 of the cube
    factor = 2**d * math.factorial(d) / h**d
    if d == 2:
        value, _ = integrate.nquad(
            lambda u, s: integrand(s * math.sqrt(1 + u * u)) * s,
            [[0, 1], [0, half]],
        )
    elif d == 3:
        value, _ = integrate.nquad(
            lambda u2, u1, s: integrand(s * math.sqrt(1 + u1 * u1 * (1 + u2 * u2))) * s * s * u1,
            [[0, 1], [0, 1], [0, half]],
        )
    else:
        raise DomainError("cell averages are implemented for d <= 3, got {}".format(d))
    return factor * value


def _power_cell_average_1d(spec, h):
    half = h / 2

    def term(p):
        # mean over [-h/2, h/2] of |x|^p / p
        if p == 0:
            return math.log(half) - 1
        return half**p / (p * (p + 1))

    if isinstance(spec, PowerLaw):
        return term(spec.a) - term(spec.b)
    return -term(spec.b)


class PowerLawRegime(BaseModel):
    """Which known results apply to |x|^a/a - |x|^b/b in dimension d."""

    a: float
    b: float
    d: int
    flic: bool
    radial_symmetry: bool
    unique_mild_minimizer: bool
    explicit_minimizer: bool
    non_fractal_1d: bool


def explicit_window(a: float, b: float, d: int) -> bool:
    if a == 2:
        return 2 - d < b < min(4 - d, 2)
    if a == 4:
        return 2 - d < b < (2 + 2 * d - d * d) / (d + 1)
    return False


def power_law_regime(a: float, b: float, d: int) -> PowerLawRegime:
    in_range = 2 <= a <= 4 and -d < b < 2
    flic = in_range and not (d == 1 and 0 <= b < 1)
    if d >= 2:
        mild = a == 2 and 2 - d <= b < 4 - d
    else:
        mild = 2 <= a <= 3 and 1 <= b < 2
    return PowerLawRegime(
        a=a,
        b=b,
        d=d,
        flic=flic,
        radial_symmetry=in_range and d >= 2,
        unique_mild_minimizer=mild,
        explicit_minimizer=explicit_window(a, b, d),
        non_fractal_1d=d == 1 and 1 < b < 2,
    )
