import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DegenerateMeasureError, DimensionError, ParameterError

logger = logging.getLogger(__name__)

# M^-k stays far from underflow below this level
MAX_CANTOR_LEVEL = 40
# largest 2^k interval list we are willing to materialise
MAX_CANTOR_INTERVALS = 2**22

_CHUNK = 1 << 21


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ParticleEnsemble:
    """N weighted points in R^d."""

    positions: np.ndarray
    weights: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ParameterError("positions must be an (N, d) array with N >= 1")
        if not np.all(np.isfinite(pos)):
            raise ParameterError("positions must be finite")
        n = pos.shape[0]
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.array(self.weights, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise ParameterError("expected {} weights, got {}".format(n, w.shape[0]))
            if not np.all(np.isfinite(w)):
                raise ParameterError("weights must be finite")
        pos.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def is_probability(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.weights >= 0)) and abs(self.total_mass - 1.0) <= tol

    def center_of_mass(self) -> np.ndarray:
        return self.weights @ self.positions / self.total_mass

    def translated(self, shift) -> "ParticleEnsemble":
        return ParticleEnsemble(self.positions + np.asarray(shift, dtype=float), self.weights)

    def rotated(self, angle: float) -> "ParticleEnsemble":
        if self.dimension != 2:
            raise DimensionError(
                "rotation is defined for d=2 only, got d={}".format(self.dimension)
            )
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return ParticleEnsemble(self.positions @ rot.T, self.weights)

    def permuted(self, order) -> "ParticleEnsemble":
        order = np.asarray(order)
        return ParticleEnsemble(self.positions[order], self.weights[order])

    def header(self) -> str:
        return ",".join(["x", "y", "z"][: self.dimension] + ["w"])

    def to_csv(self, path):
        np.savetxt(
            path,
            np.column_stack([self.positions, self.weights]),
            delimiter=",",
            header=self.header(),
            comments="",
            fmt="%.17g",
        )

    @classmethod
    def from_csv(cls, path) -> "ParticleEnsemble":
        """Read a "x,y[,z],w" file; a leading t column keeps only the last time stamp."""
        with open(path) as fh:
            names = [c.strip() for c in fh.readline().split(",")]
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if names and names[0] == "t":
            data = data[data[:, 0] == data[-1, 0], 1:]
            names = names[1:]
        if not names or names[-1] != "w" or len(names) - 1 not in (1, 2, 3):
            raise ParameterError(
                "{}: expected header x,y[,z],w, got {}".format(path, ",".join(names))
            )
        return cls(data[:, :-1], data[:, -1])


@dataclass(frozen=True)
class GridMeasure:
    """Signed cell masses on a regular grid; cell i has centre origin + (i + 1/2) h."""

    origin: np.ndarray
    h: float
    values: np.ndarray

    def __post_init__(self):
        if not self.h > 0:
            raise ParameterError("cell size must be > 0, got {}".format(self.h))
        values = np.array(self.values, dtype=float)
        origin = np.array(self.origin, dtype=float).reshape(-1)
        if values.ndim != origin.shape[0]:
            raise ParameterError(
                "values have {} axes but origin has {} coordinates".format(
                    values.ndim, origin.shape[0]
                )
            )
        if not np.all(np.isfinite(values)):
            raise ParameterError("grid values must be finite")
        values.setflags(write=False)
        origin.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def from_density(cls, density: Callable, origin, h: float, extents) -> "GridMeasure":
        """Midpoint-rule cell masses of a density given as a function of (n, d) points."""
        shape = tuple(int(e) for e in extents)
        empty = cls(origin, h, np.zeros(shape))
        masses = np.asarray(density(empty.centers()), dtype=float) * h ** len(shape)
        return cls(origin, h, masses.reshape(shape))

    @classmethod
    def centered(cls, h: float, extents, values=None) -> "GridMeasure":
        shape = tuple(int(e) for e in extents)
        origin = -np.asarray(shape, dtype=float) * h / 2
        return cls(origin, h, np.zeros(shape) if values is None else values)

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def extents(self):
        return self.values.shape

    @property
    def total_mass(self) -> float:
        return math.fsum(self.values.ravel())

    @property
    def abs_mass(self) -> float:
        return math.fsum(np.abs(self.values).ravel())

    def mean_defect(self) -> float:
        """|total mass| relative to total variation."""
        total = self.abs_mass
        return abs(self.total_mass) / total if total else 0.0

    def axes(self):
        return [self.origin[i] + (np.arange(n) + 0.5) * self.h for i, n in enumerate(self.extents)]

    def centers(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def support_mask(self) -> np.ndarray:
        return self.values != 0

    def diameter(self) -> float:
        """Upper bound on diam(supp) from the support cells' corners."""
        mask = self.support_mask()
        if not mask.any():
            return 0.0
        pts = self.centers()[mask.ravel()]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        mid = (lo + hi) / 2
        radius = np.sqrt(((pts - mid) ** 2).sum(axis=1)).max()
        return float(2 * radius + self.h * math.sqrt(self.dimension))

    def shifted(self, cells) -> "GridMeasure":
        shift = np.broadcast_to(np.asarray(cells, dtype=float), (self.dimension,))
        return GridMeasure(self.origin + shift * self.h, self.h, self.values)

    def scaled(self, factor: float) -> "GridMeasure":
        return GridMeasure(self.origin, self.h, self.values * factor)

    def to_json(self) -> str:
        return json.dumps(
            {
                "origin": self.origin.tolist(),
                "h": self.h,
                "extents": list(self.extents),
                "values": self.values.ravel().tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GridMeasure":
        data = json.loads(text)
        try:
            values = np.asarray(data["values"], dtype=float).reshape(data["extents"])
            return cls(data["origin"], data["h"], values)
        except (KeyError, ValueError) as e:
            raise ParameterError("invalid grid JSON: {}".format(e))

    def save(self, path):
        np.savez(path, origin=self.origin, h=np.array(self.h), values=self.values)

    @classmethod
    def load(cls, path) -> "GridMeasure":
        with np.load(path) as data:
            return cls(data["origin"], float(data["h"]), data["values"])


def _cantor_lefts(M: float, k: int) -> np.ndarray:
    if float(M).is_integer():
        # integer ratio: endpoints are integers over M^k, rounded once
        m = int(M)
        nums = [0]
        for j in range(1, k + 1):
            step = (m - 1) * m ** (k - j)
            nums = [v for n in nums for v in (n, n + step)]
        denom = m**k
        return np.array([float(Fraction(n, denom)) for n in nums])
    digits = (np.arange(2**k)[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1
    weights = (M - 1) * M ** -np.arange(1, k + 1, dtype=float)
    return np.array([math.fsum(row) for row in digits * weights]) if k else np.zeros(1)


@dataclass(frozen=True)
class CantorIterate:
    """Level-k uniform density on the 2^k intervals I_{k,l} of the ratio-1/M Cantor set."""

    M: float
    k: int
    lefts: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return self.M ** (-self.k)

    @property
    def height(self) -> float:
        return (self.M / 2) ** self.k

    @property
    def count(self) -> int:
        return 2**self.k

    @property
    def rights(self) -> np.ndarray:
        if self.k == 0:
            return np.ones(1)
        # mirror symmetry l -> 2^k - 1 - l gives the right endpoints exactly
        return 1.0 - self.lefts[::-1]

    @property
    def intervals(self) -> np.ndarray:
        return np.column_stack([self.lefts, self.rights])

    @property
    def mass(self) -> float:
        return self.count * self.length * self.height

    def locate(self, x):
        """Index of the interval containing x, or -1."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.lefts, x, side="right") - 1
        safe = np.clip(idx, 0, self.count - 1)
        inside = (idx >= 0) & (x <= self.rights[safe])
        return np.where(inside, idx, -1)

    def contains(self, x):
        return self.locate(x) >= 0

    def density(self, x):
        return np.where(self.contains(x), self.height, 0.0)

    def moment(self, p: int, index: int) -> float:
        """Exact integral of x^p rho_k over the interval I_{k,index}."""
        a, b = self.lefts[index], self.rights[index]
        return self.height * (b ** (p + 1) - a ** (p + 1)) / (p + 1)

    def boxes(self, eps: float, anchor: float = 0.0, tol: float = 1e-9) -> int:
        """Number of half-open eps-boxes anchored at ``anchor`` met by the intervals."""
        lo = np.floor((self.lefts - anchor) / eps + tol).astype(np.int64)
        hi = np.ceil((self.rights - anchor) / eps - tol).astype(np.int64) - 1
        hi = np.maximum(hi, lo)
        count, last = 0, None
        for a, b in zip(lo, hi):
            if last is not None and a <= last:
                a = last + 1
            if b >= a:
                count += int(b - a + 1)
            last = b if last is None else max(last, b)
        return count


def cantor_iterate(M: float, k: int) -> CantorIterate:
    if not M > 3:
        raise ParameterError("Cantor ratio M must be > 3, got {}".format(M))
    if not 0 <= k <= MAX_CANTOR_LEVEL:
        raise ParameterError("Cantor level must lie in [0, {}], got {}".format(MAX_CANTOR_LEVEL, k))
    if 2**k > MAX_CANTOR_INTERVALS:
        raise ParameterError("level {} would need 2^{} intervals".format(k, k))
    lefts = _cantor_lefts(M, k)
    lefts.setflags(write=False)
    return CantorIterate(M=float(M), k=int(k), lefts=lefts)


def distance_class(M: float, k: int, l1: int, l2: int) -> Union[str, int]:
    """Distance class of two level-k intervals.

    "same" when l1 == l2, else j with |I_{k,l1} - I_{k,l2}| in [(M-2)M^-j, M^(1-j)].
    """
    for index in (l1, l2):
        if not 0 <= index < 2**k:
            raise ParameterError("interval index {} out of range for level {}".format(index, k))
    if l1 == l2:
        return "same"
    # the first differing branch decides the gap scale
    return k - (l1 ^ l2).bit_length() + 1


Measure = Union[ParticleEnsemble, GridMeasure]


def _support(measure):
    if isinstance(measure, ParticleEnsemble):
        return measure.positions, measure.weights
    if isinstance(measure, GridMeasure):
        return measure.centers(), measure.values.ravel()
    raise ParameterError("unsupported measure type {}".format(type(measure).__name__))


def mu_hat(measure: Measure, xi):
    """Fourier transform sum_j w_j exp(-i x_j . xi) at one frequency or an (n, d) batch."""
    points, weights = _support(measure)
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim <= 1
    xi = np.atleast_2d(xi.reshape(1, -1) if single else xi)
    if xi.shape[1] != points.shape[1]:
        raise DimensionError(
            "frequency has {} coordinates, measure has d={}".format(xi.shape[1], points.shape[1])
        )
    out = np.empty(xi.shape[0], dtype=complex)
    step = max(1, _CHUNK // max(1, points.shape[0]))
    for start in range(0, xi.shape[0], step):
        phase = xi[start : start + step] @ points.T
        out[start : start + step] = np.exp(-1j * phase) @ weights
    return complex(out[0]) if single else out


def require_mean_zero(measure: Measure, tol: float = 1e-12):
    points, weights = _support(measure)
    total = math.fsum(np.abs(weights))
    if total == 0:
        raise DegenerateMeasureError("measure is identically zero")
    if abs(math.fsum(weights)) > tol * total:
        raise DegenerateMeasureError(
            "measure is not mean-zero (mass {:.3g})".format(math.fsum(weights))
        )
