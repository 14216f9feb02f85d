"""Particle gradient flow x_i' = -(1/N) sum_{j != i} grad W(x_i - x_j), integrated with RK4."""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .energy import energy
from .errors import BlowUpError, DimensionError, ParameterError
from .measure import ParticleEnsemble
from .potential import HierGauss, PotentialSpec

logger = logging.getLogger(__name__)


class UniformBox(BaseModel):
    """Uniform random points in the box prod [lo_i, hi_i]."""

    kind: Literal["uniform_box"] = "uniform_box"
    lo: List[float] = [0.0, 0.0]
    hi: List[float] = [0.5, 0.5]

    @property
    def dimension(self) -> int:
        return len(self.lo)

    def positions(self, n, rng):
        return rng.uniform(self.lo, self.hi, size=(n, len(self.lo)))


class Explicit(BaseModel):
    kind: Literal["explicit"] = "explicit"
    positions: List[List[float]]

    @property
    def dimension(self) -> int:
        return len(self.positions[0])

    def positions_array(self):
        return np.array(self.positions, dtype=float)


class Ring(BaseModel):
    """Points at uniformly random angles on a circle in the plane."""

    kind: Literal["ring"] = "ring"
    radius: float = 1.0
    center: List[float] = [0.0, 0.0]

    @property
    def dimension(self) -> int:
        return 2

    def positions(self, n, rng):
        theta = rng.uniform(0, 2 * math.pi, size=n)
        return np.column_stack([np.cos(theta), np.sin(theta)]) * self.radius + np.array(self.center)


InitSpec = Annotated[Union[UniformBox, Explicit, Ring], Field(discriminator="kind")]


def _default_spec():
    return HierGauss(d=2, alpha=3.0, lam=0.15, c_w=0.25, k_trunc=5, c2=0.2)


class SimConfig(BaseModel):
    """A gradient-flow run. Defaults give the reduced N=400 hierarchical-Gaussian run."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    spec: PotentialSpec = Field(default_factory=_default_spec)
    n: int = Field(400, alias="N")
    dt: float = 0.01
    T: float = 50.0
    init: InitSpec = Field(default_factory=UniformBox)
    seed: int = 1
    stride: int = 100
    r_min: float = 1e-8
    bound: float = 1e6

    @model_validator(mode="after")
    def _check(self):
        if self.n < 1:
            raise ParameterError("N must be >= 1, got {}".format(self.n))
        if not self.dt > 0:
            raise ParameterError("dt must be > 0, got {}".format(self.dt))
        if not self.T >= self.dt:
            raise ParameterError("T must be >= dt, got T={} and dt={}".format(self.T, self.dt))
        if self.stride < 1:
            raise ParameterError("stride must be >= 1, got {}".format(self.stride))
        if not self.r_min > 0:
            raise ParameterError("r_min must be > 0, got {}".format(self.r_min))
        if isinstance(self.init, UniformBox) and len(self.init.lo) != len(self.init.hi):
            raise ParameterError("uniform_box lo and hi need the same length")
        if isinstance(self.init, Explicit) and len(self.init.positions) != self.n:
            raise ParameterError(
                "explicit init has {} positions but N={}".format(len(self.init.positions), self.n)
            )
        if self.init.dimension != self.spec.dimension:
            raise DimensionError(
                "init is {}-dimensional but the kernel is {}-dimensional".format(
                    self.init.dimension, self.spec.dimension
                )
            )
        return self

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def initial_positions(self) -> np.ndarray:
        if isinstance(self.init, Explicit):
            return self.init.positions_array()
        rng = np.random.default_rng(self.seed)
        return self.init.positions(self.n, rng)


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    snapshots: List[ParticleEnsemble] = field(default_factory=list)
    energies: List[float] = field(default_factory=list)
    max_displacements: List[float] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def final(self) -> ParticleEnsemble:
        return self.snapshots[-1]

    def to_csv(self, path):
        """All snapshots in one file with a leading t column."""
        d = self.final.dimension
        header = ",".join(["t"] + ["x", "y", "z"][:d] + ["w"])
        rows = [
            np.column_stack([np.full(s.n, t), s.positions, s.weights])
            for t, s in zip(self.times, self.snapshots)
        ]
        np.savetxt(path, np.vstack(rows), delimiter=",", header=header, comments="", fmt="%.17g")

    def energy_to_csv(self, path):
        np.savetxt(
            path,
            np.column_stack([self.times, self.energies]),
            delimiter=",",
            header="t,energy",
            comments="",
            fmt="%.17g",
        )


def velocity(spec, x: np.ndarray, r_min: float = 1e-8) -> np.ndarray:
    """-(1/N) sum_{j != i} W'(r_ij) (x_i - x_j) / r_ij with r_ij floored at r_min.

    Each unordered pair is evaluated once; coincident pairs exert no force.
    """
    n = x.shape[0]
    if n == 1:
        return np.zeros_like(x)
    i, j = np.triu_indices(n, 1)
    diff = x[i] - x[j]
    r = np.sqrt((diff**2).sum(axis=1))
    apart = r > 0
    coef = np.zeros_like(r)
    coef[apart] = spec.evaluate(np.maximum(r[apart], r_min), 1) / r[apart]
    force = coef[:, None] * diff
    v = np.empty_like(x)
    for axis in range(x.shape[1]):
        v[:, axis] = np.bincount(i, force[:, axis], n) - np.bincount(j, force[:, axis], n)
    return -v / n


def rk4_step(spec, x, dt, r_min):
    k1 = velocity(spec, x, r_min)
    k2 = velocity(spec, x + 0.5 * dt * k1, r_min)
    k3 = velocity(spec, x + 0.5 * dt * k2, r_min)
    k4 = velocity(spec, x + dt * k3, r_min)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate(config: SimConfig) -> Trajectory:
    start = time.perf_counter()
    spec = config.spec
    x = config.initial_positions()
    weights = np.full(x.shape[0], 1.0 / x.shape[0])
    traj = Trajectory()

    def record(t, pos):
        snap = ParticleEnsemble(pos.copy(), weights)
        traj.times.append(t)
        traj.snapshots.append(snap)
        traj.energies.append(energy(spec, snap))

    record(0.0, x)
    steps = config.steps
    logger.info("simulating %d particles for %d steps (dt=%g)", x.shape[0], steps, config.dt)
    for step in range(1, steps + 1):
        nxt = rk4_step(spec, x, config.dt, config.r_min)
        peak = float(np.max(np.abs(nxt))) if np.all(np.isfinite(nxt)) else math.inf
        if peak > config.bound:
            logger.error(
                {"step": step, "t": step * config.dt, "max_abs": peak, "bound": config.bound}
            )
            raise BlowUpError(step, step * config.dt, peak)
        traj.max_displacements.append(float(np.max(np.sqrt(((nxt - x) ** 2).sum(axis=1)))))
        x = nxt
        if step % config.stride == 0 or step == steps:
            record(step * config.dt, x)
            logger.debug("t=%g energy=%.12g", step * config.dt, traj.energies[-1])
    traj.elapsed = time.perf_counter() - start
    logger.info("simulation finished in %.2fs, final energy %.12g", traj.elapsed, traj.energies[-1])
    return traj


class EnergyMonitor(BaseModel):
    max_uptick: float
    snapshots: int


def energy_monitor(traj: Trajectory) -> EnergyMonitor:
    """Largest relative energy increase between consecutive snapshots."""
    e = np.asarray(traj.energies, dtype=float)
    if e.size < 2:
        return EnergyMonitor(max_uptick=0.0, snapshots=int(e.size))
    upticks = np.diff(e) / np.maximum(1.0, np.abs(e[:-1]))
    return EnergyMonitor(max_uptick=float(np.max(upticks)), snapshots=int(e.size))


def load_config(path) -> SimConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ParameterError("cannot read config {}: {}".format(path, e))
    return SimConfig.model_validate_json(text)
