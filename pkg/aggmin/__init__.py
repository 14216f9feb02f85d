"""
aggmin

Interaction energy minimization toolkit: potential families, energies and
Euler-Lagrange residuals, Fourier concavity witnesses, the exact Cantor
steady state, an N-particle gradient flow and fractal diagnostics.
"""

__version__ = "0.1.0"

from .config import Settings  # noqa: E402
from .energy import (  # noqa: E402
    ExplicitMinimizer,
    PotentialField,
    appendix_identity_check,
    el_residual,
    energy,
    explicit_minimizer,
    field,
)
from .errors import AggminException  # noqa: E402
from .flow import SimConfig, Trajectory, simulate  # noqa: E402
from .fourier import build_witness, flic_form, scan_windows  # noqa: E402
from .measure import CantorIterate, GridMeasure, ParticleEnsemble, cantor_iterate  # noqa: E402
from .potential import (  # noqa: E402
    CantorPotential,
    HierGauss,
    PowerLaw,
    RepulsivePower,
    RieszQuad,
    load_spec,
    thresholds,
)

__all__ = [
    "Settings",
    "AggminException",
    "PowerLaw",
    "RepulsivePower",
    "RieszQuad",
    "HierGauss",
    "CantorPotential",
    "load_spec",
    "thresholds",
    "ParticleEnsemble",
    "GridMeasure",
    "CantorIterate",
    "cantor_iterate",
    "energy",
    "field",
    "PotentialField",
    "el_residual",
    "ExplicitMinimizer",
    "explicit_minimizer",
    "appendix_identity_check",
    "scan_windows",
    "build_witness",
    "flic_form",
    "SimConfig",
    "Trajectory",
    "simulate",
]
