import json
import logging
import os
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
# stable element ids between identical runs
matplotlib.rcParams["svg.hashsalt"] = "aggmin"
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import BaseModel  # noqa: E402

logger = logging.getLogger(__name__)

# no creation date in the SVG header
_SVG_METADATA = {"Date": None}


class OutputDir(object):
    """Output directory that remembers every file written through it."""

    def __init__(self, root: str):
        self.root = root
        self.outputs: List[str] = []
        os.makedirs(root, exist_ok=True)

    def path(self, name: str) -> str:
        path = os.path.join(self.root, name)
        if path not in self.outputs:
            self.outputs.append(path)
        return path

    def write_json(self, name: str, payload) -> str:
        path = self.path(name)
        if isinstance(payload, BaseModel):
            text = payload.model_dump_json(by_alias=True, indent=2)
        else:
            text = json.dumps(payload, indent=2, sort_keys=True)
        with open(path, "w") as fh:
            fh.write(text)
            fh.write("\n")
        logger.debug("wrote %s", path)
        return path

    def write_csv(self, name: str, header: str, columns, fmt="%.17g") -> str:
        path = self.path(name)
        np.savetxt(
            path, np.column_stack(columns), delimiter=",", header=header, comments="", fmt=fmt
        )
        return path


def scatter_svg(path: str, positions: np.ndarray, title: str = ""):
    fig, ax = plt.subplots(figsize=(6, 6))
    if positions.shape[1] == 1:
        ax.plot(positions[:, 0], np.zeros(positions.shape[0]), "k.", markersize=2)
        ax.set_yticks([])
    else:
        ax.plot(positions[:, 0], positions[:, 1], "k.", markersize=2)
        ax.set_aspect("equal")
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)


def profile_svg(path: str, x, values, intervals: Optional[np.ndarray] = None, title: str = ""):
    """Potential profile with the support intervals marked along the bottom."""
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(x, values, "k-", linewidth=1)
    if intervals is not None:
        base = float(np.min(values))
        mids = intervals.mean(axis=1)
        ax.plot(mids, np.full(mids.size, base), "b.", markersize=3)
    ax.set_xlabel("x")
    ax.set_ylabel("W * rho")
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)


def series_svg(path: str, t, values, ylabel: str = "", title: str = ""):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, values, "k-")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
