"""Majority-vote support recovery and two-stage approximate vector recovery."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .family import SetFamily
from .sensing import SignPattern, SparseVector

__all__ = [
    "RecoveryError",
    "ApproxConfig",
    "SupportEstimate",
    "GaussianSketch",
    "recover_support",
    "gaussian_measurements",
    "gaussian_stage",
    "estimate_direction",
    "approx_recover",
    "angular_error",
    "sphere_grid",
]

ESTIMATORS = ("linear", "net-decode")


class RecoveryError(ValueError):
    pass


@dataclass(frozen=True)
class ApproxConfig:
    epsilon: float = 0.1
    m2: int = 4096
    estimator: str = "linear"
    net_resolution: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.estimator == "net":
            object.__setattr__(self, "estimator", "net-decode")
        if self.estimator not in ESTIMATORS:
            raise RecoveryError(f"unknown estimator {self.estimator!r}")
        if not 0 < self.epsilon < 2:
            raise RecoveryError("epsilon must lie in (0, 2)")
        if self.m2 < 1:
            raise RecoveryError("m2 must be >= 1")
        if self.net_resolution is None:
            object.__setattr__(self, "net_resolution", min(0.01, self.epsilon))
        if not 0 < self.net_resolution <= self.epsilon:
            raise RecoveryError("net_resolution must lie in (0, epsilon]")


@dataclass(frozen=True)
class SupportEstimate:
    """Recovered support plus per-set vote counts.

    ``ties`` lists sets whose count is exactly ``d/2``; a verified family fed
    a genuine measurement never produces one.
    """

    support: frozenset[int]
    counts: tuple[int, ...]
    ties: tuple[int, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"support": sorted(self.support), "counts": list(self.counts), "ties": list(self.ties)}


def recover_support(family: SetFamily, b: SignPattern) -> SupportEstimate:
    """Keep ``j`` iff more than half of ``B_j``'s rows measured nonzero."""
    if len(b) != family.m:
        raise RecoveryError(f"pattern length {len(b)} != m={family.m}")
    d = family.uniform_size()
    if d is None:
        raise RecoveryError("support recovery needs a uniform family")
    nonzero = b.as_array() != 0
    rows = np.asarray(family.sets, dtype=np.int64) - 1
    counts = nonzero[rows].sum(axis=1) if family.n else np.zeros(0, dtype=np.int64)
    doubled = 2 * counts
    support = frozenset(int(j) + 1 for j in np.flatnonzero(doubled > d))
    ties = tuple(int(j) + 1 for j in np.flatnonzero(doubled == d))
    return SupportEstimate(support, tuple(int(c) for c in counts), ties)


@dataclass(frozen=True)
class GaussianSketch:
    """Non-adaptive second-stage measurements: ``m2`` full-width Gaussian rows and their signs."""

    rows: np.ndarray
    signs: np.ndarray

    def restricted(self, support: list[int]) -> np.ndarray:
        return self.rows[:, np.asarray(support, dtype=np.int64) - 1]


def gaussian_measurements(x: SparseVector | np.ndarray, config: ApproxConfig) -> GaussianSketch:
    """Draw ``m2`` standard Gaussian rows over all coordinates and record ``sign(<g, x>)``."""
    dense = x.to_dense() if isinstance(x, SparseVector) else np.asarray(x, dtype=float)
    rng = np.random.default_rng(config.seed)
    rows = rng.standard_normal((config.m2, dense.size))
    if isinstance(x, SparseVector) and x.entries:
        cols = np.asarray(x.indices) - 1
        signs = np.sign(rows[:, cols] @ np.asarray(x.values))
    else:
        signs = np.sign(rows @ dense)
    return GaussianSketch(rows, signs.astype(np.int8))


def sphere_grid(s: int, resolution: float) -> np.ndarray:
    """Points on the unit sphere in ``R^s`` (``s <= 3``) no farther than ~``resolution`` apart."""
    if s == 1:
        return np.array([[-1.0], [1.0]])
    if s == 2:
        count = math.ceil(2 * math.pi / resolution)
        theta = 2 * math.pi * np.arange(count) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if s == 3:
        pts = []
        rings = math.ceil(math.pi / resolution)
        for i in range(rings + 1):
            phi = math.pi * i / rings
            r = math.sin(phi)
            count = max(1, math.ceil(2 * math.pi * r / resolution))
            theta = 2 * math.pi * np.arange(count) / count
            pts.append(np.column_stack([r * np.cos(theta), r * np.sin(theta), np.full(count, math.cos(phi))]))
        return np.vstack(pts)
    raise RecoveryError(f"net-decode supports dimension <= 3, got {s}")


def estimate_direction(rows: np.ndarray, signs: np.ndarray, estimator: str = "linear",
                       resolution: float = 0.01) -> np.ndarray:
    """Unit-norm direction estimate from Gaussian rows (``m2 x s``) and their signs."""
    signs = np.asarray(signs, dtype=float)
    if not signs.any():
        raise RecoveryError("all second-stage signs are zero; the signal is zero")
    s = rows.shape[1]
    if estimator in ("net", "net-decode"):
        grid = sphere_grid(s, resolution)
        scores = np.zeros(len(grid), dtype=np.int64)
        step = max(1, (1 << 22) // max(rows.shape[0], 1))
        for start in range(0, len(grid), step):
            block = grid[start:start + step]
            scores[start:start + step] = (np.sign(rows @ block.T) == signs[:, None]).sum(axis=0)
        return grid[int(np.argmax(scores))].copy()
    if estimator != "linear":
        raise RecoveryError(f"unknown estimator {estimator!r}")
    v = signs @ rows / rows.shape[0]
    norm = np.linalg.norm(v)
    if norm == 0:
        raise RecoveryError("linear estimate vanished")
    return v / norm


def gaussian_stage(x_restricted: Any, config: ApproxConfig) -> np.ndarray:
    """Estimate ``x / |x|`` from ``m2`` fresh Gaussian sign measurements."""
    x = np.atleast_1d(np.asarray(x_restricted, dtype=float))
    if x.size < 1 or not x.any():
        raise RecoveryError("second stage needs a nonzero vector")
    if config.estimator == "net-decode" and x.size > 3:
        raise RecoveryError("net-decode is limited to dimension <= 3")
    sketch = gaussian_measurements(x, config)
    return estimate_direction(sketch.rows, sketch.signs, config.estimator, config.net_resolution)


def approx_recover(family: SetFamily, b1: SignPattern, sketch: GaussianSketch,
                   config: ApproxConfig) -> tuple[SparseVector, SupportEstimate]:
    """Support from the family measurements, then direction on that support.

    The Gaussian rows were drawn over every coordinate before the support
    was known; only their restriction is used here.
    """
    if sketch.rows.shape[1] != family.n:
        raise RecoveryError("sketch width does not match the family size")
    stage1 = recover_support(family, b1)
    support = sorted(stage1.support)
    if not support:
        if np.any(sketch.signs):
            raise RecoveryError("empty recovered support but nonzero second-stage signs")
        return SparseVector(family.n), stage1
    if config.estimator == "net-decode" and len(support) > 3:
        raise RecoveryError("net-decode is limited to supports of size <= 3")
    direction = estimate_direction(sketch.restricted(support), sketch.signs,
                                   config.estimator, config.net_resolution)
    entries = tuple((j, float(v)) for j, v in zip(support, direction) if v != 0)
    return SparseVector(family.n, entries), stage1


def _unit(x: Any) -> np.ndarray:
    v = x.to_dense() if isinstance(x, SparseVector) else np.asarray(x, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise RecoveryError("angular error undefined for a zero vector")
    return v / norm


def angular_error(x: Any, xhat: Any) -> float:
    """Euclidean distance between the normalizations, in ``[0, 2]``."""
    return float(np.linalg.norm(_unit(x) - _unit(xhat)))
