"""Sparse signals, sensing matrices, and the three-valued sign measurement map."""
from __future__ import annotations

import itertools
import json
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .family import SetFamily

__all__ = [
    "SensingError",
    "SparseVector",
    "SensingMatrix",
    "SignPattern",
    "VALUE_MODELS",
    "matrix_from_family",
    "measure",
    "generate_signal",
    "load_matrix",
]

VALUE_MODELS = ("unit-positive", "random-signs", "adversarial-cancel", "condition-number")


class SensingError(ValueError):
    pass


@dataclass(frozen=True)
class SparseVector:
    """Length-``dim`` real vector stored as sorted ``(index, value)`` pairs, 1-based."""

    dim: int
    entries: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        pairs = sorted((int(i), float(v)) for i, v in self.entries)
        idx = [i for i, _ in pairs]
        if len(set(idx)) != len(idx):
            raise SensingError("duplicate indices in sparse vector")
        for i, v in pairs:
            if not 1 <= i <= self.dim:
                raise SensingError(f"index {i} outside 1..{self.dim}")
            if v == 0 or not math.isfinite(v):
                raise SensingError(f"entry {i} must be finite and nonzero, got {v}")
        object.__setattr__(self, "entries", tuple(pairs))

    @classmethod
    def from_dense(cls, values: Iterable[float]) -> "SparseVector":
        vals = [float(v) for v in values]
        return cls(len(vals), tuple((i + 1, v) for i, v in enumerate(vals) if v != 0))

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.entries)

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.entries]

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.entries]

    @property
    def l0(self) -> int:
        return len(self.entries)

    def condition_number(self) -> float:
        """Largest over smallest nonzero magnitude."""
        if not self.entries:
            raise SensingError("condition number undefined for the zero vector")
        mags = [abs(v) for v in self.values]
        return max(mags) / min(mags)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        for i, v in self.entries:
            out[i - 1] = v
        return out

    def norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.values))

    def scaled(self, c: float) -> "SparseVector":
        return SparseVector(self.dim, tuple((i, c * v) for i, v in self.entries))

    def to_dict(self) -> dict[str, Any]:
        return {"dim": self.dim, "entries": [[i, v] for i, v in self.entries]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SparseVector":
        return cls(int(data["dim"]), tuple((int(i), float(v)) for i, v in data.get("entries", [])))

    @classmethod
    def load(cls, path: str | Path) -> "SparseVector":
        return cls.from_dict(json.loads(Path(path).read_text()))


class SensingMatrix:
    """Dense ``m x n`` real matrix with entries in ``[-1, 1]``."""

    def __init__(self, values: Any, family: SetFamily | None = None):
        arr = np.array(values, dtype=float)
        if arr.ndim != 2:
            raise SensingError("sensing matrix must be two-dimensional")
        if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > 1):
            raise SensingError("sensing matrix entries must lie in [-1, 1]")
        arr.setflags(write=False)
        self.values = arr
        self.family = family

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.values == 0) | (self.values == 1)))

    def to_dict(self) -> dict[str, Any]:
        return {"m": self.m, "n": self.n, "values": self.values.tolist()}

    def __repr__(self) -> str:
        src = "family" if self.family is not None else "dense"
        return f"SensingMatrix(m={self.m}, n={self.n}, source={src})"


@dataclass(frozen=True)
class SignPattern:
    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if any(v not in (-1, 0, 1) for v in vals):
            raise SensingError("sign pattern entries must be -1, 0 or +1")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __neg__(self) -> "SignPattern":
        return SignPattern(tuple(-v for v in self.values))

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, v in enumerate(self.values, start=1) if v)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int8)

    def to_dict(self) -> dict[str, Any]:
        return {"values": list(self.values)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SignPattern":
        return cls(tuple(data["values"]))

    @classmethod
    def load(cls, path: str | Path) -> "SignPattern":
        return cls.from_dict(json.loads(Path(path).read_text()))


def matrix_from_family(family: SetFamily) -> SensingMatrix:
    """Column ``j`` is the indicator of ``B_j``."""
    return SensingMatrix(family.incidence(np.float64).T, family=family)


def load_matrix(path: str | Path) -> SensingMatrix:
    """Read a matrix JSON (``values``) or a family JSON (``sets``)."""
    data = json.loads(Path(path).read_text())
    if "sets" in data:
        return matrix_from_family(SetFamily.from_dict(data))
    arr = np.asarray(data["values"], dtype=float)
    if arr.ndim != 2:
        raise SensingError("matrix 'values' must be a list of rows")
    if ("m" in data and int(data["m"]) != arr.shape[0]) or ("n" in data and int(data["n"]) != arr.shape[1]):
        raise SensingError("declared m/n disagree with 'values'")
    return SensingMatrix(arr)


def measure(A: SensingMatrix, x: SparseVector, tau: float = 0.0) -> SignPattern:
    """``sign(A x)`` with ``sign(0) = 0``; ``|<a_i, x>| <= tau`` counts as zero.

    Row sums run only over the support of ``x``.  Two-term sums are
    correctly rounded by IEEE addition; longer ones go through ``math.fsum``,
    so the sign is that of the exact sum of the (rounded) products.
    """
    if x.dim != A.n:
        raise SensingError(f"signal dimension {x.dim} != matrix columns {A.n}")
    if tau < 0:
        raise SensingError("tau must be >= 0")
    out = np.zeros(A.m, dtype=np.int8)
    if not x.entries:
        return SignPattern(tuple(out.tolist()))
    cols = np.asarray(x.indices) - 1
    terms = A.values[:, cols] * np.asarray(x.values)
    sums = terms.sum(axis=1) if terms.shape[1] <= 2 else _exact_row_sums(terms)
    out[sums > tau] = 1
    out[sums < -tau] = -1
    return SignPattern(tuple(out.tolist()))


def _exact_row_sums(terms: np.ndarray) -> np.ndarray:
    # rows with at most two nonzero terms are already correctly rounded
    sums = terms.sum(axis=1)
    busy = np.flatnonzero(np.count_nonzero(terms, axis=1) > 2)
    for i in busy:
        sums[i] = math.fsum(terms[i])
    return sums


def generate_signal(
    n: int,
    k: int,
    value_model: str,
    seed: int,
    *,
    support: Iterable[int] | None = None,
    family: SetFamily | None = None,
    condition: float = 1e6,
) -> SparseVector:
    """Random ``k``-sparse test signal.

    Models:

    * ``unit-positive``: every nonzero value is 1.
    * ``random-signs``: magnitudes uniform on ``[1, 2)`` with fair random signs.
    * ``adversarial-cancel``: small integers chosen to zero out as many rows
      shared by two or more support columns as possible (needs ``family``).
    * ``condition-number``: magnitudes spanning exactly ``condition``
      (a single entry can only have ratio 1).

    ``support`` pins the support instead of drawing a uniform ``k``-subset.
    """
    if value_model not in VALUE_MODELS:
        raise SensingError(f"unknown value model {value_model!r}")
    rng = np.random.default_rng(seed)
    if support is None:
        if not 0 <= k <= n:
            raise SensingError(f"need 0 <= k <= n, got k={k}, n={n}")
        idx = sorted((rng.choice(n, size=k, replace=False) + 1).tolist())
    else:
        idx = sorted(int(i) for i in support)
        if len(idx) > n or len(set(idx)) != len(idx) or any(not 1 <= i <= n for i in idx):
            raise SensingError("support must be distinct indices in 1..n")
    s = len(idx)
    if s == 0:
        return SparseVector(n)

    if value_model == "unit-positive":
        vals = np.ones(s)
    elif value_model == "random-signs":
        vals = rng.uniform(1.0, 2.0, size=s) * rng.choice([-1.0, 1.0], size=s)
    elif value_model == "condition-number":
        if condition < 1:
            raise SensingError("condition number must be >= 1")
        base = 2.0 ** int(rng.integers(-4, 5))
        mags = np.exp(rng.uniform(0.0, math.log(condition), size=s))
        mags[0], mags[-1] = 1.0, condition
        rng.shuffle(mags)
        vals = base * mags * rng.choice([-1.0, 1.0], size=s)
    else:
        if family is None:
            raise SensingError("adversarial-cancel needs the family behind the matrix")
        if family.n != n:
            raise SensingError("family size does not match n")
        vals = _cancelling_values(family, idx, rng)
    return SparseVector(n, tuple(zip(idx, vals.tolist())))


_CANCEL_MAGNITUDES = (1, 2, 3)


def _cancelling_values(family: SetFamily, idx: list[int], rng: np.random.Generator) -> np.ndarray:
    """Small nonzero integers maximizing the number of zero rows inside intersections."""
    # Rows are grouped by which support columns cover them; only groups with
    # two or more members can cancel.
    groups: dict[tuple[int, ...], int] = {}
    members: dict[int, list[int]] = {}
    for pos, j in enumerate(idx):
        for e in family[j]:
            members.setdefault(e, []).append(pos)
    for cover in members.values():
        if len(cover) >= 2:
            key = tuple(cover)
            groups[key] = groups.get(key, 0) + 1
    choices = [v for v in _CANCEL_MAGNITUDES] + [-v for v in _CANCEL_MAGNITUDES]
    s = len(idx)
    if len(choices) ** s <= 50_000:
        candidates: Iterable[tuple[int, ...]] = itertools.product(choices, repeat=s)
    else:
        candidates = (tuple(rng.choice(choices, size=s).tolist()) for _ in range(20_000))
    best_score = -1
    best: list[tuple[int, ...]] = []
    for cand in candidates:
        score = sum(cnt for key, cnt in groups.items() if sum(cand[p] for p in key) == 0)
        if score > best_score:
            best_score, best = score, [cand]
        elif score == best_score:
            best.append(cand)
    pick = best[int(rng.integers(len(best)))]
    return np.asarray(pick, dtype=float)
