"""Set families and exact union-free / robust union-free verification.

Indices are 1-based everywhere on the public surface: ground elements live in
``1..m`` and sets are numbered ``1..n``.  Robustness fractions are carried as
:class:`fractions.Fraction` so the strict inequality
``|B_j0 & (B_j1 | ... | B_jk)| < alpha * |B_j0|`` is decided exactly.
"""
from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "FamilyError",
    "SetFamily",
    "RuffParams",
    "ViolationWitness",
    "Verdict",
    "CertificateVerdict",
    "FamilyStats",
    "parse_fraction",
    "verify_ruff",
    "verify_uff",
    "pairwise_certificate",
    "pairwise_intersections",
    "family_stats",
    "intersection_size",
]


class FamilyError(ValueError):
    """Invalid family, parameters, or a family/parameter mismatch."""


def parse_fraction(value: Any) -> Fraction:
    """Read ``"p/q"``, ints, Fractions, or decimal floats/strings exactly.

    Floats go through ``repr`` so ``0.1`` means one tenth, not its binary
    approximation.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise FamilyError(f"not a fraction: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise FamilyError(f"not a finite number: {value!r}")
        return Fraction(repr(value))
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise FamilyError(f"not a fraction: {value!r}") from exc


def format_fraction(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class SetFamily:
    """``n`` subsets of the ground set ``{1, ..., m}``, each a sorted tuple."""

    m: int
    sets: tuple[tuple[int, ...], ...]

    def __init__(self, m: int, sets: Iterable[Iterable[int]]):
        m = int(m)
        if m < 0:
            raise FamilyError(f"ground-set size must be >= 0, got {m}")
        normalized = []
        for j, s in enumerate(sets, start=1):
            items = sorted(int(e) for e in s)
            if any(a == b for a, b in zip(items, items[1:])):
                raise FamilyError(f"set {j} has duplicate elements")
            if items and (items[0] < 1 or items[-1] > m):
                raise FamilyError(f"set {j} has elements outside 1..{m}")
            normalized.append(tuple(items))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "sets", tuple(normalized))

    @property
    def n(self) -> int:
        return len(self.sets)

    def __len__(self) -> int:
        return len(self.sets)

    def __getitem__(self, j: int) -> tuple[int, ...]:
        """Set ``B_j`` by its 1-based index."""
        if not 1 <= j <= self.n:
            raise IndexError(f"set index {j} outside 1..{self.n}")
        return self.sets[j - 1]

    def sizes(self) -> list[int]:
        return [len(s) for s in self.sets]

    def uniform_size(self) -> int | None:
        """Common set size, or ``None`` if sizes differ (or the family is empty)."""
        sizes = set(self.sizes())
        return sizes.pop() if len(sizes) == 1 else None

    def masks(self) -> list[int]:
        """Sets as Python-int bitsets (bit ``e - 1`` for element ``e``)."""
        out = []
        for s in self.sets:
            mask = 0
            for e in s:
                mask |= 1 << (e - 1)
            out.append(mask)
        return out

    def incidence(self, dtype=np.uint8) -> np.ndarray:
        """``n x m`` 0-1 incidence array (row ``j-1`` is ``B_j``)."""
        inc = np.zeros((self.n, self.m), dtype=dtype)
        for row, s in enumerate(self.sets):
            if s:
                inc[row, np.asarray(s) - 1] = 1
        return inc

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "m": self.m, "sets": [list(s) for s in self.sets]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SetFamily":
        try:
            sets = data["sets"]
            m = data["m"]
        except (KeyError, TypeError) as exc:
            raise FamilyError("family JSON needs 'm' and 'sets'") from exc
        family = cls(m, sets)
        if "n" in data and int(data["n"]) != family.n:
            raise FamilyError(f"declared n={data['n']} but {family.n} sets given")
        return family

    def dump(self, path: str | Path, meta: dict[str, Any] | None = None) -> None:
        payload = self.to_dict()
        if meta is not None:
            payload["meta"] = meta
        Path(path).write_text(json.dumps(payload, indent=None, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SetFamily":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FamilyError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class RuffParams:
    """Parameters ``(n, m, d, k, alpha)`` of a robust union-free family.

    ``alpha == 1`` is the plain union-free condition on a uniform family.
    A single-set family is allowed with ``k == 1``; its condition is vacuous.
    """

    n: int
    m: int
    d: int
    k: int
    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", parse_fraction(self.alpha))
        if self.n < 1:
            raise FamilyError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.d <= self.m:
            raise FamilyError(f"need 1 <= d <= m, got d={self.d}, m={self.m}")
        if not 1 <= self.k <= max(self.n - 1, 1):
            raise FamilyError(f"need 1 <= k <= n-1, got k={self.k}, n={self.n}")
        if not 0 < self.alpha <= 1:
            raise FamilyError(f"need 0 < alpha <= 1, got {self.alpha}")

    @property
    def threshold(self) -> int:
        """Smallest overlap that violates ``overlap < alpha * d``."""
        return math.ceil(self.alpha * self.d)

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "m": self.m, "d": self.d, "k": self.k,
                "alpha": format_fraction(self.alpha)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RuffParams":
        return cls(int(data["n"]), int(data["m"]), int(data["d"]), int(data["k"]),
                   parse_fraction(data["alpha"]))


@dataclass(frozen=True)
class ViolationWitness:
    """A tuple ``(j0, others)`` on which the defining condition fails."""

    j0: int
    others: tuple[int, ...]
    overlap: int

    def to_dict(self) -> dict[str, Any]:
        return {"j0": self.j0, "others": list(self.others), "overlap": self.overlap}


@dataclass(frozen=True)
class Verdict:
    passed: bool
    witness: ViolationWitness | None = None

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class CertificateVerdict:
    certified: bool
    max_overlap: int
    worst_pair: tuple[int, int] | None

    def __bool__(self) -> bool:
        return self.certified


def intersection_size(a: Sequence[int], b: Sequence[int]) -> int:
    """Merge-scan intersection cardinality of two sorted sequences."""
    i = j = count = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            count += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return count


def _check_params(family: SetFamily, params: RuffParams) -> None:
    if family.n != params.n or family.m != params.m:
        raise FamilyError(
            f"family is {family.n} sets over m={family.m}, params say n={params.n}, m={params.m}")
    for j, s in enumerate(family.sets, start=1):
        if len(s) != params.d:
            raise FamilyError(f"set {j} has size {len(s)}, expected d={params.d}")


def _first_covering_tuple(masks: list[int], k: int, thresholds: list[int]) -> ViolationWitness | None:
    """Lexicographically least ``(j0, others)`` with overlap >= thresholds[j0].

    Depth-first over sorted ``others`` with prefix unions.  Once a prefix
    already reaches the threshold every completion violates too, and the
    first completion in lex order is the prefix padded with the next indices.
    """
    n = len(masks)
    for j0 in range(n):
        target = masks[j0]
        need = thresholds[j0]
        pool = [j for j in range(n) if j != j0]
        if len(pool) < k:
            continue
        found = _dfs(target, need, pool, masks, k)
        if found is not None:
            chosen, overlap = found
            return ViolationWitness(j0 + 1, tuple(j + 1 for j in chosen), overlap)
    return None


def _dfs(target: int, need: int, pool: list[int], masks: list[int], k: int):
    chosen: list[int] = []

    def rec(start: int, acc: int):
        depth = len(chosen)
        remaining = k - depth
        for pos in range(start, len(pool) - remaining + 1):
            union = acc | masks[pool[pos]]
            overlap = (target & union).bit_count()
            if overlap >= need:
                picked = chosen + [pool[pos]] + pool[pos + 1: pos + remaining]
                full = union
                for extra in pool[pos + 1: pos + remaining]:
                    full |= masks[extra]
                return picked, (target & full).bit_count()
            if remaining > 1:
                chosen.append(pool[pos])
                hit = rec(pos + 1, union)
                chosen.pop()
                if hit is not None:
                    return hit
        return None

    return rec(0, 0)


def verify_ruff(family: SetFamily, params: RuffParams) -> Verdict:
    """Exhaustively decide the robust union-free property.

    Checks every ``j0`` against every ``k``-subset of the remaining sets; on
    failure the witness is the lexicographically least violating tuple.
    """
    _check_params(family, params)
    thr = params.threshold
    if family.n - 1 < params.k:
        return Verdict(True)
    witness = _first_covering_tuple(family.masks(), params.k, [thr] * family.n)
    return Verdict(witness is None, witness)


def verify_uff(family: SetFamily, k: int) -> Verdict:
    """Decide whether no set is covered by the union of ``k`` others.

    Sets may have different sizes.  ``k == 0`` asks whether any set is empty.
    """
    if not 0 <= k <= family.n - 1:
        raise FamilyError(f"need 0 <= k <= n-1, got k={k}, n={family.n}")
    masks = family.masks()
    if k == 0:
        for j, s in enumerate(family.sets, start=1):
            if not s:
                return Verdict(False, ViolationWitness(j, (), 0))
        return Verdict(True)
    witness = _first_covering_tuple(masks, k, [len(s) for s in family.sets])
    return Verdict(witness is None, witness)


@dataclass(frozen=True)
class FamilyStats:
    n: int
    m: int
    min_size: int
    max_size: int
    mean_size: float
    max_intersection: int
    worst_pair: tuple[int, int] | None
    intersection_histogram: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n, "m": self.m,
            "min_size": self.min_size, "max_size": self.max_size, "mean_size": self.mean_size,
            "max_intersection": self.max_intersection,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "intersection_histogram": {str(k): v for k, v in sorted(self.intersection_histogram.items())},
        }


def pairwise_intersections(family: SetFamily, chunk_cells: int = 1 << 23):
    """Exhaustive pairwise intersection sizes over all ``i < j``.

    Returns ``(max_overlap, worst_pair, histogram)`` where ``worst_pair`` is
    the lexicographically least 1-based pair attaining the maximum.  Uses a
    chunked Gram product of the incidence matrix.  Every partial sum is an
    integer at most ``m``, so float32 is exact below 2**24 and float64 above.
    """
    n = family.n
    if n < 2:
        return 0, None, {}
    inc = family.incidence(np.float32 if family.m < 1 << 24 else np.float64)
    rows_per_chunk = max(1, chunk_cells // max(n, 1))
    hist = np.zeros(max(family.sizes()) + 1, dtype=np.int64)
    best = -1
    best_pair = None
    for start in range(0, n - 1, rows_per_chunk):
        stop = min(n - 1, start + rows_per_chunk)
        # columns >= start only; the leading square block is cut to its strict upper part
        gram = (inc[start:stop] @ inc[start:].T).astype(np.int32)
        width = stop - start
        gram[np.tril_indices(width, 0, gram.shape[1])] = -1
        flat = gram.ravel()
        hist += np.bincount(flat[flat >= 0], minlength=hist.size)[: hist.size]
        pos = int(np.argmax(flat))
        top = int(flat[pos])
        if top > best:
            best = top
            r, c = divmod(pos, gram.shape[1])
            best_pair = (start + r + 1, start + c + 1)
    histogram = {i: int(c) for i, c in enumerate(hist) if c}
    return best, best_pair, histogram


def pairwise_certificate(family: SetFamily, params: RuffParams) -> CertificateVerdict:
    """Sufficient test: every pairwise overlap is below ``alpha * d / k``.

    A union of ``k`` sets meets ``B_j0`` in at most the sum of the ``k``
    pairwise overlaps, so certification implies the robust property.
    """
    _check_params(family, params)
    top, pair, _ = pairwise_intersections(family)
    certified = top * params.k < params.alpha * params.d
    return CertificateVerdict(certified, top, pair)


def family_stats(family: SetFamily) -> FamilyStats:
    if family.n == 0:
        raise FamilyError("empty family")
    sizes = family.sizes()
    top, pair, hist = pairwise_intersections(family)
    return FamilyStats(
        n=family.n, m=family.m,
        min_size=min(sizes), max_size=max(sizes), mean_size=sum(sizes) / len(sizes),
        max_intersection=top, worst_pair=pair, intersection_histogram=hist,
    )
