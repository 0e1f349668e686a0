"""Exact evaluators for measurement bounds, and confusable-pair adversaries.

Every evaluator works in big integers or :class:`~fractions.Fraction`;
real-valued inputs such as ``epsilon`` are read as exact decimals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from .family import SetFamily, ViolationWitness, format_fraction, parse_fraction
from .sensing import SensingMatrix, SignPattern, SparseVector, measure

__all__ = [
    "BoundError",
    "AdversaryError",
    "BoundReport",
    "furedi_max_n",
    "min_m_support",
    "extract_family",
    "confusable_pair_nonneg",
    "confusable_pair_real",
    "regions_upper",
    "cover_lower",
    "gv_count",
    "gv_min_m",
    "min_m_approx",
    "bound_report",
    "DEFAULT_COVER_CONSTANT",
]

DEFAULT_COVER_CONSTANT = Fraction(1, 2)


class BoundError(ValueError):
    pass


class AdversaryError(RuntimeError):
    pass


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def furedi_max_n(m: int, k: int) -> int:
    """Largest possible size of a ``k``-union-free family over ``m`` points: ``k + C(m, t)``."""
    if k < 2:
        raise BoundError(f"need k >= 2, got {k}")
    if m < k:
        raise BoundError(f"need m >= k, got m={m}, k={k}")
    t = _ceil_div(m - k, math.comb(k + 1, 2))
    return k + math.comb(m, t)


def min_m_support(n: int, k: int) -> int:
    """Fewest points ``m`` for which a ``k``-union-free family of size ``n`` is not ruled out."""
    if not n > k >= 2:
        raise BoundError(f"need n > k >= 2, got n={n}, k={k}")
    m = k
    while furedi_max_n(m, k) < n:
        m += 1
    return m


def regions_upper(m: int, k: int) -> int:
    """Cells cut out by ``m`` hyperplanes in ``k`` dimensions, at most ``2^k C(m, k)``."""
    if k < 1:
        raise BoundError(f"need k >= 1, got {k}")
    if m < 2 * k:
        raise BoundError(f"need m >= 2k, got m={m}, k={k}")
    return 2**k * math.comb(m, k)


def cover_lower(k: int, epsilon: Any, c: Any = DEFAULT_COVER_CONSTANT) -> Fraction:
    """Size ``(c / epsilon)^k`` of an ``epsilon``-separated set on the sphere."""
    eps, cc = parse_fraction(epsilon), parse_fraction(c)
    if eps <= 0 or cc <= 0:
        raise BoundError("epsilon and c must be positive")
    if k < 1:
        raise BoundError(f"need k >= 1, got {k}")
    return (cc / eps) ** k


def min_m_approx(k: int, epsilon: Any, c: Any = DEFAULT_COVER_CONSTANT) -> int:
    """Smallest ``m >= 2k`` with ``2^k C(m, k) >= (c / epsilon)^k``."""
    target = cover_lower(k, epsilon, c)
    m = 2 * k
    while regions_upper(m, k) < target:
        m += 1
    return m


def _gv_radius(k: int, eps: Fraction) -> int:
    return max(1, math.floor(eps * k))


def gv_count(n: int, k: int, epsilon: Any) -> Fraction:
    """Packing count ``C(n, k) / C(n, floor(epsilon k))`` (radius floored, at least 1)."""
    eps = parse_fraction(epsilon)
    if not 1 <= k <= n:
        raise BoundError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0 < eps <= 1:
        raise BoundError(f"need 0 < epsilon <= 1, got {epsilon}")
    return Fraction(math.comb(n, k), math.comb(n, _gv_radius(k, eps)))


def gv_min_m(n: int, k: int, epsilon: Any) -> int:
    """Smallest ``m`` with ``2^m >= gv_count(n, k, epsilon)``."""
    count = gv_count(n, k, epsilon)
    m = 0
    while (count.denominator << m) < count.numerator:
        m += 1
    return m


@dataclass(frozen=True)
class BoundReport:
    name: str
    inputs: dict[str, Any]
    value: int | Fraction | float
    formula_ref: str

    def to_dict(self) -> dict[str, Any]:
        value = self.value
        if isinstance(value, Fraction):
            value = format_fraction(value)
        inputs = {k: format_fraction(v) if isinstance(v, Fraction) else v for k, v in self.inputs.items()}
        return {"name": self.name, "inputs": inputs, "value": value, "formula_ref": self.formula_ref}


_REPORTS: dict[str, tuple[Callable[..., Any], str]] = {
    "furedi_max_n": (furedi_max_n, "n <= k + C(m, t), t = ceil((m - k) / C(k + 1, 2))"),
    "min_m_support": (min_m_support, "min m such that k + C(m, t(m)) >= n"),
    "regions_upper": (regions_upper, "regions <= 2^k * C(m, k), m >= 2k"),
    "cover_lower": (cover_lower, "|cover| >= (c / epsilon)^k"),
    "min_m_approx": (min_m_approx, "min m >= 2k such that 2^k * C(m, k) >= (c / epsilon)^k"),
    "gv_count": (gv_count, "M = C(n, k) / C(n, max(1, floor(epsilon * k)))"),
    "gv_min_m": (gv_min_m, "min m such that 2^m >= C(n, k) / C(n, max(1, floor(epsilon * k)))"),
}


def bound_report(name: str, **inputs: Any) -> BoundReport:
    try:
        fn, formula = _REPORTS[name]
    except KeyError:
        raise BoundError(f"unknown bound {name!r}; choose from {sorted(_REPORTS)}") from None
    return BoundReport(name, dict(inputs), fn(**inputs), formula)


def extract_family(A: SensingMatrix) -> SetFamily:
    """Column supports ``{i : A_ij != 0}``."""
    nz = A.values != 0
    return SetFamily(A.m, ([int(i) + 1 for i in np.flatnonzero(nz[:, j])] for j in range(A.n)))


def _check_witness(A: SensingMatrix, witness: ViolationWitness, k: int | None) -> set[int]:
    others = tuple(witness.others)
    if len(set(others)) != len(others) or witness.j0 in others:
        raise AdversaryError("witness indices must be distinct")
    for j in (witness.j0, *others):
        if not 1 <= j <= A.n:
            raise AdversaryError(f"witness index {j} outside 1..{A.n}")
    if k is not None and len(others) > k - 1:
        raise AdversaryError(f"witness has {len(others)} covering sets, arity is k-1={k - 1}")
    family = extract_family(A)
    cover: set[int] = set()
    for j in others:
        cover.update(family[j])
    if not set(family[witness.j0]) <= cover:
        raise AdversaryError(f"set {witness.j0} is not covered by {list(others)}")
    return cover


def _confirm(A: SensingMatrix, x1: SparseVector, x2: SparseVector) -> tuple[SignPattern, SignPattern]:
    p1, p2 = measure(A, x1), measure(A, x2)
    if p1 != p2:
        raise AdversaryError("constructed pair is distinguishable; this is a bug")
    if x1.support == x2.support:
        raise AdversaryError("constructed pair shares its support; this is a bug")
    return p1, p2


def confusable_pair_nonneg(A: SensingMatrix, witness: ViolationWitness,
                           k: int | None = None) -> tuple[SparseVector, SparseVector]:
    """Two 0-1 signals a nonnegative matrix cannot tell apart.

    ``x1`` is the indicator of the covering sets and ``x2`` adds the covered
    column: every row that sees ``j0`` is already positive under ``x1``.
    """
    if np.any(A.values < 0):
        raise AdversaryError("matrix has negative entries")
    _check_witness(A, witness, k)
    x1 = SparseVector(A.n, tuple((j, 1.0) for j in witness.others))
    x2 = SparseVector(A.n, tuple((j, 1.0) for j in (*witness.others, witness.j0)))
    _confirm(A, x1, x2)
    return x1, x2


MAX_DRAWS = 64


def confusable_pair_real(A: SensingMatrix, witness: ViolationWitness, epsilon: float = 0.5,
                         seed: int = 0, k: int | None = None) -> tuple[SparseVector, SparseVector]:
    """Two real signals with different supports and identical sign patterns.

    ``x1`` lives on the covering sets and is scaled so each row they touch is
    more than ``epsilon`` from zero; ``x2 = x1 + epsilon * e_j0`` then moves
    every such row by at most ``epsilon``, and ``j0`` touches no other row.
    """
    if epsilon <= 0:
        raise AdversaryError("epsilon must be positive")
    cover = _check_witness(A, witness, k)
    others = list(witness.others)
    e0 = SparseVector(A.n, ((witness.j0, float(epsilon)),))
    if not others:
        x1 = SparseVector(A.n)
        _confirm(A, x1, e0)
        return x1, e0
    rows = np.asarray(sorted(cover), dtype=np.int64) - 1
    sub = A.values[np.ix_(rows, np.asarray(others) - 1)]
    rng = np.random.default_rng(seed)
    scale = 1.0
    for _ in range(MAX_DRAWS):
        raw = rng.standard_normal(len(others))
        smallest = float(np.min(np.abs(sub @ raw)))
        if smallest > 0:
            vals = raw * (2.0 * epsilon / smallest) * scale
            x1 = SparseVector(A.n, tuple(zip(others, vals.tolist())))
            x2 = SparseVector(A.n, tuple(zip((*others, witness.j0), (*vals.tolist(), float(epsilon)))))
            p1 = measure(A, x1)
            if p1 == measure(A, x2) and _rows_clear(A, x1, rows, epsilon):
                _confirm(A, x1, x2)
                return x1, x2
        scale *= 2.0
    raise AdversaryError(f"could not push covered rows {epsilon}-away from zero in {MAX_DRAWS} draws")


def _rows_clear(A: SensingMatrix, x1: SparseVector, rows: np.ndarray, epsilon: float) -> bool:
    cols = np.asarray(x1.indices) - 1
    return bool(np.all(np.abs(A.values[np.ix_(rows, cols)] @ np.asarray(x1.values)) > epsilon))
