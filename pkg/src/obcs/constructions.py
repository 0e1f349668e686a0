"""Robust union-free families: seeded Las Vegas sampling and Reed-Solomon designs."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, NamedTuple

import numpy as np

from .family import (
    FamilyError,
    RuffParams,
    SetFamily,
    format_fraction,
    pairwise_certificate,
    parse_fraction,
    verify_ruff,
)

__all__ = [
    "ConstructionError",
    "RandomRuffConfig",
    "SampledFamily",
    "Code",
    "sample_random_ruff",
    "reed_solomon_code",
    "design_from_code",
    "lift_k1_params",
    "is_prime",
    "BRUTE_FORCE_BUDGET",
]

BRUTE_FORCE_BUDGET = 10**8


class ConstructionError(RuntimeError):
    """Raised when a construction cannot produce a certified object."""

    def __init__(self, message: str, stats: dict[str, Any] | None = None):
        super().__init__(message)
        self.stats = stats or {}


@dataclass(frozen=True)
class RandomRuffConfig:
    """Target ``(n, k, alpha)`` plus the constants behind ``m`` and ``d``.

    ``m = ceil(c_m * k^2 * ln n / alpha^2)`` and ``d = ceil(c_d * k * ln n / alpha)``
    unless ``m`` / ``d`` are given explicitly.
    """

    n: int
    k: int
    alpha: Fraction = Fraction(1, 2)
    c_m: float = 100.0
    c_d: float = 10.0
    max_retries: int = 10
    seed: int = 0
    m: int | None = None
    d: int | None = None
    brute_force_budget: int = BRUTE_FORCE_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "alpha", parse_fraction(self.alpha))
        if self.n < 2:
            raise FamilyError(f"n must be >= 2, got {self.n}")
        if not 1 <= self.k <= self.n - 1:
            raise FamilyError(f"need 1 <= k <= n-1, got k={self.k}")
        if not 0 < self.alpha <= 1:
            raise FamilyError(f"need 0 < alpha <= 1, got {self.alpha}")
        if self.c_m <= 0 or self.c_d <= 0:
            raise FamilyError("c_m and c_d must be positive")
        if self.max_retries < 1:
            raise FamilyError("max_retries must be >= 1")

    @property
    def derived_m(self) -> int:
        if self.m is not None:
            return int(self.m)
        a = float(self.alpha)
        return math.ceil(self.c_m * self.k**2 * math.log(self.n) / a**2)

    @property
    def derived_d(self) -> int:
        if self.d is not None:
            return int(self.d)
        return math.ceil(self.c_d * self.k * math.log(self.n) / float(self.alpha))


class SampledFamily(NamedTuple):
    family: SetFamily
    params: RuffParams
    attempts: int
    verification: str

    def meta(self, config: RandomRuffConfig) -> dict[str, Any]:
        return {
            "construction": "random",
            "params": self.params.to_dict(),
            "c_m": config.c_m, "c_d": config.c_d,
            "seed": config.seed,
            "attempts": self.attempts,
            "verification": self.verification,
        }


def _attempt_family(n: int, m: int, d: int, seed: int) -> SetFamily:
    rng = np.random.default_rng(seed)
    sets = [np.sort(rng.choice(m, size=d, replace=False)) + 1 for _ in range(n)]
    return SetFamily(m, (s.tolist() for s in sets))


def sample_random_ruff(config: RandomRuffConfig) -> SampledFamily:
    """Draw uniform ``d``-subsets of ``[m]`` until the family verifies.

    Attempt ``t`` (0-based) uses seed ``config.seed ^ t``.  Brute-force
    verification is used while ``n^(k+1) * d`` fits the budget; beyond that
    the pairwise certificate decides acceptance.
    """
    n, k = config.n, config.k
    m, d = config.derived_m, config.derived_d
    if d > m:
        raise FamilyError(f"derived d={d} exceeds m={m}")
    params = RuffParams(n, m, d, k, config.alpha)
    brute = n ** (k + 1) * d <= config.brute_force_budget
    path = "brute-force" if brute else "pairwise-certificate"
    best_overlap = None
    for attempt in range(config.max_retries):
        family = _attempt_family(n, m, d, (config.seed ^ attempt) & 0xFFFFFFFFFFFFFFFF)
        if brute:
            verdict = verify_ruff(family, params)
            ok = verdict.passed
            seen = None if ok else verdict.witness.overlap
        else:
            cert = pairwise_certificate(family, params)
            ok = cert.certified
            seen = cert.max_overlap
        if ok:
            return SampledFamily(family, params, attempt + 1, path)
        if best_overlap is None or seen < best_overlap:
            best_overlap = seen
    stats = {"attempts": config.max_retries, "verification": path,
             "best_violating_overlap": best_overlap, "threshold": params.threshold}
    raise ConstructionError(
        f"no verified ({n},{m},{d},{k},{format_fraction(config.alpha)}) family "
        f"in {config.max_retries} attempts", stats)


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % p for p in range(2, math.isqrt(q) + 1))


@dataclass(frozen=True)
class Code:
    """Block code of length ``d`` over ``{0, ..., q-1}`` with an agreement bound."""

    q: int
    d: int
    codewords: tuple[tuple[int, ...], ...]
    max_agreement: int
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        words = tuple(tuple(int(s) for s in w) for w in self.codewords)
        for w in words:
            if len(w) != self.d or any(not 0 <= s < self.q for s in w):
                raise FamilyError(f"codeword {w} is not a length-{self.d} word over [{self.q}]")
        if len(set(words)) != len(words):
            raise FamilyError("codewords must be pairwise distinct")
        object.__setattr__(self, "codewords", words)

    @property
    def size(self) -> int:
        return len(self.codewords)

    @property
    def delta(self) -> Fraction:
        """Agreement fraction: distinct words agree on at most ``delta * d`` positions."""
        return Fraction(self.max_agreement, self.d)

    @property
    def rate(self) -> float:
        return math.log(self.size) / (self.d * math.log(self.q)) if self.size > 1 else 0.0

    def observed_max_agreement(self) -> int:
        """Exhaustive pairwise check of the declared bound."""
        arr = np.asarray(self.codewords, dtype=np.int64)
        best = 0
        for i in range(len(arr) - 1):
            agree = (arr[i + 1:] == arr[i]).sum(axis=1)
            best = max(best, int(agree.max()))
        return best


def reed_solomon_code(q: int, deg_bound: int, num_points: int) -> Code:
    """Evaluations of every polynomial of degree ``< deg_bound`` over GF(q).

    Evaluation points are ``0, ..., num_points - 1``.  Codewords are listed
    with coefficient tuples ``(a_0, ..., a_{D-1})`` in lexicographic order.
    """
    if not is_prime(q):
        raise FamilyError(f"q={q} is not prime (only prime fields are supported)")
    if not 1 <= deg_bound <= num_points:
        raise FamilyError(f"need 1 <= D <= d, got D={deg_bound}, d={num_points}")
    if num_points > q:
        raise FamilyError(f"need d <= q, got d={num_points}, q={q}")
    points = np.arange(num_points, dtype=np.int64)
    powers = np.stack([pow_mod(points, e, q) for e in range(deg_bound)])
    coeffs = np.array(list(itertools.product(range(q), repeat=deg_bound)), dtype=np.int64)
    words = (coeffs @ powers) % q
    return Code(q, num_points, tuple(map(tuple, words.tolist())), deg_bound - 1,
                meta={"construction": "reed-solomon", "q": q, "deg_bound": deg_bound,
                      "points": num_points})


def pow_mod(points: np.ndarray, e: int, q: int) -> np.ndarray:
    out = np.ones_like(points)
    for _ in range(e):
        out = (out * points) % q
    return out


def design_from_code(code: Code) -> tuple[SetFamily, RuffParams]:
    """One set ``{(i, c(i))}`` per codeword, flattened to ``(i-1)*q + c(i) + 1``.

    Two sets meet exactly where their codewords agree, so pairwise overlaps
    are at most ``max_agreement``; the returned ``alpha`` is
    ``(max_agreement + 1) / d``, the least fraction with denominator ``d``
    strictly above ``max_agreement / d``.
    """
    if code.size == 0:
        raise FamilyError("code has no codewords")
    q, d = code.q, code.d
    sets = [[i * q + s + 1 for i, s in enumerate(word)] for word in code.codewords]
    family = SetFamily(q * d, sets)
    alpha = min(Fraction(code.max_agreement + 1, d), Fraction(1))
    return family, RuffParams(family.n, family.m, d, 1, alpha)


def lift_k1_params(params: RuffParams, k_target: int) -> RuffParams:
    """Turn pairwise robustness ``alpha0`` into ``k``-wise robustness ``k * alpha0``."""
    if params.k != 1:
        raise FamilyError(f"lifting needs k=1 params, got k={params.k}")
    if k_target < 1:
        raise FamilyError(f"k_target must be >= 1, got {k_target}")
    alpha = params.alpha * k_target
    if alpha > 1:
        raise FamilyError(f"lifted alpha {format_fraction(alpha)} > 1 is vacuous")
    return RuffParams(params.n, params.m, params.d, k_target, alpha)
