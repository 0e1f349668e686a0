"""Parameter sweeps, Monte Carlo trials, CSV output and summaries.

A sweep is fully determined by its :class:`ExperimentConfig`.  Every random
draw is seeded through :func:`derive_seed`, a splitmix64 chain, so serial,
parallel and resumed runs produce the same bytes.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .bounds import AdversaryError, confusable_pair_nonneg, confusable_pair_real, extract_family
from .constructions import ConstructionError, RandomRuffConfig, sample_random_ruff
from .family import FamilyError, SetFamily, format_fraction, parse_fraction, verify_uff
from .recovery import ApproxConfig, RecoveryError, angular_error, approx_recover, gaussian_measurements, recover_support
from .sensing import VALUE_MODELS, SensingMatrix, generate_signal, matrix_from_family, measure

__all__ = [
    "HarnessError",
    "ExperimentConfig",
    "TrialRecord",
    "GridSummary",
    "splitmix64",
    "derive_seed",
    "run_experiment",
    "emit_csv",
    "load_csv",
    "summarize",
    "render_svg",
    "planted_cover_matrix",
]

MASK64 = (1 << 64) - 1
TAG_FAMILY = 0x46414D49   # "FAMI"
TAG_TRIAL = 0x545249414C  # "TRIAL"
TAG_SKETCH = 0x534B4554   # "SKET"

MODES = ("support-sweep", "approx-sweep", "adversary-audit")
GRID_KEYS = ("n", "k", "m", "c_m", "epsilon", "m2")
MODE_KEYS = {
    "support-sweep": {"n", "k", "m", "c_m"},
    "approx-sweep": {"n", "k", "m", "c_m", "epsilon", "m2"},
    "adversary-audit": {"n", "k", "m"},
}
GRID_DEFAULTS = {"c_m": 100.0, "epsilon": 0.1, "m2": 4096}


class HarnessError(ValueError):
    pass


def splitmix64(x: int) -> int:
    """One splitmix64 step (Steele, Lea, Flood constants)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *parts: int) -> int:
    h = splitmix64(master & MASK64)
    for p in parts:
        h = splitmix64(h ^ (int(p) & MASK64))
    return h


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    grid: dict[str, list]
    trials: int
    value_models: tuple[str, ...] = ()
    seed: int = 0
    alpha: Fraction = Fraction(1, 2)
    c_d: float = 10.0
    max_retries: int = 10
    estimator: str = "linear"
    budget_seconds: float | None = None
    budget_trials: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise HarnessError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trials < 1:
            raise HarnessError("trials must be >= 1")
        if not self.grid or any(not isinstance(v, list) or not v for v in self.grid.values()):
            raise HarnessError("grid must map parameter names to non-empty lists")
        unknown = set(self.grid) - MODE_KEYS[self.mode]
        if unknown:
            raise HarnessError(f"grid keys {sorted(unknown)} not used by {self.mode}")
        required = {"n", "k"} | ({"m"} if self.mode == "adversary-audit" else set())
        missing = required - set(self.grid)
        if missing:
            raise HarnessError(f"grid is missing {sorted(missing)}")
        models = tuple(self.value_models) or (
            VALUE_MODELS if self.mode == "support-sweep" else ("random-signs",))
        bad = [v for v in models if v not in VALUE_MODELS]
        if bad:
            raise HarnessError(f"unknown value models {bad}")
        object.__setattr__(self, "value_models", models)
        object.__setattr__(self, "alpha", parse_fraction(self.alpha))
        if self.workers < 1:
            raise HarnessError("workers must be >= 1")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise HarnessError(f"unknown config fields {sorted(extra)}")
        try:
            return cls(**{**data, "value_models": tuple(data.get("value_models", ()))})
        except TypeError as exc:
            raise HarnessError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def points(self) -> list[dict[str, Any]]:
        keys = [k for k in GRID_KEYS if k in self.grid]
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            point = dict(zip(keys, combo))
            if self.mode != "adversary-audit":
                for key, default in GRID_DEFAULTS.items():
                    if key in MODE_KEYS[self.mode]:
                        point.setdefault(key, default)
            out.append(point)
        return out


@dataclass
class TrialRecord:
    mode: str
    grid_index: int
    n: int
    k: int
    m: int | None = None
    d: int | None = None
    alpha: str | None = None
    c_m: float | None = None
    m2: int | None = None
    epsilon: float | None = None
    trial: int | None = None
    seed: int | None = None
    value_model: str | None = None
    support_size: int | None = None
    outcome: str = ""
    angular_error: float | None = None
    success: bool | None = None
    verification: str | None = None
    attempts: int | None = None
    ties: int | None = None
    detail: str | None = None


FIELD_NAMES = [f.name for f in fields(TrialRecord)]
_INT_FIELDS = {"grid_index", "n", "k", "m", "d", "m2", "trial", "seed", "support_size", "attempts", "ties"}
_FLOAT_FIELDS = {"c_m", "epsilon", "angular_error"}
MARKER_OUTCOMES = {"budget-exceeded"}


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _parse(name: str, text: str) -> Any:
    if name == "outcome":
        return text
    if text == "":
        return None
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    if name == "success":
        return text == "true"
    return text


def _rows_text(records: Iterable[TrialRecord], header: bool) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    if header:
        writer.writerow(FIELD_NAMES)
    for rec in records:
        writer.writerow([_fmt(getattr(rec, name)) for name in FIELD_NAMES])
    return buf.getvalue()


def emit_csv(records: Sequence[TrialRecord], path: str | Path) -> None:
    """Write records as CSV with a fixed header; floats carry 17 significant digits."""
    modes = {r.mode for r in records}
    if len(modes) > 1:
        raise HarnessError(f"records mix modes {sorted(modes)}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_rows_text(records, header=True))


def load_csv(path: str | Path) -> list[TrialRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FIELD_NAMES:
            raise HarnessError(f"{path}: unexpected CSV header")
        return [TrialRecord(**{k: _parse(k, v) for k, v in row.items()}) for row in reader]


def planted_cover_matrix(n: int, m: int, k: int, seed: int, density: float = 0.3,
                         signed: bool = False) -> tuple[SensingMatrix, int, tuple[int, ...]]:
    """Random ``m x n`` matrix whose column ``j0`` is covered by ``k - 1`` others.

    Returns ``(A, j0, others)`` with 1-based indices.  Entries are in
    ``(0, 1]`` (random signs if ``signed``) on the column supports.
    """
    if not 1 <= k <= n or m < 1:
        raise HarnessError(f"need 1 <= k <= n and m >= 1, got n={n}, m={m}, k={k}")
    rng = np.random.default_rng(seed)
    support = rng.random((m, n)) < density
    for j in range(n):
        if not support[:, j].any():
            support[rng.integers(m), j] = True
    picks = rng.choice(n, size=k, replace=False)
    j0, others = int(picks[0]), sorted(int(j) for j in picks[1:])
    union = support[:, others].any(axis=1) if others else np.zeros(m, dtype=bool)
    cover_rows = np.flatnonzero(union)
    support[:, j0] = False
    if cover_rows.size:
        size = int(rng.integers(1, cover_rows.size + 1))
        support[rng.choice(cover_rows, size=size, replace=False), j0] = True
    values = rng.uniform(0.1, 1.0, size=(m, n)) * support
    if signed:
        values *= rng.choice([-1.0, 1.0], size=(m, n))
    return SensingMatrix(values), j0 + 1, tuple(j + 1 for j in others)


def _family_for(config: ExperimentConfig, point: dict[str, Any]):
    rc = RandomRuffConfig(
        n=int(point["n"]), k=int(point["k"]), alpha=config.alpha,
        c_m=float(point["c_m"]), c_d=config.c_d, max_retries=config.max_retries,
        seed=derive_seed(config.seed, TAG_FAMILY, int(point["n"]), int(point["k"]),
                         int(point.get("m") or 0), int(round(float(point["c_m"]) * 1000))),
        m=None if point.get("m") is None else int(point["m"]),
    )
    return rc, sample_random_ruff(rc)


def run_grid_point(config: ExperimentConfig, gi: int, point: dict[str, Any]) -> list[TrialRecord]:
    """All trials of one grid point, in trial order."""
    base = dict(mode=config.mode, grid_index=gi, n=int(point["n"]), k=int(point["k"]))
    if config.mode == "adversary-audit":
        return [_adversary_trial(config, gi, point, base, t) for t in range(config.trials)]

    base.update(alpha=format_fraction(config.alpha), c_m=float(point["c_m"]))
    if config.mode == "approx-sweep":
        base.update(m2=int(point["m2"]), epsilon=float(point["epsilon"]))
    try:
        rc, sampled = _family_for(config, point)
    except (ConstructionError, FamilyError) as exc:
        stats = getattr(exc, "stats", {})
        return [TrialRecord(**base, outcome="construction-failed", success=False,
                            attempts=stats.get("attempts"), verification=stats.get("verification"),
                            detail=str(exc))]
    family = sampled.family
    A = matrix_from_family(family)
    base.update(m=family.m, d=sampled.params.d, verification=sampled.verification,
                attempts=sampled.attempts)
    records = []
    for t in range(config.trials):
        seed = derive_seed(config.seed, TAG_TRIAL, gi, t)
        model = config.value_models[t % len(config.value_models)]
        x = generate_signal(family.n, base["k"], model, seed, family=family)
        b = measure(A, x)
        rec = TrialRecord(**base, trial=t, seed=seed, value_model=model, support_size=x.l0)
        if config.mode == "support-sweep":
            est = recover_support(family, b)
            exact = est.support == x.support
            rec.outcome = "exact-support" if exact else "wrong-support"
            rec.success = exact
            rec.ties = len(est.ties)
        else:
            cfg = ApproxConfig(epsilon=float(point["epsilon"]), m2=int(point["m2"]),
                               estimator=config.estimator, seed=derive_seed(seed, TAG_SKETCH))
            sketch = gaussian_measurements(x, cfg)
            try:
                xhat, est = approx_recover(family, b, sketch, cfg)
            except RecoveryError as exc:
                rec.outcome, rec.success, rec.detail = "recovery-error", False, str(exc)
            else:
                err = angular_error(x, xhat)
                rec.outcome = "angular-error"
                rec.angular_error = err
                rec.success = err < cfg.epsilon
                rec.ties = len(est.ties)
                rec.detail = "stage1=exact" if est.support == x.support else "stage1=wrong"
        records.append(rec)
    return records


def _adversary_trial(config: ExperimentConfig, gi: int, point: dict[str, Any],
                     base: dict[str, Any], t: int) -> TrialRecord:
    n, m, k = int(point["n"]), int(point["m"]), int(point["k"])
    seed = derive_seed(config.seed, TAG_TRIAL, gi, t)
    rec = TrialRecord(**base, m=m, trial=t, seed=seed)
    try:
        A, _, _ = planted_cover_matrix(n, m, k, seed)
        signs = np.random.default_rng(derive_seed(seed, 1)).choice([-1.0, 1.0], size=A.values.shape)
        A_signed = SensingMatrix(A.values * signs)
        verdict = verify_uff(extract_family(A), k - 1)
        if verdict.passed:
            raise AdversaryError("planted cover not found by the verifier")
        w = verdict.witness
        checks = [confusable_pair_nonneg(A, w, k), confusable_pair_real(A_signed, w, 0.5, seed, k)]
        for M, (x1, x2) in zip((A, A_signed), checks):
            if measure(M, x1) != measure(M, x2) or x1.support == x2.support or max(x1.l0, x2.l0) > k:
                raise AdversaryError("pair failed re-verification")
        rec.outcome, rec.success = "confusable-verified", True
        rec.detail = json.dumps(w.to_dict(), separators=(",", ":"))
    except (AdversaryError, FamilyError, HarnessError) as exc:
        rec.outcome, rec.success, rec.detail = "adversary-failed", False, str(exc)
    return rec


def _complete_points(records: list[TrialRecord], trials: int) -> dict[int, list[TrialRecord]]:
    groups: dict[int, list[TrialRecord]] = {}
    for rec in records:
        if rec.outcome in MARKER_OUTCOMES:
            continue
        groups.setdefault(rec.grid_index, []).append(rec)
    return {gi: recs for gi, recs in groups.items()
            if len(recs) == trials or (len(recs) == 1 and recs[0].outcome == "construction-failed")}


def run_experiment(config: ExperimentConfig, out_path: str | Path | None = None,
                   resume: bool = False) -> list[TrialRecord]:
    """Run every grid point; with ``out_path`` each finished point is appended and flushed.

    ``resume`` keeps fully finished grid points from an existing file and
    recomputes the rest.
    """
    points = config.points()
    done: dict[int, list[TrialRecord]] = {}
    if resume and out_path is not None and Path(out_path).exists():
        done = _complete_points(load_csv(out_path), config.trials)
    out = None
    if out_path is not None:
        out = open(out_path, "w", newline="", encoding="utf-8")
        out.write(_rows_text([], header=True))
        for gi in sorted(done):
            out.write(_rows_text(done[gi], header=False))
        out.flush()
    records = [r for gi in sorted(done) for r in done[gi]]
    pending = [(gi, p) for gi, p in enumerate(points) if gi not in done]
    started = time.monotonic()
    trials_run = 0

    def over_budget() -> bool:
        if config.budget_seconds is not None and time.monotonic() - started > config.budget_seconds:
            return True
        return config.budget_trials is not None and trials_run >= config.budget_trials

    def results():
        if config.workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(run_grid_point, config, gi, p) for gi, p in pending]
                try:
                    for (gi, _), fut in zip(pending, futures):
                        yield gi, fut.result()
                finally:
                    for fut in futures:
                        fut.cancel()
        else:
            for gi, p in pending:
                yield gi, run_grid_point(config, gi, p)

    try:
        gen = results()
        for gi, _ in pending:
            if over_budget():
                marker = TrialRecord(mode=config.mode, grid_index=gi, n=int(points[gi]["n"]),
                                     k=int(points[gi]["k"]), outcome="budget-exceeded",
                                     detail=f"stopped after {trials_run} trials")
                records.append(marker)
                if out is not None:
                    out.write(_rows_text([marker], header=False))
                break
            _, recs = next(gen)
            records.extend(recs)
            trials_run += len(recs)
            if out is not None:
                out.write(_rows_text(recs, header=False))
                out.flush()
                os.fsync(out.fileno())
        gen.close()
    finally:
        if out is not None:
            out.close()
    records.sort(key=lambda r: (r.grid_index, -1 if r.trial is None else r.trial))
    return records


@dataclass
class GridSummary:
    grid_index: int
    mode: str
    n: int
    k: int
    m: int | None
    d: int | None
    c_m: float | None
    m2: int | None
    epsilon: float | None
    trials: int
    successes: int
    success_rate: float | None
    median_error: float | None = None
    p95_error: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def nearest_rank(values: Sequence[float], pct: float) -> float:
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100 * len(ordered)))
    return ordered[rank - 1]


def summarize(records: Sequence[TrialRecord]) -> list[GridSummary]:
    """Per-grid-point success rate and nearest-rank error percentiles."""
    if not records:
        raise HarnessError("nothing to summarize")
    modes = {r.mode for r in records}
    if len(modes) > 1:
        raise HarnessError(f"records mix modes {sorted(modes)}")
    groups: dict[int, list[TrialRecord]] = {}
    for rec in records:
        if rec.outcome not in MARKER_OUTCOMES:
            groups.setdefault(rec.grid_index, []).append(rec)
    out = []
    for gi in sorted(groups):
        recs = groups[gi]
        first = recs[0]
        trials = [r for r in recs if r.trial is not None]
        wins = sum(1 for r in trials if r.success)
        errors = [r.angular_error for r in trials if r.angular_error is not None]
        out.append(GridSummary(
            grid_index=gi, mode=first.mode, n=first.n, k=first.k, m=first.m, d=first.d,
            c_m=first.c_m, m2=first.m2, epsilon=first.epsilon,
            trials=len(trials), successes=wins,
            success_rate=wins / len(trials) if trials else None,
            median_error=nearest_rank(errors, 50) if errors else None,
            p95_error=nearest_rank(errors, 95) if errors else None,
        ))
    return out


def render_svg(summary: Sequence[GridSummary], width: int = 480, height: int = 320) -> str:
    """Static line chart: success rate vs m, or median error vs m2 (log2 axis)."""
    if not summary:
        raise HarnessError("nothing to plot")
    approx = summary[0].mode == "approx-sweep"
    series: dict[str, list[tuple[float, float]]] = {}
    for s in summary:
        if approx:
            if s.median_error is None:
                continue
            label = f"n={s.n} k={s.k} m={s.m}"
            series.setdefault(label, []).append((math.log2(s.m2), s.median_error))
        else:
            if s.success_rate is None or s.m is None:
                continue
            series.setdefault(f"n={s.n} k={s.k}", []).append((float(s.m), s.success_rate))
    pts = [p for line in series.values() for p in line]
    if not pts:
        raise HarnessError("no plottable points")
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = (0.0, max(1.0, max(p[1] for p in pts))) if not approx else (0.0, max(p[1] for p in pts) or 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 40

    def sx(v): return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)
    def sy(v): return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">'
        f'{"log2 m2" if approx else "m"}</text>',
        f'<text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})" '
        f'text-anchor="middle">{"median angular error" if approx else "success rate"}</text>',
        f'<text x="{pad}" y="{height - pad + 14}" font-size="10" text-anchor="middle">{x0:g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 14}" font-size="10" text-anchor="middle">{x1:g}</text>',
        f'<text x="{pad - 4}" y="{pad}" font-size="10" text-anchor="end">{y1:.3g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" font-size="10" text-anchor="end">{y0:g}</text>',
    ]
    for i, (label, line) in enumerate(sorted(series.items())):
        color = palette[i % len(palette)]
        line = sorted(line)
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in line)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        for x, y in line:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        parts.append(f'<text x="{width - pad}" y="{pad + 14 * i}" font-size="10" fill="{color}" '
                     f'text-anchor="end">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
