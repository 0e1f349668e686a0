"""``obcs`` command-line entry point.

Exit codes: 0 success / pass / certified, 1 domain failure (verification
failed, certificate inconclusive, construction exhausted), 2 usage or input
error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from . import bounds as bd
from .constructions import (
    ConstructionError,
    RandomRuffConfig,
    design_from_code,
    lift_k1_params,
    reed_solomon_code,
    sample_random_ruff,
)
from .family import (
    FamilyError,
    RuffParams,
    SetFamily,
    pairwise_certificate,
    parse_fraction,
    verify_ruff,
    verify_uff,
)
from .harness import ExperimentConfig, HarnessError, load_csv, render_svg, run_experiment, summarize
from .recovery import ApproxConfig, RecoveryError, angular_error, approx_recover, gaussian_measurements, recover_support
from .sensing import SensingError, SignPattern, SparseVector, load_matrix, matrix_from_family, measure


class UsageError(Exception):
    pass


def _emit(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=False))


def _read_json(path: str) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise UsageError(f"{path}: no such file") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _load_family(path: str) -> tuple[SetFamily, dict[str, Any]]:
    data = _read_json(path)
    return SetFamily.from_dict(data), data


def cmd_construct(args) -> int:
    if args.kind == "random":
        cfg = RandomRuffConfig(n=args.n, k=args.k, alpha=parse_fraction(args.alpha), c_m=args.cm,
                               c_d=args.cd, max_retries=args.retries, seed=args.seed)
        try:
            sampled = sample_random_ruff(cfg)
        except ConstructionError as exc:
            _emit({"error": str(exc), "stats": exc.stats})
            return 1
        meta = sampled.meta(cfg)
        family = sampled.family
    else:
        code = reed_solomon_code(args.q, args.deg, args.points)
        family, params = design_from_code(code)
        if args.lift and args.lift != 1:
            params = lift_k1_params(params, args.lift)
        meta = {"construction": "reed-solomon", "q": args.q, "deg_bound": args.deg,
                "points": args.points, "max_agreement": code.max_agreement,
                "params": params.to_dict(), "verification": "pairwise-design"}
    family.dump(args.output, meta)
    _emit({"output": str(args.output), "meta": meta})
    return 0


def cmd_verify(args) -> int:
    family, data = _load_family(args.family)
    alpha = parse_fraction(args.alpha)
    if args.uff:
        verdict = verify_uff(family, args.k)
        out = {"property": "uff", "k": args.k, "pass": verdict.passed}
        if verdict.witness:
            out["witness"] = verdict.witness.to_dict()
        _emit(out)
        return 0 if verdict.passed else 1
    d = family.uniform_size()
    if d is None:
        raise FamilyError("robust verification needs all sets of equal size")
    params = RuffParams(family.n, family.m, d, args.k, alpha)
    cert = pairwise_certificate(family, params)
    out: dict[str, Any] = {"params": params.to_dict(), "certificate": {
        "certified": cert.certified, "max_overlap": cert.max_overlap,
        "worst_pair": list(cert.worst_pair) if cert.worst_pair else None}}
    if args.certificate_only:
        _emit(out)
        return 0 if cert.certified else 1
    verdict = verify_ruff(family, params)
    out["pass"] = verdict.passed
    if verdict.witness:
        out["witness"] = verdict.witness.to_dict()
    _emit(out)
    return 0 if verdict.passed else 1


def cmd_measure(args) -> int:
    A = load_matrix(args.matrix)
    x = SparseVector.load(args.signal)
    pattern = measure(A, x, tau=args.tau)
    text = json.dumps(pattern.to_dict(), separators=(",", ":"))
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def cmd_recover(args) -> int:
    family, _ = _load_family(args.family)
    if args.kind == "support":
        est = recover_support(family, SignPattern.load(args.pattern))
        _emit(est.to_dict())
        return 0
    x = SparseVector.load(args.signal)
    cfg = ApproxConfig(epsilon=args.epsilon, m2=args.m2, estimator=args.estimator, seed=args.seed)
    b1 = measure(matrix_from_family(family), x)
    sketch = gaussian_measurements(x, cfg)
    xhat, est = approx_recover(family, b1, sketch, cfg)
    out: dict[str, Any] = {"support": sorted(est.support), "estimate": xhat.to_dict(),
                           "counts": list(est.counts), "ties": list(est.ties)}
    if x.entries and xhat.entries:
        out["angular_error"] = angular_error(x, xhat)
        out["within_epsilon"] = out["angular_error"] < cfg.epsilon
    _emit(out)
    return 0


def cmd_bounds(args) -> int:
    if args.kind == "furedi":
        reports = [bd.bound_report("furedi_max_n", m=args.m, k=args.k)]
    elif args.kind == "min-m":
        reports = [bd.bound_report("min_m_support", n=args.n, k=args.k)]
    elif args.kind == "regions":
        reports = [bd.bound_report("regions_upper", m=args.m, k=args.k)]
    else:
        eps, c = parse_fraction(args.epsilon), parse_fraction(args.c)
        reports = [bd.bound_report("cover_lower", k=args.k, epsilon=eps, c=c),
                   bd.bound_report("min_m_approx", k=args.k, epsilon=eps, c=c)]
        if args.n is not None:
            reports += [bd.bound_report("gv_count", n=args.n, k=args.k, epsilon=eps),
                        bd.bound_report("gv_min_m", n=args.n, k=args.k, epsilon=eps)]
    _emit([r.to_dict() for r in reports])
    return 0


def cmd_adversary(args) -> int:
    A = load_matrix(args.matrix)
    if not 1 <= args.k <= A.n:
        raise UsageError(f"need 1 <= k <= n={A.n}")
    verdict = verify_uff(bd.extract_family(A), args.k - 1)
    if verdict.passed:
        _emit({"found": False, "k": args.k,
               "note": f"column supports form a {args.k - 1}-union-free family; no confusable pair"})
        return 0
    w = verdict.witness
    if (A.values >= 0).all():
        x1, x2 = bd.confusable_pair_nonneg(A, w, args.k)
        kind = "nonnegative"
    else:
        x1, x2 = bd.confusable_pair_real(A, w, args.epsilon, args.seed, args.k)
        kind = "real"
    _emit({"found": True, "k": args.k, "construction": kind, "witness": w.to_dict(),
           "x1": x1.to_dict(), "x2": x2.to_dict(), "pattern": list(measure(A, x1).values)})
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    records = run_experiment(cfg, args.output, resume=args.resume)
    summary = summarize(records)
    if args.svg:
        Path(args.svg).write_text(render_svg(summary))
    _emit([s.to_dict() for s in summary])
    failed = any(r.outcome in ("construction-failed", "budget-exceeded") for r in records)
    return 1 if failed else 0


def cmd_summarize(args) -> int:
    summary = summarize(load_csv(args.csv))
    if args.svg:
        Path(args.svg).write_text(render_svg(summary))
    _emit([s.to_dict() for s in summary])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obcs", description="One-bit compressive sensing from robust union-free families")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="build a robust union-free family")
    csub = c.add_subparsers(dest="kind", required=True)
    r = csub.add_parser("random")
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--k", type=int, required=True)
    r.add_argument("--alpha", default="1/2")
    r.add_argument("--cm", type=float, default=100.0)
    r.add_argument("--cd", type=float, default=10.0)
    r.add_argument("--retries", type=int, default=10)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("-o", "--output", required=True)
    rs = csub.add_parser("rs")
    rs.add_argument("--q", type=int, required=True)
    rs.add_argument("--deg", type=int, required=True)
    rs.add_argument("--points", type=int, required=True)
    rs.add_argument("--lift", type=int, default=None)
    rs.add_argument("-o", "--output", required=True)
    c.set_defaults(func=cmd_construct)

    v = sub.add_parser("verify", help="check the (robust) union-free property")
    v.add_argument("--family", required=True)
    v.add_argument("--k", type=int, required=True)
    v.add_argument("--alpha", default="1")
    v.add_argument("--uff", action="store_true")
    v.add_argument("--certificate-only", action="store_true")
    v.set_defaults(func=cmd_verify)

    mz = sub.add_parser("measure", help="one-bit measurements of a signal")
    mz.add_argument("--matrix", required=True, help="family JSON or matrix JSON")
    mz.add_argument("--signal", required=True)
    mz.add_argument("--tau", type=float, default=0.0)
    mz.add_argument("-o", "--output")
    mz.set_defaults(func=cmd_measure)

    rc = sub.add_parser("recover", help="support or approximate recovery")
    rsub = rc.add_subparsers(dest="kind", required=True)
    s = rsub.add_parser("support")
    s.add_argument("--family", required=True)
    s.add_argument("--pattern", required=True)
    a = rsub.add_parser("approx")
    a.add_argument("--family", required=True)
    a.add_argument("--signal", required=True)
    a.add_argument("--m2", type=int, default=4096)
    a.add_argument("--epsilon", type=float, default=0.1)
    a.add_argument("--estimator", choices=["linear", "net", "net-decode"], default="linear")
    a.add_argument("--seed", type=int, default=0)
    rc.set_defaults(func=cmd_recover)

    b = sub.add_parser("bounds", help="exact bound evaluators")
    bsub = b.add_subparsers(dest="kind", required=True)
    f = bsub.add_parser("furedi")
    f.add_argument("--m", type=int, required=True)
    f.add_argument("--k", type=int, required=True)
    mm = bsub.add_parser("min-m")
    mm.add_argument("--n", type=int, required=True)
    mm.add_argument("--k", type=int, required=True)
    rg = bsub.add_parser("regions")
    rg.add_argument("--m", type=int, required=True)
    rg.add_argument("--k", type=int, required=True)
    al = bsub.add_parser("approx-lb")
    al.add_argument("--k", type=int, required=True)
    al.add_argument("--epsilon", required=True)
    al.add_argument("--c", default="1/2")
    al.add_argument("--n", type=int, default=None)
    b.set_defaults(func=cmd_bounds)

    ad = sub.add_parser("adversary", help="build signals the matrix cannot separate")
    ad.add_argument("--matrix", required=True)
    ad.add_argument("--k", type=int, required=True)
    ad.add_argument("--epsilon", type=float, default=0.5)
    ad.add_argument("--seed", type=int, default=0)
    ad.set_defaults(func=cmd_adversary)

    e = sub.add_parser("experiment", help="run a parameter sweep")
    e.add_argument("--config", required=True)
    e.add_argument("-o", "--output", required=True)
    e.add_argument("--svg")
    e.add_argument("--resume", action="store_true")
    e.set_defaults(func=cmd_experiment)

    sm = sub.add_parser("summarize", help="aggregate a sweep CSV")
    sm.add_argument("csv")
    sm.add_argument("--svg")
    sm.set_defaults(func=cmd_summarize)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FamilyError, SensingError, RecoveryError, HarnessError,
            bd.BoundError, FileNotFoundError, KeyError) as exc:
        print(f"obcs: error: {exc}", file=sys.stderr)
        return 2
    except bd.AdversaryError as exc:
        print(f"obcs: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
