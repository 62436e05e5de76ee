"""Command-line front end.

Subcommands: fixtures, pipeline, verify, cover, metrics.  Exit codes:
0 pass, 1 assertion failure, 2 usage or parse error, 3 refused
precondition, 4 budget exceeded.  Identical configuration (including the
seed) produces byte-identical report files; timing never enters reports.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import sweeps
from .cover import build_bias_cover
from .cube import CubeSubset, ModPForm, form_fn
from .dist import distribution_on, metric_report
from .errors import BudgetExceeded, CubeformsError, PreconditionFailed, StageEmpty
from .fixtures import FIXTURES
from .select import (
    SelectionParams,
    pipeline_correlation,
    pipeline_overlap,
    verify_theorem_correlation,
    verify_theorem_overlap,
)
from .serialize import (
    SCHEMA,
    dump_json,
    family_from_json,
    family_json,
    form_from_json,
    load_json,
    parse_rational,
    rational_json,
    subset_from_json,
    write_csv,
)
from .verifiers import recheck_report

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_REFUSED = 3
EXIT_BUDGET = 4


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except CubeformsError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _load_subset(path: str) -> tuple[CubeSubset, int]:
    return subset_from_json(load_json(path))


def _parse_form(text: str, n: int, p: int) -> ModPForm:
    if text.endswith(".json"):
        return form_from_json(load_json(text))
    coeffs = tuple(int(c) for c in text.replace(",", " ").split())
    if len(coeffs) != n:
        raise CubeformsError(f"form has {len(coeffs)} coefficients, subset has n={n}")
    return ModPForm(p, n, coeffs)


def cmd_fixtures(args) -> int:
    build, verify = FIXTURES[args.name]
    kwargs = {"p": args.p}
    if args.name != "intro-dependence":
        if args.n is None:
            raise PreconditionFailed(f"fixture {args.name} needs --n")
        kwargs["n"] = args.n
    if args.name == "bounded-support":
        kwargs["k"] = args.k
    fixture = build(**kwargs)
    report = verify(fixture)
    payload = {
        "schema": SCHEMA,
        "fixture": fixture.to_json(),
        "report": report.to_json(),
    }
    text = dump_json(payload, args.out)
    if args.out is None:
        sys.stdout.write(text)
    if not report.ok:
        print(f"FAIL: {report.first_failure()}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


def _build_family(args) -> tuple[list[CubeSubset], int, int, dict]:
    if args.family:
        data = load_json(args.family)
        subsets, p = family_from_json(data)
        if not subsets:
            raise PreconditionFailed("family file holds no subsets")
        return subsets, p, subsets[0].n, {"source": Path(args.family).name}
    if args.generate != "random-dense":
        raise PreconditionFailed(f"unknown generator {args.generate!r}")
    subsets = sweeps.random_dense_family(args.s, args.n, args.p, args.delta, args.seed)
    meta = {
        "generator": "random-dense",
        "delta": rational_json(args.delta),
        "seed": args.seed,
    }
    return subsets, args.p, args.n, meta


def cmd_pipeline(args) -> int:
    subsets, p, n, meta = _build_family(args)
    params = SelectionParams(
        p=p,
        n=n,
        m=args.m,
        delta=args.delta,
        eta=args.eta,
        nu=args.nu,
        epsilon=args.epsilon,
        alpha=args.alpha,
        r=args.radius,
        seed=args.seed,
        max_tuples=args.max_tuples,
        sample_size=args.sample_size,
    )
    if args.mode == "R":
        report = pipeline_correlation(subsets, params)
        theorem = verify_theorem_correlation(subsets, report.selected, params)
    else:
        report = pipeline_overlap(subsets, params)
        theorem = verify_theorem_overlap(subsets, report.selected, params)
    check = recheck_report(subsets, report) if args.recheck else None

    payload = report.to_json()
    payload["family"] = meta | {"s": len(subsets), "n": n, "p": p}
    payload["theorem"] = theorem.to_json()
    if check is not None:
        payload["independent_check"] = check.to_json()

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    dump_json(payload, outdir / "report.json")
    rows = [
        (";".join(map(str, key)), val.numerator, val.denominator, f"{float(val):.12g}", ok)
        for key, val, ok in theorem.rows
    ]
    write_csv(
        outdir / "tuples.csv",
        ["tuple", "min_value_num", "min_value_den", "min_value", "passed"],
        rows,
    )
    if args.save_family:
        dump_json(family_json(subsets, p, meta), outdir / "family.json")

    ok = report.ok and theorem.ok and (check is None or check.ok)
    print(
        f"mode={args.mode} selected={len(report.selected)}/{len(subsets)} "
        f"phi={len(report.phi)} support={sorted(report.support)} "
        f"theorem_fraction={float(theorem.fraction):.4f} ok={ok}"
    )
    if len(subsets) == 1:
        print("warning: single subset, nothing to compare", file=sys.stderr)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    claim = args.claim
    if claim == "equidistribution":
        if args.k == 1:
            result = sweeps.sweep_equidistribution_k1(args.p, args.n)
        else:
            result = sweeps.sweep_equidistribution_k2(args.p, args.n, args.trials, args.seed)
    elif claim == "nonzero-probability":
        if args.exhaustive:
            result = sweeps.sweep_nonzero_probability_exhaustive_k1(args.p, args.n)
        else:
            result = sweeps.sweep_nonzero_probability(args.p, args.k, args.n, args.trials, args.seed)
    elif claim == "hierarchy":
        result = sweeps.sweep_hierarchy(args.trials, args.seed)
    elif claim == "low-negentropy":
        result = sweeps.sweep_low_negentropy(args.trials, args.seed)
    elif claim == "markov":
        result = sweeps.sweep_markov(args.trials, args.seed, n=args.n, p=args.p)
    elif claim == "superadditivity":
        result = sweeps.sweep_superadditivity(args.trials, args.seed, n=args.n, p=args.p)
    elif claim == "reduction-chain":
        result = sweeps.sweep_reduction_chain(args.trials, args.seed, n=args.n, k=args.k)
    elif claim == "proximity":
        result = sweeps.sweep_proximity(args.trials, args.seed, n=args.n, p=args.p, k=args.k)
    elif claim == "overlap-proposition":
        result = sweeps.sweep_overlap_proposition(n=args.n, p=args.p)
    else:  # pragma: no cover - argparse restricts choices
        raise PreconditionFailed(f"unknown claim {claim!r}")
    text = dump_json(result.to_json(), args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_PASS if result.ok else EXIT_FAIL


def cmd_cover(args) -> int:
    A, p = _load_subset(args.subset)
    cover = build_bias_cover(A, p, args.alpha, r=args.radius, delta=args.delta)
    payload = {"schema": SCHEMA, "cover": cover.to_json(), "n": A.n, "size": A.size}
    text = dump_json(payload, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_PASS if cover.certified else EXIT_FAIL


def cmd_metrics(args) -> int:
    loaded = [_load_subset(path) for path in args.subset]
    p = loaded[0][1]
    n = loaded[0][0].n
    for A, q in loaded:
        if q != p or A.n != n:
            raise PreconditionFailed("subsets disagree on n or p")
    if len(loaded) < 2:
        raise PreconditionFailed("metrics needs at least two subsets")
    form = _parse_form(args.form, n, p)
    dists = [distribution_on(A, form_fn(form)) for A, _ in loaded]
    report = metric_report(dists)
    payload = {
        "schema": SCHEMA,
        "form": {"p": p, "n": n, "coeffs": list(form.coeffs)},
        "m": len(dists),
        "metrics": report.to_json(),
    }
    text = dump_json(payload, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cubeforms",
        description="exact distribution analysis of mod-p linear forms on dense cube subsets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fx = sub.add_parser("fixtures", help="build a named fixture and verify its constants")
    fx.add_argument("name", choices=sorted(FIXTURES))
    fx.add_argument("--p", type=int, required=True)
    fx.add_argument("--n", type=int)
    fx.add_argument("--k", type=int, default=1)
    fx.add_argument("--out", type=str, default=None)
    fx.set_defaults(func=cmd_fixtures)

    pl = sub.add_parser("pipeline", help="run a selection over a family of dense subsets")
    pl.add_argument("--mode", choices=["R", "Q"], required=True)
    pl.add_argument("--family", type=str, default=None, help="family JSON file")
    pl.add_argument("--generate", type=str, default="random-dense")
    pl.add_argument("--s", type=int, default=100)
    pl.add_argument("--n", type=int, default=8)
    pl.add_argument("--p", type=int, default=2)
    pl.add_argument("--m", type=int, default=2)
    pl.add_argument("--delta", type=_rational, default=Fraction(1, 4))
    pl.add_argument("--eta", type=_rational, default=Fraction(1, 10))
    pl.add_argument("--nu", type=_rational, default=Fraction(1, 20))
    pl.add_argument("--epsilon", type=_rational, default=Fraction(1, 10))
    pl.add_argument("--alpha", type=_rational, default=None)
    pl.add_argument("--radius", type=int, default=None)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--max-tuples", type=int, default=100_000)
    pl.add_argument("--sample-size", type=int, default=10_000)
    pl.add_argument("--out", type=str, default="out")
    pl.add_argument("--save-family", action="store_true")
    pl.add_argument("--no-recheck", dest="recheck", action="store_false")
    pl.set_defaults(func=cmd_pipeline, recheck=True)

    vf = sub.add_parser("verify", help="run one quantitative claim over many instances")
    vf.add_argument(
        "claim",
        choices=[
            "equidistribution",
            "nonzero-probability",
            "hierarchy",
            "low-negentropy",
            "markov",
            "superadditivity",
            "reduction-chain",
            "proximity",
            "overlap-proposition",
        ],
    )
    vf.add_argument("--p", type=int, default=2)
    vf.add_argument("--n", type=int, default=6)
    vf.add_argument("--k", type=int, default=1)
    vf.add_argument("--trials", type=int, default=1000)
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("--exhaustive", action="store_true")
    vf.add_argument("--out", type=str, default=None)
    vf.set_defaults(func=cmd_verify)

    cv = sub.add_parser("cover", help="ball-cover of the biased forms of one subset")
    cv.add_argument("--subset", type=str, required=True)
    cv.add_argument("--alpha", type=_rational, required=True)
    cv.add_argument("--radius", type=int, default=None)
    cv.add_argument("--delta", type=_rational, default=None)
    cv.add_argument("--out", type=str, default=None)
    cv.set_defaults(func=cmd_cover)

    mt = sub.add_parser("metrics", help="one-shot proximity metrics of a form across subsets")
    mt.add_argument("--subset", action="append", required=True)
    mt.add_argument("--form", type=str, required=True)
    mt.add_argument("--out", type=str, default=None)
    mt.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (PreconditionFailed,) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except StageEmpty as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except CubeformsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
