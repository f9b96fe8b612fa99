"""Command line interface.

One executable, five subcommands:

* ``gen-family``   write a matrix family as JSON
* ``extract``      run an extractor over raw bit files
* ``entropy``      entropy quantities of a state file, with certificates
* ``verify``       run a named verification suite, exit 1 on any failure
* ``dira-rate``    output-length and security calculator

Machine-readable JSON is the default output; ``--plain`` prints the same
content as key-value lines.  Exit codes: 0 success, 1 verification
failure, 2 bad arguments, 3 bad input data, 4 solver non-convergence.
Output files are written to a temporary name and atomically renamed, so
a failed command never leaves partial output behind.

The environment variable ``QEXTRACT_GAP`` overrides the default
certificate gap of the entropy solver.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_BAD_ARGS = 2
EXIT_BAD_DATA = 3
EXIT_SOLVER = 4


def _default_gap() -> float:
    return float(os.environ.get("QEXTRACT_GAP", "1e-8"))


def _emit(payload, plain: bool) -> None:
    if plain:
        items = payload if isinstance(payload, list) else [payload]
        for i, entry in enumerate(items):
            if isinstance(payload, list):
                print(f"[{i}]")
            for key, value in entry.items():
                print(f"{key}: {value}")
    else:
        json.dump(payload, sys.stdout, indent=2, default=_jsonable)
        print()


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _atomic_write_text(path: str, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                               prefix=".qextract-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _entropy_payload(kind: str, result, gap: float) -> dict:
    return {
        "quantity": kind,
        "value_bits": result.value,
        "lower": result.lower,
        "upper": result.upper,
        "gap": result.gap,
        "iterations": result.iterations,
        "requested_gap": gap,
        "certificate": result.kind,
    }


def cmd_gen_family(args) -> int:
    from .gf2 import build_family

    fam = build_family(args.n, args.m, args.r)
    _atomic_write_text(args.out, json.dumps(fam.to_json_dict()))
    _emit({"out": args.out, "n": fam.n, "m": fam.m, "r": fam.r,
           "construction": fam.construction}, args.plain)
    return EXIT_OK


def _load_family(path: str):
    from .gf2 import MatrixFamily

    with open(path) as f:
        return MatrixFamily.from_json_dict(json.load(f))


def cmd_extract(args) -> int:
    from .extractor import DEOR, IP, ExtractionJob, ExtractorSpec, extract_file

    if args.family:
        fam = _load_family(args.family)
        spec = ExtractorSpec(DEOR, fam.n, fam.m, fam)
    else:
        if args.n is None:
            raise ValueError("--n is required for the inner product extractor")
        spec = ExtractorSpec(IP, args.n)
    job = ExtractionJob(spec, args.blocks, strong=args.strong)
    written = extract_file(job, args.x, args.y, args.out, workers=args.workers)
    _emit({"out": args.out, "kind": spec.kind, "n": spec.n, "m": spec.m,
           "blocks": args.blocks, "strong": args.strong,
           "out_bits_per_block": job.out_bits_per_block,
           "bytes_written": written, "workers": args.workers}, args.plain)
    return EXIT_OK


def cmd_entropy(args) -> int:
    from . import entropy as ent
    from .quantum import instrument_from_json, load_state

    gap = args.gap if args.gap is not None else _default_gap()
    rho = load_state(args.state)
    target = args.target.split(",") if args.target else [rho.systems[0].name]
    condition = (args.condition.split(",") if args.condition
                 else [n for n in rho.names() if n not in target])
    condition = [c for c in condition if c]
    if args.kind == "k2":
        if not args.instrument:
            raise ValueError("--instrument is required for the k2 functional")
        with open(args.instrument) as f:
            inst = instrument_from_json(json.load(f))
        value = ent.k2_functional(inst, rho)
        _emit({"quantity": "k2", "value_bits": value, "lower": value,
               "upper": value, "gap": 0.0, "iterations": 0,
               "certificate": "closed-form"}, args.plain)
        return EXIT_OK
    try:
        if args.kind == "hmin":
            res = ent.h_min(rho, target, condition, gap=gap)
        elif args.kind == "hinf":
            res = ent.h_inf_down(rho, target, condition)
        elif args.kind == "h2":
            res = ent.h2_down(rho, target, condition)
        else:  # pguess
            res = ent.p_guess(rho, gap=gap)
    except ent.SolverConvergenceError as exc:
        payload = _entropy_payload(args.kind, exc.best, gap)
        payload["converged"] = False
        _emit(payload, args.plain)
        return EXIT_SOLVER
    payload = _entropy_payload(args.kind, res, gap)
    if args.kind == "pguess":
        payload["quantity"] = "p_guess"
        payload["value_bits"] = None
        payload["value_prob"] = res.value
    _emit(payload, args.plain)
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import dira, verify

    gap = args.gap if args.gap is not None else 1e-6
    checks: list[dict]
    if args.suite == "ip-bound":
        checks = [r.to_json_dict() for r in
                  verify.run_ip_suite(args.count, args.seed, gap=gap)]
    elif args.suite == "deor-bound":
        checks = [r.to_json_dict() for r in
                  verify.run_deor_suite(args.count, args.seed, gap=gap)]
    elif args.suite == "xor":
        checks = [dict(r.to_json_dict(), passed=r.holds) for r in
                  verify.run_xor_suite(args.count, args.seed)]
    elif args.suite == "tightness":
        rep = verify.run_tightness()
        d = rep.to_json_dict()
        d["passed"] = bool(rep.passed and rep.measured == rep.bound == 0.5)
        checks = [d]
    elif args.suite == "counterexample":
        ce = verify.run_counterexample(gap=min(gap, 1e-8))
        checks = [{
            "h_min_x_given_b": ce["h_min_x_given_b"].value,
            "h_min_y_given_a": ce["h_min_y_given_a"].value,
            "expected": ce["expected"], "markov_cap": ce["markov_cap"],
            "separation_strict": ce["separation_strict"], "passed": ce["passed"],
        }]
    elif args.suite == "chaining":
        checks = []
        for i in range(args.count):
            spec = dira.gen_random_sv_spec(args.seed + i)
            rep = dira.check_chaining(spec, gap=gap)
            d = rep.to_json_dict()
            d["passed"] = rep.holds
            d["seed"] = args.seed + i
            checks.append(d)
    elif args.suite == "alt-model":
        checks = verify.run_alt_model_suite(args.count, args.seed)
    else:
        raise ValueError(f"unknown suite {args.suite!r}")
    for check in checks:
        check.setdefault("suite", args.suite)
        check.setdefault("seed", args.seed)
    ok = all(c.get("passed", c.get("holds", False)) for c in checks)
    _emit(checks, args.plain)
    return EXIT_OK if ok else EXIT_VERIFY_FAIL


def cmd_dira_rate(args) -> int:
    from .dira import DiraParams, dira_epsilon, dira_rate

    params = DiraParams(n=args.n, h=args.h, mu=args.mu, eps=args.eps,
                        eps_s=args.eps_s, c=args.c, privatized=args.privatized)
    rate = dira_rate(params)
    _emit({"m": rate.m, "flag": rate.flag, "raw": rate.raw,
           "epsilon_check": dira_epsilon(params, rate.m),
           "privatized": rate.privatized,
           "n": args.n, "h": args.h, "mu": args.mu, "eps": args.eps,
           "eps_s": args.eps_s, "c": args.c}, args.plain)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qextract",
        description="randomness extraction kernels and entropy analysis")
    parser.add_argument("--plain", action="store_true",
                        help="key-value output instead of JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-family", help="write a matrix family JSON file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=int, choices=(0, 1), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_family)

    p = sub.add_parser("extract", help="run an extractor over bit files")
    p.add_argument("--family", help="matrix family JSON (multi-bit extractor)")
    p.add_argument("--ip", action="store_true", help="inner product extractor")
    p.add_argument("--n", type=int, help="block bits (inner product only)")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--strong", action="store_true",
                   help="append each y block after the output bits")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("entropy", help="entropy quantities of a state file")
    p.add_argument("--kind", choices=("hmin", "h2", "hinf", "pguess", "k2"),
                   required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--target", help="comma-separated target systems")
    p.add_argument("--condition", help="comma-separated conditioning systems")
    p.add_argument("--instrument", help="instrument JSON (k2 only)")
    p.add_argument("--gap", type=float, default=None)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", required=True,
                   choices=("ip-bound", "deor-bound", "xor", "tightness",
                            "counterexample", "chaining", "alt-model"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--gap", type=float, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dira-rate", help="output length and security calculator")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--eps-s", type=float, required=True, dest="eps_s")
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--privatized", action="store_true",
                   help="record that the second source's bits will be "
                        "published (strong extraction; no numeric effect)")
    p.set_defaults(func=cmd_dira_rate)

    return parser


def main(argv=None) -> int:
    from .extractor import TruncatedStreamError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TruncatedStreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA
    except (FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: bad input data: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS


if __name__ == "__main__":
    sys.exit(main())
