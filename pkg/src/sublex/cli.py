"""Command-line front end: model files in, JSON reports (and trajectory CSV)
out.

Exit status contract: 0 when every enforced verdict holds, 1 when a verified
inequality fails, 2 when a precondition or classification refuses the check,
3 for input errors.  Diagnostic-only comparisons never affect the status.
Reports are byte-identical across reruns and thread counts apart from the
wall_time_s field.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import __version__
from .credal import (conditional_expectation, conjugate_expectation,
                     upper_expectation)
from .distribution import (approximate_event, check_identical,
                           check_independence)
from .errors import ModelFileError, PreconditionError, SublexError
from .inequalities import (doob_martingale, doob_submartingale_max,
                           doob_submartingale_min, kolmogorov_inequality)
from .integrability import (dominated_convergence_check, lb_tail_test,
                            ui_check)
from .lln import (SimulationConfig, cluster_diagnostic, borel_cantelli_bound,
                  mean_certain_slln, series_convergence_check,
                  strategies_from_names, weighted_slln_check)
from .martingale import classify_process, jensen_transform_check, optional_sampling_check
from .modelfile import ParsedModel, parse_model, parse_template

CHECK_NAMES = ("doob-max", "doob-min", "doob-mart", "kolmogorov",
               "optional-sampling", "jensen", "independence", "identical",
               "ui", "tail", "dct", "borel-cantelli", "approx-event")
SIM_NAMES = ("slln", "weighted", "series", "cluster")


def _emit(doc: dict, out_path, t0: float) -> None:
    doc["engine_version"] = __version__
    doc["wall_time_s"] = round(time.perf_counter() - t0, 6)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _split(raw: str) -> list[str]:
    return [s for s in (p.strip() for p in raw.split(",")) if s]


def _bn_spec(raw: str):
    if raw.startswith("custom:"):
        path = raw[len("custom:"):]
        with open(path, "r", encoding="utf-8") as fh:
            return [float(v) for v in json.load(fh)]
    return raw


def cmd_expect(args) -> int:
    t0 = time.perf_counter()
    parsed = parse_model(args.model)
    x = parsed.variable(args.var)
    if args.t is None:
        payload = {"upper": upper_expectation(parsed.model, x),
                   "conjugate": conjugate_expectation(parsed.model, x)}
    else:
        payload = {"conditional":
                   [float(v) for v in conditional_expectation(parsed.model, x, args.t)],
                   "t": args.t}
    _emit({"command": "expect", "model_fingerprint": parsed.model.fingerprint(),
           "var": args.var, "result": payload}, args.out, t0)
    return 0


def cmd_cond(args) -> int:
    t0 = time.perf_counter()
    parsed = parse_model(args.model)
    x = parsed.variable(args.var)
    vals = conditional_expectation(parsed.model, x, args.t)
    _emit({"command": "cond", "model_fingerprint": parsed.model.fingerprint(),
           "var": args.var, "t": args.t,
           "result": [float(v) for v in vals]}, args.out, t0)
    return 0


def cmd_classify(args) -> int:
    t0 = time.perf_counter()
    parsed = parse_model(args.model)
    cls = classify_process(parsed.model, parsed.process(args.process), args.tol)
    _emit({"command": "classify", "model_fingerprint": parsed.model.fingerprint(),
           "process": args.process, "result": cls.to_dict()}, args.out, t0)
    return 0


def _run_check(parsed: ParsedModel, args) -> tuple[dict, bool | None]:
    """Dispatch one named check; returns (payload, enforced verdict)."""
    model = parsed.model
    name = args.name
    if name == "doob-max":
        rep = doob_submartingale_max(model, parsed.process(args.process),
                                     args.lam, args.tol)
        return rep.to_dict(), rep.holds
    if name == "doob-min":
        rep = doob_submartingale_min(model, parsed.process(args.process),
                                     args.lam, args.tol)
        return rep.to_dict(), rep.holds
    if name == "doob-mart":
        rep = doob_martingale(model, parsed.process(args.process),
                              args.lam, args.tol)
        return rep.to_dict(), rep.holds
    if name == "kolmogorov":
        steps = parsed.steps if args.n is None else parsed.steps[: args.n]
        rep = kolmogorov_inequality(model, steps, args.eps, tol=args.tol)
        return rep.to_dict(), rep.holds
    if name == "optional-sampling":
        rep = optional_sampling_check(model, parsed.process(args.process),
                                      parsed.stopping_time(args.stop_s),
                                      parsed.stopping_time(args.stop_t), args.tol)
        return rep.to_dict(), rep.holds
    if name == "jensen":
        rep = jensen_transform_check(model, parsed.variable(args.var),
                                     args.t or 0, args.phi, args.tol)
        return rep.to_dict(), rep.holds
    if name == "independence":
        xs = [parsed.variable(n) for n in _split(args.x)]
        rep = check_independence(model, xs, parsed.variable(args.y), tol=args.tol)
        return rep.to_dict(), rep.passed
    if name == "identical":
        other = parse_model(args.model2) if args.model2 else parsed
        rep = check_identical(model, parsed.variable(args.x),
                              other.model, other.variable(args.y), tol=args.tol)
        return rep.to_dict(), rep.passed
    if name == "ui":
        fam = [parsed.variable(n) for n in _split(args.family)]
        rep = ui_check(model, fam)
        return rep.to_dict(), rep.uniformly_integrable and rep.certificates_pass
    if name == "tail":
        rep = lb_tail_test(model, parsed.variable(args.var), args.p)
        return rep.to_dict(), rep.member
    if name == "dct":
        seq = [parsed.variable(n) for n in _split(args.seq)]
        rep = dominated_convergence_check(model, seq, parsed.variable(args.limit),
                                          parsed.variable(args.bound),
                                          tol=args.tol if args.tol != 1e-9 else 1e-6)
        return rep.to_dict(), rep.passed
    if name == "borel-cantelli":
        evs = [parsed.event(n) for n in _split(args.events)]
        rep = borel_cantelli_bound(model, evs, args.tol)
        return rep.to_dict(), rep.holds
    if name == "approx-event":
        rep = approximate_event(model, parsed.event(args.event), args.n or 0)
        return rep.to_dict(), rep.bound_holds
    raise ModelFileError(f"unknown check {name!r}")


def cmd_check(args) -> int:
    t0 = time.perf_counter()
    parsed = parse_model(args.model)
    try:
        payload, verdict = _run_check(parsed, args)
    except PreconditionError as exc:
        doc = {"command": "check", "check": args.name, "error": str(exc),
               "error_kind": "precondition",
               "model_fingerprint": parsed.model.fingerprint()}
        extra = getattr(exc, "classification", None)
        if extra is not None:
            doc["classification"] = extra.to_dict()
        rep = getattr(exc, "report", None)
        if rep is not None:
            doc["report"] = rep.to_dict()
        _emit(doc, args.out, t0)
        return 2
    _emit({"command": "check", "check": args.name,
           "model_fingerprint": parsed.model.fingerprint(),
           "tolerance": args.tol, "report": payload, "verdict": verdict},
          args.out, t0)
    return 0 if verdict else 1


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    template = parse_template(args.model)
    strategies = None
    if args.strategies:
        strategies = strategies_from_names(_split(args.strategies),
                                           len(template.kernels))
    config = SimulationConfig(
        steps=args.steps, reps=args.reps, seed=args.seed,
        burn_in=args.burn_in, tolerance=args.tol, strategies=strategies)
    kind = args.kind
    try:
        if kind == "slln":
            if args.bn != "n":
                # a non-default divisor is the weighted variant
                verdict = weighted_slln_check(template, _bn_spec(args.bn), config)
            else:
                verdict = mean_certain_slln(template, config)
        elif kind == "weighted":
            verdict = weighted_slln_check(template, _bn_spec(args.bn), config)
        elif kind == "series":
            verdict = series_convergence_check(template, _bn_spec(args.weights),
                                               config)
        else:
            verdict = cluster_diagnostic(template, config)
    except PreconditionError as exc:
        _emit({"command": "simulate", "simulation": kind, "error": str(exc),
               "error_kind": "precondition", "seed": args.seed}, args.out, t0)
        return 2
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            verdict.result.write_csv(fh)
    _emit({"command": "simulate", "simulation": kind,
           "template_fingerprint": template.fingerprint(),
           "report": verdict.to_dict(), "verdict": verdict.passed},
          args.out, t0)
    return 0 if verdict.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sublex",
        description="Exact sublinear-expectation checks and LLN simulations "
                    "on finite filtered trees.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="model/template JSON path")
        p.add_argument("--out", default=None, help="write the JSON report here")
        p.add_argument("--tol", type=float, default=1e-9)

    p = sub.add_parser("expect", help="upper/conjugate expectation of a variable")
    common(p)
    p.add_argument("--var", required=True)
    p.add_argument("--t", type=int, default=None)
    p.set_defaults(fn=cmd_expect)

    p = sub.add_parser("cond", help="conditional expectation at a level")
    common(p)
    p.add_argument("--var", required=True)
    p.add_argument("--t", type=int, required=True)
    p.set_defaults(fn=cmd_cond)

    p = sub.add_parser("classify", help="martingale classification of a process")
    common(p)
    p.add_argument("--process", required=True)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("check", help="run one verification check")
    p.add_argument("name", choices=CHECK_NAMES)
    common(p)
    p.add_argument("--process")
    p.add_argument("--var")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--phi", default="square")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--model2")
    p.add_argument("--family")
    p.add_argument("--seq")
    p.add_argument("--limit")
    p.add_argument("--bound")
    p.add_argument("--events")
    p.add_argument("--event")
    p.add_argument("--stop-s", dest="stop_s")
    p.add_argument("--stop-t", dest="stop_t")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("simulate", help="seeded limit-theorem simulation")
    p.add_argument("kind", choices=SIM_NAMES)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None, help="trajectory CSV path")
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--reps", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--bn", default="n", help="n | sqrt | log | custom:FILE")
    p.add_argument("--weights", default="1/i", help="1/i | 1 | custom:FILE")
    p.add_argument("--strategies", default=None, help="comma list of names")
    p.set_defaults(fn=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 3 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ModelFileError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 3
    except PreconditionError as exc:
        sys.stderr.write(f"precondition failed: {exc}\n")
        return 2
    except (ValueError, OSError, SublexError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
