"""Command-line front end.

Every run prints one JSON document (``table`` prints CSV).  Floats are
written with 17 significant digits and keys in a fixed order, so equal
invocations give byte-identical output whatever ``--workers`` is.

Exit status: 0 on success, 1 when a module rejects the instance (the
error object goes to stderr), 2 for usage errors.
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds, lp, simulate
from .combinatorics import PositiveModel
from .design import PoolDesign, design_stats, generate_bernoulli_design, singleton_design

BOUND_METHODS = ("dual-greedy", "b-k", "two-stage", "random-exact", "poisson", "entropy", "tail")
TABLE_COLUMNS = ("n", "v_lower", "two_stage_lower", "v_rec", "q_rec", "poisson_upper", "entropy_bound")


class UsageError(Exception):
    def __init__(self, flag, message):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


def _count(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}") from None
    if not math.isfinite(x) or x < 0 or not x.is_integer() or x > 2**63:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    # exact parse for plain digit strings, float route only for forms like 1e4
    return int(text) if text.strip().isdigit() else int(x)


def _real(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a real number, got {text!r}") from None
    if not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return x


def _count_list(text):
    values = [_count(part) for part in text.split(",") if part.strip()]
    if not values:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers")
    return values


@dataclass(frozen=True)
class PriorSpec:
    kind: str
    value: object

    def build(self, n):
        if self.kind == "bernoulli":
            return PositiveModel.bernoulli(n, self.value)
        if self.kind == "uniform-k":
            return PositiveModel.uniform_k(n, self.value)
        model = PositiveModel.explicit(self.value)
        if model.n != n:
            raise ValueError(f"explicit prior covers {model.n} objects, expected {n}")
        return model


def _prior(text):
    kind, sep, rest = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("prior must be bernoulli:<p>, uniform-k:<k> or explicit:@file")
    if kind == "bernoulli":
        p = _real(rest)
        if p < 0:
            raise argparse.ArgumentTypeError(f"bernoulli p must be >= 0, got {p}")
        return PriorSpec(kind, p)
    if kind == "uniform-k":
        return PriorSpec(kind, _count(rest))
    if kind == "explicit":
        if not rest.startswith("@"):
            raise argparse.ArgumentTypeError("explicit prior takes @file")
        try:
            weights = json.loads(Path(rest[1:]).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise argparse.ArgumentTypeError(f"cannot read weights from {rest[1:]!r}: {exc}") from None
        if isinstance(weights, dict):
            weights = weights.get("weights")
        if not isinstance(weights, list) or not all(
            isinstance(w, (int, float)) and not isinstance(w, bool) for w in weights
        ):
            raise argparse.ArgumentTypeError("weights file must hold a JSON list of numbers")
        return PriorSpec(kind, tuple(float(w) for w in weights))
    raise argparse.ArgumentTypeError(f"unknown prior kind {kind!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="poolbounds", description="Two-stage group testing bounds and simulation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--output", help="write the document here instead of stdout")

    def v_options(p):
        p.add_argument("--v", type=_count, help="number of pools")
        p.add_argument("--beta", type=_real, help="pool count from the lower-bound rate beta")
        p.add_argument("--eps", type=_real, help="pool count (and q) from the random-design recipe")

    p = sub.add_parser("design", help="generate a pool design")
    p.add_argument("--n", type=_count, required=True)
    v_options(p)
    p.add_argument("--q", type=_real)
    p.add_argument("--seed", type=_count, default=0)
    p.add_argument("--singleton", action="store_true", help="one pool per object")
    common(p)

    p = sub.add_parser("simulate", help="estimate expected unresolved negatives")
    p.add_argument("--design", help="design file; omit to draw a fresh random design per trial")
    p.add_argument("--n", type=_count)
    v_options(p)
    p.add_argument("--q", type=_real)
    p.add_argument("--prior", type=_prior, required=True)
    p.add_argument("--trials", type=_count, required=True)
    p.add_argument("--seed", type=_count, default=0)
    p.add_argument("--workers", type=_count, default=1)
    common(p)

    p = sub.add_parser("bound", help="evaluate a bound")
    p.add_argument("--method", choices=BOUND_METHODS, required=True)
    p.add_argument("--n", type=_count, required=True)
    v_options(p)
    p.add_argument("--q", type=_real)
    p.add_argument("--k", type=_count)
    p.add_argument("--prior", type=_prior)
    p.add_argument("--estimate", choices=("closed-form", "greedy"), default="closed-form")
    p.add_argument("--mean", type=_real)
    p.add_argument("--t", type=_real)
    common(p)

    p = sub.add_parser("lp", help="LP relaxation: certificate, solve, brute force, export")
    p.add_argument("--n", type=_count, required=True)
    v_options(p)
    p.add_argument("--prior", type=_prior, required=True)
    p.add_argument("--certify", action="store_true")
    p.add_argument("--solve", action="store_true")
    p.add_argument("--bruteforce", action="store_true")
    p.add_argument("--export-primal", help="write the primal in LP format")
    p.add_argument("--export-dual", help="write the dual in LP format")
    common(p)

    p = sub.add_parser("bruteforce", help="best physical design by enumeration")
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--v", type=_count, required=True)
    p.add_argument("--prior", type=_prior, required=True)
    common(p)

    p = sub.add_parser("campaign", help="multi-instance two-stage campaign on a fixed design")
    p.add_argument("--design", required=True)
    p.add_argument("--prior", type=_prior, required=True)
    p.add_argument("--instances", type=_count, required=True)
    p.add_argument("--threshold", type=_count, required=True)
    p.add_argument("--seed", type=_count, default=0)
    p.add_argument("--workers", type=_count, default=1)
    common(p)

    p = sub.add_parser("table", help="threshold table over a sweep of n (CSV)")
    p.add_argument("--sweep-n", type=_count_list, required=True)
    p.add_argument("--p", type=_real, required=True)
    p.add_argument("--beta", type=_real, required=True)
    p.add_argument("--eps", type=_real, required=True)
    p.add_argument("--estimate", choices=("closed-form", "greedy"), default="closed-form")
    common(p)
    return parser


@dataclass
class CommandPlan:
    command: str
    params: dict
    output: str | None


def _need(ns, flag):
    value = getattr(ns, flag.lstrip("-").replace("-", "_"))
    if value is None:
        raise UsageError(flag, "is required here")
    return value


def _check(flag, ok, message):
    if not ok:
        raise UsageError(flag, message)


def _check_n_recipe(ns, flag):
    _check("--n", ns.n >= 16, f"--{flag} needs n >= 16")


def _resolve_v(ns, required=True):
    """(v, source, recipe q) from exactly one of --v, --beta, --eps."""
    given = [f for f in ("v", "beta", "eps") if getattr(ns, f) is not None]
    if ns.command == "bound" and ns.method == "two-stage":
        # beta is the rate there; it only sets v when --v is absent
        given = [f for f in given if f != "beta"] or (["beta"] if ns.beta is not None else [])
    if len(given) > 1:
        raise UsageError("--" + given[1], "give only one of --v, --beta, --eps")
    if not given:
        if required:
            raise UsageError("--v", "one of --v, --beta, --eps is required")
        return None, None, None
    source = given[0]
    if source == "v":
        return ns.v, "v", None
    if source == "beta":
        _check_beta(ns)
        _check_n_recipe(ns, "beta")
        return bounds.lower_threshold_pools(ns.n, ns.beta), "beta", None
    _check("--eps", ns.eps > 0, f"must be > 0, got {ns.eps}")
    _check_n_recipe(ns, "eps")
    v, q = bounds.recommend_design(ns.n, ns.eps)
    return v, "eps", q


def _check_beta(ns):
    _check("--beta", 0 < ns.beta < 0.5, f"must lie in (0, 0.5), got {ns.beta}")


def _check_q(q):
    _check("--q", 0.0 <= q <= 1.0, f"must lie in [0, 1], got {q}")


def _model(spec, n, flag="--prior"):
    try:
        model = spec.build(n)
    except ValueError as exc:
        raise UsageError(flag, str(exc)) from None
    return model


def _validate(ns):
    c = ns.command
    params = {}
    if hasattr(ns, "seed"):
        _check("--seed", ns.seed < 2**64, "must be below 2**64")
        params["seed"] = ns.seed
    if hasattr(ns, "workers"):
        _check("--workers", 1 <= ns.workers <= 256, f"must lie in [1, 256], got {ns.workers}")
        params["workers"] = ns.workers
    if getattr(ns, "q", None) is not None:
        _check_q(ns.q)

    if c == "design":
        if ns.singleton:
            _check("--singleton", all(getattr(ns, f) is None for f in ("v", "beta", "eps", "q")),
                   "does not combine with --v, --beta, --eps or --q")
            params.update(n=ns.n, singleton=True)
        else:
            v, source, q_rec = _resolve_v(ns)
            q = ns.q if ns.q is not None else q_rec
            if q is None:
                raise UsageError("--q", "is required unless --eps sets it")
            _check("--n", ns.n * max(v, 1) <= 10**8, "design too large (n * v > 1e8)")
            params.update(n=ns.n, v=v, v_source=source, q=q, singleton=False)

    elif c == "simulate":
        _check("--trials", ns.trials >= 1, "must be >= 1")
        _check("--trials", ns.trials <= 10**8, "must be <= 1e8")
        _check("--prior", ns.prior.kind != "explicit", "sampling from an explicit prior is not supported")
        params.update(prior=ns.prior, trials=ns.trials)
        if ns.design is not None:
            for flag in ("n", "v", "beta", "eps", "q"):
                _check("--" + flag, getattr(ns, flag) is None, "does not combine with --design")
            params["design"] = ns.design
        else:
            n = _need(ns, "--n")
            v, source, q_rec = _resolve_v(ns)
            q = ns.q if ns.q is not None else q_rec
            if q is None:
                raise UsageError("--q", "is required unless --eps sets it")
            _check("--n", n * max(v, 1) <= 10**6, "random-design simulation needs n * v <= 1e6")
            params.update(n=n, v=v, v_source=source, q=q, model=_model(ns.prior, n))

    elif c == "bound":
        m = ns.method
        params.update(method=m, n=ns.n)
        if m == "tail":
            mean, t = _need(ns, "--mean"), _need(ns, "--t")
            _check("--n", ns.n >= 1, "must be >= 1")
            _check("--t", 0 <= t < ns.n, f"must lie in [0, n), got {t}")
            _check("--mean", 0 <= mean <= ns.n, f"must lie in [0, n], got {mean}")
            params.update(mean=mean, t=t)
        elif m == "entropy":
            params["model"] = _model(_need(ns, "--prior"), ns.n)
        else:
            spec = _need(ns, "--prior") if m != "b-k" else ns.prior
            model = _model(spec, ns.n) if spec is not None else None
            v, source, q_rec = _resolve_v(ns)
            params.update(v=v, v_source=source, model=model)
            if m == "b-k":
                k = _need(ns, "--k")
                _check("--k", 1 <= k <= ns.n, f"must lie in [1, n], got {k}")
                _check("--n", ns.n <= 10**12, "must be <= 1e12")
                params["k"] = k
            if m in ("two-stage", "poisson"):
                _check("--prior", spec.kind == "bernoulli", f"method {m} needs a bernoulli prior")
            if m == "two-stage":
                _need(ns, "--beta")
                _check_beta(ns)
                _check_n_recipe(ns, "method two-stage")
                params.update(beta=ns.beta, estimate=ns.estimate)
            if m in ("random-exact", "poisson"):
                q = ns.q if ns.q is not None else q_rec
                if q is None:
                    raise UsageError("--q", "is required unless --eps sets it")
                params["q"] = q
            if m in ("dual-greedy", "random-exact"):
                _check("--n", ns.n <= 10**7, "must be <= 1e7 for this method")

    elif c == "lp":
        v, source, _ = _resolve_v(ns)
        actions = ns.certify or ns.solve or ns.bruteforce or ns.export_primal or ns.export_dual
        _check("--certify", bool(actions), "choose at least one of --certify, --solve, --bruteforce, --export-*")
        params.update(n=ns.n, v=v, v_source=source, model=_model(ns.prior, ns.n), certify=ns.certify,
                      solve=ns.solve, bruteforce=ns.bruteforce, export_primal=ns.export_primal,
                      export_dual=ns.export_dual)
        if ns.certify:
            _check("--n", ns.n <= lp.MAX_CERTIFICATE_OBJECTS, f"--certify handles n <= {lp.MAX_CERTIFICATE_OBJECTS}")
        if ns.export_primal or ns.export_dual or ns.solve:
            _check("--n", ns.n <= lp.MAX_LP_OBJECTS, f"LP building handles n <= {lp.MAX_LP_OBJECTS}")
        if ns.bruteforce:
            _check("--v", (2**v) ** ns.n <= lp.BRUTE_FORCE_LIMIT if v <= 64 and ns.n <= 64 else False,
                   "brute force needs (2**v)**n <= 1e7")

    elif c == "bruteforce":
        _check("--v", (2**ns.v) ** ns.n <= lp.BRUTE_FORCE_LIMIT if ns.v <= 64 and ns.n <= 64 else False,
               "brute force needs (2**v)**n <= 1e7")
        params.update(n=ns.n, v=ns.v, model=_model(ns.prior, ns.n))

    elif c == "campaign":
        _check("--prior", ns.prior.kind != "explicit", "sampling from an explicit prior is not supported")
        _check("--instances", ns.instances <= 10**7, "must be <= 1e7")
        params.update(design=ns.design, prior=ns.prior, instances=ns.instances, threshold=ns.threshold)

    elif c == "table":
        _check("--sweep-n", all(16 <= n <= 10**15 for n in ns.sweep_n), "every n must lie in [16, 1e15]")
        _check_beta(ns)
        _check("--eps", ns.eps > 0, f"must be > 0, got {ns.eps}")
        _check("--p", ns.p >= 0, f"must be >= 0, got {ns.p}")
        _check("--p", all(ns.p <= n for n in ns.sweep_n), "must be <= every n")
        params.update(ns=ns.sweep_n, p=ns.p, beta=ns.beta, eps=ns.eps, estimate=ns.estimate)
    return params


def parse(argv):
    """Parse and validate ``argv``; usage problems exit with status 2."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        params = _validate(ns)
    except UsageError as exc:
        sub = parser._subparsers._group_actions[0].choices[ns.command]
        sub.error(str(exc))
    return CommandPlan(ns.command, params, ns.output)


def _fmt_float(x):
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps(obj):
    """Deterministic JSON: insertion-ordered keys, floats at 17 digits."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _run(plan):
    c, a = plan.command, plan.params
    if c == "design":
        if a["singleton"]:
            d = singleton_design(a["n"])
            return {**d.to_dict(), "generator": {"kind": "singleton"}}
        d = generate_bernoulli_design(a["n"], a["v"], a["q"], a["seed"])
        doc = d.to_dict()
        doc["generator"] = {"kind": "bernoulli", "q": a["q"], "seed": a["seed"], "v_source": a["v_source"]}
        return doc

    if c == "simulate":
        if "design" in a:
            design = PoolDesign.load(a["design"])
            model = a["prior"].build(design.n)
            est = simulate.estimate_expected_unresolved(design, model, a["trials"], a["seed"], a["workers"])
            return {"command": "simulate", "n": design.n, "v": design.v, "prior": model.to_dict(),
                    "seed": a["seed"], "estimate": est.to_dict()}
        est = simulate.estimate_random_design_unresolved(
            a["n"], a["v"], a["q"], a["model"], a["trials"], a["seed"], a["workers"])
        exact = bounds.expected_unresolved_random(a["n"], a["v"], a["q"], a["model"]).value
        return {"command": "simulate", "n": a["n"], "v": a["v"], "v_source": a["v_source"], "q": a["q"],
                "prior": a["model"].to_dict(), "seed": a["seed"], "estimate": est.to_dict(),
                "exact_random_design_mean": exact}

    if c == "bound":
        m = a["method"]
        if m == "tail":
            value = bounds.tail_lower_bound(a["mean"], a["n"], a["t"])
            return {"command": "bound", "name": "tail_lower_bound", "direction": "lower", "value": value,
                    "params": {"n": a["n"], "mean": a["mean"], "t": a["t"]}}
        if m == "entropy":
            report = bounds.entropy_bound(a["model"])
        elif m == "dual-greedy":
            report = bounds.greedy_dual_bound(a["n"], a["v"], a["model"])
        elif m == "b-k":
            report = bounds.b_k_estimate(a["n"], a["v"], a["k"])
        elif m == "two-stage":
            report = bounds.two_stage_lower(a["n"], a["v"], a["model"].p, a["beta"], estimate=a["estimate"])
        elif m == "random-exact":
            report = bounds.expected_unresolved_random(a["n"], a["v"], a["q"], a["model"])
        else:
            report = bounds.poisson_upper(a["n"], a["v"], a["q"], a["model"].p)
        doc = {"command": "bound", **report.to_dict()}
        if "v" in a:
            doc["v"] = a["v"]
            doc["v_source"] = a["v_source"]
        return doc

    if c == "lp":
        n, v, model = a["n"], a["v"], a["model"]
        doc = {"command": "lp", "n": n, "v": v, "v_source": a["v_source"], "prior": model.to_dict()}
        if a["certify"]:
            cert = lp.greedy_dual_certificate(n, v, model)
            report = lp.check_certificate(cert, n, v, model)
            doc["certificate"] = {**report.to_dict(), "v": cert.v}
        if a["solve"] or a["export_primal"] or a["export_dual"]:
            primal = lp.build_primal(n, v, model)
            dual = lp.build_dual(n, v, model)
            if a["export_primal"]:
                Path(a["export_primal"]).write_text(primal.to_lp_format(), encoding="utf-8")
            if a["export_dual"]:
                Path(a["export_dual"]).write_text(dual.to_lp_format(), encoding="utf-8")
            if a["solve"]:
                p_res, d_res = lp.solve_small(primal), lp.solve_small(dual)
                doc["lp"] = {"status": p_res.status, "value": p_res.value,
                             "dual_status": d_res.status, "dual_value": d_res.value,
                             "variables": primal.num_variables, "constraints": primal.num_constraints}
        if a["bruteforce"]:
            value, design = lp.brute_force_min_design(n, v, model)
            doc["bruteforce"] = {"value": value, "design": design.to_dict()}
        return doc

    if c == "bruteforce":
        value, design = lp.brute_force_min_design(a["n"], a["v"], a["model"])
        return {"command": "bruteforce", "n": a["n"], "v": a["v"], "prior": a["model"].to_dict(),
                "value": value, "design": design.to_dict()}

    if c == "campaign":
        design = PoolDesign.load(a["design"])
        model = a["prior"].build(design.n)
        stats = simulate.run_campaign(design, model, a["instances"], a["threshold"], a["seed"], a["workers"])
        return {"command": "campaign", "n": design.n, "v": design.v, "prior": model.to_dict(), "seed": a["seed"],
                "design_stats": design_stats(design).to_dict(), **stats.to_dict()}

    rows = bounds.threshold_table(a["ns"], a["p"], a["beta"], a["eps"], estimate=a["estimate"])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    for row in rows:
        writer.writerow([_fmt_float(row[k]) if isinstance(row[k], float) else row[k] for k in TABLE_COLUMNS])
    return buf.getvalue()


def execute(plan):
    """Run a validated plan; returns (exit status, emitted text)."""
    result = _run(plan)
    text = result if isinstance(result, str) else dumps(result) + "\n"
    if plan.output:
        Path(plan.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0, text


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        plan = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        status, _ = execute(plan)
    except Exception as exc:  # every module failure becomes an error object
        sys.stderr.write(dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return status


if __name__ == "__main__":
    sys.exit(main())
