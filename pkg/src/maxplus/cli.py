"""Command-line front end.

One JSON report per run on stdout (or --output), wrapped in an envelope
carrying the parsed configuration and the library version so every claim
can be re-verified offline. Reports are byte-stable for identical
configurations, independent of --threads. Plot data goes to CSV side
files; human-readable summaries go to stderr under --verbose.

Exit codes: 0 success (any verdict), 2 input error, 3 contract violation,
4 budget exhausted in an operation that forbids partial results.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import __version__
from .semiring import (
    EXACT,
    FLOAT,
    BudgetExceeded,
    ContractViolation,
    MaxPlusError,
    as_scalar,
    matrix_from_json,
    scalar_to_json,
    vector_from_json,
)
from .projective import proj_vector_to_json
from .spectral import classify, cyclicity_and_transient, summary_to_json
from .stochastic import (
    StabilityOptions,
    backward_loynes,
    dist_backing,
    distribution_from_json,
    forward_coupling,
    lyapunov_estimate,
    open_system_analysis,
    pattern_search,
    sample_sequence,
    simulate,
    stability_verdict,
    structural_conditions,
)
from .models import (
    cjn_distribution,
    cjn_spec_from_json,
    cjn_stability_condition,
    cjn_trajectory_columns,
    UniformServiceLaw,
    taskgraph_distribution,
    taskgraph_spec_from_json,
)
from .stochastic import distribution_to_json


class InputError(Exception):
    pass


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}")


def _load_matrix(path: str, backing: str):
    return matrix_from_json(_read_json(path), backing)


def _load_distribution(path: str):
    obj = _read_json(path)
    if isinstance(obj, dict) and "result" in obj and isinstance(obj["result"], dict):
        obj = obj["result"]
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected a distribution object")
    return distribution_from_json(obj)


def _load_vector(path: str, backing: str):
    return vector_from_json(_read_json(path), backing)


def _vector_json(v) -> list:
    return [scalar_to_json(x) for x in v.entries]


# ---------------------------------------------------------------------------
# Handlers: each returns (result dict, optional stderr summary)


def _cmd_spectral(args):
    A = _load_matrix(args.input, args.backing)
    summary = classify(A, with_transient=args.transient, max_power=args.max_power)
    return summary_to_json(summary), (
        f"eigenvalue {summary.eigenvalue}, cyclicity {summary.cyclicity}, "
        f"scs1cyc1 {summary.scs1cyc1}"
    )


def _cmd_power(args):
    A = _load_matrix(args.input, args.backing)
    d, m = cyclicity_and_transient(A, max_power=args.max_power)
    note = f"powers repeat with period {d} (up to uniform growth) from power {m}"
    return {"cyclicity": d, "transient": m}, note


def _cmd_simulate(args):
    D = _load_distribution(args.dist)
    x0 = _load_vector(args.x0, dist_backing(D))
    tr = simulate(D, x0, horizon=args.horizon, seed=args.seed,
                  replication=args.replication, thin=args.thin)
    result = {
        "seed": tr.seed,
        "replication": tr.replication,
        "horizon": tr.horizon,
        "thin": tr.thin,
        "x0": _vector_json(tr.x0),
        "sample_times": list(tr.sample_times),
        "states": [_vector_json(s) for s in tr.states],
        "projective": [[scalar_to_json(v) for v in p.entries] for p in tr.projective],
        "increments": [[scalar_to_json(v) for v in z] for z in tr.increments],
    }
    if args.cjn_columns != "none":
        mats = sample_sequence(D, seed=args.seed, n=args.horizon, replication=args.replication)
        cols = cjn_trajectory_columns(tr, mats, physical=args.cjn_columns == "physical")
        result["idle"] = [[scalar_to_json(v) for v in row] for row in cols["idle"]]
        result["waiting"] = (
            None if cols["waiting"] is None
            else [[scalar_to_json(v) for v in row] for row in cols["waiting"]]
        )
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            k = len(x0)
            w.writerow(["n"] + [f"x_{i}" for i in range(k)])
            for n, st in zip(tr.sample_times, tr.states):
                w.writerow([n] + [float(v) for v in st.entries])
    return result, f"simulated {args.horizon} steps, recorded {len(tr.states)} states"


def _cmd_lyapunov(args):
    D = _load_distribution(args.dist)
    x0 = _load_vector(args.x0, dist_backing(D)) if args.x0 else None
    est = lyapunov_estimate(D, horizon=args.horizon, replications=args.replications,
                            seed=args.seed, x0=x0, threads=args.threads)
    return est.to_json(), (
        f"growth rate {float(est.point):.6g} "
        f"(95% CI [{est.ci_low:.6g}, {est.ci_high:.6g}])"
    )


def _cmd_couple(args):
    D = _load_distribution(args.dist)
    backing = dist_backing(D)
    x0s = [_load_vector(p, backing) for p in args.x0]
    rep = forward_coupling(D, x0s, horizon=args.horizon, eta=args.eta, seed=args.seed,
                           replications=args.replications, threads=args.threads)
    result = {
        "eta": rep.eta,
        "horizon": rep.horizon,
        "replications": rep.replications,
        "modes": list(rep.modes),
        "initial_conditions": [_vector_json(v) for v in rep.initial_conditions],
        "samples": [
            {
                "replication": s.replication,
                "merge_time": s.merge_time,
                "eta_time": s.eta_time,
                "window_start": s.window_start,
                "window_length": s.window_length,
            }
            for s in rep.samples
        ],
    }
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replication", "merge_time", "eta_time", "window_start", "window_length"])
            for s in rep.samples:
                w.writerow([
                    s.replication,
                    "" if s.merge_time is None else s.merge_time,
                    "" if s.eta_time is None else s.eta_time,
                    "" if s.window_start is None else s.window_start,
                    "" if s.window_length is None else s.window_length,
                ])
    merged = sum(1 for s in rep.samples if s.merge_time is not None)
    etad = sum(1 for s in rep.samples if s.eta_time is not None)
    return result, f"strong coupling {merged}/{rep.replications}, eta-coupling {etad}/{rep.replications}"


def _cmd_loynes(args):
    D = _load_distribution(args.dist)
    res = backward_loynes(D, tolerance=args.tolerance, budget=args.budget,
                          seed=args.seed, replication=args.replication,
                          trace_every=args.trace_every)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "diameter"])
            for n, d in res.trace:
                w.writerow([n, d])
    note = "converged" if res.converged else "budget exhausted (partial result)"
    return res.to_json(), f"{note} after {res.steps} steps, diameter {res.achieved_diameter}"


def _cmd_patterns(args):
    D = _load_distribution(args.dist)
    rep = pattern_search(D, max_len=args.max_len, budget=args.budget)
    if rep.found:
        note = f"rank-one word {list(rep.word)} (probability {rep.probability})"
    else:
        note = f"no rank-one pattern; search {rep.status}"
    return rep.to_json(), note


def _cmd_conditions(args):
    D = _load_distribution(args.dist)
    rep = structural_conditions(D, max_len=args.max_len, budget=args.budget)
    return rep.to_json(), (
        f"condition I {rep.condition_i}, condition II {rep.condition_ii} ({rep.status})"
    )


def _cmd_stability(args):
    D = _load_distribution(args.dist)
    options = StabilityOptions(
        max_len=args.max_len,
        search_budget=args.search_budget,
        mc_seeds=args.mc_seeds,
        mc_budget=args.mc_budget,
        mc_threshold=args.mc_threshold,
        eta=args.eta,
        seed=args.seed,
        threads=args.threads,
    )
    verdict = stability_verdict(D, options)
    return verdict.to_json(), f"{verdict.verdict} ({verdict.basis})"


def _cmd_open_system(args):
    D = _load_distribution(args.dist)
    rep = open_system_analysis(D, horizon=args.horizon, replications=args.replications,
                               seed=args.seed, threads=args.threads)
    limits = [None if v is None else float(v) for v in rep.node_limits]
    return rep.to_json(), f"node limits {limits}, two-block: {rep.two_block}"


def _cmd_model(args):
    spec_obj = _read_json(args.spec)
    if args.kind == "cjn":
        spec = cjn_spec_from_json(spec_obj)
        D = cjn_distribution(spec, backing=args.backing) if not isinstance(
            spec.law, UniformServiceLaw
        ) else cjn_distribution(spec)
        result = distribution_to_json(D)
        if not isinstance(spec.law, UniformServiceLaw) and spec.customers == spec.queues:
            holds, witness = cjn_stability_condition(spec)
            result["cjn_stability_condition"] = {
                "holds": holds,
                "witness": None if witness is None else
                [scalar_to_json(as_scalar(v, args.backing)) for v in witness],
            }
        note = f"cjn distribution over {D.k} coordinates"
    else:
        spec = taskgraph_spec_from_json(spec_obj)
        D = taskgraph_distribution(spec, backing=args.backing)
        result = distribution_to_json(D)
        note = f"task graph distribution over {D.k} processors"
    return result, note


# ---------------------------------------------------------------------------
# Parser


def _add_common_search(p):
    p.add_argument("--max-len", type=int, default=16, help="maximum word length")
    p.add_argument("--budget", type=int, default=200000, help="maximum states to expand")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxplus",
        description="Max-plus linear systems: spectral analysis and stochastic stability.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", help="write the JSON report here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true",
                        help="print a human-readable summary to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = add("spectral", help="eigenvalue, critical graph, cyclicity, eigenbasis")
    p.add_argument("--input", required=True, help="matrix JSON file")
    p.add_argument("--backing", choices=[EXACT, FLOAT], default=EXACT)
    p.add_argument("--transient", action="store_true", help="also compute the transient")
    p.add_argument("--max-power", type=int, default=None)
    p.set_defaults(func=_cmd_spectral)

    p = add("power", help="cyclicity and transient of the power sequence")
    p.add_argument("--input", required=True)
    p.add_argument("--backing", choices=[EXACT, FLOAT], default=EXACT)
    p.add_argument("--max-power", type=int, default=None)
    p.set_defaults(func=_cmd_power)

    p = add("simulate", help="run one trajectory")
    p.add_argument("--dist", required=True, help="distribution JSON file")
    p.add_argument("--x0", required=True, help="initial condition JSON file")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--cjn-columns", choices=["none", "physical", "split"], default="none",
                   help="derive idle/waiting times (physical: customers == queues)")
    p.add_argument("--csv", help="write states as CSV")
    p.set_defaults(func=_cmd_simulate)

    p = add("lyapunov", help="growth-rate estimate with confidence interval")
    p.add_argument("--dist", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--replications", type=int, default=30)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--x0", help="optional initial condition JSON file")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_lyapunov)

    p = add("couple", help="forward coupling of several initial conditions")
    p.add_argument("--dist", required=True)
    p.add_argument("--x0", action="append", required=True,
                   help="initial condition JSON file (repeat at least twice)")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--eta", type=float, default=1e-6)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--csv", help="write per-replication coupling times as CSV")
    p.set_defaults(func=_cmd_couple)

    p = add("loynes", help="backward scheme for the stationary state")
    p.add_argument("--dist", required=True)
    p.add_argument("--tolerance", type=float, default=0,
                   help="projective diameter target; 0 = exact rank-one stop")
    p.add_argument("--budget", type=int, default=10000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--trace-every", type=int, default=1,
                   help="record the diameter every this many steps (0 = never)")
    p.add_argument("--csv", help="write the diameter trace as CSV")
    p.set_defaults(func=_cmd_loynes)

    p = add("patterns", help="search for rank-one words")
    p.add_argument("--dist", required=True)
    _add_common_search(p)
    p.set_defaults(func=_cmd_patterns)

    p = add("conditions", help="structural conditions I and II")
    p.add_argument("--dist", required=True)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--budget", type=int, default=500000)
    p.set_defaults(func=_cmd_conditions)

    p = add("stability", help="stability verdict with certificates")
    p.add_argument("--dist", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-len", type=int, default=16)
    p.add_argument("--search-budget", type=int, default=200000)
    p.add_argument("--mc-seeds", type=int, default=20)
    p.add_argument("--mc-budget", type=int, default=5000)
    p.add_argument("--mc-threshold", type=float, default=0.95)
    p.add_argument("--eta", type=float, default=1e-6)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_stability)

    p = add("open-system", help="per-component growth rates of a reducible model")
    p.add_argument("--dist", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--replications", type=int, default=30)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_open_system)

    p = add("model", help="build a distribution from a domain spec")
    p.add_argument("kind", choices=["cjn", "taskgraph"])
    p.add_argument("--spec", required=True, help="model spec JSON file")
    p.add_argument("--backing", choices=[EXACT, FLOAT], default=EXACT)
    p.set_defaults(func=_cmd_model)

    return parser


def _config_json(args) -> dict:
    skip = {"func"}
    out = {}
    for key, value in vars(args).items():
        if key in skip:
            continue
        out[key] = value
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed the message; fold usage errors into exit 2
        return 2 if exc.code not in (0, None) else 0
    try:
        result, summary = args.func(args)
    except InputError as exc:
        _emit_error("input", str(exc))
        return 2
    except BudgetExceeded as exc:
        _emit_error("budget", str(exc))
        return 4
    except ContractViolation as exc:
        _emit_error("contract", str(exc))
        return 3
    except MaxPlusError as exc:
        _emit_error("contract", str(exc))
        return 3
    envelope = {
        "command": args.command,
        "config": _config_json(args),
        "version": __version__,
        "result": result,
    }
    text = json.dumps(envelope, sort_keys=True, indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.verbose and summary:
        print(summary, file=sys.stderr)
    return 0


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message}}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
