"""Command-line entry point.

Subcommands: run, audit, nu, frugality, sweep, lowerbound, generate.
Exit status is 0 on success, 2 when arguments or input files are invalid
(one-line diagnostic on stderr) and 1 when the computation itself fails.
Results go to stdout, or to a file under ``--out DIR`` written atomically.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import fields
from typing import List, Optional

import numpy as np

from . import experiments, serialize
from .frugality import frugality_probe, lower_bound_instance, nu
from .manipulation import SearchBudget, audit
from .mechanisms import MECHANISMS, Mechanism
from .random_instances import random_explicit_system, random_graph_system
from .setsystem import truthful_bids

SEED_ENV = "TEAM_AUCTION_SEED"


class UsageError(Exception):
    """Invalid arguments or input; maps to exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: ${SEED_ENV} or 0)")
    common.add_argument("--out", metavar="DIR", help="write results into DIR instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    mech = _Parser(add_help=False)
    mech.add_argument("--mechanism", choices=MECHANISMS, required=True)
    mech.add_argument("--r", type=float, default=None, help="reserve cost (ap, rvcg only)")

    p = _Parser(prog="teamauction", description="False-name-proof team hiring auctions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", parents=[common, mech], help="run one auction")
    run.add_argument("--instance", required=True)
    run.add_argument("--bids", help="bids JSON; defaults to the instance costs")

    au = sub.add_parser("audit", parents=[common, mech], help="search for profitable deviations")
    au.add_argument("--instance", required=True)
    au.add_argument("--opponents", type=int, default=0, help="random opponent profiles per agent")
    au.add_argument("--max-evaluations", type=int, default=SearchBudget.max_evaluations)

    nu_p = sub.add_parser("nu", parents=[common], help="first-price benchmark nu(c)")
    nu_p.add_argument("--instance", required=True)

    fr = sub.add_parser("frugality", parents=[common, mech], help="sampled frugality ratio")
    fr.add_argument("--generator", choices=("explicit", "graph"), default="explicit")
    fr.add_argument("--elements", type=int, default=6, help="explicit: number of elements")
    fr.add_argument("--sets", type=int, default=5, help="explicit: number of feasible sets")
    fr.add_argument("--vertices", type=int, default=5, help="graph: number of vertices")
    fr.add_argument("--trials", type=int, default=20)

    sw = sub.add_parser("sweep", parents=[common], help="random-graph reserve sweep")
    sw.add_argument("--config", help="JSON experiment config; flags override it")
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--nodes", type=int)
    sw.add_argument("--edges", type=int)
    sw.add_argument("--trials", type=int)
    sw.add_argument("--graph-kind", choices=("uniform", "smallworld"))
    sw.add_argument("--k", type=int)
    sw.add_argument("--rewire-prob", type=float)
    sw.add_argument("--r-max", type=float, help="reserve grid 0..r-max")
    sw.add_argument("--r-step", type=float, help="reserve grid step")

    lb = sub.add_parser("lowerbound", parents=[common], help="MP on the exponential lower-bound family")
    lb.add_argument("--m", type=int, required=True)
    lb.add_argument("--kappa", type=float, default=None, help="default 2^(1-m)")

    gen = sub.add_parser("generate", parents=[common], help="write a random instance")
    gen.add_argument("--kind", choices=("explicit", "graph", "uniform", "smallworld", "lowerbound"),
                     default="explicit")
    gen.add_argument("--elements", type=int, default=6)
    gen.add_argument("--sets", type=int, default=5)
    gen.add_argument("--agents", type=int, default=None)
    gen.add_argument("--vertices", type=int, default=6)
    gen.add_argument("--trial", type=int, default=0, help="uniform/smallworld: trial id")
    gen.add_argument("--m", type=int, default=3)
    return p


# ---------------------------------------------------------------------------
# validation helpers


def _mechanism(args) -> Mechanism:
    if args.mechanism == "mp":
        if args.r is not None:
            raise UsageError("--r is not allowed with --mechanism mp")
        return Mechanism("mp")
    if args.r is None:
        raise UsageError(f"--r is required with --mechanism {args.mechanism}")
    if not args.r >= 0:
        raise UsageError("--r must be non-negative")
    return Mechanism(args.mechanism, args.r)


def _load_instance(path, need_costs=False):
    if not os.path.isfile(path):
        raise UsageError(f"instance file not found: {path}")
    sys_, costs = serialize.load_instance(path)
    if need_costs and costs is None:
        raise UsageError(f"{path}: instance has no costs")
    return sys_, costs


def _positive(name, v):
    if v is not None and v < 1:
        raise UsageError(f"{name} must be >= 1")


def _sweep_config(args) -> experiments.ExperimentConfig:
    values = {}
    if args.config:
        if not os.path.isfile(args.config):
            raise UsageError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            try:
                values = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{args.config}: invalid JSON ({exc.msg})") from None
        if not isinstance(values, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
    known = {f.name for f in fields(experiments.ExperimentConfig)} | {"r_max", "r_step"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys {unknown}")
    for key in ("nodes", "edges", "trials", "graph_kind", "k", "rewire_prob", "r_max", "r_step"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    if args.seed is not None or "seed" not in values:
        values["seed"] = args.seed if args.seed is not None else _default_seed()
    r_max, r_step = values.pop("r_max", None), values.pop("r_step", None)
    if r_max is not None or r_step is not None:
        if "reserve_grid" in values:
            raise UsageError("give either reserve_grid or r_max/r_step, not both")
        step = 0.05 if r_step is None else r_step
        if not step > 0:
            raise UsageError("reserve grid step must be positive")
        values["reserve_grid"] = experiments.default_reserve_grid(3.5 if r_max is None else r_max, step)
    try:
        return experiments.ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# output


class Emitter:
    def __init__(self, out_dir: Optional[str], stdout):
        self.out_dir = out_dir
        self.stdout = stdout
        self.written: List[str] = []

    def emit(self, name: str, text: str) -> None:
        if self.out_dir is None:
            self.stdout.write(text)
            return
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, name)
        experiments.atomic_write(path, text)
        self.written.append(path)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(x) -> str:
    return "" if x is None else format(float(x), ".12g")


# ---------------------------------------------------------------------------
# subcommands; each returns a prepared closure so validation finishes first


def _explicit_shape(args):
    if args.elements < 2:
        raise UsageError("--elements must be >= 2 for a monopoly-free system")
    if not 2 <= args.sets <= 2**args.elements - 1:
        raise UsageError(f"--sets must lie in [2, {2**args.elements - 1}] for {args.elements} elements")


def _prepare(args):
    seed = args.seed if args.seed is not None else _default_seed()
    fmt = args.format

    if args.command == "run":
        mech = _mechanism(args)
        sys_, costs = _load_instance(args.instance)
        if args.bids:
            if not os.path.isfile(args.bids):
                raise UsageError(f"bids file not found: {args.bids}")
            bids = serialize.load_bids(args.bids, sys_)
        elif costs is None:
            raise UsageError("no --bids given and the instance has no costs")
        else:
            bids = truthful_bids(sys_, costs)
        if fmt == "csv":
            raise UsageError("run only writes json")

        def go(em):
            out = mech.run(sys_, bids)
            em.emit("outcome.json", serialize.dumps(serialize.outcome_to_json(out)))
        return go

    if args.command == "audit":
        mech = _mechanism(args)
        sys_, costs = _load_instance(args.instance, need_costs=True)
        if args.opponents < 0:
            raise UsageError("--opponents must be >= 0")
        _positive("--max-evaluations", args.max_evaluations)
        budget = SearchBudget(max_evaluations=args.max_evaluations)

        def go(em):
            reports = audit(mech, sys_, costs, budget, opponent_profiles=args.opponents, seed=seed)
            rows = []
            for rep in reports:
                dev = rep.best_deviation
                rows.append((str(args.instance), mech.name, str(rep.agent), rep.opponents,
                             "" if dev is None else dev.kind,
                             "" if dev is None else dev.parameters_json(),
                             _g(rep.truthful_profit), _g(max(rep.best_profit, rep.truthful_profit)),
                             _g(max(rep.gain, 0.0)), rep.searched_count, int(rep.budget_exceeded)))
            header = ("instance", "mechanism", "agent", "opponents", "kind", "parameters",
                      "truthful_profit", "best_profit", "gain", "searched", "budget_exceeded")
            if fmt == "json":
                em.emit("audit.json", serialize.dumps([dict(zip(header, r)) for r in rows]))
            else:
                em.emit("audit.csv", _csv(header, rows))
        return go

    if args.command == "nu":
        sys_, costs = _load_instance(args.instance, need_costs=True)
        if fmt == "csv":
            raise UsageError("nu only writes json")

        def go(em):
            em.emit("nu.json", serialize.dumps(serialize.nu_to_json(nu(sys_, costs))))
        return go

    if args.command == "frugality":
        mech = _mechanism(args)
        for name in ("elements", "sets", "vertices", "trials"):
            _positive("--" + name, getattr(args, name))
        if args.generator == "explicit":
            _explicit_shape(args)
        rng = np.random.default_rng(seed)
        if args.generator == "explicit":
            sys_ = random_explicit_system(rng, args.elements, args.sets)
        else:
            sys_ = random_graph_system(rng, args.vertices)

        def sampler(r, s):
            # three decimals keep nu on the exact rational path
            return {e: round(float(r.uniform(0.0, 1.0)), 3) for e in s.elements}

        def go(em):
            est = frugality_probe(mech, sys_, sampler, args.trials, seed=seed)
            rows = [(i, _g(p), _g(v), _g(p / v) if v > 0 else "")
                    for i, (p, v) in enumerate(est.per_trial)]
            if fmt == "json":
                em.emit("frugality.json", serialize.dumps({
                    "mechanism": mech.name, "reserve": mech.reserve, "trials": est.trials,
                    "ratio_max": serialize.amount(est.ratio_max),
                    "instance": serialize.instance_to_json(sys_),
                    "witness_cost": None if est.witness_cost is None else
                    {str(e): v for e, v in est.witness_cost.items()},
                }))
            else:
                em.emit("frugality.csv", _csv(("trial", "payment", "nu", "ratio"), rows))
        return go

    if args.command == "sweep":
        cfg = _sweep_config(args)
        _positive("--jobs", args.jobs)
        if args.out is None:
            raise UsageError("sweep needs --out DIR")

        def go(em):
            records, report = experiments.run_sweep(cfg, jobs=args.jobs)
            em.written += experiments.emit_report(records, args.out, report)
        return go

    if args.command == "lowerbound":
        _positive("--m", args.m)
        kappa = 2.0 ** (1 - args.m) if args.kappa is None else args.kappa
        if not kappa > 0:
            raise UsageError("--kappa must be positive")

        def go(em):
            sys_, costs = lower_bound_instance(args.m, kappa)
            out = Mechanism("mp").run(sys_, truthful_bids(sys_, costs))
            value = float(nu(sys_, costs).value)
            pay = out.total_payment()
            em.emit("lowerbound.json", serialize.dumps({
                "m": args.m, "kappa": serialize.amount(kappa),
                "payment": serialize.amount(pay), "nu": serialize.amount(value),
                "ratio": serialize.amount(pay / value),
            }))
        return go

    if args.command == "generate":
        for name in ("elements", "sets", "vertices", "m"):
            _positive("--" + name, getattr(args, name))
        if args.kind == "explicit":
            _explicit_shape(args)
        rng = np.random.default_rng(seed)

        def go(em):
            if args.kind == "explicit":
                sys_ = random_explicit_system(rng, args.elements, args.sets, args.agents)
                costs = {e: round(float(rng.uniform(0, 1)), 3) for e in sys_.elements}
            elif args.kind == "graph":
                sys_ = random_graph_system(rng, args.vertices, n_agents=args.agents)
                costs = {e: round(float(rng.uniform(0, 1)), 3) for e in sys_.elements}
            elif args.kind == "lowerbound":
                sys_, costs = lower_bound_instance(args.m, 2.0 ** (1 - args.m))
            else:
                cfg = experiments.ExperimentConfig(seed=seed, graph_kind=args.kind, trials=1)
                sys_, costs, _, _ = experiments.generate(cfg, args.trial)
            em.emit("instance.json", serialize.dumps(serialize.instance_to_json(sys_, costs)))
        return go

    raise UsageError(f"unknown command {args.command}")  # pragma: no cover


def main(argv: Optional[List[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        go = _prepare(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {' '.join(str(exc).split())}", file=stderr)
        return 2
    try:
        go(Emitter(args.out, stdout))
    except Exception as exc:  # noqa: BLE001 - report any failure as a runtime error
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
