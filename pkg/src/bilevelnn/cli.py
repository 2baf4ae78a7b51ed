"""Command-line entry point: ``bilevelnn <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset as D
from . import harness as H
from . import mlp
from . import oracle
from . import problems as P
from .milp import SolveConfig
from .surrogate import SurrogateConfig, solve_end_to_end


def _dump(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_scalar) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _scalar(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _floats(v):
    return None if v is None else [float(t) for t in np.asarray(v).ravel()]


def _solution_dict(sol, reproducible):
    d = {"x": _floats(sol.x), "y": _floats(sol.y), "y0": float(sol.y0), "leader_value": sol.leader_value,
         "follower_value": sol.follower_value, "status": sol.status,
         "info": {k: v for k, v in sol.info.items()}, "timings": dict(sol.timings)}
    if reproducible:
        d["timings"] = {k: 0.0 for k in d["timings"]}
    return d


def _instance_files(path):
    p = Path(path)
    files = sorted(p.glob("*.json")) if p.is_dir() else [p]
    return [(f.stem, P.load_instance(f)) for f in files]


def _milp_config(args):
    return SolveConfig(node_limit=args.node_limit, time_limit=args.time_limit)


def cmd_gen_instances(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        inst = P.generate_instance(args.kind, args.n, args.seed + i, k=args.k)
        P.save_instance(inst, out / f"{args.kind}_n{args.n}_{i:03d}.json")
    return 0


def cmd_collect(args):
    ds = D.collect(args.kind, args.instances, args.decisions, args.seed, args.n, k=args.k,
                   use_greedy=args.greedy_features, val_fraction=args.val_fraction)
    D.save_dataset(ds, args.out)
    return 0


def cmd_train(args):
    ds = D.load_dataset(args.data)
    tr = D.to_arrays(ds, args.target, "train")
    va = D.to_arrays(ds, args.target, "val")
    cfg = mlp.TrainConfig(batch_size=args.batch_size, lr=args.lr, max_epochs=args.epochs,
                          patience=args.patience, seed=args.seed)
    net, rep = mlp.train(tr, va, cfg, ds.kind, args.target, ds.config.to_dict())
    mlp.save_network(net, args.out)
    if args.report:
        _dump({"best_val_mae": rep.best_val_mae, "mal": rep.mal, "best_epoch": rep.best_epoch,
               "epochs_run": rep.epochs_run, "stopped_early": rep.stopped_early,
               "degenerate": rep.degenerate, "train_loss": rep.train_loss, "val_mae": rep.val_mae},
              args.report)
    logging.info("validation MAE %.4g, MAL %.4g", rep.best_val_mae, rep.mal)
    return 0


def cmd_solve(args):
    inst = P.load_instance(args.instance)
    net = mlp.load_network(args.model) if args.model else None
    cfg = SurrogateConfig(approx=args.approx, lam=args.lam, slack=args.slack, dampening=args.dampening,
                          milp=_milp_config(args))
    sol = solve_end_to_end(inst, net, cfg)
    _dump(_solution_dict(sol, args.reproducible), args.out)
    return 0


def cmd_evaluate(args):
    instances = _instance_files(args.instances)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    preds = {}
    if args.model_lower:
        preds["NN_l"] = mlp.load_network(args.model_lower)
    if args.model_upper:
        preds["NN_u"] = mlp.load_network(args.model_upper)
    elif "NN_u" in methods and args.model_lower and preds["NN_l"].kind == "kip":
        preds["NN_u"] = preds["NN_l"]  # F = f for interdiction
    cfg = H.EvalConfig(lam=args.lam, milp=_milp_config(args), reproducible=args.reproducible)
    table = H.evaluate(instances, methods, preds, cfg)
    Path(args.out).write_text(table.to_csv())
    if args.summary:
        Path(args.summary).write_text(table.format() + "\n")
    print(table.format())
    return 0


def cmd_verify(args):
    instances = _instance_files(args.instances)
    net = mlp.load_network(args.model)
    milp = _milp_config(args)
    reports, ok = [], True
    for iid, inst in instances:
        if args.suite == "thm1":
            r = H.verify_theorem1(inst, net, args.lam, iid, milp=milp)
            reports.append(r.to_dict())
            ok &= r.holds
        elif args.suite == "lemma1":
            r = H.verify_lemma1(inst, net, args.lam, iid, milp=milp)
            reports.append(r.to_dict())
            ok &= r.holds
        else:
            probes = H.verify_observation1(inst, net, args.probes, args.seed, milp=milp)
            reports.append({"instance_id": iid, "probes": [vars(p) for p in probes],
                            "holds": all(p.holds for p in probes)})
            ok &= reports[-1]["holds"]
    _dump({"suite": args.suite, "holds": bool(ok), "reports": reports}, args.out)
    print(f"{args.suite}: {'pass' if ok else 'FAIL'} on {len(reports)} instances")
    return 0 if ok else 1


def cmd_oracle(args):
    inst = P.load_instance(args.instance)
    x = [float(t) for t in args.x.split(",")]
    fs = oracle.solve_follower(inst, x)
    _dump({"y": _floats(fs.y), "y0": float(fs.y0), "value": fs.value}, args.out)
    return 0


def cmd_bruteforce(args):
    sol = oracle.solve_bruteforce(P.load_instance(args.instance), cap=args.cap)
    _dump(_solution_dict(sol, args.reproducible), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bilevelnn", description=__doc__)
    ap.add_argument("--reproducible", action="store_true", help="write zeros for wall-clock fields")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def milp_opts(p):
        p.add_argument("--node-limit", type=int, default=None)
        p.add_argument("--time-limit", type=float, default=None)

    p = sub.add_parser("gen-instances", help="write random instances as JSON")
    p.add_argument("--kind", choices=["kip", "cnp", "drp"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_instances)

    p = sub.add_parser("collect", help="sample and label training data")
    p.add_argument("--kind", choices=["kip", "cnp", "drp"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--decisions", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--greedy-features", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="fit a value network")
    p.add_argument("--data", required=True)
    p.add_argument("--target", choices=["upper", "lower"], default="lower")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="solve one instance with a surrogate and repair")
    p.add_argument("--instance", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--approx", choices=["upper", "lower", "gvfa"], default="lower")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--slack", choices=["slack", "none", "dampened"], default="slack")
    p.add_argument("--dampening", type=float, default=None)
    p.add_argument("--out", default="-")
    milp_opts(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="compare methods on a directory of instances")
    p.add_argument("--instances", required=True)
    p.add_argument("--methods", default="NN_l,GVFA,bruteforce")
    p.add_argument("--model-lower", default=None)
    p.add_argument("--model-upper", default=None)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--summary", default=None)
    p.add_argument("--out", required=True)
    milp_opts(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="check the slack-penalty guarantees by enumeration")
    p.add_argument("--suite", choices=["thm1", "lemma1", "obs1"], required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--lam", type=float, default=2.0)
    p.add_argument("--probes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    milp_opts(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="solve the follower for a fixed leader decision")
    p.add_argument("--instance", required=True)
    p.add_argument("--x", required=True, help="comma-separated leader decision")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bruteforce", help="exact solution by enumerating leader decisions")
    p.add_argument("--instance", required=True)
    p.add_argument("--cap", type=int, default=200_000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bruteforce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, oracle.OracleError, mlp.TrainingError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
