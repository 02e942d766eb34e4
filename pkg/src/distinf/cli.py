"""``distinf`` command line.

Every subcommand prints JSON on stdout (or writes it with ``--out``) and
exits 0; invalid arguments or inputs exit 2 with a one-line message on
stderr. ``distinf <command> --help`` lists the flags.

Model pools on disk are directories holding ``model_<i>.json`` files (the
:mod:`distinf.nets` format) and a ``pool.json`` manifest::

    {"format": "distinf-pool/1",
     "models": [{"file": "model_0000.json", "alpha": 0.5, "seed": 123, "role": "adversary"}, ...]}
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import harness, leakage, nets, oracle
from . import synthdata as sd
from .attacks import blackbox, layers, meta
from .attacks.pool import ShadowPool
from .errors import DistinfError, MalformedDocument

POOL_FORMAT = "distinf-pool/1"


def _dump(doc, out=None):
    text = json.dumps(harness._encode(doc), indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _zipf_arg(text):
    try:
        n0, s0, n1, s1 = text.split(",")
        return leakage.ZipfSpec(int(n0), float(s0)), leakage.ZipfSpec(int(n1), float(s1))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected N0,S0,N1,S1, got {text!r}") from exc


def _underlying(args):
    if getattr(args, "config", None):
        return harness.load_config(args.config)
    return harness.ExperimentConfig(
        underlying=sd.UnderlyingSpec(
            noise_dims=args.noise_dims, signal_dims=args.signal_dims,
            signal_strength=args.signal_strength, label_property_coupling=args.coupling,
        ),
        alpha_grid=(args.alpha,), dataset_size=args.m,
    )


# --- formula commands ---------------------------------------------------------


def cmd_nleaked(args):
    out = {}
    if args.zipf:
        s0, s1 = args.zipf
        out["n_leaked_degree"] = leakage.n_leaked_degree(s0, s1, args.omega)
    elif args.mse is not None:
        out["n_leaked_regression"] = leakage.n_leaked_regression(args.alpha, args.mse)
    else:
        out["n_leaked_binary"] = leakage.n_leaked_binary((args.alpha0, args.alpha1), args.omega)
        out["advantage"] = 2 * args.omega - 1
    _dump(out)


def cmd_bound(args):
    if args.zipf:
        s0, s1 = args.zipf
        _dump({"zipf_accuracy_bound": leakage.zipf_accuracy_bound(s0, s1, args.n)})
        return
    pair = (args.alpha0, args.alpha1)
    kl = leakage.kl_bounds_binary(pair)
    _dump({"binary_accuracy_bound": leakage.binary_accuracy_bound(pair, args.n), "kl_bounds": list(kl)})


def cmd_oracle(args):
    if args.kind == "binary":
        acc = oracle.exact_optimal_accuracy((args.alpha0, args.alpha1), args.n)
        _dump({"exact_optimal_accuracy": acc, "bound": leakage.binary_accuracy_bound((args.alpha0, args.alpha1), args.n)})
    elif args.kind == "regress":
        mse = oracle.exact_regression_mse(args.alpha, args.n)
        _dump({"exact_regression_mse": mse, "closed_form": args.alpha * (1 - args.alpha) / args.n})
    else:
        if not args.zipf:
            raise DistinfError("oracle zipf needs --zipf N0,S0,N1,S1")
        s0, s1 = args.zipf
        est = oracle.mc_optimal_accuracy_zipf(s0, s1, args.n, args.trials, args.seed, args.workers)
        _dump({**dataclasses.asdict(est), "bound": leakage.zipf_accuracy_bound(s0, s1, args.n)})


# --- data and models ------------------------------------------------------------


def cmd_gen(args):
    cfg = _underlying(args)
    spec = sd.RatioDistributionSpec(cfg.underlying, args.alpha)
    d = sd.sample_dataset(spec, args.m, args.seed, sd.Pool[args.pool.upper()], sd.Mode(args.mode))
    sd.save(d, args.out)
    _dump({"path": args.out, "records": len(d), "empirical_ratio": sd.empirical_ratio(d), "seed": args.seed})


def save_pool(models, meta_rows, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for i, (net, row) in enumerate(zip(models, meta_rows)):
        name = f"model_{i:04d}.json"
        nets.save(net, os.path.join(out_dir, name))
        rows.append({"file": name, **row})
    with open(os.path.join(out_dir, "pool.json"), "w") as fh:
        json.dump({"format": POOL_FORMAT, "models": rows}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_pool(path):
    """Models and their manifest rows from a pool directory."""
    try:
        with open(os.path.join(path, "pool.json")) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedDocument(f"{path}: cannot read pool manifest ({exc})") from exc
    if doc.get("format") != POOL_FORMAT:
        raise MalformedDocument(f"{path}: not a {POOL_FORMAT} directory")
    rows = doc["models"]
    return [nets.load(os.path.join(path, r["file"])) for r in rows], rows


def cmd_train_pool(args):
    cfg = _underlying(args)
    changes = {"alpha_grid": tuple(sorted(set(cfg.alpha_grid) | {args.alpha})), "master_seed": args.seed}
    if not args.config:
        changes["train_cfg"] = nets.TrainConfig(epochs=args.epochs, learning_rate=args.lr)
    if args.count is not None:
        changes["n_victim"] = changes["n_shadow"] = args.count
    cfg = dataclasses.replace(cfg, **changes)
    built = harness.build_pools(cfg, args.alpha, args.role, args.rep)
    save_pool([m for m, _ in built], [row for _, row in built], args.out)
    _dump({"path": args.out, "models": len(built), "alpha": args.alpha, "role": args.role})


# --- attacks --------------------------------------------------------------------


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) in (None, [])]
    if missing:
        raise DistinfError(f"attack --mode {args.mode} needs {' '.join(missing)}")


def _finish(args, preds, truths, flags=(), mse=None):
    acc = oracle.mc_attack_accuracy(preds, truths)
    a0, a1 = args.alpha0, args.alpha1
    n_leaked = None
    flags = list(flags)
    if a0 is not None and a1 is not None and a0 != a1:
        if acc.accuracy < 0.5:
            flags.append("below_chance")
            n_leaked = 0.0
        else:
            n_leaked = leakage.n_leaked_binary((a0, a1), acc.accuracy)
    report = leakage.LeakageReport(
        accuracy=acc.accuracy, advantage=acc.advantage, n_leaked=n_leaked, alpha0=a0, alpha1=a1,
        attack=args.mode, n_eval=len(preds), mse=mse, flags=flags, seed=args.seed,
    )
    _dump(report.to_dict(), args.out)


def cmd_attack(args):
    mode = args.mode
    if mode == "layer-rank":
        _need(args, "shadow0", "shadow1", "holdout0", "holdout1", "candidates")
        pool = ShadowPool.binary(load_pool(args.shadow0)[0], load_pool(args.shadow1)[0])
        hold = ShadowPool.binary(load_pool(args.holdout0)[0], load_pool(args.holdout1)[0])
        cands = sd.load(args.candidates).X
        ranking = layers.layer_rank(pool, cands, hold)
        _dump({"attack": mode, "ranking": [{"layer": j, "accuracy": a} for j, a in ranking]}, args.out)
        return

    _need(args, "victim0", "victim1")
    v0, v1 = load_pool(args.victim0)[0], load_pool(args.victim1)[0]
    victims = v0 + v1
    truths = [0] * len(v0) + [1] * len(v1)

    if mode in ("loss", "threshold"):
        _need(args, "test0", "test1")
        s0, s1 = sd.load(args.test0), sd.load(args.test1)
        acc0 = [nets.accuracy(m, s0) for m in victims]
        acc1 = [nets.accuracy(m, s1) for m in victims]
        if mode == "loss":
            out = [blackbox.loss_test(a, b) for a, b in zip(acc0, acc1)]
            ties = sum(t for _, t in out)
            _finish(args, [b for b, _ in out], truths, [f"ties={ties}"] if ties else [])
            return
        _need(args, "shadow0", "shadow1")
        sh0, sh1 = load_pool(args.shadow0)[0], load_pool(args.shadow1)[0]
        sh = sh0 + sh1
        labels = [0] * len(sh0) + [1] * len(sh1)
        rule = blackbox.threshold_fit(labels, [nets.accuracy(m, s0) for m in sh], [nets.accuracy(m, s1) for m in sh])
        scores = acc1 if rule.chosen_set else acc0
        _finish(args, [blackbox.threshold_apply(rule, a) for a in scores], truths, ["threshold_tie"] if rule.tied else [])
        return

    mcfg = meta.MetaConfig(epochs=args.meta_epochs)
    if mode == "meta":
        _need(args, "shadow0", "shadow1")
        pool = ShadowPool.binary(load_pool(args.shadow0)[0], load_pool(args.shadow1)[0])
        clf = meta.meta_train(pool, mcfg, args.seed)
        _finish(args, (meta.meta_output(clf, victims) >= 0.5).astype(int), truths)
        return

    # meta-regress
    _need(args, "shadow", "alpha0", "alpha1")
    models, alphas = [], []
    for path in args.shadow:
        ms, rows = load_pool(path)
        models += ms
        alphas += [r["alpha"] for r in rows]
    clf = meta.meta_train(ShadowPool(models, [], alphas), dataclasses.replace(mcfg, mode=meta.MetaMode.REGRESSION), args.seed)
    pred = meta.meta_output(clf, victims)
    true_alpha = np.where(np.array(truths) == 1, args.alpha1, args.alpha0)
    mse = float(np.mean((pred - true_alpha) ** 2))
    _finish(args, [blackbox.regression_to_binary(p, args.alpha0, args.alpha1) for p in pred], truths, mse=mse)


# --- sweeps ---------------------------------------------------------------------


def cmd_sweep(args):
    cfg = harness.load_config(args.config)
    if args.workers is not None:
        cfg = dataclasses.replace(cfg, workers=args.workers)
    out_dir = args.out or cfg.output_dir
    result = harness.run_sweep(cfg)
    paths = harness.write_outputs(result, out_dir)
    sys.stderr.write(f"wrote {len(paths)} files to {out_dir}\n")


def cmd_report(args):
    # prefer the files the sweep wrote: recomputing from the rounded reports can move the last digit
    name = f"heatmap_{args.heatmap}.csv" if args.heatmap else "summary.json"
    stored = os.path.join(args.dir, name)
    if os.path.exists(stored):
        with open(stored) as fh:
            sys.stdout.write(fh.read())
        return
    result = harness.load_result(args.dir)
    if args.heatmap:
        sys.stdout.write(harness.emit_heatmap(result, args.heatmap))
    else:
        _dump(harness.summarize(result))


# --- parser ---------------------------------------------------------------------


def _data_flags(p):
    p.add_argument("--config", help="experiment config JSON (takes the underlying spec from it)")
    p.add_argument("--noise-dims", type=int, default=4)
    p.add_argument("--signal-dims", type=int, default=4)
    p.add_argument("--signal-strength", type=float, default=1.0)
    p.add_argument("--coupling", type=float, default=0.5)
    p.add_argument("--m", type=int, default=500, help="records per dataset")


def build_parser():
    ap = argparse.ArgumentParser(prog="distinf", description="Distribution inference leakage toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("nleaked", help="n_leaked from an observed accuracy or squared error")
    p.add_argument("--alpha0", type=float)
    p.add_argument("--alpha1", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--alpha", type=float, help="ratio for the regression form")
    p.add_argument("--mse", type=float, help="observed mean squared error (regression form)")
    p.add_argument("--zipf", type=_zipf_arg, metavar="N0,S0,N1,S1")
    p.set_defaults(func=cmd_nleaked)

    p = sub.add_parser("bound", help="accuracy upper bound from n samples")
    p.add_argument("--alpha0", type=float)
    p.add_argument("--alpha1", type=float)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--zipf", type=_zipf_arg, metavar="N0,S0,N1,S1")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("oracle", help="exact or Monte-Carlo optimal distinguishers")
    p.add_argument("kind", choices=["binary", "regress", "zipf"])
    p.add_argument("--alpha0", type=float)
    p.add_argument("--alpha1", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--zipf", type=_zipf_arg, metavar="N0,S0,N1,S1")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gen", help="sample a synthetic dataset (.csv or .npz)")
    _data_flags(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pool", choices=["victim", "adversary"], default="victim")
    p.add_argument("--mode", choices=[m.value for m in sd.Mode], default="iid")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train-pool", help="train a pool of models into a directory")
    _data_flags(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--role", choices=["victim", "adversary"], default="adversary")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_pool)

    p = sub.add_parser("attack", help="run one attack on pools stored on disk")
    p.add_argument("--mode", required=True, choices=["loss", "threshold", "meta", "meta-regress", "layer-rank"])
    p.add_argument("--alpha0", type=float)
    p.add_argument("--alpha1", type=float)
    p.add_argument("--victim0", help="pool dir of victims trained at alpha0")
    p.add_argument("--victim1", help="pool dir of victims trained at alpha1")
    p.add_argument("--shadow0")
    p.add_argument("--shadow1")
    p.add_argument("--shadow", nargs="+", help="pool dirs for meta-regress (alphas read from manifests)")
    p.add_argument("--test0", help="dataset file from G_alpha0")
    p.add_argument("--test1", help="dataset file from G_alpha1")
    p.add_argument("--holdout0")
    p.add_argument("--holdout1")
    p.add_argument("--candidates", help="dataset file whose features are the layer-rank query inputs")
    p.add_argument("--meta-epochs", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="run a full sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: the config's output_dir)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize or re-render a finished sweep")
    p.add_argument("--dir", required=True)
    p.add_argument("--heatmap", choices=harness.ATTACKS, help="print this attack's heatmap CSV instead")
    p.set_defaults(func=cmd_report)
    return ap


def _check_required(args):
    if args.command == "nleaked":
        if args.zipf:
            keys = ("omega",)
        elif args.mse is not None:
            keys = ("alpha",)
        else:
            keys = ("alpha0", "alpha1", "omega")
    elif args.command == "bound" and not args.zipf:
        keys = ("alpha0", "alpha1")
    elif args.command == "oracle":
        keys = {"binary": ("alpha0", "alpha1"), "regress": ("alpha",), "zipf": ()}[args.kind]
    else:
        return
    missing = [f"--{k}" for k in keys if getattr(args, k) is None]
    if missing:
        raise DistinfError(f"{args.command} needs {' '.join(missing)}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _check_required(args)
        args.func(args)
    except (DistinfError, ValueError, OSError) as exc:
        sys.stderr.write(f"distinf {args.command}: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
