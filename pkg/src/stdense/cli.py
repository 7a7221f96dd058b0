"""Command line entry point: ``stdense <verb> ...``.

On failure the last line written to stderr is a JSON object
``{"error": <exception type>, "message": <text>}`` and the exit code is 1.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .estimator import TrainConfig, fit, predict_truncated, residual_sigma, size_architecture, weighted_objective
from .metrics import harmonic_mean, population_l2_error, relative_error
from .net import forward_batch, load_checkpoint, save_checkpoint
from .ozone import load_ozone
from .panel import load_panel, save_panel
from .scenarios import scenario_fn
from .synth import NoiseScales, generate_panel


def _out_default(name):
    return str(Path(os.environ.get(bench.OUTPUT_ENV, ".")) / name)


def cmd_generate(args):
    panel = generate_panel(
        args.scenario, args.d, args.n, args.m_mult,
        NoiseScales(args.noise_spatial, args.noise_measurement),
        seed=args.seed, phi=args.phi, d_star=args.d_star,
    )
    out = args.out or _out_default(f"panel_s{args.scenario}_d{args.d}_n{args.n}.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_panel(panel, out)
    print(out)


def cmd_fit(args):
    panel = load_panel(args.panel)
    hm = harmonic_mean(panel.group_sizes)
    K = args.K or panel.d
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, lr_decay=args.lr_decay,
        decay_every=args.decay_every, momentum=args.momentum, patience=args.patience, seed=args.seed,
    )
    sig_e = args.sigma_eps if args.sigma_eps is not None else 1.0
    sig_g = args.sigma_gamma if args.sigma_gamma is not None else 0.0
    arch = size_architecture(panel.n, hm, args.p, K, args.case, args.c_L, args.c_r, args.c_A, sig_e, sig_g)
    net, trace = fit(panel, arch, cfg)
    if args.sigma_eps is None and args.sigma_gamma is None:
        sigma = residual_sigma(net, panel)
        arch = size_architecture(panel.n, hm, args.p, K, args.case, args.c_L, args.c_r, args.c_A, sigma, 0.0)
    out = args.out or _out_default("net.json")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(net, out, {"arch": arch.to_dict(), "train": cfg.to_dict()})
    if args.trace:
        trace.to_csv(args.trace)
    print(json.dumps({"checkpoint": out, "L": arch.L, "r": arch.r, "A": arch.A, "objective": trace.rows[-1].objective}))


def cmd_eval(args):
    net, meta = load_checkpoint(args.checkpoint)
    panel = load_panel(args.panel)
    A = args.A if args.A is not None else meta.get("arch", {}).get("A")
    pred = predict_truncated(net, A, panel.x) if A else forward_batch(net, panel.x)
    reference = panel.f_true if panel.f_true is not None else panel.y
    out = {
        "relative_error": relative_error(pred, reference, panel.group_sizes),
        "reference": "f_true" if panel.f_true is not None else "y",
        "objective": weighted_objective(net, panel),
        "truncation": A,
    }
    if args.scenario is not None:
        f = scenario_fn(args.scenario)
        pred_fn = (lambda X: predict_truncated(net, A, X)) if A else net
        est, se = population_l2_error(pred_fn, f, panel.d, args.mc_samples, args.seed)
        out["population_l2"] = est
        out["population_l2_se"] = se
    print(json.dumps(out))


def cmd_bench(args):
    if args.config:
        cfg = bench.load_config(args.config, args.set)
    else:
        cfg = bench.ExperimentConfig(**bench.parse_config_lines(args.set))
    result = bench.run_experiment(cfg)
    print(bench.summarize([result]))
    print(bench.result_path(cfg))
    if result.partial:
        print(f"warning: {result.failed} of {len(result.replications)} replications failed", file=sys.stderr)


def cmd_ingest(args):
    panel, scaling = load_ozone(args.csv, include_state=not args.no_state)
    out = args.out or _out_default(Path(args.csv).stem + "_panel.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_panel(panel, out)
    scaling.save(str(out) + ".scaling.json")
    print(json.dumps({"panel": out, "n": panel.n, "observations": panel.size, "d": panel.d}))


def cmd_summarize(args):
    results = [bench.ExperimentResult.load(p) for p in args.results]
    print(bench.summarize(results))


def cmd_plotdata(args):
    res = bench.ExperimentResult.load(args.result)
    out = args.out or str(Path(args.result).with_suffix(".plot.csv"))
    bench.emit_plot_data(res, out)
    print(out)


def build_parser():
    p = argparse.ArgumentParser(prog="stdense", description="Dense ReLU network regression for temporal-spatial panels")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="simulate a panel and write it to a file")
    g.add_argument("--scenario", type=int, default=2)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--m-mult", type=int, default=1)
    g.add_argument("--noise-spatial", type=float, default=1.0)
    g.add_argument("--noise-measurement", type=float, default=1.0)
    g.add_argument("--phi", type=float, default=0.1)
    g.add_argument("--d-star", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="train a network on a panel file and write a checkpoint")
    f.add_argument("--panel", required=True)
    f.add_argument("--out")
    f.add_argument("--trace", help="append the per-epoch objective to this CSV")
    f.add_argument("--case", choices=["wide", "deep"], default="wide")
    f.add_argument("--p", type=float, default=2.0)
    f.add_argument("--K", type=int, default=None)
    f.add_argument("--c-L", dest="c_L", type=float, default=1.0)
    f.add_argument("--c-r", dest="c_r", type=float, default=1.0)
    f.add_argument("--c-A", dest="c_A", type=float, default=1.0)
    f.add_argument("--sigma-eps", type=float, default=None)
    f.add_argument("--sigma-gamma", type=float, default=None)
    defaults = TrainConfig()
    for name in ("epochs", "batch_size", "decay_every", "patience", "seed"):
        f.add_argument("--" + name.replace("_", "-"), type=int, default=getattr(defaults, name))
    for name in ("lr", "lr_decay", "momentum"):
        f.add_argument("--" + name.replace("_", "-"), type=float, default=getattr(defaults, name))
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="relative error of a checkpoint on a panel")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--panel", required=True)
    e.add_argument("--A", type=float, default=None, help="truncation level (default: from checkpoint)")
    e.add_argument("--scenario", type=int, default=None, help="also estimate the population L2 error")
    e.add_argument("--mc-samples", type=int, default=100_000)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="run a Monte Carlo experiment")
    b.add_argument("--config", help="key = value config file")
    b.add_argument("--set", nargs="*", default=[], metavar="KEY=VALUE", help="override config keys")
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("ingest-ozone", help="convert an ozone CSV into a panel file")
    i.add_argument("--csv", required=True)
    i.add_argument("--out")
    i.add_argument("--no-state", action="store_true", help="omit the one-hot state code features")
    i.set_defaults(func=cmd_ingest)

    s = sub.add_parser("summarize", help="mean (std) table over result files")
    s.add_argument("results", nargs="+")
    s.set_defaults(func=cmd_summarize)

    pd_ = sub.add_parser("plotdata", help="long-format CSV of per-replication errors")
    pd_.add_argument("result")
    pd_.add_argument("--out")
    pd_.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", invalid="ignore")
    try:
        args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
