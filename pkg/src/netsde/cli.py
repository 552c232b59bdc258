"""Command-line front end: ``netsde generate | predict | compare | experiment``.

Exit codes: 0 success, 2 usage error, 3 incompatible configuration, 4 I/O error.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .baselines import StepTooLargeError
from .experiments import METHODS, Curves, IncompatibleConfigError, error_curves, predict
from .network import (GeneratorConfig, NetworkError, generate, random_sources, read_rate_columns,
                      read_sources, write_network)
from .outputs import (ensure_dir, read_marginals, write_errors, write_influence, write_marginals,
                      write_provenance)
from .plotting import save_chart
from .protocols import EXPERIMENTS, run_experiment
from .ratemodel import NetworkRates, UnsupportedHazardError

EXIT_USAGE, EXIT_INCOMPATIBLE, EXIT_IO = 2, 3, 4


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _add_generator_args(p, required: bool):
    p.add_argument("--family", required=required, help="er | sw | sf (or their long names)")
    p.add_argument("--n", type=int, required=required, help="number of nodes")
    p.add_argument("--kappa", type=int, default=None, help="density parameter")
    p.add_argument("--p", type=float, default=0.2, help="small-world shortcut probability")
    p.add_argument("--rates", type=float, nargs=2, default=(0.1, 1.0), metavar=("LO", "HI"),
                   help="uniform range of activation rates")
    p.add_argument("--recovery-rates", type=float, nargs=2, default=None, metavar=("LO", "HI"),
                   help="uniform range of recovery rates (default: no recovery)")
    p.add_argument("--net-seed", type=int, default=None, help="generator seed (default: --seed)")


def _add_run_args(p):
    g = p.add_argument_group("network")
    g.add_argument("--network", help="edge-list file (alternative to --family/--n)")
    _add_generator_args(g, required=False)
    s = p.add_argument_group("sources")
    s.add_argument("--sources", help="file with one source node per line")
    s.add_argument("--n-sources", type=int, default=2, help="random source-set size")
    s.add_argument("--source-seed", type=int, default=None, help="seed for the random source set")
    r = p.add_argument_group("run")
    r.add_argument("--T", type=float, default=5.0, help="time horizon")
    r.add_argument("--h", type=float, default=0.01, help="grid step")
    r.add_argument("--L", type=int, default=1000, help="trajectories (cascades for mc-oracle)")
    r.add_argument("--rate-model", choices=("auto", "constant", "weibull", "throttled"), default="auto",
                   help="auto uses the rate columns of the network file")
    r.add_argument("--shape", type=float, default=2.0, help="Weibull shape for --rate-model weibull")
    r.add_argument("--cap", type=float, default=None, help="per-node cap for --rate-model throttled")
    r.add_argument("--recovery", choices=("on", "off"), default="on", help="keep or drop recovery rates")
    r.add_argument("--no-vr", action="store_true", help="disable antithetic pairing")
    r.add_argument("--seed", type=int, default=0, help="master seed")
    r.add_argument("--ode-step", type=float, default=None, help="mean-field RK4 step (default T/2000)")
    r.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--plot", action="store_true", help="also write plot.svg")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netsde", description="Influence prediction with jump-SDE solvers.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic network")
    _add_generator_args(g, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--shape", type=float, default=None, help="write a Weibull shape column")
    g.add_argument("--cap", type=float, default=None, help="write a per-node cap column")
    g.add_argument("--out", required=True, help="edge-list file to write")

    p = sub.add_parser("predict", help="estimate influence and node marginals")
    p.add_argument("--method", choices=METHODS, default="sde-euler")
    _add_run_args(p)

    c = sub.add_parser("compare", help="error curves of several methods against a truth")
    c.add_argument("--methods", default="sde-euler,meanfield,mc-oracle",
                   help="comma-separated methods; mc-oracle (if listed) is the truth")
    c.add_argument("--truth", default=None, help="marginals.csv to use as the truth")
    c.add_argument("--truth-L", type=int, default=10_000, help="cascades for the mc-oracle truth")
    _add_run_args(c)

    e = sub.add_parser("experiment", help="run a named synthetic experiment")
    e.add_argument("name", choices=EXPERIMENTS)
    e.add_argument("--out", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--quick", action="store_true", help="reduced sizes for a fast smoke run")
    e.add_argument("--threads", type=int, default=1)
    return ap


def _generator_config(a, seed) -> GeneratorConfig:
    kw = {}
    if a.kappa is not None:
        kw["kappa"] = a.kappa
    elif GeneratorConfig(a.family, a.n).family == "scale-free":
        kw["kappa"] = 2
    return GeneratorConfig(a.family, a.n, p=a.p, rates=tuple(a.rates),
                           recovery=tuple(a.recovery_rates) if a.recovery_rates else None, seed=seed, **kw)


def _load(a):
    """Network, rate model, sources and a config record for provenance."""
    cfg = {}
    if a.network:
        if a.family or a.n:
            raise UsageError("give either --network or --family/--n, not both")
        try:
            net, shape, cap = read_rate_columns(a.network)
        except OSError as exc:
            raise InputError(str(exc)) from None
        except NetworkError as exc:
            raise InputError(str(exc)) from None
        cfg["network"] = os.path.abspath(a.network)
    elif a.family and a.n:
        gseed = a.seed if a.net_seed is None else a.net_seed
        net = generate(_generator_config(a, gseed))
        shape, cap = np.ones(net.m), np.full(net.n, np.inf)
        cfg["generator"] = dict(family=a.family, n=a.n, kappa=a.kappa, p=a.p, rates=a.rates,
                                recovery_rates=a.recovery_rates, seed=gseed)
    else:
        raise UsageError("a network is required: --network FILE or --family F --n N")
    if a.recovery == "off":
        net = net.with_recovery(np.zeros(net.n))
    if a.rate_model == "constant":
        rates = NetworkRates.constant(net)
    elif a.rate_model == "weibull":
        rates = NetworkRates.weibull(net, a.shape)
    elif a.rate_model == "throttled":
        if a.cap is None:
            raise UsageError("--rate-model throttled needs --cap")
        rates = NetworkRates.throttled(net, a.cap)
    else:
        rates = NetworkRates(net, shape, cap)
    if a.sources:
        try:
            src = read_sources(a.sources)
        except OSError as exc:
            raise InputError(str(exc)) from None
        except NetworkError as exc:
            raise InputError(str(exc)) from None
        cfg["sources_file"] = os.path.abspath(a.sources)
    else:
        sseed = a.seed if a.source_seed is None else a.source_seed
        src = random_sources(net.n, a.n_sources, seed=sseed)
        cfg["source_seed"] = sseed
    cfg.update(sources=src, T=a.T, h=a.h, L=a.L, rate_model=a.rate_model, shape=a.shape, cap=a.cap,
               recovery=a.recovery, vr=not a.no_vr, seed=a.seed, network_fingerprint=net.fingerprint())
    return net, rates, src, cfg


def _run(method, net, rates, src, a, L=None) -> Curves:
    return predict(method, net, src, a.T, a.h, a.L if L is None else L, seed=a.seed,
                   rates=None if rates.is_constant else rates, antithetic=not a.no_vr,
                   workers=a.threads, ode_step=a.ode_step)


def cmd_generate(a) -> int:
    net = generate(_generator_config(a, a.seed))
    shape = None if a.shape is None else np.full(net.m, a.shape)
    cap = None if a.cap is None else np.full(net.n, a.cap)
    if shape is not None or cap is not None:
        NetworkRates(net, np.ones(net.m) if shape is None else shape,
                     np.full(net.n, np.inf) if cap is None else cap)
    try:
        write_network(net, a.out, shape=shape, cap=cap)
    except OSError as exc:
        raise InputError(str(exc)) from None
    write_provenance(a.out + ".json", dict(command="generate", family=a.family, n=a.n, kappa=a.kappa, p=a.p,
                                           rates=a.rates, recovery_rates=a.recovery_rates, seed=a.seed,
                                           shape=a.shape, cap=a.cap),
                     network_fingerprint=net.fingerprint(), m=net.m)
    print(f"wrote {a.out}: n={net.n} m={net.m}")
    return 0


def cmd_predict(a) -> int:
    net, rates, src, cfg = _load(a)
    curves = _run(a.method, net, rates, src, a)
    out = ensure_dir(a.out)
    write_influence(os.path.join(out, "influence.csv"), curves)
    write_marginals(os.path.join(out, "marginals.csv"), curves)
    if a.plot:
        save_chart(os.path.join(out, "plot.svg"), {a.method: (curves.times, curves.mu)},
                   title="influence", ylabel="expected active nodes")
    write_provenance(os.path.join(out, "provenance.json"), dict(command="predict", method=a.method, **cfg),
                     resolved_seed=curves.seed, runtime=curves.runtime)
    print(f"{a.method}: mu(T)={curves.mu[-1]:.4f} runtime={curves.runtime:.2f}s -> {out}")
    return 0


def cmd_compare(a) -> int:
    methods = [m.strip() for m in a.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown method(s): {', '.join(bad)}")
    net, rates, src, cfg = _load(a)
    if a.truth:
        try:
            truth = read_marginals(a.truth)
        except OSError as exc:
            raise InputError(str(exc)) from None
        except ValueError as exc:
            raise InputError(str(exc)) from None
        truth_label = "truth-file"
    elif "mc-oracle" in methods:
        truth = _run("mc-oracle", net, rates, src, a, L=a.truth_L)
        truth_label = "mc-oracle"
    else:
        raise UsageError("no truth available: list mc-oracle in --methods or pass --truth")
    out = ensure_dir(a.out)
    curves = {}
    for m in methods:
        curves[m] = truth if (m == "mc-oracle" and truth_label == "mc-oracle") else _run(m, net, rates, src, a)
        write_influence(os.path.join(out, f"influence_{m}.csv"), curves[m])
    reports = {m: error_curves(c, truth) for m, c in curves.items()}
    write_errors(os.path.join(out, "errors.csv"), reports)
    series = {m: (r.times, r.rel_influence) for m, r in reports.items() if m != truth_label}
    save_chart(os.path.join(out, "plot.svg"), series or {m: (r.times, r.rel_influence) for m, r in reports.items()},
               title="relative influence error", ylabel="|mu_hat - mu| / mu")
    write_provenance(os.path.join(out, "provenance.json"),
                     dict(command="compare", methods=methods, truth=a.truth or truth_label, truth_L=a.truth_L, **cfg))
    for m, r in reports.items():
        print(f"{m:18s} terminal rel err {r.terminal_rel:.4f}  max abs err {r.max_abs:.4f}")
    return 0


def cmd_experiment(a) -> int:
    lines = run_experiment(a.name, a.out, seed=a.seed, quick=a.quick, workers=a.threads)
    print("\n".join(lines))
    return 0


_COMMANDS = {"generate": cmd_generate, "predict": cmd_predict, "compare": cmd_compare,
             "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[a.command](a)
    except (IncompatibleConfigError, UnsupportedHazardError) as exc:
        print(f"netsde: incompatible configuration: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except InputError as exc:
        print(f"netsde: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"netsde: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, NetworkError, StepTooLargeError, ValueError) as exc:
        print(f"netsde: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
