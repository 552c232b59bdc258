"""Named synthetic experiments that write a self-contained report directory.

Each protocol writes CSV tables, SVG charts, a ``summary.txt`` and a
``provenance.json`` holding every setting needed to rerun it.
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass

import numpy as np

from .experiments import (FAMILY_DEFAULTS, Curves, SweepSpec, _replicate_seed, convergence_study,
                          error_curves, predict, robustness_sweep, vr_study)
from .network import GeneratorConfig, generate, random_sources, write_network, write_sources
from .outputs import ensure_dir, write_errors, write_influence, write_provenance, write_rows
from .plotting import save_chart
from .ratemodel import NetworkRates, thinning_marginals

EXPERIMENTS = ("basic-si", "basic-sis", "robustness", "rayleigh", "vr-study", "convergence")

FAMILIES = tuple(FAMILY_DEFAULTS)
RECOVERY = (0.0, 0.4)


@dataclass(frozen=True)
class Settings:
    n: int = 200
    T: float = 5.0
    h: float = 0.01
    L: int = 1000
    truth_runs: int = 10_000
    n_sources: int = 2
    repeats: int = 20
    source_sizes: tuple = (2, 5, 10, 15, 20)
    densities: tuple = (2, 3, 4, 5, 6)
    vr_Ls: tuple = (6, 10, 20, 40, 80, 100)
    vr_R: int = 100
    conv_n: int = 10
    conv_T: float = 2.0
    conv_hs: tuple = (0.4, 0.2, 0.1, 0.05)
    conv_L: int = 1_000_000
    shape: float = 2.0


QUICK = Settings(n=60, T=2.0, h=0.02, L=200, truth_runs=1000, repeats=2, source_sizes=(2, 5),
                 densities=(2, 3), vr_Ls=(10, 40), vr_R=30, conv_L=20_000)


def _net(family: str, s: Settings, seed: int, recovery=None, kappa=None):
    kw = dict(FAMILY_DEFAULTS[family])
    if kappa is not None:
        kw["kappa"] = kappa
    return generate(GeneratorConfig(family, s.n, recovery=recovery, seed=seed, **kw))


def _comparison(name: str, out: str, s: Settings, seed: int, workers: int, recovery, rayleigh: bool):
    lines = []
    for f, family in enumerate(FAMILIES):
        sub = ensure_dir(os.path.join(out, family))
        net = _net(family, s, _replicate_seed(seed, f, 0), recovery)
        src = random_sources(s.n, s.n_sources, seed=_replicate_seed(seed, f, 1))
        write_network(net, os.path.join(sub, "network.txt"), shape=np.full(net.m, s.shape) if rayleigh else None)
        write_sources(src, os.path.join(sub, "sources.txt"))
        tseed = _replicate_seed(seed, f, 2)
        if rayleigh:
            rates = NetworkRates.weibull(net, s.shape)
            grid = np.arange(round(s.T / s.h) + 1) * s.h
            em = thinning_marginals(net, rates, src, s.T, grid, runs=s.truth_runs, seed=tseed, workers=workers)
            truth = Curves("thinning-oracle", grid, em.mu, em.marginals, em.se, 0.0, tseed)
            methods = {"sde-euler": predict("sde-euler", net, src, s.T, s.h, s.L, seed=tseed + 1,
                                            rates=rates, workers=workers)}
        else:
            truth = predict("mc-oracle", net, src, s.T, s.h, s.truth_runs, seed=tseed, workers=workers)
            methods = {m: predict(m, net, src, s.T, s.h, s.L, seed=tseed + 1, workers=workers)
                       for m in ("sde-euler", "meanfield")}
        write_influence(os.path.join(sub, f"influence_{truth.method}.csv"), truth)
        reports = {}
        for m, c in methods.items():
            write_influence(os.path.join(sub, f"influence_{m}.csv"), c)
            reports[m] = error_curves(c, truth)
        write_errors(os.path.join(sub, "errors.csv"), reports)
        save_chart(os.path.join(sub, "influence.svg"),
                   {truth.method: (truth.times, truth.mu), **{m: (c.times, c.mu) for m, c in methods.items()}},
                   title=f"{name}: {family}", ylabel="influence")
        save_chart(os.path.join(sub, "rel_error.svg"),
                   {m: (r.times, r.rel_influence) for m, r in reports.items()},
                   title=f"{name}: {family}", ylabel="relative influence error")
        save_chart(os.path.join(sub, "rel_marginal_error.svg"),
                   {m: (r.times, r.rel_marginal) for m, r in reports.items()},
                   title=f"{name}: {family}", ylabel="relative marginal error")
        for m, r in reports.items():
            lines.append(f"{family:12s} {m:10s} terminal rel err {r.terminal_rel:.4f}  "
                         f"max abs err {r.max_abs:.4f}  runtime {r.runtime:.2f}s")
    return lines


def _robustness(out: str, s: Settings, seed: int, workers: int):
    rows, lines = [], []
    for rec_label, rec in (("si", None), ("sis", RECOVERY)):
        for variable, values in (("sources", s.source_sizes), ("density", s.densities)):
            series, bands = {}, {}
            for f, family in enumerate(FAMILIES):
                spec = SweepSpec(variable, values, repeats=s.repeats, n=s.n, T=s.T, h=s.h, L=s.L,
                                 truth_runs=s.truth_runs, n_sources=s.n_sources, recovery=rec,
                                 seed=_replicate_seed(seed, f, 3))
                for res in robustness_sweep(family, spec, ("sde-euler", "meanfield"), workers):
                    for i, v in enumerate(res.values):
                        for r, err in enumerate(res.raw[i]):
                            rows.append([rec_label, family, variable, int(v), res.method, r, repr(float(err))])
                    label = f"{family}/{res.method}"
                    series[label] = (res.values, res.mean)
                    if res.std is not None:
                        bands[label] = (res.mean - res.std, res.mean + res.std)
                    lines.append(f"{rec_label} {variable:8s} {label:24s} mean max-abs err "
                                 + " ".join(f"{m:.3f}" for m in res.mean))
            save_chart(os.path.join(out, f"{variable}_{rec_label}.svg"), series, bands=bands,
                       title=f"max abs error vs {variable} ({rec_label})", xlabel=variable, ylabel="max abs error")
    write_rows(os.path.join(out, "sweep.csv"),
               ["recovery", "family", "variable", "value", "method", "repeat", "max_abs_err"], rows)
    return lines


def _vr(out: str, s: Settings, seed: int, workers: int):
    net = _net("erdos-renyi", s, _replicate_seed(seed, 0, 0))
    src = random_sources(s.n, s.n_sources, seed=_replicate_seed(seed, 0, 1))
    write_network(net, os.path.join(out, "network.txt"))
    write_sources(src, os.path.join(out, "sources.txt"))
    truth = predict("mc-oracle", net, src, s.T, s.h, s.truth_runs, seed=_replicate_seed(seed, 0, 2),
                    workers=workers)
    res = vr_study(net, src, s.T, s.h, s.vr_Ls, s.vr_R, truth.mu[-1], seed=seed, workers=workers)
    rows, series, bands, lines = [], {}, {}, [f"truth u_T = {truth.mu[-1]:.4f} (se {truth.se[-1]:.4f})"]
    for a in res.arms:
        label = "antithetic" if a else "independent"
        lo, hi = res.ci[a]
        for L, m, l, u in zip(res.Ls, res.mse[a], lo, hi):
            rows.append([int(L), label, repr(float(m)), repr(float(l)), repr(float(u))])
        series[label] = (res.Ls, res.mse[a])
        bands[label] = (lo, hi)
        lines.append(f"{label:12s} MSE " + " ".join(f"L={L}:{m:.3f}" for L, m in zip(res.Ls, res.mse[a])))
    write_rows(os.path.join(out, "vr.csv"), ["L", "arm", "mse", "ci_lo", "ci_hi"], rows)
    save_chart(os.path.join(out, "vr.svg"), series, bands=bands, logx=True, logy=True,
               title="terminal influence MSE", xlabel="L", ylabel="MSE")
    return lines


def _convergence(out: str, s: Settings, seed: int, workers: int):
    net = generate(GeneratorConfig("erdos-renyi", s.conv_n, rates=(1.0, 3.0), seed=seed))
    src = np.array([int(np.argmax(net.out_degree))])
    write_network(net, os.path.join(out, "network.txt"))
    write_sources(src, os.path.join(out, "sources.txt"))
    res = convergence_study(net, src, s.conv_T, s.conv_hs, ("euler", "taylor2"), s.conv_L, seed=seed,
                            workers=workers)
    rows, series, lines = [], {}, [f"reference E g(X(T)) = {res.reference_mean:.5f}"]
    for st in res.steppers:
        for h, b, e in zip(res.hs, res.bias[st], res.se[st]):
            rows.append([st, repr(float(h)), repr(float(b)), repr(float(e))])
        series[st] = (res.hs, np.abs(res.bias[st]))
        slope = "inconclusive" if res.inconclusive[st] else f"{res.slopes[st]:.3f}"
        lines.append(f"{st:8s} slope {slope}  biases " + " ".join(f"{b:+.4f}" for b in res.bias[st]))
    write_rows(os.path.join(out, "convergence.csv"), ["stepper", "h", "bias", "se"], rows)
    save_chart(os.path.join(out, "convergence.svg"), series, logx=True, logy=True,
               title="terminal bias vs step", xlabel="h", ylabel="|bias|")
    return lines


def run_experiment(name: str, out: str, seed: int = 0, quick: bool = False, workers: int = 1,
                   settings: Settings | None = None) -> list[str]:
    """Run one named protocol into ``out``; returns the summary lines."""
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    s = settings or (QUICK if quick else Settings())
    ensure_dir(out)
    if name == "basic-si":
        lines = _comparison(name, out, s, seed, workers, None, False)
    elif name == "basic-sis":
        lines = _comparison(name, out, s, seed, workers, RECOVERY, False)
    elif name == "rayleigh":
        lines = []
        for label, rec in (("si", None), ("sis", RECOVERY)):
            sub = ensure_dir(os.path.join(out, label))
            lines += [f"[{label}] " + x for x in _comparison(name, sub, s, seed, workers, rec, True)]
    elif name == "robustness":
        lines = _robustness(out, s, seed, workers)
    elif name == "vr-study":
        lines = _vr(out, s, seed, workers)
    else:
        lines = _convergence(out, s, seed, workers)
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"experiment {name} seed={seed}\n")
        fh.write("\n".join(lines) + "\n")
    write_provenance(os.path.join(out, "provenance.json"),
                     {"experiment": name, "seed": seed, "quick": quick, "settings": asdict(s)})
    return lines


__all__ = ["EXPERIMENTS", "Settings", "QUICK", "run_experiment"]
