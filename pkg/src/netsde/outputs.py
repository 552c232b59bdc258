"""CSV and provenance writers shared by the command line and the experiment protocols."""
from __future__ import annotations

import csv
import json
import os
import platform
import sys
from types import SimpleNamespace

import numpy as np

from . import __version__


def write_influence(path, curves) -> None:
    se = curves.se if curves.se is not None else np.full_like(curves.mu, np.nan)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mu", "se"])
        for t, m, s in zip(curves.times, curves.mu, se):
            w.writerow([repr(float(t)), repr(float(m)), "" if not np.isfinite(s) else repr(float(s))])


def write_marginals(path, curves) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "node", "prob"])
        for t, row in zip(curves.times, curves.marginals):
            tt = repr(float(t))
            for i, p in enumerate(row):
                w.writerow([tt, i, repr(float(p))])


def read_marginals(path) -> SimpleNamespace:
    """Curves (times, mu, marginals) from a tidy marginals CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"t", "node", "prob"}:
        raise ValueError(f"{path}: expected columns t,node,prob")
    t = np.array([float(r["t"]) for r in rows])
    node = np.array([int(r["node"]) for r in rows])
    prob = np.array([float(r["prob"]) for r in rows])
    times, ti = np.unique(t, return_inverse=True)
    marg = np.zeros((times.size, node.max() + 1))
    marg[ti, node] = prob
    return SimpleNamespace(times=times, mu=marg.sum(axis=1), marginals=marg)


def write_errors(path, reports: dict) -> None:
    """``reports`` maps method label -> ErrorReport."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "method", "rel_influence_err", "rel_marginal_err"])
        for method, rep in reports.items():
            for t, a, b in zip(rep.times, rep.rel_influence, rep.rel_marginal):
                w.writerow([repr(float(t)), method, repr(float(a)), repr(float(b))])


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_provenance(path, config: dict, **extra) -> None:
    doc = {
        "package": "netsde",
        "version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "argv": sys.argv[1:],
        "config": _jsonable(config),
    }
    doc.update(_jsonable(extra))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
