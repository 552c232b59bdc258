"""Error metrics, method dispatch and the synthetic experiment protocols."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselines import meanfield_solve, monte_carlo_marginals
from .network import GeneratorConfig, PropagationNetwork, generate, random_sources
from .ratemodel import NetworkRates, thinning_marginals, time_varying_marginals
from .sampling import SamplePlan, fit_power_law, run_estimator, terminal_bias

__all__ = [
    "METHODS",
    "IncompatibleConfigError",
    "Curves",
    "predict",
    "ErrorReport",
    "error_curves",
    "ConvergenceResult",
    "convergence_study",
    "VRResult",
    "vr_study",
    "SweepResult",
    "robustness_sweep",
    "FAMILY_DEFAULTS",
]

METHODS = ("sde-euler", "sde-taylor2", "sde-jump-adapted", "meanfield", "mc-oracle")

# generator settings of the n = 200 comparison networks
FAMILY_DEFAULTS = {"erdos-renyi": dict(kappa=1), "small-world": dict(kappa=1, p=0.2),
                   "scale-free": dict(kappa=2)}


class IncompatibleConfigError(ValueError):
    pass


@dataclass
class Curves:
    """Influence and node-marginal curves on a grid, as produced by any method."""

    method: str
    times: np.ndarray
    mu: np.ndarray
    marginals: np.ndarray
    se: np.ndarray | None = None
    runtime: float = 0.0
    seed: int | None = None


def _grid(T: float, h: float) -> np.ndarray:
    return SamplePlan(T, h, 2).grid


def predict(method: str, network: PropagationNetwork, sources, T: float, h: float = 0.01, L: int = 1000,
            seed=0, rates: NetworkRates | None = None, antithetic: bool = True, workers: int = 1,
            ode_step: float | None = None) -> Curves:
    """Run one method and return its curves on the grid ``0, h, ..., T``.

    For ``mc-oracle`` ``L`` is the number of exact cascades.  Non-constant
    rate models are simulated by the time-varying Euler scheme
    (``sde-euler``) or exactly by thinning (``sde-jump-adapted``).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    constant = rates is None or rates.is_constant
    if not constant and method in ("meanfield", "mc-oracle", "sde-taylor2"):
        raise IncompatibleConfigError(f"{method} requires constant activation rates")
    grid = _grid(T, h)
    t0 = time.perf_counter()
    if method == "meanfield":
        mf = meanfield_solve(network, sources, T, step=ode_step, grid=grid)
        return Curves(method, grid, mf.mu, mf.x, None, time.perf_counter() - t0)
    if method == "mc-oracle":
        em = monte_carlo_marginals(network, sources, T, grid, runs=L, seed=seed, workers=workers)
        return Curves(method, grid, em.mu, em.marginals, em.se, time.perf_counter() - t0, em.seed)
    if not constant:
        if method == "sde-euler":
            em = time_varying_marginals(network, rates, sources, SamplePlan(T, h, L, seed=seed), workers)
        else:
            em = thinning_marginals(network, rates, sources, T, grid, runs=L, seed=seed, workers=workers,
                                    window=h)
        return Curves(method, grid, em.mu, em.marginals, em.se, time.perf_counter() - t0, em.seed)
    plan = SamplePlan(T, h, L, seed=seed, stepper=method[4:], antithetic=antithetic)
    est = run_estimator(network, sources, plan, workers=workers)
    return Curves(method, est.times, est.mu, est.marginals, est.se, time.perf_counter() - t0, est.seed)


# ---------------------------------------------------------------------------
# error metrics

_TINY = 1e-12


@dataclass
class ErrorReport:
    times: np.ndarray
    rel_influence: np.ndarray  # |mu_hat - mu| / mu, nan where mu is ~0
    rel_marginal: np.ndarray  # sum_i |x_hat_i - x_i| / sum_i x_i
    abs_influence: np.ndarray
    runtime: float = 0.0
    fingerprint: str = ""

    @property
    def max_abs(self) -> float:
        return float(np.max(self.abs_influence))

    @property
    def terminal_rel(self) -> float:
        return float(self.rel_influence[-1])


def _on_grid(truth, times: np.ndarray):
    """Right-continuous evaluation of ``truth`` (times, mu, marginals) at ``times``."""
    tt = np.asarray(truth.times, float)
    if times.size == tt.size and np.allclose(times, tt, rtol=0, atol=1e-9):
        return np.asarray(truth.mu, float), np.asarray(truth.marginals, float)
    if times[-1] < tt[0] - 1e-9 or times[0] > tt[-1] + 1e-9:
        raise ValueError("estimate and truth grids do not overlap")
    k = np.searchsorted(tt, times + 1e-9, side="right") - 1
    if np.any(k < 0):
        raise ValueError("estimate grid starts before the truth grid")
    return np.asarray(truth.mu, float)[k], np.asarray(truth.marginals, float)[k]


def error_curves(estimate, truth, runtime: float | None = None, fingerprint: str = "") -> ErrorReport:
    """Pointwise errors of ``estimate`` against ``truth`` on the estimate's grid."""
    times = np.asarray(estimate.times, float)
    mu_t, marg_t = _on_grid(truth, times)
    mu_e = np.asarray(estimate.mu, float)
    abs_err = np.abs(mu_e - mu_t)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(np.abs(mu_t) > _TINY, abs_err / np.abs(mu_t), np.nan)
        den = np.abs(marg_t).sum(axis=1)
        num = np.abs(np.asarray(estimate.marginals, float) - marg_t).sum(axis=1)
        relm = np.where(den > _TINY, num / den, np.nan)
    if runtime is None:
        runtime = float(getattr(estimate, "runtime", 0.0))
    return ErrorReport(times, rel, relm, abs_err, runtime, fingerprint)


# ---------------------------------------------------------------------------
# weak-order study


@dataclass
class ConvergenceResult:
    hs: np.ndarray
    steppers: tuple
    bias: dict  # stepper -> signed bias per h
    se: dict
    slopes: dict  # stepper -> fitted slope (nan when inconclusive)
    inconclusive: dict
    reference: str
    reference_mean: float

    @property
    def slope(self) -> float:
        return self.slopes[self.steppers[0]]


def convergence_study(network: PropagationNetwork, sources, T: float, hs, steppers=("euler",),
                      L: int = 1_000_000, seed=0, reference: str = "jump-adapted", node=None,
                      workers: int = 1, z: float = 3.0) -> ConvergenceResult:
    """Terminal bias of grid steppers against an exact reference and its log-log slope.

    With the ``jump-adapted`` reference every stepper runs on the same sampled
    schedules as the exact replay, so the biases are paired differences.  The
    ``gillespie`` reference uses ``L`` independent exact cascades instead.
    Points within ``z`` standard errors of zero are dropped; fewer than three
    usable points flags the fit inconclusive.
    """
    if isinstance(steppers, str):
        steppers = (steppers,)
    steppers = tuple(steppers)
    hs = np.asarray(hs, float)
    if hs.size < 3:
        raise ValueError("need at least three step sizes")
    S = len(steppers)
    all_h = np.tile(hs, S)
    all_s = [s for s in steppers for _ in hs]
    if reference == "jump-adapted":
        bias, se, ref_mean, _ = terminal_bias(network, sources, T, all_h, all_s, L, seed, node,
                                              workers=workers)
    elif reference == "gillespie":
        em = monte_carlo_marginals(network, sources, T, [T], runs=L, seed=seed, workers=workers)
        if node is None:
            ref_mean, ref_se = float(em.mu[0]), float(em.se[0])
        else:
            ref_mean, ref_se = float(em.marginals[0, node]), float(em.marginal_se[0, node])
        bias = np.empty(all_h.size)
        se = np.empty(all_h.size)
        for c, (h, s) in enumerate(zip(all_h, all_s)):
            est = run_estimator(network, sources, SamplePlan(T, h, L, seed=seed, stepper=s), workers=workers)
            if node is None:
                m, s_e = est.u_T, float(est.se[-1])
            else:
                m = float(est.marginals[-1, node])
                s_e = float(np.sqrt(m * (1 - m) / L))
            bias[c] = m - ref_mean
            se[c] = np.hypot(s_e, ref_se)
    else:
        raise ValueError("reference must be 'jump-adapted' or 'gillespie'")
    out_b, out_s, slopes, flags = {}, {}, {}, {}
    for k, s in enumerate(steppers):
        b = bias[k * hs.size:(k + 1) * hs.size]
        e = se[k * hs.size:(k + 1) * hs.size]
        fit = fit_power_law(hs, b, e, z)
        bad = fit.inconclusive or fit.used.sum() < 3
        out_b[s], out_s[s] = b, e
        slopes[s] = float("nan") if bad else fit.slope
        flags[s] = bool(bad)
    return ConvergenceResult(hs, steppers, out_b, out_s, slopes, flags, reference, float(ref_mean))


# ---------------------------------------------------------------------------
# variance reduction


@dataclass
class VRResult:
    Ls: np.ndarray
    arms: tuple  # antithetic flag of each arm
    mse: dict  # arm -> MSE per L
    ci: dict  # arm -> (lo, hi) arrays, normal 95% intervals
    errors: dict  # arm -> (len(Ls), R) signed errors
    truth: float
    R: int


def _replicate_seed(seed: int, r: int, L: int) -> int:
    return int(np.random.SeedSequence([seed, r, L]).generate_state(1, np.uint64)[0] >> 1)


def vr_study(network: PropagationNetwork, sources, T: float, h: float, Ls, R: int, truth: float,
             seed: int = 0, stepper: str = "euler", arms=(True, False), workers: int = 1) -> VRResult:
    """MSE of the terminal influence estimate over ``R`` macro-replicates per L.

    Replicate ``r`` at a given L uses the same seed in every arm, so an arm
    differs from another only by its pairing flag.
    """
    Ls = np.asarray(Ls, int)
    if np.any(Ls < 2) or np.any(Ls % 2):
        raise ValueError("every L must be even")
    if R < 2:
        raise ValueError("need at least two macro-replicates")
    arms = tuple(bool(a) for a in arms)
    errs = {a: np.empty((Ls.size, R)) for a in arms}
    for i, L in enumerate(Ls):
        for r in range(R):
            s = _replicate_seed(seed, r, int(L))
            for a in arms:
                est = run_estimator(network, sources, SamplePlan(T, h, int(L), seed=s, stepper=stepper,
                                                                 antithetic=a), workers=workers)
                errs[a][i, r] = est.u_T - truth
    mse, ci = {}, {}
    for a in arms:
        sq = errs[a] ** 2
        m = sq.mean(axis=1)
        half = 1.96 * sq.std(axis=1, ddof=1) / np.sqrt(R)
        mse[a] = m
        ci[a] = (np.maximum(m - half, 0.0), m + half)
    return VRResult(Ls, arms, mse, ci, errs, float(truth), R)


# ---------------------------------------------------------------------------
# robustness sweeps


@dataclass
class SweepResult:
    variable: str  # "sources" | "density" | "cascades"
    values: np.ndarray
    method: str
    family: str
    raw: np.ndarray  # (len(values), repeats) max-abs errors
    recovery: bool = False

    @property
    def mean(self) -> np.ndarray:
        return self.raw.mean(axis=1)

    @property
    def std(self) -> np.ndarray | None:
        if self.raw.shape[1] < 2:
            return None
        return self.raw.std(axis=1, ddof=1)


@dataclass
class SweepSpec:
    variable: str
    values: Sequence[int]
    repeats: int = 20
    n: int = 200
    T: float = 5.0
    h: float = 0.01
    L: int = 1000
    truth_runs: int = 10_000
    n_sources: int = 2
    recovery: tuple | None = None  # (lo, hi) for uniform recovery rates
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variable not in ("sources", "density", "cascades"):
            raise ValueError("sweep variable must be sources, density or cascades")
        if self.repeats < 1:
            raise ValueError("repeats must be positive")


def _family_config(family: str, n: int, kappa: int | None, recovery, seed: int) -> GeneratorConfig:
    kw = dict(FAMILY_DEFAULTS[GeneratorConfig(family, n).family])
    if kappa is not None:
        kw["kappa"] = int(kappa)
    return GeneratorConfig(family, n, recovery=recovery, seed=seed, **kw)


def robustness_sweep(family: str, spec: SweepSpec, methods=("sde-euler", "meanfield"),
                     workers: int = 1) -> list[SweepResult]:
    """Max-abs influence error of each method over a sweep, ``spec.repeats`` times per point.

    Within a repeat every method sees the same network, source set and truth.
    """
    fam = GeneratorConfig(family, spec.n).family
    values = np.asarray(spec.values, int)
    raw = {m: np.empty((values.size, spec.repeats)) for m in methods}
    base_net = None
    if spec.variable != "density":
        base_net = generate(_family_config(fam, spec.n, None, spec.recovery, spec.seed))
    for i, v in enumerate(values):
        net = base_net if base_net is not None else generate(
            _family_config(fam, spec.n, v, spec.recovery, spec.seed))
        for r in range(spec.repeats):
            rs = _replicate_seed(spec.seed, r, int(v))
            n0 = int(v) if spec.variable == "sources" else spec.n_sources
            src = random_sources(spec.n, n0, seed=rs)
            truth = predict("mc-oracle", net, src, spec.T, spec.h, spec.truth_runs, seed=rs + 1, workers=workers)
            L = int(v) if spec.variable == "cascades" else spec.L
            for m in methods:
                est = predict(m, net, src, spec.T, spec.h, L, seed=rs + 2, workers=workers)
                raw[m][i, r] = error_curves(est, truth).max_abs
    return [SweepResult(spec.variable, values, m, fam, raw[m], spec.recovery is not None) for m in methods]
