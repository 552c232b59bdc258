"""Antithetic Poisson sampling of driving schedules and the influence estimator.

Each trajectory pair draws one uniform ``U`` per Poisson process, sets the
two event counts to ``F^{-1}(1 - U)`` and ``F^{-1}(U)`` for the process's
Poisson(rate * T) distribution, and scatters that many uniform event times on
``[0, T)``.  The two schedules drive one trajectory each; estimates average
``g`` over all trajectories at every grid point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels as kern
from ._parallel import BLOCK, resolve_seed, run_blocks
from .network import PropagationNetwork, source_indicator
from .sde import EventList, JumpIncrements, jump_adapted_replay, simulate_trajectory

__all__ = [
    "MAX_MEAN",
    "poisson_inverse_cdf",
    "antithetic_poisson_pair",
    "scatter_and_bin",
    "JumpSchedule",
    "sample_schedule_pair",
    "SamplePlan",
    "EvaluationFunctional",
    "InfluenceEstimate",
    "run_estimator",
    "ComplexityConstants",
    "DegeneratePilotError",
    "PlanError",
    "PlanResult",
    "plan_h_L",
    "rmse_bound",
    "estimate_constants",
    "fit_power_law",
    "PowerLawFit",
    "terminal_bias",
]

# exp(-mean) underflows past ~745; keep a margin for the CDF summation
MAX_MEAN = 700.0


def poisson_inverse_cdf(mean: float, u: float) -> int:
    """Smallest ``k`` such that ``P(Poisson(mean) <= k) >= u``."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    if not 0.0 <= mean <= MAX_MEAN:
        raise ValueError(f"Poisson mean must lie in [0, {MAX_MEAN}], got {mean}")
    return int(kern.poisson_icdf(float(mean), float(u)))


def antithetic_poisson_pair(mean: float, u: float) -> tuple[int, int]:
    """``(F^{-1}(1 - u), F^{-1}(u))`` for the Poisson(mean) distribution."""
    if not 0.0 < u < 1.0:
        if u == 0.0:
            raise ValueError("u = 0 maps 1 - u = 1 to an unbounded count")
        raise ValueError(f"u must lie in (0, 1), got {u}")
    return poisson_inverse_cdf(mean, 1.0 - u), poisson_inverse_cdf(mean, u)


def _grid_size(T: float, h: float) -> int:
    K = int(round(T / h))
    if K < 1 or abs(K * h - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T / h must be a positive integer (T={T}, h={h})")
    return K


def _bins(times: np.ndarray, h: float, K: int) -> np.ndarray:
    return np.minimum((times / h).astype(np.int64), K - 1)


def scatter_and_bin(count: int, T: float, h: float, rng=None, times=None):
    """Scatter ``count`` uniform points on [0, T) and count them per bin ``[kh, (k+1)h)``.

    Pass ``times`` to bin given points instead of drawing them.
    """
    K = _grid_size(T, h)
    if times is None:
        rng = np.random.default_rng(rng)
        times = T * rng.random(int(count))
    times = np.sort(np.asarray(times, dtype=float))
    if times.size != count:
        raise ValueError("number of times does not match count")
    return times, np.bincount(_bins(times, h, K), minlength=K)


@dataclass(frozen=True)
class JumpSchedule:
    """Event times of every driving process for one trajectory on [0, T)."""

    T: float
    times: tuple  # one sorted array per process, jump-vector order
    n: int

    @property
    def counts(self) -> np.ndarray:
        return np.array([t.size for t in self.times], dtype=np.int64)

    def events(self) -> EventList:
        if not self.times:
            return EventList(np.zeros(0), np.zeros(0, np.int64))
        pids = np.concatenate([np.full(t.size, p, np.int64) for p, t in enumerate(self.times)])
        times = np.concatenate(self.times) if pids.size else np.zeros(0)
        order = np.argsort(times, kind="stable")
        return EventList(times[order], pids[order])

    def increments(self, h: float) -> list[JumpIncrements]:
        K = _grid_size(self.T, h)
        table = np.zeros((K, len(self.times)), dtype=np.int64)
        for p, t in enumerate(self.times):
            if t.size:
                table[:, p] = np.bincount(_bins(t, h, K), minlength=K)
        return [JumpIncrements(row[:self.n], row[self.n:]) for row in table]


def _open_uniforms(rng, size: int) -> np.ndarray:
    # mirrors kern.open_uniform draw by draw
    out = np.empty(size)
    for k in range(size):
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        out[k] = u
    return out


def _check_means(lam: np.ndarray) -> None:
    if np.any(lam > MAX_MEAN):
        raise ValueError(f"rate * T exceeds {MAX_MEAN}; shorten the horizon or rescale time")


def sample_schedule_pair(network: PropagationNetwork, T: float, rng: np.random.Generator,
                         antithetic: bool = True) -> tuple[JumpSchedule, JumpSchedule]:
    """Two schedules for one trajectory pair, consuming ``rng`` like the compiled estimator."""
    lam = network.process_rates * T
    _check_means(lam)
    P = lam.size
    u = _open_uniforms(rng, P)
    za = np.array([kern.poisson_icdf(l, 1.0 - x) for l, x in zip(lam, u)], dtype=np.int64)
    if antithetic:
        zb = np.array([kern.poisson_icdf(l, x) for l, x in zip(lam, u)], dtype=np.int64)
    else:
        u2 = _open_uniforms(rng, P)
        zb = np.array([kern.poisson_icdf(l, 1.0 - x) for l, x in zip(lam, u2)], dtype=np.int64)
    out = []
    for z in (za, zb):
        times = tuple(np.sort(T * rng.random(int(c))) for c in z)
        out.append(JumpSchedule(T, times, network.n))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# estimator

_STEPPER_CODES = {"euler": kern.EULER, "taylor2": kern.TAYLOR2, "jump-adapted": kern.EXACT}


@dataclass(frozen=True)
class SamplePlan:
    T: float
    h: float
    L: int
    seed: int | None = 0
    stepper: str = "euler"
    antithetic: bool = True

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not 0 < self.h < 1:
            raise ValueError("step size h must lie in (0, 1)")
        _grid_size(self.T, self.h)
        if self.stepper not in _STEPPER_CODES:
            raise ValueError(f"stepper must be one of {sorted(_STEPPER_CODES)}")
        if int(self.L) != self.L or self.L < 2 or self.L % 2:
            raise ValueError("L must be an even integer >= 2")

    @property
    def K(self) -> int:
        return _grid_size(self.T, self.h)

    @property
    def grid(self) -> np.ndarray:
        return self.h * np.arange(self.K + 1)


@dataclass(frozen=True)
class EvaluationFunctional:
    """``g`` applied to the state: total influence, one node's marginal, or a custom map."""

    kind: str = "total"
    node: int | None = None
    fn: Callable[[np.ndarray], float] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("total", "marginal", "custom"):
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "marginal" and self.node is None:
            raise ValueError("marginal functional needs a node")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom functional needs fn")

    @classmethod
    def total(cls):
        return cls("total", name="total")

    @classmethod
    def marginal(cls, node: int):
        return cls("marginal", node=int(node), name=f"x{int(node)}")

    @classmethod
    def custom(cls, fn, name="custom"):
        return cls("custom", fn=fn, name=name)

    def __call__(self, X) -> float:
        X = np.asarray(X)
        if self.kind == "total":
            return float(X.sum())
        if self.kind == "marginal":
            return float(X[self.node])
        return float(self.fn(X))


@dataclass
class InfluenceEstimate:
    """Grid curves of estimated influence and per-node activation probabilities."""

    times: np.ndarray
    mu: np.ndarray
    marginals: np.ndarray  # (K + 1, n)
    pair_var: np.ndarray  # variance of pair-averaged total influence per grid point
    L: int
    h: float
    seed: int
    stepper: str
    antithetic: bool
    terminal: np.ndarray | None = field(default=None, repr=False)
    custom: dict = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        """Standard error of ``mu`` from the L/2 independent pair averages."""
        pairs = self.L // 2
        if pairs < 2:
            return np.full_like(self.mu, np.nan)
        return np.sqrt(np.maximum(self.pair_var, 0.0) / pairs)

    @property
    def u_T(self) -> float:
        return float(self.mu[-1])


def _finalize(network, x0, plan, seed, counts, psum, psumsq, terminal, custom=None):
    L = plan.L
    pairs = L // 2
    marg = counts / L
    mu = marg.sum(axis=1)
    if pairs > 1:
        var = (psumsq - psum * psum / pairs) / (pairs - 1)
    else:
        var = np.zeros_like(psum)
    return InfluenceEstimate(plan.grid, mu, marg, np.maximum(var, 0.0), L, plan.h, seed, plan.stepper,
                             plan.antithetic, terminal, custom or {})


def run_estimator(network: PropagationNetwork, sources, plan: SamplePlan, functionals: Sequence = (),
                  workers: int = 1) -> InfluenceEstimate:
    """Estimate influence and node marginals on the plan's grid.

    Total influence and all node marginals are always returned.  Custom
    functionals in ``functionals`` are averaged over the same trajectories and
    returned in ``estimate.custom`` keyed by name; they use the reference
    (uncompiled) path.
    """
    x0 = source_indicator(network, sources)
    customs = [f for f in functionals if isinstance(f, EvaluationFunctional) and f.kind == "custom"]
    if customs:
        return _reference_estimate(network, x0, plan, customs, workers)
    seed = resolve_seed(plan.seed)
    lam = network.process_rates * plan.T
    _check_means(lam)
    K = plan.K
    code = _STEPPER_CODES[plan.stepper]
    n = network.n
    src = np.ascontiguousarray(network.src)
    dst = np.ascontiguousarray(network.dst)

    def block(rng, b, size):
        node_diff = np.zeros((K + 2, n), np.int64)
        psum = np.zeros(K + 1)
        psumsq = np.zeros(K + 1)
        term = np.zeros(2 * size, np.int64)
        kern.estimator_block(rng, size, lam, n, src, dst, x0, plan.T, plan.h, K, code, plan.antithetic,
                             node_diff, psum, psumsq, term)
        return node_diff, psum, psumsq, term

    parts = run_blocks(block, plan.L // 2, seed, "estimator", workers)
    node_diff = np.zeros((K + 2, n), np.int64)
    psum = np.zeros(K + 1)
    psumsq = np.zeros(K + 1)
    for nd, s, ss, _ in parts:
        node_diff += nd
        psum += s
        psumsq += ss
    terminal = _interleave([p[3] for p in parts])
    counts = np.cumsum(node_diff[:K + 1], axis=0) + plan.L * x0.astype(np.int64)
    return _finalize(network, x0, plan, seed, counts, psum, psumsq, terminal)


def _interleave(terms: list[np.ndarray]) -> np.ndarray:
    """Per-trajectory terminal values ordered as (pair 0 member a, pair 0 member b, ...)."""
    return np.concatenate(terms) if terms else np.zeros(0, np.int64)


def _grid_states(network, x0, schedule: JumpSchedule, plan: SamplePlan) -> np.ndarray:
    if plan.stepper == "jump-adapted":
        K = plan.K
        ev = schedule.events()
        bins = _bins(ev.times, plan.h, K)
        states = np.empty((K + 1, network.n), np.int8)
        traj = jump_adapted_replay(network, np.flatnonzero(x0), EventList(ev.times, ev.pids))
        # state at grid k reflects every event whose bin lies before k
        for k in range(K + 1):
            before = ev.times[bins < k]
            states[k] = traj.at(before[-1]) if before.size else x0
        return states
    incs = schedule.increments(plan.h)
    return simulate_trajectory(network, np.flatnonzero(x0), incs, plan.h, plan.stepper).states


def _reference_estimate(network, x0, plan: SamplePlan, customs, workers=1) -> InfluenceEstimate:
    """Pure-numpy estimator; consumes random numbers exactly like the compiled one."""
    seed = resolve_seed(plan.seed)
    K = plan.K

    def block(rng, b, size):
        counts = np.zeros((K + 1, network.n), np.int64)
        psum = np.zeros(K + 1)
        psumsq = np.zeros(K + 1)
        csum = np.zeros((len(customs), K + 1))
        term = np.zeros(2 * size, np.int64)
        for pair in range(size):
            a, bb = sample_schedule_pair(network, plan.T, rng, plan.antithetic)
            sa = _grid_states(network, x0, a, plan)
            sb = _grid_states(network, x0, bb, plan)
            counts += sa + sb
            v = 0.5 * (sa.sum(axis=1) + sb.sum(axis=1))
            psum += v
            psumsq += v * v
            term[2 * pair] = sa[-1].sum()
            term[2 * pair + 1] = sb[-1].sum()
            for c, f in enumerate(customs):
                csum[c] += [f(s) for s in sa]
                csum[c] += [f(s) for s in sb]
        return counts, psum, psumsq, csum, term

    parts = run_blocks(block, plan.L // 2, seed, "estimator", workers)
    counts = sum(p[0] for p in parts)
    psum = sum(p[1] for p in parts)
    psumsq = sum(p[2] for p in parts)
    csum = sum(p[3] for p in parts)
    terminal = _interleave([p[4] for p in parts])
    custom = {f.name: csum[c] / plan.L for c, f in enumerate(customs)}
    return _finalize(network, x0, plan, seed, counts, psum, psumsq, terminal, custom)


# ---------------------------------------------------------------------------
# error bound, planning and pilot constants


class PlanError(ValueError):
    pass


class DegeneratePilotError(ValueError):
    pass


@dataclass(frozen=True)
class ComplexityConstants:
    beta: float
    sigma2: float
    C: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("weak order must be positive")
        if not (self.sigma2 > 0 and self.C > 0):
            raise ValueError("sigma2 and C must be positive")

    def delta(self, T: float) -> float:
        b = self.beta
        return (self.sigma2 / (2 * b * self.C * T ** (2 * b))) ** (1 / (2 * b))

    def D(self, T: float) -> float:
        d = self.delta(T)
        b = self.beta
        return math.sqrt(self.sigma2 / d + self.C * T ** (2 * b) * d ** (2 * b))


def rmse_bound(h, L, constants: ComplexityConstants):
    """Upper bound sqrt(sigma^2 / L + C^2 h^(2 beta)) on the estimator RMSE."""
    c = constants
    return np.sqrt(c.sigma2 / np.asarray(L, float) + c.C ** 2 * np.asarray(h, float) ** (2 * c.beta))


@dataclass(frozen=True)
class PlanResult:
    h: float  # grid-compatible step (T / h integer)
    L: int  # even trajectory count
    h_opt: float  # unrounded optimum
    L_opt: float
    budget: float  # L T / h
    bound: float  # rmse_bound at (h, L)
    sampling_cost: float | None  # expected number of sampled events
    compute_cost: float | None  # (m + n) L T / h
    delta: float
    D: float
    reference_h: float  # closed forms quoted alongside, see README
    reference_L: float


def plan_h_L(eps: float, constants: ComplexityConstants, T: float,
             network: PropagationNetwork | None = None) -> PlanResult:
    """Cheapest (h, L) whose RMSE bound is at most ``eps``.

    Minimises the budget L T / h subject to sigma^2/L + C^2 h^(2 beta) = eps^2,
    which puts a fraction 1/(2 beta + 1) of eps^2 on the bias term.
    """
    if not eps > 0:
        raise PlanError("eps must be positive")
    c = constants
    b = c.beta
    e2 = eps * eps
    h_opt = (e2 / ((2 * b + 1) * c.C ** 2)) ** (1 / (2 * b))
    L_opt = c.sigma2 * (2 * b + 1) / (2 * b * e2)
    if h_opt >= 1:
        raise PlanError(f"optimal step {h_opt:.4g} >= 1: the bound is met by any step in (0, 1); "
                        "tighten eps or recheck constants")
    K = math.ceil(T / h_opt - 1e-12)
    h = T / K
    L = 2 * math.ceil(L_opt / 2 - 1e-12)
    L = max(L, 2)
    sampling = compute = None
    if network is not None:
        sampling = float((network.alpha.sum() + network.gamma.sum()) * T * L)
        compute = float((network.m + network.n) * L * T / h)
    d = c.delta(T)
    D = c.D(T)
    return PlanResult(
        h=h, L=L, h_opt=h_opt, L_opt=L_opt, budget=L * T / h, bound=float(rmse_bound(h, L, c)),
        sampling_cost=sampling, compute_cost=compute, delta=d, D=D,
        reference_h=T * d * D ** (-1 / b) * eps ** (1 / b), reference_L=d * D ** 2 / e2,
    )


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float  # log of the prefactor
    inconclusive: bool
    used: np.ndarray  # mask of points used in the fit

    @property
    def prefactor(self) -> float:
        return math.exp(self.intercept)


def fit_power_law(hs, biases, ses=None, z: float = 3.0) -> PowerLawFit:
    """Least-squares fit of log|bias| = intercept + slope log h.

    Points whose |bias| is within ``z`` standard errors of zero are dropped;
    fewer than two remaining points gives an inconclusive fit (nan slope).
    """
    hs = np.asarray(hs, float)
    b = np.abs(np.asarray(biases, float))
    used = b > 0
    if ses is not None:
        used &= b > z * np.asarray(ses, float)
    if used.sum() < 2:
        return PowerLawFit(float("nan"), float("nan"), True, used)
    slope, intercept = np.polyfit(np.log(hs[used]), np.log(b[used]), 1)
    return PowerLawFit(float(slope), float(intercept), False, used)


def terminal_bias(network: PropagationNetwork, sources, T: float, hs, steppers, L: int, seed=0,
                  node: int | None = None, antithetic: bool = True, workers: int = 1):
    """Bias of grid steppers at T against exact replay of the same schedules.

    Returns ``(bias, se, exact_mean, exact_var)``; ``bias[c]`` estimates
    E g(X^h(T)) - E g(X(T)) for ``(hs[c], steppers[c])``.  ``exact_var`` is the
    single-trajectory variance of g(X(T)).
    """
    if L < 2 or L % 2:
        raise ValueError("L must be an even integer >= 2")
    x0 = source_indicator(network, sources)
    seed = resolve_seed(seed)
    hs = np.asarray(hs, float)
    for h in hs:
        _grid_size(T, h)
    codes = np.array([_STEPPER_CODES[s] for s in steppers], np.int64)
    if codes.shape != hs.shape:
        raise ValueError("hs and steppers differ in length")
    lam = network.process_rates * T
    _check_means(lam)
    target = -1 if node is None else int(node)

    def block(rng, b, size):
        ds = np.zeros(hs.size)
        dss = np.zeros(hs.size)
        es = np.zeros(2)
        kern.bias_block(rng, size, lam, network.n, np.ascontiguousarray(network.src),
                        np.ascontiguousarray(network.dst), x0, T, hs, codes, antithetic, target,
                        ds, dss, es[:1], es[1:])
        return ds, dss, es

    pairs = L // 2
    parts = run_blocks(block, pairs, seed, "bias", workers)
    ds = sum(p[0] for p in parts)
    dss = sum(p[1] for p in parts)
    es = sum(p[2] for p in parts)
    bias = ds / pairs
    var = (dss - ds * ds / pairs) / max(pairs - 1, 1)
    se = np.sqrt(np.maximum(var, 0) / pairs)
    exact_mean = es[0] / L
    exact_var = max(es[1] / L - exact_mean ** 2, 0.0) * L / max(L - 1, 1)
    return bias, se, exact_mean, exact_var


def estimate_constants(network: PropagationNetwork, sources, T: float, L0: int = 20000,
                       hs=(0.4, 0.2, 0.1, 0.05), stepper: str = "euler", seed=0,
                       node: int | None = None, workers: int = 1) -> ComplexityConstants:
    """Pilot estimates of (beta, sigma^2, C) for the chosen stepper.

    sigma^2 is the sample variance of g(X(T)) over independent pilot draws;
    C and beta come from a log-log fit of the paired bias against h.
    """
    if L0 < 100:
        raise ValueError("pilot needs at least 100 trajectories")
    if len(hs) < 2:
        raise ValueError("pilot needs at least two step sizes")
    L0 += L0 % 2
    bias, se, _, var = terminal_bias(network, sources, T, hs, [stepper] * len(hs), L0, seed, node,
                                     antithetic=False, workers=workers)
    if var <= 0:
        raise DegeneratePilotError("g(X(T)) has zero pilot variance; nothing to plan")
    fit = fit_power_law(hs, bias, se)
    if fit.inconclusive:
        raise DegeneratePilotError("discretisation bias indistinguishable from noise; increase L0 or h")
    return ComplexityConstants(beta=fit.slope, sigma2=float(var), C=fit.prefactor)
