"""Time-varying and state-dependent activation intensities.

Edges may carry a Weibull hazard ``shape * alpha**shape * u**(shape - 1)`` in
the time ``u`` since their parent last became active, and a node may cap its
total incoming intensity at ``a_j``.  The state is augmented with per-node
clocks ``U`` (time since last activation, zero while inactive).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels as kern
from ._parallel import resolve_seed, run_blocks
from .baselines import EmpiricalMarginals, _summarise
from .network import PropagationNetwork, source_indicator
from .sampling import SamplePlan
from .sde import Trajectory

__all__ = [
    "Constant",
    "Weibull",
    "Throttled",
    "RateModel",
    "UnsupportedHazardError",
    "edge_intensity",
    "NetworkRates",
    "AugmentedState",
    "augmented_clock_update",
    "thinning_simulate",
    "thinning_marginals",
    "sde_simulate_time_varying",
    "time_varying_marginals",
    "DEFAULT_WINDOW",
]

DEFAULT_WINDOW = 0.05


class UnsupportedHazardError(ValueError):
    """Decreasing hazards have no finite dominating rate near u = 0."""


@dataclass(frozen=True)
class Constant:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def shape(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Weibull:
    alpha: float
    shape: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.shape > 0:
            raise ValueError("Weibull shape must be positive")


@dataclass(frozen=True)
class Throttled:
    """Cap ``a_j`` on the summed intensity of a node's active parents."""

    cap: float
    base: Union[Constant, Weibull, None] = None

    def __post_init__(self):
        if not self.cap > 0:
            raise ValueError("cap must be positive")


RateModel = Union[Constant, Weibull, Throttled]


def _hazard(alpha: float, shape: float, u: float) -> float:
    if shape == 1.0:
        return float(alpha)
    if shape < 1.0 and u == 0:
        raise UnsupportedHazardError("decreasing Weibull hazard is infinite at u = 0")
    return float(shape * alpha ** shape * u ** (shape - 1.0))


def edge_intensity(model: RateModel, u: float = 0.0, parent_states=None, parent_alphas=None) -> float:
    """Intensity of one edge (or, for :class:`Throttled`, of the target node).

    For ``Throttled`` pass the states and rates of the target's parents; the
    result is ``min(cap, sum of alpha over active parents)``.
    """
    if u < 0:
        raise ValueError("elapsed time must be non-negative")
    if isinstance(model, Constant):
        return float(model.alpha)
    if isinstance(model, Weibull):
        return _hazard(model.alpha, model.shape, u)
    if isinstance(model, Throttled):
        if parent_states is None or parent_alphas is None:
            raise ValueError("throttled intensity needs parent states and rates")
        x = np.asarray(parent_states, dtype=float)
        a = np.asarray(parent_alphas, dtype=float)
        return float(min(model.cap, float(np.dot(x, a))))
    raise TypeError(f"unknown rate model {model!r}")


@dataclass(frozen=True)
class NetworkRates:
    """Per-edge Weibull shapes and per-node caps attached to a network.

    Edge rates ``alpha`` and recovery rates stay on the network.  A shape of 1
    is the constant-rate model; a cap of ``inf`` means no throttling.
    """

    network: PropagationNetwork
    shape: np.ndarray
    cap: np.ndarray

    def __post_init__(self):
        shape = np.ascontiguousarray(self.shape, dtype=float).reshape(-1)
        cap = np.ascontiguousarray(self.cap, dtype=float).reshape(-1)
        net = self.network
        if shape.shape[0] != net.m or cap.shape[0] != net.n:
            raise ValueError("rate columns do not match the network")
        if np.any(shape <= 0):
            raise ValueError("Weibull shapes must be positive")
        if np.any(shape < 1.0):
            raise UnsupportedHazardError("decreasing hazards (shape < 1) cannot be simulated")
        if np.any(cap <= 0):
            raise ValueError("caps must be positive")
        capped = np.isfinite(cap)
        if capped.any() and np.any(capped[net.dst] & (shape != 1.0)):
            raise UnsupportedHazardError("throttling applies to constant-rate incoming edges only")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "cap", cap)

    @classmethod
    def constant(cls, network: PropagationNetwork) -> "NetworkRates":
        return cls(network, np.ones(network.m), np.full(network.n, np.inf))

    @classmethod
    def weibull(cls, network: PropagationNetwork, shape) -> "NetworkRates":
        return cls(network, np.broadcast_to(np.asarray(shape, float), (network.m,)).copy(),
                   np.full(network.n, np.inf))

    @classmethod
    def throttled(cls, network: PropagationNetwork, cap) -> "NetworkRates":
        return cls(network, np.ones(network.m), np.broadcast_to(np.asarray(cap, float), (network.n,)).copy())

    @classmethod
    def from_models(cls, network: PropagationNetwork, edge_models: Sequence, node_caps=None) -> "NetworkRates":
        """Build from one model per canonical edge; the model's alpha must match the network's."""
        if len(edge_models) != network.m:
            raise ValueError("need one model per edge")
        shape = np.ones(network.m)
        cap = np.full(network.n, np.inf) if node_caps is None else np.asarray(node_caps, float)
        for e, mdl in enumerate(edge_models):
            if isinstance(mdl, Throttled):
                cap[network.dst[e]] = min(cap[network.dst[e]], mdl.cap)
                mdl = mdl.base or Constant(float(network.alpha[e]))
            if not np.isclose(mdl.alpha, network.alpha[e]):
                raise ValueError(f"edge {e}: model alpha differs from the network's")
            shape[e] = mdl.shape
        return cls(network, shape, cap)

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.shape == 1.0) and np.all(np.isinf(self.cap)))

    def node_intensity(self, X, U) -> np.ndarray:
        """Activation intensity of every inactive node (0 for active ones)."""
        net = self.network
        X = np.asarray(X)
        U = np.asarray(U, float)
        haz = np.array([_hazard(a, s, u) for a, s, u in zip(net.alpha, self.shape, U[net.src])])
        per_edge = haz * (X[net.src] == 1)
        lam = np.minimum(np.bincount(net.dst, weights=per_edge, minlength=net.n), self.cap)
        return np.where(X == 1, 0.0, lam)

    def _args(self):
        net = self.network
        return (net.n, np.ascontiguousarray(net.parent_ptr), np.ascontiguousarray(net.src),
                np.ascontiguousarray(net.alpha), self.shape, self.cap, np.ascontiguousarray(net.gamma))


def _as_rates(network, rates) -> NetworkRates:
    if rates is None:
        return NetworkRates.constant(network)
    if isinstance(rates, NetworkRates):
        if rates.network is not network and rates.network != network:
            raise ValueError("rate model belongs to a different network")
        return rates
    return NetworkRates.from_models(network, rates)


# ---------------------------------------------------------------------------
# augmented state


@dataclass(frozen=True)
class AugmentedState:
    X: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.int8).reshape(-1)
        U = np.asarray(self.U, dtype=float).reshape(-1)
        if X.shape != U.shape:
            raise ValueError("state and clock lengths differ")
        if np.any((X != 0) & (X != 1)):
            raise ValueError("state must be binary")
        if np.any(U < 0):
            raise ValueError("clocks must be non-negative")
        if np.any((X == 0) & (U != 0)):
            raise ValueError("inactive nodes must have zero clocks")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)

    @classmethod
    def initial(cls, network: PropagationNetwork, sources) -> "AugmentedState":
        return cls(source_indicator(network, sources), np.zeros(network.n))


def augmented_clock_update(state: AugmentedState, dt: float, recovered=None) -> AugmentedState:
    """Advance clocks of active nodes by ``dt``; nodes in ``recovered`` reset to (0, 0)."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    X = state.X.copy()
    U = np.where(X == 1, state.U + dt, 0.0)
    if recovered is not None:
        r = np.asarray(recovered)
        if r.dtype == bool:
            r = np.flatnonzero(r)
        X[r] = 0
        U[r] = 0.0
    return AugmentedState(X, U)


# ---------------------------------------------------------------------------
# exact simulation by thinning


def _check_window(window: float) -> float:
    if not window > 0:
        raise ValueError("thinning window must be positive")
    return float(window)


def _augmented_path(n: int, x0: np.ndarray, times, nodes, kinds) -> Trajectory:
    """Change-point trajectory with clocks evaluated at each change point."""
    X = x0.astype(np.int8).copy()
    last = np.where(X == 1, 0.0, np.nan)
    first = np.where(X == 1, 0.0, np.inf)
    ts = [0.0]
    states = [X.copy()]
    clocks = [np.zeros(n)]
    for t, j, kind in zip(times, nodes, kinds):
        if kind > 0:
            X[j] = 1
            last[j] = t
            first[j] = min(first[j], t)
        else:
            X[j] = 0
            last[j] = np.nan
        U = np.where(X == 1, t - last, 0.0)
        if t == ts[-1]:
            states[-1], clocks[-1] = X.copy(), U
        else:
            ts.append(float(t))
            states.append(X.copy())
            clocks.append(U)
    return Trajectory(np.array(ts), np.array(states, np.int8), np.array(clocks), first)


def thinning_simulate(network: PropagationNetwork, rates, sources, T: float, rng=None,
                      window: float = DEFAULT_WINDOW) -> Trajectory:
    """One exact path of the augmented system up to T (Ogata thinning in windows)."""
    rates = _as_rates(network, rates)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x0 = source_indicator(network, sources)
    k, t, nodes, kinds = kern.thinning_run(rng, *rates._args(), x0, float(T), _check_window(window),
                                           np.empty(64), np.empty(64, np.int64), np.empty(64, np.int8))
    return _augmented_path(network.n, x0, t[:k], nodes[:k], kinds[:k])


def thinning_marginals(network: PropagationNetwork, rates, sources, T: float, grid, runs: int = 10_000,
                       seed=0, workers: int = 1, window: float = DEFAULT_WINDOW) -> EmpiricalMarginals:
    """Oracle curves from ``runs`` thinning paths, evaluated right-continuously on ``grid``."""
    rates = _as_rates(network, rates)
    window = _check_window(window)
    x0 = source_indicator(network, sources)
    seed = resolve_seed(seed)
    grid = np.asarray(grid, float)
    K1 = grid.size
    args = rates._args()

    def block(rng, b, size):
        diff = np.zeros((K1 + 1, network.n), np.int64)
        s = np.zeros(K1)
        ss = np.zeros(K1)
        kern.thinning_block(rng, size, *args, x0, float(T), window, grid, diff, s, ss)
        return diff, s, ss

    parts = run_blocks(block, runs, seed, "thinning", workers)
    diff = sum(p[0] for p in parts)
    counts = np.cumsum(diff[:K1], axis=0) + runs * x0.astype(np.int64)
    return _summarise(grid, counts, sum(p[1] for p in parts), sum(p[2] for p in parts), runs, seed)


# ---------------------------------------------------------------------------
# grid (Euler) simulation of the augmented system


def _grid(T: float, h: float) -> int:
    return SamplePlan(T, h, 2).K


def sde_simulate_time_varying(network: PropagationNetwork, rates, sources, T: float, h: float,
                              rng=None) -> Trajectory:
    """One Euler path of the augmented system on the grid ``0, h, ..., T``.

    Each bin draws node-level Poisson increments with mean equal to the
    intensity at the bin's left endpoint times ``h``.
    """
    rates = _as_rates(network, rates)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    K = _grid(T, h)
    n = network.n
    x0 = source_indicator(network, sources)
    node_diff = np.zeros((K + 2, n), np.int64)
    mu_diff = np.zeros(K + 2, np.int64)
    kern.tv_euler_run(rng, *rates._args(), x0, float(h), K, node_diff, mu_diff, True,
                      np.empty(n, np.int8), np.empty(n))
    states = (np.cumsum(node_diff[:K + 1], axis=0) + x0).astype(np.int8)
    clocks = np.zeros((K + 1, n))
    for k in range(1, K + 1):
        stay = (states[k] == 1) & (states[k - 1] == 1)
        clocks[k] = np.where(stay, clocks[k - 1] + h, 0.0)
    return Trajectory(h * np.arange(K + 1), states, clocks)


def time_varying_marginals(network: PropagationNetwork, rates, sources, plan: SamplePlan,
                           workers: int = 1) -> EmpiricalMarginals:
    """Average of ``plan.L`` independent Euler paths of the augmented system."""
    rates = _as_rates(network, rates)
    x0 = source_indicator(network, sources)
    seed = resolve_seed(plan.seed)
    K = plan.K
    args = rates._args()

    def block(rng, b, size):
        diff = np.zeros((K + 2, network.n), np.int64)
        s = np.zeros(K + 1)
        ss = np.zeros(K + 1)
        kern.tv_euler_block(rng, size, *args, x0, float(plan.h), K, diff, s, ss)
        return diff, s, ss

    parts = run_blocks(block, plan.L, seed, "time-varying", workers)
    diff = sum(p[0] for p in parts)
    counts = np.cumsum(diff[:K + 1], axis=0) + plan.L * x0.astype(np.int64)
    return _summarise(plan.grid, counts, sum(p[1] for p in parts), sum(p[2] for p in parts), plan.L, seed)
