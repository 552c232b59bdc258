"""Jump-SDE state system and its steppers.

The state ``X`` is a binary activation vector.  The driving noise is the vector
of Poisson processes ``J = (R, N)``: one recovery process per node followed by
one activation process per edge in canonical edge order.  A step of the
system reads

    X_{k+1} = X_k + c(X_k) dJ_k

where ``c(X) = [-diag(X), c_1(X)]`` and ``c_1`` is block diagonal with rows
``b_j(X) = (1 - X_j) X_{parents(j)}``.

The functions here are the small, direct implementations used for single
trajectories and as the reference for the compiled paths in
:mod:`netsde._kernels`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .network import PropagationNetwork, source_indicator

__all__ = [
    "JumpIncrements",
    "EventList",
    "Trajectory",
    "edge_coefficients",
    "coeff_b",
    "coeff_matrix",
    "euler_step",
    "taylor2_step",
    "jump_adapted_replay",
    "simulate_trajectory",
    "STEPPERS",
]

STEPPERS = ("euler", "taylor2", "jump-adapted")


@dataclass(frozen=True)
class JumpIncrements:
    """Increments of the recovery (length n) and activation (length m) processes."""

    dR: np.ndarray
    dN: np.ndarray

    def __post_init__(self):
        dR = np.asarray(self.dR, dtype=np.int64).reshape(-1)
        dN = np.asarray(self.dN, dtype=np.int64).reshape(-1)
        if np.any(dR < 0) or np.any(dN < 0):
            raise ValueError("jump increments must be non-negative")
        object.__setattr__(self, "dR", dR)
        object.__setattr__(self, "dN", dN)

    @property
    def dJ(self) -> np.ndarray:
        return np.concatenate([self.dR, self.dN])

    @classmethod
    def zeros(cls, network: PropagationNetwork) -> "JumpIncrements":
        return cls(np.zeros(network.n, np.int64), np.zeros(network.m, np.int64))


@dataclass(frozen=True)
class EventList:
    """Time-sorted driving events; ``pids`` use the jump-vector layout."""

    times: np.ndarray
    pids: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        p = np.asarray(self.pids, dtype=np.int64).reshape(-1)
        if t.shape != p.shape:
            raise ValueError("times and process ids differ in length")
        if t.size > 1:
            dt = np.diff(t)
            bad = (dt < 0) | ((dt == 0) & (np.diff(p) < 0))
            if np.any(bad):
                raise ValueError("event list is not sorted by (time, process id)")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "pids", p)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @classmethod
    def from_unsorted(cls, times, pids) -> "EventList":
        times = np.asarray(times, dtype=float)
        pids = np.asarray(pids, dtype=np.int64)
        order = np.lexsort((pids, times))
        return cls(times[order], pids[order])


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant, right-continuous state path.

    ``states[k]`` holds on ``[times[k], times[k+1])``.  For grid trajectories
    ``times`` is the uniform grid; for event replays it holds the change points.
    ``clocks`` (time since last activation) is present for augmented paths.
    """

    times: np.ndarray
    states: np.ndarray
    clocks: np.ndarray | None = None
    activation_times: np.ndarray | None = None

    def at(self, t) -> np.ndarray:
        k = np.searchsorted(self.times, t, side="right") - 1
        if np.any(np.asarray(k) < 0):
            raise ValueError("time before the start of the trajectory")
        return self.states[k]

    def influence(self) -> np.ndarray:
        return self.states.sum(axis=1)


def edge_coefficients(network: PropagationNetwork, X) -> np.ndarray:
    """Per-edge entries ``(1 - X_j) X_i`` of ``c_1(X)`` in canonical edge order."""
    X = np.asarray(X, dtype=np.int64)
    return (1 - X[network.dst]) * X[network.src]


def coeff_b(network: PropagationNetwork, X) -> list[np.ndarray]:
    """Row vectors ``b_j(X)``; entries follow the increasing parent order of ``j``."""
    e = edge_coefficients(network, X)
    ptr = network.parent_ptr
    return [e[ptr[j]:ptr[j + 1]] for j in range(network.n)]


def coeff_matrix(network: PropagationNetwork, X) -> sparse.csr_matrix:
    """The full n x (n + m) coefficient matrix ``c(X) = [-diag(X), c_1(X)]``."""
    X = np.asarray(X, dtype=np.int64)
    n, m = network.n, network.m
    rows = np.concatenate([np.arange(n), network.dst])
    cols = np.concatenate([np.arange(n), n + np.arange(m)])
    vals = np.concatenate([-X, edge_coefficients(network, X)])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n + m))


def _apply(network: PropagationNetwork, X: np.ndarray, inc: JumpIncrements) -> np.ndarray:
    """Unclamped ``c(X) dJ``."""
    act = np.bincount(network.dst, weights=edge_coefficients(network, X) * inc.dN, minlength=network.n)
    return act.astype(np.int64) - X * inc.dR


def _clamp(v) -> np.ndarray:
    return np.clip(v, 0, 1).astype(np.int8)


def euler_step(network: PropagationNetwork, X, inc: JumpIncrements) -> np.ndarray:
    X = np.asarray(X, dtype=np.int64)
    return _clamp(X + _apply(network, X, inc))


def taylor2_step(network: PropagationNetwork, X, inc: JumpIncrements) -> np.ndarray:
    """Weak order-2 Taylor step with the correction driven by ``dJ (dJ - 1) / 2``."""
    X = np.asarray(X, dtype=np.int64)
    drift = _apply(network, X, inc)
    half = _clamp(X + drift).astype(np.int64)
    w = JumpIncrements(inc.dR * (inc.dR - 1) // 2, inc.dN * (inc.dN - 1) // 2)
    if not (w.dR.any() or w.dN.any()):
        return _clamp(X + drift)
    correction = _apply(network, half, w) - _apply(network, X, w)
    return _clamp(X + drift + correction)


_STEP = {"euler": euler_step, "taylor2": taylor2_step}


def jump_adapted_replay(network: PropagationNetwork, sources, events: EventList) -> Trajectory:
    """Apply driving events exactly, one at a time, in time order."""
    if not isinstance(events, EventList):
        raise TypeError("events must be an EventList")
    n = network.n
    X = source_indicator(network, sources).copy()
    times = [0.0]
    states = [X.copy()]
    first = np.where(X == 1, 0.0, np.inf)
    for t, p in zip(events.times, events.pids):
        if p < n:
            if X[p] == 1:
                X[p] = 0
            else:
                continue
        else:
            e = p - n
            j = network.dst[e]
            if X[network.src[e]] == 1 and X[j] == 0:
                X[j] = 1
                first[j] = min(first[j], t)
            else:
                continue
        if t == times[-1]:
            states[-1] = X.copy()
        else:
            times.append(float(t))
            states.append(X.copy())
    return Trajectory(np.array(times), np.array(states, dtype=np.int8), activation_times=first)


def simulate_trajectory(network: PropagationNetwork, sources, increments, h: float,
                        stepper: str = "euler") -> Trajectory:
    """Iterate a grid stepper over a sequence of per-bin increments.

    ``increments`` is either a sequence of :class:`JumpIncrements` or a pair of
    arrays ``(dR, dN)`` with shapes ``(K, n)`` and ``(K, m)``.
    """
    if stepper not in _STEP:
        raise ValueError(f"grid stepper must be one of {sorted(_STEP)}")
    if isinstance(increments, tuple) and len(increments) == 2 and np.ndim(increments[0]) == 2:
        dR, dN = increments
        incs = [JumpIncrements(r, q) for r, q in zip(dR, dN)]
    else:
        incs = list(increments)
    for inc in incs:
        if inc.dR.shape[0] != network.n or inc.dN.shape[0] != network.m:
            raise ValueError("increment dimensions do not match the network")
    step = _STEP[stepper]
    X = source_indicator(network, sources)
    states = [X]
    for inc in incs:
        X = step(network, X, inc)
        states.append(X)
    K = len(incs)
    return Trajectory(h * np.arange(K + 1), np.array(states, dtype=np.int8))
