"""Reference solvers: first-order mean-field ODE and exact Monte-Carlo cascades."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import _kernels as kern
from ._parallel import resolve_seed, run_blocks
from .network import PropagationNetwork, source_indicator

__all__ = [
    "MeanFieldResult",
    "StepTooLargeError",
    "meanfield_rhs",
    "meanfield_solve",
    "CascadeRecord",
    "gillespie_simulate",
    "empirical_marginals",
    "EmpiricalMarginals",
    "monte_carlo_marginals",
    "write_cascades",
    "read_cascades",
]


class StepTooLargeError(ValueError):
    pass


def _rate_matrix(network: PropagationNetwork) -> sparse.csr_matrix:
    # A[j, i] = alpha_ij so that (A @ x)_j sums alpha_ij x_i over parents of j
    return sparse.csr_matrix((network.alpha, (network.dst, network.src)), shape=(network.n, network.n))


def meanfield_rhs(network: PropagationNetwork, x, A=None) -> np.ndarray:
    """x_j' = (1 - x_j) sum_i alpha_ij x_i - gamma_j x_j."""
    x = np.asarray(x, dtype=float)
    if A is None:
        A = _rate_matrix(network)
    return (1.0 - x) * (A @ x) - network.gamma * x


@dataclass
class MeanFieldResult:
    times: np.ndarray
    x: np.ndarray  # (len(times), n)

    @property
    def mu(self) -> np.ndarray:
        return self.x.sum(axis=1)

    @property
    def marginals(self) -> np.ndarray:
        return self.x


def meanfield_solve(network: PropagationNetwork, sources, T: float, step: float | None = None,
                    grid=None) -> MeanFieldResult:
    """Classical fourth-order Runge-Kutta on a uniform grid, clamped to [0, 1].

    ``step`` defaults to T / 2000.  If ``grid`` is given the solution is
    sampled there (piecewise-linear interpolation between RK steps).
    """
    if step is None:
        step = T / 2000.0
    K = int(round(T / step))
    if K < 1:
        raise ValueError("step larger than the horizon")
    h = T / K
    A = _rate_matrix(network)
    x = source_indicator(network, sources).astype(float)
    xs = np.empty((K + 1, network.n))
    xs[0] = x
    for k in range(K):
        k1 = meanfield_rhs(network, x, A)
        k2 = meanfield_rhs(network, x + 0.5 * h * k1, A)
        k3 = meanfield_rhs(network, x + 0.5 * h * k2, A)
        k4 = meanfield_rhs(network, x + h * k3, A)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(x < -0.01) or np.any(x > 1.01):
            raise StepTooLargeError(f"RK4 step {h:g} left [0, 1] at t={(k + 1) * h:g}; reduce the step")
        x = np.clip(x, 0.0, 1.0)
        xs[k + 1] = x
    times = h * np.arange(K + 1)
    if grid is not None:
        grid = np.asarray(grid, float)
        xs = np.stack([np.interp(grid, times, xs[:, i]) for i in range(network.n)], axis=1)
        times = grid
    return MeanFieldResult(times, xs)


# ---------------------------------------------------------------------------
# exact cascades


@dataclass
class CascadeRecord:
    """Events of one exact cascade; ``kinds`` is +1 for activation, -1 for recovery."""

    times: np.ndarray
    nodes: np.ndarray
    kinds: np.ndarray
    T: float
    sources: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def state_at(self, n: int, t: float) -> np.ndarray:
        X = np.zeros(n, np.int8)
        X[self.sources] = 1
        k = np.searchsorted(self.times, t, side="right")
        for node, kind in zip(self.nodes[:k], self.kinds[:k]):
            X[node] = 1 if kind > 0 else 0
        return X


def _kernel_args(network: PropagationNetwork):
    return (network.n, np.ascontiguousarray(network.parent_ptr), np.ascontiguousarray(network.src),
            np.ascontiguousarray(network.alpha), np.ascontiguousarray(network.child_ptr),
            np.ascontiguousarray(network.child_dst), np.ascontiguousarray(network.gamma))


def gillespie_simulate(network: PropagationNetwork, sources, T: float, rng=None) -> CascadeRecord:
    """One exact continuous-time cascade up to T."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x0 = source_indicator(network, sources)
    n, pptr, src, alpha, cptr, cdst, gamma = _kernel_args(network)
    k, t, nodes, kinds = kern.gillespie_run(rng, n, pptr, src, alpha, cptr, cdst, gamma, x0, float(T),
                                            np.empty(64), np.empty(64, np.int64), np.empty(64, np.int8))
    return CascadeRecord(t[:k].copy(), nodes[:k].copy(), kinds[:k].astype(np.int64), float(T),
                         np.flatnonzero(x0))


@dataclass
class EmpiricalMarginals:
    times: np.ndarray
    marginals: np.ndarray  # (len(times), n)
    mu: np.ndarray
    mu_var: np.ndarray  # sample variance of the per-cascade active count
    runs: int
    seed: int | None = None

    @property
    def marginal_se(self) -> np.ndarray:
        p = self.marginals
        return np.sqrt(p * (1 - p) / self.runs)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(self.mu_var / self.runs)


def _summarise(grid, counts, mu_sum, mu_sumsq, runs, seed=None) -> EmpiricalMarginals:
    marg = counts / runs
    mu = marg.sum(axis=1)
    var = np.zeros_like(mu) if runs < 2 else (mu_sumsq - mu_sum ** 2 / runs) / (runs - 1)
    return EmpiricalMarginals(np.asarray(grid, float), marg, mu, np.maximum(var, 0.0), runs, seed)


def empirical_marginals(cascades, n: int, grid) -> EmpiricalMarginals:
    """Fraction of cascades in which each node is active at each grid time (right-continuous)."""
    cascades = list(cascades)
    if not cascades:
        raise ValueError("no cascades")
    grid = np.asarray(grid, float)
    K1 = grid.size
    counts = np.zeros((K1, n), np.int64)
    mu_sum = np.zeros(K1)
    mu_sumsq = np.zeros(K1)
    for c in cascades:
        diff = np.zeros((K1 + 1, n), np.int64)
        x0 = np.zeros(n, np.int64)
        x0[c.sources] = 1
        g = np.searchsorted(grid, c.times, side="left")
        keep = g < K1
        np.add.at(diff, (g[keep], c.nodes[keep]), c.kinds[keep])
        active = np.cumsum(diff[:K1], axis=0) + x0
        counts += active
        m = active.sum(axis=1)
        mu_sum += m
        mu_sumsq += m.astype(float) ** 2
    return _summarise(grid, counts, mu_sum, mu_sumsq, len(cascades))


def monte_carlo_marginals(network: PropagationNetwork, sources, T: float, grid, runs: int = 10_000,
                          seed=0, workers: int = 1) -> EmpiricalMarginals:
    """Ground-truth curves from ``runs`` exact cascades (compiled, block-parallel)."""
    if runs < 1:
        raise ValueError("need at least one cascade")
    x0 = source_indicator(network, sources)
    seed = resolve_seed(seed)
    grid = np.asarray(grid, float)
    K1 = grid.size
    args = _kernel_args(network)

    def block(rng, b, size):
        diff = np.zeros((K1 + 1, network.n), np.int64)
        s = np.zeros(K1)
        ss = np.zeros(K1)
        kern.gillespie_block(rng, size, *args, x0, float(T), grid, diff, s, ss)
        return diff, s, ss

    parts = run_blocks(block, runs, seed, "gillespie", workers)
    diff = sum(p[0] for p in parts)
    counts = np.cumsum(diff[:K1], axis=0) + runs * x0.astype(np.int64)
    return _summarise(grid, counts, sum(p[1] for p in parts), sum(p[2] for p in parts), runs, seed)


# ---------------------------------------------------------------------------
# cascade dump


def write_cascades(cascades, path, seed=None, config_hash: str = "") -> None:
    """One event per line ``time node type``; cascades separated by ``# cascade k`` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# seed={seed} config={config_hash}\n")
        for k, c in enumerate(cascades):
            fh.write(f"# cascade {k} T={c.T!r} sources={','.join(str(int(s)) for s in c.sources)}\n")
            for t, node, kind in zip(c.times, c.nodes, c.kinds):
                fh.write(f"{float(t)!r} {int(node)} {'activated' if kind > 0 else 'recovered'}\n")


def read_cascades(path) -> list[CascadeRecord]:
    out = []
    cur = None
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("# cascade"):
                fields = dict(tok.split("=", 1) for tok in line.split()[3:])
                srcs = np.array([int(s) for s in fields.get("sources", "").split(",") if s], np.int64)
                cur = ([], [], [], float(fields["T"]), srcs)
                out.append(cur)
                continue
            if line.startswith("#"):
                continue
            if cur is None:
                raise ValueError(f"{path}:{no}: event before any cascade header")
            tok = line.split()
            if len(tok) != 3 or tok[2] not in ("activated", "recovered"):
                raise ValueError(f"{path}:{no}: expected 'time node activated|recovered'")
            cur[0].append(float(tok[0]))
            cur[1].append(int(tok[1]))
            cur[2].append(1 if tok[2] == "activated" else -1)
    return [CascadeRecord(np.array(t), np.array(nd, np.int64), np.array(k, np.int64), T, s)
            for t, nd, k, T, s in out]
