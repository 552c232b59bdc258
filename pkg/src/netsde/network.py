"""Heterogeneous propagation networks, synthetic generators and edge-list I/O.

Edges are stored in canonical order: grouped by target node and, within a
target, by increasing source node.  The position of an edge in that order is
its index in the activation part of the jump vector, so ``network.src[e]``,
``network.dst[e]`` and ``network.alpha[e]`` all refer to the same Poisson
process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

__all__ = [
    "NetworkError",
    "PropagationNetwork",
    "GeneratorConfig",
    "build_network",
    "validate_sources",
    "generate",
    "generate_erdos_renyi",
    "generate_small_world",
    "generate_scale_free",
    "erdos_renyi_edge_count",
    "read_network",
    "write_network",
    "read_sources",
    "write_sources",
    "random_sources",
]


class NetworkError(ValueError):
    """Invalid network structure, generator configuration or file."""


@dataclass(frozen=True, eq=False)
class PropagationNetwork:
    """Directed network with per-edge activation and per-node recovery rates.

    Instances are immutable; build them with :func:`build_network`.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    # CSR layouts: parents of j are src[parent_ptr[j]:parent_ptr[j+1]] (edges are
    # contiguous per target); children of i are child_dst[child_ptr[i]:child_ptr[i+1]]
    # with the matching edge indices in child_edge.
    parent_ptr: np.ndarray = field(repr=False)
    child_ptr: np.ndarray = field(repr=False)
    child_dst: np.ndarray = field(repr=False)
    child_edge: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return int(self.src.shape[0])

    @property
    def has_recovery(self) -> bool:
        return bool(np.any(self.gamma > 0))

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(a)) for i, j, a in zip(self.src, self.dst, self.alpha)]

    def parents(self, j: int) -> np.ndarray:
        """Parents of ``j`` in increasing order."""
        return self.src[self.parent_ptr[j]:self.parent_ptr[j + 1]]

    def parent_edges(self, j: int) -> np.ndarray:
        return np.arange(self.parent_ptr[j], self.parent_ptr[j + 1])

    def children(self, i: int) -> np.ndarray:
        return self.child_dst[self.child_ptr[i]:self.child_ptr[i + 1]]

    def child_edges(self, i: int) -> np.ndarray:
        return self.child_edge[self.child_ptr[i]:self.child_ptr[i + 1]]

    @property
    def process_rates(self) -> np.ndarray:
        """Intensities of all n + m driving processes: recoveries first, then edges."""
        return np.concatenate([self.gamma, self.alpha])

    def out_degree(self) -> np.ndarray:
        return np.diff(self.child_ptr)

    def in_degree(self) -> np.ndarray:
        return np.diff(self.parent_ptr)

    def total_degree(self) -> np.ndarray:
        return self.out_degree() + self.in_degree()

    def with_recovery(self, gamma) -> "PropagationNetwork":
        return build_network(self.n, zip(self.src, self.dst, self.alpha), gamma)

    def check_consistency(self) -> None:
        """O(m) check that parent and child adjacency are transposes of the edge list."""
        m = self.m
        if np.any(np.diff(self.parent_ptr) < 0) or self.parent_ptr[-1] != m:
            raise NetworkError("parent pointers inconsistent")
        for j in range(self.n):
            lo, hi = self.parent_ptr[j], self.parent_ptr[j + 1]
            if np.any(self.dst[lo:hi] != j) or np.any(np.diff(self.src[lo:hi]) <= 0):
                raise NetworkError(f"parent block of node {j} is not canonical")
        seen = np.zeros(m, dtype=np.int64)
        for i in range(self.n):
            for e in self.child_edges(i):
                if self.src[e] != i:
                    raise NetworkError(f"child list of node {i} references edge {e}")
                seen[e] += 1
        if np.any(seen != 1):
            raise NetworkError("child adjacency does not cover every edge exactly once")

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        for arr in (self.src, self.dst, self.alpha, self.gamma):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PropagationNetwork):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.gamma, other.gamma)
        )

    __hash__ = None  # type: ignore[assignment]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def build_network(n: int, edges: Iterable[Sequence], recovery=None) -> PropagationNetwork:
    """Build a network from ``(i, j, alpha)`` triples and optional recovery rates.

    Edges are reordered canonically (by target, then source).
    """
    n = int(n)
    if n < 1:
        raise NetworkError("network needs at least one node")
    triples = [(int(e[0]), int(e[1]), float(e[2])) for e in edges]
    seen = set()
    for i, j, a in triples:
        if not (0 <= i < n and 0 <= j < n):
            raise NetworkError(f"edge ({i}, {j}) has a node index outside [0, {n})")
        if i == j:
            raise NetworkError(f"self-loop on node {i}")
        if (i, j) in seen:
            raise NetworkError(f"duplicate edge ({i}, {j})")
        if not (a > 0 and math.isfinite(a)):
            raise NetworkError(f"edge ({i}, {j}) has non-positive rate {a}")
        seen.add((i, j))

    if recovery is None:
        gamma = np.zeros(n)
    else:
        gamma = np.array(recovery, dtype=float).reshape(-1)
        if gamma.shape[0] != n:
            raise NetworkError(f"expected {n} recovery rates, got {gamma.shape[0]}")
        if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
            raise NetworkError("recovery rates must be finite and non-negative")

    triples.sort(key=lambda t: (t[1], t[0]))
    m = len(triples)
    src = np.array([t[0] for t in triples], dtype=np.int64)
    dst = np.array([t[1] for t in triples], dtype=np.int64)
    alpha = np.array([t[2] for t in triples], dtype=float)

    parent_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n), out=parent_ptr[1:])
    order = np.lexsort((dst, src)) if m else np.zeros(0, dtype=np.int64)
    child_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=child_ptr[1:])

    return PropagationNetwork(
        n=n,
        src=_frozen(src),
        dst=_frozen(dst),
        alpha=_frozen(alpha),
        gamma=_frozen(gamma.astype(float)),
        parent_ptr=_frozen(parent_ptr),
        child_ptr=_frozen(child_ptr),
        child_dst=_frozen(dst[order].copy()),
        child_edge=_frozen(order.astype(np.int64)),
    )


def validate_sources(network: PropagationNetwork, sources) -> np.ndarray:
    s = np.asarray(list(sources) if not isinstance(sources, np.ndarray) else sources)
    if s.size == 0:
        raise NetworkError("source set is empty")
    if s.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(s, 1), 0)):
            raise NetworkError("source indices must be integers")
    s = s.astype(np.int64).reshape(-1)
    if np.any(s < 0) or np.any(s >= network.n):
        raise NetworkError(f"source index outside [0, {network.n})")
    if np.unique(s).size != s.size:
        raise NetworkError("duplicate source index")
    return s


def source_indicator(network: PropagationNetwork, sources) -> np.ndarray:
    x = np.zeros(network.n, dtype=np.int8)
    x[validate_sources(network, sources)] = 1
    return x


# ---------------------------------------------------------------------------
# generators

RateDistribution = Union[tuple, Callable[[np.random.Generator, int], np.ndarray], None]


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of a synthetic network family.

    ``rates`` and ``recovery`` are either ``(low, high)`` uniform ranges or
    callables ``f(rng, size) -> array``; ``recovery=None`` means no recovery.
    """

    family: str
    n: int
    kappa: int = 1
    p: float = 0.2
    rates: RateDistribution = (0.1, 1.0)
    recovery: RateDistribution = None
    seed: int | None = 0

    def __post_init__(self):
        fam = _FAMILY_ALIASES.get(self.family)
        if fam is None:
            raise NetworkError(f"unknown network family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if self.n < 2:
            raise NetworkError("n must be at least 2")
        if int(self.kappa) != self.kappa or self.kappa < 1:
            raise NetworkError("kappa must be a positive integer")
        if not 0.0 <= self.p <= 1.0:
            raise NetworkError("shortcut probability must lie in [0, 1]")


_FAMILY_ALIASES = {
    "erdos-renyi": "erdos-renyi",
    "er": "erdos-renyi",
    "small-world": "small-world",
    "sw": "small-world",
    "scale-free": "scale-free",
    "sf": "scale-free",
}


def _draw(dist: RateDistribution, rng: np.random.Generator, size: int) -> np.ndarray:
    if dist is None:
        return np.zeros(size)
    if callable(dist):
        return np.asarray(dist(rng, size), dtype=float)
    lo, hi = dist
    return rng.uniform(lo, hi, size)


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def erdos_renyi_edge_count(n: int, kappa: int = 1) -> int:
    """Integer closest to ``n * log(kappa * n) / 2``."""
    return _round_half_away(n * math.log(kappa * n) / 2.0)


def _finish(cfg: GeneratorConfig, rng, pairs: list[tuple[int, int]]) -> PropagationNetwork:
    alpha = _draw(cfg.rates, rng, len(pairs))
    if np.any(alpha <= 0):
        raise NetworkError("rate distribution produced a non-positive rate")
    gamma = _draw(cfg.recovery, rng, cfg.n)
    return build_network(cfg.n, [(i, j, a) for (i, j), a in zip(pairs, alpha)], gamma)


def generate_erdos_renyi(cfg: GeneratorConfig) -> PropagationNetwork:
    """Directed G(n, m) with m = round(n log(kappa n) / 2) distinct ordered pairs."""
    if cfg.family != "erdos-renyi":
        raise NetworkError("config is not an Erdos-Renyi config")
    n = cfg.n
    m = erdos_renyi_edge_count(n, cfg.kappa)
    if m > n * (n - 1):
        raise NetworkError(f"{m} edges do not fit in a simple digraph on {n} nodes")
    rng = np.random.default_rng(cfg.seed)
    flat = rng.choice(n * (n - 1), size=m, replace=False)
    i = flat // (n - 1)
    r = flat % (n - 1)
    j = r + (r >= i)
    return _finish(cfg, rng, list(zip(i.tolist(), j.tolist())))


def _both_ways(links: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    out = []
    for a, b in links:
        out.append((a, b))
        out.append((b, a))
    return out


def generate_small_world(cfg: GeneratorConfig) -> PropagationNetwork:
    """Ring of kappa nearest successors plus one random shortcut per node w.p. ``p``."""
    if cfg.family != "small-world":
        raise NetworkError("config is not a small-world config")
    n, k = cfg.n, int(cfg.kappa)
    if k >= n / 2:
        raise NetworkError(f"ring with kappa={k} on {n} nodes is degenerate")
    rng = np.random.default_rng(cfg.seed)
    nbrs = [set() for _ in range(n)]
    links = []
    for i in range(n):
        for d in range(1, k + 1):
            j = (i + d) % n
            links.append((i, j))
            nbrs[i].add(j)
            nbrs[j].add(i)
    for i in range(n):
        if rng.random() < cfg.p:
            candidates = [j for j in range(n) if j != i and j not in nbrs[i]]
            if not candidates:
                continue
            j = candidates[int(rng.integers(len(candidates)))]
            links.append((i, j))
            nbrs[i].add(j)
            nbrs[j].add(i)
    return _finish(cfg, rng, _both_ways(links))


def generate_scale_free(cfg: GeneratorConfig) -> PropagationNetwork:
    """Preferential attachment grown from a kappa-clique."""
    if cfg.family != "scale-free":
        raise NetworkError("config is not a scale-free config")
    n, k = cfg.n, int(cfg.kappa)
    if k >= n:
        raise NetworkError(f"kappa={k} must be smaller than n={n}")
    rng = np.random.default_rng(cfg.seed)
    degree = np.zeros(n, dtype=float)
    links = []
    for a in range(k):
        for b in range(a + 1, k):
            links.append((a, b))
            degree[a] += 1
            degree[b] += 1
    for v in range(k, n):
        w = degree[:v]
        total = w.sum()
        p = w / total if total > 0 else None
        targets = rng.choice(v, size=k, replace=False, p=p)
        for t in sorted(int(t) for t in targets):
            links.append((t, v))
            degree[t] += 1
            degree[v] += 1
    return _finish(cfg, rng, _both_ways(links))


_GENERATORS = {
    "erdos-renyi": generate_erdos_renyi,
    "small-world": generate_small_world,
    "scale-free": generate_scale_free,
}


def generate(cfg: GeneratorConfig) -> PropagationNetwork:
    return _GENERATORS[cfg.family](cfg)


def random_sources(n: int, size: int, seed=None) -> np.ndarray:
    if not 1 <= size <= n:
        raise NetworkError(f"cannot draw {size} sources from {n} nodes")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=size, replace=False)).astype(np.int64)


# ---------------------------------------------------------------------------
# file formats


def _fmt(x: float) -> str:
    return repr(float(x))


def write_network(network: PropagationNetwork, path, shape=None, cap=None) -> None:
    """Write the canonical edge list.

    ``shape`` (per edge) and ``cap`` (per node) add the optional Weibull-shape
    and throttling columns.
    """
    lines = [f"{network.n} {network.m}"]
    for e in range(network.m):
        row = f"{network.src[e]} {network.dst[e]} {_fmt(network.alpha[e])}"
        if shape is not None:
            row += f" {_fmt(shape[e])}"
        lines.append(row)
    if network.has_recovery or cap is not None:
        for i in range(network.n):
            row = f"{i} {_fmt(network.gamma[i])}"
            if cap is not None:
                row += f" {_fmt(cap[i])}"
            lines.append(row)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse(path):
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    rows = [(no, line.split()) for no, line in enumerate(raw, 1)]
    rows = [(no, tok) for no, tok in rows if tok and not tok[0].startswith("#")]
    if not rows:
        raise NetworkError(f"{path}: empty file")
    no, head = rows[0]
    try:
        n, m = int(head[0]), int(head[1])
        if len(head) != 2:
            raise ValueError
    except (ValueError, IndexError):
        raise NetworkError(f"{path}:{no}: header must be 'n m'") from None
    body = rows[1:]
    if len(body) < m:
        where = body[-1][0] + 1 if body else no + 1
        raise NetworkError(f"{path}:{where}: header announces {m} edges but only {len(body)} edge lines follow")
    edges, shape = [], []
    for no, tok in body[:m]:
        if len(tok) not in (3, 4):
            raise NetworkError(f"{path}:{no}: expected 'i j alpha [beta_w]'")
        try:
            edges.append((int(tok[0]), int(tok[1]), float(tok[2])))
            shape.append(float(tok[3]) if len(tok) == 4 else 1.0)
        except ValueError:
            raise NetworkError(f"{path}:{no}: malformed edge line") from None
    nodes = body[m:]
    gamma = np.zeros(n)
    cap = np.full(n, np.inf)
    if nodes:
        if len(nodes) != n:
            raise NetworkError(f"{path}:{nodes[0][0]}: expected {n} node lines, found {len(nodes)}")
        seen = set()
        for no, tok in nodes:
            if len(tok) not in (2, 3):
                raise NetworkError(f"{path}:{no}: expected 'i gamma [cap]'")
            try:
                i = int(tok[0])
                g = float(tok[1])
                c = float(tok[2]) if len(tok) == 3 else np.inf
            except ValueError:
                raise NetworkError(f"{path}:{no}: malformed node line") from None
            if not 0 <= i < n or i in seen:
                raise NetworkError(f"{path}:{no}: bad or repeated node index {i}")
            seen.add(i)
            gamma[i], cap[i] = g, c
    try:
        net = build_network(n, edges, gamma)
    except NetworkError as exc:
        raise NetworkError(f"{path}: {exc}") from None
    # shape column follows the file's edge order, re-key to canonical order
    by_pair = {(i, j): s for (i, j, _), s in zip(edges, shape)}
    shape_arr = np.array([by_pair[(int(i), int(j))] for i, j in zip(net.src, net.dst)])
    return net, shape_arr, cap


def read_network(path) -> PropagationNetwork:
    return _parse(path)[0]


def read_rate_columns(path) -> tuple[PropagationNetwork, np.ndarray, np.ndarray]:
    """Network plus the per-edge Weibull shapes and per-node caps (inf = none)."""
    return _parse(path)


def read_sources(path) -> np.ndarray:
    out = []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                out.append(int(s))
            except ValueError:
                raise NetworkError(f"{path}:{no}: not a node index: {s!r}") from None
    return np.array(out, dtype=np.int64)


def write_sources(sources, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(f"{int(s)}\n" for s in sources))
