"""Quadratic nearest-neighbour field on a fixed graph.

The energy of a configuration is ``(K/2) sum_<ij> d(w_i, w_j)**2``.  With some
nodes pinned to zero and real-valued ``w`` this is a Gaussian free field,
whose partition function is available in closed form from the graph
Laplacian restricted to the free nodes:

    log Z = (n_free / 2) log(2 pi / K) - (1/2) log det L_free

The Monte Carlo estimators and the Gibbs sampler exist to check that formula.
For angle-valued ``w`` only the Monte Carlo route is offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "LatticeGraph",
    "SingularLaplacianError",
    "field_energy",
    "gibbs_sample",
    "log_partition_exact",
    "log_partition_mc",
    "parse_graph",
]


class SingularLaplacianError(ValueError):
    """Some free node has no path to a pinned node."""


@dataclass(frozen=True)
class LatticeGraph:
    n: int
    edges: tuple[tuple[int, int], ...]
    coupling: float = 1.0
    pinned: frozenset[int] = frozenset({0})
    domain: str = "real"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if self.domain not in ("real", "circular"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.coupling < 0:
            raise ValueError("coupling must be >= 0")
        seen = set()
        edges = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            edges.append(key)
        pinned = frozenset(int(p) for p in self.pinned)
        if any(not 0 <= p < self.n for p in pinned):
            raise ValueError("pinned node out of range")
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "pinned", pinned)

    @property
    def free(self) -> np.ndarray:
        return np.array([i for i in range(self.n) if i not in self.pinned], dtype=int)

    def laplacian(self) -> np.ndarray:
        lap = np.zeros((self.n, self.n))
        for i, j in self.edges:
            lap[i, i] += 1
            lap[j, j] += 1
            lap[i, j] -= 1
            lap[j, i] -= 1
        return lap

    def free_laplacian(self) -> np.ndarray:
        f = self.free
        return self.laplacian()[np.ix_(f, f)]

    def unanchored(self) -> list[int]:
        """Nodes with no path to any pinned node."""
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        reached = set(self.pinned)
        stack = list(self.pinned)
        while stack:
            for j in adj[stack.pop()]:
                if j not in reached:
                    reached.add(j)
                    stack.append(j)
        return [i for i in range(self.n) if i not in reached]


def _pair_diffs(graph: LatticeGraph, w: np.ndarray) -> np.ndarray:
    e = np.array(graph.edges, dtype=int).reshape(-1, 2)
    d = w[..., e[:, 0]] - w[..., e[:, 1]]
    if graph.domain == "circular":
        d = math.pi - np.mod(math.pi - d, 2.0 * math.pi)
    return d


def field_energy(graph: LatticeGraph, w) -> float | np.ndarray:
    """``(K/2) sum over edges of the squared difference``; vectorised over
    leading axes of ``w``."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != graph.n:
        raise ValueError(f"config has {w.shape[-1]} values, graph has {graph.n} nodes")
    e = 0.5 * graph.coupling * (_pair_diffs(graph, w) ** 2).sum(axis=-1)
    return float(e) if e.ndim == 0 else e


def _require_anchored(graph: LatticeGraph) -> None:
    if graph.domain == "real" and not graph.pinned:
        raise SingularLaplacianError("real domain needs at least one pinned node")
    loose = graph.unanchored()
    if loose:
        raise SingularLaplacianError(f"nodes {loose} have no path to a pinned node")


def log_partition_exact(graph: LatticeGraph) -> float:
    if graph.domain != "real":
        raise ValueError("closed form exists only for the real domain")
    _require_anchored(graph)
    if not graph.coupling > 0:
        raise SingularLaplacianError("coupling must be > 0")
    f = graph.free
    if f.size == 0:
        return 0.0
    chol = np.linalg.cholesky(graph.free_laplacian())
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return float(0.5 * f.size * math.log(2.0 * math.pi / graph.coupling) - 0.5 * logdet)


def _log_mean_jackknife(logw: np.ndarray) -> tuple[float, float]:
    """``log mean exp(logw)`` and its jackknife standard error."""
    s = logw.size
    top = logw.max()
    wts = np.exp(logw - top)
    total = wts.sum()
    est = top + math.log(total / s)
    loo = np.log(np.maximum(total - wts, np.finfo(float).tiny) / (s - 1))
    se = math.sqrt((s - 1) / s * ((loo - loo.mean()) ** 2).sum())
    return float(est), float(se)


def log_partition_mc(graph: LatticeGraph, samples: int = 100_000, seed: int = 0,
                     chunk: int = 100_000) -> tuple[float, float]:
    """Monte Carlo ``(log Z, standard error)``.

    Real domain: importance sampling with a standard normal proposal on the
    free nodes.  Circular domain: uniform angles on the free nodes.
    """
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    if graph.domain == "real":
        _require_anchored(graph)
    f = graph.free
    if f.size == 0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    parts = []
    for start in range(0, samples, chunk):
        k = min(chunk, samples - start)
        w = np.zeros((k, graph.n))
        if graph.domain == "real":
            z = rng.standard_normal((k, f.size))
            w[:, f] = z
            # log target - log proposal
            logw = (-field_energy(graph, w) + 0.5 * (z * z).sum(axis=1)
                    + 0.5 * f.size * math.log(2.0 * math.pi))
        else:
            w[:, f] = rng.uniform(0.0, 2.0 * math.pi, size=(k, f.size))
            logw = -field_energy(graph, w) + f.size * math.log(2.0 * math.pi)
        parts.append(np.atleast_1d(logw))
    return _log_mean_jackknife(np.concatenate(parts))


@numba.njit(cache=True)
def _gibbs_sweeps(w, free, nbr_ptr, nbr_idx, scale, noise, out):
    for t in range(noise.shape[0]):
        for k in range(free.shape[0]):
            i = free[k]
            acc = 0.0
            for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
                acc += w[nbr_idx[p]]
            deg = nbr_ptr[i + 1] - nbr_ptr[i]
            w[i] = acc / deg + scale[k] * noise[t, k]
        out[t, :] = w


def gibbs_sample(graph: LatticeGraph, steps: int, seed: int = 0, init=None) -> np.ndarray:
    """Systematic-scan Gibbs sampler; returns the configuration after each sweep.

    Each free node is redrawn from its conditional: a normal with the mean of
    its neighbours and variance ``1 / (K * degree)``.  One step is one sweep
    over all free nodes; the result has shape ``(steps, n)``.
    """
    if graph.domain != "real":
        raise ValueError("Gibbs sampling is implemented for the real domain")
    _require_anchored(graph)
    if not graph.coupling > 0:
        raise ValueError("coupling must be > 0")
    adj = [[] for _ in range(graph.n)]
    for i, j in graph.edges:
        adj[i].append(j)
        adj[j].append(i)
    ptr = np.zeros(graph.n + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(a) for a in adj])
    idx = np.array([j for a in adj for j in a], dtype=np.int64)
    free = graph.free.astype(np.int64)
    scale = np.array([1.0 / math.sqrt(graph.coupling * len(adj[i])) for i in free])
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((steps, free.size))
    w = np.zeros(graph.n) if init is None else np.array(init, dtype=float)
    w[list(graph.pinned)] = 0.0
    out = np.empty((steps, graph.n))
    _gibbs_sweeps(w, free, ptr, idx, scale, noise, out)
    return out


def parse_graph(text: str, domain: str = "real") -> LatticeGraph:
    """Edge-list text: header ``n K pinned=0,3`` then one ``i j`` pair per line.

    Blank lines and ``#`` comments are skipped; ``pinned=`` may be empty.
    """
    rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    rows = [(k, r) for k, r in enumerate(rows, start=1) if r]
    if not rows:
        raise ValueError("empty graph file")
    lineno, head = rows[0]
    parts = head.split()
    try:
        n, coupling = int(parts[0]), float(parts[1])
        pinned: frozenset[int] = frozenset()
        for extra in parts[2:]:
            key, _, value = extra.partition("=")
            if key == "pinned":
                pinned = frozenset(int(v) for v in value.split(",") if v)
            elif key == "domain":
                domain = value
            else:
                raise ValueError(f"unknown header field {key!r}")
    except (IndexError, ValueError) as exc:
        raise ValueError(f"line {lineno}: bad header {head!r}: {exc}") from None
    edges = []
    for lineno, row in rows[1:]:
        try:
            i, j = (int(v) for v in row.split())
        except ValueError:
            raise ValueError(f"line {lineno}: expected 'i j', got {row!r}") from None
        edges.append((i, j))
    return LatticeGraph(n, tuple(edges), coupling, pinned, domain)
