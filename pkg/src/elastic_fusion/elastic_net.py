"""Elastic-ring (Durbin-Willshaw) solver for the planar TSP.

A closed ring of ``m`` nodes ``w_i`` is pulled toward the cities through a
Gaussian kernel of range ``lam`` and held together by a quadratic tension
``k_tension``.  The energy is

    E(w) = -lam**2 * sum_mu log sum_i exp(-|xi_mu - w_i|**2 / (2 lam**2))
           + (k_tension / 2) * sum_i |w_{i+1} - w_i|**2

with cyclic node index.  The range is annealed geometrically; as it shrinks
each city is captured by a node and the ring's order gives the tour.  The
area swept by the ring over the run is tracked as the run's description
cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .instance_io import Instance, Tour, make_tour

__all__ = [
    "ElasticParams",
    "RingState",
    "SolveTrace",
    "StageRecord",
    "anneal_solve",
    "default_params",
    "elastic_energy",
    "elastic_gradient",
    "extract_tour",
    "initial_ring",
    "swept_area_increment",
]


@dataclass(frozen=True)
class ElasticParams:
    """Solver settings.  ``None`` fields are filled from the instance by
    :func:`default_params`."""

    m_nodes: int | None = None
    k_tension: float = 1.0
    lambda0: float | None = None
    lambda_decay: float = 0.99
    steps_per_stage: int = 5
    step_size: float = 0.02
    lambda_min: float | None = None
    max_stages: int = 10_000
    capture_tol: float | None = None

    def validate(self, n_cities: int) -> None:
        if self.m_nodes is None or self.lambda0 is None or self.lambda_min is None:
            raise ValueError("unresolved parameters; call default_params first")
        if self.m_nodes < n_cities:
            raise ValueError(f"m_nodes={self.m_nodes} < number of cities {n_cities}")
        for name in ("k_tension", "lambda0", "step_size", "lambda_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.lambda_decay < 1:
            raise ValueError("lambda_decay must lie in (0, 1)")
        if self.steps_per_stage < 1 or self.max_stages < 1:
            raise ValueError("steps_per_stage and max_stages must be >= 1")
        if self.capture_tol is not None and not self.capture_tol > 0:
            raise ValueError("capture_tol must be > 0")


def _scale(instance: Instance) -> float:
    diag = instance.bbox_diagonal()
    # a single city has no extent; fall back to a unit length scale
    return diag if diag > 0 else 1.0


def default_params(instance: Instance, params: ElasticParams | None = None) -> ElasticParams:
    """Resolve instance-dependent defaults (m = ceil(2.5 N), lambda0, lambda_min)."""
    p = params or ElasticParams()
    n = instance.n
    m = p.m_nodes if p.m_nodes is not None else max(math.ceil(2.5 * n), 3)
    lam0 = p.lambda0 if p.lambda0 is not None else 0.5 * _scale(instance) / math.sqrt(n)
    lam_min = p.lambda_min if p.lambda_min is not None else 1e-3 * lam0
    cap = p.capture_tol if p.capture_tol is not None else lam_min
    return replace(p, m_nodes=m, lambda0=lam0, lambda_min=lam_min, capture_tol=cap)


@dataclass
class RingState:
    w: np.ndarray
    lam: float
    iteration: int = 0
    swept_area: float = 0.0


@dataclass(frozen=True)
class StageRecord:
    stage: int
    lam: float
    energy: float
    swept_area: float
    max_capture_dist: float


@dataclass
class SolveTrace:
    seed: int
    params: ElasticParams
    records: list[StageRecord]
    tour: Tour
    final: RingState
    converged: bool
    snapshots: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def non_convergence(self) -> bool:
        return not self.converged

    @property
    def swept_area(self) -> float:
        return self.final.swept_area


def _soft_assign(cities: np.ndarray, w: np.ndarray, lam: float):
    diff = cities[:, None, :] - w[None, :, :]
    logits = -(diff ** 2).sum(axis=2) / (2.0 * lam * lam)
    top = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - top)
    tot = ex.sum(axis=1, keepdims=True)
    return diff, ex / tot, top[:, 0] + np.log(tot[:, 0])


def elastic_energy(instance: Instance, w, lam: float, k_tension: float) -> float:
    """Ring energy; the log-sum-exp over nodes is shifted by its maximum."""
    if not lam > 0:
        raise ValueError("lam must be > 0")
    w = np.asarray(w, dtype=float).reshape(-1, 2)
    _, _, lse = _soft_assign(instance.coords, w, lam)
    seg = np.roll(w, -1, axis=0) - w
    return float(-lam * lam * lse.sum() + 0.5 * k_tension * (seg ** 2).sum())


def elastic_gradient(instance: Instance, w, lam: float, k_tension: float) -> np.ndarray:
    """Analytic gradient, shape ``(m, 2)``.

    dE/dw_i = -sum_mu L[mu, i] (xi_mu - w_i) + K (2 w_i - w_{i-1} - w_{i+1})
    where each row of ``L`` is the softmax of the city's kernel over nodes.
    """
    if not lam > 0:
        raise ValueError("lam must be > 0")
    w = np.asarray(w, dtype=float).reshape(-1, 2)
    diff, assign, _ = _soft_assign(instance.coords, w, lam)
    pull = (assign[:, :, None] * diff).sum(axis=0)
    tension = 2.0 * w - np.roll(w, 1, axis=0) - np.roll(w, -1, axis=0)
    return -pull + k_tension * tension


@numba.njit(cache=True, inline="always")
def _tri(ax, ay, bx, by, cx, cy):
    return 0.5 * abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


def swept_area_increment(w_prev, w_next) -> float:
    """Unsigned area swept by the ring edges moving from ``w_prev`` to ``w_next``.

    Each edge ``(i, i+1)`` sweeps the quad ``prev_i, prev_{i+1}, next_{i+1},
    next_i``, split into two triangles.  A two-node ring has a single edge.
    """
    a = np.asarray(w_prev, dtype=float).reshape(-1, 2)
    b = np.asarray(w_next, dtype=float).reshape(-1, 2)
    if a.shape != b.shape:
        raise ValueError(f"node count mismatch: {len(a)} vs {len(b)}")
    return _swept(a, b)


@numba.njit(cache=True)
def _swept(a, b):
    m = a.shape[0]
    if m < 2:
        return 0.0
    n_edges = 1 if m == 2 else m
    total = 0.0
    for i in range(n_edges):
        j = (i + 1) % m
        total += _tri(a[i, 0], a[i, 1], a[j, 0], a[j, 1], b[j, 0], b[j, 1])
        total += _tri(a[i, 0], a[i, 1], b[j, 0], b[j, 1], b[i, 0], b[i, 1])
    return total



@numba.njit(cache=True)
def _gradient_into(cities, w, lam, k, grad, logits):
    n = cities.shape[0]
    m = w.shape[0]
    inv = 1.0 / (2.0 * lam * lam)
    for i in range(m):
        prv = (i - 1) % m
        nxt = (i + 1) % m
        grad[i, 0] = k * (2.0 * w[i, 0] - w[prv, 0] - w[nxt, 0])
        grad[i, 1] = k * (2.0 * w[i, 1] - w[prv, 1] - w[nxt, 1])
    for mu in range(n):
        top = -np.inf
        for i in range(m):
            dx = cities[mu, 0] - w[i, 0]
            dy = cities[mu, 1] - w[i, 1]
            logits[i] = -(dx * dx + dy * dy) * inv
            if logits[i] > top:
                top = logits[i]
        tot = 0.0
        for i in range(m):
            logits[i] = math.exp(logits[i] - top)
            tot += logits[i]
        for i in range(m):
            a = logits[i] / tot
            grad[i, 0] -= a * (cities[mu, 0] - w[i, 0])
            grad[i, 1] -= a * (cities[mu, 1] - w[i, 1])


@numba.njit(cache=True)
def _descend(cities, w, lam, k, eta, steps):
    """``steps`` gradient steps in place; returns the swept area."""
    m = w.shape[0]
    grad = np.empty_like(w)
    prev = np.empty_like(w)
    logits = np.empty(m)
    area = 0.0
    for _ in range(steps):
        _gradient_into(cities, w, lam, k, grad, logits)
        for i in range(m):
            prev[i, 0] = w[i, 0]
            prev[i, 1] = w[i, 1]
            w[i, 0] -= eta * grad[i, 0]
            w[i, 1] -= eta * grad[i, 1]
        area += _swept(prev, w)
    return area


@numba.njit(cache=True)
def _energy_and_capture(cities, w, lam, k):
    n = cities.shape[0]
    m = w.shape[0]
    inv = 1.0 / (2.0 * lam * lam)
    logits = np.empty(m)
    attract = 0.0
    worst = 0.0
    for mu in range(n):
        top = -np.inf
        for i in range(m):
            dx = cities[mu, 0] - w[i, 0]
            dy = cities[mu, 1] - w[i, 1]
            logits[i] = -(dx * dx + dy * dy) * inv
            if logits[i] > top:
                top = logits[i]
        tot = 0.0
        for i in range(m):
            tot += math.exp(logits[i] - top)
        attract += top + math.log(tot)
        # the largest logit belongs to the nearest node
        nearest = math.sqrt(-top / inv)
        if nearest > worst:
            worst = nearest
    tension = 0.0
    for i in range(m):
        j = (i + 1) % m
        dx = w[j, 0] - w[i, 0]
        dy = w[j, 1] - w[i, 1]
        tension += dx * dx + dy * dy
    return -lam * lam * attract + 0.5 * k * tension, worst


def initial_ring(instance: Instance, m_nodes: int, seed: int) -> np.ndarray:
    """Circle of radius 0.1 x bbox diagonal around the centroid, plus jitter."""
    radius = 0.1 * _scale(instance)
    centre = instance.coords.mean(axis=0)
    theta = 2.0 * np.pi * np.arange(m_nodes) / m_nodes
    w = centre + radius * np.column_stack([np.cos(theta), np.sin(theta)])
    rng = np.random.default_rng(seed)
    return w + rng.uniform(-1e-3 * radius, 1e-3 * radius, size=w.shape)


def anneal_solve(instance: Instance, params: ElasticParams | None = None, seed: int = 0,
                 record_rings: bool = False) -> SolveTrace:
    """Anneal the ring from ``lambda0`` down to ``lambda_min``.

    Each stage runs ``steps_per_stage`` gradient steps at fixed range and then
    multiplies the range by ``lambda_decay``.  The run stops early once every
    city lies within ``capture_tol`` of a node.
    """
    p = default_params(instance, params)
    p.validate(instance.n)
    cities = np.ascontiguousarray(instance.coords, dtype=float)
    w = initial_ring(instance, p.m_nodes, seed)
    lam = float(p.lambda0)
    area = 0.0
    it = 0
    records: list[StageRecord] = []
    snaps: list[np.ndarray] = [w.copy()] if record_rings else []
    captured = False
    for stage in range(p.max_stages):
        area += _descend(cities, w, lam, p.k_tension, p.step_size, p.steps_per_stage)
        it += p.steps_per_stage
        if not np.all(np.isfinite(w)):
            raise FloatingPointError("ring diverged; reduce step_size")
        energy, cap = _energy_and_capture(cities, w, lam, p.k_tension)
        records.append(StageRecord(stage, lam, energy, area, cap))
        if record_rings:
            snaps.append(w.copy())
        captured = cap <= p.capture_tol
        if captured or lam <= p.lambda_min:
            break
        lam *= p.lambda_decay
    converged = captured or lam <= p.lambda_min
    final = RingState(w, lam, it, area)
    return SolveTrace(seed, p, records, extract_tour(instance, final), final, converged, snaps)


def extract_tour(instance: Instance, ring) -> Tour:
    """Read a tour off the ring.

    Every city goes to its nearest node (lowest index on ties).  Cities are
    then ordered by node index and, within a node, by their projection onto
    the node's outgoing edge.
    """
    w = np.asarray(ring.w if isinstance(ring, RingState) else ring, dtype=float).reshape(-1, 2)
    cities = instance.coords
    d2 = ((cities[:, None, :] - w[None, :, :]) ** 2).sum(axis=2)
    node = d2.argmin(axis=1)  # argmin returns the first minimum
    edge = np.roll(w, -1, axis=0) - w
    proj = ((cities - w[node]) * edge[node]).sum(axis=1)
    order = np.lexsort((np.arange(len(cities)), proj, node))
    return make_tour(instance, order.tolist())
