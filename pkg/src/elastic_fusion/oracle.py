"""Exact TSP solvers for small instances.

Both solvers return the lexicographically smallest *canonical* optimal tour
(city 0 first, second entry smaller than the last), so their outputs can be
compared element for element.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instance_io import Instance, Tour, make_tour

__all__ = [
    "ENUMERATION_MAX_N",
    "HELD_KARP_MAX_N",
    "OracleResult",
    "canonical_order",
    "solve_enumeration",
    "solve_held_karp",
]

ENUMERATION_MAX_N = 10
HELD_KARP_MAX_N = 15

# lengths within this relative gap of the optimum count as ties
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class OracleResult:
    optimal_tour: Tour
    optimal_length: float
    method: str
    node_budget: int

    def to_json(self, instance: Instance) -> dict:
        return {
            "instance_name": instance.name,
            "method": self.method,
            "node_budget": self.node_budget,
            "optimal_length": self.optimal_length,
            "order": list(self.optimal_tour.order),
        }


def canonical_order(order: Sequence[int]) -> tuple[int, ...]:
    """Rotate so city 0 leads, then orient so the second entry is the smaller
    neighbour of city 0."""
    order = [int(i) for i in order]
    if not order:
        return ()
    k = order.index(min(order))
    rot = order[k:] + order[:k]
    if len(rot) > 2 and rot[-1] < rot[1]:
        rot = [rot[0]] + rot[:0:-1]
    return tuple(rot)


def _tol(length: float) -> float:
    return _TIE_RTOL * max(length, 1.0)


def _trivial(instance: Instance, method: str) -> OracleResult | None:
    if instance.n > 3:
        return None
    tour = make_tour(instance, range(instance.n))
    return OracleResult(tour, tour.length, method, instance.n)


def solve_enumeration(instance: Instance) -> OracleResult:
    """Exhaustive search over the (N-1)!/2 distinct cyclic orders (N <= 10)."""
    n = instance.n
    if n > ENUMERATION_MAX_N:
        raise ValueError(f"enumeration is capped at N={ENUMERATION_MAX_N}, got {n}")
    small = _trivial(instance, "enumeration")
    if small is not None:
        return small
    dist = instance.distance_matrix()
    # itertools yields permutations in lexicographic order
    perms = np.array(list(itertools.permutations(range(1, n))), dtype=np.intp)
    perms = perms[perms[:, 0] < perms[:, -1]]
    tours = np.column_stack([np.zeros(len(perms), dtype=np.intp), perms])
    lengths = dist[tours, np.roll(tours, -1, axis=1)].sum(axis=1)
    best = lengths.min()
    pick = int(np.flatnonzero(lengths <= best + _tol(best))[0])
    tour = make_tour(instance, tours[pick].tolist())
    return OracleResult(tour, tour.length, "enumeration", n)


def solve_held_karp(instance: Instance) -> OracleResult:
    """Held-Karp dynamic program over (subset, last city) states (N <= 15).

    ``g[S, j]`` is the shortest path that starts at city 0, visits exactly the
    cities of ``S`` (a subset of 1..N-1) and ends at ``j``.  The tour is rebuilt
    greedily: at each position the smallest next city that still admits an
    optimal completion is taken, the completion cost being ``g`` of the
    unvisited set read in reverse.
    """
    n = instance.n
    if n > HELD_KARP_MAX_N:
        raise ValueError(f"Held-Karp is capped at N={HELD_KARP_MAX_N}, got {n}")
    small = _trivial(instance, "held_karp")
    if small is not None:
        return small
    dist = instance.distance_matrix()
    k = n - 1  # city c >= 1 is bit c-1
    d = dist[1:, 1:]
    full = (1 << k) - 1
    g = np.full((1 << k, k), np.inf)
    for j in range(k):
        g[1 << j, j] = dist[0, j + 1]
    bits = np.arange(k)
    for mask in range(1, full + 1):
        members = bits[(mask >> bits) & 1 == 1]
        if members.size < 2:
            continue
        for j in members:
            prev = mask ^ (1 << j)
            g[mask, j] = (g[prev, members] + d[members, j]).min()
    closing = g[full] + dist[1:, 0]
    best = float(closing.min())
    tol = _tol(best)

    order = [0]
    cur, unvisited, prefix = 0, full, 0.0
    while unvisited:
        for c in range(k):
            if not (unvisited >> c) & 1:
                continue
            # remaining path: cur -> c -> (rest of unvisited) -> 0
            cost = prefix + dist[cur, c + 1] + g[unvisited, c]
            if cost <= best + tol:
                prefix += dist[cur, c + 1]
                cur = c + 1
                unvisited ^= 1 << c
                order.append(cur)
                break
        else:  # pragma: no cover - the optimum always admits a completion
            raise RuntimeError("tour reconstruction failed")
    tour = make_tour(instance, order)
    return OracleResult(tour, tour.length, "held_karp", n)
