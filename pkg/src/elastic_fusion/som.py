"""Kohonen self-organizing map on a one-dimensional node graph.

Node ``r`` holds a feature value ``w[r]``: a scalar, a point, or an angle in
``[0, 2 pi)`` (circular mode).  A stimulus ``phi`` picks the winner ``s``
(nearest feature value) and every node moves toward ``phi`` by
``h(r - s) * (phi - w[r])``.

The matching energy (Ritter-Schulten form) is

    E[w] = 1/2 sum_r sum_s h(r - s) sum_{phi in R(s)} P(phi) |phi - w[r]|**2

where ``R(s)`` is the receptive field of node ``s``.  With the receptive
fields held fixed, the mean Kohonen update is exactly ``-grad E``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

__all__ = [
    "NeighborhoodFn",
    "SomState",
    "StimulusModel",
    "expected_update",
    "find_winner",
    "graph_distance",
    "is_monotone_ring",
    "kohonen_step",
    "receptive_fields",
    "som_energy",
    "train_som",
    "wrap_angle",
]

TWO_PI = 2.0 * math.pi


def wrap_angle(x):
    """Map angle differences into ``(-pi, pi]``."""
    return math.pi - np.mod(math.pi - np.asarray(x, dtype=float), TWO_PI)


@dataclass
class SomState:
    """Feature values on a ring (default) or line of nodes."""

    w: np.ndarray
    circular: bool = False
    topology: str = "ring"
    t: int = 0

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim == 0 or w.shape[0] == 0:
            raise ValueError("a map needs at least one node")
        if not np.all(np.isfinite(w)):
            raise ValueError("feature values must be finite")
        if self.topology not in ("ring", "line"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.circular:
            if w.ndim != 1:
                raise ValueError("circular mode takes one angle per node")
            w = np.mod(w, TWO_PI)
        self.w = w

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def diff(self, phi) -> np.ndarray:
        """``phi - w[r]`` per node; wrapped in circular mode."""
        d = np.asarray(phi, dtype=float) - self.w
        return wrap_angle(d) if self.circular else d

    def to_json(self) -> dict:
        return {str(r): (self.w[r].tolist() if self.w.ndim > 1 else float(self.w[r]))
                for r in range(self.n)}


def graph_distance(n: int, topology: str = "ring") -> np.ndarray:
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    if topology == "ring":
        d = np.minimum(d, n - d)
    return d


@dataclass(frozen=True)
class NeighborhoodFn:
    """``h(d)`` on graph distance; a box, or a Gaussian cut off beyond 3 widths.

    The default box of radius 1 updates the winner and its two ring neighbours.
    """

    shape: str = "box"
    width: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.shape not in ("gaussian", "box"):
            raise ValueError(f"unknown neighborhood shape {self.shape!r}")
        if self.width < 0 or not 0 <= self.amplitude <= 1:
            raise ValueError("need width >= 0 and amplitude in [0, 1]")

    def __call__(self, d):
        d = np.abs(np.asarray(d, dtype=float))
        if self.shape == "box" or self.width == 0:
            return np.where(d <= self.width, self.amplitude, 0.0)
        h = self.amplitude * np.exp(-d * d / (2.0 * self.width ** 2))
        return np.where(d <= 3.0 * self.width, h, 0.0)

    @classmethod
    def winner_only(cls, amplitude: float = 1.0) -> "NeighborhoodFn":
        return cls("box", 0.0, amplitude)


@dataclass
class StimulusModel:
    """Finite stimuli with probabilities, and/or a sampler ``(rng, size) -> values``."""

    values: np.ndarray | None = None
    probs: np.ndarray | None = None
    sampler: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.values is None:
            if self.sampler is None:
                raise ValueError("need finite support or a sampler")
            return
        self.values = np.asarray(self.values, dtype=float)
        k = self.values.shape[0]
        p = np.full(k, 1.0 / k) if self.probs is None else np.asarray(self.probs, dtype=float)
        if p.shape != (k,) or np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("probabilities must be non-negative and sum to 1")
        self.probs = p

    @property
    def finite(self) -> bool:
        return self.values is not None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.sampler is not None:
            return self.sampler(rng, size)
        return self.values[rng.choice(len(self.probs), size=size, p=self.probs)]

    @classmethod
    def uniform_circle(cls, grid: int = 360) -> "StimulusModel":
        """Uniform angles; the grid is the finite support used for energies."""
        return cls(TWO_PI * np.arange(grid) / grid, None,
                   lambda rng, size: rng.uniform(0.0, TWO_PI, size=size))


def _dist(state: SomState, phi) -> np.ndarray:
    d = state.diff(phi)
    return np.abs(d) if d.ndim == 1 else np.sqrt((d * d).sum(axis=1))


def find_winner(state: SomState, phi) -> int:
    return int(np.argmin(_dist(state, phi)))  # argmin keeps the lowest id on ties


def kohonen_step(state: SomState, phi, h: NeighborhoodFn) -> SomState:
    s = find_winner(state, phi)
    gain = h(graph_distance(state.n, state.topology)[s])
    delta = state.diff(phi)
    if delta.ndim > 1:
        gain = gain[:, None]
    return replace(state, w=state.w + gain * delta, t=state.t + 1)


def _winners(state: SomState, stimuli: StimulusModel) -> np.ndarray:
    if not stimuli.finite:
        raise ValueError("receptive fields need a finite stimulus support")
    return np.array([find_winner(state, phi) for phi in stimuli.values], dtype=int)


def receptive_fields(state: SomState, stimuli: StimulusModel) -> list[np.ndarray]:
    """Indices of the stimuli won by each node."""
    win = _winners(state, stimuli)
    return [np.flatnonzero(win == r) for r in range(state.n)]


def _weighted_terms(state, stimuli, h, winners):
    if winners is None:
        winners = _winners(state, stimuli)
    gains = h(graph_distance(state.n, state.topology))[winners]  # (stimulus, node)
    diffs = np.stack([state.diff(phi) for phi in stimuli.values])  # (stimulus, node[, dim])
    return stimuli.probs[:, None] * gains, diffs


def som_energy(state: SomState, stimuli: StimulusModel, h: NeighborhoodFn,
               winners: np.ndarray | None = None) -> float:
    """Energy of the map.  Pass ``winners`` to freeze the receptive fields."""
    weight, diffs = _weighted_terms(state, stimuli, h, winners)
    sq = diffs ** 2 if diffs.ndim == 2 else (diffs ** 2).sum(axis=2)
    return 0.5 * float((weight * sq).sum())


def expected_update(state: SomState, stimuli: StimulusModel, h: NeighborhoodFn,
                    winners: np.ndarray | None = None) -> np.ndarray:
    """Mean Kohonen displacement per node over the stimulus distribution."""
    weight, diffs = _weighted_terms(state, stimuli, h, winners)
    if diffs.ndim == 3:
        weight = weight[:, :, None]
    return (weight * diffs).sum(axis=0)


def log_schedule(start: float, stop: float, steps: int) -> np.ndarray:
    """Geometric interpolation from ``start`` to ``stop`` over ``steps`` values."""
    if steps == 1:
        return np.array([float(start)])
    return np.exp(np.linspace(math.log(start), math.log(stop), steps))


def train_som(n_nodes: int = 16, steps: int = 10_000, seed: int = 0,
              stimuli: StimulusModel | None = None, sigma=(4.0, 0.5), amplitude=(0.5, 0.01),
              shape: str = "gaussian", circular: bool = True, topology: str = "ring",
              record_every: int = 100):
    """Train a map from random initial values, annealing width and gain log-linearly.

    Returns ``(state, rows)`` with rows ``(step, energy, sigma)`` every
    ``record_every`` steps and at the end (``record_every=0`` records
    nothing).  Energies are evaluated on the finite stimulus support.
    """
    if n_nodes < 1 or steps < 1:
        raise ValueError("n_nodes and steps must be >= 1")
    stimuli = stimuli or StimulusModel.uniform_circle()
    rng = np.random.default_rng(seed)
    if circular:
        w0 = rng.uniform(0.0, TWO_PI, size=n_nodes)
    else:
        lo, hi = stimuli.values.min(axis=0), stimuli.values.max(axis=0)
        w0 = rng.uniform(lo, hi, size=(n_nodes,) + np.shape(lo))
    state = SomState(w0, circular=circular, topology=topology)
    phis = stimuli.sample(rng, steps)
    sig = log_schedule(sigma[0], sigma[1], steps)
    amp = log_schedule(amplitude[0], amplitude[1], steps)
    dist = graph_distance(n_nodes, topology)
    w = state.w
    rows = []
    # same update as kohonen_step, without rebuilding the state every step
    for k in range(steps):
        h = NeighborhoodFn(shape, float(sig[k]), float(amp[k]))
        delta = phis[k] - w
        if circular:
            delta = wrap_angle(delta)
        gap = np.abs(delta) if delta.ndim == 1 else np.sqrt((delta * delta).sum(axis=1))
        gain = h(dist[int(np.argmin(gap))])
        w = w + (gain[:, None] if delta.ndim > 1 else gain) * delta
        if circular:
            w = np.mod(w, TWO_PI)
        if record_every and ((k + 1) % record_every == 0 or k + 1 == steps):
            state = SomState(w, circular=circular, topology=topology, t=k + 1)
            energy = som_energy(state, stimuli, h) if stimuli.finite else float("nan")
            rows.append((k + 1, energy, float(sig[k])))
    return SomState(w, circular=circular, topology=topology, t=steps), rows


def is_monotone_ring(state: SomState) -> bool:
    """True when the angles advance in one direction around the ring and wind once."""
    if not state.circular:
        raise ValueError("monotonicity is defined for circular maps")
    steps = wrap_angle(np.roll(state.w, -1) - state.w)
    same_sign = bool(np.all(steps > 0) or np.all(steps < 0))
    return same_sign and math.isclose(abs(steps.sum()), TWO_PI, abs_tol=1e-6)
