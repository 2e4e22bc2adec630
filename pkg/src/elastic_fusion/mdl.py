"""Description-length bookkeeping for explanations.

Costs are in nats throughout (divide by ``log 2`` for bits).  An explanation
with cost ``E`` gets Boltzmann weight ``exp(-E)``; the effective cost of a
distribution ``P`` over explanations is its expected cost minus its entropy,
which the Boltzmann distribution minimises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .oracle import canonical_order

__all__ = [
    "AllZeroEvidence",
    "ClassModel",
    "ExplanationEnsemble",
    "MdlConfig",
    "bayes_posterior",
    "boltzmann_distribution",
    "ensemble_from_runs",
    "explanation_cost",
    "explanation_weight",
    "free_energy",
    "log_partition",
]

COST_MODES = ("swept_area", "tour_length")


class AllZeroEvidence(ValueError):
    """Every class assigns zero joint probability to the datum."""


@dataclass(frozen=True)
class ClassModel:
    """Class priors plus one likelihood per class.

    A likelihood is either a callable ``x -> p(x | class)`` or a constant.
    """

    priors: Sequence[float]
    likelihoods: Sequence[Callable | float]

    def __post_init__(self):
        p = np.asarray(self.priors, dtype=float)
        if p.ndim != 1 or p.size == 0 or len(self.likelihoods) != p.size:
            raise ValueError("need one likelihood per prior")
        if np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("priors must be non-negative and sum to 1")

    def joint(self, x) -> np.ndarray:
        lik = np.array([f(x) if callable(f) else f for f in self.likelihoods], dtype=float)
        if np.any(lik < 0):
            raise ValueError("likelihoods must be non-negative")
        return np.asarray(self.priors, dtype=float) * lik


def bayes_posterior(model: ClassModel, x=None) -> np.ndarray:
    joint = model.joint(x)
    total = joint.sum()
    if not total > 0:
        raise AllZeroEvidence("p(alpha) p(x|alpha) is zero for every class")
    return joint / total


def log_partition(costs) -> float:
    """``log sum exp(-E)``, shifted by the smallest cost."""
    e = np.asarray(costs, dtype=float)
    lo = e.min()
    return float(-lo + np.log(np.exp(-(e - lo)).sum()))


def boltzmann_distribution(costs) -> np.ndarray:
    e = np.asarray(costs, dtype=float)
    if e.ndim != 1 or e.size == 0:
        raise ValueError("costs must be a non-empty vector")
    if not np.all(np.isfinite(e)):
        raise ValueError("costs must be finite")
    ex = np.exp(-(e - e.min()))
    return ex / ex.sum()


def free_energy(probs, costs) -> float:
    """Expected cost minus entropy, ``sum P E + sum P log P`` (0 log 0 = 0)."""
    p = np.asarray(probs, dtype=float)
    e = np.asarray(costs, dtype=float)
    if p.shape != e.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {e.shape}")
    if np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("probs must be a probability distribution")
    nz = p > 0
    return float(np.dot(p, e) + np.dot(p[nz], np.log(p[nz])))


@dataclass(frozen=True)
class MdlConfig:
    a0: float = 1.0
    cost_mode: str = "swept_area"

    def __post_init__(self):
        if not self.a0 > 0:
            raise ValueError("a0 must be > 0")
        if self.cost_mode not in COST_MODES:
            raise ValueError(f"cost_mode must be one of {COST_MODES}")


def explanation_cost(area: float, cfg: MdlConfig) -> float:
    if area < 0:
        raise ValueError("area must be >= 0")
    return area / cfg.a0


def explanation_weight(area: float, cfg: MdlConfig) -> float:
    """``exp(-area / a0)``."""
    return math.exp(-explanation_cost(area, cfg))


@dataclass(frozen=True)
class ExplanationEnsemble:
    labels: tuple[tuple[int, ...], ...]
    costs: np.ndarray
    posterior: np.ndarray
    free_energy: float
    cfg: MdlConfig

    def argmax(self) -> tuple[int, ...]:
        return self.labels[int(np.argmax(self.posterior))]

    def to_json(self) -> dict:
        return {
            "explanations": [
                {"canonical_order": list(lab), "cost": float(c), "posterior": float(p)}
                for lab, c, p in zip(self.labels, self.costs, self.posterior)
            ],
            "free_energy": self.free_energy,
            "cost_mode": self.cfg.cost_mode,
            "a0": self.cfg.a0,
        }


def ensemble_from_runs(traces, cfg: MdlConfig | None = None) -> ExplanationEnsemble:
    """Group solver runs into distinct tours and weight them by cost.

    Tours equal up to rotation or reversal share a label.  A label's cost is
    the smallest cost among its runs: swept area over ``a0``, or
    ``(K/2) * length`` in ``tour_length`` mode.
    """
    cfg = cfg or MdlConfig()
    traces = sorted(traces, key=lambda t: t.seed)
    if not traces:
        raise ValueError("no runs to assemble")
    best: dict[tuple[int, ...], float] = {}
    for tr in traces:
        label = canonical_order(tr.tour.order)
        if cfg.cost_mode == "swept_area":
            cost = explanation_cost(tr.swept_area, cfg)
        else:
            cost = 0.5 * tr.params.k_tension * tr.tour.length
        best[label] = min(cost, best.get(label, math.inf))
    labels = sorted(best, key=lambda lab: (best[lab], lab))
    costs = np.array([best[lab] for lab in labels])
    post = boltzmann_distribution(costs)
    return ExplanationEnsemble(tuple(labels), costs, post, free_energy(post, costs), cfg)
