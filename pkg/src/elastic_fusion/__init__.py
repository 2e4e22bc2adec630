"""Elastic-net TSP solver with Kohonen maps, description-length weighting of
explanations, and a free-field partition-function checker."""

from .elastic_net import ElasticParams, anneal_solve, elastic_energy, elastic_gradient, extract_tour
from .instance_io import Instance, Tour, generate_instance, parse_instance, tour_length
from .mdl import MdlConfig, boltzmann_distribution, ensemble_from_runs, free_energy
from .oracle import solve_enumeration, solve_held_karp

__all__ = [
    "ElasticParams",
    "Instance",
    "MdlConfig",
    "Tour",
    "anneal_solve",
    "boltzmann_distribution",
    "elastic_energy",
    "elastic_gradient",
    "ensemble_from_runs",
    "extract_tour",
    "free_energy",
    "generate_instance",
    "parse_instance",
    "solve_enumeration",
    "solve_held_karp",
    "tour_length",
]

__version__ = "0.1.0"
