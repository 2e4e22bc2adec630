"""TSP instances: parsing, generation, validation and serialization.

Only the planar Euclidean metric is supported.  Distances are kept in
double precision; the TSPLIB convention of rounding EUC_2D distances to the
nearest integer is deliberately *not* applied, so gradients and tour lengths
stay smooth and exact.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "City",
    "Instance",
    "InstanceFormatError",
    "Tour",
    "generate_instance",
    "make_tour",
    "parse_instance",
    "read_instance",
    "serialize_instance",
    "tour_from_json",
    "tour_length",
    "tour_to_json",
    "write_cities_csv",
]


class InstanceFormatError(ValueError):
    """Raised for malformed or unsupported instance text."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class City:
    id: int
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class Instance:
    """An ordered set of distinct cities in the plane."""

    cities: tuple[City, ...]
    name: str = "unnamed"
    metric: str = "EUC_2D"
    coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cities = tuple(self.cities)
        object.__setattr__(self, "cities", cities)
        if not cities:
            raise ValueError("an instance needs at least one city")
        if self.metric != "EUC_2D":
            raise ValueError(f"unsupported metric {self.metric!r}")
        for k, c in enumerate(cities):
            if c.id != k:
                raise ValueError(f"city ids must be contiguous from 0; got {c.id} at position {k}")
        coords = np.array([(c.x, c.y) for c in cities], dtype=float)
        if not np.all(np.isfinite(coords)):
            raise ValueError("city coordinates must be finite")
        seen = {}
        for c in cities:
            key = (c.x, c.y)
            if key in seen:
                raise ValueError(f"cities {seen[key]} and {c.id} share coordinates {key}")
            seen[key] = c.id
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_coords(cls, coords, name: str = "unnamed") -> "Instance":
        arr = np.asarray(coords, dtype=float).reshape(-1, 2)
        return cls(tuple(City(i, float(x), float(y)) for i, (x, y) in enumerate(arr)), name=name)

    @property
    def n(self) -> int:
        return len(self.cities)

    def __len__(self) -> int:
        return len(self.cities)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.name, self.metric, self.cities) == (other.name, other.metric, other.cities)

    def __hash__(self) -> int:
        return hash((self.name, self.metric, self.cities))

    def distance_matrix(self) -> np.ndarray:
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def bbox_diagonal(self) -> float:
        span = self.coords.max(axis=0) - self.coords.min(axis=0)
        return float(np.hypot(span[0], span[1]))


@dataclass(frozen=True)
class Tour:
    order: tuple[int, ...]
    length: float


def _check_permutation(order: Sequence[int], n: int) -> tuple[int, ...]:
    order = tuple(int(i) for i in order)
    if len(order) != n or sorted(order) != list(range(n)):
        raise ValueError(f"order is not a permutation of 0..{n - 1}: {order}")
    return order


def tour_length(instance: Instance, order: Sequence[int]) -> float:
    """Closed-tour Euclidean length.

    Edge lengths are summed with ``math.fsum`` so the result is exactly the
    same for every rotation and reversal of ``order``.
    """
    order = _check_permutation(order, instance.n)
    pts = instance.coords[list(order)]
    nxt = np.roll(pts, -1, axis=0)
    return math.fsum(np.hypot(nxt[:, 0] - pts[:, 0], nxt[:, 1] - pts[:, 1]).tolist())


def make_tour(instance: Instance, order: Sequence[int]) -> Tour:
    order = _check_permutation(order, instance.n)
    return Tour(order, tour_length(instance, order))


def generate_instance(n: int, seed: int, box: float = 1.0) -> Instance:
    """``n`` cities drawn i.i.d. uniform on ``[0, box]^2``.

    Coincident draws are replaced by fresh draws from the same stream, so the
    result is a pure function of ``(n, seed, box)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not box > 0:
        raise ValueError("box must be > 0")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, box, size=(n, 2))
    while True:
        _, first = np.unique(pts, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(n), first)
        if dup.size == 0:
            break
        pts[dup] = rng.uniform(0.0, box, size=(dup.size, 2))
    return Instance.from_coords(pts, name=f"rand{n}_s{seed}")


_HEADER = re.compile(r"^\s*([A-Za-z_]+)\s*(?::\s*(.*?))?\s*$")


def parse_instance(text: str | Iterable[str]) -> Instance:
    """Parse the supported TSPLIB subset (TYPE TSP, EDGE_WEIGHT_TYPE EUC_2D)."""
    lines = text.splitlines() if isinstance(text, str) else [ln.rstrip("\n") for ln in text]
    header: dict[str, str] = {}
    cities: list[City] = []
    seen: dict[tuple[float, float], int] = {}
    in_coords = False
    dim = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if not in_coords:
            if line == "NODE_COORD_SECTION":
                for key in ("TYPE", "EDGE_WEIGHT_TYPE", "DIMENSION"):
                    if key not in header:
                        raise InstanceFormatError(f"missing {key} before NODE_COORD_SECTION", lineno)
                in_coords = True
                continue
            m = _HEADER.match(line)
            if m is None or m.group(2) is None or m.group(2) == "":
                raise InstanceFormatError(f"malformed header line {line!r}", lineno)
            key, value = m.group(1).upper(), m.group(2)
            if key == "TYPE" and value.upper() != "TSP":
                raise InstanceFormatError(f"unsupported TYPE {value!r}", lineno)
            if key == "EDGE_WEIGHT_TYPE" and value.upper() != "EUC_2D":
                raise InstanceFormatError(f"unsupported EDGE_WEIGHT_TYPE {value!r}", lineno)
            if key == "DIMENSION":
                try:
                    dim = int(value)
                except ValueError:
                    raise InstanceFormatError(f"non-numeric DIMENSION {value!r}", lineno) from None
                if dim < 1:
                    raise InstanceFormatError("DIMENSION must be >= 1", lineno)
            header[key] = value
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InstanceFormatError(f"expected 'index x y', got {line!r}", lineno)
        try:
            idx = int(parts[0])
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise InstanceFormatError(f"non-numeric field in {line!r}", lineno) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InstanceFormatError("non-finite coordinate", lineno)
        if idx != len(cities) + 1:
            raise InstanceFormatError(f"expected node index {len(cities) + 1}, got {idx}", lineno)
        if (x, y) in seen:
            raise InstanceFormatError(
                f"duplicate coordinates ({x}, {y}) of node {seen[(x, y)] + 1}", lineno)
        seen[(x, y)] = idx - 1
        cities.append(City(idx - 1, x, y))
    if not in_coords:
        raise InstanceFormatError("missing NODE_COORD_SECTION")
    if len(cities) != dim:
        raise InstanceFormatError(f"DIMENSION is {dim} but {len(cities)} nodes were given")
    return Instance(tuple(cities), name=header.get("NAME", "unnamed"))


def read_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def serialize_instance(instance: Instance) -> str:
    """TSPLIB text; ``repr`` keeps every coordinate bit-exact on re-parse."""
    out = [
        f"NAME : {instance.name}",
        "TYPE : TSP",
        f"DIMENSION : {instance.n}",
        "EDGE_WEIGHT_TYPE : EUC_2D",
        "NODE_COORD_SECTION",
    ]
    out += [f"{c.id + 1} {c.x!r} {c.y!r}" for c in instance.cities]
    out.append("EOF")
    return "\n".join(out) + "\n"


def tour_to_json(instance: Instance, tour: Tour) -> dict:
    return {"instance_name": instance.name, "order": list(tour.order), "length": tour.length}


def tour_from_json(instance: Instance, payload: dict) -> Tour:
    if payload.get("instance_name") != instance.name:
        raise ValueError("tour belongs to a different instance")
    return make_tour(instance, payload["order"])


def write_cities_csv(instance: Instance, fh=None) -> str:
    buf = io.StringIO() if fh is None else fh
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "x", "y"])
    for c in instance.cities:
        writer.writerow([c.id, repr(c.x), repr(c.y)])
    return buf.getvalue() if fh is None else ""
