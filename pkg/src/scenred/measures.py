"""Finitely supported probability distributions over scenario space."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, DuplicateAtom, NegativeWeight, WeightSumOutOfRange

WEIGHT_SUM_TOL = 1e-12
RENORMALIZE_WINDOW = 1e-9


@dataclass(frozen=True)
class Scenario:
    """A point of scenario space with real coordinates."""

    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(np.asarray(self.coords, dtype=float)))
        if len(coords) < 1:
            raise DimensionMismatch("a scenario needs at least one coordinate")
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite scenario coordinate in {coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def __iter__(self):
        return iter(self.coords)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, k):
        return self.coords[k]

    def __repr__(self):
        body = ", ".join(f"{c:g}" for c in self.coords)
        return f"Scenario({body})"


def as_scenario(point) -> Scenario:
    if isinstance(point, Scenario):
        return point
    return Scenario(tuple(np.atleast_1d(np.asarray(point, dtype=float)).tolist()))


class DiscreteDistribution:
    """Probability measure with finitely many atoms.

    Atoms keep their insertion order; every matrix built downstream indexes
    atoms in this order. Instances are immutable after construction.
    """

    __slots__ = ("_atoms", "_weights", "_index")

    def __init__(self, atoms: Sequence[Scenario], weights: Sequence[float]):
        self._atoms = tuple(atoms)
        w = np.array(weights, dtype=float)
        w.setflags(write=False)
        self._weights = w
        self._index = {a: i for i, a in enumerate(self._atoms)}

    @property
    def atoms(self) -> tuple[Scenario, ...]:
        return self._atoms

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def dim(self) -> int:
        return self._atoms[0].dim

    @property
    def points(self) -> np.ndarray:
        """Atoms stacked as an (n, dim) array."""
        return np.array([a.coords for a in self._atoms], dtype=float)

    def __len__(self):
        return len(self._atoms)

    def index_of(self, atom) -> int:
        return self._index[as_scenario(atom)]

    def __contains__(self, atom):
        return as_scenario(atom) in self._index

    def as_dict(self) -> dict[Scenario, float]:
        return {a: float(w) for a, w in zip(self._atoms, self._weights)}

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __hash__(self):
        return hash(frozenset(self.as_dict().items()))

    def expectation(self, values) -> float:
        return float(np.dot(self._weights, np.asarray(values, dtype=float)))

    def __repr__(self):
        body = ", ".join(f"{a.coords}: {w:.6g}" for a, w in zip(self._atoms, self._weights))
        return f"DiscreteDistribution({{{body}}})"


def make_distribution(atoms: Iterable, weights: Iterable[float]) -> DiscreteDistribution:
    """Validate atoms and weights and build a distribution.

    Weights summing to within 1e-9 of one are renormalized; anything further
    off is rejected rather than silently rescaled.
    """
    atoms = [as_scenario(a) for a in atoms]
    weights = [float(w) for w in weights]
    if not atoms or len(atoms) != len(weights):
        raise ValueError("atoms and weights must be nonempty lists of equal length")
    dim = atoms[0].dim
    if any(a.dim != dim for a in atoms):
        raise DimensionMismatch("all atoms must share one dimension")
    if any(not math.isfinite(w) for w in weights):
        raise ValueError("weights must be finite")
    if any(w < 0 for w in weights):
        raise NegativeWeight(f"negative weight in {weights}")
    if len(set(atoms)) != len(atoms):
        raise DuplicateAtom("atoms must be pairwise distinct")
    total = math.fsum(weights)
    if abs(total - 1.0) > RENORMALIZE_WINDOW:
        raise WeightSumOutOfRange(f"weights sum to {total!r}")
    w = np.array(weights) / total
    return DiscreteDistribution(atoms, w)


def empirical_from_samples(points: Iterable) -> DiscreteDistribution:
    """Empirical measure: distinct points become atoms weighted by multiplicity / n."""
    samples = [as_scenario(p) for p in points]
    if not samples:
        raise ValueError("need at least one sample")
    dim = samples[0].dim
    if any(s.dim != dim for s in samples):
        raise DimensionMismatch("all samples must share one dimension")
    counts: OrderedDict[Scenario, int] = OrderedDict()
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    n = len(samples)
    return DiscreteDistribution(list(counts), [c / n for c in counts.values()])


def dirac(point) -> DiscreteDistribution:
    return make_distribution([point], [1.0])


def uniform(points: Iterable) -> DiscreteDistribution:
    points = list(points)
    return make_distribution(points, [1.0 / len(points)] * len(points))


def union_support(*dists: DiscreteDistribution) -> tuple[Scenario, ...]:
    """Atoms of all distributions, first-seen order, duplicates removed."""
    seen: dict[Scenario, None] = {}
    for d in dists:
        for a in d.atoms:
            seen.setdefault(a, None)
    return tuple(seen)


def random_distribution(rng: np.random.Generator, candidates: Sequence, n: int,
                        concentration: float = 1.0) -> DiscreteDistribution:
    """n distinct atoms drawn from `candidates` with Dirichlet weights."""
    candidates = [as_scenario(c) for c in candidates]
    if n > len(candidates):
        raise ValueError("cannot draw more distinct atoms than candidates")
    idx = rng.choice(len(candidates), size=n, replace=False)
    w = rng.dirichlet(np.full(n, concentration))
    w = w / w.sum()
    return make_distribution([candidates[i] for i in idx], w)
