"""Finite measured spaces and partial isomorphisms.

A finite measured space is a probability vector over atoms; partial
isomorphisms are injections between atom subsets carrying Radon-Nikodym
weights.  Everything here is immutable after construction and all
operations are pure functions, so values can be shared freely across
threads.

Tolerances: total mass is kept within 1e-12 of 1; cocycle chain identities
are checked to relative 1e-9 (double-precision accumulation headroom for
spaces up to ~2^20 atoms).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MASS_TOL = 1e-12
COCYCLE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class FiniteMeasuredSpace:
    """Atoms with strictly positive probability weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("a space needs a non-empty weight vector")
        if np.any(w <= 0.0):
            raise ValueError("all atom weights must be strictly positive")
        if abs(float(w.sum()) - 1.0) > MASS_TOL:
            raise ValueError("weights must sum to 1 within 1e-12")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def atom_count(self) -> int:
        return int(self.weights.size)

    @classmethod
    def uniform(cls, n: int) -> "FiniteMeasuredSpace":
        if n <= 0:
            raise ValueError("atom count must be positive")
        return cls(np.full(n, 1.0 / n))

    def mass(self, atoms: Iterable[int] | np.ndarray) -> float:
        """Total weight of a set of atoms (indices or a boolean mask)."""
        mask = as_mask(self.atom_count, atoms)
        return float(self.weights[mask].sum())

    def same_as(self, other: "FiniteMeasuredSpace") -> bool:
        return self is other or (
            self.atom_count == other.atom_count
            and bool(np.array_equal(self.weights, other.weights))
        )


def make_space(weights: Sequence[float]) -> FiniteMeasuredSpace:
    """Build a space from raw positive weights, normalising the total mass.

    Validation happens before normalisation, so a zero or negative entry is
    rejected rather than silently washed out.
    """
    w = np.asarray(list(weights), dtype=float)
    if w.size == 0:
        raise ValueError("empty weight vector")
    if np.any(~np.isfinite(w)) or np.any(w <= 0.0):
        raise ValueError("all weights must be finite and strictly positive")
    return FiniteMeasuredSpace(w / w.sum())


def as_mask(n: int, atoms: Iterable[int] | np.ndarray) -> np.ndarray:
    """Coerce an atom set (index iterable or boolean mask) to a bool mask."""
    if isinstance(atoms, np.ndarray) and atoms.dtype == bool:
        if atoms.shape != (n,):
            raise ValueError("boolean mask has the wrong length")
        return atoms
    idx = np.asarray(sorted(set(int(a) for a in atoms)), dtype=int)
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise ValueError(f"atom index out of range 0..{n - 1}")
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return mask


def as_atom_tuple(n: int, atoms: Iterable[int] | np.ndarray) -> tuple[int, ...]:
    """Canonical sorted-tuple encoding of an atom set."""
    return tuple(int(i) for i in np.flatnonzero(as_mask(n, atoms)))


@dataclass(frozen=True, eq=False)
class PartialIsomorphism:
    """A partial injection domain[i] -> image[i] with Radon-Nikodym weights.

    rn_weights[i] = weight(image[i]) / weight(domain[i]); the vector is
    always recomputed from the space, never trusted from a caller or a file.
    """

    space: FiniteMeasuredSpace
    domain: np.ndarray
    image: np.ndarray
    rn_weights: np.ndarray = field(init=False)

    def __post_init__(self):
        dom = np.asarray(self.domain, dtype=int)
        img = np.asarray(self.image, dtype=int)
        if dom.shape != img.shape or dom.ndim != 1:
            raise ValueError("domain and image must be index vectors of equal length")
        n = self.space.atom_count
        if dom.size:
            if dom.min(initial=0) < 0 or dom.max(initial=0) >= n:
                raise ValueError("domain atom out of range")
            if img.min(initial=0) < 0 or img.max(initial=0) >= n:
                raise ValueError("image atom out of range")
        if len(set(dom.tolist())) != dom.size:
            raise ValueError("domain entries must be pairwise distinct")
        if len(set(img.tolist())) != img.size:
            raise ValueError("image entries must be pairwise distinct")
        # Canonical order: sort by domain atom. Makes action equality a
        # plain array comparison.
        order = np.argsort(dom)
        dom = dom[order]
        img = img[order]
        rn = self.space.weights[img] / self.space.weights[dom]
        for a in (dom, img, rn):
            a.flags.writeable = False
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "rn_weights", rn)

    def __len__(self) -> int:
        return int(self.domain.size)

    def mapping(self) -> dict[int, int]:
        return {int(d): int(i) for d, i in zip(self.domain, self.image)}

    def action_key(self) -> tuple[tuple[int, int], ...]:
        """Hashable encoding of the graph of the map (domain is sorted)."""
        return tuple((int(d), int(i)) for d, i in zip(self.domain, self.image))

    def apply(self, atoms: Iterable[int] | np.ndarray) -> tuple[int, ...]:
        """Image of (the domain-restriction of) an atom set."""
        mask = as_mask(self.space.atom_count, atoms)
        hit = mask[self.domain]
        return tuple(sorted(int(i) for i in self.image[hit]))

    def is_measure_preserving(self, tol: float = MASS_TOL) -> bool:
        return bool(np.all(np.abs(self.rn_weights - 1.0) <= tol))


def partial_isomorphism(
    space: FiniteMeasuredSpace,
    domain: Sequence[int],
    image: Sequence[int],
) -> PartialIsomorphism:
    return PartialIsomorphism(space, np.asarray(domain, int), np.asarray(image, int))


def identity_map(
    space: FiniteMeasuredSpace, atoms: Iterable[int] | np.ndarray | None = None
) -> PartialIsomorphism:
    """Identity on a subset of atoms (the whole space by default)."""
    if atoms is None:
        idx = np.arange(space.atom_count)
    else:
        idx = np.flatnonzero(as_mask(space.atom_count, atoms))
    return PartialIsomorphism(space, idx, idx.copy())


def compose(f: PartialIsomorphism, g: PartialIsomorphism) -> PartialIsomorphism:
    """Apply f first, then g, on f^{-1}(dom g).

    The Radon-Nikodym weights multiply along the composition; since they
    are ratios of atom weights the product telescopes and the constructor's
    recomputation reproduces it exactly.  An empty overlap gives the empty
    partial isomorphism.
    """
    if not f.space.same_as(g.space):
        raise ValueError("cannot compose partial isomorphisms over different spaces")
    gmap = g.mapping()
    dom, img = [], []
    for d, mid in zip(f.domain, f.image):
        tail = gmap.get(int(mid))
        if tail is not None:
            dom.append(int(d))
            img.append(tail)
    return PartialIsomorphism(f.space, np.asarray(dom, int), np.asarray(img, int))


def inverse(f: PartialIsomorphism) -> PartialIsomorphism:
    """Swap domain and image; Radon-Nikodym weights invert entrywise."""
    return PartialIsomorphism(f.space, f.image.copy(), f.domain.copy())


@dataclass(frozen=True)
class Cocycle:
    """Radon-Nikodym cocycle values delta(x, y) on related ordered pairs."""

    values: Mapping[tuple[int, int], float]

    def __getitem__(self, pair: tuple[int, int]) -> float:
        return self.values[(int(pair[0]), int(pair[1]))]

    def __contains__(self, pair: tuple[int, int]) -> bool:
        return (int(pair[0]), int(pair[1])) in self.values


def cocycle_of(generators: Sequence[PartialIsomorphism]) -> Cocycle:
    """Cocycle of the relation generated by a family of partial isomorphisms.

    delta(x, y) = weight(x) / weight(y) on every pair joined by a chain of
    generator edges.  Values are weight ratios by construction, so the chain
    identity delta(x,z) = delta(x,y) delta(y,z) holds automatically; an
    internal assertion re-checks each generator edge against the stored
    ratios to catch a corrupted space.
    """
    if not generators:
        raise ValueError("cocycle_of needs at least one generator for space context")
    space = generators[0].space
    for phi in generators[1:]:
        if not phi.space.same_as(space):
            raise ValueError("generators must share one space")
    n = space.atom_count
    adj: list[set[int]] = [set() for _ in range(n)]
    for phi in generators:
        for d, i in zip(phi.domain, phi.image):
            if d != i:
                adj[int(d)].add(int(i))
                adj[int(i)].add(int(d))
    # Connected components of the symmetrised union give the orbits.
    comp = np.full(n, -1, dtype=int)
    label = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        queue = deque([start])
        comp[start] = label
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if comp[y] < 0:
                    comp[y] = label
                    queue.append(y)
        label += 1
    w = space.weights
    values: dict[tuple[int, int], float] = {}
    for c in range(label):
        orbit = np.flatnonzero(comp == c)
        for x in orbit:
            for y in orbit:
                values[(int(x), int(y))] = float(w[x] / w[y])
    for phi in generators:
        for d, i, r in zip(phi.domain, phi.image, phi.rn_weights):
            delta = values[(int(d), int(i))]
            assert abs(delta * r - 1.0) <= COCYCLE_RTOL, "inconsistent cocycle data"
    return Cocycle(values)


# ---------------------------------------------------------------------------
# File formats.  Spaces serialise as {"weights": [...]}; partial isomorphisms
# as {"domain": [...], "image": [...]} with rn weights recomputed on load.


def space_to_json(space: FiniteMeasuredSpace) -> dict:
    return {"weights": [float(x) for x in space.weights]}


def space_from_json(data: dict) -> FiniteMeasuredSpace:
    if "weights" not in data:
        raise ValueError("space JSON needs a 'weights' field")
    return make_space(data["weights"])


def partial_isomorphism_to_json(phi: PartialIsomorphism) -> dict:
    return {
        "domain": [int(x) for x in phi.domain],
        "image": [int(x) for x in phi.image],
    }


def partial_isomorphism_from_json(
    space: FiniteMeasuredSpace, data: dict
) -> PartialIsomorphism:
    if "domain" not in data or "image" not in data:
        raise ValueError("partial isomorphism JSON needs 'domain' and 'image'")
    return partial_isomorphism(space, data["domain"], data["image"])


def load_space(path: str) -> FiniteMeasuredSpace:
    with open(path, "r", encoding="utf-8") as fh:
        return space_from_json(json.load(fh))
