"""Symmetric labelled edge structures over a finite measured space.

A graphing keeps both views of the same object: the deduplicated symmetric
edge set (which defines the simplicial metric, boundaries and balls) and
the generator decomposition into partial isomorphisms (which the invariance
and level-set machinery quantifies over).  Distances are unweighted: every
edge has length 1, and atoms in different components are at distance
+infinity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ResourceCapError
from .space import (
    FiniteMeasuredSpace,
    PartialIsomorphism,
    as_atom_tuple,
    as_mask,
    identity_map,
    compose,
    inverse,
    partial_isomorphism,
    partial_isomorphism_from_json,
    partial_isomorphism_to_json,
    space_from_json,
    space_to_json,
)

WORD_CAP_DEFAULT = 10**6


@dataclass(frozen=True, eq=False)
class Graphing:
    """Symmetric edge set over a space plus its generator decomposition."""

    space: FiniteMeasuredSpace
    generators: tuple[PartialIsomorphism, ...]
    edges: np.ndarray  # (m, 2) int array, each row x < y, lexicographically sorted
    metadata: dict = field(default_factory=dict)

    @property
    def atom_count(self) -> int:
        return self.space.atom_count

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix (cached)."""
        cached = self.__dict__.get("_adjacency")
        if cached is None:
            n = self.atom_count
            if self.edge_count:
                x, y = self.edges[:, 0], self.edges[:, 1]
                rows = np.concatenate([x, y])
                cols = np.concatenate([y, x])
                data = np.ones(rows.size, dtype=np.int32)
                cached = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
            else:
                cached = sp.csr_matrix((n, n), dtype=np.int32)
            self.__dict__["_adjacency"] = cached
        return cached

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency().sum(axis=1)).ravel().astype(int)

    def neighbors(self, atom: int) -> np.ndarray:
        a = self.adjacency()
        return a.indices[a.indptr[atom] : a.indptr[atom + 1]]

    def component_labels(self) -> np.ndarray:
        cached = self.__dict__.get("_components")
        if cached is None:
            _, labels = connected_components(self.adjacency(), directed=False)
            cached = labels
            self.__dict__["_components"] = cached
        return cached

    def component_count(self) -> int:
        return int(self.component_labels().max(initial=-1)) + 1

    def is_connected(self) -> bool:
        return self.component_count() <= 1


def build_graphing(
    space: FiniteMeasuredSpace,
    generators: Sequence[PartialIsomorphism],
    metadata: dict | None = None,
) -> Graphing:
    """Symmetrised union of the generator graphs, self-loops dropped.

    Connectivity is not required; a graphing of a sub-relation is legal and
    ergodicity is checked separately.
    """
    gens = tuple(generators)
    for phi in gens:
        if not phi.space.same_as(space):
            raise ValueError("generator defined over a different space")
        n = space.atom_count
        if len(phi) and (
            int(phi.domain.max(initial=0)) >= n or int(phi.image.max(initial=0)) >= n
        ):
            raise ValueError("generator references atom out of range")
    pairs = []
    for phi in gens:
        if len(phi):
            d, i = phi.domain, phi.image
            keep = d != i
            lo = np.minimum(d[keep], i[keep])
            hi = np.maximum(d[keep], i[keep])
            pairs.append(np.stack([lo, hi], axis=1))
    if pairs:
        edges = np.unique(np.concatenate(pairs, axis=0), axis=0)
    else:
        edges = np.zeros((0, 2), dtype=int)
    edges.flags.writeable = False
    return Graphing(space, gens, edges, dict(metadata or {}))


def distances_from(g: Graphing, sources: Iterable[int] | np.ndarray) -> np.ndarray:
    """Distance field d(., sources) as floats, +inf on unreached atoms."""
    n = g.atom_count
    src = as_mask(n, sources)
    dist = np.full(n, np.inf)
    dist[src] = 0.0
    if not src.any():
        return dist
    adj = g.adjacency()
    frontier = src.copy()
    reached = src.copy()
    r = 0
    while frontier.any():
        r += 1
        nxt = (adj @ frontier) > 0
        nxt &= ~reached
        if not nxt.any():
            break
        dist[nxt] = r
        reached |= nxt
        frontier = nxt
    return dist


def bfs_distance(g: Graphing, x: int, y: int) -> int | float:
    """Simplicial distance between two atoms; math.inf across components."""
    n = g.atom_count
    if not (0 <= x < n and 0 <= y < n):
        raise ValueError(f"atom index out of range 0..{n - 1}")
    if x == y:
        return 0
    d = distances_from(g, [x])[y]
    return math.inf if math.isinf(d) else int(d)


def boundary(g: Graphing, atoms: Iterable[int] | np.ndarray) -> tuple[int, ...]:
    """Atoms outside the set at distance exactly 1 from it."""
    mask = as_mask(g.atom_count, atoms)
    hit = (g.adjacency() @ mask) > 0
    return as_atom_tuple(g.atom_count, hit & ~mask)


def boundary_mass(g: Graphing, atoms: Iterable[int] | np.ndarray) -> float:
    mask = as_mask(g.atom_count, atoms)
    hit = (g.adjacency() @ mask) > 0
    return float(g.space.weights[hit & ~mask].sum())


def ball(g: Graphing, atoms: Iterable[int] | np.ndarray, r: int) -> tuple[int, ...]:
    """Closed ball of radius r around an atom set; ball(A, 0) = A."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    mask = as_mask(g.atom_count, atoms).copy()
    adj = g.adjacency()
    for _ in range(r):
        grown = mask | ((adj @ mask) > 0)
        if grown.sum() == mask.sum():
            break
        mask = grown
    return as_atom_tuple(g.atom_count, mask)


def word_family(
    g: Graphing, r: int, cap: int = WORD_CAP_DEFAULT
) -> list[PartialIsomorphism]:
    """All compositions of at most r generators and inverses.

    Words are deduplicated by their action (graph equality), not by their
    spelling, and the identity (empty word) is always included.  Exceeding
    the word cap raises a ResourceCapError naming the cap.
    """
    if r < 0:
        raise ValueError("word length must be non-negative")
    ident = identity_map(g.space)
    seen = {ident.action_key(): ident}
    frontier = [ident]
    steps = []
    for phi in g.generators:
        steps.append(phi)
        steps.append(inverse(phi))
    for _ in range(r):
        nxt = []
        for w in frontier:
            for s in steps:
                c = compose(w, s)
                key = c.action_key()
                if key not in seen:
                    if len(seen) >= cap:
                        raise ResourceCapError(
                            f"word family exceeded the configured cap of {cap} words",
                            cap=cap,
                        )
                    seen[key] = c
                    nxt.append(c)
        if not nxt:
            break
        frontier = nxt
    return list(seen.values())


@dataclass(frozen=True)
class DegreeReport:
    """Local-finiteness constants of a graphing."""

    max_degree: int
    horizontal_mass: float
    vertical_mass: float
    ulb_constant: float


def degree_report(g: Graphing) -> DegreeReport:
    """Degree bound, horizontal/vertical counting masses, cocycle bound.

    Horizontal mass sums weight(x) over ordered edges (x, y); vertical mass
    sums weight(y).  On a symmetric edge set the two agree, which is exactly
    the measure-preserving consistency check.  The u.l.b. constant is the
    largest weight ratio across an edge (1 when there are no edges).
    """
    deg = g.degrees()
    w = g.space.weights
    if g.edge_count:
        x, y = g.edges[:, 0], g.edges[:, 1]
        horizontal = float(w[x].sum() + w[y].sum())
        vertical = float(w[y].sum() + w[x].sum())
        ratios = w[x] / w[y]
        ulb = float(max(ratios.max(), (1.0 / ratios).max()))
    else:
        horizontal = vertical = 0.0
        ulb = 1.0
    return DegreeReport(
        max_degree=int(deg.max(initial=0)),
        horizontal_mass=horizontal,
        vertical_mass=vertical,
        ulb_constant=ulb,
    )


# ---------------------------------------------------------------------------
# File formats.


def graphing_to_json(g: Graphing) -> dict:
    return {
        "space": space_to_json(g.space),
        "generators": [partial_isomorphism_to_json(phi) for phi in g.generators],
        "metadata": dict(g.metadata),
    }


def graphing_from_json(data: dict) -> Graphing:
    space = space_from_json(data["space"])
    gens = [partial_isomorphism_from_json(space, item) for item in data.get("generators", [])]
    return build_graphing(space, gens, metadata=data.get("metadata") or {})


def load_graphing(path: str) -> Graphing:
    with open(path, "r", encoding="utf-8") as fh:
        return graphing_from_json(json.load(fh))


def save_graphing(g: Graphing, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graphing_to_json(g), fh, indent=2, sort_keys=True)
        fh.write("\n")


def edges_to_csv(g: Graphing) -> str:
    """Edge list as 'x,y' rows with x < y, preceded by a header."""
    lines = ["x,y"]
    for x, y in g.edges:
        lines.append(f"{int(x)},{int(y)}")
    return "\n".join(lines) + "\n"
