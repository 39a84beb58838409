"""Constructors for the motivating graphing families and the
stable-isomorphism operations (restriction, saturation, quotient).

Families: cyclic rotations (finite Rokhlin towers), dyadic odometers
(binary adding machines), random regular expanders (configuration model),
and products.  The expander is a finite proxy: its spectral gap plays the
role that strong ergodicity plays at infinite resolution, nothing more.
"""

from __future__ import annotations

import math
import sys
from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np

from .errors import ResourceCapError
from .graphing import Graphing, build_graphing, distances_from
from .space import (
    FiniteMeasuredSpace,
    as_atom_tuple,
    as_mask,
    make_space,
    partial_isomorphism,
)

PRODUCT_ATOM_CAP = 1 << 20
RESTRICT_STATE_CAP = 200_000

# Shipped expander instances: seeds fixed so that regression values (spectral
# gaps, search ratios) are reproducible across runs.
DEFAULT_EXPANDER_SEEDS = {256: 7, 1024: 7, 4096: 7}
DEFAULT_EXPANDER_DEGREE = 4


def rotation_graphing(n: int, step: int = 1) -> Graphing:
    """Uniform n-atom space with the single generator x -> x + step (mod n).

    Connected exactly when gcd(step, n) = 1; a non-coprime step is legal but
    flagged in the metadata as a non-ergodic model.
    """
    if n < 3:
        raise ValueError("rotation needs at least 3 atoms")
    space = FiniteMeasuredSpace.uniform(n)
    dom = np.arange(n)
    img = (dom + step) % n
    gen = partial_isomorphism(space, dom, img)
    meta = {"family": "rotation", "n": n, "step": int(step % n)}
    if math.gcd(step % n, n) != 1:
        meta["warning"] = "gcd(step, n) != 1: model is disconnected (non-ergodic)"
        meta["connected"] = False
    else:
        meta["connected"] = True
    return build_graphing(space, [gen], metadata=meta)


def _bitrev(vals: np.ndarray, levels: int) -> np.ndarray:
    out = np.zeros_like(vals)
    for j in range(levels):
        out = (out << 1) | ((vals >> j) & 1)
    return out


def odometer_graphing(levels: int) -> Graphing:
    """Binary adding machine on 2^levels atoms (one full cycle).

    Atoms are dyadic intervals indexed 0..2^levels-1; the generator is
    "add one with carry" on the dyadic coordinates, which on atom indices is
    the bit-reversed increment.  The level-k tower partition (see
    odometer_tower) is exact: 2^k columns of mass 2^-k cyclically permuted
    with empty residual set.
    """
    if not 1 <= levels <= 20:
        raise ValueError("levels must be between 1 and 20")
    n = 1 << levels
    space = FiniteMeasuredSpace.uniform(n)
    dom = np.arange(n)
    img = _bitrev((_bitrev(dom, levels) + 1) % n, levels)
    gen = partial_isomorphism(space, dom, img)
    meta = {"family": "odometer", "levels": levels, "connected": True}
    return build_graphing(space, [gen], metadata=meta)


def odometer_tower(levels: int, k: int) -> list[tuple[int, ...]]:
    """Columns of the level-k tower of the dyadic odometer.

    Column j collects the atoms whose first k dyadic coordinates spell j;
    the odometer maps column j onto column j+1 mod 2^k, exactly.
    """
    if not 0 <= k <= levels:
        raise ValueError("tower level must be between 0 and levels")
    n = 1 << levels
    key = _bitrev(np.arange(n), levels) % (1 << k)
    return [tuple(int(x) for x in np.flatnonzero(key == j)) for j in range(1 << k)]


# ---------------------------------------------------------------------------
# Random regular expanders.


def _pair_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u <= v else (v, u)


def _repair_pairs(pairs: list[list[int]], rng: np.random.Generator, passes: int = 50) -> bool:
    """Resolve self-loops and multi-edges in a stub pairing by switches.

    Each switch swaps partners between an offending pair and a random pair,
    preserving the degree sequence.  Returns True when the pairing is simple.
    """
    counts: dict[tuple[int, int], int] = defaultdict(int)
    for u, v in pairs:
        counts[_pair_key(u, v)] += 1
    m = len(pairs)
    for _ in range(passes):
        bad = [
            i
            for i, (u, v) in enumerate(pairs)
            if u == v or counts[_pair_key(u, v)] > 1
        ]
        if not bad:
            return True
        progress = False
        for i in bad:
            u1, v1 = pairs[i]
            old1 = _pair_key(u1, v1)
            if u1 != v1 and counts[old1] <= 1:
                continue  # fixed as a side effect of an earlier switch
            for _attempt in range(200):
                j = int(rng.integers(m))
                if j == i:
                    continue
                u2, v2 = pairs[j]
                old2 = _pair_key(u2, v2)
                fixed = False
                for a, b, c, d in ((u1, v2, u2, v1), (u1, u2, v1, v2)):
                    if a == b or c == d:
                        continue
                    k1, k2 = _pair_key(a, b), _pair_key(c, d)
                    counts[old1] -= 1
                    counts[old2] -= 1
                    if k1 != k2 and counts[k1] == 0 and counts[k2] == 0:
                        counts[k1] += 1
                        counts[k2] += 1
                        pairs[i] = [a, b]
                        pairs[j] = [c, d]
                        fixed = True
                        break
                    counts[old1] += 1
                    counts[old2] += 1
                if fixed:
                    progress = True
                    break
        if not progress:
            break
    return not any(
        u == v or counts[_pair_key(u, v)] > 1 for u, v in pairs
    )


def _euler_orientation(
    n: int, edges: list[tuple[int, int]]
) -> list[tuple[int, int, int]]:
    """Orient all edges of an all-even-degrees multigraph along Euler trails.

    Returns (tail, head, edge_id) triples; every vertex ends up with equal
    in- and out-degree.
    """
    adj: list[list[int]] = [[] for _ in range(n)]
    for eid, (u, v) in enumerate(edges):
        adj[u].append(eid)
        adj[v].append(eid)
    used = [False] * len(edges)
    ptr = [0] * n
    oriented: list[tuple[int, int, int]] = []
    for start in range(n):
        if ptr[start] >= len(adj[start]):
            continue
        stack = [start]
        while stack:
            v = stack[-1]
            advanced = False
            while ptr[v] < len(adj[v]):
                eid = adj[v][ptr[v]]
                ptr[v] += 1
                if used[eid]:
                    continue
                used[eid] = True
                a, b = edges[eid]
                w = b if a == v else a
                oriented.append((v, w, eid))
                stack.append(w)
                advanced = True
                break
            if not advanced:
                stack.pop()
    return oriented


def _split_bipartite(
    n: int, arcs: list[tuple[int, int, bool]], regularity: int
) -> list[list[tuple[int, int]]]:
    """Decompose a regular bipartite multigraph into perfect matchings.

    Arcs are (left, right, real); padding arcs carry real=False and are
    dropped from the output.  Even regularity splits along Euler trails;
    odd regularity peels one matching by augmenting paths first.
    """
    if regularity == 0 or not arcs:
        return []
    if regularity == 1:
        return [[(u, v) for u, v, real in arcs if real]]
    if regularity % 2 == 0:
        edges = [(u, n + v) for u, v, _ in arcs]
        half_a: list[tuple[int, int, bool]] = []
        half_b: list[tuple[int, int, bool]] = []
        for a, b, eid in _euler_orientation(2 * n, edges):
            (half_a if a < n else half_b).append(arcs[eid])
        return _split_bipartite(n, half_a, regularity // 2) + _split_bipartite(
            n, half_b, regularity // 2
        )
    # Odd regularity: Kuhn's algorithm peels one perfect matching.
    adj: dict[int, list[int]] = defaultdict(list)
    for aid, (u, _v, _real) in enumerate(arcs):
        adj[u].append(aid)
    match_right: dict[int, int] = {}
    match_left: dict[int, int] = {}
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * n + 1000))
    try:

        def try_augment(u: int, seen: set[int]) -> bool:
            for aid in adj[u]:
                v = arcs[aid][1]
                if v in seen:
                    continue
                seen.add(v)
                if v not in match_right or try_augment(arcs[match_right[v]][0], seen):
                    match_right[v] = aid
                    match_left[u] = aid
                    return True
            return False

        for u in sorted(adj):
            if u not in match_left and not try_augment(u, set()):
                raise RuntimeError("matching peel failed on a regular bipartite graph")
    finally:
        sys.setrecursionlimit(limit)
    chosen = set(match_left.values())
    first = [(arcs[aid][0], arcs[aid][1]) for aid in sorted(chosen) if arcs[aid][2]]
    rest = [arcs[aid] for aid in range(len(arcs)) if aid not in chosen]
    return [first] + _split_bipartite(n, rest, regularity - 1)


def expander_graphing(n: int, degree: int, seed: int) -> Graphing:
    """Random degree-regular graph via the configuration model.

    Self-loops and multi-edges are resolved by re-pairing (switches plus a
    full reshuffle fallback, at most 100 attempts).  The edge set is
    decomposed into ceil(degree/2) generators by Euler orientation and
    bipartite matching peeling; for even degree each generator is a full
    permutation.
    """
    if degree < 3:
        raise ValueError("degree must be at least 3")
    if (n * degree) % 2 != 0:
        raise ValueError("n * degree must be even")
    if degree >= n:
        raise ValueError("infeasible degree sequence: degree must be below n")
    rng = np.random.default_rng(seed)
    pairs = None
    attempts = 0
    for attempt in range(100):
        attempts = attempt + 1
        stubs = np.repeat(np.arange(n), degree)
        rng.shuffle(stubs)
        cand = [
            [int(stubs[2 * i]), int(stubs[2 * i + 1])] for i in range(stubs.size // 2)
        ]
        if _repair_pairs(cand, rng):
            pairs = cand
            break
    if pairs is None:
        raise ResourceCapError(
            "configuration model failed to produce a simple graph in 100 attempts",
            cap=100,
        )
    edges = sorted(_pair_key(u, v) for u, v in pairs)

    # Euler orientation needs even degrees: for odd degree, ghost edges pair
    # odd-degree vertices inside each component and are dropped afterwards.
    work: list[tuple[int, int]] = list(edges)
    ghost_from = len(work)
    if degree % 2 == 1:
        parent = list(range(n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in edges:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
        members = defaultdict(list)
        for v in range(n):
            members[find(v)].append(v)
        for group in members.values():
            for a, b in zip(group[::2], group[1::2]):
                work.append((a, b))
    cap = (degree + 1) // 2
    out_need = np.full(n, cap)
    in_need = np.full(n, cap)
    arcs: list[tuple[int, int, bool]] = []
    for u, v, eid in _euler_orientation(n, work):
        if eid < ghost_from:
            arcs.append((u, v, True))
            out_need[u] -= 1
            in_need[v] -= 1
    if degree % 2 == 0:
        assert not out_need.any() and not in_need.any(), "unbalanced orientation"
    else:
        lefts = [v for v in range(n) for _ in range(out_need[v])]
        rights = [v for v in range(n) for _ in range(in_need[v])]
        arcs.extend((u, v, False) for u, v in zip(lefts, rights))
    matchings = _split_bipartite(n, arcs, cap)

    space = FiniteMeasuredSpace.uniform(n)
    gens = []
    for m in matchings:
        if not m:
            continue
        dom = np.asarray([u for u, _ in m], int)
        img = np.asarray([v for _, v in m], int)
        gens.append(partial_isomorphism(space, dom, img))
    meta = {
        "family": "expander",
        "n": n,
        "degree": degree,
        "seed": int(seed),
        "attempts": attempts,
    }
    g = build_graphing(space, gens, metadata=meta)
    assert g.edge_count == len(edges), "generator decomposition lost edges"
    return g


def default_expander(n: int, degree: int = DEFAULT_EXPANDER_DEGREE) -> Graphing:
    """One of the shipped expander instances (fixed per-size seeds)."""
    seed = DEFAULT_EXPANDER_SEEDS.get(n, 7)
    return expander_graphing(n, degree, seed)


def product_graphing(
    g1: Graphing, g2: Graphing, atom_cap: int = PRODUCT_ATOM_CAP
) -> Graphing:
    """Product space with product weights; generators act factor-wise."""
    n1, n2 = g1.atom_count, g2.atom_count
    if n1 * n2 > atom_cap:
        raise ResourceCapError(
            f"product would have {n1 * n2} atoms, over the cap of {atom_cap}",
            cap=atom_cap,
        )
    weights = np.outer(g1.space.weights, g2.space.weights).ravel()
    space = FiniteMeasuredSpace(weights / weights.sum())
    gens = []
    all2 = np.arange(n2)
    for phi in g1.generators:
        dom = (np.repeat(phi.domain * n2, n2) + np.tile(all2, len(phi))).astype(int)
        img = (np.repeat(phi.image * n2, n2) + np.tile(all2, len(phi))).astype(int)
        gens.append(partial_isomorphism(space, dom, img))
    all1 = np.arange(n1)
    for psi in g2.generators:
        dom = (np.repeat(all1 * n2, len(psi)) + np.tile(psi.domain, n1)).astype(int)
        img = (np.repeat(all1 * n2, len(psi)) + np.tile(psi.image, n1)).astype(int)
        gens.append(partial_isomorphism(space, dom, img))
    meta = {
        "family": "product",
        "factors": [g1.metadata.get("family", "?"), g2.metadata.get("family", "?")],
        "shape": [n1, n2],
    }
    return build_graphing(space, gens, metadata=meta)


# ---------------------------------------------------------------------------
# Restriction (first-return words), saturation, quotients.


def graphing_diameter(g: Graphing) -> int:
    """Largest finite distance over all atom pairs (0 for edgeless spaces)."""
    cached = g.__dict__.get("_diameter")
    if cached is not None:
        return cached
    n = g.atom_count
    diam = 0
    adj = g.adjacency()
    chunk = max(1, min(n, 2_000_000 // max(n, 1)))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        frontier = np.zeros((n, hi - lo), dtype=bool)
        frontier[np.arange(lo, hi), np.arange(hi - lo)] = True
        reached = frontier.copy()
        r = 0
        while True:
            nxt = (adj @ frontier) > 0
            nxt &= ~reached
            if not nxt.any():
                break
            r += 1
            reached |= nxt
            frontier = nxt
        diam = max(diam, r)
    g.__dict__["_diameter"] = diam
    return diam


def restrict(
    g: Graphing,
    atoms: Iterable[int] | np.ndarray,
    word_cap: int | None = None,
    state_cap: int = RESTRICT_STATE_CAP,
) -> Graphing:
    """Induced graphing on an atom subset via first-return words.

    Pseudo-group words are enumerated breadth-first; a word contributes the
    piece of its graph whose trajectory leaves the subset and re-enters it
    for the first time.  Enumeration stops once the collected pieces connect
    the subset inside every component of g that meets it (or when the word
    cap, default twice the diameter, runs out - reported loudly).  Weights
    are renormalised; metadata records the original atom indices and the
    normalisation factor.
    """
    n = g.atom_count
    y_mask = as_mask(n, atoms)
    y_atoms = np.flatnonzero(y_mask)
    if y_atoms.size == 0:
        raise ValueError("cannot restrict to the empty set")
    if word_cap is None:
        word_cap = max(2, 2 * graphing_diameter(g))

    new_index = -np.ones(n, dtype=int)
    new_index[y_atoms] = np.arange(y_atoms.size)
    factor = float(g.space.weights[y_atoms].sum())
    sub_space = FiniteMeasuredSpace(g.space.weights[y_atoms] / factor)

    comp = g.component_labels()
    targets = defaultdict(list)
    for a in y_atoms:
        targets[int(comp[a])].append(int(a))

    steps: list[dict[int, int]] = []
    for phi in g.generators:
        fwd = phi.mapping()
        steps.append(fwd)
        steps.append({v: k for k, v in fwd.items()})

    pieces: dict[tuple[tuple[int, int], ...], None] = {}
    parent = {int(a): int(a) for a in y_atoms}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def connected_enough() -> bool:
        for group in targets.values():
            root = find(group[0])
            if any(find(m) != root for m in group[1:]):
                return False
        return True

    def add_piece(ret: dict[int, int]) -> None:
        items = tuple(sorted(ret.items()))
        if items in pieces:
            return
        pieces[items] = None
        for d, i in items:
            rd, ri = find(d), find(i)
            if rd != ri:
                parent[rd] = ri

    start = tuple((int(a), int(a)) for a in y_atoms)
    frontier = [start]
    seen = {start}
    processed = 0
    length = 0
    done = False
    while frontier and length < word_cap and not done:
        length += 1
        nxt = []
        for state in frontier:
            processed += 1
            if processed > state_cap:
                raise ResourceCapError(
                    f"first-return enumeration exceeded the state cap of {state_cap}",
                    cap=state_cap,
                )
            for step in steps:
                returned: dict[int, int] = {}
                active: list[tuple[int, int]] = []
                for x, pos in state:
                    tgt = step.get(pos)
                    if tgt is None:
                        continue
                    if y_mask[tgt]:
                        returned[x] = tgt
                    else:
                        active.append((x, tgt))
                if returned:
                    add_piece(returned)
                if active:
                    key = tuple(active)
                    if key not in seen:
                        seen.add(key)
                        nxt.append(key)
        if connected_enough():
            done = True
        frontier = nxt

    if not connected_enough():
        offending = None
        for label, group in targets.items():
            root = find(group[0])
            if any(find(m) != root for m in group[1:]):
                offending = label
                break
        raise ResourceCapError(
            f"first-return word cap {word_cap} is insufficient to connect the "
            f"restriction inside component {offending}",
            cap=word_cap,
        )

    gens = []
    for items in pieces:
        dom = new_index[np.asarray([d for d, _ in items], int)]
        img = new_index[np.asarray([i for _, i in items], int)]
        if np.array_equal(dom, img):
            continue  # pure identity piece adds no edges
        gens.append(partial_isomorphism(sub_space, dom, img))
    meta = {
        "restricted_from": g.metadata.get("family", "graphing"),
        "atom_map": [int(a) for a in y_atoms],
        "normalization": factor,
    }
    return build_graphing(sub_space, gens, metadata=meta)


def saturate_sequence(
    g: Graphing,
    y: Iterable[int] | np.ndarray,
    a: Iterable[int] | np.ndarray,
) -> tuple[int, ...]:
    """Spread a subset of y across the complement along a BFS assignment.

    Every atom outside y is attached to a representative inside y: nearest
    by BFS, with parent ties broken toward the lower atom index.  The
    saturation collects a together with the outside atoms whose
    representative lies in a; intersecting back with y returns exactly a.
    """
    n = g.atom_count
    y_mask = as_mask(n, y)
    a_mask = as_mask(n, a)
    if not y_mask.any():
        raise ValueError("y must be non-empty")
    if np.any(a_mask & ~y_mask):
        raise ValueError("a must be a subset of y")
    dist = distances_from(g, y_mask)
    outside = ~y_mask
    if np.any(np.isinf(dist[outside])):
        missing = int(np.flatnonzero(outside & np.isinf(dist))[0])
        raise ValueError(f"atom {missing} outside y is unreachable from y")
    rep = -np.ones(n, dtype=int)
    rep[y_mask] = np.flatnonzero(y_mask)
    adj = g.adjacency()
    max_r = int(dist[np.isfinite(dist)].max(initial=0))
    for r in range(1, max_r + 1):
        for u in np.flatnonzero(dist == r):
            nbrs = adj.indices[adj.indptr[u] : adj.indptr[u + 1]]
            parents = [int(v) for v in nbrs if dist[v] == r - 1]
            rep[u] = rep[min(parents)]
    result = a_mask.copy()
    result[outside] = a_mask[rep[outside]]
    return as_atom_tuple(n, result)


def quotient_pushforward(g: Graphing, blocks: Sequence[Iterable[int]]) -> Graphing:
    """Push the graphing forward along a partition of the atoms.

    Block masses are summed weights; edges push to (block(x), block(y)) with
    self-loops dropped; the generator decomposition is re-derived by greedy
    edge colouring (each colour class is a matching, hence a partial
    isomorphism).
    """
    n = g.atom_count
    block_of = -np.ones(n, dtype=int)
    masses = []
    for b, members in enumerate(blocks):
        members = [int(m) for m in members]
        if not members:
            raise ValueError("empty block in partition")
        for m in members:
            if not 0 <= m < n:
                raise ValueError("block member out of range")
            if block_of[m] >= 0:
                raise ValueError(f"atom {m} appears in two blocks")
            block_of[m] = b
        masses.append(float(g.space.weights[members].sum()))
    if np.any(block_of < 0):
        raise ValueError("blocks do not cover every atom")
    q_space = make_space(masses)
    q_edges = set()
    for x, y in g.edges:
        bx, by = int(block_of[x]), int(block_of[y])
        if bx != by:
            q_edges.add((min(bx, by), max(bx, by)))
    colors: list[dict[int, int]] = []
    for bx, by in sorted(q_edges):
        for cls in colors:
            if bx not in cls and by not in cls:
                cls[bx] = by
                cls[by] = bx
                break
        else:
            colors.append({bx: by, by: bx})
    gens = []
    for cls in colors:
        dom = sorted(u for u in cls if u < cls[u])
        img = [cls[u] for u in dom]
        gens.append(
            partial_isomorphism(q_space, np.asarray(dom, int), np.asarray(img, int))
        )
    meta = {
        "family": "quotient",
        "source": g.metadata.get("family", "graphing"),
        "blocks": len(masses),
    }
    return build_graphing(q_space, gens, metadata=meta)
