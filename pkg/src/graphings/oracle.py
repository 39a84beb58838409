"""Independent brute-force references for the heuristic operations.

These deliberately share no code with the operations they validate: shortest
paths come from Floyd-Warshall rather than per-source BFS, subsets are
enumerated as integer bitmasks rather than bit matrices, and the dense
eigensolver is a hand-rolled Householder tridiagonalisation plus implicit
QL iteration rather than a LAPACK call.  Performance is a non-goal; the
caps are hard limits.
"""

from __future__ import annotations

import math
import weakref
from typing import Iterable

import numpy as np

from .errors import ConvergenceError, ResourceCapError
from .graphing import Graphing

MASS_TOL = 1e-12
RATIO_ATOM_CAP = 20
CONCENTRATION_ATOM_CAP = 20
SPECTRUM_ATOM_CAP = 512


class InfeasibleWindowError(ValueError):
    """The requested mass window contains no achievable subset mass."""


def _lexicographic_min_id(cands: np.ndarray, n: int) -> int:
    """Bitmask whose sorted atom tuple is lexicographically least.

    Shorter prefixes win; otherwise the candidate containing the smallest
    undecided atom index wins.
    """
    cands = cands.copy()
    for j in range(n):
        if cands.size == 1:
            break
        exhausted = cands < (1 << j)  # no bits at j or beyond: strict prefix
        if exhausted.any():
            return int(cands[exhausted][0])
        has_j = (cands >> j) & 1 == 1
        if has_j.any():
            cands = cands[has_j]
    return int(cands[0])


def _mask_tuple(sid: int, n: int) -> tuple[int, ...]:
    return tuple(j for j in range(n) if (sid >> j) & 1)


def brute_min_boundary_ratio(
    g: Graphing, mass_lo: float, mass_hi: float, atom_cap: int = RATIO_ATOM_CAP
) -> tuple[tuple[int, ...], float]:
    """Exact minimiser of boundary mass / set mass over a mass window.

    Full enumeration over integer bitmasks; ties broken lexicographically on
    the sorted atom tuple.  An empty window raises InfeasibleWindowError,
    distinct from the cap error.
    """
    n = g.atom_count
    if n > atom_cap:
        raise ResourceCapError(
            f"boundary-ratio oracle is capped at {atom_cap} atoms (got {n})",
            cap=atom_cap,
        )
    if mass_lo > mass_hi:
        raise ValueError("empty window: mass_lo exceeds mass_hi")
    w = g.space.weights.astype(float)
    nb_mask = np.zeros(n, dtype=np.int64)
    for x, y in g.edges:
        nb_mask[x] |= 1 << int(y)
        nb_mask[y] |= 1 << int(x)
    ids = np.arange(1, 1 << n, dtype=np.int64)
    masses = np.zeros(ids.size)
    bmasses = np.zeros(ids.size)
    for j in range(n):
        in_set = ((ids >> j) & 1).astype(bool)
        masses[in_set] += w[j]
        adjacent = (ids & nb_mask[j]) != 0
        bmasses[adjacent & ~in_set] += w[j]
    feasible = (masses >= mass_lo - MASS_TOL) & (masses <= mass_hi + MASS_TOL)
    if not feasible.any():
        raise InfeasibleWindowError(
            f"no subset mass falls inside [{mass_lo}, {mass_hi}]"
        )
    ratios = bmasses[feasible] / masses[feasible]
    rmin = ratios.min()
    cands = ids[feasible][ratios <= rmin]
    sid = _lexicographic_min_id(cands, n)
    best_ratio = float(
        bmasses[feasible][ids[feasible] == sid][0]
        / masses[feasible][ids[feasible] == sid][0]
    )
    return _mask_tuple(sid, n), best_ratio


# ---------------------------------------------------------------------------
# Concentration oracle.

_far_cache: "weakref.WeakKeyDictionary[Graphing, dict]" = weakref.WeakKeyDictionary()


def _floyd_warshall(g: Graphing) -> np.ndarray:
    n = g.atom_count
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for x, y in g.edges:
        d[x, y] = 1.0
        d[y, x] = 1.0
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


def _far_tables(g: Graphing) -> dict:
    cached = _far_cache.get(g)
    if cached is not None:
        return cached
    n = g.atom_count
    w = g.space.weights.astype(float)
    dist = _floyd_warshall(g)
    finite = dist[np.isfinite(dist)]
    dmax = int(finite.max(initial=0))
    radii: list[float] = [float(r) for r in range(dmax + 1)] + [math.inf]
    ids = np.arange(0, 1 << n, dtype=np.int64)
    masses = np.zeros(ids.size)
    for j in range(n):
        masses[((ids >> j) & 1).astype(bool)] += w[j]
    far = np.zeros((ids.size, len(radii)), dtype=np.float32)
    chunk = 1 << 15
    for start in range(0, ids.size, chunk):
        stop = min(start + chunk, ids.size)
        block = ids[start:stop]
        dmin = np.full((block.size, n), np.inf)
        for j in range(n):
            sel = ((block >> j) & 1).astype(bool)
            dmin[sel] = np.minimum(dmin[sel], dist[j][None, :])
        for k, r in enumerate(radii):
            far[start:stop, k] = (dmin >= r) @ w
    cached = {"dist": dist, "radii": radii, "masses": masses, "far": far}
    _far_cache[g] = cached
    return cached


def brute_concentration(
    g: Graphing,
    delta: float,
    delta_prime: float,
    atom_cap: int = CONCENTRATION_ATOM_CAP,
) -> tuple[int | float, tuple[tuple[int, ...], tuple[int, ...]]]:
    """Exact sup of set distances over pairs with masses >= delta, delta'.

    For fixed A the extremal partner is the full far set at each radius, so
    the enumeration ranges over A only; tables are cached per graphing so a
    grid of queries pays for one enumeration.
    """
    n = g.atom_count
    if n > atom_cap:
        raise ResourceCapError(
            f"concentration oracle is capped at {atom_cap} atoms (got {n})",
            cap=atom_cap,
        )
    if not (0 < delta <= 1 and 0 < delta_prime <= 1):
        raise ValueError("masses must lie in (0, 1]")
    tables = _far_tables(g)
    masses, far, radii = tables["masses"], tables["far"], tables["radii"]
    feasible = masses >= delta - MASS_TOL
    ok = far[feasible] >= delta_prime - MASS_TOL
    counts = ok.sum(axis=1) - 1  # far is non-increasing along the radii
    top = int(counts.max())
    assert top >= 0, "the full space is always a feasible A"
    ids = np.flatnonzero(feasible)[counts == top]
    sid = int(ids[0])
    c_val: int | float = radii[top] if math.isinf(radii[top]) else int(radii[top])
    a_atoms = _mask_tuple(sid, n)
    dmin_row = tables["dist"][list(a_atoms)].min(axis=0)
    b_atoms = tuple(int(j) for j in np.flatnonzero(dmin_row >= radii[top]))
    return c_val, (a_atoms, b_atoms)


# ---------------------------------------------------------------------------
# Dense spectrum oracle: Householder + implicit QL, no library eigensolver.


def _assemble_walk(g: Graphing) -> np.ndarray:
    """Symmetrised lazy walk matrix, assembled edge by edge."""
    n = g.atom_count
    w = g.space.weights
    kappa = np.zeros(n)
    for x, y in g.edges:
        c = 0.5 * (w[x] + w[y])
        kappa[x] += c
        kappa[y] += c
    m = np.zeros((n, n))
    for x, y in g.edges:
        c = 0.5 * (w[x] + w[y])
        v = 0.5 * c / math.sqrt(kappa[x] * kappa[y])
        m[x, y] += v
        m[y, x] += v
    for i in range(n):
        m[i, i] = 1.0 if kappa[i] == 0 else 0.5
    return m


def _householder_tridiagonal(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a symmetric matrix to tridiagonal (diagonal, subdiagonal)."""
    a = a.copy()
    n = a.shape[0]
    e = np.zeros(max(n - 1, 0))
    for k in range(n - 2):
        x = a[k + 1 :, k].copy()
        norm = np.linalg.norm(x)
        if norm == 0.0:
            e[k] = 0.0
            continue
        alpha = -math.copysign(norm, x[0]) if x[0] != 0 else -norm
        v = x.copy()
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            e[k] = alpha
            continue
        v /= vnorm
        sub = a[k + 1 :, k + 1 :]
        p = sub @ v
        kfac = v @ p
        q = p - kfac * v
        sub -= 2.0 * (np.outer(v, q) + np.outer(q, v))
        a[k + 1 :, k + 1 :] = sub
        a[k + 1, k] = alpha
        a[k, k + 1] = alpha
        a[k + 2 :, k] = 0.0
        a[k, k + 2 :] = 0.0
        e[k] = alpha
    if n >= 2:
        e[n - 2] = a[n - 1, n - 2]
    return np.diag(a).copy(), e


def _tql_eigenvalues(d: np.ndarray, e: np.ndarray, max_sweeps: int = 50) -> np.ndarray:
    """Eigenvalues of a symmetric tridiagonal matrix by implicit QL shifts."""
    n = d.size
    d = d.copy()
    e = np.append(e.copy(), 0.0)
    eps = np.finfo(float).eps
    for l in range(n):
        iterations = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            iterations += 1
            if iterations > max_sweeps:
                raise ConvergenceError(
                    "implicit QL failed to deflate a tridiagonal eigenvalue",
                    residual=float(abs(e[l])),
                )
            gshift = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(gshift, 1.0)
            gshift = d[m] - d[l] + e[l] / (gshift + math.copysign(r, gshift))
            s = c = 1.0
            p = 0.0
            broke = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, gshift)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    broke = True
                    break
                s = f / r
                c = gshift / r
                gshift = d[i + 1] - p
                r = (d[i] - gshift) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = gshift + p
                gshift = c * r - b
            if broke:
                continue
            d[l] -= p
            e[l] = gshift
            e[m] = 0.0
    return np.sort(d)


def brute_dense_spectrum(g: Graphing, atom_cap: int = SPECTRUM_ATOM_CAP) -> list[float]:
    """Full spectrum of the symmetrised lazy walk, sorted descending."""
    n = g.atom_count
    if n > atom_cap:
        raise ResourceCapError(
            f"dense spectrum oracle is capped at {atom_cap} atoms (got {n})",
            cap=atom_cap,
        )
    m = _assemble_walk(g)
    d, e = _householder_tridiagonal(m)
    evals = _tql_eigenvalues(d, e)
    return [float(v) for v in evals[::-1]]
