"""Set-to-set distances, concentration profiles, far-pair witnesses, and
level-set extraction of almost-invariant sets from distance profiles.

The exact profile enumerates subsets (brute-force frontier: 20 atoms); the
heuristic profile pairs a greedy far-pair lower bound with a spectral upper
bound derived from mass spreading of the lazy averaging walk:

    d(A, B) <= ceil( log(1/(rho^2 mu(A) mu(B))) / (2 log(1/lambda2)) )

whenever the walk's gap is positive, where lambda2 = 1 - gap and rho
corrects for the difference between the walk's stationary distribution and
the space's weights (rho = 1 on uniform-weight regular graphings).  The
inequality follows from <P^s 1_A, 1_B> >= pi(A)pi(B) - lambda2^s sqrt(...):
once s exceeds the stated bound the inner product is positive, so some
positive-mass point of A lies within s steps of B.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConvergenceError, ResourceCapError
from .graphing import Graphing, distances_from
from .space import as_atom_tuple, as_mask
from . import folner

MASS_TOL = 1e-12
EXACT_ATOM_CAP = 20


def set_distance(
    g: Graphing, a: Iterable[int] | np.ndarray, b: Iterable[int] | np.ndarray
) -> int | float:
    """Least distance between two non-empty atom sets (min over pairs).

    On atomic spaces the essential infimum is a plain minimum; the value is
    math.inf exactly when no component meets both sets.
    """
    n = g.atom_count
    a_mask = as_mask(n, a)
    b_mask = as_mask(n, b)
    if not a_mask.any() or not b_mask.any():
        raise ValueError("set_distance needs non-empty sets")
    if (a_mask & b_mask).any():
        return 0
    adj = g.adjacency()
    frontier = a_mask.copy()
    reached = a_mask.copy()
    r = 0
    while frontier.any():
        r += 1
        nxt = (adj @ frontier) > 0
        nxt &= ~reached
        if not nxt.any():
            return math.inf
        if (nxt & b_mask).any():
            return r
        reached |= nxt
        frontier = nxt
    return math.inf


def is_ergodic_metric(g: Graphing) -> bool:
    """True iff every pair of positive-mass sets is at finite distance.

    With strictly positive atom weights this is plain connectivity.
    """
    return g.component_count() <= 1


# ---------------------------------------------------------------------------
# Concentration profiles.


@dataclass(frozen=True)
class ProfileSample:
    delta: float
    delta_prime: float
    c_lower: int | float
    c_upper: int | float
    witness: tuple[tuple[int, ...], tuple[int, ...]] | None
    lower_method: str
    upper_method: str


@dataclass(frozen=True)
class ConcentrationProfile:
    """Sampled estimates of c(delta, delta') with witnesses."""

    samples: tuple[ProfileSample, ...]
    mode: str  # "exact" | "heuristic"

    def __post_init__(self):
        for s in self.samples:
            assert s.c_lower <= s.c_upper, "profile bounds crossed"
        by_delta: dict[float, list[ProfileSample]] = {}
        for s in self.samples:
            by_delta.setdefault(s.delta, []).append(s)
        for group in by_delta.values():
            group = sorted(group, key=lambda s: s.delta_prime)
            for s1, s2 in zip(group, group[1:]):
                assert s2.c_upper <= s1.c_upper, "c_upper must fall as delta' grows"

    def sample_at(self, delta: float, delta_prime: float) -> ProfileSample:
        for s in self.samples:
            if s.delta == delta and s.delta_prime == delta_prime:
                return s
        raise KeyError((delta, delta_prime))


def _all_pairs_bfs(g: Graphing, inf_sentinel: int) -> np.ndarray:
    """Per-source BFS distance matrix with an integer sentinel for infinity."""
    n = g.atom_count
    nbrs = [list(map(int, g.neighbors(v))) for v in range(n)]
    dist = np.full((n, n), inf_sentinel, dtype=np.int64)
    for s in range(n):
        dist[s, s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            dv = dist[s, v]
            for u in nbrs[v]:
                if dist[s, u] == inf_sentinel:
                    dist[s, u] = dv + 1
                    queue.append(u)
    return dist


def profile_exact(
    g: Graphing,
    grid: Sequence[tuple[float, float]],
    atom_cap: int = EXACT_ATOM_CAP,
) -> ConcentrationProfile:
    """Exact c(delta, delta') by subset enumeration (mass constraints >=).

    For a fixed A the best partner at distance >= r is the whole far set
    {x : d(x, A) >= r}, so one pass over the 2^n subsets A suffices: c is
    the largest r whose far set still carries mass delta'.  Witnesses are
    the lexicographically first maximisers and are re-verified directly.
    """
    n = g.atom_count
    if n > atom_cap:
        raise ResourceCapError(
            f"exact profile is capped at {atom_cap} atoms (got {n})", cap=atom_cap
        )
    for d, dp in grid:
        if not (0 < d <= 1 and 0 < dp <= 1):
            raise ValueError("grid masses must lie in (0, 1]")
    w = g.space.weights
    sent = n + 1
    dist = _all_pairs_bfs(g, sent)
    finite = dist[dist < sent]
    dmax = int(finite.max(initial=0))
    radii = list(range(dmax + 1)) + [sent]
    n_r = len(radii)
    best_c = {pt: -1 for pt in grid}  # index into radii
    best_id = {pt: None for pt in grid}

    total = 1 << n
    chunk = 1 << 15
    cols = np.arange(n)
    radii_arr = np.asarray(radii)
    for start in range(1, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((ids[:, None] >> cols[None, :]) & 1).astype(bool)
        masses = bits @ w
        dmin = np.full((ids.size, n), sent, dtype=np.int64)
        for j in range(n):
            sel = bits[:, j]
            if sel.any():
                dmin[sel] = np.minimum(dmin[sel], dist[j][None, :])
        far = np.empty((ids.size, n_r))
        for k in range(n_r):
            far[:, k] = (dmin >= radii_arr[k]) @ w
        for pt in grid:
            delta, delta_p = pt
            feasible = masses >= delta - MASS_TOL
            if not feasible.any():
                continue
            ok = far[feasible] >= delta_p - MASS_TOL
            cand = ok.sum(axis=1) - 1  # far is non-increasing along radii
            top = int(cand.max())
            if top > best_c[pt] or (
                top == best_c[pt]
                and best_id[pt] is not None
                and int(ids[feasible][cand == top][0]) < best_id[pt]
            ):
                best_c[pt] = top
                best_id[pt] = int(ids[feasible][cand == top][0])

    samples = []
    for pt in grid:
        delta, delta_p = pt
        idx = best_c[pt]
        sid = best_id[pt]
        assert idx >= 0 and sid is not None, "full space is always feasible"
        r = radii[idx]
        a_atoms = tuple(int(j) for j in range(n) if (sid >> j) & 1)
        dmin_row = dist[list(a_atoms)].min(axis=0)
        b_atoms = tuple(int(j) for j in np.flatnonzero(dmin_row >= r))
        c_val: int | float = math.inf if r == sent else int(r)
        # Witness soundness: recompute masses and the distance directly.
        assert g.space.mass(a_atoms) >= delta - MASS_TOL
        assert g.space.mass(b_atoms) >= delta_p - MASS_TOL
        actual = set_distance(g, a_atoms, b_atoms) if b_atoms else None
        if b_atoms:
            assert (actual == c_val) or (c_val == math.inf and actual == math.inf)
        samples.append(
            ProfileSample(
                delta=delta,
                delta_prime=delta_p,
                c_lower=c_val,
                c_upper=c_val,
                witness=(a_atoms, b_atoms),
                lower_method="exhaustive",
                upper_method="exhaustive",
            )
        )
    return ConcentrationProfile(samples=tuple(samples), mode="exact")


def spectral_distance_bound(
    g: Graphing, delta: float, delta_prime: float
) -> int | float:
    """Upper bound on c(delta, delta') from the walk's spectral gap."""
    if not is_ergodic_metric(g):
        return math.inf
    if g.atom_count == 1:
        return 0
    try:
        report = folner.spectral_gap(g)
    except ConvergenceError:
        return math.inf
    gap = report.gap
    if gap <= 0:
        return math.inf
    pi = folner.stationary_weights(g)
    mu = g.space.weights
    rho = float((pi / mu).min())
    if rho <= 0:
        return math.inf
    lam = 1.0 - gap
    if lam <= 0:
        return 1
    level = math.log(1.0 / (rho * rho * delta * delta_prime))
    return int(math.ceil(level / (2.0 * math.log(1.0 / lam))))


def _ball_prefix(g: Graphing, seed: int, target: float) -> np.ndarray | None:
    """Smallest BFS-prefix (distance, then index order) with mass >= target."""
    dist = distances_from(g, [seed])
    order = sorted(
        (int(u) for u in np.flatnonzero(np.isfinite(dist))),
        key=lambda u: (dist[u], u),
    )
    mask = np.zeros(g.atom_count, dtype=bool)
    acc = 0.0
    for u in order:
        mask[u] = True
        acc += g.space.weights[u]
        if acc >= target - MASS_TOL:
            return mask
    return None


def _double_sweep_seeds(g: Graphing) -> list[int]:
    d0 = distances_from(g, [0])
    fin = np.flatnonzero(np.isfinite(d0))
    u = int(fin[np.argmax(d0[fin])])
    du = distances_from(g, [u])
    fin = np.flatnonzero(np.isfinite(du))
    v = int(fin[np.argmax(du[fin])])
    return [u, v]


def _witness_seeds(g: Graphing, effort: int) -> list[int]:
    n = g.atom_count
    seeds = _double_sweep_seeds(g)
    f = folner.fiedler_vector(g)
    if np.any(f != 0):
        seeds.append(int(np.argmin(f)))
        seeds.append(int(np.argmax(f)))
    count = min(n, max(0, effort))
    seeds.extend(int(round(i * n / count)) % n for i in range(count))
    out = []
    for s in seeds:
        if s not in out:
            out.append(s)
    return out


def profile_heuristic(
    g: Graphing,
    grid: Sequence[tuple[float, float]],
    effort: int = 8,
) -> ConcentrationProfile:
    """Lower bounds from greedy far pairs, upper bounds from the gap.

    The lower-bound search grows a ball around each seed until it reaches
    one of the two masses, then reads off the largest radius whose far set
    still carries the other mass; strategies race and the best witness wins
    with a lexicographic tie-break.
    """
    for d, dp in grid:
        if not (0 < d <= 1 and 0 < dp <= 1):
            raise ValueError("grid masses must lie in (0, 1]")
    n = g.atom_count
    w = g.space.weights
    seeds = _witness_seeds(g, effort)
    sides = sorted({d for d, _ in grid} | {dp for _, dp in grid})
    # far_profiles[(seed, m)] = (A mask, distance field from A)
    far_fields = {}
    for seed in seeds:
        for m in sides:
            a_mask = _ball_prefix(g, seed, m)
            if a_mask is not None:
                far_fields[(seed, m)] = (a_mask, distances_from(g, a_mask))

    samples = []
    for delta, delta_p in grid:
        best = None  # (c, a_key, b_key, a_mask, b_mask)
        for grow_mass, need_mass, swapped in (
            (delta, delta_p, False),
            (delta_p, delta, True),
        ):
            for seed in seeds:
                item = far_fields.get((seed, grow_mass))
                if item is None:
                    continue
                a_mask, dist = item
                finite = np.isfinite(dist)
                far_inf = float(w[~finite].sum())
                c: int | float = -1
                rmax = int(dist[finite].max(initial=0))
                for r in range(rmax, 0, -1):
                    if float(w[dist >= r].sum()) >= need_mass - MASS_TOL:
                        c = r
                        break
                if far_inf >= need_mass - MASS_TOL:
                    c = math.inf
                if c == -1:
                    c = 0 if float(w.sum()) >= need_mass - MASS_TOL else -1
                if c == -1:
                    continue
                b_mask = dist >= (c if c != math.inf else np.inf)
                if not b_mask.any():
                    b_mask = a_mask.copy()  # c == 0: the sets may overlap
                pair = (a_mask, b_mask) if not swapped else (b_mask, a_mask)
                key = (
                    as_atom_tuple(n, pair[0]),
                    as_atom_tuple(n, pair[1]),
                )
                if (
                    best is None
                    or c > best[0]
                    or (c == best[0] and key < (best[1], best[2]))
                ):
                    best = (c, key[0], key[1], pair[0], pair[1])
        upper = spectral_distance_bound(g, delta, delta_p)
        if best is None or best[0] < 0:
            c_lower: int | float = 0
            witness = None
        else:
            c_lower = best[0]
            witness = (best[1], best[2])
            # Soundness: the witness must verify its claim directly.
            actual = set_distance(g, best[3], best[4])
            assert actual >= c_lower if c_lower != math.inf else actual == math.inf
        assert c_lower <= upper, "heuristic bounds crossed"
        samples.append(
            ProfileSample(
                delta=delta,
                delta_prime=delta_p,
                c_lower=c_lower,
                c_upper=upper,
                witness=witness,
                lower_method="greedy-far-pair",
                upper_method="spectral" if upper != math.inf else "none",
            )
        )
    return ConcentrationProfile(samples=tuple(samples), mode="heuristic")


def nonconcentration_witness(
    g: Graphing,
    delta: float,
    target_distance: int,
    effort: int = 8,
) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """A pair of mass >= delta sets at distance >= target_distance, if found.

    For every seed strategy the candidate A is a minimal ball prefix of mass
    delta and B is the complement of ball(A, target-1); absence is a value,
    not an error.  Returned pairs are re-verified by direct recomputation.
    """
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 0.5]")
    if target_distance < 1:
        raise ValueError("target distance must be at least 1")
    n = g.atom_count
    w = g.space.weights
    best = None
    for seed in _witness_seeds(g, effort):
        a_mask = _ball_prefix(g, seed, delta)
        if a_mask is None:
            continue
        dist = distances_from(g, a_mask)
        b_mask = dist >= target_distance
        if float(w[b_mask].sum()) < delta - MASS_TOL:
            continue
        d = set_distance(g, a_mask, b_mask)
        if d < target_distance:
            continue
        key = (as_atom_tuple(n, a_mask), as_atom_tuple(n, b_mask))
        rank = (-(d if d != math.inf else n + 1), key)
        if best is None or rank < best[0]:
            best = (rank, key)
    return best[1] if best else None


# ---------------------------------------------------------------------------
# Distance profile functions and level sets.


@dataclass(frozen=True)
class DistanceProfileFunction:
    """1 on the base set, 1 - i/n on the sphere at distance i, 0 past n.

    Values step down by exactly 1/n per unit of distance, so the function
    drops by at most 1/n across any edge and its level sets at the grid
    {i/n} are the balls around the base set.
    """

    base_set: tuple[int, ...]
    radius: int
    values: np.ndarray
    distances: np.ndarray

    def level_set(self, alpha: float) -> tuple[int, ...]:
        """Super-level set {value >= alpha} for alpha in (0, 1]."""
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        k = math.floor(self.radius * (1.0 - alpha) + 1e-9)
        return tuple(int(i) for i in np.flatnonzero(self.distances <= k))


def distance_profile(
    g: Graphing, atoms: Iterable[int] | np.ndarray, radius: int
) -> DistanceProfileFunction:
    if radius < 1:
        raise ValueError("profile radius must be at least 1")
    mask = as_mask(g.atom_count, atoms)
    if not mask.any():
        raise ValueError("base set must be non-empty")
    dist = distances_from(g, mask)
    vals = np.where(np.isfinite(dist), np.maximum(0.0, 1.0 - dist / radius), 0.0)
    return DistanceProfileFunction(
        base_set=as_atom_tuple(g.atom_count, mask),
        radius=radius,
        values=vals,
        distances=dist,
    )


@dataclass(frozen=True)
class LevelSet:
    alpha: float
    atoms: tuple[int, ...]
    report: folner.InvarianceReport


@dataclass(frozen=True)
class CoareaCheck:
    """Per-generator identity between averaged defects and the L1 increment.

    average_symmetric_defect is the mean over the canonical alpha grid of
    mu(phi(A^a & D) symdiff (A^a & D')); it equals l1_norm exactly and is
    bounded by displacement / radius.
    """

    generator: int
    average_symmetric_defect: float
    l1_norm: float
    displacement: float


@dataclass(frozen=True)
class LevelSetExtraction:
    profile: DistanceProfileFunction
    levels: tuple[LevelSet, ...]
    coarea: tuple[CoareaCheck, ...]
    degenerate: bool


def canonical_alpha_grid(n: int) -> tuple[float, ...]:
    """The grid {i/n : i = 1..n} carrying the level-set average.

    The profile's value set is {i/n}, so the integral of any level-set
    functional over alpha in (0, 1] collapses to the mean over this grid.
    """
    return tuple(i / n for i in range(1, n + 1))


def level_set_extraction(
    g: Graphing,
    a: Iterable[int] | np.ndarray,
    n: int,
    alphas: Sequence[float] | None = None,
) -> LevelSetExtraction:
    """Super-level sets of the distance profile with invariance reports.

    For each generator phi with displacement |phi| = sum over the image of
    d(phi^-1 x, x) weight(x), the mean over the canonical grid of the
    symmetric defects equals the L1 norm of the profile increment along phi
    and is at most |phi| / n; both quantities ship in the coarea checks.
    A radius larger than the reach of the base set degenerates (the far set
    is empty) and is reported through the flag.
    """
    profile = distance_profile(g, a, n)
    grid = canonical_alpha_grid(n) if alphas is None else tuple(alphas)
    levels = []
    for alpha in grid:
        atoms = profile.level_set(alpha)
        levels.append(
            LevelSet(alpha=alpha, atoms=atoms, report=folner.invariance_defect(g, atoms))
        )
    w = g.space.weights
    pi_vals = profile.values
    coarea = []
    canonical = canonical_alpha_grid(n)
    for idx, phi in enumerate(g.generators):
        sym_sum = 0.0
        for alpha in canonical:
            mask = as_mask(g.atom_count, profile.level_set(alpha))
            hit = mask[phi.domain]
            image_of_a = np.zeros(g.atom_count, dtype=bool)
            image_of_a[phi.image[hit]] = True
            in_image = np.zeros(g.atom_count, dtype=bool)
            in_image[phi.image] = True
            sym_sum += float(w[image_of_a ^ (mask & in_image)].sum())
        average = sym_sum / n
        l1 = float(
            np.sum(np.abs(pi_vals[phi.domain] - pi_vals[phi.image]) * w[phi.image])
        )
        moved = phi.domain != phi.image
        displacement = float(w[phi.image[moved]].sum())
        coarea.append(
            CoareaCheck(
                generator=idx,
                average_symmetric_defect=average,
                l1_norm=l1,
                displacement=displacement,
            )
        )
    degenerate = bool(np.all(profile.distances <= n))
    return LevelSetExtraction(
        profile=profile,
        levels=tuple(levels),
        coarea=tuple(coarea),
        degenerate=degenerate,
    )
