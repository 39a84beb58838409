"""Invariance defects, spectral gap surrogate, Folner-set search, and the
greedy accumulation of almost-invariant sets.

Strong ergodicity has no single-instance finite definition; this module
operationalises it family-wise: a family of graphings indexed by resolution
"behaves strongly ergodically" when invariance defects at non-trivial mass
stay bounded away from zero across resolutions, and "amenably" when they
vanish.  The spectral gap of the lazy averaging walk is the quantitative
surrogate used by the search heuristics and the concentration bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, ResourceCapError
from .graphing import Graphing, boundary_mass, degree_report, distances_from
from .space import as_atom_tuple, as_mask

MASS_TOL = 1e-12
_LANCZOS_SEED = 0x5EED


# ---------------------------------------------------------------------------
# Invariance defects.


@dataclass(frozen=True)
class InvarianceReport:
    """Per-generator escape masses of a candidate invariant set."""

    per_generator: tuple[tuple[int, float], ...]
    max_defect: float
    symmetric_defects: tuple[tuple[int, float], ...]
    set_mass: float


def invariance_defect(g: Graphing, atoms: Iterable[int] | np.ndarray) -> InvarianceReport:
    """Defects mu(phi(A & D) \\ A) and symmetric variants, per generator.

    Exact arithmetic over atom masses: every number in the report recomputes
    from (g, A) alone.
    """
    n = g.atom_count
    mask = as_mask(n, atoms)
    w = g.space.weights
    one_sided = []
    symmetric = []
    for idx, phi in enumerate(g.generators):
        hit = mask[phi.domain]
        image_of_a = np.zeros(n, dtype=bool)
        image_of_a[phi.image[hit]] = True
        defect = float(w[image_of_a & ~mask].sum())
        in_image = np.zeros(n, dtype=bool)
        in_image[phi.image] = True
        a_in_image = mask & in_image
        sym = float(w[image_of_a ^ a_in_image].sum())
        one_sided.append((idx, defect))
        symmetric.append((idx, sym))
    max_defect = max((d for _, d in one_sided), default=0.0)
    return InvarianceReport(
        per_generator=tuple(one_sided),
        max_defect=max_defect,
        symmetric_defects=tuple(symmetric),
        set_mass=float(w[mask].sum()),
    )


# ---------------------------------------------------------------------------
# Lazy averaging walk and its spectrum.


def walk_conductances(g: Graphing) -> np.ndarray:
    """Per-atom total conductance kappa(x) = sum over edges (w(x)+w(y))/2.

    Edge conductance (w(x)+w(y))/2 makes the walk reversible and reduces to
    the plain lazy simple walk (I + D^-1 A)/2 on uniform-weight spaces.
    """
    n = g.atom_count
    kappa = np.zeros(n)
    if g.edge_count:
        x, y = g.edges[:, 0], g.edges[:, 1]
        c = 0.5 * (g.space.weights[x] + g.space.weights[y])
        np.add.at(kappa, x, c)
        np.add.at(kappa, y, c)
    return kappa


def stationary_weights(g: Graphing) -> np.ndarray:
    """Stationary distribution of the walk (zero on isolated atoms)."""
    kappa = walk_conductances(g)
    total = kappa.sum()
    return kappa / total if total > 0 else kappa


def _walk_symmetric_entries(g: Graphing):
    """Rows/cols/values of the off-diagonal part of the symmetrised lazy walk."""
    kappa = walk_conductances(g)
    x, y = g.edges[:, 0], g.edges[:, 1]
    c = 0.5 * (g.space.weights[x] + g.space.weights[y])
    vals = 0.5 * c / np.sqrt(kappa[x] * kappa[y])
    return kappa, x, y, vals


def walk_matrix_dense(g: Graphing) -> np.ndarray:
    """Symmetrised lazy walk as a dense matrix; isolated atoms hold still."""
    n = g.atom_count
    s = np.full(n, 0.5)
    m = np.diag(s)
    if g.edge_count:
        kappa, x, y, vals = _walk_symmetric_entries(g)
        m[x, y] += vals
        m[y, x] += vals
        m[np.flatnonzero(kappa == 0), :] = 0.0
    iso = np.flatnonzero(walk_conductances(g) == 0)
    m[iso, iso] = 1.0
    return m


def walk_matrix_sparse(g: Graphing) -> sp.csr_matrix:
    n = g.atom_count
    diag = np.full(n, 0.5)
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [diag]
    if g.edge_count:
        kappa, x, y, v = _walk_symmetric_entries(g)
        rows += [x, y]
        cols += [y, x]
        vals += [v, v]
        diag[kappa == 0] = 1.0
    else:
        diag[:] = 1.0
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )


@dataclass(frozen=True)
class SpectralReport:
    """Gap of the symmetrised lazy walk restricted to mean-zero functions."""

    gap: float
    eigenvalue_estimates: tuple[float, ...]
    method: str  # "exact" | "iterative"
    residual: float
    components: int = 1


def _lanczos_second(
    m: sp.csr_matrix, top_vec: np.ndarray, k: int, rng: np.random.Generator
):
    """Largest Ritz pair of m deflated against a known top eigenvector."""
    n = m.shape[0]
    k = min(k, n - 1)
    q = rng.standard_normal(n)
    q -= top_vec * (top_vec @ q)
    q /= np.linalg.norm(q)
    big_q = np.zeros((n, k))
    alphas = np.zeros(k)
    betas = np.zeros(max(k - 1, 0))
    steps = 0
    for i in range(k):
        big_q[:, i] = q
        u = m @ q
        u -= top_vec * (top_vec @ u)
        alphas[i] = q @ u
        u -= big_q[:, : i + 1] @ (big_q[:, : i + 1].T @ u)
        # Second pass keeps orthogonality through rounding.
        u -= big_q[:, : i + 1] @ (big_q[:, : i + 1].T @ u)
        steps = i + 1
        if i + 1 == k:
            break
        beta = np.linalg.norm(u)
        if beta < 1e-13:
            break
        betas[i] = beta
        q = u / beta
    t = np.diag(alphas[:steps])
    if steps > 1:
        t += np.diag(betas[: steps - 1], 1) + np.diag(betas[: steps - 1], -1)
    evals, evecs = np.linalg.eigh(t)
    theta = float(evals[-1])
    z = big_q[:, :steps] @ evecs[:, -1]
    z /= np.linalg.norm(z)
    r = m @ z - theta * z
    r -= top_vec * (top_vec @ r)
    return theta, float(np.linalg.norm(r)), z


def spectral_gap(
    g: Graphing,
    method: str = "auto",
    tol: float = 1e-8,
    dense_cap: int = 512,
    max_krylov: int = 1024,
) -> SpectralReport:
    """Gap 1 - lambda_2 of the symmetrised lazy walk.

    Laziness keeps the spectrum inside [0, 1], so the second-largest modulus
    is the second-largest eigenvalue.  Dense solve up to dense_cap atoms,
    Lanczos with stationary-vector deflation above; a disconnected graphing
    short-circuits to gap 0 with the component count.
    """
    n = g.atom_count
    comps = g.component_count()
    if comps > 1:
        return SpectralReport(0.0, (1.0, 1.0), "exact", 0.0, components=comps)
    if n == 1:
        return SpectralReport(1.0, (1.0,), "exact", 0.0, components=1)
    if method == "auto":
        method = "exact" if n <= dense_cap else "iterative"
    if method == "exact":
        evals = np.linalg.eigvalsh(walk_matrix_dense(g))[::-1]
        gap = float(min(max(1.0 - evals[1], 0.0), 1.0))
        return SpectralReport(gap, tuple(float(v) for v in evals[:8]), "exact", 0.0)
    if method != "iterative":
        raise ValueError("method must be 'auto', 'exact' or 'iterative'")
    m = walk_matrix_sparse(g)
    kappa = walk_conductances(g)
    top = np.sqrt(kappa)
    top /= np.linalg.norm(top)
    rng = np.random.default_rng(_LANCZOS_SEED)
    best = None
    for k in (64, 128, 256, 512, max_krylov):
        theta, residual, _ = _lanczos_second(m, top, k, rng)
        if best is None or residual < best[1]:
            best = (theta, residual)
        if residual <= tol:
            gap = float(min(max(1.0 - theta, 0.0), 1.0))
            return SpectralReport(gap, (1.0, float(theta)), "iterative", residual)
        if k >= n - 1:
            break
    raise ConvergenceError(
        f"Lanczos did not reach residual {tol} (best {best[1]:.3e})",
        residual=best[1],
    )


def fiedler_vector(g: Graphing) -> np.ndarray:
    """Second eigenfunction of the walk, for sweep cuts and seed picking.

    Deterministic: fixed internal seed, sign normalised so the first entry
    of largest magnitude is positive.  Cached per graphing.
    """
    cached = g.__dict__.get("_fiedler")
    if cached is not None:
        return cached
    n = g.atom_count
    kappa = walk_conductances(g)
    sqrt_kappa = np.sqrt(kappa)
    if n <= 512:
        evals, evecs = np.linalg.eigh(walk_matrix_dense(g))
        z = evecs[:, -2] if n >= 2 else evecs[:, -1]
    else:
        m = walk_matrix_sparse(g)
        top = sqrt_kappa / np.linalg.norm(sqrt_kappa) if sqrt_kappa.any() else None
        if top is None:
            z = np.zeros(n)
        else:
            rng = np.random.default_rng(_LANCZOS_SEED)
            _, _, z = _lanczos_second(m, top, min(n - 1, 512), rng)
    f = np.zeros(n)
    nz = sqrt_kappa > 0
    f[nz] = z[nz] / sqrt_kappa[nz]
    if np.any(f != 0):
        lead = np.flatnonzero(np.abs(f) == np.abs(f).max())[0]
        if f[lead] < 0:
            f = -f
    f.flags.writeable = False
    g.__dict__["_fiedler"] = f
    return f


# ---------------------------------------------------------------------------
# Folner search.


@dataclass(frozen=True)
class FolnerCertificate:
    """Best boundary-ratio sets found at a ladder of mass scales."""

    sets: tuple[tuple[int, ...], ...]
    masses: tuple[float, ...]
    ratios: tuple[float, ...]
    windows: tuple[tuple[float, float], ...]
    vanishing: bool
    thresholds: tuple[float, ...]


class _SetState:
    """Incremental boundary bookkeeping for prefix sweeps and local moves."""

    def __init__(self, g: Graphing):
        self.g = g
        self.w = g.space.weights
        self.adj = g.adjacency()
        self.in_set = np.zeros(g.atom_count, dtype=bool)
        self.cnt = np.zeros(g.atom_count, dtype=int)  # in-set neighbours
        self.mass = 0.0
        self.bmass = 0.0

    def neighbors(self, u: int) -> np.ndarray:
        return self.adj.indices[self.adj.indptr[u] : self.adj.indptr[u + 1]]

    def add(self, u: int) -> None:
        assert not self.in_set[u]
        self.in_set[u] = True
        self.mass += self.w[u]
        if self.cnt[u] > 0:
            self.bmass -= self.w[u]
        for v in self.neighbors(u):
            if not self.in_set[v]:
                if self.cnt[v] == 0:
                    self.bmass += self.w[v]
                self.cnt[v] += 1
            else:
                self.cnt[v] += 1
        # cnt counts in-set neighbours for every atom; in-set atoms too.

    def remove(self, u: int) -> None:
        assert self.in_set[u]
        self.in_set[u] = False
        self.mass -= self.w[u]
        for v in self.neighbors(u):
            self.cnt[v] -= 1
            if not self.in_set[v] and self.cnt[v] == 0:
                self.bmass -= self.w[v]
        if self.cnt[u] > 0:
            self.bmass += self.w[u]

    def add_delta(self, u: int) -> tuple[float, float]:
        """(mass, boundary mass) after adding u, without mutating."""
        new_mass = self.mass + self.w[u]
        new_b = self.bmass
        if self.cnt[u] > 0:
            new_b -= self.w[u]
        for v in self.neighbors(u):
            if not self.in_set[v] and self.cnt[v] == 0 and v != u:
                new_b += self.w[v]
        return new_mass, new_b

    def remove_delta(self, u: int) -> tuple[float, float]:
        new_mass = self.mass - self.w[u]
        new_b = self.bmass
        for v in self.neighbors(u):
            if not self.in_set[v] and self.cnt[v] == 1:
                new_b -= self.w[v]
        others = self.cnt[u]
        if others > 0:
            new_b += self.w[u]
        return new_mass, new_b


def _set_key(mask: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(mask))


class _Best:
    """Tracks the minimum ratio with deterministic lexicographic tie-break."""

    def __init__(self):
        self.ratio = math.inf
        self.mask = None
        self.mass = 0.0

    def offer(self, ratio: float, mask: np.ndarray, mass: float) -> None:
        if ratio < self.ratio - 1e-15 or (
            abs(ratio - self.ratio) <= 1e-15
            and self.mask is not None
            and _set_key(mask) < _set_key(self.mask)
        ):
            self.ratio = ratio
            self.mask = mask.copy()
            self.mass = mass


def _prefix_candidates(
    g: Graphing, order: Sequence[int], lo: float, hi: float, best: _Best
) -> None:
    state = _SetState(g)
    for u in order:
        state.add(int(u))
        if state.mass > hi + MASS_TOL:
            break
        if state.mass >= lo - MASS_TOL and state.mass > 0:
            best.offer(state.bmass / state.mass, state.in_set, state.mass)


def _bfs_order(g: Graphing, seed: int) -> list[int]:
    dist = distances_from(g, [seed])
    finite = np.flatnonzero(np.isfinite(dist))
    return sorted((int(u) for u in finite), key=lambda u: (dist[u], u))


def _exhaustive_window(g: Graphing, lo: float, hi: float, best: _Best) -> None:
    """All subsets inside a mass window, vectorised over bitmask chunks."""
    n = g.atom_count
    w = g.space.weights
    adj = g.adjacency().toarray().astype(np.int32)
    total = 1 << n
    chunk = 1 << 15
    for start in range(1, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((ids[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
        masses = bits @ w
        feasible = (masses >= lo - MASS_TOL) & (masses <= hi + MASS_TOL)
        if not feasible.any():
            continue
        sub = bits[feasible]
        sub_mass = masses[feasible]
        has_nb = (sub.astype(np.int32) @ adj) > 0
        bmass = ((has_nb & ~sub) @ w).astype(float)
        ratios = bmass / sub_mass
        k = int(np.argmin(ratios))
        ties = np.flatnonzero(ratios <= ratios[k] + 1e-15)
        for t in ties:
            best.offer(float(ratios[t]), sub[t], float(sub_mass[t]))


def _local_moves(
    g: Graphing, mask: np.ndarray, lo: float, hi: float, rounds: int, best: _Best
) -> None:
    state = _SetState(g)
    for u in np.flatnonzero(mask):
        state.add(int(u))
    for _ in range(rounds):
        if state.mass <= 0:
            break
        current = state.bmass / state.mass
        move = None  # (ratio, kind, atom)
        bnd = np.flatnonzero((state.cnt > 0) & ~state.in_set)
        for u in bnd:
            m, b = state.add_delta(int(u))
            if lo - MASS_TOL <= m <= hi + MASS_TOL and m > 0:
                r = b / m
                if r < current - 1e-15 and (move is None or r < move[0]):
                    move = (r, "add", int(u))
        for u in np.flatnonzero(state.in_set):
            m, b = state.remove_delta(int(u))
            if lo - MASS_TOL <= m <= hi + MASS_TOL and m > 0:
                r = b / m
                if r < current - 1e-15 and (move is None or r < move[0]):
                    move = (r, "remove", int(u))
        if move is None:
            break
        _, kind, atom = move
        if kind == "add":
            state.add(atom)
        else:
            state.remove(atom)
        best.offer(state.bmass / state.mass, state.in_set, state.mass)


def _search_window(g: Graphing, lo: float, hi: float, effort: int) -> _Best:
    n = g.atom_count
    best = _Best()
    if n <= 20 and effort >= (1 << n):
        _exhaustive_window(g, lo, hi, best)
        return best
    f = fiedler_vector(g)
    order_asc = sorted(range(n), key=lambda u: (f[u], u))
    _prefix_candidates(g, order_asc, lo, hi, best)
    _prefix_candidates(g, order_asc[::-1], lo, hi, best)
    seed_count = min(n, 4 + 2 * effort)
    seeds = sorted({int(round(i * n / seed_count)) % n for i in range(seed_count)})
    for seed in seeds:
        _prefix_candidates(g, _bfs_order(g, seed), lo, hi, best)
    if best.mask is not None and effort > 0:
        _local_moves(g, best.mask, lo, hi, rounds=effort, best=best)
    return best


def default_vanishing_thresholds(scales: int) -> tuple[float, ...]:
    return tuple(1.0 / math.sqrt(k + 1) for k in range(scales))


def folner_search(
    g: Graphing,
    mass_cap: float,
    effort: int,
    scales: int = 4,
    thresholds: Sequence[float] | None = None,
) -> FolnerCertificate:
    """Best boundary-to-mass ratio sets at a halving ladder of mass scales.

    Scale k searches the window [mass_cap/2^(k+1), mass_cap/2^k] using
    Fiedler sweep cuts, ball growth from sampled seeds, and local moves for
    `effort` rounds; with effort >= 2^atoms (and at most 20 atoms) the
    window is enumerated outright.  Raising effort only ever grows the
    candidate set, so ratios are monotone in effort.  Scales whose window
    cannot hold any subset are dropped.
    """
    if not 0 < mass_cap <= 1:
        raise ValueError("mass_cap must lie in (0, 1]")
    if thresholds is None:
        thresholds = default_vanishing_thresholds(scales)
    min_w = float(g.space.weights.min())
    sets, masses, ratios, windows, used_thresholds = [], [], [], [], []
    for k in range(scales):
        hi = mass_cap / (2**k)
        lo = hi / 2
        if hi + MASS_TOL < min_w:
            break
        best = _search_window(g, lo, hi, effort)
        if best.mask is None:
            continue
        sets.append(_set_key(best.mask))
        masses.append(best.mass)
        ratios.append(best.ratio)
        windows.append((lo, hi))
        used_thresholds.append(float(thresholds[k]) if k < len(thresholds) else 0.0)
    vanishing = bool(sets) and all(
        r <= t + MASS_TOL for r, t in zip(ratios, used_thresholds)
    )
    return FolnerCertificate(
        sets=tuple(sets),
        masses=tuple(masses),
        ratios=tuple(ratios),
        windows=tuple(windows),
        vanishing=vanishing,
        thresholds=tuple(used_thresholds),
    )


# ---------------------------------------------------------------------------
# Greedy accumulation of an almost-invariant set.


def admissible_inner_ratio(epsilon: float, ulb_constant: float) -> float:
    """Largest eps' with eps'*C < 1 and eps'(1+C)/(1-eps'C) <= eps.

    Solving the second constraint with equality gives eps/(1 + C + eps*C),
    which automatically satisfies the first.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if ulb_constant < 0:
        raise ValueError("the cocycle bound must be non-negative")
    return epsilon / (1.0 + ulb_constant + epsilon * ulb_constant)


@dataclass(frozen=True)
class AccumulationResult:
    atoms: tuple[int, ...]
    report: InvarianceReport
    mass: float
    reached_target: bool
    maximal: bool
    steps: tuple[dict, ...] = field(default_factory=tuple)
    stall_reason: str | None = None


def _trim_piece(g: Graphing, mask: np.ndarray, budget: float) -> np.ndarray | None:
    """Shrink a set to mass <= budget, removing boundary-minimal atoms."""
    state = _SetState(g)
    for u in np.flatnonzero(mask):
        state.add(int(u))
    while state.mass > budget + MASS_TOL:
        members = np.flatnonzero(state.in_set)
        if members.size == 0:
            return None
        choice = None
        for u in members:
            _, b = state.remove_delta(int(u))
            if choice is None or b < choice[0] - 1e-15:
                choice = (b, int(u))
        state.remove(choice[1])
    return state.in_set.copy() if state.in_set.any() else None


def accumulate_invariant(
    g: Graphing,
    epsilon: float,
    target_mass: float,
    folner_source: FolnerCertificate | dict | None = None,
    effort: int = 8,
    max_steps: int = 64,
) -> AccumulationResult:
    """Grow an almost-invariant set by merging Folner pieces greedily.

    Each step restricts the graphing to the complement of the current set,
    searches there for a piece whose boundary-to-mass ratio clears the
    calibrated inner tolerance eps' = eps/(1+C+eps*C) (C the cocycle bound),
    merges it, and re-verifies the boundary additivity of the merge.
    Falling short of the target is reported, not raised: it mirrors the
    dichotomy between reaching full mass and hitting a maximal set.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < target_mass < 1:
        raise ValueError("target_mass must lie strictly between 0 and 1")
    n = g.atom_count
    w = g.space.weights
    search_params = {"effort": effort, "scales": 6}
    if isinstance(folner_source, dict):
        search_params.update(folner_source)
    eps_inner = admissible_inner_ratio(epsilon, degree_report(g).ulb_constant)
    acc = np.zeros(n, dtype=bool)
    steps: list[dict] = []
    stall_reason = None
    maximal = False

    for _ in range(max_steps):
        mass_now = float(w[acc].sum())
        remaining = target_mass - mass_now
        if remaining <= MASS_TOL:
            break
        y_mask = ~acc
        if not y_mask.any():
            break
        if acc.any():
            from .families import restrict  # local import avoids a cycle

            try:
                sub = restrict(g, y_mask)
            except ResourceCapError as exc:
                stall_reason = f"restriction failed: {exc}"
                maximal = True
                break
            atom_map = np.asarray(sub.metadata["atom_map"], int)
            y_total = float(sub.metadata["normalization"])
        else:
            sub = g
            atom_map = np.arange(n)
            y_total = 1.0
        remaining_sub = min(remaining / y_total, 1.0)

        piece_mask_sub = None
        cert = folner_search(sub, mass_cap=max(remaining_sub, 1e-9), **search_params)
        for s, ratio in zip(cert.sets, cert.ratios):
            if ratio <= eps_inner + MASS_TOL:
                piece_mask_sub = as_mask(sub.atom_count, s)
                break
        if piece_mask_sub is None and remaining_sub < 0.5:
            # Trimming guard: pieces may only exist at coarser scales; trim
            # the first admissible one down to the remaining budget.
            cert = folner_search(sub, mass_cap=0.5, **search_params)
            for s, ratio in zip(cert.sets, cert.ratios):
                if ratio <= eps_inner + MASS_TOL:
                    trimmed = _trim_piece(
                        sub, as_mask(sub.atom_count, s), remaining_sub
                    )
                    if trimmed is not None:
                        piece_mask_sub = trimmed
                        break
        if piece_mask_sub is None:
            maximal = True
            stall_reason = stall_reason or (
                f"no piece with ratio <= {eps_inner:.6g} in the complement"
            )
            break

        piece = np.zeros(n, dtype=bool)
        piece[atom_map[np.flatnonzero(piece_mask_sub)]] = True
        piece_mass = float(w[piece].sum())
        # Full-space bound for the piece, independent of the restricted search.
        adj = g.adjacency()
        nb_piece = (adj @ piece) > 0
        escape = float(w[nb_piece & ~piece & ~acc].sum())
        if escape > epsilon * piece_mass + MASS_TOL:
            maximal = True
            stall_reason = "candidate piece failed the full-space boundary bound"
            break

        nb_acc = (adj @ acc) > 0
        old_boundary = nb_acc & ~acc
        merged = acc | piece
        nb_merged = (adj @ merged) > 0
        merged_boundary = nb_merged & ~merged
        b_old_part = old_boundary & ~piece
        b_new_part = (nb_piece & ~piece) & ~acc
        overlap = b_old_part & b_new_part
        additive = not overlap.any()
        lhs = float(w[merged_boundary].sum())
        rhs = float(w[b_old_part].sum()) + float(w[b_new_part].sum())
        if additive:
            assert abs(lhs - rhs) <= 1e-12, "boundary additivity violated"
        merged_mass = float(w[merged].sum())
        assert lhs <= epsilon * merged_mass + 1e-12, "merged set broke the bound"
        steps.append(
            {
                "piece": as_atom_tuple(n, piece),
                "piece_mass": piece_mass,
                "piece_escape": escape,
                "merged_mass": merged_mass,
                "merged_boundary_mass": lhs,
                "boundary_additive": additive,
            }
        )
        acc = merged

    mass_now = float(w[acc].sum())
    return AccumulationResult(
        atoms=as_atom_tuple(n, acc),
        report=invariance_defect(g, acc),
        mass=mass_now,
        reached_target=mass_now >= target_mass - 1e-9,
        maximal=maximal,
        steps=tuple(steps),
        stall_reason=stall_reason,
    )


# ---------------------------------------------------------------------------
# Resolution series.


@dataclass(frozen=True)
class SeriesEntry:
    index: int
    label: str
    mass: float | None
    report: InvarianceReport | None
    error: str | None = None
    extra: dict = field(default_factory=dict)


def _arc_set(g: Graphing, target_mass: float) -> np.ndarray:
    w = g.space.weights
    csum = np.cumsum(w)
    k = int(np.searchsorted(csum, target_mass - MASS_TOL)) + 1
    mask = np.zeros(g.atom_count, dtype=bool)
    mask[:k] = True
    return mask


def asymptotic_invariance_series(
    g_family: Sequence[Graphing],
    set_builder: str,
    target_mass: float = 0.25,
    epsilon: float = 0.5,
    effort: int = 8,
) -> list[SeriesEntry]:
    """Per-resolution invariance defects for a fixed set-building strategy.

    Strategies: 'arcs' (index-contiguous blocks; cyclic families only),
    'level_set' (far-pair witness plus level-set extraction), 'accumulate'
    (greedy Folner merging).  A strategy that does not apply to a family
    member produces an error entry and the series continues.
    """
    if set_builder not in ("arcs", "level_set", "accumulate"):
        raise ValueError(f"unknown strategy '{set_builder}'")
    entries: list[SeriesEntry] = []
    for idx, g in enumerate(g_family):
        label = f"{g.metadata.get('family', 'graphing')}:{g.atom_count}"
        try:
            if set_builder == "arcs":
                if g.metadata.get("family") not in ("rotation", "odometer"):
                    raise ValueError("arc strategy needs a cyclic family member")
                mask = _arc_set(g, target_mass)
                report = invariance_defect(g, mask)
                entries.append(
                    SeriesEntry(idx, label, report.set_mass, report)
                )
            elif set_builder == "accumulate":
                res = accumulate_invariant(
                    g, epsilon=epsilon, target_mass=target_mass, effort=effort
                )
                entries.append(
                    SeriesEntry(
                        idx,
                        label,
                        res.mass,
                        res.report,
                        extra={
                            "reached_target": res.reached_target,
                            "maximal": res.maximal,
                        },
                    )
                )
            else:
                from . import concentration  # local import avoids a cycle
                from .families import graphing_diameter

                tgt = max(2, graphing_diameter(g) // 4)
                witness = concentration.nonconcentration_witness(
                    g, delta=target_mass, target_distance=tgt, effort=effort
                )
                if witness is None:
                    raise ValueError("no far-pair witness found for the extraction")
                extraction = concentration.level_set_extraction(
                    g, witness[0], n=tgt
                )
                band = [
                    lv
                    for lv in extraction.levels
                    if target_mass / 2 - MASS_TOL
                    <= lv.report.set_mass
                    <= 1.5 * target_mass + MASS_TOL
                ]
                pool = band or list(extraction.levels)
                chosen = min(
                    pool, key=lambda lv: (abs(lv.report.set_mass - target_mass), lv.alpha)
                )
                entries.append(
                    SeriesEntry(
                        idx,
                        label,
                        chosen.report.set_mass,
                        chosen.report,
                        extra={"alpha": chosen.alpha, "profile_radius": tgt},
                    )
                )
        except (ValueError, ResourceCapError, ConvergenceError) as exc:
            entries.append(SeriesEntry(idx, label, None, None, error=str(exc)))
    return entries
