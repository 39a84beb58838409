import math

import numpy as np
import pytest

import graphings as gr
from graphings import folner, oracle
from graphings.errors import ConvergenceError

from conftest import complete_graphing, random_graphing


# --- invariance defects --------------------------------------------------------


def test_defects_vanish_on_invariant_sets():
    g = gr.rotation_graphing(8, 1)
    for a in ([], range(8)):
        rep = folner.invariance_defect(g, a)
        assert rep.max_defect == 0.0
        assert all(d == 0.0 for _, d in rep.per_generator)


def test_defect_cycle_arc():
    g = gr.rotation_graphing(8, 1)
    rep = folner.invariance_defect(g, [0, 1, 2, 3])
    assert rep.max_defect == pytest.approx(1 / 8, abs=1e-12)
    assert rep.symmetric_defects[0][1] == pytest.approx(2 / 8, abs=1e-12)
    assert rep.set_mass == pytest.approx(0.5, abs=1e-12)


def test_defect_zero_on_component():
    g = gr.rotation_graphing(8, 2)  # two 4-cycles: evens and odds
    rep = folner.invariance_defect(g, [0, 2, 4, 6])
    assert rep.max_defect == 0.0


def test_defects_recompute_exactly():
    rng = np.random.default_rng(3)
    for _ in range(15):
        g = random_graphing(rng)
        n = g.atom_count
        atoms = sorted(
            int(a) for a in rng.choice(n, size=int(rng.integers(1, n)), replace=False)
        )
        rep = folner.invariance_defect(g, atoms)
        mask = np.zeros(n, dtype=bool)
        mask[atoms] = True
        w = g.space.weights
        for idx, phi in enumerate(g.generators):
            img = {int(i) for d, i in zip(phi.domain, phi.image) if mask[d]}
            expected = sum(w[i] for i in img if not mask[i])
            assert dict(rep.per_generator)[idx] == pytest.approx(expected, abs=1e-15)


# --- spectral gap ---------------------------------------------------------------


def test_gap_complete_graph_closed_form():
    for n in (4, 7, 12):
        rep = folner.spectral_gap(complete_graphing(n))
        assert rep.gap == pytest.approx(0.5 * n / (n - 1), abs=1e-9)


def test_gap_cycle_closed_form():
    for n in (4, 8, 16):
        rep = folner.spectral_gap(gr.rotation_graphing(n, 1))
        assert rep.gap == pytest.approx((1 - math.cos(2 * math.pi / n)) / 2, abs=1e-9)


def test_gap_disconnected_zero_with_components():
    rep = folner.spectral_gap(gr.rotation_graphing(12, 2))
    assert rep.gap == 0.0
    assert rep.components == 2


def test_gap_single_atom():
    point = gr.build_graphing(gr.make_space([1.0]), [])
    assert folner.spectral_gap(point).gap == 1.0


def test_gap_permutation_invariance():
    rng = np.random.default_rng(19)
    for _ in range(8):
        g = random_graphing(rng, max_atoms=12)
        perm = rng.permutation(g.atom_count)
        space2 = gr.make_space(g.space.weights[perm])
        inv = np.argsort(perm)
        gens2 = [
            gr.partial_isomorphism(space2, inv[phi.domain], inv[phi.image])
            for phi in g.generators
        ]
        g2 = gr.build_graphing(space2, gens2)
        assert folner.spectral_gap(g2).gap == pytest.approx(
            folner.spectral_gap(g).gap, abs=1e-9
        )


def test_gap_iterative_matches_exact():
    g = gr.default_expander(1024)
    it = folner.spectral_gap(g, method="iterative", tol=1e-8)
    ex = folner.spectral_gap(g, method="exact")
    assert it.method == "iterative" and ex.method == "exact"
    assert it.residual <= 1e-8
    assert it.gap == pytest.approx(ex.gap, abs=1e-7)


def test_gap_convergence_error_carries_residual():
    g = gr.default_expander(1024)
    with pytest.raises(ConvergenceError) as err:
        folner.spectral_gap(g, method="iterative", tol=1e-16, max_krylov=64)
    assert err.value.residual is not None


# --- Folner search --------------------------------------------------------------


def test_search_c64_arc_ratio():
    g = gr.rotation_graphing(64, 1)
    cert = folner.folner_search(g, mass_cap=0.25, effort=16)
    assert cert.windows[0] == (0.125, 0.25)
    assert cert.ratios[0] == pytest.approx(1 / 8, abs=1e-12)
    assert cert.masses[0] == pytest.approx(0.25, abs=1e-12)


def test_search_complete_graph_ratio():
    k16 = complete_graphing(16)
    cert = folner.folner_search(k16, mass_cap=0.25, effort=1 << 16)
    assert cert.ratios[0] == pytest.approx(3.0, abs=1e-12)


def test_search_expander_ratios_clear_cheeger_floor():
    g = gr.default_expander(1024)
    gap = folner.spectral_gap(g, method="exact").gap
    cert = folner.folner_search(g, mass_cap=0.25, effort=8)
    assert cert.ratios, "ladder must produce at least one scale"
    for ratio in cert.ratios:
        assert ratio >= 0.05
        assert ratio >= gap / 2


def test_search_certificate_ratios_recompute():
    rng = np.random.default_rng(29)
    for _ in range(10):
        g = random_graphing(rng)
        cert = folner.folner_search(g, mass_cap=0.5, effort=32)
        for atoms, mass, ratio in zip(cert.sets, cert.masses, cert.ratios):
            assert g.space.mass(atoms) == pytest.approx(mass, abs=1e-12)
            from graphings.graphing import boundary_mass

            assert boundary_mass(g, atoms) / mass == pytest.approx(ratio, abs=1e-12)


def test_search_monotone_in_effort():
    rng = np.random.default_rng(37)
    for _ in range(8):
        g = random_graphing(rng, max_atoms=10)
        lo = folner.folner_search(g, mass_cap=0.5, effort=2)
        hi = folner.folner_search(g, mass_cap=0.5, effort=1 << g.atom_count)
        for w, r in zip(lo.windows, lo.ratios):
            if w in hi.windows:
                assert hi.ratios[hi.windows.index(w)] <= r + 1e-12


def test_search_never_beats_exhaustive_oracle():
    rng = np.random.default_rng(43)
    for _ in range(10):
        g = random_graphing(rng, max_atoms=12)
        cert = folner.folner_search(g, mass_cap=0.5, effort=4)
        for (lo, hi), ratio in zip(cert.windows, cert.ratios):
            _, best = oracle.brute_min_boundary_ratio(g, lo, hi)
            assert ratio >= best - 1e-12


def test_vanishing_flag_thresholds():
    g = gr.rotation_graphing(64, 1)
    cert = folner.folner_search(g, mass_cap=0.25, effort=16, scales=2)
    # ratios 1/8 and 1/4 against thresholds 1 and 1/sqrt(2)
    assert cert.vanishing
    strict = folner.folner_search(
        g, mass_cap=0.25, effort=16, scales=2, thresholds=[0.01, 0.01]
    )
    assert not strict.vanishing


# --- epsilon calibration ---------------------------------------------------------


def test_admissible_inner_ratio_solves_constraints():
    for eps in (0.01, 0.3, 0.5, 2.0):
        for c in (0.0, 1.0, 2.5, 10.0):
            ep = folner.admissible_inner_ratio(eps, c)
            assert ep * c < 1
            assert ep * (1 + c) / (1 - ep * c) == pytest.approx(eps, rel=1e-12)


def test_admissible_inner_ratio_validates():
    with pytest.raises(ValueError):
        folner.admissible_inner_ratio(0.0, 1.0)
    with pytest.raises(ValueError):
        folner.admissible_inner_ratio(0.5, -1.0)


# --- accumulation -----------------------------------------------------------------


def test_accumulate_cycle_reaches_quarter():
    g = gr.rotation_graphing(64, 1)
    res = folner.accumulate_invariant(g, epsilon=0.5, target_mass=0.25)
    assert res.reached_target
    assert res.mass == pytest.approx(0.25, abs=1e-12)
    assert gr.boundary(g, res.atoms)
    bmass = g.space.mass(gr.boundary(g, res.atoms))
    assert bmass <= 0.5 * res.mass + 1e-12
    for step in res.steps:
        assert step["boundary_additive"] in (True, False)


def test_accumulate_trimming_guard():
    g = gr.rotation_graphing(64, 1)
    res = folner.accumulate_invariant(g, epsilon=0.5, target_mass=6 / 64)
    assert res.reached_target
    assert res.mass == pytest.approx(6 / 64, abs=1e-12)
    bmass = g.space.mass(gr.boundary(g, res.atoms))
    assert bmass <= 0.5 * res.mass + 1e-12


def test_accumulate_expander_stalls():
    g = gr.default_expander(1024)
    res = folner.accumulate_invariant(g, epsilon=0.01, target_mass=0.25)
    assert not res.reached_target
    assert res.maximal
    assert res.mass < 0.25


def test_accumulate_multi_step_merges():
    g = gr.rotation_graphing(64, 1)
    # small per-step pieces force several merges
    res = folner.accumulate_invariant(
        g, epsilon=0.5, target_mass=0.25, folner_source={"scales": 8, "effort": 4}
    )
    assert res.mass <= 0.25 + 1e-12
    for step in res.steps:
        assert step["merged_boundary_mass"] <= 0.5 * step["merged_mass"] + 1e-12


def test_accumulate_validates_inputs():
    g = gr.rotation_graphing(16, 1)
    with pytest.raises(ValueError):
        folner.accumulate_invariant(g, epsilon=0.0, target_mass=0.25)
    with pytest.raises(ValueError):
        folner.accumulate_invariant(g, epsilon=0.5, target_mass=1.5)


# --- series -----------------------------------------------------------------------


def test_series_rotation_arcs_defects_shrink():
    family = [gr.rotation_graphing(n, 1) for n in (16, 32, 64, 128)]
    entries = folner.asymptotic_invariance_series(family, "arcs")
    defects = [e.report.max_defect for e in entries]
    assert defects == pytest.approx([1 / 16, 1 / 32, 1 / 64, 1 / 128], abs=1e-12)
    for e in entries:
        assert e.mass == pytest.approx(0.25, abs=1e-12)


def test_series_constant_family_constant_defects():
    family = [gr.rotation_graphing(32, 1)] * 3
    entries = folner.asymptotic_invariance_series(family, "arcs")
    assert len({e.report.max_defect for e in entries}) == 1


def test_series_arcs_inapplicable_family_member():
    family = [gr.rotation_graphing(16, 1), complete_graphing(8)]
    entries = folner.asymptotic_invariance_series(family, "arcs")
    assert entries[0].error is None
    assert entries[1].error is not None
    assert entries[1].report is None


def test_series_level_set_on_rotations():
    family = [gr.rotation_graphing(n, 1) for n in (32, 64)]
    entries = folner.asymptotic_invariance_series(family, "level_set")
    for e in entries:
        assert e.error is None
        assert 0.125 - 1e-12 <= e.mass <= 0.375 + 1e-12
    assert entries[1].report.max_defect <= entries[0].report.max_defect


def test_series_rejects_unknown_strategy():
    with pytest.raises(ValueError):
        folner.asymptotic_invariance_series([gr.rotation_graphing(8, 1)], "nope")


def test_expander_sets_obey_conductance_floor():
    g = gr.default_expander(256)
    gap = folner.spectral_gap(g).gap
    floor = gap * 0.25 * 0.75
    w = g.space.weights
    candidates = [list(range(64))]  # index block of mass 1/4
    f = folner.fiedler_vector(g)
    order = np.argsort(f)
    candidates.append([int(a) for a in order[:64]])  # sweep-cut prefix
    rng = np.random.default_rng(53)
    candidates.append([int(a) for a in rng.choice(256, size=64, replace=False)])
    for atoms in candidates:
        assert w[atoms].sum() == pytest.approx(0.25, abs=1e-12)
        rep = folner.invariance_defect(g, atoms)
        assert rep.max_defect >= floor - 1e-12
