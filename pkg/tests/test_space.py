import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import graphings as gr
from graphings.space import (
    partial_isomorphism_from_json,
    partial_isomorphism_to_json,
    space_from_json,
    space_to_json,
)


def test_make_space_normalizes_uniform():
    s = gr.make_space([1, 1, 1, 1])
    assert s.atom_count == 4
    assert np.allclose(s.weights, 0.25)


def test_make_space_normalizes_ratios():
    s = gr.make_space([2, 1, 1])
    assert np.allclose(s.weights, [0.5, 0.25, 0.25])


def test_make_space_rejects_zero_and_empty():
    with pytest.raises(ValueError):
        gr.make_space([1, 0])
    with pytest.raises(ValueError):
        gr.make_space([])
    with pytest.raises(ValueError):
        gr.make_space([1, -2])


@given(st.lists(st.integers(min_value=1, max_value=50), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_make_space_total_mass(weights):
    s = gr.make_space([float(w) for w in weights])
    assert abs(float(s.weights.sum()) - 1.0) <= 1e-12
    assert np.all(s.weights > 0)


def test_compose_identities_intersect_domains():
    s = gr.FiniteMeasuredSpace.uniform(3)
    f = gr.identity_map(s, [0, 1])
    g = gr.identity_map(s, [1, 2])
    h = gr.compose(f, g)
    assert h.mapping() == {1: 1}


def test_compose_rotation_twice_on_three_cycle():
    s = gr.FiniteMeasuredSpace.uniform(3)
    r = gr.partial_isomorphism(s, [0, 1, 2], [1, 2, 0])
    rr = gr.compose(r, r)
    # enumerated by hand: 0 -> 2, 1 -> 0, 2 -> 1
    assert rr.mapping() == {0: 2, 1: 0, 2: 1}


def test_compose_with_inverse_is_identity_with_unit_weights():
    s = gr.make_space([3, 1, 2, 2])
    phi = gr.partial_isomorphism(s, [0, 1, 2], [2, 3, 0])
    ident = gr.compose(phi, gr.inverse(phi))
    assert ident.mapping() == {0: 0, 1: 1, 2: 2}
    assert np.all(ident.rn_weights == 1.0)


def test_inverse_involution_exact():
    s = gr.make_space([5, 1, 1, 3])
    phi = gr.partial_isomorphism(s, [0, 3], [1, 2])
    back = gr.inverse(gr.inverse(phi))
    assert np.array_equal(back.domain, phi.domain)
    assert np.array_equal(back.image, phi.image)
    assert np.array_equal(back.rn_weights, phi.rn_weights)


def test_inverse_preserves_measure_preservation():
    s = gr.FiniteMeasuredSpace.uniform(6)
    phi = gr.partial_isomorphism(s, [0, 1, 2], [3, 4, 5])
    assert phi.is_measure_preserving()
    assert gr.inverse(phi).is_measure_preserving()


def test_rn_weights_match_weight_ratios():
    s = gr.make_space([4, 2, 1, 1])
    phi = gr.partial_isomorphism(s, [0, 1], [2, 3])
    assert np.allclose(
        phi.rn_weights * s.weights[phi.domain], s.weights[phi.image], atol=1e-12
    )


def test_partial_isomorphism_rejects_duplicates_and_range():
    s = gr.FiniteMeasuredSpace.uniform(3)
    with pytest.raises(ValueError):
        gr.partial_isomorphism(s, [0, 0], [1, 2])
    with pytest.raises(ValueError):
        gr.partial_isomorphism(s, [0, 1], [2, 2])
    with pytest.raises(ValueError):
        gr.partial_isomorphism(s, [0, 5], [1, 2])


def test_cocycle_uniform_space_is_one():
    s = gr.FiniteMeasuredSpace.uniform(5)
    rot = gr.partial_isomorphism(s, list(range(5)), [(i + 1) % 5 for i in range(5)])
    delta = gr.cocycle_of([rot])
    assert all(abs(v - 1.0) <= 1e-12 for v in delta.values.values())


def test_cocycle_weight_ratio_pair():
    s = gr.make_space([0.5, 0.25, 0.25])
    phi = gr.partial_isomorphism(s, [0], [1])
    delta = gr.cocycle_of([phi])
    assert delta[(0, 1)] == pytest.approx(2.0, abs=1e-12)
    assert delta[(1, 0)] == pytest.approx(0.5, abs=1e-12)


def test_cocycle_chain_multiplies():
    s = gr.make_space([0.5, 0.3, 0.2])
    chain = gr.partial_isomorphism(s, [0, 1], [1, 2])
    delta = gr.cocycle_of([chain])
    assert delta[(0, 2)] == pytest.approx(2.5, rel=1e-12)
    assert delta[(0, 2)] == pytest.approx(delta[(0, 1)] * delta[(1, 2)], rel=1e-9)


@given(st.integers(min_value=2, max_value=9), st.integers(min_value=0, max_value=10**6))
@settings(max_examples=40, deadline=None)
def test_cocycle_identities_random(n, seed):
    rng = np.random.default_rng(seed)
    s = gr.make_space(rng.integers(1, 8, size=n).astype(float))
    perm = rng.permutation(n)
    phi = gr.partial_isomorphism(s, np.arange(n), perm)
    delta = gr.cocycle_of([phi])
    atoms = list(range(n))
    for x in atoms:
        assert delta[(x, x)] == 1.0
    for x in atoms:
        for y in atoms:
            if (x, y) in delta:
                assert delta[(y, x)] == pytest.approx(1.0 / delta[(x, y)], rel=1e-9)
                for z in atoms:
                    if (y, z) in delta:
                        assert delta[(x, z)] == pytest.approx(
                            delta[(x, y)] * delta[(y, z)], rel=1e-9
                        )


def test_quasi_invariance_positive_sets_map_to_positive():
    s = gr.make_space([1, 2, 3, 4])
    phi = gr.partial_isomorphism(s, [0, 1], [2, 3])
    image = phi.apply([0, 1])
    assert s.mass(image) > 0


def test_space_json_roundtrip():
    s = gr.make_space([2, 1, 1])
    data = json.loads(json.dumps(space_to_json(s)))
    s2 = space_from_json(data)
    assert np.allclose(s.weights, s2.weights)


def test_partial_isomorphism_json_recomputes_rn():
    s = gr.make_space([4, 1, 2, 1])
    phi = gr.partial_isomorphism(s, [0, 2], [1, 3])
    data = partial_isomorphism_to_json(phi)
    assert set(data) == {"domain", "image"}  # rn weights never serialised
    back = partial_isomorphism_from_json(s, data)
    assert np.array_equal(back.domain, phi.domain)
    assert np.allclose(back.rn_weights, phi.rn_weights)
