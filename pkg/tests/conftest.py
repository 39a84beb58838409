import numpy as np

import graphings as gr


def random_graphing(rng: np.random.Generator, min_atoms: int = 4, max_atoms: int = 16):
    """Random small instance: mixed families, mixed (small-integer) weights.

    Integer weights keep mass comparisons exactly reproducible across the
    independent arithmetic paths of the heuristics and the oracles.
    """
    n = int(rng.integers(min_atoms, max_atoms + 1))
    if rng.random() < 0.5:
        space = gr.FiniteMeasuredSpace.uniform(n)
    else:
        space = gr.make_space(rng.integers(1, 6, size=n).astype(float))
    kind = int(rng.integers(0, 4))
    gens = []
    if kind == 0:
        for _ in range(int(rng.integers(1, 3))):
            perm = rng.permutation(n)
            gens.append(gr.partial_isomorphism(space, np.arange(n), perm))
    elif kind == 1:
        for _ in range(int(rng.integers(1, 4))):
            k = int(rng.integers(1, n + 1))
            dom = rng.choice(n, size=k, replace=False)
            img = rng.choice(n, size=k, replace=False)
            gens.append(gr.partial_isomorphism(space, dom, img))
    elif kind == 2:
        step = int(rng.integers(1, n))
        gens.append(
            gr.partial_isomorphism(space, np.arange(n), (np.arange(n) + step) % n)
        )
    else:
        for _ in range(int(rng.integers(n, 2 * n))):
            i, j = rng.choice(n, size=2, replace=False)
            gens.append(gr.partial_isomorphism(space, [int(i)], [int(j)]))
    return gr.build_graphing(space, gens)


def complete_graphing(n: int):
    space = gr.FiniteMeasuredSpace.uniform(n)
    gens = [
        gr.partial_isomorphism(space, [i], [j])
        for i in range(n)
        for j in range(n)
        if i < j
    ]
    return gr.build_graphing(space, gens)


def path_graphing(n: int):
    space = gr.FiniteMeasuredSpace.uniform(n)
    gen = gr.partial_isomorphism(space, list(range(n - 1)), list(range(1, n)))
    return gr.build_graphing(space, [gen])
