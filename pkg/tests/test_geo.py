import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnmix.geo import build_reference, distance, neighbors_of_query


def test_distance_basics():
    assert distance((0.0, 0.0), (0.0, 0.0)) == 0.0
    assert distance((0.0, 0.0), (3.0, 4.0)) == 5.0


def test_distance_matches_independent_recomputation(rng):
    a = rng.normal(size=2)
    b = rng.normal(size=2)
    direct = ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2) ** 0.5
    assert distance(a, b) == pytest.approx(direct, abs=1e-15)


def test_collinear_sites_as_given():
    sites = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]
    ref = build_reference(sites, L=2, ordering="as-given")
    assert list(ref.neighbors(1)) == [0]
    # ascending by distance: site 1 (d=1) before site 0 (d=2)
    assert list(ref.neighbors(2)) == [1, 0]


def test_chain_structure_with_single_neighbor(rng):
    coords = rng.random((40, 2))
    ref = build_reference(coords, L=1, ordering="as-given")
    for i in range(1, ref.n):
        nbrs = ref.neighbors(i)
        assert nbrs.shape == (1,)
        d = np.sqrt(np.sum((ref.coords[:i] - ref.coords[i]) ** 2, axis=1))
        assert nbrs[0] == np.argmin(d)


def test_neighbor_counts_saturate(rng):
    coords = rng.random((2000, 2))
    ref = build_reference(coords, L=10, ordering="random", seed=4)
    counts = ref.nbr_count
    assert np.all(counts[:11] == np.arange(11))
    assert np.all(counts[11:] == 10)
    for i in (11, 500, 1999):
        assert ref.neighbors(i).shape == (10,)


def test_acyclic_and_sorted(rng):
    coords = rng.random((150, 2))
    ref = build_reference(coords, L=6, ordering="random", seed=0)
    for i in range(1, ref.n):
        nbrs = ref.neighbors(i)
        assert np.all(nbrs < i)
        d = np.sqrt(np.sum((ref.coords[nbrs] - ref.coords[i]) ** 2, axis=1))
        assert np.all(np.diff(d) >= 0)


def test_permutation_stability(rng):
    coords = rng.random((80, 2))
    values = rng.normal(size=80)
    pairs = set()
    for seed in (1, 2):
        ref = build_reference(coords, L=4, ordering="random", seed=seed)
        got = {(tuple(c), v) for c, v in zip(ref.coords, values[ref.order])}
        pairs.add(frozenset(got))
    assert len(pairs) == 1


def test_coordinate_sum_ordering():
    coords = np.array([[0.9, 0.9], [0.1, 0.1], [0.5, 0.5]])
    ref = build_reference(coords, L=2, ordering="coordinate-sum")
    assert list(ref.order) == [1, 2, 0]


def test_rejects_degenerate_input():
    with pytest.raises(ValueError):
        build_reference([(0.0, 0.0)], L=1)
    with pytest.raises(ValueError):
        build_reference([(0.0, 0.0), (0.0, 0.0)], L=1)
    with pytest.raises(ValueError):
        build_reference([(0.0, 0.0), (np.nan, 0.0)], L=1)


def test_duplicates_flagged():
    coords = [(0.0, 0.0), (0.0, 0.0), (1.0, 1.0), (0.3, 0.3)]
    with pytest.warns(UserWarning, match="zero distance"):
        ref = build_reference(coords, L=2, ordering="as-given")
    assert ref.structure_report()["n_zero_distance_edges"] >= 1


def test_query_coincident_site(rng):
    coords = rng.random((30, 2))
    ref = build_reference(coords, L=3, ordering="as-given")
    q = neighbors_of_query(ref, ref.coords[5])
    assert q.nbr_idx[0] == 5
    assert q.nbr_dist[0] == 0.0


def test_query_tie_broken_by_lower_index():
    coords = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 3.0], [0.0, -3.0]])
    ref = build_reference(coords, L=2, ordering="as-given")
    q = neighbors_of_query(ref, [0.0, 0.0])
    assert list(q.nbr_idx) == [0, 1]


def test_query_grid_center():
    xs = np.arange(5, dtype=float)
    coords = np.array([(x, y) for x in xs for y in xs])
    ref = build_reference(coords, L=4, ordering="as-given")
    q = neighbors_of_query(ref, [2.0, 2.0 + 1e-9])
    got = sorted(map(tuple, ref.coords[q.nbr_idx]))
    # the center node itself plus the three nearest grid nodes
    brute = np.argsort(np.sum((ref.coords - [2.0, 2.0 + 1e-9]) ** 2, axis=1))[:4]
    assert got == sorted(map(tuple, ref.coords[brute]))


def test_query_matches_brute_force(rng):
    coords = rng.random((120, 2))
    ref = build_reference(coords, L=7, ordering="random", seed=9)
    for _ in range(200):
        target = rng.random(2)
        q = neighbors_of_query(ref, target)
        d = np.sqrt(np.sum((ref.coords - target) ** 2, axis=1))
        brute = np.lexsort((np.arange(ref.n), d))[:7]
        assert list(q.nbr_idx) == list(brute)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(3, 25),
    cap=st.integers(1, 6),
    seed=st.integers(0, 10_000),
)
def test_structure_invariants_property(n, cap, seed):
    coords = np.random.default_rng(seed).random((n, 2))
    ref = build_reference(coords, L=cap, ordering="random", seed=seed)
    for i in range(ref.n):
        nbrs = ref.neighbors(i)
        assert nbrs.shape[0] == min(i, cap)
        assert np.all(nbrs < i)
        assert len(set(nbrs.tolist())) == nbrs.shape[0]
