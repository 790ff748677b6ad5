import numpy as np
import pytest

from ldpkm.cells import (CellLabels, anc_star_gap, ancestor, cell_center, cell_key, cell_of,
                         cells_within, heavy_threshold, mark_heavy_light)
from ldpkm.core import ContractError
from ldpkm.freq import SuccinctHistogram


def test_cell_of_examples(rng):
    assert cell_of([[0.3, 0.9]], 0).tolist() == [[0, 0]]
    assert cell_of([[0.6, 0.2]], 1).tolist() == [[1, 0]]
    p = rng.uniform(size=(100, 3))
    for l in range(1, 8):
        assert np.array_equal(cell_of(p, l) >> 1, cell_of(p, l - 1))
    with pytest.raises(ContractError):
        cell_of([[1.0]], 2)


def test_ancestor_examples():
    assert ancestor([5], 3, 0)[1].tolist() == [5]
    lvl, c = ancestor([5], 3, 2)
    assert lvl == 1 and c.tolist() == [1]
    lvl, c = ancestor([5], 3, 7)
    assert lvl == 0 and c.tolist() == [0]
    assert anc_star_gap(4) == 3 and anc_star_gap(1) == 0


def test_cell_center():
    assert cell_center(0, [0, 0]).tolist() == [0.5, 0.5]
    assert cell_center(1, [1, 0]).tolist() == [0.75, 0.25]
    assert cell_of(cell_center(4, [[3, 9]]), 4).tolist() == [[3, 9]]
    assert cell_key(2, [1, 3]) == "2:1,3"


def _exact_hists(images, L, d):
    hs = {}
    for l in range(1, L):
        cells, cnt = np.unique(cell_of(images, l), axis=0, return_counts=True)
        keys = [cell_key(l, c) for c in cells]
        hs[l] = SuccinctHistogram({k: float(c) for k, c in zip(keys, cnt)},
                                  {k: tuple(int(x) for x in c) for k, c in zip(keys, cells)},
                                  0.0, 0.0, 0.05, 1.0, len(images), "exact")
    return hs


def test_marking_basic_properties(rng):
    L, d, k, beta = 8, 2, 2, 0.05
    pts = np.clip(rng.normal(0.3, 0.01, size=(2000, d)), 0, 0.999)
    hs = _exact_hists(pts, L, d)
    lab = mark_heavy_light(hs, 2000.0, k, beta, L, d)
    assert lab.heavy_count(0) == 1
    assert lab.heavy_count(L - 1) == 0
    for l in range(1, L):
        if lab.heavy_count(l):
            assert np.all(lab.is_heavy(l - 1, lab.heavy[l] >> 1))
    tl = lab.transition_levels(pts)
    for i in range(0, 2000, 97):
        chain = [lab.is_heavy(l, cell_of(pts[i:i + 1], l))[0] for l in range(L)]
        first_light = chain.index(False)
        assert tl[i] == first_light


def test_single_cluster_transition_matches_threshold():
    L, d, k, beta, n = 10, 2, 1, 0.05, 1000
    pts = np.full((n, d), 0.3141)
    lab = mark_heavy_light(_exact_hists(pts, L, d), 50.0, k, beta, L, d)
    want = next(l for l in range(1, L)
                if l == L - 1 or heavy_threshold(l, 50.0, k, beta, L, d) > n)
    assert lab.transition_levels(pts[:1])[0] == want


def test_root_heavy_at_opt_n():
    L, d = 6, 2
    pts = np.random.default_rng(0).uniform(size=(100, d))
    lab = mark_heavy_light(_exact_hists(pts, L, d), 100.0, 1, 0.05, L, d)
    assert lab.heavy_count(0) == 1


def test_missing_levels_rejected():
    with pytest.raises(ContractError):
        mark_heavy_light({1: None}, 1.0, 1, 0.1, 5, 2)


def test_heavy_cap_warns(rng):
    L, d = 6, 2
    pts = rng.uniform(size=(5000, d))
    with pytest.warns(UserWarning):
        lab = mark_heavy_light(_exact_hists(pts, L, d), 1.0, 1, 0.9, L, d, cap=2)
    assert lab.warnings


def test_cells_within_small_cases():
    assert cells_within([[0.6, 0.6]], 1, 0.0) == {(1, 1)}
    # a point on a face touches the neighbouring half-open cell
    assert len(cells_within([[0.5, 0.6]], 1, 0.0)) == 2
    near = cells_within([[0.49, 0.2]], 1, 0.02)
    assert near == {(0, 0), (1, 0)}
    corner = cells_within([[0.49, 0.49]], 1, 0.02)
    assert len(corner) == 4
    assert len(cells_within([[0.49, 0.49]], 1, 0.011)) == 3
