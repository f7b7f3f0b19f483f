import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cases import dense_bound, quartic_samples, sampled_distance
from spectrax.hierarchy import solve
from spectrax.problems import (Graph, Tensor3, brute_force_maxcut, cut_from_bound, distance_spec, erdos_renyi,
                               maxcut_level1_closed_form, maxcut_level2_basis, maxcut_level2_closed_form,
                               maxcut_level2_nnz, maxcut_spec, quartic_curve, random_tensor, read_graph,
                               read_tensor, spectral_norm_oracle, tensor_norm_spec)

K3 = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


# -- max-cut ------------------------------------------------------------------


def test_small_graph_values():
    rep = solve(maxcut_spec(K3), levels=1)
    # x^T A x >= 3 λ_min(A) = -3, so the reported bound is (6 + 3) / 2
    assert rep.levels[0].transformed == pytest.approx(4.5, abs=1e-9)
    k2 = Graph.from_edges(2, [(0, 1)])
    assert solve(maxcut_spec(k2), levels=1).levels[0].transformed == pytest.approx(2.0, abs=1e-9)
    assert brute_force_maxcut(K3) == 2.0 and brute_force_maxcut(k2) == 1.0
    empty = Graph.from_edges(4, [])
    assert brute_force_maxcut(empty) == 0.0
    assert cut_from_bound(empty, 0.0) == 0.0


def test_cut_normalization_is_twice_the_usual_cut():
    g = erdos_renyi(6, 0.7, seed=1)
    A = g.adjacency(dense=True)
    x = np.array([1, -1, 1, 1, -1, -1.0])
    usual = (g.total_weight() - x @ A @ x) / 4
    assert cut_from_bound(g, x @ A @ x) == pytest.approx(2 * usual)


@pytest.mark.parametrize("seed", range(4))
def test_generic_pipeline_matches_closed_forms(seed):
    g = erdos_renyi(5 + seed % 3, 0.7, seed=seed)
    rep = solve(maxcut_spec(g), levels=2)
    A, M1 = maxcut_level1_closed_form(g)
    assert rep.bound_at(1) == pytest.approx(dense_bound(A, M1), abs=1e-8)
    assert rep.bound_at(1) == pytest.approx(g.n * np.linalg.eigvalsh(g.adjacency(dense=True))[0], abs=1e-8)
    Mp2, M12 = maxcut_level2_closed_form(g)
    assert rep.bound_at(2) == pytest.approx(dense_bound(Mp2, M12), abs=1e-8)
    c1, c2 = (cut_from_bound(g, b) for b in rep.bounds)
    assert c2 <= c1 + 1e-8
    assert c2 >= 2 * brute_force_maxcut(g) - 1e-8


def test_level2_structure():
    g = erdos_renyi(7, 0.6, seed=3)
    Mp, M1 = maxcut_level2_closed_form(g)
    d = 1 + 7 * 6 // 2
    assert Mp.shape == (d, d) and len(maxcut_level2_basis(7)) == d
    assert Mp.nnz == maxcut_level2_nnz(g)
    assert np.allclose(M1.diagonal(), [1 / 7] + [2 / 49] * (d - 1))
    assert abs(Mp - Mp.T).max() == 0


def test_weighted_graph_soundness():
    g = Graph.from_edges(5, [(0, 1, 2.0), (1, 2, 0.5), (2, 3, 1.5), (3, 4, 1.0), (0, 4, 3.0), (1, 3, 1.0)])
    rep = solve(maxcut_spec(g), levels=2)
    best = 2 * brute_force_maxcut(g)
    for b in rep.bounds:
        assert cut_from_bound(g, b) >= best - 1e-8


# -- distance -------------------------------------------------------------------


@pytest.fixture(scope="module")
def curve_samples():
    return quartic_samples()


def test_quartic_samples_lie_on_curve(curve_samples):
    q = quartic_curve()
    for x, y in curve_samples[::5000]:
        assert abs(q.evaluate([x, y])) < 1e-9
    assert np.max(np.sum(curve_samples ** 2, axis=1)) <= 1.5


@pytest.mark.parametrize("point", [(0, 0), (1, 1), (Fraction(1, 2), Fraction(-1, 5))])
def test_distance_bounds_sound(point, curve_samples):
    rep = solve(distance_spec([quartic_curve()], Fraction(3, 2), point, names=["x", "y"]), levels=4)
    true = sampled_distance([float(v) for v in point], curve_samples)
    vals = [r.transformed for r in rep.levels if r.status == "ok"]
    assert all(v <= true + 1e-4 for v in vals)
    assert vals[-1] >= vals[0] - 1e-8


def test_point_on_curve_has_zero_bound():
    # x-intercept of the curve: 8 x^4 - 10 x^2 + 3 = 0 gives x^2 = 1/2 or 3/4; take x^2 = 3/4
    x = Fraction(math.sqrt(3) / 2).limit_denominator(10 ** 12)
    rep = solve(distance_spec([quartic_curve()], Fraction(3, 2), (x, 0), names=["x", "y"]), levels=3)
    assert all(r.transformed <= 1e-6 for r in rep.levels if r.status == "ok")


def test_distance_symmetry():
    a = solve(distance_spec([quartic_curve()], Fraction(3, 2), (Fraction(3, 10), Fraction(1, 10)),
                            names=["x", "y"]), levels=3).bounds
    b = solve(distance_spec([quartic_curve()], Fraction(3, 2), (Fraction(-3, 10), Fraction(-1, 10)),
                            names=["x", "y"]), levels=3).bounds
    assert a == pytest.approx(b, abs=1e-8)


# -- tensor spectral norm -------------------------------------------------------------------


@settings(max_examples=8)
@given(st.integers(0, 10 ** 6), st.sampled_from([(2, 2, 2), (2, 2, 3), (2, 3, 2)]))
def test_tensor_level1_is_frobenius(seed, dims):
    t = random_tensor(dims, r=2, seed=seed)
    rep = solve(tensor_norm_spec(t), levels=1)
    assert rep.bounds[0] == pytest.approx(t.frobenius(), abs=1e-9)


def test_rank_one_tensor_is_tight():
    u, v, w = np.array([3.0, 4.0]) / 5, np.array([1.0, 0.0]), np.array([0.6, 0.8])
    t = Tensor3((2, 2, 2), 2.5 * np.einsum("i,j,k->ijk", u, v, w))
    rep = solve(tensor_norm_spec(t), levels=2)
    assert spectral_norm_oracle(t) == pytest.approx(2.5, abs=1e-9)
    assert all(b == pytest.approx(2.5, abs=1e-6) for b in rep.bounds)


def test_tensor_level2_bracket():
    t = random_tensor((2, 2, 2), r=2, seed=4)
    rep = solve(tensor_norm_spec(t), levels=2)
    oracle = spectral_norm_oracle(t)
    assert oracle - 1e-4 <= rep.bound_at(2) <= rep.bound_at(1) + 1e-8


# -- file readers ------------------------------------------------------------------------------


def test_read_graph_formats(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# comment\nn 4\n0 1\n1 2 2.5\n")
    g = read_graph(str(p))
    assert g.n == 4 and g.num_edges == 2 and g.total_weight() == pytest.approx(7.0)
    q = tmp_path / "g.json"
    q.write_text(json.dumps({"n": 3, "edges": [[0, 1], [1, 2], [0, 2]]}))
    assert read_graph(str(q)).num_edges == 3
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 2 3\n")
    with pytest.raises(ValueError):
        read_graph(str(bad))


def test_read_tensor(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps({"dims": [2, 1, 2], "values": [1, 2, 3, 4]}))
    t = read_tensor(str(p))
    assert t.values[1, 0, 1] == 4
    p.write_text(json.dumps({"dims": [2, 2, 2], "values": [1]}))
    with pytest.raises(ValueError):
        read_tensor(str(p))
