import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bidgames import errors
from bidgames.arena import build_graph, random_scc
from bidgames.solver import (build_random_turn, compute_potentials, first_price_taxman_target,
                             optimality_residual, solve_mean_payoff, taxman_targets, value_curve)

from oracles import karp_cycle_mean, scc_corpus, value_iteration_batch


@pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 2 / 3, 0.9, 1.0])
def test_bowtie_value_is_p(bow, p):
    sol = solve_mean_payoff(bow, p)
    assert sol.value == pytest.approx(p, abs=1e-12)
    assert sol.residual() < 1e-12


def test_bowtie_moves(bow):
    sol = solve_mean_payoff(bow, 0.5)
    assert sol.sigma_max == (0, 0)
    assert sol.sigma_min == (1, 1)


@pytest.mark.parametrize("p, s", [(0.5, 0.25), (2 / 3, 2 / 9)])
def test_bowtie_potentials_and_strengths(bow, p, s):
    # hand solution: subtracting the two equations gives Pot(0) - Pot(1) = 1
    sol = solve_mean_payoff(bow, p)
    assert sol.pot[0] == 0.0
    assert sol.pot[1] == pytest.approx(-1.0, abs=1e-12)
    assert sol.strength.tolist() == pytest.approx([s, s], abs=1e-12)
    assert sol.s_max == pytest.approx(s) and sol.s_min_pos == pytest.approx(s)


def test_anchor_at_min_vertex(bow):
    pots = compute_potentials(bow, 0.5, (0, 0), (1, 1), anchor=1)
    assert pots.pot[1] == 0.0
    assert pots.pot[0] == pytest.approx(1.0, abs=1e-12)
    assert pots.value == pytest.approx(0.5)
    assert pots.strength.tolist() == pytest.approx([0.25, 0.25])


@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
@settings(max_examples=40, deadline=None)
def test_strengths_do_not_depend_on_anchor(n, seed, p):
    G = random_scc(n, np.random.default_rng(seed))
    sol = solve_mean_payoff(G, p)
    try:
        base = compute_potentials(G, p, sol.sigma_max, sol.sigma_min, anchor=0)
        other = compute_potentials(G, p, sol.sigma_max, sol.sigma_min, anchor=n - 1)
    except errors.SingularSystem:
        return
    assert np.allclose(base.strength, other.strength, atol=1e-9)
    assert np.ptp(base.pot - other.pot) < 1e-9


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_constant_weights(p):
    G = build_graph([[1, 2], [2], [0, 1]], [0.7, 0.7, 0.7])
    sol = solve_mean_payoff(G, p)
    assert sol.value == pytest.approx(0.7)
    assert not sol.strength.any()
    assert sol.s_max == 0.0 and sol.s_min_pos is None


def test_self_loop_value():
    assert solve_mean_payoff(build_graph([[0]], [-3]), 0.4).value == -3.0


@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
@settings(max_examples=80, deadline=None)
def test_solution_invariants(n, seed, p):
    G = random_scc(n, np.random.default_rng(seed))
    sol = solve_mean_payoff(G, p)
    # potentials grow like 1/p near the ends, so tolerances scale with them
    scale = 1.0 + float(np.abs(sol.pot).max())
    assert sol.residual() < 1e-9 * scale
    assert sol.pot[0] == 0.0
    assert (sol.strength >= -1e-12).all()
    for v in range(n):
        vals = sol.pot[list(G.succ[v])]
        assert sol.pot[sol.sigma_max[v]] == pytest.approx(vals.max(), abs=1e-9 * scale)
        assert sol.pot[sol.sigma_min[v]] == pytest.approx(vals.min(), abs=1e-9 * scale)


def test_ill_conditioned_near_one_uses_exact_fallback():
    # float bias errors here exceed the gaps between Min's options and made iteration cycle
    G = random_scc(5, np.random.default_rng(104))
    sol = solve_mean_payoff(G, 0.999)
    assert sol.residual() < 1e-12 * (1.0 + float(np.abs(sol.pot).max()))


@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_role_duality(n, seed, p):
    G = random_scc(n, np.random.default_rng(seed))
    a = solve_mean_payoff(G, p).value
    b = solve_mean_payoff(G.negated(), 1.0 - p).value
    assert b == pytest.approx(-a, abs=1e-9)


@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_value_is_monotone_in_p(n, seed, p, q):
    G = random_scc(n, np.random.default_rng(seed))
    lo, hi = sorted((p, q))
    assert solve_mean_payoff(G, lo).value <= solve_mean_payoff(G, hi).value + 1e-9


def test_endpoints_match_cycle_means():
    rng = np.random.default_rng(11)
    for _ in range(25):
        G = random_scc(4, rng)
        assert solve_mean_payoff(G, 0.0).value == pytest.approx(karp_cycle_mean(G, True), abs=1e-9)
        assert solve_mean_payoff(G, 1.0).value == pytest.approx(karp_cycle_mean(G, False), abs=1e-9)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.85])
def test_matches_value_iteration_on_three_vertex_corpus(p):
    graphs = scc_corpus(3, (-1, 0, 1))
    ref, err, _ = value_iteration_batch(graphs, p)
    assert err.max() < 1e-6
    got = np.array([solve_mean_payoff(G, p).value for G in graphs])
    assert np.abs(got - ref).max() < 1e-6


def test_optimality_residual_detects_wrong_value(bow):
    sol = solve_mean_payoff(bow, 0.5)
    assert optimality_residual(bow, 0.5, sol.value + 0.1, sol.pot) == pytest.approx(0.1)


@pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
def test_p_out_of_range(bow, p):
    with pytest.raises(errors.POutOfRange):
        solve_mean_payoff(bow, p)


def test_random_turn_structure():
    G = build_graph([[1], [2], [0]], [1, 0, 0])
    rt = build_random_turn(G, 0.3)
    assert rt.n_nodes == 9
    assert rt.kind[:3] == ("chance", "max", "min")
    for v in range(3):
        assert rt.prob[3 * v] == (0.3, 0.7)
        assert rt.succ[3 * v + 1] == rt.succ[3 * v + 2] == (3 * ((v + 1) % 3),)
    P = rt.induced_chain((1, 2, 0), (1, 2, 0))
    assert np.allclose(P.sum(axis=1), 1.0)


def test_random_turn_bowtie(bow):
    rt = build_random_turn(bow, 0.5)
    assert rt.n_nodes == 6
    assert rt.succ[1] == rt.succ[2] == (0, 3)


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_random_turn_needs_interior_p(bow, p):
    with pytest.raises(errors.POutOfRange):
        build_random_turn(bow, p)


def test_bad_policies(bow):
    with pytest.raises(errors.BadPolicy):
        compute_potentials(bow, 0.5, (0,), (1, 1))
    G = build_graph([[1], [0]], [1, 0])
    with pytest.raises(errors.BadPolicy):
        compute_potentials(G, 0.5, (0, 0), (1, 0))
    with pytest.raises(errors.BadVertexId):
        compute_potentials(bow, 0.5, (0, 0), (1, 1), anchor=5)


def test_two_recurrent_classes_are_singular(bow):
    # both players stay put: vertex 0 and vertex 1 are separate classes
    with pytest.raises(errors.SingularSystem):
        compute_potentials(bow, 0.5, (0, 1), (0, 1))


def test_taxman_poorman_endpoint():
    t = taxman_targets(1.0, 0.75, 0.25)
    assert t.p_pure == pytest.approx(2 / 3, abs=1e-12)
    assert t.p_mixed == pytest.approx(5 / 6, abs=1e-12)


@pytest.mark.parametrize("X, Y", [(0.75, 0.25), (0.6, 0.4), (5.0, 1.0)])
def test_taxman_richman_endpoint(X, Y):
    assert taxman_targets(0.0, X, Y).p_mixed == pytest.approx(0.5, abs=1e-12)


def test_taxman_equal_budgets():
    t = taxman_targets(1.0, 0.5, 0.5)
    assert t.p_pure is None and t.p_mixed == 0.5


def test_taxman_errors():
    with pytest.raises(errors.NonPositiveBudget):
        taxman_targets(0.5, 0.0, 1.0)
    with pytest.raises(errors.BadMechanism):
        taxman_targets(1.5, 1.0, 1.0)


def test_first_price_taxman_endpoints():
    assert first_price_taxman_target(0.0, 0.3) == pytest.approx(0.5)
    assert first_price_taxman_target(1.0, 0.3) == pytest.approx(0.3)


def test_value_curve(bow):
    ps = [i / 10 for i in range(1, 10)]
    assert all(abs(v - p) < 1e-9 for p, v in value_curve(bow, ps))
    flat = build_graph([[0, 1], [0]], [2, 2])
    assert {v for _, v in value_curve(flat, ps)} == {2.0}
