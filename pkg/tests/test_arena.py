import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bidgames import errors
from bidgames.arena import (MAX, MIN, AllPayPoorman, AllPayRichman, Asymmetric, FirstPricePoorman,
                            FirstPriceRichman, Taxman, bottom_components, bowtie, build_graph,
                            budget_ratio, energy_prefix, graph_from_dict, is_richman,
                            normalize_budgets, parse_mechanism, payoff_estimate, random_scc,
                            rescale_pow2, resolve_bidding, tail_min_average, tarjan_scc)


def test_bowtie_is_valid(bow):
    assert bow.n == 2
    assert bow.succ == ((0, 1), (0, 1))
    assert bow.weights.tolist() == [1.0, 0.0]


def test_single_self_loop():
    G = build_graph([[0]], [7])
    assert G.n == 1 and G.weights[0] == 7.0


def test_not_strongly_connected():
    with pytest.raises(errors.NotStronglyConnected):
        build_graph([[1], []], [0, 0])
    with pytest.raises(errors.NotStronglyConnected):
        build_graph([[1], [1]], [0, 0])


@pytest.mark.parametrize("succ, w, exc", [
    ([], [], errors.EmptyGraph),
    ([[0]], [float("nan")], errors.BadWeight),
    ([[0]], [1, 2], errors.BadWeight),
    ([[3]], [0], errors.BadVertexId),
])
def test_graph_validation(succ, w, exc):
    with pytest.raises(exc):
        build_graph(succ, w)


def test_bad_parity():
    with pytest.raises(errors.BadParity):
        build_graph([[0]], [0], [-1])
    with pytest.raises(errors.BadParity):
        build_graph([[0]], [0], [1, 2])


def test_weights_are_read_only(bow):
    with pytest.raises(ValueError):
        bow.weights[0] = 5.0


def test_dict_round_trip(bow):
    G = bow.with_parities([1, 0])
    d = json.loads(json.dumps(G.to_dict()))
    assert graph_from_dict(d) == G


def test_dict_rejects_sparse_ids():
    d = {"vertices": [{"id": 0, "weight": 1}, {"id": 2, "weight": 0}], "edges": [[0, 2], [2, 0]]}
    with pytest.raises(errors.BadVertexId):
        graph_from_dict(d)


def test_dict_partial_parity():
    d = {"vertices": [{"id": 0, "weight": 1, "parity": 1}, {"id": 1, "weight": 0}],
         "edges": [[0, 1], [1, 0]]}
    with pytest.raises(errors.BadParity):
        graph_from_dict(d)


def test_negated(bow):
    assert bow.negated().weights.tolist() == [-1.0, -0.0]
    assert bow.negated().negated() == bow


def test_tarjan_and_bottoms():
    succ = [[1], [0, 2], [3], [2]]
    comps = sorted(sorted(c) for c in tarjan_scc(succ))
    assert comps == [[0, 1], [2, 3]]
    assert [sorted(c) for c in bottom_components(succ)] == [[2, 3]]


def test_tarjan_deep_chain_no_recursion_limit():
    n = 5000
    succ = [[(i + 1) % n] for i in range(n)]
    assert len(tarjan_scc(succ)) == 1


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_random_scc_is_strongly_connected(n, seed):
    G = random_scc(n, np.random.default_rng(seed))
    assert len(tarjan_scc(G.succ)) == 1


# --- bidding ------------------------------------------------------------

def test_ap_richman_example():
    w, (B, C) = resolve_bidding(AllPayRichman(), (0.6, 0.4), 0.3, 0.1)
    assert w == MAX
    assert B == pytest.approx(0.4) and C == pytest.approx(0.6)


@pytest.mark.parametrize("mech", [FirstPriceRichman(), FirstPricePoorman(), AllPayRichman(),
                                  AllPayPoorman(), Taxman(0.3), Taxman(0.3, all_pay=True),
                                  Asymmetric(2.0)])
def test_ties_go_to_min(mech):
    w, _ = resolve_bidding(mech, (1.0, 1.0), 0.2, 0.2)
    assert w == MIN


def test_asymmetric_example():
    w, (B, C) = resolve_bidding(Asymmetric(2.0), (1.0, 1.0), 0.3, 0.25)
    assert w == MAX
    assert B == pytest.approx(1.2) and C == 1.0


def test_payment_rules():
    assert FirstPriceRichman().pay(1, 1, 0.3, 0.1, True) == (0.7, 1.3)
    assert FirstPriceRichman().pay(1, 1, 0.1, 0.3, False) == (1.3, 0.7)
    assert FirstPricePoorman().pay(1, 1, 0.3, 0.1, True) == (0.7, 1)
    assert AllPayPoorman().pay(1, 1, 0.3, 0.1, True) == (0.7, 0.9)
    assert Taxman(0.0).pay(1, 1, 0.5, 0.1, True) == FirstPriceRichman().pay(1, 1, 0.5, 0.1, True)
    assert Taxman(1.0).pay(1, 1, 0.5, 0.1, True) == FirstPricePoorman().pay(1, 1, 0.5, 0.1, True)
    assert Taxman(1.0, True).pay(1, 1, 0.5, 0.1, True) == AllPayPoorman().pay(1, 1, 0.5, 0.1, True)


@pytest.mark.parametrize("x, y", [(-0.1, 0), (0, -0.1), (1.5, 0), (0, 1.5), (float("nan"), 0)])
def test_invalid_bids(x, y):
    with pytest.raises(errors.InvalidBid):
        resolve_bidding(FirstPriceRichman(), (1.0, 1.0), x, y)


def test_asymmetric_min_cap_is_one():
    resolve_bidding(Asymmetric(2.0), (1.0, 0.0), 0.0, 1.0)
    with pytest.raises(errors.InvalidBid):
        resolve_bidding(Asymmetric(2.0), (1.0, 1.0), 0.0, 1.5)


def test_negative_budget():
    with pytest.raises(errors.NegativeBudget):
        resolve_bidding(AllPayRichman(), (-1.0, 1.0), 0, 0)


budgets = st.floats(0.0, 10.0, allow_nan=False)
fracs = st.floats(0.0, 1.0)


@given(budgets, budgets, fracs, fracs)
@settings(max_examples=300)
def test_richman_conserves_and_stays_nonnegative(B, C, fx, fy):
    x, y = fx * B, fy * C
    for mech in (FirstPriceRichman(), AllPayRichman()):
        _, (nB, nC) = resolve_bidding(mech, (B, C), x, y)
        assert nB + nC == pytest.approx(B + C, abs=1e-12)
        assert nB >= -1e-12 and nC >= -1e-12


@given(budgets, budgets, fracs, fracs)
@settings(max_examples=300)
def test_poorman_budgets_never_grow(B, C, fx, fy):
    x, y = fx * B, fy * C
    for mech in (FirstPricePoorman(), AllPayPoorman()):
        _, (nB, nC) = resolve_bidding(mech, (B, C), x, y)
        assert 0 <= nB <= B and 0 <= nC <= C


@given(budgets, budgets, fracs, fracs, st.floats(0.0, 1.0))
@settings(max_examples=200)
def test_taxman_bank_takes_tau_share(B, C, fx, fy, tau):
    x, y = fx * B, fy * C
    for all_pay in (False, True):
        mech = Taxman(tau, all_pay)
        w, (nB, nC) = resolve_bidding(mech, (B, C), x, y)
        paid = (x + y) if all_pay else (x if w == MAX else y)
        assert (B + C) - (nB + nC) == pytest.approx(tau * paid, abs=1e-12)


def test_normalize_examples():
    assert normalize_budgets(FirstPriceRichman(), 3, 1) == (0.75, 0.25)
    assert normalize_budgets(AllPayPoorman(), 0.75, 0.25) == (3.0, 1.0)
    assert normalize_budgets(Asymmetric(2.0), 1.2, 1.0) == (1.2, 1.0)
    assert is_richman(Taxman(0.0)) and not is_richman(Taxman(0.5))
    with pytest.raises(errors.DegenerateBudget):
        normalize_budgets(AllPayPoorman(), 1.0, 0.0)
    with pytest.raises(errors.DegenerateBudget):
        budget_ratio(0.0, 0.0)


@given(st.floats(1e-300, 1e-121), st.floats(1e-300, 1e-121))
def test_rescale_is_exact_and_keeps_ratio(B, C):
    k = rescale_pow2(B, C)
    assert k > 1
    assert math.frexp(k)[0] == 0.5  # a power of two
    assert (B * k) / (C * k) == B / C
    assert 0.5 <= max(B, C) * k < 1.0


def test_rescale_noop_for_normal_budgets():
    assert rescale_pow2(0.3, 0.7) == 1.0


@pytest.mark.parametrize("text, cls", [("ap-richman", AllPayRichman), ("fp-poorman", FirstPricePoorman),
                                       ("taxman:tau=0.3", Taxman), ("ap-taxman:tau=1", Taxman),
                                       ("asym:W=2", Asymmetric)])
def test_parse_mechanism(text, cls):
    m = parse_mechanism(text)
    assert isinstance(m, cls)
    assert parse_mechanism(m.spec()) == m


@pytest.mark.parametrize("text", ["nope", "taxman", "taxman:tau=2", "asym:W=-1", "ap-richman:x=1",
                                  "taxman:tau=abc"])
def test_parse_mechanism_errors(text):
    with pytest.raises(errors.BadMechanism):
        parse_mechanism(text)


# --- energy -------------------------------------------------------------

def test_energy_examples(bow):
    pre = energy_prefix([1, 0, 1], [0, 1, 2])
    assert pre.tolist() == [0, 1, 1, 2]
    alt = energy_prefix(bow.weights, [0, 1] * 50)
    assert payoff_estimate(alt) == 0.5
    assert payoff_estimate(energy_prefix(bow.weights, [1] * 10)) == 0.0


def test_tail_min_average():
    pre = energy_prefix([1.0, 0.0, 0.0, 0.0], [0, 1, 2, 3])
    # prefix averages 1, 1/2, 1/3, 1/4; the last two are the tail
    assert tail_min_average(pre) == 0.25
    with pytest.raises(errors.BadHorizon):
        tail_min_average(np.zeros(1))
