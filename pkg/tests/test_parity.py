import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bidgames import errors
from bidgames.arena import AllPayPoorman, AllPayRichman, FirstPriceRichman, build_graph, random_scc
from bidgames.parity import (ParityVerdict, constructed_corpus, decide_parity, has_cycle_with_top,
                             hypotheses, parity_game, parity_to_mean_payoff,
                             positive_value_certificate, stated_bound)

BOW = [[0, 1], [0, 1]]


def test_reduction_bowtie():
    G = parity_to_mean_payoff(parity_game(BOW, [1, 0]))
    assert G.weights.tolist() == [1.0, 0.0]
    G = parity_to_mean_payoff(parity_game(BOW, [3, 3]))
    assert G.weights.tolist() == [1.0, 1.0]


@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.lists(st.integers(0, 5), min_size=6, max_size=6))
@settings(max_examples=60, deadline=None)
def test_reduction_weights(n, seed, pars):
    G = random_scc(n, np.random.default_rng(seed))
    P = parity_game([list(s) for s in G.succ], pars[:n])
    w = parity_to_mean_payoff(P).weights
    assert set(w.tolist()) <= {0.0, 1.0} and w.sum() >= 1


def test_certificate_examples():
    bow = build_graph(BOW, [1, 0])
    v, b = positive_value_certificate(bow, 0.5)
    assert v == pytest.approx(0.5) and b == pytest.approx(0.25)
    assert stated_bound(bow, 0.5) == pytest.approx(0.5)
    loop = build_graph([[0]], [1])
    assert positive_value_certificate(loop, 0.3) == (1.0, 1.0)
    tri = build_graph([[1], [2], [0]], [1, 0, 0])
    v, b = positive_value_certificate(tri, 0.5)
    assert v == pytest.approx(1 / 3) and b == pytest.approx(0.25 / 3)
    assert stated_bound(tri, 0.5) == pytest.approx(0.125)


def test_stated_bound_counterexample():
    # from vertex 0 the token must leave before it can come back: two steps, not one
    G = build_graph([[1], [0, 1]], [1, 0])
    v, b = positive_value_certificate(G, 0.5)
    assert v == pytest.approx(1 / 3) and b == pytest.approx(0.25)
    assert stated_bound(G, 0.5) == pytest.approx(0.5)
    assert stated_bound(G, 0.5) > v


@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.sampled_from([0.1, 0.5, 0.9]))
@settings(max_examples=80, deadline=None)
def test_certificate_on_random_games(n, seed, p):
    rng = np.random.default_rng(seed)
    G = random_scc(n, rng)
    w = (rng.random(n) < 0.4).astype(float)
    w[rng.integers(n)] = 1.0
    v, b = positive_value_certificate(G.with_weights(w), p)
    assert v > 0 and v >= b - 1e-9


def test_certificate_errors():
    bow = build_graph(BOW, [1, 0])
    with pytest.raises(errors.AllZeroWeights):
        positive_value_certificate(bow.with_weights([0, 0]), 0.5)
    with pytest.raises(errors.BadWeight):
        positive_value_certificate(bow.with_weights([1, -1]), 0.5)
    with pytest.raises(errors.POutOfRange):
        positive_value_certificate(bow, 1.0)


def test_hypotheses():
    assert hypotheses(parity_game(BOW, [1, 0]))[0]
    assert not hypotheses(parity_game(BOW, [2, 1]))[0]
    # the only even index sits on no cycle
    tri = [[1], [2], [0]]
    assert not hypotheses(parity_game(tri, [1, 2, 3]))[0]
    assert has_cycle_with_top(parity_game(tri, [1, 2, 3]), 3)
    assert not has_cycle_with_top(parity_game(tri, [1, 2, 3]), 2)


@pytest.mark.parametrize("label, game, mech, r, expected", constructed_corpus(),
                         ids=[c[0] for c in constructed_corpus()])
def test_constructed_corpus(label, game, mech, r, expected):
    got = decide_parity(game, mech, r)
    for player, (a, s) in expected.items():
        assert (got[player].almost_sure_win, got[player].sure_win) == (a, s)


def test_mechanism_objects_and_errors():
    P = parity_game(BOW, [1, 0])
    assert decide_parity(P, AllPayRichman(), 0.4)[1].almost_sure_win
    assert decide_parity(P, AllPayPoorman(), 0.7)[1].sure_win
    with pytest.raises(errors.BadMechanism):
        decide_parity(P, FirstPriceRichman(), 0.5)
    with pytest.raises(errors.BadMechanism):
        decide_parity(P, "fp-poorman", 0.5)
    with pytest.raises(errors.DomainError):
        decide_parity(P, "ap-richman", 1.0)
    with pytest.raises(errors.HypothesisUnmet):
        decide_parity(parity_game([[1], [2], [0]], [1, 2, 3]), "ap-richman", 0.5)


def test_verdict_rejects_sure_without_almost_sure():
    with pytest.raises(errors.ValidationError):
        ParityVerdict(1, False, True, "ap-poorman", 0.5)


def test_parity_game_needs_labels():
    with pytest.raises(errors.BadParity):
        from bidgames.parity import ParityGame
        ParityGame(build_graph(BOW, [0, 0]))


@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.lists(st.integers(0, 4), min_size=5, max_size=5),
       st.sampled_from(["ap-richman", "ap-poorman"]), st.floats(0.05, 0.95))
@settings(max_examples=80, deadline=None)
def test_role_swap_flips_verdicts(n, seed, pars, mech, r):
    G = random_scc(n, np.random.default_rng(seed))
    P = parity_game([list(s) for s in G.succ], pars[:n])
    try:
        a = decide_parity(P, mech, r)
    except errors.HypothesisUnmet:
        assume(False)
    b = decide_parity(P.shifted(), mech, 1.0 - r)
    for k in (1, 2):
        assert (a[k].almost_sure_win, a[k].sure_win) == (b[3 - k].almost_sure_win, b[3 - k].sure_win)
