"""Parity bidding games on strongly connected graphs.

A parity game with maximal index ``d`` becomes a mean-payoff game by giving
weight 1 to the vertices of index ``d`` and 0 elsewhere. A play with positive
mean payoff visits such a vertex infinitely often, so it is won by the player
whose parity ``d`` has. The verdicts below combine that observation with the
random-turn characterizations of all-pay bidding.

Player 1 wins a play iff the largest index seen infinitely often is odd.
Player 2 is handled by the role swap: add one to every index and exchange the
budgets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import errors
from .arena import (AllPayPoorman, AllPayRichman, GameGraph, Mechanism, build_graph,
                    tarjan_scc)
from .solver import solve_mean_payoff

CERT_TOL = 1e-9


@dataclass(frozen=True)
class ParityGame:
    graph: GameGraph

    def __post_init__(self):
        if self.graph.parities is None:
            raise errors.BadParity("parity game needs a parity on every vertex")

    @property
    def parities(self) -> tuple[int, ...]:
        return self.graph.parities

    @property
    def d(self) -> int:
        return max(self.parities)

    def shifted(self) -> "ParityGame":
        """The role-swapped game: every index raised by one."""
        return ParityGame(self.graph.with_parities([k + 1 for k in self.parities]))


def parity_game(succ, parities) -> ParityGame:
    return ParityGame(build_graph(succ, [0.0] * len(succ), parities))


@dataclass(frozen=True)
class ParityVerdict:
    player: int
    almost_sure_win: bool
    sure_win: bool
    mechanism: str
    ratio: float
    evidence: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sure_win and not self.almost_sure_win:
            raise errors.ValidationError("a sure win is also an almost-sure win")

    def to_dict(self) -> dict:
        return {"player": self.player, "almost_sure_win": self.almost_sure_win,
                "sure_win": self.sure_win, "mechanism": self.mechanism,
                "ratio": self.ratio, "evidence": self.evidence}


def parity_to_mean_payoff(P: ParityGame) -> GameGraph:
    d = P.d
    return P.graph.with_weights([1.0 if k == d else 0.0 for k in P.parities])


def _check_certificate_input(G: GameGraph, p: float) -> np.ndarray:
    if not (0.0 < p < 1.0):
        raise errors.POutOfRange(f"p={p!r} outside (0, 1)")
    w = np.asarray(G.weights)
    if np.any(w < 0):
        raise errors.BadWeight("certificate needs nonnegative weights")
    if not np.any(w > 0):
        raise errors.AllZeroWeights("certificate needs a strictly positive weight")
    return w


def stated_bound(G: GameGraph, p: float) -> float:
    """``w(v0) p^(n-1) / (n-1)``, the bound as usually quoted.

    It is not a valid lower bound in general: on ``0 -> 1``, ``1 -> {0, 1}``
    with weight 1 at vertex 0 and ``p = 1/2`` it gives 1/2 while the value is
    1/3. Reaching ``v0`` from ``v0`` itself can take ``n`` steps, not ``n-1``.
    """
    w = _check_certificate_input(G, p)
    n = G.n
    top = float(w.max())
    return top if n == 1 else top * p ** (n - 1) / (n - 1)


def positive_value_certificate(G: GameGraph, p: float) -> tuple[float, float]:
    """Random-turn value of a nonnegative game and an analytic bound below it.

    The bound is ``w(v0) p^(n-1) / n`` for a vertex ``v0`` of largest weight.
    Cut the play into blocks of ``n`` steps. Whatever the first step of a
    block does, every vertex is within ``n-1`` steps of ``v0``, so if Max wins
    the remaining ``n-1`` tosses and heads for ``v0`` along shortest paths the
    block visits ``v0``.
    """
    w = _check_certificate_input(G, p)
    n = G.n
    bound = float(w.max()) * p ** (n - 1) / n
    value = solve_mean_payoff(G, p).value
    if not (value > 0 and value >= bound - CERT_TOL):
        raise errors.CertificateViolated(f"value {value!r} below bound {bound!r} at p={p!r}")
    return value, bound


def has_cycle_with_top(P: ParityGame, k: int) -> bool:
    """Is there a cycle whose largest index is exactly ``k``?"""
    par = P.parities
    keep = [v for v in range(P.graph.n) if par[v] <= k]
    idx = {v: i for i, v in enumerate(keep)}
    sub = [[idx[u] for u in P.graph.succ[v] if u in idx] for v in keep]
    for comp in tarjan_scc(sub):
        nontrivial = len(comp) > 1 or comp[0] in sub[comp[0]]
        if nontrivial and any(par[keep[i]] == k for i in comp):
            return True
    return False


def hypotheses(P: ParityGame) -> tuple[bool, str]:
    """Hypotheses under which the all-pay verdicts are known, for Player 1."""
    d = P.d
    if d % 2 == 0:
        return False, f"highest index {d} is even"
    evens = [k for k in set(P.parities) if k % 2 == 0]
    if not any(has_cycle_with_top(P, k) for k in evens):
        return False, "no cycle whose highest index is even"
    return True, ""


def _mech_name(mech) -> str:
    if isinstance(mech, str):
        return mech
    if type(mech) is AllPayRichman:
        return "ap-richman"
    if type(mech) is AllPayPoorman:
        return "ap-poorman"
    raise errors.BadMechanism(f"parity verdicts cover all-pay Richman and poorman, not {mech!r}")


def _favoured(P: ParityGame, mech: str, r: float, player: int) -> tuple[ParityVerdict, ParityVerdict]:
    """Verdicts when Player 1 of ``P`` (real player ``player``) has the odd top index."""
    ok, why = hypotheses(P)
    if not ok:
        raise errors.HypothesisUnmet(why)
    G = parity_to_mean_payoff(P)
    ev: dict = {"d": P.d}
    # Max (the favoured player) holds ratio r, i.e. budgets r and 1 - r
    B, C = r, 1.0 - r
    if mech == "ap-richman":
        ev["almost_sure"] = positive_value_certificate(G, 0.5)
        sure = False
    else:
        p_mixed = 1.0 - C / (2.0 * B) if B > C else B / (2.0 * C)
        ev["almost_sure"] = positive_value_certificate(G, p_mixed)
        sure = B > C
        if sure:
            ev["sure"] = positive_value_certificate(G, 1.0 - C / B)
    if not sure:
        # with p = 0 Min moves always and can stay on the even-topped cycle
        ev["sure_value_at_0"] = solve_mean_payoff(G, 0.0).value
    other = 3 - player
    win = ParityVerdict(player, True, sure, mech, r, ev)
    lose = ParityVerdict(other, False, False, mech, 1.0 - r, {"opponent_wins_almost_surely": True})
    return win, lose


def decide_parity(P: ParityGame, mech: Mechanism | str, r: float) -> dict[int, ParityVerdict]:
    """Verdicts for both players of a strongly connected parity all-pay game.

    ``r`` is Player 1's initial budget ratio. Raises :class:`HypothesisUnmet`
    when the favoured player lacks a cycle whose highest index has the
    opponent's parity.
    """
    name = _mech_name(mech)
    if name not in ("ap-richman", "ap-poorman"):
        raise errors.BadMechanism(f"no parity verdict for {name!r}")
    if not (0.0 < r < 1.0):
        raise errors.DomainError(f"ratio {r!r} outside (0, 1)")
    if P.d % 2 == 1:
        win, lose = _favoured(P, name, r, 1)
    else:
        win, lose = _favoured(P.shifted(), name, 1.0 - r, 2)
    return {win.player: win, lose.player: lose}


def constructed_corpus() -> list[tuple[str, ParityGame, str, float, dict]]:
    """Six small games with the verdicts the theorem predicts.

    Entries are ``(label, game, mechanism, r, expected)`` with ``expected``
    mapping player to ``(almost_sure_win, sure_win)``.
    """
    bow = [[0, 1], [0, 1]]
    tri = [[1], [1, 2], [0, 2]]
    return [
        ("bowtie-richman-poor", parity_game(bow, [1, 0]), "ap-richman", 0.01,
         {1: (True, False), 2: (False, False)}),
        ("bowtie-poorman-rich", parity_game(bow, [1, 0]), "ap-poorman", 0.6,
         {1: (True, True), 2: (False, False)}),
        ("bowtie-poorman-even", parity_game(bow, [1, 0]), "ap-poorman", 0.5,
         {1: (True, False), 2: (False, False)}),
        ("triangle-richman", parity_game(tri, [3, 2, 0]), "ap-richman", 0.7,
         {1: (True, False), 2: (False, False)}),
        ("bowtie-even-top-poorman", parity_game(bow, [2, 1]), "ap-poorman", 0.3,
         {1: (False, False), 2: (True, True)}),
        ("triangle-even-top-richman", parity_game(tri, [4, 3, 1]), "ap-richman", 0.9,
         {1: (False, False), 2: (True, False)}),
    ]
