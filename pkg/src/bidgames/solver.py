"""Random-turn games and their mean-payoff solutions.

In the random-turn game on a graph, every step a coin with bias ``p`` decides
who moves: Max with probability ``p``, Min otherwise. The weight of the
current vertex is collected either way. Its optimal value ``g`` and the bias
``h`` (the potential) satisfy

    h(v) = w(v) - g + p * max_u h(u) + (1 - p) * min_u h(u)

with ``u`` ranging over the successors of ``v``. The strength of a vertex is
``p * (1 - p) * (h(v+) - h(v-))`` where ``v+``/``v-`` are the maximizing and
minimizing successors.

The solver is strategy iteration: Howard improvement of Max's positional
policy, each evaluated by an exact best response of Min. Min's problem with
Max fixed is a communicating MDP (Min moves with positive probability every
step), so its optimal gain is constant. Individual policy pairs may still
induce several recurrent classes, so Min's best response is computed by
multichain policy iteration.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import errors
from .arena import GameGraph, bottom_components

RESIDUAL_TOL = 1e-12
# largest graph for which a failed float solve is redone in exact arithmetic
EXACT_MAX_N = 40


@dataclass(frozen=True)
class RandomTurnGame:
    """Explicit three-node gadget per vertex.

    Node ``3v`` is the chance node, ``3v+1`` the Max node and ``3v+2`` the Min
    node. Control nodes point at chance nodes of successors.
    """

    graph: GameGraph
    p: float
    kind: tuple[str, ...]
    succ: tuple[tuple[int, ...], ...]
    prob: tuple[tuple[float, ...], ...]

    @property
    def n_nodes(self) -> int:
        return len(self.kind)

    def induced_chain(self, sigma_max: Sequence[int], sigma_min: Sequence[int]) -> np.ndarray:
        """Transition matrix over graph vertices once both players fix a policy."""
        return _chain(self.graph.n, sigma_max, sigma_min, self.p)


def build_random_turn(G: GameGraph, p: float) -> RandomTurnGame:
    if not (0.0 < p < 1.0):
        raise errors.POutOfRange(f"random-turn gadget needs p in (0, 1), got {p!r}")
    kind, succ, prob = [], [], []
    for v in range(G.n):
        kind += ["chance", "max", "min"]
        succ.append((3 * v + 1, 3 * v + 2))
        prob.append((p, 1.0 - p))
        nxt = tuple(3 * u for u in G.succ[v])
        succ += [nxt, nxt]
        prob += [(), ()]
    return RandomTurnGame(G, float(p), tuple(kind), tuple(succ), tuple(prob))


@dataclass(frozen=True)
class Potentials:
    value: float
    pot: np.ndarray
    strength: np.ndarray
    s_max: float
    s_min_pos: float | None


@dataclass(frozen=True)
class StochasticSolution:
    """Optimal value, policies and potentials of a random-turn game.

    ``sigma_max[v]`` and ``sigma_min[v]`` are the successors ``v+`` and ``v-``;
    ties go to the lowest vertex id.
    """

    graph: GameGraph = field(repr=False)
    p: float
    value: float
    sigma_max: tuple[int, ...]
    sigma_min: tuple[int, ...]
    pot: np.ndarray = field(repr=False)
    strength: np.ndarray = field(repr=False)
    s_max: float
    s_min_pos: float | None
    iterations: int = 0

    def residual(self) -> float:
        """Largest violation of the optimality equation."""
        return optimality_residual(self.graph, self.p, self.value, self.pot)


def _chain(n, a, b, p):
    P = np.zeros((n, n))
    idx = np.arange(n)
    np.add.at(P, (idx, np.asarray(a)), p)
    np.add.at(P, (idx, np.asarray(b)), 1.0 - p)
    return P


def _generator(P: np.ndarray) -> np.ndarray:
    """``I - P`` with each diagonal entry taken as the row's off-diagonal mass.

    Forming ``1 - P[v, v]`` directly loses a tiny leaving probability once
    ``1 - p`` rounds to 1.
    """
    L = -P.copy()
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def _gain_bias(P: np.ndarray, w: np.ndarray):
    """Gain vector and bias of a Markov reward chain.

    The bias is pinned to 0 at the smallest state of each recurrent class.
    """
    n = len(w)
    L = _generator(P)
    succ = [np.flatnonzero(P[v]).tolist() for v in range(n)]
    classes = bottom_components(succ)
    g = np.zeros(n)
    rec = np.zeros(n, dtype=bool)
    for cls in classes:
        c = np.asarray(cls)
        rec[c] = True
        if len(c) == 1:
            g[c] = w[c]
            continue
        A = L[np.ix_(c, c)].T.copy()
        A[-1, :] = 1.0
        rhs = np.zeros(len(c))
        rhs[-1] = 1.0
        pi = np.linalg.solve(A, rhs)
        g[c] = pi @ w[c]
    t = np.flatnonzero(~rec)
    if len(t):
        r = np.flatnonzero(rec)
        A = L[np.ix_(t, t)]
        g[t] = np.linalg.solve(A, P[np.ix_(t, r)] @ g[r])
    M = L.copy()
    rhs = w - g
    for cls in classes:
        s = cls[0]
        M[s, :] = 0.0
        M[s, s] = 1.0
        rhs[s] = 0.0
    h = np.linalg.solve(M, rhs)
    return g, h, classes


def _fsolve(A: list, b: list) -> list:
    """Gauss-Jordan elimination over ``Fraction``; ``A`` must be nonsingular."""
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        inv = 1 / M[c][c]
        M[c] = [x * inv for x in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[i][n] for i in range(n)]


def _gain_bias_exact(n, sigma, tau, p, w):
    """Rational version of :func:`_gain_bias` for ill-conditioned chains."""
    Z = Fraction(0)
    P = [[Z] * n for _ in range(n)]
    for v in range(n):
        P[v][sigma[v]] += p
        P[v][tau[v]] += 1 - p
    L = [[(1 if i == j else 0) - P[i][j] for j in range(n)] for i in range(n)]
    succ = [[u for u in range(n) if P[v][u] != 0] for v in range(n)]
    classes = bottom_components(succ)
    g = [Z] * n
    rec = [False] * n
    for cls in classes:
        for v in cls:
            rec[v] = True
        if len(cls) == 1:
            g[cls[0]] = w[cls[0]]
            continue
        A = [[L[j][i] for j in cls] for i in cls]
        A[-1] = [Fraction(1)] * len(cls)
        pi = _fsolve(A, [Z] * (len(cls) - 1) + [Fraction(1)])
        gc = sum(q * w[v] for q, v in zip(pi, cls))
        for v in cls:
            g[v] = gc
    t = [v for v in range(n) if not rec[v]]
    if t:
        r = [v for v in range(n) if rec[v]]
        A = [[L[i][j] for j in t] for i in t]
        b = [sum(P[i][j] * g[j] for j in r) for i in t]
        for v, x in zip(t, _fsolve(A, b)):
            g[v] = x
    M = [row[:] for row in L]
    rhs = [w[v] - g[v] for v in range(n)]
    for cls in classes:
        s = cls[0]
        M[s] = [Fraction(int(j == s)) for j in range(n)]
        rhs[s] = Z
    return g, _fsolve(M, rhs), classes


def _tol(h) -> float:
    return 1e-11 * (1.0 + float(np.max(np.abs(h))))


def _min_response(G: GameGraph, w, p, sigma, tau, max_iter, exact=False):
    """Multichain policy iteration for Min against a fixed Max policy.

    With ``exact`` the chain is solved over ``Fraction`` and ties are exact.
    """
    succ = G.succ
    tau = list(tau)
    seen = set()
    for _ in range(max_iter):
        if exact:
            g, h, _ = _gain_bias_exact(G.n, sigma, tau, p, w)
            tol = 0
        else:
            g, h, _ = _gain_bias(_chain(G.n, sigma, tau, p), w)
            tol = _tol(h)
        changed = False
        for v in range(G.n):
            best = min(g[u] for u in succ[v])
            if g[tau[v]] > best + tol:
                tau[v] = next(u for u in succ[v] if g[u] <= best + tol)
                changed = True
        if not changed:
            for v in range(G.n):
                gmin = min(g[u] for u in succ[v])
                cand = [u for u in succ[v] if g[u] <= gmin + tol]
                best = min(h[u] for u in cand)
                if h[tau[v]] > best + tol:
                    tau[v] = next(u for u in cand if h[u] <= best + tol)
                    changed = True
        if not changed:
            return tau, g, h
        key = tuple(tau)
        if key in seen:
            raise errors.NoConvergence("Min policy iteration revisited a policy")
        seen.add(key)
    raise errors.NoConvergence(f"Min policy iteration exceeded {max_iter} rounds")


def _policy_iteration(G: GameGraph, p, max_iter: int, exact: bool):
    if exact:
        w = [Fraction(x) for x in G.weights.tolist()]
        p = Fraction(p)
    else:
        w = np.asarray(G.weights, dtype=float)
    sigma = [s[0] for s in G.succ]
    tau = [s[0] for s in G.succ]
    seen = set()
    for it in range(1, max_iter + 1):
        tau, g, h = _min_response(G, w, p, sigma, tau, max_iter, exact)
        tol = 0 if exact else _tol(h)
        changed = False
        for v in range(G.n):
            best = max(h[u] for u in G.succ[v])
            if h[sigma[v]] < best - tol:
                sigma[v] = next(u for u in G.succ[v] if h[u] >= best - tol)
                changed = True
        if not changed:
            return sigma, tau, g, h, it
        key = tuple(sigma)
        if key in seen:
            raise errors.NoConvergence("Max policy iteration revisited a policy")
        seen.add(key)
    raise errors.NoConvergence(f"policy iteration exceeded {max_iter} rounds")


def _canonical(G: GameGraph, pot: np.ndarray):
    tol = 1e-10 * (1.0 + float(np.max(np.abs(pot))))
    up, down = [], []
    for v in range(G.n):
        vals = pot[list(G.succ[v])]
        hi, lo = vals.max(), vals.min()
        up.append(next(u for u in G.succ[v] if pot[u] >= hi - tol))
        down.append(next(u for u in G.succ[v] if pot[u] <= lo + tol))
    return tuple(up), tuple(down)


def _strengths(G, p, pot):
    up, down = _canonical(G, pot)
    st = p * (1.0 - p) * (pot[list(up)] - pot[list(down)])
    scale = 1e-12 * (1.0 + float(np.max(np.abs(pot))))
    st[np.abs(st) <= scale] = 0.0
    if np.any(st < 0):
        raise errors.NumericError("negative strength after canonicalization")
    pos = st[st > 0]
    s_max = float(st.max())
    s_min_pos = float(pos.min()) if len(pos) else None
    return up, down, st, s_max, s_min_pos


def optimality_residual(G: GameGraph, p: float, value: float, pot: np.ndarray) -> float:
    res = 0.0
    for v in range(G.n):
        vals = pot[list(G.succ[v])]
        rhs = G.weights[v] - value + p * vals.max() + (1.0 - p) * vals.min()
        res = max(res, abs(pot[v] - rhs))
    return res


def solve_mean_payoff(G: GameGraph, p: float, max_iter: int = 500) -> StochasticSolution:
    """Solve the random-turn game on ``G`` with Max-move probability ``p``."""
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise errors.POutOfRange(f"p must lie in [0, 1], got {p!r}")
    if p == 1.0:
        # Max alone moves: solve the mirrored Min-only game and flip signs
        dual = solve_mean_payoff(G.negated(), 0.0, max_iter)
        pot = -dual.pot
        up, down, st, s_max, s_min_pos = _strengths(G, p, pot)
        return StochasticSolution(G, 1.0, -dual.value, up, down, pot, st, s_max,
                                  s_min_pos, dual.iterations)
    try:
        sol = _float_solution(G, p, max_iter)
        if sol is not None:
            return sol
    except (errors.NoConvergence, np.linalg.LinAlgError):
        pass
    # rounding in the bias made iteration cycle or left a large residual:
    # p and the weights are dyadic rationals, so redo everything exactly
    if G.n > EXACT_MAX_N:
        raise errors.NoConvergence(f"float policy iteration failed and n={G.n} is too large "
                                   "for the exact fallback")
    sigma, tau, g, h, it = _policy_iteration(G, p, max_iter, exact=True)
    if len(set(g)) != 1:
        raise errors.NoConvergence("optimal gain is not constant")
    try:
        pot = np.array([float(x - h[0]) for x in h])
    except OverflowError:
        pot = np.array([math.inf])
    value = float(g[0])
    if not np.all(np.isfinite(pot)):
        raise errors.NumericError(f"potentials at p={p!r} exceed the range of a double")
    return _finish(G, p, value, pot, it)


def _float_solution(G: GameGraph, p: float, max_iter: int):
    sigma, tau, g, h, it = _policy_iteration(G, p, max_iter, exact=False)
    if np.ptp(g) > 1e-9 * (1.0 + np.max(np.abs(g))):
        return None
    value = float(np.mean(g))
    try:
        pots = compute_potentials(G, p, sigma, tau)
        value, pot = pots.value, pots.pot
    except errors.SingularSystem:
        pot = h - h[0]
    try:
        return _finish(G, p, value, pot, it)
    except errors.NoConvergence:
        return None


def _finish(G, p, value, pot, it):
    up, down, st, s_max, s_min_pos = _strengths(G, p, pot)
    sol = StochasticSolution(G, float(p), value, up, down, pot, st, s_max, s_min_pos, it)
    res = sol.residual()
    if res > 1e-9 * (1.0 + float(np.max(np.abs(pot)))):
        raise errors.NoConvergence(f"optimality residual {res:.3e} too large")
    return sol


def compute_potentials(G: GameGraph, p: float, sigma_max: Sequence[int],
                       sigma_min: Sequence[int], anchor: int = 0) -> Potentials:
    """Solve the potential equations for fixed policies with ``pot[anchor] = 0``.

    Unknowns are the ``n`` potentials and the value. Raises ``SingularSystem``
    when the policies induce more than one recurrent class.
    """
    if not (0.0 <= p <= 1.0):
        raise errors.POutOfRange(f"p must lie in [0, 1], got {p!r}")
    n = G.n
    for name, pol in (("sigma_max", sigma_max), ("sigma_min", sigma_min)):
        if len(pol) != n:
            raise errors.BadPolicy(f"{name} has {len(pol)} entries, expected {n}")
        for v, u in enumerate(pol):
            if u not in G.succ[v]:
                raise errors.BadPolicy(f"{name} moves {v}->{u}, which is not an edge")
    if not 0 <= anchor < n:
        raise errors.BadVertexId(f"anchor {anchor} out of range")
    P = _chain(n, sigma_max, sigma_min, p)
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = _generator(P)
    A[:n, n] = 1.0
    A[n, anchor] = 1.0
    rhs = np.zeros(n + 1)
    rhs[:n] = G.weights
    try:
        if np.linalg.cond(A) > 1e12:
            raise np.linalg.LinAlgError
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        raise errors.SingularSystem("policies induce a chain with several recurrent classes") from None
    pot = sol[:n] - sol[anchor]
    value = float(sol[n])
    st = p * (1.0 - p) * (pot[list(sigma_max)] - pot[list(sigma_min)])
    scale = 1e-12 * (1.0 + float(np.max(np.abs(pot))))
    st[np.abs(st) <= scale] = 0.0
    pos = st[st > 0]
    return Potentials(value, pot, st, float(st.max()), float(pos.min()) if len(pos) else None)


@dataclass(frozen=True)
class TaxmanTargets:
    p_pure: float | None
    p_mixed: float


def taxman_targets(tau: float, X: float, Y: float) -> TaxmanTargets:
    """Random-turn biases matched by all-pay taxman with bank share ``tau``.

    ``tau = 0`` is Richman, ``tau = 1`` poorman. ``p_pure`` is absent when Max
    is not strictly richer.
    """
    if not (0.0 <= tau <= 1.0):
        raise errors.BadMechanism(f"taxman rate {tau!r} outside [0, 1]")
    if not (X > 0 and Y > 0):
        raise errors.NonPositiveBudget(f"budgets must be positive, got {X!r}, {Y!r}")
    keep = 1.0 - tau
    nx = X + keep * Y
    ny = Y + keep * X
    if X > Y:
        return TaxmanTargets(1.0 - ny / nx, 1.0 - ny / (2.0 * nx))
    return TaxmanTargets(None, nx / (2.0 * ny))


def first_price_taxman_target(tau: float, r: float) -> float:
    """Random-turn bias for first-price taxman at Max budget ratio ``r``."""
    keep = 1.0 - tau
    return (r + keep * (1.0 - r)) / (1.0 + keep)


def value_curve(G: GameGraph, ps: Sequence[float]) -> list[tuple[float, float]]:
    return [(float(p), solve_mean_payoff(G, p).value) for p in ps]
