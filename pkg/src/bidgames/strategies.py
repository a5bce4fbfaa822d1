"""Budget-based bidding strategies.

Strategies are written in the player's own frame: they see the vertex, their
own budget and the opponent's budget, never whether they are Max or Min.
Moving "up" means moving to the successor that is best for the owner, so a
Min strategy is simply a Max strategy built on the graph with negated
weights (see :func:`dual_min_strategy`).

Two roles exist. A *standard* strategy emits a bid distribution from the
state alone. A *responder* sees the opponent's realized bid first; it may
only face deterministic opponents.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from . import errors
from .arena import GameGraph
from .certify import LedgerParams
from .solver import StochasticSolution, solve_mean_payoff


# --- shift function -----------------------------------------------------

def shift(x: float) -> float:
    """``-ln(1-x) / ln(1+x)`` on (0, 1). Always above 1."""
    if not (0.0 < x < 1.0):
        raise errors.DomainError(f"shift is defined on (0, 1), got {x!r}")
    return -math.log1p(-x) / math.log1p(x)


def shift_inverse(c: float, tol: float = 1e-12) -> float:
    """The unique ``a`` in (0, 1) with ``shift(a) == c``, by bisection."""
    if not (c > 1.0) or not math.isfinite(c):
        raise errors.DomainError(f"shift takes values in (1, inf), got {c!r}")
    lo, hi = 0.0, 1.0
    # shift is increasing; bisect down to float resolution (at least ``tol``)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if shift(mid) < c:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * 1e-4:
            break
    return 0.5 * (lo + hi)


# --- bid distributions --------------------------------------------------

class PointMass:
    __slots__ = ("b",)

    def __init__(self, b: float):
        self.b = b

    def sample(self, u1: float, u2: float) -> float:
        return self.b

    def upper(self) -> float:
        return self.b

    def mean(self) -> float:
        return self.b

    def scaled(self, k: float) -> "PointMass":
        return PointMass(self.b * k)

    def describe(self):
        return ("point", self.b)

    def __repr__(self):
        return f"PointMass({self.b!r})"


class Uniform:
    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float):
        self.lo = lo
        self.hi = hi

    def sample(self, u1: float, u2: float) -> float:
        x = self.lo + (self.hi - self.lo) * u2
        return x if x <= self.hi else self.hi

    def upper(self) -> float:
        return self.hi

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def scaled(self, k: float) -> "Uniform":
        return Uniform(self.lo * k, self.hi * k)

    def describe(self):
        return ("uniform", self.lo, self.hi)

    def __repr__(self):
        return f"Uniform({self.lo!r}, {self.hi!r})"


class Mixture:
    """Finite mixture of point masses and uniforms; ``u1`` picks the component."""

    __slots__ = ("parts",)

    def __init__(self, parts: Sequence[tuple[float, object]]):
        total = sum(w for w, _ in parts)
        if abs(total - 1.0) > 1e-12 or any(w < 0 for w, _ in parts):
            raise errors.ValidationError(f"mixture weights {[w for w, _ in parts]} do not form a distribution")
        self.parts = tuple(parts)

    def sample(self, u1: float, u2: float) -> float:
        acc = 0.0
        for w, d in self.parts:
            acc += w
            if u1 < acc:
                return d.sample(u1, u2)
        return self.parts[-1][1].sample(u1, u2)

    def upper(self) -> float:
        return max(d.upper() for w, d in self.parts if w > 0)

    def mean(self) -> float:
        return sum(w * d.mean() for w, d in self.parts)

    def scaled(self, k: float) -> "Mixture":
        return Mixture([(w, d.scaled(k)) for w, d in self.parts])

    def describe(self):
        return ("mixture",) + tuple((w, d.describe()) for w, d in self.parts)

    def __repr__(self):
        return f"Mixture({list(self.parts)!r})"


class BidAction:
    __slots__ = ("dist", "move")

    def __init__(self, dist, move: int):
        self.dist = dist
        self.move = move

    def describe(self):
        return (self.dist.describe(), self.move)

    def __repr__(self):
        return f"BidAction({self.dist!r}, move={self.move})"


# --- strategy base ------------------------------------------------------

class Strategy:
    """Common interface. Subclasses override ``act`` or ``respond``."""

    responder = False
    mixed = False
    stateful = False
    name = "strategy"
    ledger: LedgerParams | None = None

    def reset(self, own: float, opp: float) -> None:
        """Called with the initial budgets before each play."""

    def act(self, v: int, own: float, opp: float) -> BidAction:
        raise NotImplementedError

    def respond(self, v: int, own: float, opp: float, opp_bid: float) -> BidAction:
        raise NotImplementedError

    def observe(self, v: int, own_bid: float, opp_bid: float, won: bool, move: int,
                own_after: float, opp_after: float) -> None:
        """Called after every step when ``stateful`` is set."""

    def __repr__(self):
        return f"<{self.name}>"


def _ratio(s: float, s_max: float) -> float:
    return s / s_max if s_max > 0 else 0.0


def _check_eps(eps: float) -> None:
    if not (eps > 0 and math.isfinite(eps)):
        raise errors.EpsilonOutOfRange(f"epsilon must be positive, got {eps!r}")


def _base_ledger(variant: str, sol: StochasticSolution, **kw) -> LedgerParams:
    return LedgerParams(variant=variant, p=sol.p, strength=tuple(sol.strength.tolist()),
                        up=sol.sigma_max, s_max=sol.s_max, s_min_pos=sol.s_min_pos, **kw)


# --- first-price --------------------------------------------------------

class FPRichman(Strategy):
    """First-price Richman. Bids a strength-scaled share of the main budget.

    The initial ratio is split into a main budget ``(1+alpha)^-k0`` and spare
    change that is never bid. The main budget is mirrored in log space: it
    shrinks geometrically while Max keeps winning and would otherwise fall
    below the range of a double. A positive bid that rounds to zero is sent
    as the least positive double, so it still beats a zero bid.
    """

    name = "fp-richman"
    stateful = True

    def __init__(self, G: GameGraph, eps: float, r0: float, alpha: float | None = None):
        _check_eps(eps)
        if not (0.0 < r0 < 1.0):
            raise errors.ValidationError(f"initial ratio {r0!r} outside (0, 1)")
        self.eps = eps
        self.sol = solve_mean_payoff(G, 1.0 / (2.0 + eps))
        self.alpha = shift_inverse(1.0 + eps) if alpha is None else alpha
        k0 = 0
        while (1.0 + self.alpha) ** (-k0) > r0:
            k0 += 1
        self.k0 = k0
        self.main0 = (1.0 + self.alpha) ** (-k0)
        self.delta = r0 - self.main0
        self.r0 = r0
        self.st = self.sol.strength.tolist()
        self.up = self.sol.sigma_max
        self.ledger = _base_ledger("FPRichman", self.sol, alpha=self.alpha, mu=1.0 + eps, nu=1.0,
                                   N=self.sol.s_max, eps=eps, k0=k0, delta=self.delta, B0=r0)
        self.reset(r0, 1.0 - r0)

    def reset(self, own, opp):
        self.total = own + opp
        self.log_main = math.log(self.main0)
        self._share = 0.0

    @property
    def main(self) -> float:
        return math.exp(self.log_main)

    def act(self, v, own, opp):
        share = self.alpha * _ratio(self.st[v], self.sol.s_max)
        self._share = share
        bid = share * math.exp(self.log_main) * self.total
        if share > 0 and bid == 0.0:
            bid = 5e-324
        return BidAction(PointMass(min(bid, own)), self.up[v])

    def observe(self, v, own_bid, opp_bid, won, move, own_after, opp_after):
        if won:
            self.log_main += math.log1p(-self._share)
        elif opp_bid > 0:
            self.log_main = float(_logaddexp(self.log_main, math.log(opp_bid / self.total)))


def _logaddexp(a, b):
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


class FPPoorman(Strategy):
    """First-price poorman with Min's budget normalized to 1.

    Keeps Max's normalized budget above ``W = B0 - eps`` and bids a
    strength-scaled share of the excess.
    """

    name = "fp-poorman"

    def __init__(self, G: GameGraph, B0: float, eps: float):
        _check_eps(eps)
        if not (0 < eps < B0):
            raise errors.BudgetBelowW(f"need 0 < eps < B0, got eps={eps!r}, B0={B0!r}")
        self.B0 = B0
        self.eps = eps
        self.W = B0 - eps
        self.sol = solve_mean_payoff(G, (B0 - eps) / (B0 + 1.0))
        self.alpha = shift_inverse(1.0 + eps)
        self.N = max(self.W, 1.0) * self.sol.s_max
        self.st = self.sol.strength.tolist()
        self.up = self.sol.sigma_max
        self.ledger = _base_ledger("FPPoorman", self.sol, alpha=self.alpha, mu=1.0 + eps,
                                   nu=self.W, N=self.N, W=self.W, eps=eps, B0=B0)

    def act(self, v, own, opp):
        s = self.st[v]
        if s == 0.0 or self.N == 0.0:
            return BidAction(PointMass(0.0), self.up[v])
        # bid in raw units: (alpha s / N) (own/opp - W) * opp
        bid = self.alpha * s / self.N * (own - self.W * opp)
        return BidAction(PointMass(min(max(bid, 0.0), own)), self.up[v])


# --- all-pay Richman ----------------------------------------------------

class APRichmanMixed(Strategy):
    """All-pay Richman: bid uniformly below a strength-scaled share of the budget."""

    name = "ap-richman-mixed"
    mixed = True

    def __init__(self, G: GameGraph, eps: float):
        _check_eps(eps)
        self.eps = eps
        self.c = 1.0 + eps
        self.sol = solve_mean_payoff(G, 1.0 / (2.0 + eps))
        self.alpha = shift_inverse(self.c)
        self.st = self.sol.strength.tolist()
        self.up = self.sol.sigma_max
        self.ledger = _base_ledger("APRichman", self.sol, alpha=self.alpha, mu=self.c, nu=1.0,
                                   N=self.sol.s_max, eps=eps)

    def act(self, v, own, opp):
        beta = self.alpha * own * _ratio(self.st[v], self.sol.s_max)
        return BidAction(Uniform(0.0, beta), self.up[v])


class MinCounter(Strategy):
    """Responder that matches any bid it can afford and drops out otherwise.

    Ties go to Min, so matching wins. Moves follow the policy of the
    one-player game in which the owner controls every move.
    """

    name = "min-counter"
    responder = True

    def __init__(self, G: GameGraph):
        # owner-frame: maximize, i.e. the p=1 policy of the owner
        self.up = solve_mean_payoff(G, 1.0).sigma_max

    def respond(self, v, own, opp, opp_bid):
        bid = 0.0 if opp_bid > own else opp_bid
        return BidAction(PointMass(bid), self.up[v])


def ap_richman_min_counter(G: GameGraph) -> MinCounter:
    """Min's counter built on the negated graph, so it steers toward low weights."""
    return MinCounter(G.negated())


# --- asymmetric games ---------------------------------------------------

def _need_w_above_one(W):
    if not (W > 1.0):
        raise errors.WNotAboveOne(f"this strategy needs W > 1, got {W!r}")


class AsymPure(Strategy):
    """Pure strategy for the asymmetric game with ``W > 1``."""

    name = "asym-pure"

    def __init__(self, G: GameGraph, W: float, eps: float):
        _need_w_above_one(W)
        _check_eps(eps)
        self.W, self.eps = W, eps
        self.sol = solve_mean_payoff(G, 1.0 - (1.0 + eps) / (W + eps))
        self.alpha = shift_inverse(1.0 + eps)
        self.N = max(self.sol.s_max, (W - 1.0) * self.sol.s_max)
        self.st = self.sol.strength.tolist()
        self.up = self.sol.sigma_max
        self.ledger = _base_ledger("AsymPure", self.sol, alpha=self.alpha, mu=1.0 + eps,
                                   nu=W - 1.0, N=self.N, W=W, eps=eps)

    def act(self, v, own, opp):
        k = self.st[v] / self.N if self.N > 0 else 0.0
        return BidAction(PointMass(k * self.alpha * own), self.up[v])


class AsymResponder(Strategy):
    """Responder for the asymmetric game with ``W <= 1``: outbid cheap bids only."""

    name = "asym-responder"
    responder = True

    def __init__(self, G: GameGraph, W: float, eps: float):
        if W > 1.0 or not W > 0:
            raise errors.WAboveOne(f"this strategy needs 0 < W <= 1, got {W!r}")
        if not (0.0 < eps < 1.0):
            raise errors.EpsilonOutOfRange(f"need 0 < eps < 1, got {eps!r}")
        self.W, self.eps = W, eps
        self.sol = solve_mean_payoff(G, (1.0 - eps) * W)
        self.alpha = shift_inverse(1.0 / (1.0 - eps))
        self.N = (1.0 + eps * W) * self.sol.s_max
        self.st = self.sol.strength.tolist()
        self.up = self.sol.sigma_max
        self.ledger = _base_ledger("AsymResponder", self.sol, alpha=self.alpha,
                                   mu=1.0 / (1.0 - eps) - W, nu=W, N=self.N, W=W, eps=eps)

    def respond(self, v, own, opp, opp_bid):
        k = self.st[v] / self.N if self.N > 0 else 0.0
        if opp_bid > k * self.alpha * own:
            return BidAction(PointMass(0.0), self.up[v])
        # ties go to Min, so a zero bid must still be beaten by a positive one
        bid = max(opp_bid * (1.0 + self.eps * self.W), math.nextafter(opp_bid, math.inf))
        return BidAction(PointMass(min(bid, own)), self.up[v])


class AsymMixed(Strategy):
    """Mixed strategy for the asymmetric game, both regimes of ``W``.

    With a large budget relative to the vertex strength the bid is
    deterministic and certain to win; otherwise it is random.
    """

    name = "asym-mixed"
    mixed = True

    def __init__(self, G: GameGraph, W: float, eps: float):
        _check_eps(eps)
        if not W > 0:
            raise errors.ValidationError(f"W must be positive, got {W!r}")
        self.W, self.eps = W, eps
        self.high = W > 1.0
        if self.high:
            p = (2.0 * W - 1.0) / (2.0 * W + eps)
            mu, nu = 1.0 + eps, 2.0 * W - 1.0
        else:
            if not eps < W:
                raise errors.EpsilonTooLarge(f"need eps < W when W <= 1, got eps={eps!r}, W={W!r}")
            p = (W - eps) / 2.0
            mu, nu = 2.0 - W + eps, W - eps
        self.sol = solve_mean_payoff(G, p)
        self.alpha = shift_inverse(1.0 + eps)
        self.mu, self.nu = mu, nu
        self.st = self.sol.strength.tolist()
        self.up = self.sol.sigma_max
        variant = "AsymMixedHighW" if self.high else "AsymMixedLowW"
        self.ledger = _base_ledger(variant, self.sol, alpha=self.alpha, mu=mu, nu=nu,
                                   N=self.sol.s_max, W=W, eps=eps)

    def act(self, v, own, opp):
        s = self.st[v]
        sm = self.sol.s_max
        a = self.alpha
        W = self.W
        if self.high:
            if s > 0 and own > 2.0 * W * W * sm / (a * s):
                return BidAction(PointMass(s * a * own / (2.0 * W * sm)), self.up[v])
            beta = s * a * own / (W * sm) if sm > 0 else 0.0
            return BidAction(Uniform(0.0, beta), self.up[v])
        if s > 0 and own > 2.0 * sm / (a * s):
            return BidAction(PointMass(s * a * own / (2.0 * sm)), self.up[v])
        beta = s * a * own / sm if sm > 0 else 0.0
        q = 1.0 - W + self.eps
        return BidAction(Mixture([(q, PointMass(0.0)), (1.0 - q, Uniform(0.0, beta))]), self.up[v])


# --- all-pay poorman via the asymmetric game ----------------------------

class PoormanLift(Strategy):
    """Play an asymmetric-game strategy inside all-pay poorman.

    Keeps a simulated asymmetric budget, starting at ``B0/C0 - W``. The inner
    strategy bids against a Min budget of 1; the real bid is that times the
    opponent's current budget. After each step the opponent's bid, rescaled
    the same way, updates the simulated budget. Each simulated step is kept in
    ``shadow`` so the inner strategy's claims can be checked.
    """

    stateful = True

    def __init__(self, inner: Strategy, W: float, B0: float, C0: float):
        if not (C0 > 0 and B0 / C0 > W):
            raise errors.RatioTooSmall(f"need B0/C0 > W, got B0={B0!r}, C0={C0!r}, W={W!r}")
        self.inner = inner
        self.W = W
        self.B0, self.C0 = B0, C0
        self.responder = inner.responder
        self.mixed = inner.mixed
        self.name = f"lift:{inner.name}"
        self.ledger = replace(inner.ledger, B0=B0 / C0 - W) if inner.ledger else None
        self.reset(B0, C0)

    @property
    def ratio(self) -> float:
        return self.tB0 / (self.tB0 + 1.0)

    def reset(self, own, opp):
        if not (opp > 0 and own / opp > self.W):
            raise errors.RatioTooSmall(f"need own/opp > W, got {own!r}/{opp!r} with W={self.W!r}")
        self.tB0 = own / opp - self.W
        self.tB = self.tB0
        self._opp = opp
        self.inner.reset(self.tB, 1.0)
        self.shadow: list[tuple] = []

    def _lift(self, a: BidAction, own: float, opp: float) -> BidAction:
        return BidAction(a.dist.scaled(opp), a.move)

    def act(self, v, own, opp):
        self._opp = opp
        if opp == 0.0:
            # the opponent cannot bid any more; any positive bid wins
            return BidAction(PointMass(0.5 * own), self.inner.act(v, self.tB, 1.0).move)
        return self._lift(self.inner.act(v, self.tB, 1.0), own, opp)

    def respond(self, v, own, opp, opp_bid):
        self._opp = opp
        if opp == 0.0:
            return BidAction(PointMass(0.5 * own), self.inner.respond(v, self.tB, 1.0, 0.0).move)
        a = self.inner.respond(v, self.tB, 1.0, opp_bid / opp)
        out = self._lift(a, own, opp)
        if a.dist.upper() > opp_bid / opp and out.dist.upper() <= opp_bid:
            # the rescaled bid rounded onto the tie, which Min would win
            out = BidAction(PointMass(min(math.nextafter(opp_bid, math.inf), own)), a.move)
        return out

    def observe(self, v, own_bid, opp_bid, won, move, own_after, opp_after):
        C = self._opp
        if C == 0.0:
            return
        tx = own_bid / C
        ty = opp_bid / C
        before = self.tB
        self.tB = before - tx + self.W * ty
        self.shadow.append((v, tx, ty, won, move, before, self.tB))
        if self.inner.stateful:
            self.inner.observe(v, tx, ty, won, move, self.tB, 1.0)


def poorman_lift(inner: Strategy, W: float, B0: float, C0: float) -> PoormanLift:
    return PoormanLift(inner, W, B0, C0)


def dual_min_strategy(builder: Callable[[GameGraph], Strategy], G: GameGraph) -> Strategy:
    """Min's version of a Max construction: build it on the negated graph.

    Strategies only see their own and the opponent's budget, so the swap of
    roles needs nothing beyond negating the weights.
    """
    s = builder(G.negated())
    s.name = f"dual:{s.name}"
    return s


# --- heuristic opponents ------------------------------------------------

def greedy_moves(G: GameGraph, p: float = 0.5) -> tuple[int, ...]:
    """Owner-frame moves: the maximizing successors of the random-turn game."""
    return solve_mean_payoff(G, p).sigma_max


class Heuristic(Strategy):
    """Simple budget-fraction opponents for tournaments."""

    def __init__(self, G: GameGraph, kind: str, f: float = 1.0, moves=None):
        self.kind = kind
        self.f = f
        self.up = tuple(moves) if moves is not None else greedy_moves(G)
        self.mixed = kind == "uniform"
        self.stateful = kind == "all-in-once"
        self.name = kind if kind in ("zero", "all-in", "all-in-once") else f"{kind}:f={f!r}"
        self.spent = False

    def reset(self, own, opp):
        self.spent = False

    def act(self, v, own, opp):
        k = self.kind
        if k == "zero":
            d = PointMass(0.0)
        elif k == "all-in":
            d = PointMass(own)
        elif k == "all-in-once":
            d = PointMass(0.0 if self.spent else own)
        elif k == "fraction":
            d = PointMass(self.f * own)
        elif k == "uniform":
            d = Uniform(0.0, self.f * own)
        elif k == "outbid":
            d = PointMass(min(own, self.f * opp))
        else:
            raise errors.BadStrategySpec(f"unknown heuristic {k!r}")
        return BidAction(d, self.up[v])

    def observe(self, v, own_bid, opp_bid, won, move, own_after, opp_after):
        if own_bid > 0:
            self.spent = True


# --- spec strings -------------------------------------------------------

def _kv(text: str) -> dict:
    out = {}
    if not text:
        return out
    for part in text.split(","):
        k, eq, v = part.partition("=")
        if not eq:
            raise errors.BadStrategySpec(f"expected key=value, got {part!r}")
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise errors.BadStrategySpec(f"bad number in {part!r}") from None
    return out


def build_strategy(spec: str, G: GameGraph, role: str, own0: float, opp0: float) -> Strategy:
    """Build a strategy from a spec string such as ``asym-mixed:W=3,eps=0.5``.

    ``role`` is ``"max"`` or ``"min"``. Every construction is built in its
    owner's frame, so for Min it is built on the negated graph. The prefix
    ``dual:`` only marks such a Min construction and is accepted for Min only.
    ``own0`` and ``opp0`` are the owner's and the opponent's initial budgets.
    """
    spec = spec.strip()
    if role not in ("max", "min"):
        raise errors.BadStrategySpec(f"role must be max or min, got {role!r}")
    head, _, rest = spec.partition(":")
    if head == "dual":
        if role != "min":
            raise errors.BadStrategySpec("dual: strategies are Min strategies")
        s = build_strategy(rest, G, "min", own0, opp0)
        s.name = f"dual:{s.name}"
        return s
    if head == "lift":
        inner = build_strategy(rest, G, role, own0, opp0)
        W = getattr(inner, "W", None)
        if W is None:
            raise errors.BadStrategySpec("lift needs an asymmetric inner strategy")
        return poorman_lift(inner, W, own0, opp0)
    kw = _kv(rest)
    F = G if role == "max" else G.negated()
    try:
        if head == "fp-richman":
            s = FPRichman(F, kw.pop("eps"), own0 / (own0 + opp0), kw.pop("alpha", None))
        elif head == "fp-poorman":
            s = FPPoorman(F, own0 / opp0, kw.pop("eps"))
        elif head == "ap-richman-mixed":
            s = APRichmanMixed(F, kw.pop("eps"))
        elif head == "min-counter":
            s = MinCounter(F)
        elif head == "asym-pure":
            s = AsymPure(F, kw.pop("W"), kw.pop("eps"))
        elif head == "asym-responder":
            s = AsymResponder(F, kw.pop("W"), kw.pop("eps"))
        elif head == "asym-mixed":
            s = AsymMixed(F, kw.pop("W"), kw.pop("eps"))
        elif head in ("zero", "all-in", "all-in-once"):
            s = Heuristic(F, head)
        elif head in ("fraction", "uniform", "outbid"):
            s = Heuristic(F, head, kw.pop("f", 1.0))
        else:
            raise errors.BadStrategySpec(f"unknown strategy {spec!r}")
    except KeyError as exc:
        raise errors.BadStrategySpec(f"{head} needs parameter {exc}") from None
    if kw:
        raise errors.BadStrategySpec(f"unused parameters {sorted(kw)} in {spec!r}")
    return s
