"""Ledger accounting and claim checking for recorded plays.

Every budget-based construction keeps three running quantities along a play:

* ``I+``: total strength of the steps Max won and moved to ``v+``;
* ``G+``: total strength of the steps Min won;
* the luck ``L`` of the mixed constructions, a per-step score of how the
  realized bids compare with the bid distribution.

The checks below replay a trace, rebuild these quantities and test the
budget invariants and the bounds on ``H = mu*I+ - nu*G+`` (or ``L - H``).
All invariants are compared on a logarithmic scale in base ``1 + alpha``.

Min's bid is clamped to the largest bid Max could have made before it enters
the luck. Any larger bid only raises Max's true budget, so the invariants
remain sound for the clamped luck.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import errors

VARIANTS = ("APRichman", "FPRichman", "FPPoorman", "AsymPure", "AsymResponder",
            "AsymMixedHighW", "AsymMixedLowW")
REL_SLACK = 1e-9


@dataclass(frozen=True)
class LedgerParams:
    """Constants of one construction, enough to rebuild its ledger."""

    variant: str
    p: float
    strength: tuple
    up: tuple
    s_max: float
    s_min_pos: float | None
    alpha: float
    mu: float
    nu: float
    N: float
    W: float | None = None
    eps: float | None = None
    k0: int | None = None
    delta: float | None = None
    B0: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise errors.ValidationError(f"unknown ledger variant {self.variant!r}")

    @property
    def log_base(self) -> float:
        return math.log1p(self.alpha)


@dataclass
class Ledger:
    """Per-prefix quantities; index ``n`` is the state after ``n`` steps."""

    budget: np.ndarray
    i_plus: np.ndarray
    g_plus: np.ndarray
    luck: np.ndarray
    h: np.ndarray
    flagged: list = field(default_factory=list)


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_margin: float
    worst_step: int
    first_violation: int | None
    margins: np.ndarray = field(repr=False, default=None)
    bound: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed),
                "worst_margin": float(self.worst_margin), "worst_step": int(self.worst_step),
                "first_violation": self.first_violation,
                "bound": None if self.bound is None else float(self.bound), "detail": self.detail}


def _report(name, margins, scale, bound=None, detail=""):
    margins = np.asarray(margins, dtype=float)
    tol = -REL_SLACK * np.maximum(1.0, scale)
    bad = np.flatnonzero(margins < tol)
    k = int(np.argmin(margins)) if len(margins) else 0
    return CheckReport(name, len(bad) == 0, float(margins[k]) if len(margins) else math.inf, k,
                       int(bad[0]) if len(bad) else None, margins, bound, detail)


# --- per-step luck --------------------------------------------------------

def bid_cap(params: LedgerParams, s, B):
    """Largest bid Max's strategy can make at strength ``s`` and budget ``B``.

    Also returns whether the deterministic branch is active. Works on arrays.
    """
    s = np.asarray(s, dtype=float)
    B = np.asarray(B, dtype=float)
    a, sm = params.alpha, params.s_max
    with np.errstate(divide="ignore", invalid="ignore"):
        if params.variant == "APRichman":
            cap = np.where(sm > 0, a * B * s / sm if sm > 0 else 0.0, 0.0)
            return cap, np.zeros_like(cap, dtype=bool)
        W = params.W
        if params.variant == "AsymMixedHighW":
            det = (s > 0) & (B > 2 * W * W * sm / (a * s))
            cap = np.where(det, s * a * B / (2 * W * sm), s * a * B / (W * sm) if sm > 0 else 0.0)
            return cap, det
        if params.variant == "AsymMixedLowW":
            det = (s > 0) & (B > 2 * sm / (a * s))
            cap = np.where(det, s * a * B / (2 * sm), s * a * B / sm if sm > 0 else 0.0)
            return cap, det
    raise errors.VariantWithoutLuck(f"variant {params.variant} has no luck")


def min_bid_limit(params: LedgerParams, B):
    """Min's budget when Max holds ``B``, in the variant's normalization.

    Richman budgets sum to 1; in the asymmetric game Min always holds 1.
    """
    B = np.asarray(B, dtype=float)
    if params.variant == "APRichman":
        return 1.0 - B
    return np.ones_like(B)


def luck_increment(params: LedgerParams, s, B, x, y, clamp=True):
    """Luck change for one bidding (vectorized).

    ``B`` is Max's budget before the bidding in the variant's normalization.
    """
    s = np.asarray(s, dtype=float)
    B = np.asarray(B, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cap, det = bid_cap(params, s, B)
    if clamp:
        y = np.minimum(y, cap)
    a, sm = params.alpha, params.s_max
    k = 2.0 * sm / (a * B)
    v = params.variant
    if v == "APRichman":
        c = params.mu
        return np.where(x > y, c * (s + k * (y - x)), -s + k * (y - x))
    W, mu, nu, eps = params.W, params.mu, params.nu, params.eps
    if v == "AsymMixedHighW":
        d = W * y - x
        return np.where(x <= y, W * k * d - nu * s,
                        np.where(x <= W * y, W * k * d + mu * s, W * mu * k * d + mu * s))
    if v == "AsymMixedLowW":
        d = W * y - x
        return np.where(x <= W * y, k * d - nu * s,
                        np.where(x <= y, (1 + eps) * k * d - nu * s, (1 + eps) * k * d + mu * s))
    raise errors.VariantWithoutLuck(f"variant {v} has no luck")


def luck_bound(params: LedgerParams) -> float:
    """A bound on ``|dL|`` for a single step with clamped bids."""
    v = params.variant
    sm = params.s_max
    if v == "APRichman":
        return 3.0 * params.mu * sm
    if v == "AsymMixedHighW":
        return 2.0 * sm * (params.W ** 2 + 1.0) * (params.mu + params.nu)
    if v == "AsymMixedLowW":
        return (2.0 * (1.0 + params.eps) + params.mu + params.nu) * sm
    raise errors.VariantWithoutLuck(f"variant {v} has no luck")


def expected_luck_closed_form(params: LedgerParams, s: float, B: float, y: float) -> float:
    """Expected luck change when Max draws from his strategy and Min bids ``y``.

    ``y`` must lie in ``[0, cap]`` where ``cap`` is Max's largest possible bid.
    """
    cap, det = bid_cap(params, s, B)
    cap, det = float(cap), bool(det)
    if not (0.0 <= y <= cap * (1 + 1e-15)):
        raise errors.YOutOfRange(f"Min bid {y!r} outside [0, {cap!r}]")
    y = min(y, cap)
    v = params.variant
    a, sm = params.alpha, params.s_max
    if cap == 0.0:
        return 0.0
    if v == "APRichman":
        c = params.mu
        return sm * (c - 1.0) * y * (cap - y) / (cap * a * B)
    W, mu, nu, eps = params.W, params.mu, params.nu, params.eps
    if det:
        return float(luck_increment(params, s, B, cap, y))
    beta = cap
    if v == "AsymMixedHighW":
        # S vanishes since nu = 2W - 1; T from the eps share of mu on (y, beta];
        # U from the extra slope on (Wy, beta] when Wy <= beta
        T = (beta - y) * eps * s
        U = -(beta - W * y) ** 2 * eps * s / beta if W * y <= beta else 0.0
        return (T + U) / beta
    if v == "AsymMixedLowW":
        base = 2.0 * s * W * y / beta - nu * s
        S = (1.0 - W) * (beta - 2.0 * y) * s
        T = -eps * s * (beta - W * y) ** 2 / beta
        U = beta * eps * s
        return (1.0 - nu) * base + nu / beta * (S + T + U)
    raise errors.VariantWithoutLuck(f"variant {v} has no luck")


def expected_luck_quadrature(params: LedgerParams, s: float, B: float, y: float,
                             points: int = 1_000_000) -> float:
    """Midpoint-rule expectation of the luck change, the reference for the closed form.

    The luck change jumps where Max's bid crosses ``y`` or ``W y``; the grid
    is split there so no cell straddles a jump.
    """
    cap, det = bid_cap(params, s, B)
    cap, det = float(cap), bool(det)
    if cap == 0.0:
        return float(luck_increment(params, s, B, 0.0, y))
    if det:
        return float(luck_increment(params, s, B, cap, y))
    W = params.W if params.W is not None else 1.0
    cuts = sorted({0.0, cap} | {b for b in (y, W * y) if 0.0 < b < cap})
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        m = max(1, int(round(points * (hi - lo) / cap)))
        xs = lo + (np.arange(m) + 0.5) * ((hi - lo) / m)
        total += (hi - lo) * float(np.mean(luck_increment(params, s, B, xs, y)))
    mean_u = total / cap
    if params.variant == "AsymMixedLowW":
        q = 1.0 - params.nu
        return q * float(luck_increment(params, s, B, 0.0, y)) + (1.0 - q) * mean_u
    return mean_u


# --- trace replay -------------------------------------------------------

def _before(trace):
    B = np.concatenate([[trace.B0], trace.B[:-1]]) if len(trace) else np.array([])
    C = np.concatenate([[trace.C0], trace.C[:-1]]) if len(trace) else np.array([])
    return B, C


def replay_check(trace) -> CheckReport:
    """Recompute each step's budgets from its predecessor and compare."""
    from .arena import resolve_bidding

    Bb, Cb = _before(trace)
    margins = np.zeros(len(trace))
    first = None
    for i in range(len(trace)):
        try:
            w, (nb, nc) = resolve_bidding(trace.mech, (float(Bb[i]), float(Cb[i])),
                                          float(trace.x[i]), float(trace.y[i]))
        except errors.ValidationError:
            margins[i] = -math.inf
        else:
            k = trace.scale[i]
            err = max(abs(nb * k - trace.B[i]), abs(nc * k - trace.C[i]))
            err /= max(1.0, abs(trace.B[i]), abs(trace.C[i]))
            wrong_winner = (w == 0) != bool(trace.max_won[i])
            margins[i] = -math.inf if wrong_winner else -err
        if first is None and margins[i] < -1e-12:
            first = i
    k = int(np.argmin(margins)) if len(margins) else 0
    return CheckReport("replay", first is None, float(margins[k]) if len(margins) else 0.0, k,
                       first, margins)


def _normalized(trace, params):
    """Max budget (per prefix) and bids in the variant's normalization."""
    Bb, Cb = _before(trace)
    B_all = np.concatenate([[trace.B0], trace.B])
    C_all = np.concatenate([[trace.C0], trace.C])
    v = params.variant
    with np.errstate(divide="ignore", invalid="ignore"):
        if v in ("APRichman", "FPRichman"):
            tot_b = Bb + Cb
            return B_all / (B_all + C_all), Bb / tot_b, trace.x / tot_b, trace.y / tot_b
        if v == "FPPoorman":
            return B_all / C_all, Bb / Cb, trace.x / Cb, trace.y / Cb
    return B_all.copy(), Bb, trace.x, trace.y


def compute_ledger(trace, params: LedgerParams, clamp: bool = True) -> Ledger:
    """Rebuild ``I+``, ``G+``, ``H`` and ``L`` along a trace."""
    st = np.asarray(params.strength, dtype=float)
    up = np.asarray(params.up, dtype=np.int64)
    T = len(trace)
    s = st[trace.vertex] if T else np.zeros(0)
    won = np.asarray(trace.max_won, dtype=bool)
    to_up = np.asarray(trace.move) == up[trace.vertex] if T else np.zeros(0, dtype=bool)
    inc_i = np.where(won & to_up, s, 0.0)
    inc_g = np.where(~won, s, 0.0)
    flagged = np.flatnonzero(won & ~to_up).tolist()
    i_plus = np.concatenate([[0.0], np.cumsum(inc_i)])
    g_plus = np.concatenate([[0.0], np.cumsum(inc_g)])
    budget, Bb, x, y = _normalized(trace, params)
    lb = params.log_base
    v = params.variant
    if v in ("APRichman", "AsymMixedHighW", "AsymMixedLowW") and T:
        dl = luck_increment(params, s, Bb, x, y, clamp=clamp)
    else:
        dl = np.zeros(T)
    L0 = 0.0
    if v == "APRichman":
        L0 = math.log(budget[0]) / lb
    luck = L0 + np.concatenate([[0.0], np.cumsum(dl)])
    h = params.mu * i_plus - params.nu * g_plus
    if v == "FPPoorman":
        h = h - params.N * math.log(params.eps) / lb
    return Ledger(budget, i_plus, g_plus, luck, h, flagged)


def check_invariant(trace, params: LedgerParams, ledger: Ledger | None = None) -> CheckReport:
    """Budget invariant of the construction, at every prefix of the trace."""
    led = ledger or compute_ledger(trace, params)
    lb = params.log_base
    B = led.budget
    v = params.variant
    with np.errstate(divide="ignore", invalid="ignore"):
        if v == "APRichman":
            lhs = np.log(B) / lb
            rhs = (led.luck - params.mu * led.i_plus + led.g_plus) / (2.0 * params.s_max)
        elif v == "FPRichman":
            # energy form: the main budget never exceeds 1, so H/S_max > -k0
            lhs = led.h / params.s_max if params.s_max > 0 else np.zeros_like(B)
            rhs = np.full_like(B, -float(params.k0))
            return _report(f"invariant:{v}", np.where(lhs > rhs, lhs - rhs, -np.inf), np.ones_like(B))
        elif v == "FPPoorman":
            lhs = params.N * np.log(B - params.W) / lb
            rhs = -led.h
        elif v in ("AsymPure", "AsymResponder"):
            lhs = np.log(B / B[0]) / lb
            rhs = -led.h / params.N if params.N > 0 else np.zeros_like(B)
        elif v == "AsymMixedHighW":
            lhs = np.log(B / B[0]) / lb
            rhs = (led.luck - led.h) / (2.0 * params.W * params.s_max)
        elif v == "AsymMixedLowW":
            lhs = np.log(B / B[0]) / lb
            rhs = (led.luck - led.h) / (2.0 * params.s_max)
        else:
            raise errors.VariantMismatch(f"no invariant for {v}")
        margins = np.where(np.isposinf(lhs), np.inf, lhs - rhs)
    margins = np.nan_to_num(margins, nan=-np.inf)
    return _report(f"invariant:{v}", margins, np.abs(rhs))


def h_bound_constant(params: LedgerParams) -> float:
    """The constant ``M`` of the construction's bound.

    For ``AsymPure`` and ``FPPoorman`` the bound is ``H >= M`` (for
    ``FPPoorman`` on ``H`` without its constant offset); for the mixed
    asymmetric variants it is ``L - H <= M``. The budget threshold behind
    ``M`` is divided by the initial budget when that is below 1.
    """
    v = params.variant
    if params.s_min_pos is None:
        raise errors.NoPositiveStrength("all strengths are zero")
    lb = params.log_base
    a, sm, smin, N, nu, mu = params.alpha, params.s_max, params.s_min_pos, params.N, params.nu, params.mu
    B0 = params.B0 if params.B0 is not None else 1.0
    low = min(0.0, math.log(B0) / lb)
    if v == "AsymPure":
        T = -N * math.log(N / (a * smin)) / lb + N * low
        return min(0.0, T) - nu * sm
    if v == "FPPoorman":
        off = N * math.log(params.eps) / lb
        T = -N * math.log(N / (a * smin)) / lb
        return min(-off, T) - nu * sm + off
    W = params.W
    if v == "AsymMixedHighW":
        T = 2 * W * sm * math.log(2 * W * W * sm / (a * smin)) / lb - 2 * W * sm * low
        return max(0.0, T) + (2 * W * W + 1) * mu * sm + nu * sm
    if v == "AsymMixedLowW":
        T = 2 * sm * math.log(2 * sm / (a * smin)) / lb - 2 * sm * low
        return max(0.0, T) + (2 * W + 1) * mu * sm + nu * sm
    raise errors.VariantMismatch(f"no H bound for {v}")


def check_h_bound(trace, params: LedgerParams, ledger: Ledger | None = None) -> CheckReport:
    led = ledger or compute_ledger(trace, params)
    v = params.variant
    if params.s_min_pos is None:
        # no strength anywhere: every ledger quantity stays at its start value
        return _report(f"bound:{v}", np.zeros(len(led.h)), np.ones(len(led.h)), 0.0)
    M = h_bound_constant(params)
    if v == "AsymPure":
        margins = led.h - M
    elif v == "FPPoorman":
        margins = params.mu * led.i_plus - params.nu * led.g_plus - M
    elif v in ("AsymMixedHighW", "AsymMixedLowW"):
        margins = M - (led.luck - led.h)
    else:
        raise errors.VariantMismatch(f"no H bound for {v}")
    return _report(f"bound:{v}", margins, np.full(len(margins), abs(M)), M)


def check_lift(trace, shadow: Sequence[tuple], W: float) -> CheckReport:
    """The real ratio minus ``W`` dominates the simulated asymmetric budget."""
    n = min(len(shadow), len(trace))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ratio = np.asarray(trace.B[:n]) / np.asarray(trace.C[:n])
    tB = np.array([row[6] for row in shadow[:n]])
    with np.errstate(invalid="ignore"):
        margins = np.where(np.isposinf(ratio), np.inf, ratio - W - tB)
    margins = np.concatenate([[trace.B0 / trace.C0 - W - (shadow[0][5] if n else 0.0)], margins])
    bad = np.flatnonzero(margins < -1e-12)
    k = int(np.argmin(margins))
    return CheckReport("lift", len(bad) == 0, float(margins[k]), k,
                       int(bad[0]) if len(bad) else None, margins)


def shadow_trace(shadow: Sequence[tuple], trace, W: float, B0: float):
    """The asymmetric game a poorman lift simulated, as a trace of its own.

    Its invariants and bounds are those of the inner strategy.
    """
    from .arena import Asymmetric
    from .engine import PlayTrace

    n = len(shadow)
    col = list(zip(*shadow)) if n else [()] * 7
    return PlayTrace(trace.graph, Asymmetric(W), trace.start, float(B0), 1.0,
                     np.asarray(col[0], dtype=np.int64), np.asarray(col[1], dtype=float),
                     np.asarray(col[2], dtype=float), np.asarray(col[3], dtype=bool),
                     np.asarray(col[4], dtype=np.int64), np.asarray(col[6], dtype=float),
                     np.ones(n), np.ones(n), trace.seed, trace.trial)


# --- potential inequality -----------------------------------------------

def enumerate_paths(G, n: int) -> Iterator[tuple[int, ...]]:
    """All paths with exactly ``n`` edges, in lexicographic order."""
    if n < 0:
        raise errors.InvalidPath("path length must be nonnegative")
    if n > 12:
        raise errors.TooLong(f"refusing to enumerate paths of length {n} > 12")
    stack = [(v,) for v in reversed(range(G.n))]
    while stack:
        path = stack.pop()
        if len(path) == n + 1:
            yield path
            continue
        for u in reversed(G.succ[path[-1]]):
            stack.append(path + (u,))


def _magic_terms(sol, nu, mu):
    k = (nu + mu) / (nu * mu)
    return k * nu, k * mu


class MagicCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def check_magic(sol, nu: float, mu: float, path: Sequence[int]) -> MagicCheck:
    """Both sides of the potential inequality along ``path``; ``holds`` if lhs <= rhs.

    The solution must be for ``p = nu / (nu + mu)``. A step that moves to the
    maximizing successor counts as an investment, any other step as a gain.
    """
    G = sol.graph
    if abs(sol.p - nu / (nu + mu)) > 1e-12:
        raise errors.ValidationError("solution bias does not match nu/(nu+mu)")
    if len(path) == 0:
        raise errors.InvalidPath("empty path")
    for a, b in zip(path, path[1:]):
        if b not in G.succ[a]:
            raise errors.InvalidPath(f"{a}->{b} is not an edge")
    energy = float(sum(G.weights[v] for v in path[:-1]))
    ip = gp = 0.0
    for a, b in zip(path, path[1:]):
        if b == sol.sigma_max[a]:
            ip += sol.strength[a]
        else:
            gp += sol.strength[a]
    cg, ci = _magic_terms(sol, nu, mu)
    lhs = sol.pot[path[0]] - sol.pot[path[-1]] + (len(path) - 1) * sol.value
    rhs = energy + cg * gp - ci * ip
    tol = 1e-9 * (1.0 + abs(lhs) + abs(rhs))
    return MagicCheck(float(lhs), float(rhs), bool(rhs - lhs >= -tol))


def magic_exhaustive(sol, nu: float, mu: float, max_len: int) -> tuple[float, int]:
    """Worst slack of the potential inequality over every path of up to ``max_len`` edges.

    Paths are grown one edge at a time with the running sums carried along,
    so every path is visited exactly once. Returns the worst slack and the
    number of paths examined.
    """
    G = sol.graph
    if max_len > 12:
        raise errors.TooLong(f"refusing to enumerate paths of length {max_len} > 12")
    cg, ci = _magic_terms(sol, nu, mu)
    w = np.asarray(G.weights, dtype=float)
    pot = sol.pot
    st = sol.strength
    src = np.repeat(np.arange(G.n), [len(s) for s in G.succ])
    dst = np.concatenate([np.asarray(s) for s in G.succ])
    up = np.asarray(sol.sigma_max)
    # per-edge contribution to rhs - (energy part of lhs); pot terms telescope
    edge_rhs = w[src] + np.where(dst == up[src], -ci * st[src], cg * st[src])
    order = np.argsort(src, kind="stable")
    start = np.searchsorted(src[order], np.arange(G.n))
    deg = np.array([len(s) for s in G.succ])
    first = np.arange(G.n)
    last = np.arange(G.n)
    acc = np.zeros(G.n)
    worst = 0.0
    count = G.n
    for k in range(1, max_len + 1):
        reps = deg[last]
        idx = np.repeat(start[last], reps) + (np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps))
        e = order[idx]
        first = np.repeat(first, reps)
        acc = np.repeat(acc, reps) + edge_rhs[e]
        last = dst[e]
        lhs = pot[first] - pot[last] + k * sol.value
        slack = acc - lhs
        worst = min(worst, float(slack.min()))
        count += len(slack)
    return worst, count


# --- sampling the submartingale claim -----------------------------------

@dataclass
class SubmartingaleReport:
    passed: bool
    worst_z: float
    worst_state: tuple
    max_abs: float
    bound: float


def empirical_submartingale(params: LedgerParams, strategy, states: Sequence[tuple], trials: int,
                            rng: np.random.Generator) -> SubmartingaleReport:
    """Sample Max's bids at each ``(vertex, B, y)`` state and test ``E[dL] >= 0``.

    A state fails when the sample mean sits more than three standard errors
    below zero. The largest ``|dL|`` seen is compared with :func:`luck_bound`.
    """
    bound = luck_bound(params)
    worst = (math.inf, None)
    max_abs = 0.0
    st = params.strength
    for v, B, y in states:
        act = strategy.act(v, B, 1.0)
        u = rng.random((trials, 2))
        xs = np.array([act.dist.sample(a, b) for a, b in u])
        dl = luck_increment(params, st[v], B, xs, y)
        max_abs = max(max_abs, float(np.max(np.abs(dl))))
        se = float(np.std(dl, ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
        mean = float(np.mean(dl))
        z = mean / se if se > 0 else (math.inf if mean >= -1e-12 else -math.inf)
        if z < worst[0]:
            worst = (z, (v, B, y))
    return SubmartingaleReport(worst[0] >= -3.0 and max_abs <= bound * (1 + 1e-12), worst[0],
                               worst[1], max_abs, bound)
