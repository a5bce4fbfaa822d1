"""Simulating bidding games.

Randomness is counter based: the uniform draw used at ``(trial, step, k)``
comes from a Philox stream keyed by ``(seed, trial)`` at position
``4 * step + k``. Draws 0 and 1 belong to Max (mixture component, then the
point within it), 2 and 3 to Min. All four are consumed every step whether or
not they are used, so a draw never depends on what happened earlier.

Under scale-free mechanisms (everything except the asymmetric game) both
budgets are multiplied by a power of two whenever they drift below
``2**-400``. The factor is recorded with the step, the ratio is unchanged
bit for bit, and long poorman plays stay clear of underflow. A budget ratio
beyond the double range cannot be represented at all; when a budget turns
subnormal the simulation stops with :class:`BudgetRangeExceeded`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import errors
from .arena import (MAX, GameGraph, Mechanism, check_budgets, energy_prefix, payoff_estimate,
                    rescale_pow2, resolve_bidding, tail_min_average)

DRAWS_PER_STEP = 4
BLOCK = 4096
TINY = 2.0 ** -1022


def _key(seed: int, trial: int) -> list[int]:
    return [int(seed) & (2**64 - 1), int(trial) & (2**64 - 1)]


def draw_stream(seed: int, trial: int, steps: int) -> np.ndarray:
    """All draws of a trial as a ``(steps, 4)`` array."""
    gen = np.random.Generator(np.random.Philox(key=_key(seed, trial)))
    return gen.random((steps, DRAWS_PER_STEP))


def uniform_at(seed: int, trial: int, step: int, k: int) -> float:
    """The single draw at ``(seed, trial, step, k)``, computed without the prefix."""
    i = step * DRAWS_PER_STEP + k
    bg = np.random.Philox(key=_key(seed, trial))
    # Philox emits four 64-bit words per counter value
    bg.advance(i // 4)
    return float(np.random.Generator(bg).random(4)[i % 4])


class _Draws:
    def __init__(self, seed, trial, steps):
        self.gen = np.random.Generator(np.random.Philox(key=_key(seed, trial)))
        self.left = steps
        self.buf = None
        self.pos = BLOCK

    def row(self):
        if self.pos >= len(self.buf if self.buf is not None else ()):
            n = min(BLOCK, self.left)
            self.buf = self.gen.random((n, DRAWS_PER_STEP)).tolist()
            self.left -= n
            self.pos = 0
        r = self.buf[self.pos]
        self.pos += 1
        return r


@dataclass
class StepRecord:
    vertex: int
    bid_max: float
    bid_min: float
    max_won: bool
    move: int
    budget_max: float
    budget_min: float
    scale: float = 1.0

    def to_dict(self) -> dict:
        return {"vertex": self.vertex, "bid_max": self.bid_max, "bid_min": self.bid_min,
                "winner": "max" if self.max_won else "min", "move": self.move,
                "budget_max": self.budget_max, "budget_min": self.budget_min, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        try:
            return cls(int(d["vertex"]), float(d["bid_max"]), float(d["bid_min"]),
                       d["winner"] == "max", int(d["move"]), float(d["budget_max"]),
                       float(d["budget_min"]), float(d.get("scale", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise errors.CorruptTrace(f"bad step record {d!r}: {exc}") from None


@dataclass
class PlayTrace:
    """Column store of one play. ``B[i]``/``C[i]`` are budgets after step ``i``."""

    graph: GameGraph = field(repr=False)
    mech: Mechanism
    start: int
    B0: float
    C0: float
    vertex: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    max_won: np.ndarray = field(repr=False)
    move: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)
    seed: int = 0
    trial: int = 0

    def __len__(self):
        return len(self.vertex)

    def step(self, i: int) -> StepRecord:
        return StepRecord(int(self.vertex[i]), float(self.x[i]), float(self.y[i]),
                          bool(self.max_won[i]), int(self.move[i]), float(self.B[i]),
                          float(self.C[i]), float(self.scale[i]))

    def steps(self) -> list[StepRecord]:
        return [self.step(i) for i in range(len(self))]

    def visited(self) -> np.ndarray:
        """Vertices ``eta_0 .. eta_N``: the start and every move."""
        return np.concatenate([[self.start], self.move]).astype(np.int64)

    def energy_prefix(self) -> np.ndarray:
        return energy_prefix(self.graph.weights, self.visited()[:-1])

    def max_wins(self) -> int:
        return int(np.sum(self.max_won))

    def min_wins(self) -> int:
        return len(self) - self.max_wins()

    def to_jsonl(self) -> str:
        return "".join(json.dumps(self.step(i).to_dict()) + "\n" for i in range(len(self)))

    @classmethod
    def from_records(cls, graph, mech, start, B0, C0, records: Sequence[StepRecord], seed=0, trial=0):
        cols = list(zip(*[(r.vertex, r.bid_max, r.bid_min, r.max_won, r.move, r.budget_max,
                           r.budget_min, r.scale) for r in records])) or [()] * 8
        return cls(graph, mech, start, B0, C0,
                   np.asarray(cols[0], dtype=np.int64), np.asarray(cols[1], dtype=float),
                   np.asarray(cols[2], dtype=float), np.asarray(cols[3], dtype=bool),
                   np.asarray(cols[4], dtype=np.int64), np.asarray(cols[5], dtype=float),
                   np.asarray(cols[6], dtype=float), np.asarray(cols[7], dtype=float), seed, trial)


def read_trace_jsonl(text: str, graph, mech, start, B0, C0) -> PlayTrace:
    recs = []
    for n, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise errors.CorruptTrace(f"line {n + 1}: {exc}") from None
        recs.append(StepRecord.from_dict(d))
    return PlayTrace.from_records(graph, mech, start, B0, C0, recs)


def simulate(G: GameGraph, mech: Mechanism, f, g, budgets: tuple[float, float], start: int,
             steps: int, seed: int = 0, trial: int = 0) -> PlayTrace:
    """Play ``steps`` biddings between Max strategy ``f`` and Min strategy ``g``."""
    if not isinstance(steps, (int, np.integer)) or steps < 0:
        raise errors.BadHorizon(f"steps must be a nonnegative integer, got {steps!r}")
    if not 0 <= start < G.n:
        raise errors.BadVertexId(f"start vertex {start} out of range")
    if f.responder and g.responder:
        raise errors.BothResponders("at most one player may respond to the other's bid")
    if (f.responder and g.mixed) or (g.responder and f.mixed):
        raise errors.ResponderAgainstMixed("a responder can only face a deterministic strategy")
    B, C = map(float, budgets)
    check_budgets(B, C)
    pinned = mech.pinned_min()
    if pinned is not None:
        C = pinned
    B0, C0 = B, C
    f.reset(B, C)
    g.reset(C, B)
    succ = [set(s) for s in G.succ]
    draws = _Draws(seed, trial, steps)
    cols = ([], [], [], [], [], [], [], [])
    vert, xs, ys, wins, moves, Bs, Cs, scales = cols
    rescale = mech.scale_free
    pay = mech.pay
    v = start
    for t in range(steps):
        u0, u1, u2, u3 = draws.row()
        if f.responder:
            ga = g.act(v, C, B)
            y = ga.dist.sample(u2, u3)
            fa = f.respond(v, B, C, y)
            x = fa.dist.sample(u0, u1)
        elif g.responder:
            fa = f.act(v, B, C)
            x = fa.dist.sample(u0, u1)
            ga = g.respond(v, C, B, x)
            y = ga.dist.sample(u2, u3)
        else:
            fa = f.act(v, B, C)
            ga = g.act(v, C, B)
            x = fa.dist.sample(u0, u1)
            y = ga.dist.sample(u2, u3)
        cap_min = C if pinned is None else pinned
        if not (0.0 <= x <= B) or x != x:
            raise errors.IllegalBid(f"step {t}: Max bid {x!r} with budget {B!r}")
        if not (0.0 <= y <= cap_min) or y != y:
            raise errors.IllegalBid(f"step {t}: Min bid {y!r} with budget {cap_min!r}")
        max_won = x > y
        mv = fa.move if max_won else ga.move
        if mv not in succ[v]:
            raise errors.IllegalMove(f"step {t}: {v}->{mv} is not an edge")
        nB, nC = pay(B, C, x, y, max_won)
        k = 1.0
        if rescale:
            k = rescale_pow2(nB, nC)
            if k != 1.0:
                nB *= k
                nC *= k
        if 0.0 < nB < TINY or 0.0 < nC < TINY:
            raise errors.BudgetRangeExceeded(
                f"step {t}: budgets ({nB!r}, {nC!r}) left the normal double range")
        if f.stateful:
            f.observe(v, x, y, max_won, mv, nB, nC)
        if g.stateful:
            g.observe(v, y, x, not max_won, mv, nC, nB)
        vert.append(v)
        xs.append(x)
        ys.append(y)
        wins.append(max_won)
        moves.append(mv)
        Bs.append(nB)
        Cs.append(nC)
        scales.append(k)
        B, C, v = nB, nC, mv
    return PlayTrace(G, mech, start, B0, C0, np.asarray(vert, dtype=np.int64),
                     np.asarray(xs, dtype=float), np.asarray(ys, dtype=float),
                     np.asarray(wins, dtype=bool), np.asarray(moves, dtype=np.int64),
                     np.asarray(Bs, dtype=float), np.asarray(Cs, dtype=float),
                     np.asarray(scales, dtype=float), seed, trial)


@dataclass
class PayoffStats:
    horizon: int
    trials: int
    payoff: np.ndarray
    tail_min: np.ndarray
    max_wins: np.ndarray
    min_wins: np.ndarray

    @property
    def mean_payoff(self) -> float:
        return float(np.mean(self.payoff))

    @property
    def min_tail(self) -> float:
        return float(np.min(self.tail_min))

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "trials": self.trials,
                "payoff_mean": self.mean_payoff, "payoff_min": float(np.min(self.payoff)),
                "payoff_max": float(np.max(self.payoff)), "tail_min": self.min_tail,
                "tail_min_mean": float(np.mean(self.tail_min)),
                "max_wins": self.max_wins.tolist(), "min_wins": self.min_wins.tolist()}


def estimate_payoff(G: GameGraph, mech: Mechanism, f, g, budgets, start: int, steps: int,
                    trials: int, seed: int = 0, keep_traces: bool = False,
                    trial_ids: Sequence[int] | None = None):
    """Run independent trials and summarize payoff statistics.

    When neither strategy randomizes, every trial is the same play, so it is
    simulated once and repeated. Returns ``(stats, traces)``; ``traces`` is
    empty unless ``keep_traces`` is set.
    """
    if steps < 1:
        raise errors.BadHorizon("steps must be at least 1")
    if trials < 1:
        raise errors.BadHorizon("trials must be at least 1")
    ids = list(trial_ids) if trial_ids is not None else list(range(trials))
    deterministic = not (f.mixed or g.mixed)
    rows = []
    traces = []
    cached = None
    for tr in ids:
        if deterministic and cached is not None and not keep_traces:
            rows.append(cached)
            continue
        tr_ = simulate(G, mech, f, g, budgets, start, steps, seed, tr)
        pre = tr_.energy_prefix()
        row = (payoff_estimate(pre), tail_min_average(pre), tr_.max_wins(), tr_.min_wins())
        rows.append(row)
        cached = row
        if keep_traces:
            traces.append(tr_)
    arr = list(zip(*rows))
    stats = PayoffStats(steps, len(ids), np.asarray(arr[0]), np.asarray(arr[1]),
                        np.asarray(arr[2], dtype=np.int64), np.asarray(arr[3], dtype=np.int64))
    return stats, traces


def min_losses_by_horizon(trace: PlayTrace) -> np.ndarray:
    """Number of biddings Min has lost after each prefix."""
    return np.cumsum(trace.max_won.astype(np.int64))


def min_loss_bound(B0: float, C0: float) -> int:
    return math.ceil(B0 / C0) + 1
