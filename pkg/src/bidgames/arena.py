"""Game graphs, bidding mechanisms and energy bookkeeping.

A game graph is a finite, strongly connected directed graph whose vertices
carry a real weight and optionally a parity index. Vertex ids are dense
integers ``0..n-1``. Successor lists are kept sorted so that "lowest id"
tie-breaking is a plain ``min`` everywhere else in the package.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import errors

MAX = 0
MIN = 1


def tarjan_scc(succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """Strongly connected components, iterative Tarjan.

    Components come out in reverse topological order, i.e. a component is
    emitted only after every component reachable from it.
    """
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            nbrs = succ[v]
            while i < len(nbrs):
                u = nbrs[i]
                i += 1
                if index[u] == -1:
                    work.append((v, i))
                    work.append((u, 0))
                    recurse = True
                    break
                if on_stack[u]:
                    low[v] = min(low[v], index[u])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    u = stack.pop()
                    on_stack[u] = False
                    comp.append(u)
                    if u == v:
                        break
                out.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return out


def bottom_components(succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """Closed SCCs: components with no edge leaving them."""
    comps = tarjan_scc(succ)
    where = {}
    for k, comp in enumerate(comps):
        for v in comp:
            where[v] = k
    bottoms = []
    for k, comp in enumerate(comps):
        if all(where[u] == k for v in comp for u in succ[v]):
            bottoms.append(comp)
    return bottoms


@dataclass(frozen=True, eq=False)
class GameGraph:
    """Validated, immutable game graph."""

    succ: tuple[tuple[int, ...], ...]
    weights: np.ndarray
    parities: tuple[int, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.succ)

    def edges(self) -> list[tuple[int, int]]:
        return [(v, u) for v in range(self.n) for u in self.succ[v]]

    def negated(self) -> "GameGraph":
        return GameGraph(self.succ, _frozen(-self.weights), self.parities)

    def with_weights(self, weights: Iterable[float]) -> "GameGraph":
        return build_graph(self.succ, weights, self.parities)

    def with_parities(self, parities: Iterable[int] | None) -> "GameGraph":
        return build_graph(self.succ, self.weights, parities)

    def key(self) -> tuple:
        return (self.succ, tuple(self.weights.tolist()), self.parities)

    def __eq__(self, other):
        return isinstance(other, GameGraph) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_dict(self) -> dict:
        verts = []
        for v in range(self.n):
            d = {"id": v, "weight": float(self.weights[v])}
            if self.parities is not None:
                d["parity"] = self.parities[v]
            verts.append(d)
        return {"vertices": verts, "edges": [list(e) for e in self.edges()]}

    def __repr__(self):
        return f"GameGraph(n={self.n}, succ={self.succ}, weights={self.weights.tolist()})"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def build_graph(succ: Sequence[Iterable[int]], weights: Iterable[float],
                parities: Iterable[int] | None = None) -> GameGraph:
    """Validate and freeze a graph given as successor lists."""
    succ_l = [sorted(set(int(u) for u in s)) for s in succ]
    n = len(succ_l)
    if n == 0:
        raise errors.EmptyGraph("graph has no vertices")
    w = [float(x) for x in weights]
    if len(w) != n:
        raise errors.BadWeight(f"expected {n} weights, got {len(w)}")
    for v, x in enumerate(w):
        if not math.isfinite(x):
            raise errors.NonFiniteWeight(f"vertex {v} has non-finite weight {x!r}")
    for v, s in enumerate(succ_l):
        for u in s:
            if not 0 <= u < n:
                raise errors.BadVertexId(f"edge {v}->{u} leaves the vertex range")
        if not s:
            raise errors.NoSuccessor(f"vertex {v} has no successor")
    par = None
    if parities is not None:
        par = tuple(parities)
        if len(par) != n:
            raise errors.BadParity(f"expected {n} parities, got {len(par)}")
        for v, k in enumerate(par):
            if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 0:
                raise errors.BadParity(f"vertex {v} has parity {k!r}")
        par = tuple(int(k) for k in par)
    comps = tarjan_scc(succ_l)
    if len(comps) != 1:
        raise errors.NotStronglyConnected(f"graph has {len(comps)} strongly connected components")
    return GameGraph(tuple(tuple(s) for s in succ_l), _frozen(w), par)


def graph_from_dict(data: dict) -> GameGraph:
    """Build a graph from the JSON layout ``{"vertices": [...], "edges": [[u, v], ...]}``."""
    try:
        verts = data["vertices"]
        edges = data["edges"]
    except (KeyError, TypeError) as exc:
        raise errors.ValidationError(f"graph document is missing {exc}") from None
    if not verts:
        raise errors.EmptyGraph("graph has no vertices")
    n = len(verts)
    ids = [v.get("id") for v in verts]
    if sorted(ids) != list(range(n)):
        raise errors.BadVertexId(f"vertex ids must be dense 0..{n - 1}, got {ids}")
    by_id = {v["id"]: v for v in verts}
    weights = []
    for v in range(n):
        x = by_id[v].get("weight")
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise errors.BadWeight(f"vertex {v} has weight {x!r}")
        weights.append(x)
    has_par = [("parity" in by_id[v]) for v in range(n)]
    if any(has_par) and not all(has_par):
        raise errors.BadParity("parity must be given for all vertices or none")
    parities = [by_id[v]["parity"] for v in range(n)] if all(has_par) else None
    succ: list[list[int]] = [[] for _ in range(n)]
    for e in edges:
        if len(e) != 2:
            raise errors.ValidationError(f"bad edge {e!r}")
        a, b = e
        for x in (a, b):
            if isinstance(x, bool) or not isinstance(x, int) or not 0 <= x < n:
                raise errors.BadVertexId(f"edge {e!r} references an unknown vertex")
        succ[a].append(b)
    return build_graph(succ, weights, parities)


def load_graph(path: str) -> GameGraph:
    with open(path) as fh:
        return graph_from_dict(json.load(fh))


def bowtie(w_max: float = 1.0, w_min: float = 0.0) -> GameGraph:
    """Two vertices, all four edges. Vertex 0 is Max's target, vertex 1 Min's."""
    return build_graph([[0, 1], [0, 1]], [w_max, w_min])


def random_scc(n: int, rng: np.random.Generator, weights=(-1.0, 0.0, 1.0),
               density: float = 0.4) -> GameGraph:
    """Random strongly connected graph: a Hamiltonian cycle plus random extra edges."""
    perm = rng.permutation(n)
    succ = [set() for _ in range(n)]
    for i in range(n):
        succ[perm[i]].add(int(perm[(i + 1) % n]))
    for v in range(n):
        for u in range(n):
            if rng.random() < density:
                succ[v].add(u)
    w = rng.choice(np.asarray(weights, dtype=float), size=n)
    return build_graph(succ, w)


# --- mechanisms ---------------------------------------------------------

class Mechanism:
    """Payment rule. Ties go to Min, so Max wins iff ``x > y``."""

    name = "mechanism"
    all_pay = False
    # scaling both budgets leaves play unchanged; long runs may rescale
    scale_free = True

    def pay(self, B: float, C: float, x: float, y: float, max_wins: bool) -> tuple[float, float]:
        raise NotImplementedError

    def pinned_min(self) -> float | None:
        return None

    def spec(self) -> str:
        return self.name

    def __repr__(self):
        return self.spec()

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.__dict__.items()))))


class FirstPriceRichman(Mechanism):
    name = "fp-richman"

    def pay(self, B, C, x, y, max_wins):
        if max_wins:
            return B - x, C + x
        return B + y, C - y


class FirstPricePoorman(Mechanism):
    name = "fp-poorman"

    def pay(self, B, C, x, y, max_wins):
        if max_wins:
            return B - x, C
        return B, C - y


class AllPayRichman(Mechanism):
    name = "ap-richman"
    all_pay = True

    def pay(self, B, C, x, y, max_wins):
        d = x - y
        return B - d, C + d


class AllPayPoorman(Mechanism):
    name = "ap-poorman"
    all_pay = True

    def pay(self, B, C, x, y, max_wins):
        return B - x, C - y


class Taxman(Mechanism):
    """Share ``tau`` of a payment goes to the bank, the rest to the opponent.

    ``tau = 0`` is Richman and ``tau = 1`` is poorman. With ``all_pay`` both
    players pay their bid, otherwise only the winner pays.
    """

    def __init__(self, tau: float, all_pay: bool = False):
        if not (0.0 <= tau <= 1.0):
            raise errors.BadMechanism(f"taxman rate {tau!r} outside [0, 1]")
        self.tau = float(tau)
        self.all_pay = bool(all_pay)

    @property
    def name(self):
        return "ap-taxman" if self.all_pay else "taxman"

    def spec(self):
        return f"{self.name}:tau={self.tau!r}"

    def pay(self, B, C, x, y, max_wins):
        keep = 1.0 - self.tau
        if self.all_pay:
            return B - x + keep * y, C - y + keep * x
        if max_wins:
            return B - x, C + keep * x
        return B + keep * y, C - y


class Asymmetric(Mechanism):
    """All-pay with Min's budget pinned at 1; Min's bid is worth ``W`` to Max."""

    all_pay = True
    scale_free = False
    name = "asym"

    def __init__(self, W: float):
        if not (W > 0 and math.isfinite(W)):
            raise errors.BadMechanism(f"asymmetry factor {W!r} must be positive")
        self.W = float(W)

    def spec(self):
        return f"asym:W={self.W!r}"

    def pinned_min(self):
        return 1.0

    def pay(self, B, C, x, y, max_wins):
        return B - x + self.W * y, 1.0


RICHMAN_LIKE = (FirstPriceRichman, AllPayRichman)


def is_richman(mech: Mechanism) -> bool:
    return isinstance(mech, RICHMAN_LIKE) or (isinstance(mech, Taxman) and mech.tau == 0.0)


def parse_mechanism(text: str) -> Mechanism:
    """Parse ``ap-richman``, ``fp-poorman``, ``taxman:tau=0.3``, ``asym:W=2`` and friends."""
    head, _, rest = text.strip().partition(":")
    kw = _parse_kv(rest)
    simple = {"fp-richman": FirstPriceRichman, "fp-poorman": FirstPricePoorman,
              "ap-richman": AllPayRichman, "ap-poorman": AllPayPoorman}
    try:
        if head in simple:
            if kw:
                raise errors.BadMechanism(f"{head} takes no parameters")
            return simple[head]()
        if head in ("taxman", "ap-taxman"):
            return Taxman(kw.pop("tau"), all_pay=head == "ap-taxman")
        if head == "asym":
            return Asymmetric(kw.pop("W"))
    except KeyError as exc:
        raise errors.BadMechanism(f"{head} needs parameter {exc}") from None
    raise errors.BadMechanism(f"unknown mechanism {text!r}")


def _parse_kv(text: str) -> dict:
    out = {}
    if not text:
        return out
    for part in text.split(","):
        k, eq, v = part.partition("=")
        if not eq:
            raise errors.BadMechanism(f"expected key=value, got {part!r}")
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise errors.BadMechanism(f"bad number in {part!r}") from None
    return out


# --- budgets ------------------------------------------------------------

def check_budgets(B: float, C: float) -> None:
    for who, b in (("Max", B), ("Min", C)):
        if not math.isfinite(b):
            raise errors.NegativeBudget(f"{who} budget {b!r} is not finite")
        if b < 0:
            raise errors.NegativeBudget(f"{who} budget {b!r} is negative")


def resolve_bidding(mech: Mechanism, budgets: tuple[float, float], x: float, y: float
                    ) -> tuple[int, tuple[float, float]]:
    """Decide one bidding. Returns ``(winner, (B', C'))`` with winner ``MAX`` or ``MIN``."""
    B, C = budgets
    check_budgets(B, C)
    pinned = mech.pinned_min()
    cap_min = pinned if pinned is not None else C
    for who, bid, cap in (("Max", x, B), ("Min", y, cap_min)):
        if not (math.isfinite(bid) and bid >= 0):
            raise errors.InvalidBid(f"{who} bid {bid!r} is not a nonnegative number")
        if bid > cap:
            raise errors.InvalidBid(f"{who} bid {bid!r} exceeds budget {cap!r}")
    max_wins = x > y
    return (MAX if max_wins else MIN), mech.pay(B, C, x, y, max_wins)


def normalize_budgets(mech: Mechanism, B: float, C: float) -> tuple[float, float]:
    """Richman budgets are scaled to sum 1, all others so that Min holds 1."""
    check_budgets(B, C)
    if is_richman(mech):
        total = B + C
        if total == 0:
            raise errors.DegenerateBudget("both budgets are zero")
        return B / total, C / total
    if C == 0:
        raise errors.DegenerateBudget("cannot normalize to Min = 1 when Min holds nothing")
    return B / C, 1.0


def budget_ratio(B: float, C: float) -> float:
    if B + C == 0:
        raise errors.DegenerateBudget("both budgets are zero")
    return B / (B + C)


def rescale_pow2(B: float, C: float, low: float = 2.0 ** -400) -> float:
    """Power-of-two factor that brings the larger budget back near 1.

    Multiplying by a power of two is exact, so ratios survive bit-for-bit.
    Returns 1.0 when no rescale is needed.
    """
    top = max(B, C)
    if top == 0 or top >= low:
        return 1.0
    _, e = math.frexp(top)
    return math.ldexp(1.0, -e)


# --- energy -------------------------------------------------------------

def energy_prefix(weights: np.ndarray, vertices: Sequence[int]) -> np.ndarray:
    """Energies of all prefixes: entry ``n`` is the sum of the first ``n`` weights."""
    w = np.asarray(weights, dtype=float)[np.asarray(vertices, dtype=np.int64)]
    out = np.empty(len(w) + 1)
    out[0] = 0.0
    np.cumsum(w, out=out[1:])
    return out


def payoff_estimate(prefix: np.ndarray) -> float:
    N = len(prefix) - 1
    if N < 1:
        raise errors.BadHorizon("payoff needs at least one step")
    return float(prefix[N] / N)


def tail_min_average(prefix: np.ndarray) -> float:
    """Smallest prefix average among the last ``ceil(N/2)`` prefixes."""
    N = len(prefix) - 1
    if N < 1:
        raise errors.BadHorizon("payoff needs at least one step")
    k = math.ceil(N / 2)
    ns = np.arange(N - k + 1, N + 1)
    return float(np.min(prefix[ns] / ns))
