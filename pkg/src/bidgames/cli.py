"""Command line front end: ``bidgames solve|simulate|certify|parity|sweep``.

Every command reads an optional JSON config file, overrides it with flags and
writes a JSON report to ``--out`` (or stdout). Reports hold no timestamps, so
the same inputs give byte-identical output.

Exit codes: 0 success, 1 usage, 2 validation, 3 numeric failure,
4 certification failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import errors
from .arena import (AllPayPoorman, AllPayRichman, Asymmetric, FirstPricePoorman,
                    FirstPriceRichman, Taxman, bowtie, check_budgets, load_graph,
                    parse_mechanism)
from .solver import first_price_taxman_target, solve_mean_payoff, taxman_targets, value_curve

EXIT_CERT = 4
CHECKS = ("replay", "invariant", "bound", "lift", "magic", "luck", "submartingale")
DEFAULT_CHECKS = ("replay", "invariant", "bound", "lift")
MAGIC_PAIRS = ((1.0, 1.0), (1.0, 2.0), (3.0, 2.0))
EPS_HEADS = ("fp-richman", "fp-poorman", "ap-richman-mixed", "asym-pure", "asym-responder",
             "asym-mixed")


class UsageError(errors.BidGameError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class ExperimentConfig:
    graph: str | None = None
    mechanism: str = "ap-richman"
    max: str | None = None
    min: str | None = None
    budget_max: float = 0.5
    budget_min: float = 0.5
    eps: float | None = None
    steps: int = 1000
    trials: int = 1
    seed: int = 0
    out: str | None = None
    checks: list = field(default_factory=lambda: list(DEFAULT_CHECKS))
    p: float | None = None
    mode: str = "mixed"
    start: int = 0
    trace: str | None = None
    trace_out: str | None = None
    trial: int | None = None
    ratio: float | None = None
    corpus: int | None = None
    max_len: int = 8
    points: int = 11
    p_grid: list | None = None
    luck_points: int = 100_000
    samples: int = 2000

    def validate(self) -> None:
        for name in ("steps", "trials", "max_len", "points", "luck_points", "samples"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise errors.ValidationError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise errors.ValidationError(f"seed must be a nonnegative integer, got {self.seed!r}")
        for name in ("budget_max", "budget_min"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise errors.ValidationError(f"{name} must be a number, got {v!r}")
        check_budgets(float(self.budget_max), float(self.budget_min))
        if self.eps is not None and not (isinstance(self.eps, (int, float)) and self.eps > 0):
            raise errors.EpsilonOutOfRange(f"eps must be positive, got {self.eps!r}")
        if self.p is not None and not (isinstance(self.p, (int, float)) and 0.0 <= self.p <= 1.0):
            raise errors.POutOfRange(f"p={self.p!r} outside [0, 1]")
        if self.mode not in ("pure", "mixed"):
            raise errors.ValidationError(f"mode must be pure or mixed, got {self.mode!r}")
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise errors.ValidationError(f"unknown checks {bad}; choose from {list(CHECKS)}")
        if self.corpus is not None and not (1 <= self.corpus <= 4):
            raise errors.ValidationError(f"corpus size must be 1..4, got {self.corpus!r}")


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise errors.ValidationError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise errors.ValidationError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    extra = sorted(set(data) - known)
    if extra:
        raise errors.ValidationError(f"unknown config keys {extra}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**data)
    cfg.validate()
    return cfg


# --- helpers ------------------------------------------------------------

def _graph(cfg: ExperimentConfig):
    if cfg.graph is None:
        raise UsageError("--graph is required")
    if cfg.graph == "bowtie":
        return bowtie()
    try:
        return load_graph(cfg.graph)
    except OSError as exc:
        raise UsageError(f"cannot read graph {cfg.graph}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise errors.ValidationError(f"graph {cfg.graph} is not valid JSON: {exc}") from None


def _with_eps(spec: str, eps: float | None) -> str:
    """Fill in ``eps`` from ``--eps`` when a construction needs it and lacks it."""
    if eps is None or "eps=" in spec:
        return spec
    parts = spec.split(":")
    for i, part in enumerate(parts):
        if part.split(",")[0] in EPS_HEADS:
            tail = ":".join(parts[i + 1:])
            kw = f"{tail},eps={eps!r}" if tail else f"eps={eps!r}"
            return ":".join(parts[:i + 1] + [kw])
    return spec


def _strategies(cfg: ExperimentConfig, G):
    from .strategies import build_strategy

    if not cfg.max or not cfg.min:
        raise UsageError("--max and --min strategies are required")
    B, C = float(cfg.budget_max), float(cfg.budget_min)
    f = build_strategy(_with_eps(cfg.max, cfg.eps), G, "max", B, C)
    g = build_strategy(_with_eps(cfg.min, cfg.eps), G, "min", C, B)
    return f, g


def derive_p(mech, B: float, C: float, mode: str) -> tuple[float, str]:
    """Random-turn bias that characterizes a mechanism at budgets ``B, C``."""
    r = B / (B + C)
    if isinstance(mech, FirstPriceRichman):
        return 0.5, "first-price Richman: budgets do not matter, p = 1/2"
    if isinstance(mech, FirstPricePoorman):
        return r, "first-price poorman: p = B/(B+C)"
    if isinstance(mech, AllPayRichman):
        if mode == "mixed":
            return 0.5, "all-pay Richman, mixed: p = 1/2"
        return 0.0, "all-pay Richman, pure: p = 0"
    if isinstance(mech, AllPayPoorman):
        if B <= 0 or C <= 0:
            raise errors.NonPositiveBudget("all-pay poorman needs positive budgets")
        if mode == "mixed":
            if B > C:
                return 1.0 - C / (2.0 * B), "all-pay poorman, mixed, B > C: p = 1 - C/(2B)"
            return B / (2.0 * C), "all-pay poorman, mixed, B <= C: p = B/(2C)"
        if B > C:
            return 1.0 - C / B, "all-pay poorman, pure, B > C: p = 1 - C/B (lower bound)"
        return 0.0, "all-pay poorman, pure, B <= C: p = 0"
    if isinstance(mech, Taxman):
        if mech.all_pay:
            t = taxman_targets(mech.tau, B, C)
            if mode == "mixed":
                return t.p_mixed, "all-pay taxman, mixed"
            return (t.p_pure if t.p_pure is not None else 0.0), "all-pay taxman, pure"
        return first_price_taxman_target(mech.tau, r), "first-price taxman"
    if isinstance(mech, Asymmetric):
        raise errors.ValidationError("the asymmetric game has no derived bias; pass --p")
    raise errors.BadMechanism(f"no bias rule for {mech!r}")


def _plain(obj):
    """Turn numpy values and non-finite floats into JSON-safe objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if x != x else ("inf" if x > 0 else "-inf")
    return obj


def dumps(obj) -> str:
    # repr of a float round-trips exactly, which covers 17 significant digits
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _emit(cfg: ExperimentConfig, report: dict) -> None:
    text = dumps(report)
    if cfg.out:
        try:
            with open(cfg.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {cfg.out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


# --- commands -----------------------------------------------------------

def run_solve(cfg: ExperimentConfig) -> dict:
    G = _graph(cfg)
    if cfg.p is not None:
        p, how = float(cfg.p), "given"
    else:
        mech = parse_mechanism(cfg.mechanism)
        p, how = derive_p(mech, float(cfg.budget_max), float(cfg.budget_min), cfg.mode)
    sol = solve_mean_payoff(G, p)
    return {"command": "solve", "p": p, "derivation": how, "value": sol.value,
            "pot": sol.pot, "strength": sol.strength, "sigma_max": sol.sigma_max,
            "sigma_min": sol.sigma_min, "s_max": sol.s_max, "s_min_pos": sol.s_min_pos,
            "residual": sol.residual(), "iterations": sol.iterations}


def _trace_lines(traces) -> str:
    out = []
    for tr in traces:
        for i in range(len(tr)):
            d = tr.step(i).to_dict()
            d["trial"] = tr.trial
            d["step"] = i
            out.append(json.dumps(_plain(d), sort_keys=True))
    return "".join(line + "\n" for line in out)


def run_simulate(cfg: ExperimentConfig) -> dict:
    from .engine import estimate_payoff, min_loss_bound

    G = _graph(cfg)
    mech = parse_mechanism(cfg.mechanism)
    f, g = _strategies(cfg, G)
    budgets = (float(cfg.budget_max), float(cfg.budget_min))
    stats, traces = estimate_payoff(G, mech, f, g, budgets, cfg.start, cfg.steps, cfg.trials,
                                    cfg.seed, keep_traces=cfg.trace_out is not None)
    report = {"command": "simulate", "mechanism": mech.spec(), "max": f.name, "min": g.name,
              "budgets": list(budgets), "seed": cfg.seed, "stats": stats.to_dict()}
    if isinstance(mech, AllPayRichman) and g.responder and budgets[1] > 0:
        report["min_loss_bound"] = min_loss_bound(*budgets)
        report["min_losses_max"] = int(stats.max_wins.max())
    if cfg.trace_out:
        try:
            with open(cfg.trace_out, "w") as fh:
                fh.write(_trace_lines(traces))
        except OSError as exc:
            raise UsageError(f"cannot write {cfg.trace_out}: {exc.strerror}") from None
    return report


def _read_traces(cfg: ExperimentConfig, G, mech):
    from .engine import PlayTrace, StepRecord

    try:
        with open(cfg.trace) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read trace {cfg.trace}: {exc.strerror}") from None
    by_trial: dict[int, list] = {}
    for n, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise errors.CorruptTrace(f"trace line {n + 1}: {exc}") from None
        if not isinstance(d, dict):
            raise errors.CorruptTrace(f"trace line {n + 1} is not an object")
        by_trial.setdefault(int(d.get("trial", 0)), []).append(StepRecord.from_dict(d))
    keep = sorted(by_trial) if cfg.trial is None else [cfg.trial]
    out = []
    for t in keep:
        if t not in by_trial:
            raise errors.CorruptTrace(f"trace has no trial {t}")
        out.append(PlayTrace.from_records(G, mech, cfg.start, float(cfg.budget_max),
                                          float(cfg.budget_min), by_trial[t], cfg.seed, t))
    return out


def _luck_grid(params):
    s_pos = sorted({float(s) for s in params.strength if s > 0})
    if params.variant == "APRichman":
        return s_pos, [0.05, 0.2, 0.5, 0.8, 0.95]
    return s_pos, [0.05, 0.5, 2.0, 20.0]


def _y_max(params, s, B):
    from .certify import bid_cap, min_bid_limit

    return min(float(bid_cap(params, s, B)[0]), float(min_bid_limit(params, B)))


def _check_luck(params, points: int) -> list[dict]:
    from .certify import expected_luck_closed_form, expected_luck_quadrature

    worst_diff, worst_val = 0.0, math.inf
    s_list, B_list = _luck_grid(params)
    for s in s_list:
        for B in B_list:
            for y in np.linspace(0.0, _y_max(params, s, B), 7):
                a = expected_luck_closed_form(params, s, B, float(y))
                b = expected_luck_quadrature(params, s, B, float(y), points)
                worst_diff = max(worst_diff, abs(a - b))
                worst_val = min(worst_val, a)
    return [{"name": "luck:closed-vs-quadrature", "passed": worst_diff <= 1e-8,
             "worst_margin": 1e-8 - worst_diff},
            {"name": "luck:nonnegative", "passed": worst_val >= -1e-12,
             "worst_margin": worst_val}]


def _magic_reports(cfg: ExperimentConfig, G) -> list[dict]:
    from .certify import magic_exhaustive
    from .corpus import scc_corpus

    graphs = scc_corpus(cfg.corpus) if cfg.corpus else [G]
    out = []
    for nu, mu in MAGIC_PAIRS:
        worst, count = math.inf, 0
        for H in graphs:
            sol = solve_mean_payoff(H, nu / (nu + mu))
            w, c = magic_exhaustive(sol, nu, mu, cfg.max_len)
            worst = min(worst, w)
            count += c
        out.append({"name": f"magic:nu={nu!r},mu={mu!r}", "passed": worst >= -1e-9,
                    "worst_margin": worst, "paths": count, "graphs": len(graphs)})
    return out


def run_certify(cfg: ExperimentConfig) -> dict:
    from . import certify
    from .engine import estimate_payoff
    from .strategies import PoormanLift

    G = _graph(cfg)
    need_play = [c for c in cfg.checks if c != "magic"]
    reports: list[dict] = []
    f = None
    if need_play:
        mech = parse_mechanism(cfg.mechanism)
        f, g = _strategies(cfg, G)
        if cfg.trace:
            traces = _read_traces(cfg, G, mech)
        else:
            budgets = (float(cfg.budget_max), float(cfg.budget_min))
            ids = None if cfg.trial is None else [cfg.trial]
            _, traces = estimate_payoff(G, mech, f, g, budgets, cfg.start, cfg.steps,
                                        cfg.trials, cfg.seed, keep_traces=True, trial_ids=ids)
    lifted = isinstance(f, PoormanLift)
    params = f.ledger if f is not None else None

    def skip(name, why):
        reports.append({"name": name, "skipped": why})

    for check in cfg.checks:
        if check == "magic":
            reports.extend(_magic_reports(cfg, G))
            continue
        if check == "luck":
            if params is None or params.variant not in ("APRichman", "AsymMixedHighW",
                                                        "AsymMixedLowW"):
                skip("luck", "Max strategy has no luck term")
            else:
                reports.extend(_check_luck(params, cfg.luck_points))
            continue
        if check == "submartingale":
            if params is None or params.variant not in ("APRichman", "AsymMixedHighW",
                                                        "AsymMixedLowW"):
                skip("submartingale", "Max strategy has no luck term")
                continue
            inner = f.inner if lifted else f
            s_list, B_list = _luck_grid(params)
            states = []
            for v, s in enumerate(params.strength):
                if s > 0:
                    for B in B_list:
                        top = _y_max(params, s, B)
                        states += [(v, B, y) for y in (0.0, 0.5 * top, top)]
            rep = certify.empirical_submartingale(params, inner, states, cfg.samples,
                                                  np.random.default_rng(cfg.seed))
            reports.append({"name": "submartingale", "passed": rep.passed,
                            "worst_margin": rep.worst_z + 3.0, "max_abs_step": rep.max_abs,
                            "bound": rep.bound})
            continue
        for tr in traces:
            tag = f"trial {tr.trial}"
            if check == "replay":
                r = certify.replay_check(tr)
            elif check == "lift":
                if not lifted:
                    skip("lift", "Max strategy is not a poorman lift")
                    break
                if cfg.trace:
                    skip("lift", "the lift check needs a live run, not a stored trace")
                    break
                # the shadow belongs to the most recent run only
                if tr is not traces[-1]:
                    continue
                r = certify.check_lift(tr, f.shadow, f.W)
            else:
                if params is None:
                    skip(check, "Max strategy has no ledger")
                    break
                if lifted:
                    if cfg.trace or tr is not traces[-1]:
                        continue
                    target = certify.shadow_trace(f.shadow, tr, f.W, f.tB0)
                else:
                    target = tr
                if check == "invariant":
                    r = certify.check_invariant(target, params)
                elif params.variant in ("AsymPure", "FPPoorman", "AsymMixedHighW", "AsymMixedLowW"):
                    r = certify.check_h_bound(target, params)
                else:
                    skip("bound", f"no bound check for {params.variant}")
                    break
            d = r.to_dict()
            d["trace"] = tag
            reports.append(d)
    passed = all(r.get("passed", True) for r in reports)
    return {"command": "certify", "passed": passed, "checks": reports}


def run_parity(cfg: ExperimentConfig) -> dict:
    from .parity import ParityGame, decide_parity, parity_to_mean_payoff

    G = _graph(cfg)
    P = ParityGame(G)
    r = cfg.ratio
    if r is None:
        r = float(cfg.budget_max) / (float(cfg.budget_max) + float(cfg.budget_min))
    verdicts = decide_parity(P, cfg.mechanism, r)
    return {"command": "parity", "d": P.d,
            "reduced_weights": parity_to_mean_payoff(P).weights,
            "verdicts": {str(k): v.to_dict() for k, v in sorted(verdicts.items())}}


def run_sweep(cfg: ExperimentConfig) -> dict:
    G = _graph(cfg)
    grid = cfg.p_grid if cfg.p_grid is not None else list(np.linspace(0.0, 1.0, cfg.points))
    for p in grid:
        if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
            raise errors.POutOfRange(f"p={p!r} outside [0, 1]")
    return {"command": "sweep",
            "curve": [{"p": p, "value": v} for p, v in value_curve(G, [float(p) for p in grid])]}


COMMANDS = {"solve": run_solve, "simulate": run_simulate, "certify": run_certify,
            "parity": run_parity, "sweep": run_sweep}


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bidgames", description="Mean-payoff bidding games: solve, play, certify.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file; flags override it")
    ap.add_argument("--graph", help="graph JSON file, or 'bowtie'")
    ap.add_argument("--mechanism", help="e.g. ap-richman, ap-poorman, taxman:tau=0.3, asym:W=2")
    ap.add_argument("--max", help="Max strategy spec")
    ap.add_argument("--min", help="Min strategy spec")
    ap.add_argument("--budget-max", type=float, dest="budget_max")
    ap.add_argument("--budget-min", type=float, dest="budget_min")
    ap.add_argument("--eps", type=float)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--checks", type=lambda s: [c.strip() for c in s.split(",") if c.strip()],
                    help=f"comma separated, from {','.join(CHECKS)}")
    ap.add_argument("--p", type=float, help="random-turn bias; overrides the derived one")
    ap.add_argument("--mode", choices=("pure", "mixed"))
    ap.add_argument("--start", type=int)
    ap.add_argument("--trace", help="certify a stored JSONL trace instead of simulating")
    ap.add_argument("--trace-out", dest="trace_out", help="write the plays as JSONL")
    ap.add_argument("--trial", type=int)
    ap.add_argument("--ratio", type=float, help="Player 1 budget ratio for parity")
    ap.add_argument("--corpus", type=int, help="magic check over all SCCs up to this size")
    ap.add_argument("--max-len", type=int, dest="max_len")
    ap.add_argument("--points", type=int)
    ap.add_argument("--p-grid", dest="p_grid",
                    type=lambda s: [float(x) for x in s.split(",") if x.strip()])
    return ap


def main(argv=None) -> int:
    try:
        ns = _parser().parse_args(argv)
        overrides = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
        cfg = load_config(ns.config, overrides)
        report = COMMANDS[ns.command](cfg)
        _emit(cfg, report)
    except errors.BidGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if report.get("passed") is False:
        return EXIT_CERT
    return 0


if __name__ == "__main__":
    sys.exit(main())
