"""Best-first branch and bound over LP relaxations."""

from __future__ import annotations

import heapq
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import Basis, LpProblem, solve_lp
from .model import MipModel


@dataclass
class BnbConfig:
    gap_tol: float = 1e-6
    int_tol: float = 1e-6
    node_limit: int = 1_000_000
    time_limit: float = 600.0
    lp_tol: float = 1e-9

    @classmethod
    def from_env(cls, **overrides) -> "BnbConfig":
        cfg = cls(**overrides)
        env = os.environ.get("GASPLAN_TIME_LIMIT")
        if env:
            cfg.time_limit = float(env)
        return cfg


@dataclass
class MipSolution:
    status: str  # optimal | infeasible | node_limit | time_limit
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int
    seconds: float = 0.0
    bound_trace: list = field(default_factory=list, repr=False)
    # node LPs abandoned at the iteration limit (their subtrees were not explored)
    lp_failures: int = 0

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None


def _relative_gap(obj: float, bound: float) -> float:
    if not np.isfinite(obj):
        return float("inf")
    return max(0.0, (obj - bound) / max(1.0, abs(obj)))


def _presolve_bounds(model: MipModel, lb: np.ndarray, ub: np.ndarray):
    """Turn singleton rows into bound tightening; returns kept rows and the new bounds."""
    keep = []
    for r, row in enumerate(model.rows):
        if len(row.index) == 1:
            k, a = int(row.index[0]), float(row.coef[0])
            val = row.rhs / a
            sense = row.sense
            if a < 0 and sense != "E":
                sense = "G" if sense == "L" else "L"
            if sense in ("L", "E"):
                ub[k] = min(ub[k], val)
            if sense in ("G", "E"):
                lb[k] = max(lb[k], val)
        elif len(row.index) == 0:
            ok = {"L": 0.0 <= row.rhs + 1e-9, "G": 0.0 >= row.rhs - 1e-9, "E": abs(row.rhs) <= 1e-9}[row.sense]
            if not ok:
                return None, lb, ub
        else:
            keep.append(r)
    return keep, lb, ub


def model_to_lp(model: MipModel):
    """Dense LP relaxation (after singleton-row presolve) of a model.

    Returns ``None`` when presolve already proves infeasibility.
    """
    lb = np.array(model.lb, dtype=float)
    ub = np.array(model.ub, dtype=float)
    keep, lb, ub = _presolve_bounds(model, lb, ub)
    if keep is None:
        return None
    binaries = model.binaries
    lb[binaries] = np.ceil(lb[binaries] - 1e-9)
    ub[binaries] = np.floor(ub[binaries] + 1e-9)
    if np.any(lb > ub + 1e-9):
        return None
    ub = np.maximum(ub, lb)
    A = np.zeros((len(keep), model.num_vars))
    senses, b = [], np.zeros(len(keep))
    for out, r in enumerate(keep):
        row = model.rows[r]
        A[out, row.index] = row.coef
        senses.append(row.sense)
        b[out] = row.rhs
    return LpProblem(model.objective_vector(), A, senses, b, lb, ub)


@dataclass(order=True)
class _Node:
    bound: float
    order: int  # negated creation index: among equal bounds the newest node wins
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    basis: Basis | None = field(compare=False, default=None)
    depth: int = field(compare=False, default=0)


def solve_mip(model: MipModel, cfg: BnbConfig | None = None) -> MipSolution:
    """Minimise ``model`` by best-first branch and bound.

    Nodes are explored by parent bound, ties going to the most recently
    created node (so equal-bound stretches dive instead of sweeping), and branch on
    the most fractional binary (ties: lowest index). Integral LP points are
    polished by re-solving with the binaries fixed to their rounded values.
    The run stops as optimal once the relative gap is at most ``gap_tol``.
    """
    cfg = cfg or BnbConfig.from_env()
    start = time.perf_counter()
    const = model.objective_constant
    lp = model_to_lp(model)
    if lp is None:
        return MipSolution("infeasible", None, float("inf"), float("inf"), float("inf"), 0, time.perf_counter() - start)
    binaries = model.binaries

    incumbent, inc_obj = None, float("inf")
    counter = 0
    heap: list[_Node] = [_Node(-float("inf"), counter, lp.lb.copy(), lp.ub.copy())]
    nodes = 0
    trace: list[float] = []  # global lower bound each time a node is opened
    status = None
    closing_bound = float("inf")

    lp_failures = 0

    def solve_node(lb, ub, basis):
        nonlocal lp_failures
        sub = LpProblem(lp.c, lp.A, lp.senses, lp.b, lb, ub)
        res = solve_lp(sub, basis, tol=cfg.lp_tol)
        if res.status == "iteration_limit" and basis is not None:
            res = solve_lp(sub, None, tol=cfg.lp_tol)
        if res.status == "iteration_limit":
            lp_failures += 1
        return res

    while heap:
        if nodes >= cfg.node_limit:
            status = "node_limit"
            break
        if time.perf_counter() - start > cfg.time_limit:
            status = "time_limit"
            break
        node = heapq.heappop(heap)
        if node.bound + const >= inc_obj - cfg.gap_tol * max(1.0, abs(inc_obj)):
            # best-first: every open node is at least this bad
            closing_bound = node.bound + const
            heap.clear()
            break
        nodes += 1
        trace.append(node.bound + const)
        res = solve_node(node.lb, node.ub, node.basis)
        if res.status != "optimal":
            continue
        obj = res.objective
        if obj + const >= inc_obj - cfg.gap_tol * max(1.0, abs(inc_obj)):
            continue
        x = res.x
        if len(binaries):
            vals = x[binaries]
            frac = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
        else:
            frac = np.zeros(0)
        if len(frac) == 0 or frac.max() <= cfg.int_tol:
            lb_fix, ub_fix = node.lb.copy(), node.ub.copy()
            if len(binaries):
                rounded = np.round(x[binaries])
                lb_fix[binaries] = rounded
                ub_fix[binaries] = rounded
                polished = solve_node(lb_fix, ub_fix, res.basis)
                if polished.status == "optimal":
                    x, obj = polished.x, polished.objective
            if obj + const < inc_obj:
                incumbent, inc_obj = x.copy(), obj + const
            continue
        k = int(binaries[int(np.argmax(frac))])  # argmax returns the lowest index on ties
        for lo_val, hi_val in ((0.0, 0.0), (1.0, 1.0)):
            lb_c, ub_c = node.lb.copy(), node.ub.copy()
            lb_c[k], ub_c[k] = lo_val, hi_val
            counter += 1
            heapq.heappush(heap, _Node(obj, -counter, lb_c, ub_c, res.basis, node.depth + 1))

    elapsed = time.perf_counter() - start
    if status is None:
        if incumbent is None:
            return MipSolution("infeasible", None, float("inf"), float("inf"), float("inf"), nodes, elapsed, trace, lp_failures)
        bound = min(inc_obj, closing_bound)
        return MipSolution("optimal", incumbent, inc_obj, bound, _relative_gap(inc_obj, bound), nodes, elapsed, trace, lp_failures)
    open_bound = min((n.bound for n in heap), default=inc_obj - const) + const
    bound = min(open_bound, inc_obj)
    return MipSolution(status, incumbent, inc_obj, bound, _relative_gap(inc_obj, bound), nodes, elapsed, trace, lp_failures)
