"""Train, build, solve, restore and report: the end-to-end planning runs."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .formulation import (
    BuildOptions,
    FormulationError,
    PipeSurrogate,
    build_icnn_expansion,
    build_icnn_operational,
    build_miqp_relaxation,
    extract_solution,
)
from .icnn import ReluNet, TrainConfig, build_envelope, load_net, save_net, train_pair
from .network import PlanningProblem
from .physics import FlowState, RestorationError, restore_and_score
from .solver import BnbConfig, MipModel, solve_mip

SCALAR_TARGETS = ("convex-part", "concave-part")
DYN_TARGETS = ("dyn-convex", "dyn-concave")


def targets_for(mode: str) -> tuple[str, ...]:
    return SCALAR_TARGETS + (DYN_TARGETS if mode == "expansion" else ())


def domain_classes(problem: PlanningProblem, dyn: bool = False) -> dict[tuple, list[str]]:
    """Group pipes by their input box: flow bounds, plus diameter bounds if ``dyn``.

    One surrogate pair is trained per class and shared by its pipes.
    """
    classes: dict[tuple, list[str]] = {}
    for p in problem.network.pipelines:
        if dyn:
            key = ((p.flow_min, p.diameter_min), (p.flow_max, p.diameter_max))
        else:
            key = ((p.flow_min,), (p.flow_max,))
        classes.setdefault(key, []).append(p.id)
    return classes


def train_nets(problem: PlanningProblem, base: TrainConfig | None = None, mode: str | None = None) -> list[ReluNet]:
    """Train every net the given mode needs, one per (target, domain class)."""
    base = base or TrainConfig()
    mode = mode or problem.mode
    nets = []
    for target in targets_for(mode):
        dyn = target in DYN_TARGETS
        for (lo, hi), pipes in domain_classes(problem, dyn).items():
            cfg = replace(base, lo=lo, hi=hi)
            net = train_pair(target, cfg)
            net.metadata["pipes"] = list(pipes)
            nets.append(net)
    return nets


def net_filenames(nets: list[ReluNet]) -> list[str]:
    """``<target>.json``, with a class suffix when a target has several nets."""
    counts: dict[str, int] = {}
    for net in nets:
        counts[net.metadata["target"]] = counts.get(net.metadata["target"], 0) + 1
    seen: dict[str, int] = {}
    names = []
    for net in nets:
        target = net.metadata["target"]
        seen[target] = seen.get(target, 0) + 1
        names.append(f"{target}.json" if counts[target] == 1 else f"{target}-c{seen[target]}.json")
    return names


def save_nets(nets: list[ReluNet], directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for net, name in zip(nets, net_filenames(nets)):
        path = directory / name
        save_net(net, path)
        paths.append(path)
    return paths


def load_nets(paths) -> list[ReluNet]:
    """Load nets from files and/or directories (every ``*.json`` inside, sorted)."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("*.json")))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"no such net file or directory: {p}")
    return [load_net(f) for f in files]


def _covering(nets: list[ReluNet], target: str, lo, hi) -> ReluNet | None:
    best, best_volume = None, math.inf
    for net in nets:
        if net.metadata.get("target") != target or net.domain is None:
            continue
        dlo, dhi = net.domain
        if len(dlo) != len(lo) or np.any(dlo > np.asarray(lo) + 1e-9) or np.any(dhi < np.asarray(hi) - 1e-9):
            continue
        volume = float(np.prod(dhi - dlo))
        if volume < best_volume:
            best, best_volume = net, volume
    return best


def surrogates_for(problem: PlanningProblem, nets: list[ReluNet], expansion: bool) -> dict[str, PipeSurrogate]:
    """Pick, per pipe, the tightest covering convex and concave nets and screen them."""
    convex_t, concave_t = DYN_TARGETS if expansion else SCALAR_TARGETS
    cache: dict[int, object] = {}
    out = {}
    for p in problem.network.pipelines:
        lo = (p.flow_min, p.diameter_min) if expansion else (p.flow_min,)
        hi = (p.flow_max, p.diameter_max) if expansion else (p.flow_max,)
        pair = []
        for target in (convex_t, concave_t):
            net = _covering(nets, target, lo, hi)
            if net is None:
                raise FormulationError(f"pipeline {p.id!r}: no {target} net covers flow/diameter box {lo}..{hi}")
            if id(net) not in cache:
                cache[id(net)] = build_envelope(net)
            pair.append(cache[id(net)])
        out[p.id] = PipeSurrogate(*pair)
    return out


def build_model(problem: PlanningProblem, formulation: str, nets: list[ReluNet] | None = None, tangent_cut_count: int = 16) -> MipModel:
    if formulation == "miqp":
        return build_miqp_relaxation(problem, tangent_cut_count)
    if formulation != "icnn":
        raise FormulationError(f"unknown formulation {formulation!r}")
    if nets is None:
        raise FormulationError("the icnn formulation needs trained nets")
    expansion = problem.mode == "expansion"
    surrogates = surrogates_for(problem, nets, expansion)
    if expansion:
        return build_icnn_expansion(problem, surrogates, BuildOptions(mode="expansion"))
    return build_icnn_operational(problem, surrogates)


def minimum_emission(problem: PlanningProblem, formulation: str, nets=None, cfg: BnbConfig | None = None) -> float:
    """Smallest ``e^T theta`` the model admits (no cap); ``inf`` if the model is infeasible."""
    model = build_model(problem.with_cap(math.inf), formulation, nets)
    theta = model.annotations["theta"]
    e = problem.network.carbon_intensity
    model.set_objective({int(theta[i]): float(e[i]) for i in range(len(e)) if e[i] != 0.0})
    sol = solve_mip(model, cfg or BnbConfig.from_env())
    return sol.objective if sol.has_incumbent else math.inf


@dataclass
class RunReport:
    formulation: str
    mode: str
    emission_cap: float
    status: str
    mip_objective: float | None = None
    mip_bound: float | None = None
    gap: float | None = None
    mip_emission: float | None = None
    nodes: int = 0
    lp_failures: int = 0
    seconds: float = 0.0
    restored: bool = False
    restored_cost: float | None = None
    restored_emission: float | None = None
    mass_balance_residual: float | None = None
    weymouth_residual: float | None = None
    bound_violation: float | None = None
    restoration_error: str | None = None
    expansion: dict | None = None
    state: dict | None = field(default=None, repr=False)

    @property
    def restored_feasible(self) -> bool:
        """Restoration succeeded and the physics residuals are within 1e-6."""
        return bool(self.restored and max(self.mass_balance_residual, self.weymouth_residual) <= 1e-6)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["emission_cap"] = "inf" if math.isinf(self.emission_cap) else self.emission_cap
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _expansion_summary(problem: PlanningProblem, diameters: np.ndarray) -> dict:
    base = problem.network.diameter
    delta = diameters - base
    return {
        "mean_diameter_change": float(np.mean(delta)),
        "max_diameter_change": float(np.max(delta)),
        "expansion_cost": float(problem.network.expansion_cost @ diameters),
        "diameters": diameters.tolist(),
    }


def run_plan(
    problem: PlanningProblem,
    formulation: str = "icnn",
    nets: list[ReluNet] | None = None,
    restore: bool = True,
    cfg: BnbConfig | None = None,
    tangent_cut_count: int = 16,
) -> RunReport:
    """Build and solve the planning MILP, then optionally restore exact physics."""
    if formulation == "miqp" and problem.mode == "expansion":
        raise FormulationError("the miqp relaxation has no expansion variant; use the icnn formulation")
    started = time.perf_counter()
    model = build_model(problem, formulation, nets, tangent_cut_count)
    sol = solve_mip(model, cfg or BnbConfig.from_env())
    report = RunReport(
        formulation=formulation,
        mode=problem.mode,
        emission_cap=problem.emission_cap,
        status=sol.status,
        nodes=sol.nodes,
        lp_failures=sol.lp_failures,
    )
    if not sol.has_incumbent:
        report.seconds = time.perf_counter() - started
        return report
    candidate = extract_solution(model, sol.x)
    report.mip_objective = sol.objective
    report.mip_bound = sol.bound
    report.gap = sol.gap
    report.mip_emission = float(problem.network.carbon_intensity @ candidate.injections)
    report.state = candidate.to_dict()
    if candidate.diameters is not None:
        report.expansion = _expansion_summary(problem, candidate.diameters)
    if restore:
        try:
            restored, score = restore_and_score(problem.network, problem, candidate)
        except RestorationError as exc:
            report.restoration_error = f"{exc} (last residual {exc.residual:.3e})"
        else:
            report.restored = True
            report.restored_cost = score.cost_total
            report.restored_emission = score.emission_total
            report.mass_balance_residual = score.mass_balance_residual_inf
            report.weymouth_residual = score.weymouth_residual_inf
            report.bound_violation = score.bound_violation_inf
            report.state = restored.to_dict()
    report.seconds = time.perf_counter() - started
    return report


def _fmt(value, spec=".2f") -> str:
    if value is None:
        return "-"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return format(value, spec)


def format_table(reports: list[RunReport]) -> str:
    """Aligned text table: one row per run, optimal next to restored values."""
    header = ["formulation", "cap [kt]", "status", "optimal", "restored", "emission", "weymouth res", "bound viol", "nodes", "time [s]"]
    expansion = any(r.expansion for r in reports)
    if expansion:
        header += ["mean dd [mm]", "max dd [mm]", "exp. cost"]
    rows = [header]
    for r in reports:
        row = [
            r.formulation,
            _fmt(r.emission_cap, ".1f"),
            r.status,
            _fmt(r.mip_objective),
            _fmt(r.restored_cost),
            _fmt(r.restored_emission if r.restored else r.mip_emission, ".3f"),
            _fmt(r.weymouth_residual, ".1e"),
            _fmt(r.bound_violation, ".1e"),
            str(r.nodes),
            _fmt(r.seconds, ".1f"),
        ]
        if expansion:
            e = r.expansion or {}
            row += [_fmt(e.get("mean_diameter_change")), _fmt(e.get("max_diameter_change")), _fmt(e.get("expansion_cost"))]
        rows.append(row)
    widths = [max(len(row[k]) for row in rows) for k in range(len(header))]
    lines = []
    for n, row in enumerate(rows):
        lines.append("  ".join(cell.rjust(w) if k else cell.ljust(w) for k, (cell, w) in enumerate(zip(row, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def dominance(icnn: RunReport, miqp: RunReport, tol: float = 1e-6) -> dict:
    """Compare restored costs at one cap; ``holds`` is False when the ICNN run is beaten."""
    if not (icnn.restored and miqp.restored):
        return {"holds": None, "note": "a run was not restored; no comparison"}
    holds = icnn.restored_cost <= miqp.restored_cost + tol
    note = "icnn restored cost is lowest" if holds else (
        f"exception: miqp restored cost {miqp.restored_cost:.4f} is below icnn {icnn.restored_cost:.4f}"
    )
    if not holds and (miqp.bound_violation or 0.0) > tol:
        note += f" (miqp point leaves its bounds by {miqp.bound_violation:.3g})"
    return {"holds": bool(holds), "icnn": icnn.restored_cost, "miqp": miqp.restored_cost, "note": note}


__all__ = [
    "DYN_TARGETS",
    "RunReport",
    "SCALAR_TARGETS",
    "build_model",
    "domain_classes",
    "dominance",
    "format_table",
    "load_nets",
    "minimum_emission",
    "net_filenames",
    "run_plan",
    "save_nets",
    "surrogates_for",
    "targets_for",
    "train_nets",
]
