"""MILP builders for the planning problem.

``build_icnn_operational`` / ``build_icnn_expansion`` replace each pipe's flow
law by two inner problems (the convex surrogate's max and the concave one's
min over supporting planes) written through their optimality conditions:
plane feasibility, a single active multiplier, and Big-M complementarity.
``build_miqp_relaxation`` is the flow-direction relaxation with its quadratic
term outer-approximated by tangent lines.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .icnn import Envelope, cell_boxes, screen_supporting
from .network import PlanningProblem, incidence_matrix
from .physics import FlowState
from .solver import MipModel


class FormulationError(ValueError):
    pass


@dataclass(frozen=True)
class PipeSurrogate:
    """Convex and concave envelopes standing in for one pipe's flow law."""

    convex: Envelope
    concave: Envelope


@dataclass(frozen=True)
class BuildOptions:
    formulation: str = "icnn"
    mode: str = "operational"
    tangent_cut_count: int = 16
    big_m: float | None = None  # None: derived per pipe from the envelope
    # tie each input to the region of the selected plane (valid, tightens the LP)
    cell_links: bool = True

    def __post_init__(self):
        if self.formulation not in ("icnn", "miqp"):
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.mode not in ("operational", "expansion"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.tangent_cut_count < 2:
            raise ValueError("tangent_cut_count must be at least 2")


def _box_corners(lo, hi) -> np.ndarray:
    return np.array(list(itertools.product(*zip(np.atleast_1d(lo), np.atleast_1d(hi)))), dtype=float)


def compute_big_m(envelope: Envelope, lo, hi) -> float:
    """Largest gap between any two planes over the box corners.

    Each plane difference is affine, so its maximum over the box sits at a
    corner; the value bounds ``|envelope - plane_i|`` for every plane.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise FormulationError("Big-M needs a bounded box")
    vals = envelope.planes.values(_box_corners(lo, hi))  # (corners, planes)
    gaps = vals.max(axis=1) - vals.min(axis=1)
    return float(gaps.max())


def _base_model(problem: PlanningProblem, name: str):
    net = problem.network
    m = MipModel(name)
    nodes = [n.id for n in net.nodes]
    pipes = [p.id for p in net.pipelines]
    theta = m.add_vars("theta", nodes, net.supply_min, net.supply_max)
    phi = m.add_vars("phi", pipes, net.flow_min, net.flow_max)
    pi = m.add_vars("pi", nodes, net.pressure_min, net.pressure_max)
    A = incidence_matrix(net)
    for i, node in enumerate(net.nodes):
        terms = {int(phi[l]): A[i, l] for l in np.flatnonzero(A[i])}
        terms[int(theta[i])] = -1.0
        m.add_constr(terms, "E", -node.demand, f"balance[{node.id}]")
    if math.isfinite(problem.emission_cap):
        m.add_constr(
            {int(theta[i]): e for i, e in enumerate(net.carbon_intensity) if e != 0.0},
            "L",
            problem.emission_cap,
            "emission_cap",
        )
    m.set_objective({int(theta[i]): c for i, c in enumerate(net.supply_cost)})
    return m, theta, phi, pi


def _surrogate_for(surrogates, l: int, pipe_id: str):
    if isinstance(surrogates, dict):
        s = surrogates.get(pipe_id)
    else:
        s = surrogates[l] if l < len(surrogates) else None
    if s is None:
        raise FormulationError(f"missing surrogate for pipeline {pipe_id!r}")
    return s


def _kkt_block(m: MipModel, pipe_id: str, env: Envelope, inputs, lo, hi, big_m, side: str, cell_links: bool = True):
    """Add t, mu and the linearised optimality conditions for one envelope."""
    env = screen_supporting(env.planes, env.orientation, lo, hi)
    vals = env.planes.values(_box_corners(lo, hi))
    env_corner = vals.max(axis=1) if env.orientation == "convex" else vals.min(axis=1)
    # the envelope is convex/concave, so its range over the box is bracketed by
    # the corner extremes on one side and by every plane's own range on the other
    if env.orientation == "convex":
        t_lo = float(np.max(vals.min(axis=0)))
        t_hi = float(env_corner.max())
    else:
        t_lo = float(env_corner.min())
        t_hi = float(np.min(vals.max(axis=0)))
    M = compute_big_m(env, lo, hi) if big_m is None else float(big_m)
    t = m.add_vars(f"t_{side}/{pipe_id}", [pipe_id], t_lo, t_hi)[0]
    mu = m.add_vars(f"mu_{side}/{pipe_id}", [f"{pipe_id},{k}" for k in range(len(env))], 0, 1, "binary")
    for k in range(len(env)):
        w = env.planes.slopes[k]
        v = float(env.planes.intercepts[k])
        terms = {int(var): float(c) for var, c in zip(inputs, w)}
        terms_t = dict(terms)
        terms_t[int(t)] = terms_t.get(int(t), 0.0) - 1.0
        if env.orientation == "convex":
            m.add_constr(terms_t, "L", -v, f"plane_{side}[{pipe_id},{k}]")
            big = dict(terms_t)
            big[int(mu[k])] = -M
            m.add_constr(big, "G", -v - M, f"active_{side}[{pipe_id},{k}]")
        else:
            m.add_constr(terms_t, "G", -v, f"plane_{side}[{pipe_id},{k}]")
            big = dict(terms_t)
            big[int(mu[k])] = M
            m.add_constr(big, "L", M - v, f"active_{side}[{pipe_id},{k}]")
    m.add_constr({int(k): 1.0 for k in mu}, "E", 1.0, f"one_active_{side}[{pipe_id}]")
    if cell_links and len(env) > 1:
        # the active plane's region contains the input: x_c within sum_k mu_k * box_k
        box_lo, box_hi = cell_boxes(env)
        for c, var in enumerate(inputs):
            for bound, sense, tag in ((box_lo, "G", "lo"), (box_hi, "L", "hi")):
                terms = {int(mu[k]): -float(bound[k, c]) for k in range(len(env))}
                terms[int(var)] = 1.0
                m.add_constr(terms, sense, 0.0, f"cell_{tag}_{side}[{pipe_id},{c}]")
    m.meta.setdefault("big_m", {})[f"{side}/{pipe_id}"] = M
    m.meta.setdefault("planes", {})[f"{side}/{pipe_id}"] = env
    return t


def envelope_model(env: Envelope, lo, hi, big_m: float | None = None, cell_links: bool = True) -> MipModel:
    """Stand-alone model of one optimality block: inputs ``x`` over the box, ``t``, ``mu``.

    Handy for checking that fixing ``x`` pins ``t`` to the envelope value.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    m = MipModel("envelope")
    inputs = m.add_vars("x", [str(c) for c in range(len(lo))], lo, hi)
    side = "plus" if env.orientation == "convex" else "minus"
    t = _kkt_block(m, "e", env, inputs, lo, hi, big_m, side, cell_links)
    m.annotations["t"] = np.array([t])
    m.annotations["mu"] = m.annotations[f"mu_{side}/e"]
    return m


def _build_icnn(problem: PlanningProblem, surrogates, options: BuildOptions, expansion: bool) -> MipModel:
    net = problem.network
    m, theta, phi, pi = _base_model(problem, "icnn_exp" if expansion else "icnn_op")
    d = None
    if expansion:
        d = m.add_vars("d", [p.id for p in net.pipelines], net.diameter_min, net.diameter_max)
        obj = dict(m.objective)
        for l, lam in enumerate(net.expansion_cost):
            obj[int(d[l])] = obj.get(int(d[l]), 0.0) + lam
        m.set_objective(obj)
    coupling = net.friction_per_diameter if expansion else net.friction
    t_plus = np.zeros(net.ell, dtype=int)
    t_minus = np.zeros(net.ell, dtype=int)
    for l, (pipe, (i, j)) in enumerate(zip(net.pipelines, net.endpoints())):
        sur = _surrogate_for(surrogates, l, pipe.id)
        if expansion:
            lo = np.array([pipe.flow_min, pipe.diameter_min])
            hi = np.array([pipe.flow_max, pipe.diameter_max])
            inputs = [phi[l], d[l]]
        else:
            lo, hi = np.array([pipe.flow_min]), np.array([pipe.flow_max])
            inputs = [phi[l]]
        for env, side in ((sur.convex, "plus"), (sur.concave, "minus")):
            if env.input_dim != len(inputs):
                raise FormulationError(f"pipeline {pipe.id!r}: surrogate expects {env.input_dim} inputs, model has {len(inputs)}")
            if not env.covers(lo, hi):
                raise FormulationError(f"pipeline {pipe.id!r}: {side} surrogate box does not cover the pipe's bounds")
        if sur.convex.orientation != "convex" or sur.concave.orientation != "concave":
            raise FormulationError(f"pipeline {pipe.id!r}: surrogate orientations must be convex/concave")
        t_plus[l] = _kkt_block(m, pipe.id, sur.convex, inputs, lo, hi, options.big_m, "plus", options.cell_links)
        t_minus[l] = _kkt_block(m, pipe.id, sur.concave, inputs, lo, hi, options.big_m, "minus", options.cell_links)
        w = float(coupling[l])
        m.add_constr(
            {int(t_plus[l]): 1.0, int(t_minus[l]): 1.0, int(pi[i]): -w, int(pi[j]): w},
            "E",
            0.0,
            f"coupling[{pipe.id}]",
        )
    m.annotations["t_plus"] = t_plus
    m.annotations["t_minus"] = t_minus
    m.meta["mode"] = "expansion" if expansion else "operational"
    m.meta["formulation"] = "icnn"
    return m


def build_icnn_operational(problem: PlanningProblem, surrogates, options: BuildOptions | None = None) -> MipModel:
    """ICNN-embedded operational model; ``surrogates`` maps pipe id (or index) to :class:`PipeSurrogate`."""
    options = options or BuildOptions()
    return _build_icnn(problem, surrogates, options, expansion=False)


def build_icnn_expansion(problem: PlanningProblem, surrogates, options: BuildOptions | None = None) -> MipModel:
    """Expansion model: two-input surrogates over (flow, diameter) and ``lambda^T d`` in the cost."""
    options = options or BuildOptions(mode="expansion")
    if problem.mode != "expansion":
        raise FormulationError("expansion build needs a problem in expansion mode")
    return _build_icnn(problem, surrogates, options, expansion=True)


def tangent_points(flow_min: float, flow_max: float, count: int) -> np.ndarray:
    return np.linspace(flow_min, flow_max, count)


def build_miqp_relaxation(problem: PlanningProblem, tangent_cut_count: int = 16) -> MipModel:
    """Direction-binary relaxation of the flow law with tangent-line outer approximation.

    Per pipe ``l = (i, j)``: binary ``x`` (1 for flow from i to j), products
    ``z_i = x pi_i`` and ``z_j = x pi_j`` linearised with the nodes' pressure
    bounds, and ``2 z_i - 2 z_j - pi_i + pi_j >= (2 g phi - g^2) / omega`` for
    each tangent point ``g``.
    """
    if problem.mode == "expansion":
        raise FormulationError("no convex relaxation of the diameter-dependent flow law is available; use the icnn formulation")
    if tangent_cut_count < 2:
        raise FormulationError("tangent_cut_count must be at least 2")
    net = problem.network
    m, theta, phi, pi = _base_model(problem, "miqp")
    pmin, pmax = net.pressure_min, net.pressure_max
    pipes = [p.id for p in net.pipelines]
    x = m.add_vars("x", pipes, 0, 1, "binary")
    ends = net.endpoints()
    z_from = m.add_vars("z_from", pipes, [min(0.0, pmin[i]) for i, _ in ends], [pmax[i] for i, _ in ends])
    z_to = m.add_vars("z_to", pipes, [min(0.0, pmin[j]) for _, j in ends], [pmax[j] for _, j in ends])
    for l, (pipe, (i, j)) in enumerate(zip(net.pipelines, ends)):
        for z, node in ((z_from[l], i), (z_to[l], j)):
            z, xl, p = int(z), int(x[l]), int(pi[node])
            tag = f"{pipe.id},{net.nodes[node].id}"
            m.add_constr({z: 1.0, xl: -pmin[node]}, "G", 0.0, f"z_lo[{tag}]")
            m.add_constr({z: 1.0, xl: -pmax[node]}, "L", 0.0, f"z_hi[{tag}]")
            m.add_constr({z: 1.0, p: -1.0, xl: -pmax[node]}, "G", -pmax[node], f"z_on_lo[{tag}]")
            m.add_constr({z: 1.0, p: -1.0, xl: -pmin[node]}, "L", -pmin[node], f"z_on_hi[{tag}]")
        w = float(pipe.friction)
        for k, g in enumerate(tangent_points(pipe.flow_min, pipe.flow_max, tangent_cut_count)):
            m.add_constr(
                {int(z_from[l]): 2.0, int(z_to[l]): -2.0, int(pi[i]): -1.0, int(pi[j]): 1.0, int(phi[l]): -2.0 * g / w},
                "G",
                -(g * g) / w,
                f"tangent[{pipe.id},{k}]",
            )
    m.meta["mode"] = "operational"
    m.meta["formulation"] = "miqp"
    m.meta["tangent_cut_count"] = tangent_cut_count
    return m


def extract_solution(model: MipModel, assignment) -> FlowState:
    """Read injections, flows, squared pressures (and diameters) out of an assignment."""
    x = np.asarray(assignment, dtype=float)
    if x.shape != (model.num_vars,):
        raise FormulationError(f"assignment has {x.size} entries, model has {model.num_vars} variables")
    try:
        theta, phi, pi = (model.annotations[s] for s in ("theta", "phi", "pi"))
    except KeyError as exc:
        raise FormulationError(f"model lacks annotation {exc.args[0]!r}") from None
    d = model.annotations.get("d")
    return FlowState(x[theta].copy(), x[phi].copy(), x[pi].copy(), None if d is None else x[d].copy())


def assignment_from_state(model: MipModel, problem: PlanningProblem, state: FlowState) -> np.ndarray:
    """Complete a physical state into a full model assignment (auxiliaries derived).

    For ICNN models ``t`` is set to the envelope values and ``mu`` to the
    active plane; for the MIQP relaxation ``x = [phi >= 0]`` and ``z = x * pi``.
    """
    net = problem.network
    x = np.zeros(model.num_vars)
    x[model.annotations["theta"]] = state.injections
    x[model.annotations["phi"]] = state.flows
    x[model.annotations["pi"]] = state.squared_pressures
    if "d" in model.annotations:
        x[model.annotations["d"]] = state.diameters
    if model.meta.get("formulation") == "miqp":
        direction = (state.flows >= 0).astype(float)
        x[model.annotations["x"]] = direction
        ends = net.endpoints()
        x[model.annotations["z_from"]] = direction * state.squared_pressures[[i for i, _ in ends]]
        x[model.annotations["z_to"]] = direction * state.squared_pressures[[j for _, j in ends]]
        return x
    for l, pipe in enumerate(net.pipelines):
        point = [state.flows[l]] if state.diameters is None else [state.flows[l], state.diameters[l]]
        for side in ("plus", "minus"):
            env = model.meta["planes"][f"{side}/{pipe.id}"]
            vals = env.planes.values(np.array([point]))[0]
            k = int(np.argmax(vals) if side == "plus" else np.argmin(vals))
            x[model.annotations[f"t_{side}/{pipe.id}"][0]] = vals[k]
            x[model.annotations[f"mu_{side}/{pipe.id}"][k]] = 1.0
    return x


__all__ = [
    "BuildOptions",
    "FormulationError",
    "PipeSurrogate",
    "assignment_from_state",
    "build_icnn_expansion",
    "build_icnn_operational",
    "build_miqp_relaxation",
    "compute_big_m",
    "envelope_model",
    "extract_solution",
    "tangent_points",
]
