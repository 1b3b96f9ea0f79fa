"""Gas network data model, on-disk format and validation.

Units are fixed: flows in Mm3/day, pressures stored squared in bar^2, supply
cost in EUR/Mm3, carbon intensity in kg/m3 (so emissions come out in kt),
diameters in mm.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

UNITS = {
    "flow": "Mm3/day",
    "pressure": "bar2",
    "cost": "EUR/Mm3",
    "carbon_intensity": "kg/m3",
    "emission": "kt",
    "diameter": "mm",
}

MODES = ("operational", "expansion")


class NetworkError(ValueError):
    """Raised when a network document cannot be parsed or is invalid."""


@dataclass(frozen=True)
class Node:
    id: str
    demand: float = 0.0
    supply_cost: float = 0.0
    supply_min: float = 0.0
    supply_max: float = 0.0
    pressure_min: float = 0.0
    pressure_max: float = 1.0
    carbon_intensity: float = 0.0

    @property
    def is_junction(self) -> bool:
        return self.supply_max == 0.0


@dataclass(frozen=True)
class Pipeline:
    id: str
    from_node: str
    to_node: str
    friction: float
    friction_per_diameter: float
    diameter: float
    diameter_min: float
    diameter_max: float
    flow_min: float
    flow_max: float
    expansion_cost: float = 0.0


@dataclass(frozen=True)
class GasNetwork:
    nodes: tuple[Node, ...]
    pipelines: tuple[Pipeline, ...]

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def ell(self) -> int:
        return len(self.pipelines)

    def node_index(self, node_id: str) -> int:
        for i, node in enumerate(self.nodes):
            if node.id == node_id:
                return i
        raise KeyError(node_id)

    def endpoints(self) -> list[tuple[int, int]]:
        index = {node.id: i for i, node in enumerate(self.nodes)}
        return [(index[p.from_node], index[p.to_node]) for p in self.pipelines]

    def _node_array(self, name: str) -> np.ndarray:
        return np.array([getattr(node, name) for node in self.nodes], dtype=float)

    def _pipe_array(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.pipelines], dtype=float)

    # vector views used throughout the numerical code
    @property
    def demand(self) -> np.ndarray:
        return self._node_array("demand")

    @property
    def supply_cost(self) -> np.ndarray:
        return self._node_array("supply_cost")

    @property
    def supply_min(self) -> np.ndarray:
        return self._node_array("supply_min")

    @property
    def supply_max(self) -> np.ndarray:
        return self._node_array("supply_max")

    @property
    def pressure_min(self) -> np.ndarray:
        return self._node_array("pressure_min")

    @property
    def pressure_max(self) -> np.ndarray:
        return self._node_array("pressure_max")

    @property
    def carbon_intensity(self) -> np.ndarray:
        return self._node_array("carbon_intensity")

    @property
    def friction(self) -> np.ndarray:
        return self._pipe_array("friction")

    @property
    def friction_per_diameter(self) -> np.ndarray:
        return self._pipe_array("friction_per_diameter")

    @property
    def diameter(self) -> np.ndarray:
        return self._pipe_array("diameter")

    @property
    def diameter_min(self) -> np.ndarray:
        return self._pipe_array("diameter_min")

    @property
    def diameter_max(self) -> np.ndarray:
        return self._pipe_array("diameter_max")

    @property
    def flow_min(self) -> np.ndarray:
        return self._pipe_array("flow_min")

    @property
    def flow_max(self) -> np.ndarray:
        return self._pipe_array("flow_max")

    @property
    def expansion_cost(self) -> np.ndarray:
        return self._pipe_array("expansion_cost")


@dataclass(frozen=True)
class PlanningProblem:
    network: GasNetwork
    emission_cap: float = math.inf
    mode: str = "operational"
    reference_node: str = ""

    def with_cap(self, cap: float) -> "PlanningProblem":
        return PlanningProblem(self.network, cap, self.mode, self.reference_node)

    def with_mode(self, mode: str) -> "PlanningProblem":
        return PlanningProblem(self.network, self.emission_cap, mode, self.reference_node)


def incidence_matrix(net: GasNetwork) -> np.ndarray:
    """Node-by-pipe incidence: +1 at the sending node, -1 at the receiving node."""
    A = np.zeros((net.n, net.ell))
    for l, (i, j) in enumerate(net.endpoints()):
        A[i, l] = 1.0
        A[j, l] = -1.0
    return A


def _connected(net: GasNetwork) -> bool:
    if net.n == 0:
        return False
    index = {node.id: i for i, node in enumerate(net.nodes)}
    adj: dict[int, list[int]] = {i: [] for i in range(net.n)}
    for p in net.pipelines:
        if p.from_node in index and p.to_node in index:
            a, b = index[p.from_node], index[p.to_node]
            adj[a].append(b)
            adj[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == net.n


def validate(net: GasNetwork | PlanningProblem) -> list[str]:
    """Return one message per violated invariant; an empty list means valid."""
    problem = net if isinstance(net, PlanningProblem) else None
    if problem is not None:
        net = problem.network
    report: list[str] = []

    ids = [node.id for node in net.nodes]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        report.append(f"duplicate node ids: {', '.join(dupes)}")
    for k, node in enumerate(net.nodes):
        where = f"nodes[{k}] ({node.id})"
        if node.supply_min > node.supply_max:
            report.append(f"{where}: supply_min must not exceed supply_max")
        if not node.pressure_min < node.pressure_max:
            report.append(f"{where}: pressure_min must be below pressure_max")
        if node.carbon_intensity < 0:
            report.append(f"{where}: carbon_intensity must be non-negative")
        if node.demand < 0:
            report.append(f"{where}: demand must be non-negative")

    pipe_ids = [p.id for p in net.pipelines]
    if len(set(pipe_ids)) != len(pipe_ids):
        report.append("duplicate pipeline ids")
    known = set(ids)
    for k, p in enumerate(net.pipelines):
        where = f"pipelines[{k}] ({p.id})"
        for end in (p.from_node, p.to_node):
            if end not in known:
                report.append(f"{where}: unknown node {end!r}")
        if p.from_node == p.to_node:
            report.append(f"{where}: pipeline endpoints must differ")
        if not p.friction > 0:
            report.append(f"{where}: friction must be positive")
        if not p.friction_per_diameter > 0:
            report.append(f"{where}: friction_per_diameter must be positive")
        if not p.diameter_min > 0:
            report.append(f"{where}: diameter lower bound must be positive")
        if not p.diameter_min <= p.diameter <= p.diameter_max:
            report.append(f"{where}: diameter must lie within [diameter_min, diameter_max]")
        if not p.flow_min < 0 < p.flow_max:
            report.append(f"{where}: flow bounds must satisfy flow_min < 0 < flow_max")
        if p.expansion_cost < 0:
            report.append(f"{where}: expansion_cost must be non-negative")
        if p.friction > 0 and p.friction_per_diameter > 0:
            implied = p.friction_per_diameter * p.diameter
            if abs(implied - p.friction) > 1e-9 * abs(p.friction):
                report.append(f"{where}: friction must equal friction_per_diameter * diameter")

    if net.n and not _connected(net):
        report.append("graph not connected")
    if net.n and net.demand.sum() > net.supply_max.sum():
        report.append("total demand exceeds total supply_max (infeasible by construction)")

    if problem is not None:
        if problem.mode not in MODES:
            report.append(f"mode must be one of {MODES}")
        if not (problem.emission_cap > 0):
            report.append("emission_cap must be positive or unbounded")
        if problem.reference_node not in known:
            report.append(f"reference_node {problem.reference_node!r} is not a node")
    return report


# ---------------------------------------------------------------------------
# file format

_NODE_KEYS = {f.name for f in fields(Node)}
_PIPE_KEYS = ({f.name for f in fields(Pipeline)} - {"from_node", "to_node"}) | {"from", "to"}
_PIPE_REQUIRED = _PIPE_KEYS - {"expansion_cost"}
_TOP_KEYS = {"units", "nodes", "pipelines", "emission_cap", "mode", "reference_node"}


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NetworkError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _check_keys(doc: dict, allowed: set, required: set, path: str) -> None:
    if not isinstance(doc, dict):
        raise NetworkError(f"{path}: expected an object")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise NetworkError(f"{path}: unknown keys {unknown}")
    missing = sorted(required - set(doc))
    if missing:
        raise NetworkError(f"{path}: missing keys {missing}")


def _parse_cap(value) -> float:
    if value is None or value == "inf":
        return math.inf
    return _number(value, "emission_cap")


def problem_from_dict(doc: dict) -> PlanningProblem:
    _check_keys(doc, _TOP_KEYS, {"nodes", "pipelines"}, "$")
    units = doc.get("units", UNITS)
    if not isinstance(units, dict):
        raise NetworkError("units: expected an object")
    for key, unit in units.items():
        if key not in UNITS:
            raise NetworkError(f"units.{key}: unknown quantity")
        if unit != UNITS[key]:
            raise NetworkError(f"units.{key}: expected {UNITS[key]!r}, got {unit!r}")

    nodes = []
    for k, raw in enumerate(doc["nodes"]):
        path = f"nodes[{k}]"
        _check_keys(raw, _NODE_KEYS, {"id"}, path)
        values = {key: _number(val, f"{path}.{key}") for key, val in raw.items() if key != "id"}
        nodes.append(Node(id=str(raw["id"]), **values))

    pipes = []
    for k, raw in enumerate(doc["pipelines"]):
        path = f"pipelines[{k}]"
        _check_keys(raw, _PIPE_KEYS, _PIPE_REQUIRED, path)
        values = {
            key: _number(val, f"{path}.{key}")
            for key, val in raw.items()
            if key not in ("id", "from", "to")
        }
        pipes.append(Pipeline(id=str(raw["id"]), from_node=str(raw["from"]), to_node=str(raw["to"]), **values))

    net = GasNetwork(tuple(nodes), tuple(pipes))
    reference = doc.get("reference_node", nodes[0].id if nodes else "")
    return PlanningProblem(
        network=net,
        emission_cap=_parse_cap(doc.get("emission_cap")),
        mode=doc.get("mode", "operational"),
        reference_node=str(reference),
    )


def problem_to_dict(problem: PlanningProblem) -> dict:
    def pipe_doc(p: Pipeline) -> dict:
        d = asdict(p)
        out = {"id": d.pop("id"), "from": d.pop("from_node"), "to": d.pop("to_node")}
        out.update(d)
        return out

    cap = problem.emission_cap
    return {
        "units": dict(UNITS),
        "nodes": [asdict(node) for node in problem.network.nodes],
        "pipelines": [pipe_doc(p) for p in problem.network.pipelines],
        "emission_cap": "inf" if math.isinf(cap) else cap,
        "mode": problem.mode,
        "reference_node": problem.reference_node,
    }


def load_problem(path) -> PlanningProblem:
    """Read and validate a planning problem document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: malformed document ({exc})") from exc
    problem = problem_from_dict(doc)
    report = validate(problem)
    if report:
        raise NetworkError(f"{path}: " + "; ".join(report))
    return problem


def load_network(path) -> GasNetwork:
    return load_problem(path).network


def save_problem(problem: PlanningProblem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem), indent=2) + "\n")


def bundled(name: str) -> Path:
    """Path of a fixture shipped with the package, e.g. ``bundled("toy7.json")``."""
    return Path(__file__).parent / "data" / name


__all__ = [
    "GasNetwork",
    "NetworkError",
    "Node",
    "Pipeline",
    "PlanningProblem",
    "UNITS",
    "bundled",
    "incidence_matrix",
    "load_network",
    "load_problem",
    "problem_from_dict",
    "problem_to_dict",
    "save_problem",
    "validate",
]
