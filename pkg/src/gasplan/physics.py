"""Steady-state Weymouth physics, feasibility scoring and Newton restoration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import GasNetwork, PlanningProblem, incidence_matrix


class RestorationError(RuntimeError):
    """Newton restoration did not produce a solution of the flow equations."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class FlowState:
    injections: np.ndarray
    flows: np.ndarray
    squared_pressures: np.ndarray
    diameters: np.ndarray | None = None

    def to_dict(self) -> dict:
        doc = {
            "injections": self.injections.tolist(),
            "flows": self.flows.tolist(),
            "squared_pressures": self.squared_pressures.tolist(),
        }
        if self.diameters is not None:
            doc["diameters"] = self.diameters.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FlowState":
        d = doc.get("diameters")
        return cls(
            np.asarray(doc["injections"], dtype=float),
            np.asarray(doc["flows"], dtype=float),
            np.asarray(doc["squared_pressures"], dtype=float),
            None if d is None else np.asarray(d, dtype=float),
        )


@dataclass(frozen=True)
class FeasibilityReport:
    mass_balance_residual_inf: float
    weymouth_residual_inf: float
    bound_violation_inf: float
    emission_total: float
    cost_total: float
    violations: dict = field(default_factory=dict)

    def feasible(self, tol: float = 1e-6) -> bool:
        return max(self.mass_balance_residual_inf, self.weymouth_residual_inf, self.bound_violation_inf) <= tol

    def to_dict(self) -> dict:
        return {
            "mass_balance_residual_inf": self.mass_balance_residual_inf,
            "weymouth_residual_inf": self.weymouth_residual_inf,
            "bound_violation_inf": self.bound_violation_inf,
            "emission_total": self.emission_total,
            "cost_total": self.cost_total,
            "violations": dict(self.violations),
        }


def weymouth_lhs(flow):
    """Signed square ``phi * |phi|``."""
    flow = np.asarray(flow, dtype=float)
    return flow * np.abs(flow)


def weymouth_lhs_dyn(flow, diameter):
    """``phi * |phi| / d``; the diameter must be strictly positive."""
    diameter = np.asarray(diameter, dtype=float)
    if np.any(diameter <= 0):
        raise ValueError("diameter must be positive")
    return weymouth_lhs(flow) / diameter


def _effective_friction(net: GasNetwork, diameters) -> np.ndarray:
    if diameters is None:
        return net.friction
    return net.friction_per_diameter * np.asarray(diameters, dtype=float)


def _check_dims(net: GasNetwork, s: FlowState) -> None:
    shapes = {
        "injections": (s.injections.shape, (net.n,)),
        "flows": (s.flows.shape, (net.ell,)),
        "squared_pressures": (s.squared_pressures.shape, (net.n,)),
    }
    if s.diameters is not None:
        shapes["diameters"] = (s.diameters.shape, (net.ell,))
    for name, (got, want) in shapes.items():
        if got != want:
            raise ValueError(f"{name}: expected shape {want}, got {got}")


def _box_violation(x, lo, hi) -> float:
    if len(x) == 0:
        return 0.0
    return float(np.max(np.maximum(np.maximum(lo - x, x - hi), 0.0)))


def residuals(net: GasNetwork, s: FlowState, problem: PlanningProblem | None = None) -> FeasibilityReport:
    """Score a candidate state against the exact network equations and box limits.

    In expansion mode (``s.diameters`` given) friction is ``omega_hat * d`` and
    the expansion cost ``lambda^T d`` is added to the cost.
    """
    _check_dims(net, s)
    A = incidence_matrix(net)
    mass = A @ s.flows - s.injections + net.demand
    omega = _effective_friction(net, s.diameters)
    weymouth = weymouth_lhs(s.flows) - omega * (A.T @ s.squared_pressures)

    violations = {
        "injections": _box_violation(s.injections, net.supply_min, net.supply_max),
        "flows": _box_violation(s.flows, net.flow_min, net.flow_max),
        "squared_pressures": _box_violation(s.squared_pressures, net.pressure_min, net.pressure_max),
    }
    cost = float(net.supply_cost @ s.injections)
    if s.diameters is not None:
        violations["diameters"] = _box_violation(s.diameters, net.diameter_min, net.diameter_max)
        cost += float(net.expansion_cost @ s.diameters)
    emission = float(net.carbon_intensity @ s.injections)
    if problem is not None and emission > problem.emission_cap:
        violations["emission_cap"] = emission - problem.emission_cap

    return FeasibilityReport(
        mass_balance_residual_inf=float(np.max(np.abs(mass))) if len(mass) else 0.0,
        weymouth_residual_inf=float(np.max(np.abs(weymouth))) if len(weymouth) else 0.0,
        bound_violation_inf=max(violations.values()),
        emission_total=emission,
        cost_total=cost,
        violations=violations,
    )


def newton_restore(
    net: GasNetwork,
    injections,
    reference: str,
    diameters=None,
    *,
    reference_pressure: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    max_halvings: int = 20,
) -> FlowState:
    """Solve mass balance and Weymouth for (flows, squared pressures) at fixed injections.

    The reference node's squared pressure is pinned at its upper bound, or at
    ``reference_pressure`` when given. The
    iteration starts from box-midpoint pressures and least-squares flows and
    backtracks by halving whenever the residual norm grows.
    """
    injections = np.asarray(injections, dtype=float)
    if injections.shape != (net.n,):
        raise ValueError(f"injections: expected shape {(net.n,)}, got {injections.shape}")
    imbalance = injections.sum() - net.demand.sum()
    if abs(imbalance) > 1e-9 * max(1.0, abs(net.demand.sum())):
        raise ValueError(f"injections do not balance total demand (off by {imbalance:.3e})")

    A = incidence_matrix(net)
    omega = _effective_friction(net, diameters)
    ref = net.node_index(reference)
    keep = np.array([i for i in range(net.n) if i != ref], dtype=int)
    A_red = A[keep]
    rhs = (injections - net.demand)[keep]
    pi_ref = net.pressure_max[ref] if reference_pressure is None else float(reference_pressure)
    n1, ell = len(keep), net.ell

    flows = np.linalg.lstsq(A, injections - net.demand, rcond=None)[0]
    pressures = 0.5 * (net.pressure_min + net.pressure_max)
    pressures[ref] = pi_ref

    def residual(phi, pi):
        return np.concatenate([A_red @ phi - rhs, weymouth_lhs(phi) - omega * (A.T @ pi)])

    F = residual(flows, pressures)
    norm = np.max(np.abs(F)) if len(F) else 0.0
    for _ in range(max_iter + 1):
        if norm <= tol:
            return FlowState(injections.copy(), flows, pressures, None if diameters is None else np.asarray(diameters, float))
        J = np.zeros((n1 + ell, ell + n1))
        J[:n1, :ell] = A_red
        J[n1:, :ell] = np.diag(2.0 * np.maximum(np.abs(flows), 1e-12))
        J[n1:, ell:] = -omega[:, None] * A_red.T
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise RestorationError("singular Jacobian", norm) from exc
        alpha = 1.0
        for _ in range(max_halvings + 1):
            trial_phi = flows + alpha * step[:ell]
            trial_pi = pressures.copy()
            trial_pi[keep] += alpha * step[ell:]
            F_trial = residual(trial_phi, trial_pi)
            trial_norm = np.max(np.abs(F_trial))
            if trial_norm < norm:
                break
            alpha *= 0.5
        flows, pressures, F, norm = trial_phi, trial_pi, F_trial, trial_norm
    raise RestorationError(f"Newton did not converge in {max_iter} iterations", norm)


def restore_and_score(net: GasNetwork, problem: PlanningProblem, candidate: FlowState):
    """Restore (flows, pressures) at the candidate's injections, then score the result.

    The reference pressure is held at the candidate's own value, so an exactly
    feasible candidate is a fixed point of the restoration.
    """
    ref = net.node_index(problem.reference_node)
    restored = newton_restore(
        net,
        candidate.injections,
        problem.reference_node,
        candidate.diameters,
        reference_pressure=candidate.squared_pressures[ref],
    )
    return restored, residuals(net, restored, problem)


__all__ = [
    "FeasibilityReport",
    "FlowState",
    "RestorationError",
    "newton_restore",
    "residuals",
    "restore_and_score",
    "weymouth_lhs",
    "weymouth_lhs_dyn",
]
