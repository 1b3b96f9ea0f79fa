import math
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp

from gasplan.network import bundled, load_problem
from gasplan.pipeline import train_nets


def read_mps(path):
    """Minimal fixed-MPS reader, independent of the package's writer."""
    rows, senses, cols, integer = ["OBJ"], {}, [], set()
    entries, rhs, bounds = {}, {}, {}
    section, in_int = None, False
    for raw in Path(path).read_text().splitlines():
        if not raw.strip():
            continue
        if not raw.startswith(" "):
            section = raw.split()[0]
            continue
        tok = raw.split()
        if section == "ROWS":
            if tok[0] != "N":
                senses[tok[1]] = tok[0]
                rows.append(tok[1])
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                in_int = tok[2] == "'INTORG'"
                continue
            name = tok[0]
            if not cols or cols[-1] != name:
                cols.append(name)
            if in_int:
                integer.add(name)
            for k in range(1, len(tok), 2):
                entries[(tok[k], name)] = float(tok[k + 1])
        elif section == "RHS":
            for k in range(1, len(tok), 2):
                rhs[tok[k]] = float(tok[k + 1])
        elif section == "BOUNDS":
            kind, name = tok[0], tok[2]
            lo, hi = bounds.get(name, (0.0, math.inf))
            val = float(tok[3]) if len(tok) > 3 else None
            if kind == "BV":
                lo, hi = 0.0, 1.0
            elif kind == "FX":
                lo = hi = val
            elif kind == "LO":
                lo = val
            elif kind == "UP":
                hi = val
            elif kind == "MI":
                lo = -math.inf
            bounds[name] = (lo, hi)
    index = {c: k for k, c in enumerate(cols)}
    cons = [r for r in rows if r != "OBJ"]
    A = np.zeros((len(cons), len(cols)))
    c = np.zeros(len(cols))
    rindex = {r: i for i, r in enumerate(cons)}
    for (r, name), v in entries.items():
        if r == "OBJ":
            c[index[name]] = v
        else:
            A[rindex[r], index[name]] = v
    b = np.array([rhs.get(r, 0.0) for r in cons])
    lo_b = np.array([-np.inf if senses[r] == "L" else b[i] for i, r in enumerate(cons)])
    hi_b = np.array([np.inf if senses[r] == "G" else b[i] for i, r in enumerate(cons)])
    lb = np.array([bounds.get(n, (0.0, math.inf))[0] for n in cols])
    ub = np.array([bounds.get(n, (0.0, math.inf))[1] for n in cols])
    integrality = np.array([1 if n in integer else 0 for n in cols])
    return {"cols": cols, "c": c, "A": A, "lo": lo_b, "hi": hi_b, "lb": lb, "ub": ub,
            "integrality": integrality, "constant": -rhs.get("OBJ", 0.0)}


def solve_mps_with_highs(path, time_limit=600):
    d = read_mps(path)
    res = milp(d["c"], constraints=LinearConstraint(d["A"], d["lo"], d["hi"]), bounds=Bounds(d["lb"], d["ub"]),
               integrality=d["integrality"], options={"time_limit": time_limit, "mip_rel_gap": 1e-9})
    return d, res


@pytest.fixture(scope="session")
def toy7():
    return load_problem(bundled("toy7.json"))


@pytest.fixture(scope="session")
def tree3():
    return load_problem(bundled("tree3.json"))


@pytest.fixture(scope="session")
def two_node():
    return load_problem(bundled("two_node.json"))


@pytest.fixture(scope="session")
def toy7_nets(toy7):
    return train_nets(toy7)


@pytest.fixture(scope="session")
def tree3_nets(tree3):
    return train_nets(tree3)


@pytest.fixture(scope="session")
def tree3_exp_nets(tree3):
    return train_nets(tree3.with_mode("expansion"))


def solve_quiet(model, **kw):
    from gasplan.solver import BnbConfig, solve_mip

    return solve_mip(model, BnbConfig(**kw))


def newton_states(problem, count, seed=0):
    """Exactly feasible, in-box states: random supplies, random anchor pressure."""
    from gasplan.physics import RestorationError, newton_restore, residuals

    net = problem.network
    rng = np.random.default_rng(seed)
    supply = np.flatnonzero(net.supply_max > 0)
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        assert tries < 200 * count
        theta = np.zeros(net.n)
        w = rng.dirichlet(np.ones(len(supply)))
        theta[supply] = w * net.demand.sum()
        if np.any(theta > net.supply_max):
            continue
        ref = net.node_index(problem.reference_node)
        anchor = rng.uniform(net.pressure_min[ref], net.pressure_max[ref])
        try:
            s = newton_restore(net, theta, problem.reference_node, reference_pressure=anchor)
        except RestorationError:
            continue
        if residuals(net, s).bound_violation_inf <= 0:
            out.append(s)
    return out


ACCEPTANCE: list[str] = []


def record(criterion, ok, detail):
    """Log one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  [{criterion}] {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
