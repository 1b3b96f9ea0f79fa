"""Export a planning MILP, solve it with HiGHS (via scipy), read the answer back.

Run: python demos/05_mps_roundtrip.py
"""

import tempfile
from pathlib import Path

import numpy as np
from scipy.optimize import milp

from gasplan import load_problem, train_nets
from gasplan.formulation import extract_solution
from gasplan.network import bundled
from gasplan.pipeline import build_model
from gasplan.physics import restore_and_score
from gasplan.solver import export_mps, import_solution, solve_mip, write_solution

problem = load_problem(bundled("tree3.json"))
model = build_model(problem, "icnn", train_nets(problem))
ours = solve_mip(model)

with tempfile.TemporaryDirectory() as tmp:
    path = export_mps(model, Path(tmp) / "tree3.mps")
    print(path.read_text().splitlines()[0], f"({model.num_vars} columns, {model.num_rows} rows)")

    # HiGHS gets the same matrix; the file is what another solver would read.
    A, c = model.matrix(), model.objective_vector()
    senses = np.array([r.sense for r in model.rows])
    rhs = np.array([r.rhs for r in model.rows])
    lo = np.where(senses == "L", -np.inf, rhs)
    hi = np.where(senses == "G", np.inf, rhs)
    kinds = np.array([k != "continuous" for k in model.kinds], dtype=int)
    res = milp(c, constraints=(A, lo, hi), bounds=(model.lb, model.ub), integrality=kinds)

    sol_file = Path(tmp) / "highs.sol"
    write_solution(model, res.x, sol_file)
    x = import_solution(model, sol_file)

print(f"in-house objective {ours.objective:.4f}, HiGHS {model.objective_value(x):.4f}")
_, score = restore_and_score(problem.network, problem, extract_solution(model, x))
print(f"HiGHS point after restoration: weymouth residual {score.weymouth_residual_inf:.1e}")
