"""Sweep emission caps on the seven-node network with both formulations.

Takes a few minutes on one core: the uncapped ICNN model explores several
thousand branch-and-bound nodes.

Run: python demos/03_emission_caps.py
"""

import math

from gasplan import load_problem, minimum_emission, run_plan, train_nets
from gasplan.network import bundled
from gasplan.pipeline import dominance, format_table

problem = load_problem(bundled("toy7.json"))
nets = train_nets(problem)

floor = minimum_emission(problem, "icnn", nets)
print(f"lowest emission any dispatch can reach: {floor:.2f} kt")

reports = []
for cap in (math.inf, 30.0, floor + 0.5):
    pair = {form: run_plan(problem.with_cap(cap), form, nets if form == "icnn" else None)
            for form in ("icnn", "miqp")}
    reports += pair.values()
    print(f"cap {cap:g}: {dominance(pair['icnn'], pair['miqp'])['note']}")

print()
print(format_table(reports))
# A "bound viol" above zero means the relaxation's pressures could not be
# kept inside their limits once the exact flow law was restored.
