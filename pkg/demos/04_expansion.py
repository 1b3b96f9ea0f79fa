"""Let pipe diameters grow, at a price per millimetre, under emission caps.

Run: python demos/04_expansion.py
"""

import math

from gasplan import load_problem, run_plan, train_nets
from gasplan.network import bundled
from gasplan.pipeline import format_table

problem = load_problem(bundled("toy7.json")).with_mode("expansion")
nets = train_nets(problem)  # scalar pair plus the (flow, diameter) pair

reports = [run_plan(problem.with_cap(cap), "icnn", nets) for cap in (math.inf, 30.0, 18.5)]
print(format_table(reports))
for r in reports:
    widened = {p.id: round(d, 1) for p, d in zip(problem.network.pipelines, r.expansion["diameters"])
               if d > p.diameter + 1e-6}
    print(f"cap {r.emission_cap:g}: widened {widened or 'nothing'}")
