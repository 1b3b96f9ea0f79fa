import math

from gasplan.pipeline import RunReport, dominance, format_table


def _report(form, cost, bound=0.0, restored=True):
    return RunReport(form, "operational", 20.0, "optimal", mip_objective=cost, restored=restored,
                     restored_cost=cost if restored else None, bound_violation=bound,
                     mass_balance_residual=0.0, weymouth_residual=0.0)


def test_dominance_holds_within_tolerance():
    v = dominance(_report("icnn", 100.0 + 5e-7), _report("miqp", 100.0))
    assert v["holds"] is True


def test_dominance_exception_is_flagged_with_bound_note():
    v = dominance(_report("icnn", 110.0), _report("miqp", 100.0, bound=12.5))
    assert v["holds"] is False
    assert "exception" in v["note"] and "12.5" in v["note"]


def test_dominance_needs_both_restorations():
    assert dominance(_report("icnn", 1.0), _report("miqp", 1.0, restored=False))["holds"] is None


def test_table_shows_dash_for_missing_and_inf_cap():
    r = RunReport("miqp", "operational", math.inf, "infeasible")
    lines = format_table([r]).splitlines()
    assert len(lines) == 3 and " inf " in lines[2] and " - " in lines[2]
