import json
import math

import numpy as np
import pytest

from gasplan.formulation import (
    BuildOptions,
    FormulationError,
    PipeSurrogate,
    assignment_from_state,
    build_icnn_expansion,
    build_icnn_operational,
    build_miqp_relaxation,
    compute_big_m,
    envelope_model,
    extract_solution,
)
from gasplan.icnn import Hyperplane, screen_supporting
from gasplan.network import bundled, problem_from_dict
from gasplan.pipeline import build_model, surrogates_for
from gasplan.solver import BnbConfig, solve_mip

from conftest import newton_states, solve_quiet


def _lines(*mc):
    return [Hyperplane(np.array([float(m)]), float(c)) for m, c in mc]


def _env(planes, orientation, lo, hi):
    return screen_supporting(planes, orientation, [lo], [hi])


def test_big_m_examples():
    assert compute_big_m(_env(_lines((1, 0), (2, -1)), "convex", 0, 2), [0], [2]) == pytest.approx(1.0)
    assert compute_big_m(_env(_lines((3, 1)), "convex", 0, 2), [0], [2]) == 0.0
    assert compute_big_m(_env(_lines((1, 0), (-1, 0)), "convex", -1, 1), [-1], [1]) == pytest.approx(2.0)


def test_big_m_needs_bounded_box():
    env = _env(_lines((1, 0), (2, -1)), "convex", 0, 2)
    with pytest.raises(FormulationError):
        compute_big_m(env, [-np.inf], [2])


def test_build_options_validate():
    with pytest.raises(ValueError):
        BuildOptions(tangent_cut_count=1)
    with pytest.raises(ValueError):
        BuildOptions(formulation="sdp")


def _single_pipe_problem(demand=2.0):
    doc = json.loads(bundled("two_node.json").read_text())
    doc["nodes"][1]["demand"] = demand
    doc["nodes"][0]["pressure_max"] = doc["nodes"][1]["pressure_max"] = 100.0
    return problem_from_dict(doc)


def test_fixed_flow_pins_t_and_active_plane():
    problem = _single_pipe_problem(2.0)
    convex = _env(_lines((1, 0), (2, -1)), "convex", -10, 10)
    concave = _env(_lines((0, 0)), "concave", -10, 10)
    model = build_icnn_operational(problem, {"p1": PipeSurrogate(convex, concave)})
    sol = solve_mip(model)
    assert sol.status == "optimal"
    t = sol.x[model.annotations["t_plus"][0]]
    mu = sol.x[model.annotations["mu_plus/p1"]]
    assert sol.x[model.annotations["phi"][0]] == pytest.approx(2.0)
    assert t == pytest.approx(3.0, abs=1e-9)
    order = np.argsort(model.meta["planes"]["plus/p1"].planes.slopes[:, 0])
    assert mu[order].tolist() == pytest.approx([0.0, 1.0])


def test_emission_cap_row_at_equality():
    doc = json.loads(bundled("two_node.json").read_text())
    doc["nodes"][0]["carbon_intensity"] = 1.0
    doc["nodes"][1].update(carbon_intensity=2.0, supply_max=10.0, demand=7.0)
    problem = problem_from_dict(doc).with_cap(11.0)
    model = build_miqp_relaxation(problem)
    row = next(r for r in model.rows if r.name == "emission_cap")
    x = np.zeros(model.num_vars)
    x[model.annotations["theta"]] = [3.0, 4.0]
    assert row.coef @ x[row.index] == pytest.approx(row.rhs)
    assert row.sense == "L" and row.rhs == 11.0


def test_infinite_cap_adds_no_row(toy7):
    assert not any(r.name == "emission_cap" for r in build_miqp_relaxation(toy7).rows)


def test_toy7_binary_count(toy7, toy7_nets):
    model = build_model(toy7, "icnn", toy7_nets)
    planes = model.meta["planes"]
    expected = sum(len(planes[f"{s}/{p.id}"]) for p in toy7.network.pipelines for s in ("plus", "minus"))
    assert len(model.binaries) == expected
    assert all(model.lb[k] == 0 and model.ub[k] == 1 for k in model.binaries)


def test_missing_surrogate(toy7):
    with pytest.raises(FormulationError, match="p1"):
        build_icnn_operational(toy7, {})


def test_narrow_envelope_rejected(toy7, toy7_nets):
    sur = surrogates_for(toy7, toy7_nets, False)
    narrow = _env(_lines((1, 0), (2, -1)), "convex", -1, 1)
    sur["p3"] = PipeSurrogate(narrow, sur["p3"].concave)
    with pytest.raises(FormulationError, match="p3"):
        build_icnn_operational(toy7, sur)


def _kkt_check(env, lo, hi, flows):
    """Fix x and minimise / maximise t: both must equal the envelope value."""
    model = envelope_model(env, [lo], [hi])
    t = int(model.annotations["t"][0])
    mu = model.annotations["mu"]
    worst = 0.0
    for phi in flows:
        for sign in (1.0, -1.0):
            m = model.copy()
            m.fix(int(model.annotations["x"][0]), phi)
            m.set_objective({t: sign})
            sol = solve_mip(m)
            assert sol.status == "optimal"
            worst = max(worst, abs(sol.x[t] - env(np.array([phi]))))
            chosen = sol.x[mu]
            assert np.sum(np.round(chosen)) == 1
            k = int(np.argmax(chosen))
            assert abs(env.planes[k](np.array([phi])) - sol.x[t]) <= 1e-6
    return worst


def test_kkt_block_equivalence(toy7, toy7_nets):
    sur = surrogates_for(toy7, toy7_nets, False)["p1"]
    rng = np.random.default_rng(0)
    flows = rng.uniform(-15, 15, size=25)
    for env in (sur.convex, sur.concave):
        assert _kkt_check(env, -15.0, 15.0, flows) <= 1e-6


def test_kkt_block_without_cell_links_is_still_exact(toy7, toy7_nets):
    env = surrogates_for(toy7, toy7_nets, False)["p1"].convex
    model = envelope_model(env, [-15], [15], cell_links=False)
    assert not any(r.name.startswith("cell_") for r in model.rows)
    t = int(model.annotations["t"][0])
    for phi in (-12.0, 0.3, 7.7):
        for sign in (1.0, -1.0):
            m = model.copy()
            m.fix(0, phi)
            m.set_objective({t: sign})
            assert solve_mip(m).x[t] == pytest.approx(env(np.array([phi])), abs=1e-6)


def test_miqp_direction_binary_switches_products(toy7):
    model = build_miqp_relaxation(toy7)
    x = int(model.annotations["x"][0])
    z = int(model.annotations["z_from"][0])
    pi = int(model.annotations["pi"][0])
    for xv in (0.0, 1.0):
        for sign in (1.0, -1.0):
            m = model.copy()
            m.fix(x, xv)
            m.set_objective({z: sign, pi: -sign * xv})
            sol = solve_mip(m)
            assert sol.status == "optimal"
            assert sol.x[z] == pytest.approx(xv * sol.x[pi], abs=1e-7)


def test_miqp_rejects_expansion(toy7):
    with pytest.raises(FormulationError, match="relaxation"):
        build_miqp_relaxation(toy7.with_mode("expansion"))


def test_miqp_rejects_one_cut(toy7):
    with pytest.raises(FormulationError):
        build_miqp_relaxation(toy7, 1)


def test_tangent_cuts_are_sound_on_exact_states(toy7):
    model = build_miqp_relaxation(toy7)
    states = newton_states(toy7, 30)
    for s in states:
        x = assignment_from_state(model, toy7, s)
        v = model.violations(x)
        assert max(v["rows"], v["bounds"]) <= 1e-8, v


def test_nested_tangent_counts_tighten(toy7):
    previous = -math.inf
    for k in (2, 3, 5, 9, 17):
        sol = solve_mip(build_miqp_relaxation(toy7.with_cap(30.0), k))
        assert sol.status == "optimal"
        assert sol.objective >= previous - 1e-7
        previous = sol.objective


def test_extract_roundtrip(toy7, toy7_nets):
    model = build_model(toy7, "icnn", toy7_nets)
    s = newton_states(toy7, 1, seed=4)[0]
    x = assignment_from_state(model, toy7, s)
    back = extract_solution(model, x)
    assert np.array_equal(back.flows, s.flows) and np.array_equal(back.squared_pressures, s.squared_pressures)
    with pytest.raises(FormulationError):
        extract_solution(model, x[:-1])
    broken = model.copy()
    del broken.annotations["phi"]
    with pytest.raises(FormulationError):
        extract_solution(broken, x)


def test_toy7_icnn_solution_restores(toy7, toy7_nets):
    from gasplan.physics import restore_and_score

    model = build_model(toy7.with_cap(30.0), "icnn", toy7_nets)
    sol = solve_mip(model)
    assert sol.status == "optimal"
    _, report = restore_and_score(toy7.network, toy7, extract_solution(model, sol.x))
    assert report.weymouth_residual_inf <= 1e-6 and report.mass_balance_residual_inf <= 1e-6


# ---------------------------------------------------------------- expansion

def _fixed_diameter(problem):
    doc = json.loads(bundled("tree3.json").read_text())
    for p in doc["pipelines"]:
        p["diameter_max"] = p["diameter_min"] = p["diameter"]
    return problem_from_dict(doc)


def test_expansion_with_fixed_diameters_matches_operational(tree3, tree3_exp_nets):
    fixed = _fixed_diameter(tree3)
    op = solve_quiet(build_model(fixed, "icnn", tree3_exp_nets))
    ex_model = build_model(fixed.with_mode("expansion"), "icnn", tree3_exp_nets)
    ex = solve_quiet(ex_model)
    shift = float(fixed.network.expansion_cost @ fixed.network.diameter)
    assert op.status == ex.status == "optimal"
    assert ex.objective - shift == pytest.approx(op.objective, rel=0.02)
    d = ex.x[ex_model.annotations["d"]]
    assert np.allclose(d, fixed.network.diameter)


def test_free_diameter_goes_to_the_relaxing_bound(tree3, tree3_exp_nets):
    doc = json.loads(bundled("tree3.json").read_text())
    for p in doc["pipelines"]:
        p["expansion_cost"] = 0.0
    # even the widest pipe cannot carry the whole demand from the cheap end
    doc["nodes"][1]["demand"] = 9.0
    problem = problem_from_dict(doc).with_mode("expansion")
    model = build_model(problem, "icnn", tree3_exp_nets)
    sol = solve_quiet(model)
    assert sol.status == "optimal"
    # the cheap supplier's pipe is pressure-limited: widening it always pays
    assert sol.x[model.annotations["d"][0]] == pytest.approx(900.0, abs=1e-6)


def test_expansion_needs_dyn_surrogates(tree3, tree3_nets):
    with pytest.raises(FormulationError, match="dyn"):
        build_model(tree3.with_mode("expansion"), "icnn", tree3_nets)
    with pytest.raises(FormulationError):
        build_icnn_expansion(tree3, {})
