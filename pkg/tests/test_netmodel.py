import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasplan.network import (
    NetworkError,
    bundled,
    incidence_matrix,
    load_network,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    save_problem,
    validate,
)


def _doc(name):
    return json.loads(bundled(name).read_text())


def _write(tmp_path, doc, name="net.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_toy7_loads_with_seven_nodes_and_eight_pipes():
    net = load_network(bundled("toy7.json"))
    assert (net.n, net.ell) == (7, 8)


def test_two_node_file_loads():
    net = load_network(bundled("two_node.json"))
    assert (net.n, net.ell) == (2, 1)


def test_unknown_endpoint_is_named(tmp_path):
    doc = _doc("toy7.json")
    doc["pipelines"][0]["to"] = "X"
    with pytest.raises(NetworkError, match="'X'"):
        load_network(_write(tmp_path, doc))


def test_malformed_file_is_a_parse_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{ nodes: ")
    with pytest.raises(NetworkError, match="malformed"):
        load_network(path)


def test_unknown_keys_are_rejected(tmp_path):
    doc = _doc("two_node.json")
    doc["nodes"][0]["colour"] = "red"
    with pytest.raises(NetworkError, match="colour"):
        load_network(_write(tmp_path, doc))
    doc = _doc("two_node.json")
    doc["extra"] = 1
    with pytest.raises(NetworkError, match="extra"):
        load_network(_write(tmp_path, doc))


def test_foreign_units_are_rejected_not_converted(tmp_path):
    doc = _doc("two_node.json")
    doc["units"]["pressure"] = "bar"
    with pytest.raises(NetworkError, match="units.pressure"):
        load_network(_write(tmp_path, doc))


def test_incidence_two_nodes():
    A = incidence_matrix(load_network(bundled("two_node.json")))
    assert A.tolist() == [[1.0], [-1.0]]


def test_incidence_three_node_path():
    doc = _doc("tree3.json")
    doc["pipelines"][1]["from"], doc["pipelines"][1]["to"] = "b", "c"
    A = incidence_matrix(problem_from_dict(doc).network)
    assert A.tolist() == [[1, 0], [-1, 1], [0, -1]]


def test_incidence_columns_of_toy7():
    A = incidence_matrix(load_network(bundled("toy7.json")))
    assert np.all(A.sum(axis=0) == 0)
    assert np.all((A == 1).sum(axis=0) == 1) and np.all((A == -1).sum(axis=0) == 1)


def test_incidence_is_deterministic():
    net = load_network(bundled("toy7.json"))
    assert np.array_equal(incidence_matrix(net), incidence_matrix(net))


def test_valid_toy7_has_empty_report():
    assert validate(load_problem(bundled("toy7.json"))) == []


def test_zero_diameter_lower_bound_reported():
    doc = _doc("two_node.json")
    doc["pipelines"][0]["diameter_min"] = 0.0
    report = validate(problem_from_dict(doc))
    assert "diameter lower bound must be positive" in " ".join(report)


def test_disconnected_network_reported():
    doc = _doc("two_node.json")
    doc["nodes"] += [dict(doc["nodes"][1], id="n3"), dict(doc["nodes"][1], id="n4")]
    doc["pipelines"].append(dict(doc["pipelines"][0], id="p2", **{"from": "n3", "to": "n4"}))
    assert "graph not connected" in validate(problem_from_dict(doc))


def test_demand_above_supply_reported():
    doc = _doc("two_node.json")
    doc["nodes"][1]["demand"] = 50.0
    assert any("exceeds total supply" in e for e in validate(problem_from_dict(doc)))


def test_report_lists_every_violation():
    doc = _doc("two_node.json")
    doc["nodes"][0]["carbon_intensity"] = -1.0
    doc["nodes"][1]["pressure_min"] = 30.0
    doc["pipelines"][0]["flow_min"] = 1.0
    report = validate(problem_from_dict(doc))
    assert len(report) == 3


def test_friction_consistency_checked():
    doc = _doc("two_node.json")
    doc["pipelines"][0]["friction"] = 1.5
    assert any("friction_per_diameter" in e for e in validate(problem_from_dict(doc)))


def test_roundtrip(tmp_path):
    problem = load_problem(bundled("toy7.json"))
    path = tmp_path / "copy.json"
    save_problem(problem, path)
    assert load_problem(path) == problem
    assert problem_to_dict(load_problem(path)) == problem_to_dict(problem)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=9), st.randoms(use_true_random=False))
def test_random_tree_incidence(n, rnd):
    doc = _doc("two_node.json")
    node = doc["nodes"][1]
    doc["nodes"] = [dict(node, id=f"v{i}") for i in range(n)]
    pipe = doc["pipelines"][0]
    doc["pipelines"] = []
    for i in range(1, n):
        j = rnd.randrange(i)
        a, b = (f"v{i}", f"v{j}") if rnd.random() < 0.5 else (f"v{j}", f"v{i}")
        doc["pipelines"].append(dict(pipe, id=f"e{i}", **{"from": a, "to": b}))
    doc["reference_node"] = "v0"
    net = problem_from_dict(doc).network
    A = incidence_matrix(net)
    assert np.all(A.sum(axis=0) == 0)
    assert np.linalg.matrix_rank(A) == n - 1
