import json
import math

import numpy as np
import pytest

from cloudmarket.formats import (
    DAG_SCHEMA,
    WORKLOAD_SCHEMA,
    FormatError,
    auction_from_doc,
    dag_from_doc,
    dag_to_doc,
    dumps,
    parse_document,
    rounded,
    scenario_from_doc,
    workload_from_doc,
    workload_to_doc,
    write_csv,
)
from cloudmarket.simulator import generate_synthetic_dag, generate_synthetic_workload
from cloudmarket.formats import Workload


def test_workload_round_trip():
    w = Workload(generate_synthetic_workload(9, 3), {"alpha": 1, "beta": 2})
    text = json.dumps(workload_to_doc(w))
    back = workload_from_doc(parse_document(text, WORKLOAD_SCHEMA))
    assert back.utility_doc == w.utility_doc
    for a, b in zip(w.tasks, back.tasks):
        assert a.id == b.id and a.targets == b.targets and a.intensity == b.intensity
        for ca, cb in zip(a.configs, b.configs):
            assert ca.id == cb.id and ca.rate == cb.rate and ca.tags == cb.tags
            for name in ("lo", "hi", "masses"):
                np.testing.assert_allclose(getattr(ca.histogram, name), getattr(cb.histogram, name),
                                           rtol=0, atol=1e-12)


def test_dag_round_trip():
    g = generate_synthetic_dag(2, 15, edge_density=0.2)
    back, utility, demand = dag_from_doc(parse_document(json.dumps(dag_to_doc(g)), DAG_SCHEMA))
    assert back.nodes == g.nodes and back.edges == g.edges and back.options == g.options
    assert utility == (1.0, 1.0) and (demand.gamma, demand.lam) == (100.0, 0.01)


def test_histogram_forms_agree():
    def task(hist):
        return {"tasks": [{"id": "t", "targets": [0, 3, None],
                           "configurations": [{"id": "c", "rate": 1, "histogram": hist}]}]}
    a = workload_from_doc(task({"lo": [1, 2], "hi": [2, 4], "masses": [0.25, 0.75]})).tasks[0].configs[0].histogram
    b = workload_from_doc(task({"edges": [1, 2, 4], "masses": [0.25, 0.75]})).tasks[0].configs[0].histogram
    np.testing.assert_allclose(a.masses, b.masses)
    c = workload_from_doc(task({"times": [2.5], "masses": [1]})).tasks[0].configs[0].histogram
    assert c.mean() == 2.5
    d = workload_from_doc(task({"gaussian": {"mean": 20, "std": 1}})).tasks[0].configs[0].histogram
    assert d.mean() == pytest.approx(20, abs=0.05)


def test_malformed_json_reports_line_and_column():
    with pytest.raises(FormatError, match=r"^f\.json:3:"):
        parse_document('{\n  "tasks": [\n  ,]\n}', WORKLOAD_SCHEMA, "f.json")


def test_schema_errors_point_at_the_offending_value():
    text = '{\n  "nodes": [\n    {"id": "a", "options": [[1, 2]]},\n    {"id": "b", "options": [[1, -2]]}\n  ]\n}'
    with pytest.raises(FormatError) as info:
        parse_document(text, DAG_SCHEMA, "g.json")
    msg = str(info.value)
    assert msg.startswith("g.json:4:")
    assert ".nodes[1].options[0][1]" in msg


def test_semantic_errors_carry_the_source():
    doc = {"nodes": [{"id": "a", "options": [[1, 1]]}], "edges": [["a", "zz"]]}
    with pytest.raises(FormatError, match="^d.json"):
        dag_from_doc(doc, "d.json")
    bad_scenario = {"seed": 1, "synthetic": {"n_tasks": 2}, "agents": [{"name": "n", "kind": "naive"}]}
    with pytest.raises(FormatError):
        scenario_from_doc(bad_scenario)


def test_scenario_seed_override():
    doc = {"seed": 1, "synthetic": {"n_tasks": 2}, "agents": [{"name": "e", "kind": "expert"}]}
    assert scenario_from_doc(doc).seed == 1
    assert scenario_from_doc(doc, seed=5).seed == 5
    assert scenario_from_doc(doc).tasks[0].targets != scenario_from_doc(doc, seed=5).tasks[0].targets


def test_auction_document():
    doc = {"targets": [0, None], "bids": [
        {"agent": "a", "probs": [1], "expected_times": [2], "prices": {"intercepts": [3], "slopes": [0.5]}},
        {"agent": "b", "probs": [1], "expected_times": [1], "prices": [4], "true_costs": [3]}]}
    bids, alpha, beta = auction_from_doc(doc)
    assert (alpha, beta) == (1.0, 1.0)
    assert bids[0].contract.quoted_prices()[0] == 2.0
    assert bids[1].true_stats.c[0] == 3


def test_output_helpers():
    assert rounded({"x": [1 / 3, math.inf], "y": np.float64(2.0)}) == {"x": [0.333333333333, None], "y": 2.0}
    assert json.loads(dumps({"a": np.array([0.1, 0.2])})) == {"a": [0.1, 0.2]}
    text = write_csv([{"a": 0.1 + 0.2, "b": None, "c": "x,y"}], ("a", "b", "c"))
    assert text == 'a,b,c\r\n0.3,,"x,y"\r\n'
