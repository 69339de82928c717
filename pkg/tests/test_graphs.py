import numpy as np
import pytest

import netconsist as nc


def two_arm_network(pairs, reference="A", se=0.1):
    rows = [{"study": f"s{i:02d}", "t1": a, "t2": b, "y": 0.1, "se": se}
            for i, (a, b) in enumerate(pairs, start=1)]
    return nc.load_network(rows, reference=reference)


def test_triangle_has_no_bridges(triangle_network):
    graph = nc.comparison_graph(triangle_network)
    assert nc.find_bridges(graph) == set()


def test_path_edges_are_all_bridges():
    net = two_arm_network([("A", "B"), ("B", "C")])
    graph = nc.comparison_graph(net)
    assert nc.find_bridges(graph) == {(0, 1), (1, 2)}


def test_pendant_edge_is_the_only_bridge():
    net = two_arm_network([("A", "B"), ("A", "C"), ("B", "C"), ("C", "D")])
    graph = nc.comparison_graph(net)
    assert nc.find_bridges(graph) == {(2, 3)}


def test_edge_multiplicity_counts_studies(triangle_network):
    graph = nc.comparison_graph(triangle_network)
    assert all(count == 4 for count, _ in graph.edges.values())


def test_multiarm_design_contributes_all_pairs():
    rows = [
        {"study": "m1", "t1": "A", "t2": "B", "y": 0.1, "se": 1.0},
        {"study": "m1", "t1": "A", "t2": "C", "y": 0.1, "se": 1.0},
    ]
    net = nc.load_network(rows, [{"study": "m1", "row": 1, "col": 2, "cov": 0.5}])
    graph = nc.comparison_graph(net)
    assert set(graph.edges) == {(0, 1), (0, 2), (1, 2)}


def test_loop_count_matches_cycle_space(triangle_network, k4_network):
    for net, expected in ((triangle_network, 1), (k4_network, 3)):
        graph = nc.comparison_graph(net)
        loops = nc.independent_loops(graph)
        assert len(loops) == expected
        assert len(loops) == graph.n_edges - len(graph.nodes) + 1


def test_two_triangles_sharing_an_edge():
    net = two_arm_network([("A", "B"), ("A", "C"), ("B", "C"), ("B", "D"), ("A", "D")])
    graph = nc.comparison_graph(net)
    loops = nc.independent_loops(graph)
    assert len(loops) == 2


def test_loops_are_simple_cycles(k4_network):
    graph = nc.comparison_graph(k4_network)
    loops = nc.independent_loops(graph)
    edge_set = set(graph.edges)
    for loop in loops.loops:
        assert len(set(loop)) == len(loop)
        k = len(loop)
        for i in range(k):
            e = tuple(sorted((loop[i], loop[(i + 1) % k])))
            assert e in edge_set


def test_tree_network_has_no_loops():
    net = two_arm_network([("A", "B"), ("B", "C"), ("C", "D")])
    loops = nc.independent_loops(nc.comparison_graph(net))
    assert len(loops) == 0


def test_lu_ades_triangle(triangle_network):
    spec = nc.place_lu_ades(triangle_network)
    assert spec.p == 1
    assert spec.factors[0].pair == ("B", "C")
    rows = [(s.id, c.t1, c.t2) for s, c in triangle_network.observations()]
    nz = np.nonzero(spec.Z[:, 0])[0]
    assert all(rows[i][1:] == ("B", "C") for i in nz)


def test_single_multiarm_study_is_consistent_by_construction():
    rows = [
        {"study": "m1", "t1": "A", "t2": "B", "y": 0.1, "se": 1.0},
        {"study": "m1", "t1": "A", "t2": "C", "y": 0.2, "se": 1.0},
    ]
    net = nc.load_network(rows, [{"study": "m1", "row": 1, "col": 2, "cov": 0.5}])
    spec = nc.place_lu_ades(net)
    assert spec.p == 0


def test_lu_ades_skips_multiarm_only_comparisons_via_fallback():
    # the B-C evidence lives only in the ABC design; the loop factor falls back
    # to a comparison with independent evidence, here none remain besides B-C
    rows = [
        {"study": "m1", "t1": "A", "t2": "B", "y": 0.1, "se": 1.0},
        {"study": "m1", "t1": "A", "t2": "C", "y": 0.2, "se": 1.0},
        {"study": "m2", "t1": "A", "t2": "B", "y": 0.1, "se": 1.0},
        {"study": "m2", "t1": "A", "t2": "C", "y": 0.2, "se": 1.0},
    ]
    cov = [{"study": "m1", "row": 1, "col": 2, "cov": 0.5},
           {"study": "m2", "row": 1, "col": 2, "cov": 0.5}]
    net = nc.load_network(rows, cov)
    spec = nc.place_lu_ades(net)
    assert spec.p == 0  # B-C only ever appears inside the single ABC design


def test_lu_ades_factor_rows_prefer_two_arm_studies():
    # ABC 3-arm plus two-arm AB, AC and BC studies: the loop factor sits on
    # B-C and only the two-arm B-C row carries it
    rows = [
        {"study": "m1", "t1": "A", "t2": "B", "y": 0.1, "se": 1.0},
        {"study": "m1", "t1": "B", "t2": "C", "y": 0.2, "se": 1.0},
        {"study": "t1", "t1": "A", "t2": "B", "y": 0.1, "se": 1.0},
        {"study": "t2", "t1": "A", "t2": "C", "y": 0.1, "se": 1.0},
        {"study": "t3", "t1": "B", "t2": "C", "y": 0.1, "se": 1.0},
    ]
    cov = [{"study": "m1", "row": 1, "col": 2, "cov": -0.5}]
    net = nc.load_network(rows, cov)
    spec = nc.place_lu_ades(net)
    assert spec.p == 1
    assert spec.factors[0].pair == ("B", "C")
    labels = [f"{s.id}:{c.t1}-{c.t2}" for s, c in net.observations()]
    nz = [labels[i] for i in np.nonzero(spec.Z[:, 0])[0]]
    assert nz == ["t3:B-C"]


def test_dbt_triangle_collapses_to_lu_ades(triangle_network):
    la = nc.place_lu_ades(triangle_network)
    dbt = nc.place_design_by_treatment(triangle_network)
    assert dbt.p == la.p == 1
    assert np.array_equal(la.Z, dbt.Z)


def test_k4_two_arm_counts(k4_network):
    assert nc.place_lu_ades(k4_network).p == 3
    assert nc.place_design_by_treatment(k4_network).p == 3


def test_jackson_refuses_two_arm_only(triangle_network):
    with pytest.raises(ValueError, match="design-by-treatment"):
        nc.place_jackson(triangle_network)


def test_jackson_single_design_has_no_factors():
    rows = [
        {"study": "m1", "t1": "A", "t2": "B", "y": 0.1, "se": 1.0},
        {"study": "m1", "t1": "A", "t2": "C", "y": 0.2, "se": 1.0},
    ]
    net = nc.load_network(rows, [{"study": "m1", "row": 1, "col": 2, "cov": 0.5}])
    spec = nc.place_jackson(net)
    assert spec.p == 0


def _jackson_design_enumeration(network):
    # designs (canonical order) whose anchored directions are partly covered
    # by earlier designs; independent recount of the placement rule
    idx = {t.id: t.index for t in network.treatments}
    designs = sorted({s.design for s in network.studies},
                     key=lambda d: tuple(idx[t] for t in d))
    seen_rows = []

    def in_span(v):
        if not seen_rows:
            return False
        M = np.vstack(seen_rows)
        res = v - M.T @ np.linalg.lstsq(M.T, v, rcond=None)[0]
        return np.linalg.norm(res) < 1e-9

    flagged = []
    for design in designs:
        vs = []
        for other in design[1:]:
            v = np.zeros(network.n_treatments - 1)
            if idx[other] != 0:
                v[idx[other] - 1] += 1
            if idx[design[0]] != 0:
                v[idx[design[0]] - 1] -= 1
            vs.append(v)
        if any(in_span(v) for v in vs):
            flagged.append(design)
        for v in vs:
            if not in_span(v):
                seen_rows.append(v)
    return flagged


def test_jackson_smoking_count_matches_enumeration(smoking_network):
    spec = nc.place_jackson(smoking_network)
    flagged = _jackson_design_enumeration(smoking_network)
    assert spec.p == len(flagged) == 6
    assert 3 <= spec.p <= 7


def test_smoking_placement_counts(smoking_network):
    assert nc.place_lu_ades(smoking_network).p == 3
    assert nc.place_design_by_treatment(smoking_network).p == 7


def test_rank_invariant_on_all_fixtures(triangle_network, k4_network, smoking_network):
    for net in (triangle_network, k4_network, smoking_network):
        X = nc.build_design_matrix(net).entries
        for method in ("lu-ades", "dbt", "jackson"):
            if method == "jackson" and all(s.n_arms == 2 for s in net.studies):
                continue
            spec = nc.place_factors(net, method)
            stacked = np.hstack([X, spec.Z])
            assert np.linalg.matrix_rank(stacked) == X.shape[1] + spec.p
            if spec.p:
                assert np.abs(spec.Z).sum(axis=0).min() > 0  # no empty column


def test_lu_ades_p_matches_loop_count_after_exclusions(k4_network, smoking_network):
    for net in (k4_network, smoking_network):
        graph = nc.comparison_graph(net)
        loops = nc.independent_loops(graph)
        assert nc.place_lu_ades(net).p == len(loops)


def test_bridge_studies_do_not_change_lu_ades_p():
    core = [("A", "B"), ("A", "C"), ("B", "C")]
    with_pendant = core + [("C", "D")]
    p_core = nc.place_lu_ades(two_arm_network(core)).p
    p_pendant = nc.place_lu_ades(two_arm_network(with_pendant)).p
    assert p_core == p_pendant == 1


def test_placement_is_deterministic(smoking_network):
    for method in ("lu-ades", "dbt", "jackson"):
        a = nc.place_factors(smoking_network, method)
        b = nc.place_factors(smoking_network, method)
        assert a.labels == b.labels
        assert np.array_equal(a.Z, b.Z)
        assert nc.z_dump(a, smoking_network) == nc.z_dump(b, smoking_network)


def test_unknown_method_rejected(triangle_network):
    with pytest.raises(ValueError, match="unknown placement method"):
        nc.place_factors(triangle_network, "nope")


def test_z_dump_golden(smoking_network):
    import os
    golden = os.path.join(os.path.dirname(__file__), "golden", "smoking_Z_lu_ades.txt")
    produced = nc.z_dump(nc.place_lu_ades(smoking_network), smoking_network)
    with open(golden) as fh:
        assert produced == fh.read()
