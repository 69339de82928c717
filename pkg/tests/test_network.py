import numpy as np
import pytest

import netconsist as nc


def test_minimal_two_study_network():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": 0.1},
        {"study": "s2", "t1": "A", "t2": "C", "y": 0.1, "se": 0.2},
    ]
    net = nc.load_network(rows, reference="A")
    assert net.n_treatments == 3
    assert net.n_contrasts == 2
    assert net.treatment_ids == ("A", "B", "C")


def test_three_arm_study_builds_pd_block():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": 1.0},
        {"study": "s1", "t1": "A", "t2": "C", "y": 0.1, "se": 1.0},
    ]
    cov = [{"study": "s1", "row": 1, "col": 2, "cov": 0.5}]
    net = nc.load_network(rows, cov, reference="A")
    block = net.sigma.blocks[0]
    assert block.shape == (2, 2)
    assert np.allclose(block, [[1.0, 0.5], [0.5, 1.0]])
    assert np.all(np.linalg.eigvalsh(block) > 0)


def _arm_variance_oracle(arm_vars, pairs):
    # covariance of contrasts x_t2 - x_t1 over independent arms: L diag(v) L'
    arms = sorted(arm_vars)
    L = np.zeros((len(pairs), len(arms)))
    for i, (t1, t2) in enumerate(pairs):
        L[i, arms.index(t2)] += 1.0
        L[i, arms.index(t1)] -= 1.0
    return L @ np.diag([arm_vars[t] for t in arms]) @ L.T


@pytest.mark.parametrize("arm_vars, expected", [
    ({"A": 1.0, "B": 1.0, "C": 1.0}, [[2.0, 1.0], [1.0, 2.0]]),
    ({"A": 4.0, "B": 1.0, "C": 1.0}, [[5.0, 4.0], [4.0, 5.0]]),
    ({"A": 1.0, "B": 2.0, "C": 3.0}, [[3.0, 1.0], [1.0, 4.0]]),
])
def test_multiarm_covariance_matches_variance_algebra(arm_vars, expected):
    ses = {t: np.sqrt(v) for t, v in arm_vars.items()}
    block = nc.multiarm_covariance(ses, anchor="A")
    oracle = _arm_variance_oracle(arm_vars, [("A", "B"), ("A", "C")])
    assert np.allclose(block, oracle)
    assert np.allclose(block, expected)


def test_multiarm_covariance_rejects_bad_input():
    with pytest.raises(ValueError):
        nc.multiarm_covariance({"A": 1.0, "B": 1.0}, anchor="A")
    with pytest.raises(ValueError):
        nc.multiarm_covariance({"A": 1.0, "B": 1.0, "C": 1.0}, anchor="Z")
    with pytest.raises(ValueError):
        nc.multiarm_covariance({"A": 1.0, "B": -1.0, "C": 1.0}, anchor="A")


def test_arm_level_fallback_builds_block():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": np.sqrt(2.0)},
        {"study": "s1", "t1": "A", "t2": "C", "y": 0.1, "se": np.sqrt(2.0)},
    ]
    arms = [{"study": "s1", "treatment": t, "se_arm": 1.0} for t in "ABC"]
    net = nc.load_network(rows, arm_records=arms, reference="A")
    assert np.allclose(net.sigma.blocks[0], [[2.0, 1.0], [1.0, 2.0]])


def test_arm_level_fallback_handles_non_anchored_rows():
    # contrasts AB and BC share arm B with opposite roles: covariance -v_B
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": np.sqrt(2.0)},
        {"study": "s1", "t1": "B", "t2": "C", "y": 0.1, "se": np.sqrt(2.0)},
    ]
    arms = [{"study": "s1", "treatment": t, "se_arm": 1.0} for t in "ABC"]
    net = nc.load_network(rows, arm_records=arms, reference="A")
    assert np.allclose(net.sigma.blocks[0], [[2.0, -1.0], [-1.0, 2.0]])


def test_validation_is_eager_and_total():
    rows = [
        {"study": "s1", "t1": "A", "t2": "A", "y": 0.3, "se": 0.1},
        {"study": "s2", "t1": "A", "t2": "B", "y": 0.1, "se": -1.0},
        {"study": "s3", "t1": "A", "t2": "B", "y": 0.2, "se": 0.1},
        {"study": "s3", "t1": "B", "t2": "A", "y": 0.2, "se": 0.1},
    ]
    with pytest.raises(nc.ValidationError) as err:
        nc.load_network(rows)
    messages = "\n".join(err.value.errors)
    assert "t1 equals t2" in messages
    assert "se must be positive" in messages
    assert "duplicate contrast pair" in messages


def test_multiarm_without_covariance_errors():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": 1.0},
        {"study": "s1", "t1": "A", "t2": "C", "y": 0.1, "se": 1.0},
    ]
    with pytest.raises(nc.ValidationError, match="covariance block or arm-level"):
        nc.load_network(rows)


def test_non_positive_definite_block_rejected():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": 1.0},
        {"study": "s1", "t1": "A", "t2": "C", "y": 0.1, "se": 1.0},
    ]
    cov = [{"study": "s1", "row": 1, "col": 2, "cov": 1.5}]
    with pytest.raises(nc.ValidationError, match="not positive definite"):
        nc.load_network(rows, cov)


def test_contrast_count_must_match_arms():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": 1.0},
        {"study": "s1", "t1": "A", "t2": "C", "y": 0.1, "se": 1.0},
        {"study": "s1", "t1": "B", "t2": "C", "y": 0.1, "se": 1.0},
    ]
    with pytest.raises(nc.ValidationError, match="3 arms require 2 contrasts"):
        nc.load_network(rows, [{"study": "s1", "row": 1, "col": 2, "cov": 0.5}])


def test_contrasts_must_span_arms():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": 1.0},
        {"study": "s1", "t1": "B", "t2": "A2", "y": 0.1, "se": 1.0},
        {"study": "s1", "t1": "A2", "t2": "A", "y": 0.1, "se": 1.0},
        {"study": "s1", "t1": "C", "t2": "D", "y": 0.1, "se": 1.0},
    ]
    with pytest.raises(nc.ValidationError, match="connect all arms"):
        nc.load_network(rows, [{"study": "s1", "row": i, "col": j, "cov": 0.0}
                               for i in range(1, 5) for j in range(i + 1, 5)])


def test_reference_forced_to_index_zero():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": 0.1},
        {"study": "s2", "t1": "B", "t2": "C", "y": 0.1, "se": 0.1},
    ]
    net = nc.load_network(rows, reference="C")
    assert net.treatment_ids == ("C", "A", "B")
    assert net.reference == "C"


def test_canonical_orientation_negates_y():
    rows = [{"study": "s1", "t1": "B", "t2": "A", "y": 0.3, "se": 0.1}]
    net = nc.load_network(rows, reference="A")
    c = net.studies[0].contrasts[0]
    assert (c.t1, c.t2) == ("A", "B")
    assert c.y == -0.3


def test_orientation_flip_adjusts_covariance_sign():
    base = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": 1.0},
        {"study": "s1", "t1": "A", "t2": "C", "y": 0.1, "se": 1.0},
    ]
    flipped = [
        {"study": "s1", "t1": "B", "t2": "A", "y": -0.3, "se": 1.0},
        {"study": "s1", "t1": "A", "t2": "C", "y": 0.1, "se": 1.0},
    ]
    cov = [{"study": "s1", "row": 1, "col": 2, "cov": 0.5}]
    net_base = nc.load_network(base, cov, reference="A")
    net_flip = nc.load_network(flipped, [{"study": "s1", "row": 1, "col": 2, "cov": -0.5}],
                               reference="A")
    assert nc.canonical_dump(net_base) == nc.canonical_dump(net_flip)


def test_within_study_contrasts_sorted_with_block_permutation():
    rows = [
        {"study": "s1", "t1": "A", "t2": "C", "y": 0.1, "se": 1.0},
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.3, "se": 2.0},
    ]
    cov = [{"study": "s1", "row": 1, "col": 2, "cov": 0.5}]
    net = nc.load_network(rows, cov, reference="A")
    pairs = [(c.t1, c.t2) for c in net.studies[0].contrasts]
    assert pairs == [("A", "B"), ("A", "C")]
    assert np.allclose(net.sigma.blocks[0], [[4.0, 0.5], [0.5, 1.0]])


def test_canonicalization_idempotent_roundtrip(k4_network):
    dump = nc.canonical_dump(k4_network)
    reloaded = nc.parse_canonical(dump)
    assert nc.canonical_dump(reloaded) == dump


def test_contrast_count_identity(triangle_network, k4_network):
    for net in (triangle_network, k4_network):
        assert net.n_contrasts == sum(s.n_arms - 1 for s in net.studies)
        X = nc.build_design_matrix(net)
        assert X.entries.shape[0] == net.n_contrasts


def test_prune_keeps_reference_component():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.1, "se": 0.1},
        {"study": "s2", "t1": "A", "t2": "C", "y": 0.1, "se": 0.1},
        {"study": "s3", "t1": "B", "t2": "C", "y": 0.1, "se": 0.1},
        {"study": "s4", "t1": "D", "t2": "E", "y": 0.1, "se": 0.1},
    ]
    net = nc.load_network(rows, reference="A")
    pruned, removed = nc.prune_disconnected(net)
    assert removed == ("D", "E")
    assert pruned.treatment_ids == ("A", "B", "C")
    assert len(pruned.studies) == 3


def test_prune_connected_network_is_noop(triangle_network):
    pruned, removed = nc.prune_disconnected(triangle_network)
    assert removed == ()
    assert pruned is triangle_network


def test_prune_respects_chosen_reference():
    rows = [
        {"study": "s1", "t1": "A", "t2": "B", "y": 0.1, "se": 0.1},
        {"study": "s2", "t1": "C", "t2": "D", "y": 0.1, "se": 0.1},
    ]
    net = nc.load_network(rows, reference="C")
    pruned, removed = nc.prune_disconnected(net)
    assert removed == ("A", "B")
    assert pruned.treatment_ids == ("C", "D")


def test_isolated_reference_errors():
    rows = [
        {"study": "s1", "t1": "B", "t2": "C", "y": 0.1, "se": 0.1},
    ]
    net = nc.load_network(rows, reference="B")
    # drop the only study touching the reference via a doctored network
    rows2 = [{"study": "s1", "t1": "B", "t2": "C", "y": 0.1, "se": 0.1},
             {"study": "s2", "t1": "D", "t2": "E", "y": 0.1, "se": 0.1}]
    net2 = nc.load_network(rows2, reference="D")
    pruned, removed = nc.prune_disconnected(net2)
    assert set(removed) == {"B", "C"}
    assert pruned.reference == "D"


def test_smoking_fixture_dimensions(smoking_network):
    assert smoking_network.n_treatments == 4
    assert smoking_network.n_contrasts == 26
    assert len(smoking_network.studies) == 24
    multi = [s for s in smoking_network.studies if s.n_arms == 3]
    assert len(multi) == 2
    assert sorted(s.design for s in multi) == [("A", "C", "D"), ("B", "C", "D")]
