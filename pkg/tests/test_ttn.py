import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import einsum_contraction, eq16_tree, random_tree, random_ttn
from ttnsim.tensor_core import SplitMode, SvdParameters, random_tensor, truncated_svd
from ttnsim.tree import TreeTopology
from ttnsim.ttn import LegSpecification, NotCanonicalError, TreeTensorNetwork


def eq13_variant_tree():
    return TreeTopology.from_edges("0", [("0", "1"), ("1", "2"), ("1", "3"), ("0", "4"),
                                         ("0", "5"), ("5", "6")])


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def fig6_network(seed=0):
    """Parent p above a; a has child c1 and child b; b has child c2; a and b carry open legs."""
    tree = TreeTopology.from_edges("p", [("p", "a"), ("a", "c1"), ("a", "b"), ("b", "c2")])
    shapes = {"p": (2, 3), "a": (2, 3, 4, 5), "c1": (3, 2), "b": (4, 2, 6), "c2": (2, 2)}
    tensors = {n: random_tensor(s, seed + i) for i, (n, s) in enumerate(shapes.items())}
    return TreeTensorNetwork.from_tensors(tree, tensors)


def check_leg_convention(ttn):
    for node_id in ttn.topology.depth_first():
        node = ttn.node(node_id)
        for k, nb in enumerate(node.neighbours):
            assert ttn.neighbour_index(node_id, nb) == k
            assert ttn.tensors[node_id].shape[k] == ttn.tensors[nb].shape[ttn.neighbour_index(nb, node_id)]


# --- construction -----------------------------------------------------------

def test_eq16_construction_pushes_open_leg_to_the_tail():
    ttn = TreeTensorNetwork()
    root = random_tensor((2, 4, 5, 3), seed=1)
    ttn.add_root("0", root)
    ttn.add_child_to_parent("00", random_tensor((4, 3, 2), seed=2), 0, "0", 1)
    ttn.add_child_to_parent("10", random_tensor((5, 3, 2), seed=3), 0, "0", 2)
    ttn.add_child_to_parent("20", random_tensor((3, 3, 2), seed=4), 0, "0", 3)
    assert ttn.tensors["0"].shape == (4, 5, 3, 2)
    assert ttn.node("0").open_legs == [3]
    assert_allclose(ttn.tensors["0"], np.transpose(root, (1, 2, 3, 0)))
    assert ttn.neighbour_index("0", "00") == 0
    assert ttn.neighbour_index("00", "0") == 0
    check_leg_convention(ttn)


def test_attach_on_connected_leg_fails():
    ttn = TreeTensorNetwork()
    ttn.add_root("r", random_tensor((2, 2), seed=1))
    ttn.add_child_to_parent("c", random_tensor((2, 3), seed=2), 0, "r", 0)
    with pytest.raises(ValueError, match="not an open leg"):
        ttn.add_child_to_parent("d", random_tensor((2, 3), seed=3), 0, "r", 0)


def test_attach_dimension_mismatch_names_dims():
    ttn = TreeTensorNetwork()
    ttn.add_root("r", random_tensor((2, 2), seed=1))
    with pytest.raises(ValueError, match="dimension 3.*dimension 2"):
        ttn.add_child_to_parent("c", random_tensor((3, 3), seed=2), 0, "r", 1)


def test_attach_duplicate_id_fails():
    ttn = TreeTensorNetwork()
    ttn.add_root("r", random_tensor((2, 2), seed=1))
    with pytest.raises(ValueError, match="already exists"):
        ttn.add_child_to_parent("r", random_tensor((2,), seed=2), 0, "r", 0)


# --- contraction ------------------------------------------------------------

def test_full_contraction_shape_on_eq16_tree():
    tree = eq16_tree()
    phys = {"0": 2, "00": 2, "01": 2, "10": 2, "11": 3, "20": 2, "21": 2}
    ttn = random_ttn(np.random.default_rng(0), tree)
    tensors = {}
    for n in tree.depth_first():
        bonds = ttn.tensors[n].shape[:ttn.node(n).nneighbours]
        tensors[n] = random_tensor(bonds + (phys[n],), seed=len(tensors))
    ttn = TreeTensorNetwork.from_tensors(tree, tensors)
    # depth-first order is 0, 00, 01, 10, 11, 20, 21
    assert ttn.completely_contract_tree().shape == (2, 2, 2, 2, 3, 2, 2)


def test_single_node_contraction():
    ttn = TreeTensorNetwork()
    t = random_tensor((2, 3), seed=1)
    ttn.add_root("r", t)
    assert_allclose(ttn.completely_contract_tree(), t)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 10 ** 6))
def test_full_contraction_matches_einsum_oracle(n, seed):
    rng = np.random.default_rng(seed)
    ttn = random_ttn(rng, random_tree(rng, n), max_dim=3, max_open=2)
    assert_allclose(ttn.completely_contract_tree(), einsum_contraction(ttn), atol=1e-12)


def test_contract_nodes_fig6_leg_order():
    ttn = fig6_network()
    full = ttn.completely_contract_tree()
    ab = ttn.copy()
    ab.contract_nodes("a", "b", "ab")
    assert ab.topology.children["ab"] == ["c1", "c2"]
    # parent, a's child c1, b's child c2, a_open, b_open
    expected = np.einsum("pcxa,xdb->pcdab", ttn.tensors["a"], ttn.tensors["b"])
    assert_allclose(ab.tensors["ab"], expected, atol=1e-13)
    ba = ttn.copy()
    ba.contract_nodes("b", "a", "ba")
    assert ba.topology.children["ba"] == ["c2", "c1"]
    assert_allclose(ba.tensors["ba"], ab.tensors["ab"].transpose(0, 2, 1, 4, 3), atol=1e-13)
    for net in (ab, ba):
        check_leg_convention(net)
    # open legs in pre-order: p, ab (a then b), c1, c2
    assert_allclose(ab.completely_contract_tree(), full.transpose(0, 1, 3, 2, 4), atol=1e-12)


def test_contract_trivial_bond():
    ttn = TreeTensorNetwork.from_tensors(TreeTopology.from_edges("r", [("r", "c")]),
                                         {"r": np.array([[2.0]]), "c": np.array([[3.0]])})
    ttn.contract_nodes("r", "c", "rc")
    assert_allclose(ttn.tensors["rc"], [[6.0]])


def test_contract_non_adjacent_fails():
    with pytest.raises(ValueError, match="not adjacent"):
        fig6_network().contract_nodes("p", "b")


# --- splitting --------------------------------------------------------------

def test_split_recovers_fig6_topology():
    ttn = fig6_network()
    full = ttn.completely_contract_tree()
    original_children = dict(ttn.topology.children)
    ttn.contract_nodes("a", "b", "ab")
    # legs of ab: parent 0, c1 1, c2 2, a_open 3, b_open 4
    ttn.split_node_qr("ab", LegSpecification(True, ["c1"], [3]), LegSpecification(False, ["c2"], [4]),
                      "a", "b")
    assert ttn.topology.children["p"] == ["a"]
    assert ttn.topology.children["a"] == original_children["a"]
    assert ttn.topology.children["b"] == ["c2"]
    assert ttn.isometry_defects("b")["a"] < 1e-12
    check_leg_convention(ttn)
    assert rel(ttn.completely_contract_tree(), full) < 1e-12


def test_split_root_with_new_root_on_r_side():
    ttn = fig6_network()
    full = ttn.completely_contract_tree()
    # p has legs (a, open); R keeps the open leg and becomes the root
    ttn.split_node_qr("p", LegSpecification(children=["a"]),
                      LegSpecification(open_legs=[1], becomes_root=True), "q", "r")
    assert ttn.root_id == "r"
    assert ttn.topology.parent["q"] == "r"
    assert rel(ttn.completely_contract_tree(), full) < 1e-12


def test_split_rank_one_node():
    tree = TreeTopology()
    tree.add_root("x")
    tensor = np.einsum("i,j,k->ijk", *[random_tensor((d,), seed=d) for d in (2, 3, 4)])
    specs = (LegSpecification(open_legs=[0, 2], becomes_root=True), LegSpecification(open_legs=[1]))
    by_svd = TreeTensorNetwork.from_tensors(tree, {"x": tensor})
    by_svd.split_node_svd("x", *specs, "u", "v")
    assert by_svd.bond_dim("u", "v") == 1
    # An unpivoted QR does not reveal the rank; its bond is min(m, n).
    by_qr = TreeTensorNetwork.from_tensors(tree, {"x": tensor})
    by_qr.split_node_qr("x", *specs, "u", "v")
    assert by_qr.bond_dim("u", "v") == 3
    for net in (by_svd, by_qr):
        assert rel(net.completely_contract_tree(), tensor.transpose(0, 2, 1)) < 1e-12


@pytest.mark.parametrize("spec1, spec2, message", [
    (LegSpecification(True, ["c1"], [3]), LegSpecification(False, [], [4]), "unclaimed children"),
    (LegSpecification(True, ["c1", "c2"], [3]), LegSpecification(False, ["c2"], [4]), "claimed twice"),
    (LegSpecification(True, ["c1"], [3]), LegSpecification(True, ["c2"], [4]), "parent"),
    (LegSpecification(True, ["c1"], []), LegSpecification(False, ["c2"], [4]), "unclaimed open"),
])
def test_malformed_specs_are_reported(spec1, spec2, message):
    ttn = fig6_network()
    ttn.contract_nodes("a", "b", "ab")
    with pytest.raises(ValueError, match=message):
        ttn.split_node_qr("ab", spec1, spec2, "a", "b")


def test_split_svd_truncation_matches_truncated_svd():
    ttn = fig6_network(3)
    full = ttn.completely_contract_tree()
    ttn.contract_nodes("a", "b", "ab")
    tensor = ttn.tensors["ab"]
    params = SvdParameters(max_bond_dim=1)
    u, s, v = truncated_svd(tensor, [0, 1, 3], [2, 4], SvdParameters())
    ttn.split_node_svd("ab", LegSpecification(True, ["c1"], [3]), LegSpecification(False, ["c2"], [4]),
                       "a", "b", params)
    assert ttn.bond_dim("a", "b") == 1
    merged = ttn.copy()
    merged.contract_nodes("a", "b", "ab")
    assert abs(np.linalg.norm(merged.tensors["ab"] - tensor) - np.linalg.norm(s[1:])) < 1e-12
    unbounded = fig6_network(3)
    unbounded.contract_nodes("a", "b", "ab")
    unbounded.split_node_svd("ab", LegSpecification(True, ["c1"], [3]),
                             LegSpecification(False, ["c2"], [4]), "a", "b")
    assert rel(unbounded.completely_contract_tree(), full) < 1e-12
    assert unbounded.topology.children == ttn.topology.children


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), seed=st.integers(0, 10 ** 6), data=st.data())
def test_split_contract_roundtrip(n, seed, data):
    rng = np.random.default_rng(seed)
    ttn = random_ttn(rng, random_tree(rng, n), max_dim=3, max_open=2)
    node_id = data.draw(st.sampled_from(ttn.topology.depth_first()))
    node = ttn.node(node_id)
    original = ttn.tensors[node_id].copy()
    side = {c: data.draw(st.booleans()) for c in node.children}
    side_open = {o: data.draw(st.booleans()) for o in node.open_legs}
    parent_side = data.draw(st.booleans())
    spec1 = LegSpecification(takes_parent=node.parent is not None and parent_side,
                             children=[c for c in node.children if side[c]],
                             open_legs=[o for o in node.open_legs if side_open[o]],
                             becomes_root=node.parent is None and parent_side)
    spec2 = LegSpecification(takes_parent=node.parent is not None and not parent_side,
                             children=[c for c in node.children if not side[c]],
                             open_legs=[o for o in node.open_legs if not side_open[o]],
                             becomes_root=node.parent is None and not parent_side)
    ttn.split_node_qr(node_id, spec1, spec2, "left", "right")
    check_leg_convention(ttn)
    upper, lower = ("left", "right") if parent_side else ("right", "left")
    ttn.contract_nodes(upper, lower, node_id)
    # Children of the upper part come first after merging; restore the original order.
    merged = ttn.node(node_id)
    perm = [merged.neighbour_index(nb) for nb in node.neighbours]
    merged_open = list(spec1.open_legs if parent_side else spec2.open_legs) + \
        list(spec2.open_legs if parent_side else spec1.open_legs)
    perm += [merged.nneighbours + merged_open.index(o) for o in node.open_legs]
    assert rel(np.transpose(ttn.tensors[node_id], perm), original) < 1e-12


# --- canonical form ---------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_canonical_form_on_eq13_tree(seed):
    rng = np.random.default_rng(seed)
    ttn = random_ttn(rng, eq13_variant_tree(), max_dim=4)
    full = ttn.completely_contract_tree()
    ttn.canonical_form("0")
    assert ttn.orthogonality_center == "0"
    assert ttn.is_canonical()
    assert rel(ttn.completely_contract_tree(), full) < 1e-10
    norm_full = np.linalg.norm(full)
    assert abs(np.linalg.norm(ttn.tensors["0"]) - norm_full) < 1e-12 * norm_full
    ttn.move_orthogonalization_center("6")
    assert ttn.is_canonical("6")
    assert rel(ttn.completely_contract_tree(), full) < 1e-10


def test_canonical_form_is_idempotent():
    ttn = random_ttn(np.random.default_rng(3), eq13_variant_tree())
    ttn.canonical_form("1")
    before = {n: t.copy() for n, t in ttn.tensors.items()}
    ttn.canonical_form("1")
    for n, t in ttn.tensors.items():
        # QR may flip phases column by column; compare gauge-invariant data.
        assert_allclose(np.abs(t), np.abs(before[n]), atol=1e-12)


def test_move_to_itself_is_noop():
    ttn = random_ttn(np.random.default_rng(4), eq13_variant_tree())
    ttn.canonical_form("2")
    before = {n: t.copy() for n, t in ttn.tensors.items()}
    ttn.move_orthogonalization_center("2")
    for n in before:
        assert_allclose(ttn.tensors[n], before[n])


def test_move_without_centre_raises():
    ttn = random_ttn(np.random.default_rng(4), eq13_variant_tree())
    with pytest.raises(NotCanonicalError, match="canonical_form"):
        ttn.move_orthogonalization_center("2")


def test_isometry_check_detects_perturbation():
    ttn = random_ttn(np.random.default_rng(5), eq13_variant_tree(), max_dim=3)
    ttn.canonical_form("0")
    assert ttn.is_canonical()
    ttn.tensors["6"] = ttn.tensors["6"] + 1e-3 * random_tensor(ttn.tensors["6"].shape, seed=1)
    assert not ttn.is_canonical()


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 10 ** 6), data=st.data())
def test_centre_round_trip(n, seed, data):
    rng = np.random.default_rng(seed)
    ttn = random_ttn(rng, random_tree(rng, n), max_dim=4)
    nodes = ttn.topology.depth_first()
    a = data.draw(st.sampled_from(nodes))
    b = data.draw(st.sampled_from(nodes))
    full = ttn.completely_contract_tree()
    ttn.canonical_form(a)
    state_a = ttn.completely_contract_tree()
    ttn.move_orthogonalization_center(b)
    assert ttn.is_canonical(b)
    ttn.move_orthogonalization_center(a)
    assert ttn.is_canonical(a)
    assert rel(ttn.completely_contract_tree(), state_a) < 1e-10
    assert rel(state_a, full) < 1e-10


def test_keep_mode_preserves_bond_dimensions():
    rng = np.random.default_rng(9)
    ttn = random_ttn(rng, eq13_variant_tree(), max_dim=2)
    dims = ttn.bond_dims()
    ttn.canonical_form("0", mode=SplitMode.KEEP)
    assert ttn.bond_dims() == dims


# --- dense conversion and storage ------------------------------------------

def test_from_dense_roundtrip():
    tree = eq16_tree()
    tensor = random_tensor((2,) * 7, seed=2)
    ttn = TreeTensorNetwork.from_dense(tensor, tree, {n: 1 for n in tree.depth_first()})
    assert ttn.is_canonical(tree.root)
    assert rel(ttn.completely_contract_tree(), tensor) < 1e-12


def test_save_load_roundtrip(tmp_path):
    ttn = random_ttn(np.random.default_rng(1), eq13_variant_tree(), max_open=2)
    ttn.canonical_form("5")
    path = tmp_path / "net.zip"
    ttn.save(path)
    again = TreeTensorNetwork.load(path)
    assert again.orthogonality_center == "5"
    assert again.topology.children == ttn.topology.children
    for n in ttn.tensors:
        assert_allclose(again.tensors[n], ttn.tensors[n], atol=0)
