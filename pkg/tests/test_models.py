import numpy as np
import pytest
from numpy.testing import assert_allclose

from ttnsim.models import (TfiSpec, branching_tree, build_q_tree, chain_node_id, error_series,
                           exact_evolution, exact_expectations, initial_magnetisation_formula,
                           loglog_slope, neel_like_initial_state, random_pauli_hamiltonian,
                           tfi_hamiltonian, time_grid, to_sparse, total_magnetisation,
                           two_qubit_test_states)
from ttnsim.operators import CapabilityError, Hamiltonian, to_dense
from ttnsim.tree import TreeTopology


@pytest.mark.parametrize("L", [1, 2, 3, 11])
def test_tree_size(L):
    tree, dims = build_q_tree(L)
    assert len(tree.depth_first()) == 3 * L + 1
    assert set(dims.values()) == {2}
    assert len(tree.children["0"]) == 3
    assert chain_node_id(2, L - 1, L) in dims


def test_l2_is_the_seven_node_tree():
    tree, _ = build_q_tree(2)
    assert set(tree.undirected_edges()) == set(
        frozenset(e) for e in [("0", "00"), ("00", "01"), ("0", "10"), ("10", "11"),
                               ("0", "20"), ("20", "21")])


def test_long_chains_use_dotted_ids():
    tree, _ = build_q_tree(12)
    assert "1.11" in tree.depth_first()
    with pytest.raises(ValueError):
        build_q_tree(0)
    with pytest.raises(ValueError):
        TfiSpec(L=0)


@pytest.mark.parametrize("four_site", [False, True])
def test_tfi_terms(four_site):
    ham = tfi_hamiltonian(TfiSpec(L=2, J=1.0, g=0.1, four_site=four_site))
    zz = [(c, tp) for c, tp in ham.terms if set(tp.values()) == {"Z"} and len(tp) == 2]
    x = [(c, tp) for c, tp in ham.terms if set(tp.values()) == {"X"}]
    assert len(zz) == 6 and all(c == -1.0 for c, _ in zz)
    assert len(x) == 7 and all(c == -0.1 for c, _ in x)
    four = [tp for _, tp in ham.terms if len(tp) == 4]
    assert len(four) == int(four_site)
    assert len(ham) == 13 + int(four_site)


@pytest.mark.parametrize("four_site", [False, True])
def test_tfi_hermitian(four_site):
    tree, dims = build_q_tree(2)
    h = to_dense(tfi_hamiltonian(TfiSpec(2, four_site=four_site)), tree.depth_first(), dims)
    assert_allclose(h, h.conj().T, atol=1e-12)


def test_sparse_matches_dense():
    tree, dims = build_q_tree(2)
    ham = tfi_hamiltonian(TfiSpec(2, four_site=True))
    order = tree.depth_first()
    assert_allclose(to_sparse(ham, order, dims).toarray(), to_dense(ham, order, dims), atol=1e-14)


def test_quoted_magnetisation_formula_values():
    assert initial_magnetisation_formula(1) == -1
    assert initial_magnetisation_formula(2) == 1
    assert [initial_magnetisation_formula(L) for L in range(1, 7)] == [-1, 1, 1, -1, -1, 1]


def test_time_grid():
    assert len(time_grid(0.01, 1.0)) == 101
    assert list(time_grid(0.1, 0.05)) == [0.0]
    with pytest.raises(ValueError):
        time_grid(0.0, 1.0)


def test_zero_hamiltonian_is_constant():
    tree, dims = build_q_tree(1)
    psi0 = neel_like_initial_state(1).to_vector()
    for state in exact_evolution(Hamiltonian(), psi0, 0.1, 1.0, tree.depth_first(), dims):
        assert_allclose(state, psi0)


def test_rabi_oscillation():
    ham = Hamiltonian()
    ham.add_term(1.0, {"q": "X"})
    psi0 = np.array([1, 0], dtype=complex)
    states = exact_evolution(ham, psi0, np.pi / 20, np.pi, ["q"], {"q": 2})
    assert_allclose(states[10], [0, -1j], atol=1e-12)
    assert_allclose(states[-1], [-1, 0], atol=1e-12)


def test_sparse_path_matches_eigendecomposition():
    tree, dims = build_q_tree(4)
    order = tree.depth_first()
    ham = tfi_hamiltonian(TfiSpec(4, four_site=True))
    psi0 = neel_like_initial_state(4).to_vector()
    states = exact_evolution(ham, psi0, 0.1, 0.3, order, dims)
    assert len(states) == 4
    for s in states:
        assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-12)
    small_tree, small_dims = build_q_tree(2)
    small = tfi_hamiltonian(TfiSpec(2))
    vec = neel_like_initial_state(2).to_vector()
    h = to_dense(small, small_tree.depth_first(), small_dims)
    w, v = np.linalg.eigh(h)
    expected = v @ (np.exp(-0.3j * w) * (v.conj().T @ vec))
    got = exact_evolution(small, vec, 0.1, 0.3, small_tree.depth_first(), small_dims)[-1]
    assert_allclose(got, expected, atol=1e-12)


def test_exact_cap():
    tree, dims = build_q_tree(5)
    with pytest.raises(CapabilityError, match="break"):
        exact_evolution(Hamiltonian(), np.zeros(2 ** 16), 0.1, 1.0, tree.depth_first(), dims)


def test_unitarity_of_snapshots(rng):
    tree = branching_tree()
    order = tree.depth_first()
    dims = {n: 2 for n in order}
    ham = random_pauli_hamiltonian(rng, tree, 12)
    psi0 = rng.standard_normal(128) + 1j * rng.standard_normal(128)
    psi0 /= np.linalg.norm(psi0)
    for s in exact_evolution(ham, psi0, 0.1, 1.0, order, dims):
        assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-12)


def test_commuting_model_stays_diagonal():
    tree, dims = build_q_tree(1)
    order = tree.depth_first()
    ham = tfi_hamiltonian(TfiSpec(1, g=0.0))
    psi0 = neel_like_initial_state(1).to_vector()
    states = exact_evolution(ham, psi0, 0.1, 1.0, order, dims)
    for s in states:
        assert_allclose(np.abs(s), np.abs(psi0), atol=1e-12)
    values = exact_expectations(states, total_magnetisation(1), order, dims)
    assert_allclose(values, -1.0, atol=1e-12)


def test_error_series():
    a = np.array([1 + 1j, 2, 3])
    assert_allclose(error_series(a, a), 0)
    assert error_series(a, a.conj()).dtype.kind == "f"
    with pytest.raises(ValueError, match="lengths"):
        error_series(a, a[:2])


def test_two_qubit_states_are_orthonormal():
    states = np.array(list(two_qubit_test_states().values()))
    assert states.shape == (8, 4)
    assert_allclose(states[:4] @ states[:4].conj().T, np.eye(4))
    assert_allclose(states[4:] @ states[4:].conj().T, np.eye(4), atol=1e-15)


def test_loglog_slope():
    x = np.array([0.1, 0.05, 0.01])
    assert loglog_slope(x, 0.08 * x ** 2) == pytest.approx(2.0)


def test_random_pauli_hamiltonian_is_seeded():
    tree = TreeTopology.from_edges("a", [("a", "b"), ("a", "c")])
    h1 = random_pauli_hamiltonian(np.random.default_rng(5), tree, 10)
    h2 = random_pauli_hamiltonian(np.random.default_rng(5), tree, 10)
    assert h1.terms == h2.terms
    assert all(set(tp.values()) <= set("XYZ") for _, tp in h1.terms)
    unit = random_pauli_hamiltonian(np.random.default_rng(5), tree, 10, unit_coefficients=True)
    assert {c for c, _ in unit.terms} == {1.0}
