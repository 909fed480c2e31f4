import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import eq16_tree
from ttnsim.models import random_hermitian
from ttnsim.operators import (CapabilityError, Hamiltonian, TensorProduct, exp_local,
                              pad_with_identities, pauli_library, to_dense)

NODES = eq16_tree().depth_first()
DIMS = {n: 2 for n in NODES}


def kron_oracle(factors):
    out = np.array([[1.0 + 0j]])
    for f in factors:
        out = np.kron(out, f)
    return out


def test_pauli_algebra():
    p = pauli_library()
    I = p["I"]
    assert_allclose(p["Z"] @ p["Z"], I)
    assert_allclose(p["X"] @ p["Y"], 1j * p["Z"])
    for m in p.values():
        assert_allclose(m, m.conj().T)
        assert_allclose(m.conj().T @ m, I)


def test_padding_omega():
    omega = TensorProduct({"00": "Z", "10": "Z", "20": "Z"})
    padded = pad_with_identities(omega, NODES, DIMS)
    assert set(padded) == set(NODES)
    assert [n for n in NODES if padded[n] == "I"] == ["0", "01", "11", "21"]
    assert pad_with_identities(padded, NODES, DIMS) == padded


def test_padding_empty_and_missing_dim():
    assert set(pad_with_identities({}, NODES, DIMS).values()) == {"I"}
    with pytest.raises(KeyError):
        pad_with_identities({}, NODES, {"0": 2})


@pytest.mark.parametrize("seed", range(5))
def test_padding_changes_nothing_numerically(seed):
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(NODES))
    tp = {n: str(rng.choice(["X", "Y", "Z"])) for n in rng.choice(NODES, 3, replace=False)}
    padded = pad_with_identities(tp, NODES, DIMS)
    p = pauli_library()
    assert_allclose(to_dense(padded, order, DIMS, p), to_dense(tp, order, DIMS, p))


def test_to_dense_quantum_game_operator_shape():
    ham = Hamiltonian(symbol_table={"P0": np.diag([1, 0]), "P1": np.diag([0, 1])})
    for excited in ("00", "10", "20"):
        ham.add_term(1.0, {n: ("P1" if n == excited else "P0") for n in ("00", "10", "20")})
    dense = to_dense(ham, NODES, DIMS)
    assert dense.shape == (128, 128)
    assert dense.size == 16384


def test_to_dense_identity_and_single_term():
    assert_allclose(to_dense({}, NODES, DIMS), np.eye(128))
    p = pauli_library()
    ham = Hamiltonian()
    ham.add_term(-0.7, {"0": "Z", "00": "Z"})
    expected = -0.7 * kron_oracle([p["Z"], p["Z"]] + [p["I"]] * 5)
    assert_allclose(to_dense(ham, NODES, DIMS), expected)


def test_to_dense_cap():
    with pytest.raises(CapabilityError, match="tree tensor network operator"):
        to_dense({}, NODES, DIMS, cap=64)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), cut=st.integers(0, 8))
def test_hamiltonian_realisation_is_linear(seed, cut):
    rng = np.random.default_rng(seed)
    ham = Hamiltonian()
    for _ in range(8):
        sites = rng.choice(NODES, 2, replace=False)
        ham.add_term(rng.standard_normal() + 1j * rng.standard_normal(),
                     {str(s): str(rng.choice(["X", "Y", "Z"])) for s in sites})
    first = Hamiltonian(ham.terms[:cut], ham.symbol_table)
    second = Hamiltonian(ham.terms[cut:], ham.symbol_table)
    assert_allclose(to_dense(first + second, NODES, DIMS),
                    to_dense(first, NODES, DIMS) + to_dense(second, NODES, DIMS), atol=1e-12)


def test_canonical_terms_merges_duplicates():
    ham = Hamiltonian()
    ham.add_term(1.0, {"0": "X"})
    ham.add_term(2.0, {"0": "X", "00": "I"})
    ham.add_term(1.0, {"10": "Z"})
    ham.add_term(-1.0, {"10": "Z"})
    terms = ham.canonical_terms(NODES, DIMS)
    assert len(terms) == 1
    assert terms[0][0] == 3.0


def test_matrix_factors_are_symbolised():
    m = np.array([[0, 2], [2, 1]])
    ham = Hamiltonian()
    ham.add_term(1.0, {"0": m})
    ham.add_term(1.0, {"0": m.copy()})
    sym = ham.symbolised()
    assert sym.terms[0][1]["0"] == sym.terms[1][1]["0"]
    assert_allclose(to_dense(sym, NODES, DIMS), to_dense(ham, NODES, DIMS))


def test_non_square_factor_rejected():
    with pytest.raises(ValueError, match="square"):
        exp_local({"0": np.ones((2, 3))}, 1.0)


def test_exp_local_zero_factor_is_identity():
    gate = exp_local({"a": "X", "b": "Y"}, 0.0, pauli_library())
    assert gate.sites == ("a", "b")
    assert_allclose(gate.matrix, np.eye(4), atol=1e-15)


@pytest.mark.parametrize("t", [0.0, 0.3, np.pi / 4, 2.0])
def test_exp_local_zz_diagonal(t):
    gate = exp_local({"a": "Z", "b": "Z"}, -1j * t, pauli_library())
    signs = np.array([1, -1, -1, 1])
    assert_allclose(gate.matrix, np.diag(np.exp(-1j * t * signs)), atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_exp_local_unitary(seed):
    rng = np.random.default_rng(seed)
    symbols = {"A": random_hermitian(rng, 2), "B": random_hermitian(rng, 3)}
    gate = exp_local({"a": "A", "b": "B"}, -1j * rng.uniform(0, 2), symbols)
    assert gate.dims == (2, 3)
    assert_allclose(gate.matrix.conj().T @ gate.matrix, np.eye(6), atol=1e-12)
    # one (out, in) pair per site
    assert gate.tensor.shape == (2, 2, 3, 3)


def test_exp_local_cap():
    with pytest.raises(CapabilityError):
        exp_local({str(i): "X" for i in range(11)}, 1.0, pauli_library())
