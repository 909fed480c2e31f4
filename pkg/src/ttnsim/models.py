"""
Benchmark models and the exact state-vector reference.

The star-of-chains tree has a root ``"0"`` and three chains of length ``L``
hanging off it. On it live the transverse-field Ising Hamiltonian, optionally
with a four-site term around the root, the alternating initial product state
and the total magnetisation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .evolution.trotter import TrotterSplitting, TrotterStep, exponentiate_splitting
from .operators import (CapabilityError, DENSE_CAP, Hamiltonian, LocalGate, TensorProduct,
                        pauli_library, projector_library, to_dense)
from .tree import TreeTopology
from .ttns import TTNS, basis_product_state

EIGH_LIMIT = 2 ** 11


@dataclass(frozen=True)
class TfiSpec:
    """Transverse-field Ising model on the star-of-chains tree."""
    L: int
    J: float = 1.0
    g: float = 0.1
    four_site: bool = False

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"Chain length must be at least 1, got {self.L}")


def chain_node_id(chain: int, depth: int, L: int) -> str:
    return f"{chain}{depth}" if L <= 10 else f"{chain}.{depth}"


def build_q_tree(L: int) -> Tuple[TreeTopology, Dict[str, int]]:
    """Root ``"0"`` with three chains of length ``L``; every site is a qubit."""
    if L < 1:
        raise ValueError(f"Chain length must be at least 1, got {L}")
    tree = TreeTopology()
    tree.add_root("0")
    for chain in range(3):
        parent = "0"
        for depth in range(L):
            node = chain_node_id(chain, depth, L)
            tree.add_child(parent, node)
            parent = node
    return tree, {n: 2 for n in tree.depth_first()}


def tfi_hamiltonian(spec: TfiSpec) -> Hamiltonian:
    """``-J sum ZZ`` over tree edges, ``-g sum X`` over sites, optional ``+Z0 Z00 Z10 Z20``."""
    tree, _ = build_q_tree(spec.L)
    ham = Hamiltonian(symbol_table=pauli_library())
    for parent, child in tree.edges():
        ham.add_term(-spec.J, {parent: "Z", child: "Z"})
    for node in tree.depth_first():
        ham.add_term(-spec.g, {node: "X"})
    if spec.four_site:
        ham.add_term(1.0, {"0": "Z", **{chain_node_id(c, 0, spec.L): "Z" for c in range(3)}})
    return ham


def tfi_trotter_splitting(spec: TfiSpec) -> TrotterSplitting:
    """
    Strang splitting: all ZZ gates at half steps in edge order, the X gates
    at full steps, then the ZZ gates again in reverse order.
    """
    if spec.four_site:
        raise CapabilityError("The four-site term needs SWAP ladders under TEBD; use a TDVP method")
    tree, _ = build_q_tree(spec.L)
    zz = [TrotterStep({p: "Z", c: "Z"}, -spec.J) for p, c in tree.edges()]
    x = [TrotterStep({n: "X"}, -spec.g) for n in tree.depth_first()]
    return TrotterSplitting.strang([zz, x])


def total_magnetisation(L: int) -> TensorProduct:
    tree, _ = build_q_tree(L)
    return TensorProduct({n: "Z" for n in tree.depth_first()})


def neel_like_initial_state(L: int) -> TTNS:
    """Product state with site ``i`` in ``|distance(i, root) mod 2>``."""
    tree, dims = build_q_tree(L)
    dist = tree.distances_from(tree.root)
    return basis_product_state(tree, {n: dist[n] % 2 for n in tree.depth_first()}, dims)


def initial_magnetisation_formula(L: int) -> int:
    """The closed form ``(-1)^(3 (floor(L/2) + 1))`` quoted for the initial magnetisation."""
    return (-1) ** (3 * (L // 2 + 1))


def branching_tree() -> TreeTopology:
    """Seven-node tree with a branching inner node: ``0-1, 1-2, 1-3, 0-4, 0-5, 5-6``."""
    return TreeTopology.from_edges("0", [("0", "1"), ("1", "2"), ("1", "3"), ("0", "4"),
                                         ("0", "5"), ("5", "6")])


def single_excited_neighbour_operator() -> Hamiltonian:
    """
    Projector onto "exactly one neighbour of the root is in ``|1>``" on the
    ``L = 2`` tree, written as three tensor products of ``P0``/``P1``.
    """
    neighbours = ["00", "10", "20"]
    ham = Hamiltonian(symbol_table={**pauli_library(), **projector_library()})
    for excited in neighbours:
        ham.add_term(1.0, {n: ("P1" if n == excited else "P0") for n in neighbours})
    return ham


def random_pauli_hamiltonian(rng: np.random.Generator, topology: TreeTopology, num_terms: int,
                             unit_coefficients: bool = False) -> Hamiltonian:
    """
    Sum of ``num_terms`` random Pauli strings.

    Every site draws uniformly from ``I, X, Y, Z``; coefficients are standard
    normal unless ``unit_coefficients`` is set.
    """
    nodes = topology.depth_first()
    ham = Hamiltonian(symbol_table=pauli_library())
    for _ in range(num_terms):
        letters = rng.choice(list("IXYZ"), size=len(nodes))
        coeff = 1.0 if unit_coefficients else float(rng.standard_normal())
        ham.add_term(coeff, {n: str(s) for n, s in zip(nodes, letters) if s != "I"})
    return ham


def time_grid(dt: float, final_time: float) -> np.ndarray:
    """``0, dt, ..., n dt`` with ``n = floor(T / dt)``."""
    if dt <= 0:
        raise ValueError("The time step must be positive")
    steps = int(np.floor(final_time / dt + 1e-9))
    return dt * np.arange(steps + 1)


def to_sparse(ham: Hamiltonian, site_order: Sequence[str], dims: Mapping[str, int]) -> sp.csr_matrix:
    """Sparse matrix of a Hamiltonian, first site most significant."""
    total = int(np.prod([dims[n] for n in site_order], dtype=np.int64))
    result = sp.csr_matrix((total, total), dtype=complex)
    for coeff, tp in ham.terms:
        term = sp.identity(1, dtype=complex, format="csr")
        for node in site_order:
            term = sp.kron(term, sp.csr_matrix(tp.resolve(node, ham.symbol_table, dims[node])),
                           format="csr")
        result = result + coeff * term
    return result


def exact_evolution(ham: Hamiltonian, psi0: np.ndarray, dt: float, final_time: float,
                    site_order: Sequence[str], dims: Mapping[str, int],
                    cap: int = DENSE_CAP) -> List[np.ndarray]:
    """
    State vectors ``exp(-i H t_k) psi0`` on the time grid.

    Small spaces use an eigendecomposition, larger ones the action of the
    sparse exponential.
    """
    total = int(np.prod([dims[n] for n in site_order], dtype=np.int64))
    if total > cap:
        raise CapabilityError(f"Hilbert space dimension {total} exceeds the cap {cap}; "
                              "the state-vector approach breaks down here")
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    times = time_grid(dt, final_time)
    if total <= EIGH_LIMIT:
        h = to_dense(ham, site_order, dims, cap=cap)
        if np.allclose(h, h.conj().T, atol=1e-12):
            vals, vecs = np.linalg.eigh(h)
            coeffs = vecs.conj().T @ psi0
            return [vecs @ (np.exp(-1j * vals * t) * coeffs) for t in times]
    h = to_sparse(ham, site_order, dims)
    if len(times) == 1:
        return [psi0.copy()]
    states = expm_multiply(-1j * h, psi0, start=0.0, stop=times[-1], num=len(times),
                           endpoint=True, traceA=complex(h.diagonal().sum()) * -1j)
    return list(states)


def exact_expectations(states: Sequence[np.ndarray], op: TensorProduct, site_order: Sequence[str],
                       dims: Mapping[str, int], symbols=None) -> np.ndarray:
    """``<psi|P|psi>`` for every state vector."""
    mat = sp.identity(1, dtype=complex, format="csr")
    for node in site_order:
        mat = sp.kron(mat, sp.csr_matrix(op.resolve(node, symbols or pauli_library(), dims[node])),
                      format="csr")
    return np.array([np.vdot(s, mat @ s) for s in states])


def error_series(exact_vals: Sequence[complex], method_vals: Sequence[complex]) -> np.ndarray:
    """Pointwise ``|exact - method|`` of two expectation series on one grid."""
    exact_vals = np.asarray(exact_vals)
    method_vals = np.asarray(method_vals)
    if exact_vals.shape != method_vals.shape:
        raise ValueError(f"Series lengths differ: {exact_vals.shape} and {method_vals.shape}")
    return np.abs(exact_vals - method_vals)


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


def random_simple_hamiltonian(rng: np.random.Generator,
                              sites: Tuple[str, str] = ("a", "b")) -> Hamiltonian:
    """``A1 (x) A2 + B1 (x) B2`` with random Hermitian qubit factors."""
    symbols = {name: random_hermitian(rng, 2) for name in ("A1", "A2", "B1", "B2")}
    ham = Hamiltonian(symbol_table=symbols)
    ham.add_term(1.0, {sites[0]: "A1", sites[1]: "A2"})
    ham.add_term(1.0, {sites[0]: "B1", sites[1]: "B2"})
    return ham


def two_qubit_test_states() -> Dict[str, np.ndarray]:
    """The computational basis and the Bell basis of two qubits."""
    states = {f"|{i}{j}>": np.eye(4, dtype=complex)[2 * i + j] for i in (0, 1) for j in (0, 1)}
    r = 1 / np.sqrt(2)
    states["phi+"] = r * np.array([1, 0, 0, 1], dtype=complex)
    states["phi-"] = r * np.array([1, 0, 0, -1], dtype=complex)
    states["psi+"] = r * np.array([0, 1, 1, 0], dtype=complex)
    states["psi-"] = r * np.array([0, 1, -1, 0], dtype=complex)
    return states


def apply_gate_dense(gate: LocalGate, vector: np.ndarray, site_order: Sequence[str],
                     dims: Mapping[str, int]) -> np.ndarray:
    """Applies a local gate to a state vector ordered like ``site_order``."""
    psi = np.asarray(vector).reshape([dims[n] for n in site_order])
    axes = [list(site_order).index(n) for n in gate.sites]
    k = len(axes)
    op = gate.matrix.reshape(gate.dims + gate.dims)
    out = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes).reshape(-1)


def trotter_final_error(ham: Hamiltonian, splitting: TrotterSplitting, psi0: np.ndarray, dt: float,
                        final_time: float, site_order: Sequence[str],
                        dims: Mapping[str, int]) -> float:
    """``|| exp(-i H T) psi0 - (split step)^n psi0 ||`` with ``n = floor(T / dt)`` steps."""
    steps = len(time_grid(dt, final_time)) - 1
    exact = exact_evolution(ham, psi0, steps * dt, steps * dt, site_order, dims)[-1]
    program = exponentiate_splitting(splitting, dt, ham.symbol_table)
    psi = np.asarray(psi0, dtype=complex)
    for _ in range(steps):
        for entry in program:
            if entry.swaps_before or entry.swaps_after:
                raise ValueError("Dense Trotter errors do not support SWAP lists")
            psi = apply_gate_dense(entry.gate, psi, site_order, dims)
    return float(np.linalg.norm(exact - psi))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
