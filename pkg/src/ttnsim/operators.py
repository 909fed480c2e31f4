"""
Symbolic operators on tree sites.

A :class:`TensorProduct` assigns a single-site operator to some nodes of a
tree; sites without an entry act as the identity. Factors are either symbol
strings, resolved through a symbol table, or explicit square matrices. A
:class:`Hamiltonian` is a weighted sum of tensor products together with its
symbol table.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm

from .tensor_core import DTYPE

Factor = Union[str, np.ndarray]

DENSE_CAP = 2 ** 14
GATE_CAP = 2 ** 10


class CapabilityError(RuntimeError):
    """Raised when a request exceeds what a dense method can handle."""


def pauli_library() -> Dict[str, np.ndarray]:
    """The Pauli matrices and the 2x2 identity."""
    return {
        "I": np.eye(2, dtype=DTYPE),
        "X": np.array([[0, 1], [1, 0]], dtype=DTYPE),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=DTYPE),
        "Z": np.array([[1, 0], [0, -1]], dtype=DTYPE),
    }


def identity_symbol(dim: int) -> str:
    return "I" if dim == 2 else f"I{dim}"


def projector_library() -> Dict[str, np.ndarray]:
    """Projectors onto the computational basis states of a qubit."""
    return {"P0": np.diag([1, 0]).astype(DTYPE), "P1": np.diag([0, 1]).astype(DTYPE)}


class TensorProduct(dict):
    """Mapping from node id to a single-site factor (symbol or matrix)."""

    def resolve(self, node_id: str, symbols: Optional[Mapping[str, np.ndarray]] = None,
                dim: Optional[int] = None) -> np.ndarray:
        """
        The matrix acting on ``node_id``; the identity if no factor is set.

        Symbols are looked up in ``symbols``, or among the Pauli matrices
        when no table is given.
        """
        if node_id not in self:
            if dim is None:
                raise KeyError(f"No factor on {node_id!r} and no dimension to build an identity")
            return np.eye(dim, dtype=DTYPE)
        factor = self[node_id]
        if isinstance(factor, str):
            symbols = pauli_library() if symbols is None else symbols
            if factor not in symbols:
                raise KeyError(f"Unknown operator symbol {factor!r}")
            matrix = np.asarray(symbols[factor], dtype=DTYPE)
        else:
            matrix = np.asarray(factor, dtype=DTYPE)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Factor on {node_id!r} is not a square matrix: shape {matrix.shape}")
        if dim is not None and matrix.shape[0] != dim:
            raise ValueError(f"Factor on {node_id!r} has dimension {matrix.shape[0]}, "
                             f"site has dimension {dim}")
        return matrix

    def copy(self) -> "TensorProduct":
        return TensorProduct(self)


def pad_with_identities(tp: Mapping[str, Factor], nodes: Iterable[str],
                        dims: Mapping[str, int]) -> TensorProduct:
    """Adds an identity symbol for every node without a factor."""
    padded = TensorProduct(tp)
    for node_id in nodes:
        if node_id not in dims:
            raise KeyError(f"No physical dimension given for node {node_id!r}")
        if node_id not in padded:
            padded[node_id] = identity_symbol(dims[node_id])
    return padded


@dataclass
class Hamiltonian:
    """A weighted sum of tensor products with a symbol table."""
    terms: List[Tuple[complex, TensorProduct]] = field(default_factory=list)
    symbol_table: Dict[str, np.ndarray] = field(default_factory=pauli_library)

    def add_term(self, coefficient: complex, factors: Mapping[str, Factor]):
        self.terms.append((complex(coefficient), TensorProduct(factors)))

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: "Hamiltonian") -> "Hamiltonian":
        table = dict(self.symbol_table)
        for key, value in other.symbol_table.items():
            if key in table and not np.array_equal(table[key], value):
                raise ValueError(f"Symbol {key!r} has conflicting definitions")
            table[key] = value
        return Hamiltonian(list(self.terms) + list(other.terms), table)

    def with_identities(self, dims: Mapping[str, int]) -> "Hamiltonian":
        """Copy whose symbol table contains the identity symbol of every site dimension."""
        table = dict(self.symbol_table)
        for d in set(dims.values()):
            table.setdefault(identity_symbol(d), np.eye(d, dtype=DTYPE))
        return Hamiltonian(list(self.terms), table)

    def symbolised(self) -> "Hamiltonian":
        """Replaces explicit matrix factors by generated symbols."""
        table = dict(self.symbol_table)
        terms = []
        for coeff, tp in self.terms:
            new = TensorProduct()
            for node_id, factor in tp.items():
                if isinstance(factor, str):
                    new[node_id] = factor
                    continue
                matrix = np.ascontiguousarray(factor, dtype=DTYPE)
                name = "M_" + hashlib.sha1(matrix.tobytes() + str(matrix.shape).encode()).hexdigest()[:12]
                table[name] = matrix
                new[node_id] = name
            terms.append((coeff, new))
        return Hamiltonian(terms, table)

    def canonical_terms(self, nodes: Sequence[str], dims: Mapping[str, int]
                        ) -> List[Tuple[complex, TensorProduct]]:
        """
        Padded terms with duplicates merged and vanishing terms removed.

        Two terms are duplicates when they carry the same symbol on every
        node. The order of first appearance is kept.
        """
        ham = self.symbolised().with_identities(dims)
        merged: Dict[Tuple[str, ...], complex] = {}
        products: Dict[Tuple[str, ...], TensorProduct] = {}
        for coeff, tp in ham.terms:
            for node_id in tp:
                if node_id not in dims:
                    raise KeyError(f"Operator acts on unknown node {node_id!r}")
            padded = pad_with_identities(tp, nodes, dims)
            key = tuple(padded[n] for n in nodes)
            merged[key] = merged.get(key, 0) + coeff
            products.setdefault(key, padded)
        return [(c, products[k]) for k, c in merged.items() if c != 0]


def _kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    result = np.ones((1, 1), dtype=DTYPE)
    for m in mats:
        result = np.kron(result, m)
    return result


def _check_cap(dims: Mapping[str, int], site_order: Sequence[str], cap: int):
    total = int(np.prod([dims[n] for n in site_order], dtype=np.int64))
    if total > cap:
        raise CapabilityError(f"Dense dimension {total} exceeds the cap {cap}; "
                              "use a tree tensor network operator instead")


def to_dense(op: Union[Mapping[str, Factor], Hamiltonian], site_order: Sequence[str],
             dims: Mapping[str, int], symbols: Optional[Mapping[str, np.ndarray]] = None,
             cap: int = DENSE_CAP) -> np.ndarray:
    """
    Dense matrix of a tensor product or Hamiltonian.

    The first site of ``site_order`` is the most significant factor of the
    Kronecker product.
    """
    for node_id in site_order:
        if node_id not in dims:
            raise KeyError(f"No physical dimension given for node {node_id!r}")
    _check_cap(dims, site_order, cap)
    if isinstance(op, Hamiltonian):
        total = int(np.prod([dims[n] for n in site_order], dtype=np.int64))
        result = np.zeros((total, total), dtype=DTYPE)
        for coeff, tp in op.terms:
            result += coeff * to_dense(tp, site_order, dims, op.symbol_table, cap)
        return result
    tp = TensorProduct(op)
    unknown = set(tp) - set(site_order)
    if unknown:
        raise KeyError(f"Operator acts on nodes outside the site order: {sorted(unknown)}")
    return _kron_all([tp.resolve(n, symbols, dims[n]) for n in site_order])


@dataclass
class LocalGate:
    """
    A dense operator acting on a few sites.

    ``matrix`` acts on the Kronecker product of the sites in order.
    """
    sites: Tuple[str, ...]
    dims: Tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        self.sites = tuple(self.sites)
        self.dims = tuple(int(d) for d in self.dims)
        self.matrix = np.asarray(self.matrix, dtype=DTYPE)
        total = int(np.prod(self.dims, dtype=np.int64))
        if self.matrix.shape != (total, total):
            raise ValueError(f"Gate matrix {self.matrix.shape} does not match "
                             f"site dimensions {self.dims}")

    @property
    def tensor(self) -> np.ndarray:
        """The gate with legs ``(out_1, in_1, ..., out_k, in_k)``."""
        k = len(self.sites)
        t = self.matrix.reshape(self.dims + self.dims)
        perm = [i for pair in zip(range(k), range(k, 2 * k)) for i in pair]
        return np.transpose(t, perm)


def exp_local(tp: Mapping[str, Factor], factor: complex,
              symbols: Optional[Mapping[str, np.ndarray]] = None,
              cap: int = GATE_CAP) -> LocalGate:
    """
    The exponential ``exp(factor * P)`` of a tensor product ``P``.

    Only the sites carrying a factor are involved, in the order of ``tp``.
    """
    tp = TensorProduct(tp)
    sites = list(tp)
    mats = [tp.resolve(n, symbols) for n in sites]
    dims = [m.shape[0] for m in mats]
    if int(np.prod(dims, dtype=np.int64)) > cap:
        raise CapabilityError(f"Local gate dimension {int(np.prod(dims))} exceeds the cap {cap}")
    matrix = expm(complex(factor) * _kron_all(mats)) if sites else np.ones((1, 1), dtype=DTYPE)
    return LocalGate(sites, dims, matrix)
