"""
Tree tensor network states.

A :class:`TTNS` is a tree tensor network with exactly one open (physical)
leg on every node. Sites without physical meaning carry a dimension-1 leg.
"""
from __future__ import annotations

from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .operators import Factor, TensorProduct
from .tensor_core import DTYPE, SplitMode, SvdParameters
from .tree import TreeTopology
from .ttn import TreeTensorNetwork


class TTNS(TreeTensorNetwork):
    """A tree tensor network state."""

    def check_state(self):
        for node_id in self.tensors:
            nopen = self.node(node_id).nopen
            if nopen != 1:
                raise ValueError(f"Node {node_id!r} has {nopen} open legs; a state needs exactly one")

    @classmethod
    def from_tensors(cls, topology: TreeTopology, tensors):
        state = super().from_tensors(topology, tensors)
        state.check_state()
        return state

    @classmethod
    def from_dense_vector(cls, vector: np.ndarray, topology: TreeTopology,
                          dims: Mapping[str, int], params: Optional[SvdParameters] = None):
        """Decomposes a state vector whose sites follow the depth-first order of ``topology``."""
        order = topology.depth_first()
        shape = tuple(dims[n] for n in order)
        return cls.from_dense(np.asarray(vector).reshape(shape), topology,
                              {n: 1 for n in order}, params)

    def physical_dims(self) -> Dict[str, int]:
        return {n: t.shape[-1] for n, t in self.tensors.items()}

    def site_order(self):
        return self.topology.depth_first()

    def to_vector(self) -> np.ndarray:
        """The dense state vector, sites in depth-first order."""
        return self.completely_contract_tree().reshape(-1)

    # ------------------------------------------------------------------
    # Inner products

    def scalar_product(self, other: Optional["TTNS"] = None) -> complex:
        """
        ``<other|self>``; with no argument, ``<self|self>``.

        When the state carries an orthogonality centre, the norm is read off
        the centre tensor alone.
        """
        if other is None and self.orthogonality_center is not None:
            center = self.tensors[self.orthogonality_center]
            return complex(np.vdot(center, center))
        return sandwich(self if other is None else other, self, {})

    def norm(self) -> float:
        return float(np.sqrt(max(self.scalar_product().real, 0.0)))

    def normalise(self):
        nrm = self.norm()
        target = self.orthogonality_center or self.root_id
        self.tensors[target] = self.tensors[target] / nrm

    def expectation_value(self, tp: Mapping[str, Factor],
                          symbols: Optional[Mapping[str, np.ndarray]] = None) -> complex:
        """
        ``<psi|P|psi>`` for a tensor product ``P``.

        An empty product gives the squared norm. A single factor on a state
        with an orthogonality centre is evaluated locally after moving the
        centre onto the factor's node; everything else uses the full
        contraction of bra, operator and ket layers.
        """
        tp = TensorProduct(tp)
        dims = self.physical_dims()
        ops = {}
        for node_id in tp:
            if node_id not in self.tensors:
                raise KeyError(f"Operator acts on unknown node {node_id!r}")
            ops[node_id] = tp.resolve(node_id, symbols, dims[node_id])
        if not ops:
            return self.scalar_product()
        if len(ops) == 1 and self.orthogonality_center is not None:
            (node_id, op), = ops.items()
            self.move_orthogonalization_center(node_id)
            center = self.tensors[node_id]
            return complex(np.vdot(center, np.tensordot(center, op, axes=(-1, 1))))
        return sandwich(self, self, ops)

    # ------------------------------------------------------------------
    # Local updates

    def apply_single_site(self, node_id: str, matrix: np.ndarray):
        """Applies a matrix to the physical leg of one node."""
        tensor = self.tensors[node_id]
        self.tensors[node_id] = np.tensordot(tensor, np.asarray(matrix, dtype=DTYPE),
                                             axes=(-1, 1))
        if self.orthogonality_center not in (None, node_id):
            # Unitaries keep the gauge, general matrices do not.
            m = np.asarray(matrix)
            if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-12):
                self.orthogonality_center = None

    def pad_bond_dimensions(self, targets: Mapping[Tuple[str, str], int]):
        """
        Enlarges bonds with zeros to the given dimensions.

        ``targets`` maps ``(parent, child)`` edges to new dimensions. The
        represented state does not change. If the state was canonical, the
        canonical form is rebuilt at the same centre while keeping the
        padded dimensions.
        """
        for (parent, child), target in targets.items():
            if self.topology.parent.get(child) != parent:
                raise KeyError(f"({parent!r}, {child!r}) is not an edge")
            current = self.tensors[child].shape[0]
            if target < current:
                raise ValueError(f"Target {target} for edge ({parent!r}, {child!r}) is below "
                                 f"the current dimension {current}")
            if target == current:
                continue
            k = self.neighbour_index(parent, child)
            self.tensors[child] = _pad_leg(self.tensors[child], 0, target)
            self.tensors[parent] = _pad_leg(self.tensors[parent], k, target)
        if self.orthogonality_center is not None:
            self.canonical_form(self.orthogonality_center, mode=SplitMode.KEEP)


def _pad_leg(tensor: np.ndarray, leg: int, target: int) -> np.ndarray:
    widths = [(0, 0)] * tensor.ndim
    widths[leg] = (0, target - tensor.shape[leg])
    return np.pad(tensor, widths)


def feasible_bond_dims(topology: TreeTopology, phys_dims: Mapping[str, int],
                       max_bond_dim: int) -> Dict[Tuple[str, str], int]:
    """
    Largest bond dimensions up to ``max_bond_dim`` that a canonical state can carry.

    No bond may exceed the product of the other dimensions at either of its
    end nodes; the bounds are iterated to a fixpoint.
    """
    dims = {e: max_bond_dim for e in topology.edges()}

    def bond(a, b):
        return dims[(a, b)] if topology.parent.get(b) == a else dims[(b, a)]

    changed = True
    while changed:
        changed = False
        for (p, c) in list(dims):
            limit = dims[(p, c)]
            for end, other in ((p, c), (c, p)):
                rest = phys_dims[end]
                for nb in topology.neighbours(end):
                    if nb != other:
                        rest *= bond(end, nb)
                limit = min(limit, rest)
            if limit < dims[(p, c)]:
                dims[(p, c)] = limit
                changed = True
    return dims


def product_state(topology: TreeTopology, local_states: Mapping[str, np.ndarray]) -> TTNS:
    """A product state with all bonds of dimension one."""
    tensors = {}
    for node_id in topology.depth_first():
        if node_id not in local_states:
            raise KeyError(f"No local state given for node {node_id!r}")
        vec = np.asarray(local_states[node_id], dtype=DTYPE).reshape(-1)
        if not np.any(vec):
            raise ValueError(f"Local state of {node_id!r} is the zero vector")
        nb = len(topology.neighbours(node_id))
        tensors[node_id] = vec.reshape((1,) * nb + (vec.size,))
    state = TTNS.from_tensors(topology, tensors)
    if all(np.isclose(np.linalg.norm(local_states[n]), 1.0) for n in topology.depth_first()):
        state.orthogonality_center = topology.root
    return state


def basis_product_state(topology: TreeTopology, levels: Mapping[str, int],
                        dims: Optional[Mapping[str, int]] = None) -> TTNS:
    """Product of computational basis states ``|levels[node]>``."""
    local = {}
    for node_id in topology.depth_first():
        d = 2 if dims is None else dims[node_id]
        vec = np.zeros(d, dtype=DTYPE)
        vec[levels[node_id]] = 1
        local[node_id] = vec
    return product_state(topology, local)


def sandwich(bra: TreeTensorNetwork, ket: TreeTensorNetwork,
             ops: Mapping[str, np.ndarray]) -> complex:
    """
    ``<bra| (tensor product of ops) |ket>`` contracted from the leaves to the root.

    Both states must share topology and physical dimensions; sites missing
    from ``ops`` act as the identity.
    """
    if bra.topology.undirected_edges() != ket.topology.undirected_edges() \
            or bra.root_id != ket.root_id:
        raise ValueError("Bra and ket have different topologies")
    blocks: Dict[str, np.ndarray] = {}
    for node_id in reversed(ket.topology.depth_first()):
        k = ket.tensors[node_id]
        if node_id in ops:
            k = np.tensordot(k, ops[node_id], axes=(-1, 1))
        b = bra.tensors[node_id].conj()
        if b.shape != k.shape:
            raise ValueError(f"Bra and ket tensors of {node_id!r} have shapes {b.shape} and {k.shape}")
        has_parent = ket.topology.parent[node_id] is not None
        children = ket.topology.children[node_id]
        n = k.ndim
        ket_idx = list(range(n))
        bra_idx = list(range(n, 2 * n))
        bra_idx[-1] = ket_idx[-1]
        operands = [k, ket_idx, b, bra_idx]
        first = 1 if has_parent else 0
        for j, c in enumerate(children):
            leg = first + j
            operands += [blocks.pop(c), [bra_idx[leg], ket_idx[leg]]]
        out = [bra_idx[0], ket_idx[0]] if has_parent else []
        blocks[node_id] = np.einsum(*operands, out, optimize=True)
    return complex(blocks[ket.root_id])
