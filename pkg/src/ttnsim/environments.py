"""
Environment blocks for bra/operator/ket sandwiches.

For a directed edge ``(n, m)`` the block ``B[n -> m]`` is the contraction of
the bra, operator and ket tensors of every node on ``n``'s side of the edge.
It is a degree-3 tensor with legs ``(bra, op, ket)`` along the edge. Blocks
are computed lazily and invalidated when a node tensor changes.
"""
from __future__ import annotations

from itertools import count
from typing import Dict, List, Optional, Tuple

import numpy as np

from .ttn import TreeTensorNetwork


def _check_compatible(state: TreeTensorNetwork, op: TreeTensorNetwork):
    if state.topology.undirected_edges() != op.topology.undirected_edges() \
            or set(state.tensors) != set(op.tensors):
        raise ValueError("State and operator live on different trees")
    for node_id, tensor in state.tensors.items():
        shape = op.tensors[node_id].shape
        if shape[-1] != tensor.shape[-1] or shape[-2] != tensor.shape[-1]:
            raise ValueError(f"Physical dimensions at {node_id!r} differ: state "
                             f"{tensor.shape[-1]}, operator {shape[-2:]}")


class _Labels:
    """Integer einsum labels for the three layers around one node."""

    def __init__(self, state, op, node_id):
        fresh = count()
        self.node_id = node_id
        self.neighbours = state.topology.neighbours(node_id)
        self.bra = {nb: next(fresh) for nb in self.neighbours}
        self.op = {nb: next(fresh) for nb in self.neighbours}
        self.ket = {nb: next(fresh) for nb in self.neighbours}
        self.phys_in = next(fresh)
        self.phys_out = next(fresh)
        self.fresh = fresh
        nk = state.tensors[node_id].ndim
        no = op.tensors[node_id].ndim
        self.ket_sub = [0] * nk
        self.op_sub = [0] * no
        for nb in self.neighbours:
            self.ket_sub[state.neighbour_index(node_id, nb)] = self.ket[nb]
            self.op_sub[op.neighbour_index(node_id, nb)] = self.op[nb]
        self.ket_sub[-1] = self.phys_in
        self.bra_sub = [self.bra[nb] if lab != self.phys_in else self.phys_out
                        for nb, lab in zip(self._neighbour_of_leg(state), self.ket_sub)]
        self.op_sub[-2] = self.phys_out
        self.op_sub[-1] = self.phys_in

    def _neighbour_of_leg(self, state):
        legs: List[Optional[str]] = [None] * state.tensors[self.node_id].ndim
        for nb in self.neighbours:
            legs[state.neighbour_index(self.node_id, nb)] = nb
        return legs

    def block(self, nb):
        return [self.bra[nb], self.op[nb], self.ket[nb]]


class EnvironmentCache:
    """
    Lazily computed environment blocks of ``<psi|H|psi>``.

    ``state`` and ``op`` are referenced, not copied: after changing the
    tensor of a node, call :meth:`invalidate` with its id.
    """

    def __init__(self, state: TreeTensorNetwork, op: TreeTensorNetwork):
        _check_compatible(state, op)
        self.state = state
        self.op = op
        self.blocks: Dict[Tuple[str, str], np.ndarray] = {}
        # For each directed edge, the nodes on the source side.
        self._sides: Dict[Tuple[str, str], frozenset] = {}
        topo = state.topology
        for a, b in topo.edges():
            self._sides[(a, b)] = frozenset(topo.subtree_nodes(a, (a, b)))
            self._sides[(b, a)] = frozenset(topo.subtree_nodes(b, (a, b)))

    def invalidate(self, node_id: str):
        """Drops every block whose subtree contains ``node_id``."""
        stale = [key for key in self.blocks if node_id in self._sides[key]]
        for key in stale:
            del self.blocks[key]

    def invalidate_all(self):
        self.blocks.clear()

    def get(self, source: str, target: str) -> np.ndarray:
        """The block ``B[source -> target]``, computed on demand."""
        key = (source, target)
        if key not in self._sides:
            raise KeyError(f"({source!r}, {target!r}) is not an edge")
        if key not in self.blocks:
            # Fill the subtree bottom-up to keep the recursion shallow.
            pending = [key]
            while pending:
                src, tgt = pending[-1]
                missing = [(nb, src) for nb in self.state.topology.neighbours(src)
                           if nb != tgt and (nb, src) not in self.blocks]
                if missing:
                    pending.extend(missing)
                    continue
                pending.pop()
                if (src, tgt) not in self.blocks:
                    self.blocks[(src, tgt)] = self._compute(src, tgt)
        return self.blocks[key]

    def _compute(self, source: str, target: Optional[str]) -> np.ndarray:
        lab = _Labels(self.state, self.op, source)
        ket = self.state.tensors[source]
        operands = [ket, lab.ket_sub]
        for nb in lab.neighbours:
            if nb != target:
                operands += [self.blocks[(nb, source)], lab.block(nb)]
        operands += [self.op.tensors[source], lab.op_sub, ket.conj(), lab.bra_sub]
        out = lab.block(target) if target is not None else []
        return np.einsum(*operands, out, optimize=True)

    def expectation(self, node_id: Optional[str] = None) -> complex:
        """``<psi|H|psi>`` closed at ``node_id`` (the root by default)."""
        node_id = self.state.root_id if node_id is None else node_id
        for nb in self.state.topology.neighbours(node_id):
            self.get(nb, node_id)
        return complex(self._compute(node_id, None))

    # ------------------------------------------------------------------
    # Effective Hamiltonians

    def site_operands(self, node_id: str):
        """Einsum operands and labels for the effective Hamiltonian of one site."""
        lab = _Labels(self.state, self.op, node_id)
        operands = []
        for nb in lab.neighbours:
            operands += [self.get(nb, node_id), lab.block(nb)]
        operands += [self.op.tensors[node_id], lab.op_sub]
        return operands, lab.ket_sub, lab.bra_sub

    def apply_site(self, node_id: str, vector: np.ndarray) -> np.ndarray:
        """Applies the effective site Hamiltonian to a tensor shaped like the site tensor."""
        operands, ket_sub, bra_sub = self.site_operands(node_id)
        return np.einsum(*operands, vector, ket_sub, bra_sub, optimize=True)

    def site_hamiltonian(self, node_id: str) -> np.ndarray:
        """
        Effective site Hamiltonian as a matrix.

        Rows follow the site tensor's legs with the output physical index,
        columns its legs with the input physical index.
        """
        operands, ket_sub, bra_sub = self.site_operands(node_id)
        shape = self.state.tensors[node_id].shape
        dim = int(np.prod(shape))
        h = np.einsum(*operands, bra_sub + ket_sub, optimize=True)
        return h.reshape(dim, dim)

    def link_hamiltonian(self, a: str, b: str) -> np.ndarray:
        """
        Effective Hamiltonian of the bond between ``a`` and ``b``.

        The bond tensor has legs ``(towards a, towards b)``; both blocks
        ``B[a -> b]`` and ``B[b -> a]`` enter.
        """
        left = self.get(a, b)
        right = self.get(b, a)
        h = np.einsum("xoy,zow->xzyw", left, right, optimize=True)
        d1, d2 = left.shape[0], right.shape[0]
        return h.reshape(d1 * d2, d1 * d2)

    def apply_link(self, a: str, b: str, bond: np.ndarray) -> np.ndarray:
        left = self.get(a, b)
        right = self.get(b, a)
        return np.einsum("xoy,zow,yw->xz", left, right, bond, optimize=True)

    def two_site_operands(self, a: str, b: str):
        """Operands for the effective Hamiltonian of the contracted pair ``(a, b)``."""
        la = _Labels(self.state, self.op, a)
        lb = _Labels(self.state, self.op, b)
        shift = next(la.fresh) + 1
        remap = {}

        def shifted(x):
            if x not in remap:
                remap[x] = x + shift
            return remap[x]

        lb_ket = [shifted(x) for x in lb.ket_sub]
        lb_bra = [shifted(x) for x in lb.bra_sub]
        lb_op = [shifted(x) for x in lb.op_sub]
        # Join the operator bond between a and b.
        ka = self.op.neighbour_index(a, b)
        kb = self.op.neighbour_index(b, a)
        lb_op[kb] = la.op_sub[ka]
        operands = []
        for nb in la.neighbours:
            if nb != b:
                operands += [self.get(nb, a), la.block(nb)]
        for nb in lb.neighbours:
            if nb != a:
                operands += [self.get(nb, b), [shifted(x) for x in lb.block(nb)]]
        operands += [self.op.tensors[a], la.op_sub, self.op.tensors[b], lb_op]
        sa = self.state.neighbour_index(a, b)
        sb = self.state.neighbour_index(b, a)
        ket_sub = [x for i, x in enumerate(la.ket_sub) if i != sa] + \
                  [x for i, x in enumerate(lb_ket) if i != sb]
        bra_sub = [x for i, x in enumerate(la.bra_sub) if i != sa] + \
                  [x for i, x in enumerate(lb_bra) if i != sb]
        return operands, ket_sub, bra_sub

    def apply_two_site(self, a: str, b: str, theta: np.ndarray) -> np.ndarray:
        operands, ket_sub, bra_sub = self.two_site_operands(a, b)
        return np.einsum(*operands, theta, ket_sub, bra_sub, optimize=True)

    def two_site_hamiltonian(self, a: str, b: str) -> np.ndarray:
        operands, ket_sub, bra_sub = self.two_site_operands(a, b)
        h = np.einsum(*operands, bra_sub + ket_sub, optimize=True)
        dim = int(np.sqrt(h.size))
        return h.reshape(dim, dim)


def operator_expectation(state: TreeTensorNetwork, op: TreeTensorNetwork) -> complex:
    """``<psi|H|psi>`` contracted from the leaves to the root."""
    return EnvironmentCache(state, op).expectation()
