"""
Tree tensor network operators and their compilation from symbolic Hamiltonians.

A :class:`TTNO` carries two open legs per node, output first and input
second. Hamiltonians are compiled through a :class:`StateDiagram`: a
hypergraph with one vertex set per tree edge and one hyperedge set per tree
node. Each vertex becomes an index of the corresponding virtual bond and each
hyperedge contributes its (weighted) operator to the tensor entry selected by
the vertices it touches.

Compression of the sum of single-term diagrams proceeds edge by edge from the
leaves to the root. On every edge, the terms form a bipartite graph between
their distinct subtree-side parts and their distinct remaining parts, weighted
by coefficients. A minimum vertex cover of that graph (König's theorem, from a
maximum matching) gives the smallest set of vertices through which every term
can be routed; a cover vertex on the subtree side keeps its part and passes the
weights on, a cover vertex on the other side collects a weighted sum of
subtree-side parts.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .environments import operator_expectation
from .operators import Hamiltonian, pad_with_identities
from .tensor_core import DTYPE, SvdParameters
from .tree import TreeTopology
from .ttn import TreeTensorNetwork

# Relative singular-value cutoff that decides numerical rank in ttno_from_dense.
DENSE_RANK_TOL = 1e-10


class TTNO(TreeTensorNetwork):
    """A tree tensor network operator: legs parent, children, output, input."""

    def check_operator(self):
        for node_id, tensor in self.tensors.items():
            nopen = self.node(node_id).nopen
            if nopen != 2:
                raise ValueError(f"Node {node_id!r} has {nopen} open legs; an operator needs two")
            if tensor.shape[-1] != tensor.shape[-2]:
                raise ValueError(f"Node {node_id!r} has output dimension {tensor.shape[-2]} "
                                 f"but input dimension {tensor.shape[-1]}")

    @classmethod
    def from_tensors(cls, topology: TreeTopology, tensors):
        op = super().from_tensors(topology, tensors)
        op.check_operator()
        return op

    def physical_dims(self) -> Dict[str, int]:
        return {n: t.shape[-1] for n, t in self.tensors.items()}

    def to_matrix(self) -> np.ndarray:
        """Dense matrix with sites in depth-first order."""
        full = self.completely_contract_tree()
        n = full.ndim // 2
        perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
        dim = int(np.sqrt(full.size))
        return np.transpose(full, perm).reshape(dim, dim)


# ----------------------------------------------------------------------
# State diagrams


@dataclass
class HyperEdge:
    """
    One operator entry of a state diagram.

    Attributes:
        label: Symbol of the single-site operator.
        weight: Scalar multiplying the operator.
        vertices: Vertex index on the edge towards each neighbour.
    """
    label: str
    weight: complex = 1.0
    vertices: Dict[str, int] = field(default_factory=dict)


@dataclass
class StateDiagram:
    """
    Hypergraph representation of an operator on a tree.

    ``hyperedges[node]`` lists the hyperedges of a node and
    ``vertex_counts[(parent, child)]`` the number of vertices on an edge;
    vertex indices on an edge run from zero.
    """
    topology: TreeTopology
    hyperedges: Dict[str, List[HyperEdge]] = field(default_factory=dict)
    vertex_counts: Dict[Tuple[str, str], int] = field(default_factory=dict)

    def edge_key(self, a: str, b: str) -> Tuple[str, str]:
        return (a, b) if self.topology.parent.get(b) == a else (b, a)

    def bond_dims(self) -> Dict[Tuple[str, str], int]:
        return {e: max(1, self.vertex_counts.get(e, 0)) for e in self.topology.edges()}

    def check(self):
        """Verifies that vertices only touch hyperedges of the nodes they join."""
        used: Dict[Tuple[str, str], set] = {e: set() for e in self.topology.edges()}
        for node_id, edges in self.hyperedges.items():
            neighbours = set(self.topology.neighbours(node_id))
            for he in edges:
                if set(he.vertices) != neighbours:
                    raise ValueError(f"Hyperedge at {node_id!r} attaches to {sorted(he.vertices)} "
                                     f"instead of its neighbours {sorted(neighbours)}")
                for nb, v in he.vertices.items():
                    key = self.edge_key(node_id, nb)
                    if not 0 <= v < self.vertex_counts[key]:
                        raise ValueError(f"Vertex {v} out of range on edge {key}")
                    used[key].add(v)
        for key, vs in used.items():
            if vs != set(range(self.vertex_counts.get(key, 0))):
                raise ValueError(f"Vertex indices on edge {key} are not 0..n-1")

    def terms(self) -> List[Tuple[complex, Dict[str, str]]]:
        """Expands the diagram into its weighted operator strings."""
        topo = self.topology
        order = topo.depth_first()
        result: Dict[Tuple[str, ...], complex] = {}

        def extend(pos, chosen, weight):
            if pos == len(order):
                key = tuple(chosen[n].label for n in order)
                result[key] = result.get(key, 0) + weight
                return
            node_id = order[pos]
            parent = topo.parent[node_id]
            for he in self.hyperedges.get(node_id, []):
                if parent is not None and he.vertices[parent] != chosen[parent].vertices[node_id]:
                    continue
                chosen[node_id] = he
                extend(pos + 1, chosen, weight * he.weight)
                del chosen[node_id]

        extend(0, {}, 1.0)
        return [(w, dict(zip(order, key))) for key, w in result.items() if w != 0]


def single_term_diagram(tp: Mapping[str, str], topology: TreeTopology,
                        coefficient: complex = 1.0,
                        dims: Optional[Mapping[str, int]] = None) -> StateDiagram:
    """
    Diagram of one tensor product: one hyperedge per node, one vertex per edge.

    Missing factors become identities (``dims`` gives their dimension, two by
    default). The coefficient is carried by the hyperedge of the
    lexicographically smallest node.
    """
    nodes = topology.depth_first()
    dims = dims or {n: 2 for n in nodes}
    padded = pad_with_identities(tp, nodes, dims)
    unknown = set(padded) - set(nodes)
    if unknown:
        raise KeyError(f"Factors on nodes outside the tree: {sorted(unknown)}")
    weight_node = min(nodes)
    diagram = StateDiagram(topology.copy())
    for node_id in nodes:
        label = padded[node_id]
        if not isinstance(label, str):
            raise TypeError("State diagrams need symbolic factors; symbolise the Hamiltonian first")
        weight = complex(coefficient) if node_id == weight_node else 1.0
        verts = {nb: 0 for nb in topology.neighbours(node_id)}
        diagram.hyperedges[node_id] = [HyperEdge(label, weight, verts)]
    diagram.vertex_counts = {e: 1 for e in topology.edges()}
    return diagram


def _min_vertex_cover(n_left: int, n_right: int, edges: Sequence[Tuple[int, int]]):
    """Minimum vertex cover of a bipartite graph via a maximum matching (König)."""
    rows = [e[0] for e in edges]
    cols = [e[1] for e in edges]
    graph = csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(n_left, n_right))
    match_left = maximum_bipartite_matching(graph, perm_type="column")
    match_right = -np.ones(n_right, dtype=int)
    for u, v in enumerate(match_left):
        if v >= 0:
            match_right[v] = u
    adjacency: List[List[int]] = [[] for _ in range(n_left)]
    for u, v in edges:
        adjacency[u].append(v)
    seen_left = np.zeros(n_left, dtype=bool)
    seen_right = np.zeros(n_right, dtype=bool)
    queue = deque(u for u in range(n_left) if match_left[u] < 0)
    for u in queue:
        seen_left[u] = True
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if not seen_right[v] and match_left[u] != v:
                seen_right[v] = True
                w = match_right[v]
                if w >= 0 and not seen_left[w]:
                    seen_left[w] = True
                    queue.append(w)
    return ~seen_left, seen_right


def _compress_terms(terms: Sequence[Tuple[complex, Mapping[str, str]]],
                    topology: TreeTopology) -> StateDiagram:
    diagram = StateDiagram(topology.copy(), {n: [] for n in topology.depth_first()}, {})
    # A working term: weight, labels of unprocessed nodes, vertices of processed edges by child.
    working = [(complex(w), dict(labels), {}) for w, labels in terms if w != 0]
    for node_id in reversed(topology.depth_first()):
        parent = topology.parent[node_id]
        children = topology.children[node_id]
        if parent is None:
            merged: Dict[tuple, complex] = {}
            for w, labels, bonds in working:
                key = (labels[node_id],) + tuple(bonds[c] for c in children)
                merged[key] = merged.get(key, 0) + w
            for key, w in merged.items():
                if w != 0:
                    verts = dict(zip(children, key[1:]))
                    diagram.hyperedges[node_id].append(HyperEdge(key[0], w, verts))
            break
        left_ids: Dict[tuple, int] = {}
        right_ids: Dict[tuple, int] = {}
        right_parts: List[tuple] = []
        weights: Dict[Tuple[int, int], complex] = {}
        for w, labels, bonds in working:
            lkey = (labels[node_id],) + tuple(bonds[c] for c in children)
            rlabels = tuple(sorted((n, l) for n, l in labels.items() if n != node_id))
            rbonds = tuple(sorted((c, v) for c, v in bonds.items() if c not in children))
            rkey = (rlabels, rbonds)
            li = left_ids.setdefault(lkey, len(left_ids))
            if rkey not in right_ids:
                right_ids[rkey] = len(right_ids)
                right_parts.append(rkey)
            ri = right_ids[rkey]
            weights[(li, ri)] = weights.get((li, ri), 0) + w
        weights = {k: w for k, w in weights.items() if w != 0}
        left_keys = list(left_ids)
        cover_left, cover_right = _min_vertex_cover(len(left_keys), len(right_parts), list(weights))
        vertex_of_left: Dict[int, int] = {}
        vertex_of_right: Dict[int, int] = {}
        # Vertex indices in order of first appearance among the weighted pairs.
        for li, ri in weights:
            if cover_left[li]:
                vertex_of_left.setdefault(li, len(vertex_of_left) + len(vertex_of_right))
            else:
                vertex_of_right.setdefault(ri, len(vertex_of_left) + len(vertex_of_right))
        diagram.vertex_counts[(parent, node_id)] = len(vertex_of_left) + len(vertex_of_right)
        new_working = []
        for li, v in vertex_of_left.items():
            lkey = left_keys[li]
            verts = dict(zip(children, lkey[1:]))
            verts[parent] = v
            diagram.hyperedges[node_id].append(HyperEdge(lkey[0], 1.0, verts))
        right_done = set()
        for (li, ri), w in weights.items():
            rlabels, rbonds = right_parts[ri]
            if cover_left[li]:
                bonds = dict(rbonds)
                bonds[node_id] = vertex_of_left[li]
                new_working.append((w, dict(rlabels), bonds))
            else:
                lkey = left_keys[li]
                verts = dict(zip(children, lkey[1:]))
                verts[parent] = vertex_of_right[ri]
                diagram.hyperedges[node_id].append(HyperEdge(lkey[0], w, verts))
                if ri not in right_done:
                    right_done.add(ri)
                    bonds = dict(rbonds)
                    bonds[node_id] = vertex_of_right[ri]
                    new_working.append((1.0, dict(rlabels), bonds))
        working = new_working
    for node_id in topology.depth_first():
        for he in diagram.hyperedges[node_id]:
            he.vertices = {nb: he.vertices[nb] for nb in topology.neighbours(node_id)}
    return diagram


def combine_and_compress(diagrams: Sequence[StateDiagram]) -> StateDiagram:
    """
    Sums state diagrams on one tree into a compressed diagram.

    Operator strings occurring several times are merged with their weights
    added; the remaining terms are routed through a minimal number of
    vertices per edge.
    """
    if not diagrams:
        raise ValueError("Nothing to combine")
    topology = diagrams[0].topology
    for d in diagrams[1:]:
        if d.topology.undirected_edges() != topology.undirected_edges() \
                or d.topology.root != topology.root:
            raise ValueError("State diagrams live on different trees")
    order = topology.depth_first()
    merged: Dict[Tuple[str, ...], complex] = {}
    for d in diagrams:
        for w, labels in d.terms():
            key = tuple(labels[n] for n in order)
            merged[key] = merged.get(key, 0) + w
    terms = [(w, dict(zip(order, key))) for key, w in merged.items() if w != 0]
    return _compress_terms(terms, topology)


def state_diagram_from_hamiltonian(ham: Hamiltonian, topology: TreeTopology,
                                   dims: Mapping[str, int]) -> Tuple[StateDiagram, Hamiltonian]:
    """Compressed diagram of a Hamiltonian and the symbol-complete Hamiltonian it refers to."""
    nodes = topology.depth_first()
    ham = ham.symbolised().with_identities(dims)
    terms = ham.canonical_terms(nodes, dims)
    diagram = _compress_terms([(c, dict(tp)) for c, tp in terms], topology)
    return diagram, ham


def ttno_from_state_diagram(diagram: StateDiagram, symbols: Mapping[str, np.ndarray],
                            dims: Mapping[str, int]) -> TTNO:
    """
    Reads a TTNO off an indexed state diagram.

    Every hyperedge adds ``weight * symbols[label]`` to the block selected by
    its vertex indices.
    """
    topo = diagram.topology
    bond = diagram.bond_dims()
    tensors = {}
    for node_id in topo.depth_first():
        d = dims[node_id]
        neighbours = topo.neighbours(node_id)
        shape = tuple(bond[diagram.edge_key(node_id, nb)] for nb in neighbours) + (d, d)
        tensor = np.zeros(shape, dtype=DTYPE)
        for he in diagram.hyperedges.get(node_id, []):
            if he.label not in symbols:
                raise KeyError(f"Unknown operator symbol {he.label!r}")
            matrix = np.asarray(symbols[he.label], dtype=DTYPE)
            if matrix.shape != (d, d):
                raise ValueError(f"Symbol {he.label!r} has shape {matrix.shape}, "
                                 f"node {node_id!r} needs ({d}, {d})")
            index = tuple(he.vertices[nb] for nb in neighbours)
            tensor[index] += he.weight * matrix
        tensors[node_id] = tensor
    return TTNO.from_tensors(topo, tensors)


def ttno_from_hamiltonian(ham: Hamiltonian, topology: TreeTopology,
                          dims: Optional[Mapping[str, int]] = None) -> TTNO:
    """Compiles a Hamiltonian into a TTNO through a compressed state diagram."""
    dims = dims or {n: 2 for n in topology.depth_first()}
    diagram, ham = state_diagram_from_hamiltonian(ham, topology, dims)
    return ttno_from_state_diagram(diagram, ham.symbol_table, dims)


def identity_ttno(topology: TreeTopology, dims: Mapping[str, int]) -> TTNO:
    ham = Hamiltonian()
    ham.add_term(1.0, {})
    return ttno_from_hamiltonian(ham, topology, dims)


def zero_ttno(topology: TreeTopology, dims: Mapping[str, int]) -> TTNO:
    return ttno_from_hamiltonian(Hamiltonian(), topology, dims)


def ttno_from_dense(matrix: np.ndarray, topology: TreeTopology, dims: Mapping[str, int],
                    params: Optional[SvdParameters] = None) -> TTNO:
    """
    Decomposes a dense operator into a TTNO by successive SVDs.

    The matrix acts on the sites in depth-first order of ``topology``. Without
    explicit ``params`` singular values below ``DENSE_RANK_TOL`` times the
    largest are dropped, so the bond dimensions are the numerical operator
    ranks across each edge.
    """
    order = topology.depth_first()
    phys = [dims[n] for n in order]
    total = int(np.prod(phys, dtype=np.int64))
    matrix = np.asarray(matrix, dtype=DTYPE)
    if matrix.shape != (total, total):
        raise ValueError(f"Matrix of shape {matrix.shape} does not act on the "
                         f"{total}-dimensional space of the tree")
    n = len(order)
    tensor = matrix.reshape(tuple(phys) + tuple(phys))
    interleave = [i for pair in zip(range(n), range(n, 2 * n)) for i in pair]
    tensor = np.transpose(tensor, interleave)
    params = params or SvdParameters(rel_tol=DENSE_RANK_TOL)
    return TTNO.from_dense(tensor, topology, {nd: 2 for nd in order}, params)


def expectation_value_ttno(psi: TreeTensorNetwork, op: TTNO) -> complex:
    """``<psi|op|psi>`` via environment blocks from the leaves to the root."""
    return operator_expectation(psi, op)


def stored_entries(op: TTNO) -> int:
    return op.total_entries()
