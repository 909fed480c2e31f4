"""
Tree tensor networks.

A :class:`TreeTensorNetwork` pairs a :class:`~ttnsim.tree.TreeTopology` with
one tensor per node. Every tensor is kept in the leg order

    parent -> children (in child order) -> open legs

so the index of a leg towards a neighbour can always be read off the
topology. Leg permutations are applied to the stored arrays right away.
"""
from __future__ import annotations

import copy
import io
import json
import zipfile
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .tensor_core import (DTYPE, ContractionMode, SplitMode, SvdParameters,
                          contr_truncated_svd_splitting, load_tensor, save_tensor,
                          tensor_qr, tensor_svd, truncate_singular_values,
                          truncated_svd)
from .tree import TreeTopology


class NotCanonicalError(RuntimeError):
    """Raised when an operation requires an orthogonality centre."""


@dataclass(frozen=True)
class Node:
    """
    Read-only view of one node's leg bookkeeping.

    The leg towards the parent (if any) has index 0, the legs towards the
    children follow in child order, and the open legs occupy the tail.
    """
    identifier: str
    parent: Optional[str]
    children: Tuple[str, ...]
    shape: Tuple[int, ...]

    @property
    def nneighbours(self) -> int:
        return len(self.children) + (self.parent is not None)

    @property
    def neighbours(self) -> List[str]:
        head = [] if self.parent is None else [self.parent]
        return head + list(self.children)

    @property
    def open_legs(self) -> List[int]:
        return list(range(self.nneighbours, len(self.shape)))

    @property
    def nopen(self) -> int:
        return len(self.shape) - self.nneighbours

    @property
    def open_dimensions(self) -> Tuple[int, ...]:
        return self.shape[self.nneighbours:]

    def is_root(self) -> bool:
        return self.parent is None

    def is_leaf(self) -> bool:
        return not self.children

    def neighbour_index(self, neighbour_id: str) -> int:
        if neighbour_id == self.parent:
            return 0
        try:
            return self.children.index(neighbour_id) + (self.parent is not None)
        except ValueError:
            raise KeyError(f"{neighbour_id!r} is not a neighbour of {self.identifier!r}") from None


@dataclass
class LegSpecification:
    """
    Assignment of legs to one of the two nodes created by a split.

    Attributes:
        takes_parent: This node keeps the leg towards the parent.
        children: Children whose legs move to this node.
        open_legs: Indices (in the node being split) of open legs moving to
            this node, in the order they should appear.
        becomes_root: When splitting the root, marks the new root.
    """
    takes_parent: bool = False
    children: List[str] = field(default_factory=list)
    open_legs: List[int] = field(default_factory=list)
    becomes_root: bool = False


class TreeTensorNetwork:
    """A tensor network whose graph is a tree."""

    def __init__(self):
        self.topology = TreeTopology()
        self.tensors: Dict[str, np.ndarray] = {}
        self.orthogonality_center: Optional[str] = None

    # ------------------------------------------------------------------
    # Access

    def __getitem__(self, node_id: str) -> np.ndarray:
        return self.tensors[node_id]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.topology.depth_first())

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def root_id(self) -> Optional[str]:
        return self.topology.root

    def node(self, node_id: str) -> Node:
        return Node(node_id, self.topology.parent[node_id],
                    tuple(self.topology.children[node_id]),
                    tuple(self.tensors[node_id].shape))

    @property
    def nodes(self) -> Dict[str, Node]:
        return {n: self.node(n) for n in self.topology.depth_first()}

    def neighbour_index(self, node_id: str, neighbour_id: str) -> int:
        parent = self.topology.parent[node_id]
        if neighbour_id == parent:
            return 0
        try:
            return self.topology.children[node_id].index(neighbour_id) + (parent is not None)
        except ValueError:
            raise KeyError(f"{neighbour_id!r} is not a neighbour of {node_id!r}") from None

    def bond_dim(self, a: str, b: str) -> int:
        return self.tensors[a].shape[self.neighbour_index(a, b)]

    def bond_dims(self) -> Dict[Tuple[str, str], int]:
        """Bond dimension for every ``(parent, child)`` edge."""
        return {(p, c): self.tensors[c].shape[0] for p, c in self.topology.edges()}

    def max_bond_dim(self) -> int:
        dims = self.bond_dims().values()
        return max(dims) if dims else 1

    def copy(self):
        new = copy.copy(self)
        new.topology = self.topology.copy()
        new.tensors = {k: v.copy() for k, v in self.tensors.items()}
        return new

    def conj(self):
        new = self.copy()
        new.tensors = {k: v.conj() for k, v in new.tensors.items()}
        return new

    def total_entries(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    # ------------------------------------------------------------------
    # Construction

    def add_root(self, node_id: str, tensor: np.ndarray):
        self.topology.add_root(node_id)
        self.tensors[node_id] = np.asarray(tensor, dtype=DTYPE)

    def add_child_to_parent(self, child_id: str, tensor: np.ndarray, child_leg: int,
                            parent_id: str, parent_leg: int):
        """
        Attaches a new node below ``parent_id``.

        ``child_leg`` is the leg of the new tensor and ``parent_leg`` the
        (currently open) leg of the parent's tensor that are connected.
        Both tensors are re-ordered to the leg convention afterwards.
        """
        if child_id in self.tensors:
            raise ValueError(f"Node {child_id!r} already exists")
        if parent_id not in self.tensors:
            raise KeyError(f"Unknown parent {parent_id!r}")
        tensor = np.asarray(tensor, dtype=DTYPE)
        parent_node = self.node(parent_id)
        if parent_leg not in parent_node.open_legs:
            raise ValueError(f"Leg {parent_leg} of {parent_id!r} is not an open leg")
        if not 0 <= child_leg < tensor.ndim:
            raise ValueError(f"Tensor of {child_id!r} has no leg {child_leg}")
        if tensor.shape[child_leg] != parent_node.shape[parent_leg]:
            raise ValueError(f"Dimension mismatch: leg {child_leg} of {child_id!r} has dimension "
                             f"{tensor.shape[child_leg]} but leg {parent_leg} of {parent_id!r} "
                             f"has dimension {parent_node.shape[parent_leg]}")
        self.topology.add_child(parent_id, child_id)
        self.tensors[child_id] = np.moveaxis(tensor, child_leg, 0)
        self.tensors[parent_id] = np.moveaxis(self.tensors[parent_id], parent_leg,
                                              parent_node.nneighbours)

    @classmethod
    def from_tensors(cls, topology: TreeTopology, tensors: Dict[str, np.ndarray]):
        """Builds a network from tensors already in the leg convention."""
        ttn = cls()
        ttn.topology = topology.copy()
        ttn.tensors = {n: np.asarray(tensors[n], dtype=DTYPE) for n in topology.depth_first()}
        if set(tensors) != set(ttn.tensors):
            raise ValueError("Tensors and topology have different node sets")
        for parent, child in topology.edges():
            d_parent = ttn.bond_dim(parent, child)
            d_child = ttn.tensors[child].shape[0]
            if d_parent != d_child:
                raise ValueError(f"Bond ({parent!r}, {child!r}) has dimension {d_parent} "
                                 f"at the parent but {d_child} at the child")
        return ttn

    def replace_tensor(self, node_id: str, tensor: np.ndarray):
        """Replaces a node's tensor, keeping its neighbour dimensions."""
        node = self.node(node_id)
        tensor = np.asarray(tensor, dtype=DTYPE)
        if tensor.ndim != len(node.shape) or tensor.shape[:node.nneighbours] != node.shape[:node.nneighbours]:
            raise ValueError(f"Shape {tensor.shape} incompatible with node {node_id!r} "
                             f"of shape {node.shape}")
        self.tensors[node_id] = tensor

    # ------------------------------------------------------------------
    # Contraction

    def open_leg_order(self) -> List[Tuple[str, int]]:
        """``(node, open leg position)`` pairs in the order of the full contraction."""
        order = []
        for node_id in self.topology.depth_first():
            order.extend((node_id, i) for i in range(self.node(node_id).nopen))
        return order

    def completely_contract_tree(self) -> np.ndarray:
        """
        Contracts the whole network into one tensor.

        The open legs appear in depth-first pre-order from the root, children
        in child order, each node's open legs in their stored order.
        """
        if self.root_id is None:
            return np.ones((), dtype=DTYPE)
        return self._contract_subtree(self.root_id)

    def _contract_subtree(self, node_id: str) -> np.ndarray:
        result = self.tensors[node_id]
        first_child_leg = 0 if self.topology.parent[node_id] is None else 1
        for child in self.topology.children[node_id]:
            sub = self._contract_subtree(child)
            result = np.tensordot(result, sub, axes=(first_child_leg, 0))
        return result

    def contract_nodes(self, a: str, b: str, new_id: Optional[str] = None):
        """
        Contracts two adjacent nodes into one.

        The new node's legs are: parent, remaining children of ``a``,
        remaining children of ``b``, open legs of ``a``, open legs of ``b``.
        """
        if not self.topology.are_adjacent(a, b):
            raise ValueError(f"Nodes {a!r} and {b!r} are not adjacent")
        new_id = new_id if new_id is not None else a + "_contr_" + b
        if new_id in self.tensors and new_id not in (a, b):
            raise ValueError(f"Node {new_id!r} already exists")
        node_a, node_b = self.node(a), self.node(b)
        upper, lower = (a, b) if node_b.parent == a else (b, a)
        parent = self.topology.parent[upper]
        theta = np.tensordot(self.tensors[a], self.tensors[b],
                             axes=(node_a.neighbour_index(b), node_b.neighbour_index(a)))
        labels = ([("nb", n) for n in node_a.neighbours if n != b]
                  + [("open_a", i) for i in range(node_a.nopen)]
                  + [("nb", n) for n in node_b.neighbours if n != a]
                  + [("open_b", i) for i in range(node_b.nopen)])
        children = ([c for c in node_a.children if c != b]
                    + [c for c in node_b.children if c != a])
        target = ([("nb", parent)] if parent is not None else []) \
            + [("nb", c) for c in children] \
            + [("open_a", i) for i in range(node_a.nopen)] \
            + [("open_b", i) for i in range(node_b.nopen)]
        theta = np.transpose(theta, [labels.index(t) for t in target])

        topo = self.topology
        del topo.parent[a], topo.parent[b]
        del topo.children[a], topo.children[b]
        del self.tensors[a], self.tensors[b]
        topo.parent[new_id] = parent
        topo.children[new_id] = children
        for c in children:
            topo.parent[c] = new_id
        if parent is None:
            topo.root = new_id
        else:
            siblings = topo.children[parent]
            siblings[siblings.index(upper)] = new_id
        self.tensors[new_id] = theta
        if self.orthogonality_center in (a, b):
            self.orthogonality_center = new_id
        return new_id

    # ------------------------------------------------------------------
    # Splitting

    def _check_specs(self, node: Node, spec1: LegSpecification, spec2: LegSpecification):
        problems = []
        if node.parent is not None:
            if spec1.takes_parent == spec2.takes_parent:
                problems.append("exactly one specification must take the parent leg")
        elif spec1.takes_parent or spec2.takes_parent:
            problems.append("the root has no parent leg to take")
        if node.parent is None and spec1.becomes_root == spec2.becomes_root:
            problems.append("splitting the root requires exactly one new root")
        claimed_children = list(spec1.children) + list(spec2.children)
        missing = set(node.children) - set(claimed_children)
        doubled = {c for c in claimed_children if claimed_children.count(c) > 1}
        foreign = set(claimed_children) - set(node.children)
        claimed_open = list(spec1.open_legs) + list(spec2.open_legs)
        missing_open = set(node.open_legs) - set(claimed_open)
        doubled_open = {o for o in claimed_open if claimed_open.count(o) > 1}
        foreign_open = set(claimed_open) - set(node.open_legs)
        if missing:
            problems.append(f"unclaimed children {sorted(missing)}")
        if doubled:
            problems.append(f"children claimed twice {sorted(doubled)}")
        if foreign:
            problems.append(f"unknown children {sorted(foreign)}")
        if missing_open:
            problems.append(f"unclaimed open legs {sorted(missing_open)}")
        if doubled_open:
            problems.append(f"open legs claimed twice {sorted(doubled_open)}")
        if foreign_open:
            problems.append(f"legs {sorted(foreign_open)} are not open legs")
        if problems:
            raise ValueError(f"Invalid leg specifications for {node.identifier!r}: "
                             + "; ".join(problems))

    def _spec_legs(self, node: Node, spec: LegSpecification) -> List[int]:
        legs = [0] if spec.takes_parent else []
        legs += [node.neighbour_index(c) for c in spec.children]
        return legs + list(spec.open_legs)

    def split_node(self, node_id: str, spec1: LegSpecification, spec2: LegSpecification,
                   id1: str, id2: str, decomposition):
        """
        Splits a node in two using ``decomposition(tensor, legs1, legs2)``.

        The decomposition must return two tensors: the first carrying
        ``legs1`` followed by the new bond, the second carrying the new bond
        followed by ``legs2``.
        """
        node = self.node(node_id)
        self._check_specs(node, spec1, spec2)
        for new in (id1, id2):
            if new in self.tensors and new != node_id:
                raise ValueError(f"Node {new!r} already exists")
        legs1 = self._spec_legs(node, spec1)
        legs2 = self._spec_legs(node, spec2)
        t1, t2 = decomposition(self.tensors[node_id], legs1, legs2)
        t2 = np.moveaxis(t2, 0, -1)  # both now carry the new bond last

        one_is_upper = spec1.takes_parent or spec1.becomes_root
        parent = node.parent
        topo = self.topology
        del topo.parent[node_id], topo.children[node_id], self.tensors[node_id]
        upper, lower = (id1, id2) if one_is_upper else (id2, id1)
        specs = {id1: spec1, id2: spec2}
        for new_id, tensor in ((id1, t1), (id2, t2)):
            spec = specs[new_id]
            nparent = 1 if spec.takes_parent else 0
            nchild = len(spec.children)
            nopen = len(spec.open_legs)
            bond = tensor.ndim - 1
            parent_legs = list(range(nparent))
            child_legs = list(range(nparent, nparent + nchild))
            open_legs = list(range(nparent + nchild, nparent + nchild + nopen))
            if new_id == upper:
                perm = parent_legs + child_legs + [bond] + open_legs
                children = list(spec.children) + [lower]
            else:
                perm = [bond] + child_legs + open_legs
                children = list(spec.children)
            self.tensors[new_id] = np.transpose(tensor, perm)
            topo.children[new_id] = children
            for c in spec.children:
                topo.parent[c] = new_id
        topo.parent[upper] = parent
        topo.parent[lower] = upper
        if parent is None:
            topo.root = upper
        else:
            siblings = topo.children[parent]
            siblings[siblings.index(node_id)] = upper
        if self.orthogonality_center == node_id:
            self.orthogonality_center = id2
        else:
            self.orthogonality_center = None

    def split_node_qr(self, node_id: str, q_spec: LegSpecification, r_spec: LegSpecification,
                      q_id: str, r_id: str, mode: SplitMode = SplitMode.REDUCED):
        """Splits a node by a QR decomposition; the Q node is an isometry towards R."""
        self.split_node(node_id, q_spec, r_spec, q_id, r_id,
                        lambda t, l1, l2: tensor_qr(t, l1, l2, mode=mode))

    def split_node_svd(self, node_id: str, u_spec: LegSpecification, v_spec: LegSpecification,
                       u_id: str, v_id: str, params: SvdParameters = SvdParameters(),
                       contr_mode: ContractionMode = ContractionMode.INTO_V):
        """Splits a node by a truncated SVD; singular values go into V by default."""
        self.split_node(node_id, u_spec, v_spec, u_id, v_id,
                        lambda t, l1, l2: contr_truncated_svd_splitting(t, l1, l2, params,
                                                                        contr_mode))
        if contr_mode is ContractionMode.INTO_U and self.orthogonality_center == v_id:
            self.orthogonality_center = None

    # ------------------------------------------------------------------
    # Canonical form

    def _push_gauge(self, node_id: str, towards: str, mode: SplitMode = SplitMode.REDUCED):
        """QR-split ``node_id`` and absorb the R factor into its neighbour ``towards``."""
        k = self.neighbour_index(node_id, towards)
        j = self.neighbour_index(towards, node_id)
        tensor = self.tensors[node_id]
        others = [i for i in range(tensor.ndim) if i != k]
        q, r = tensor_qr(tensor, others, [k], mode=mode)
        self.tensors[node_id] = np.moveaxis(q, -1, k)
        absorbed = np.tensordot(r, self.tensors[towards], axes=(1, j))
        self.tensors[towards] = np.moveaxis(absorbed, 0, j)

    def canonical_form(self, center: str, mode: SplitMode = SplitMode.REDUCED):
        """
        Brings the network into canonical form with ``center`` as orthogonality centre.

        Nodes are orthogonalised from the furthest inwards; R factors are
        absorbed by the neighbour towards the centre. ``SplitMode.KEEP``
        preserves every bond dimension.
        """
        if center not in self.tensors:
            raise KeyError(f"Unknown node {center!r}")
        dist = self.topology.distances_from(center)
        for node_id in sorted(dist, key=lambda n: (-dist[n], n)):
            if node_id == center:
                continue
            towards = next(nb for nb in self.topology.neighbours(node_id)
                           if dist[nb] == dist[node_id] - 1)
            self._push_gauge(node_id, towards, mode)
        self.orthogonality_center = center

    def move_orthogonalization_center(self, new_center: str):
        if self.orthogonality_center is None:
            raise NotCanonicalError("The network has no orthogonality centre; "
                                    "call canonical_form first")
        path = self.topology.path_between(self.orthogonality_center, new_center)
        for node_id, nxt in zip(path[:-1], path[1:]):
            self._push_gauge(node_id, nxt)
        self.orthogonality_center = new_center

    def isometry_defects(self, center: Optional[str] = None) -> Dict[str, float]:
        """
        Deviation from the isometry condition for every non-centre node.

        For each node the leg pointing towards the centre is kept open and
        all other legs are contracted with the complex conjugate; the result
        is compared to the identity in the max-norm.
        """
        center = self.orthogonality_center if center is None else center
        if center is None:
            raise NotCanonicalError("No orthogonality centre to check against")
        dist = self.topology.distances_from(center)
        defects = {}
        for node_id, tensor in self.tensors.items():
            if node_id == center:
                continue
            towards = next(nb for nb in self.topology.neighbours(node_id)
                           if dist[nb] == dist[node_id] - 1)
            k = self.neighbour_index(node_id, towards)
            mat = np.moveaxis(tensor, k, -1).reshape(-1, tensor.shape[k])
            gram = mat.conj().T @ mat
            defects[node_id] = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
        return defects

    def is_canonical(self, center: Optional[str] = None, tol: float = 1e-10) -> bool:
        return all(d <= tol for d in self.isometry_defects(center).values())

    # ------------------------------------------------------------------
    # Two-site helpers used by the time-evolution algorithms

    def contract_pair(self, a: str, b: str) -> np.ndarray:
        """Legs of ``a`` except the shared one, then legs of ``b`` except the shared one."""
        return np.tensordot(self.tensors[a], self.tensors[b],
                            axes=(self.neighbour_index(a, b), self.neighbour_index(b, a)))

    def split_pair(self, a: str, b: str, theta: np.ndarray,
                   params: Optional[SvdParameters] = None, center: Optional[str] = None) -> float:
        """
        Splits a two-site tensor produced by :meth:`contract_pair` back onto ``a`` and ``b``.

        The node named by ``center`` (default ``b``) absorbs the singular
        values and becomes the orthogonality centre. Returns the Euclidean
        norm of the discarded singular values.
        """
        center = b if center is None else center
        na = self.tensors[a].ndim
        ka = self.neighbour_index(a, b)
        kb = self.neighbour_index(b, a)
        u_legs = list(range(na - 1))
        v_legs = list(range(na - 1, theta.ndim))
        u, s, v = tensor_svd(theta, u_legs, v_legs)
        s, dropped = truncate_singular_values(s, params or SvdParameters())
        u, v = u[..., :len(s)], v[:len(s)]
        discarded = float(np.linalg.norm(dropped))
        if center == b:
            v = s.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        else:
            u = u * s
        self.tensors[a] = np.moveaxis(u, -1, ka)
        self.tensors[b] = np.moveaxis(v, 0, kb)
        self.orthogonality_center = center
        return discarded

    # ------------------------------------------------------------------
    # Dense conversion

    @classmethod
    def from_dense(cls, tensor: np.ndarray, topology: TreeTopology,
                   open_legs: Dict[str, int], params: Optional[SvdParameters] = None):
        """
        Decomposes a dense tensor into a network with the given topology.

        The legs of ``tensor`` must follow the order of
        :meth:`completely_contract_tree`: nodes in depth-first pre-order,
        ``open_legs[node]`` consecutive legs per node. Nodes are split off
        from the leaves inwards by truncated SVDs (exact up to the zero
        threshold when ``params`` is omitted); singular values are pushed
        towards the root, which ends up as orthogonality centre.
        """
        params = params or SvdParameters()
        tensor = np.asarray(tensor, dtype=DTYPE)
        labels: List[tuple] = []
        for node_id in topology.depth_first():
            labels.extend(("open", node_id, i) for i in range(open_legs[node_id]))
        if len(labels) != tensor.ndim:
            raise ValueError(f"Tensor has {tensor.ndim} legs but the tree expects {len(labels)}")
        tensors = {}
        for node_id in reversed(topology.depth_first()):
            own = ([("bond", c) for c in topology.children[node_id]]
                   + [("open", node_id, i) for i in range(open_legs[node_id])])
            own_idx = [labels.index(lab) for lab in own]
            if topology.parent[node_id] is None:
                tensors[node_id] = np.transpose(tensor, own_idx)
                break
            rest_idx = [i for i in range(len(labels)) if i not in own_idx]
            u, s, v = truncated_svd(tensor, own_idx, rest_idx, params)
            v = s.reshape((-1,) + (1,) * (v.ndim - 1)) * v
            tensors[node_id] = np.moveaxis(u, -1, 0)
            tensor = v
            labels = [("bond", node_id)] + [labels[i] for i in rest_idx]
        ttn = cls.from_tensors(topology, tensors)
        ttn.orthogonality_center = topology.root
        return ttn

    # ------------------------------------------------------------------
    # Serialisation

    def save(self, path):
        """Writes topology, centre and tensors into one zip container."""
        meta = {"topology": self.topology.to_dict(),
                "orthogonality_center": self.orthogonality_center,
                "kind": type(self).__name__}
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("network.json", json.dumps(meta, indent=1))
            for i, node_id in enumerate(self.topology.depth_first()):
                buf = io.BytesIO()
                save_tensor(buf, self.tensors[node_id])
                zf.writestr(f"tensors/{i}.ttnt", buf.getvalue())

    @classmethod
    def load(cls, path):
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("network.json"))
            topology = TreeTopology.from_dict(meta["topology"])
            tensors = {}
            for i, node_id in enumerate(topology.depth_first()):
                tensors[node_id] = load_tensor(io.BytesIO(zf.read(f"tensors/{i}.ttnt")))
        ttn = cls.from_tensors(topology, tensors)
        ttn.orthogonality_center = meta["orthogonality_center"]
        return ttn


def node_open_dims(ttn: TreeTensorNetwork) -> Dict[str, Tuple[int, ...]]:
    return {n: ttn.node(n).open_dimensions for n in ttn.topology.depth_first()}


def leg_positions(ttn: TreeTensorNetwork, order: Sequence[str]) -> List[int]:
    """Permutation taking the full contraction (one open leg per node) to ``order``."""
    pre = ttn.topology.depth_first()
    return [pre.index(n) for n in order]
