"""
Rooted tree topologies.

A :class:`TreeTopology` stores the parent of every node and the ordered list
of its children. The order of the children is the order in which they were
added; tensor networks built on top of a topology use it to number legs.
"""
from __future__ import annotations

import copy
from collections import deque
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple


class TreeTopology:
    """
    A directed tree with a single root.

    Node identifiers are non-empty strings.
    """

    def __init__(self):
        self.root: Optional[str] = None
        self.parent: Dict[str, Optional[str]] = {}
        self.children: Dict[str, List[str]] = {}

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.parent

    def __len__(self) -> int:
        return len(self.parent)

    def __iter__(self) -> Iterator[str]:
        return iter(self.parent)

    def copy(self) -> "TreeTopology":
        return copy.deepcopy(self)

    def _check_exists(self, *node_ids: str):
        for node_id in node_ids:
            if node_id not in self.parent:
                raise KeyError(f"Unknown node {node_id!r}")

    def _check_fresh(self, node_id: str):
        if not isinstance(node_id, str) or not node_id:
            raise ValueError("Node identifiers must be non-empty strings")
        if node_id in self.parent:
            raise ValueError(f"Node {node_id!r} already exists")

    def add_root(self, node_id: str):
        if self.root is not None:
            raise ValueError(f"Tree already has the root {self.root!r}")
        self._check_fresh(node_id)
        self.root = node_id
        self.parent[node_id] = None
        self.children[node_id] = []

    def add_child(self, parent_id: str, child_id: str):
        self._check_exists(parent_id)
        self._check_fresh(child_id)
        self.parent[child_id] = parent_id
        self.children[child_id] = []
        self.children[parent_id].append(child_id)

    def replace_node(self, old_id: str, new_id: str):
        """Renames a node while keeping all of its neighbour relations."""
        self._check_exists(old_id)
        if new_id == old_id:
            return
        self._check_fresh(new_id)
        parent = self.parent.pop(old_id)
        children = self.children.pop(old_id)
        self.parent[new_id] = parent
        self.children[new_id] = children
        for child in children:
            self.parent[child] = new_id
        if parent is None:
            self.root = new_id
        else:
            siblings = self.children[parent]
            siblings[siblings.index(old_id)] = new_id

    @property
    def nodes(self) -> List[str]:
        return list(self.parent)

    def is_root(self, node_id: str) -> bool:
        return self.parent[node_id] is None

    def is_leaf(self, node_id: str) -> bool:
        self._check_exists(node_id)
        return len(self.children[node_id]) == 0

    def leaves(self) -> List[str]:
        return [n for n in self.parent if not self.children[n]]

    def neighbours(self, node_id: str) -> List[str]:
        """Neighbours in leg order: parent first, then children."""
        self._check_exists(node_id)
        parent = self.parent[node_id]
        head = [] if parent is None else [parent]
        return head + list(self.children[node_id])

    def are_adjacent(self, a: str, b: str) -> bool:
        return self.parent.get(a) == b or self.parent.get(b) == a

    def edges(self) -> List[Tuple[str, str]]:
        """All edges as ``(parent, child)`` pairs in depth-first order."""
        return [(self.parent[n], n) for n in self.depth_first() if self.parent[n] is not None]

    def depth_first(self, start: Optional[str] = None) -> List[str]:
        """Pre-order traversal honouring the child order."""
        start = self.root if start is None else start
        if start is None:
            return []
        order = []
        stack = [start]
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(reversed(self.children[node]))
        return order

    def depth(self, node_id: str) -> int:
        self._check_exists(node_id)
        depth = 0
        while self.parent[node_id] is not None:
            node_id = self.parent[node_id]
            depth += 1
        return depth

    def _ancestors(self, node_id: str) -> List[str]:
        chain = [node_id]
        while self.parent[chain[-1]] is not None:
            chain.append(self.parent[chain[-1]])
        return chain

    def path_between(self, a: str, b: str) -> List[str]:
        """The unique simple path from ``a`` to ``b``, both ends included."""
        self._check_exists(a, b)
        up_a = self._ancestors(a)
        up_b = self._ancestors(b)
        on_b = set(up_b)
        i = next(i for i, n in enumerate(up_a) if n in on_b)
        meet = up_a[i]
        j = up_b.index(meet)
        return up_a[:i + 1] + list(reversed(up_b[:j]))

    def distance(self, a: str, b: str) -> int:
        return len(self.path_between(a, b)) - 1

    def distances_from(self, origin: str) -> Dict[str, int]:
        self._check_exists(origin)
        dist = {origin: 0}
        queue = deque([origin])
        while queue:
            node = queue.popleft()
            for nb in self.neighbours(node):
                if nb not in dist:
                    dist[nb] = dist[node] + 1
                    queue.append(nb)
        return dist

    def subtree_nodes(self, origin: str, blocked_edge: Tuple[str, str]) -> Set[str]:
        """
        Nodes reachable from ``origin`` without traversing ``blocked_edge``.

        The blocked edge must be incident to ``origin``.
        """
        self._check_exists(origin, *blocked_edge)
        if origin not in blocked_edge or not self.are_adjacent(*blocked_edge):
            raise ValueError(f"Edge {blocked_edge} is not an edge incident to {origin!r}")
        other = blocked_edge[1] if blocked_edge[0] == origin else blocked_edge[0]
        seen = {origin}
        stack = [origin]
        while stack:
            node = stack.pop()
            for nb in self.neighbours(node):
                if nb not in seen and not (node == origin and nb == other):
                    seen.add(nb)
                    stack.append(nb)
        return seen

    def next_node_towards(self, start: str, target: str) -> str:
        """The neighbour of ``start`` on the path to ``target``."""
        return self.path_between(start, target)[1]

    def rerooted(self, new_root: str) -> "TreeTopology":
        """A new topology with the same undirected edges and a different root."""
        self._check_exists(new_root)
        tree = TreeTopology()
        tree.add_root(new_root)
        stack = [new_root]
        while stack:
            node = stack.pop()
            for nb in self.neighbours(node):
                if nb not in tree:
                    tree.add_child(node, nb)
                    stack.append(nb)
        return tree

    def undirected_edges(self) -> Set[frozenset]:
        return {frozenset(e) for e in self.edges()}

    def tdvp_update_path(self) -> List[str]:
        """
        Order in which a TDVP sweep visits the nodes.

        The sweep runs between two leaves at maximal distance: the start is
        the smallest such leaf id, the end the largest leaf id at maximal
        distance from it. Before a node on that main path is left, every
        subtree hanging off it is visited completely, deepest nodes first.
        """
        if self.root is None:
            return []
        if len(self) == 1:
            return [self.root]
        start, end = self._furthest_leaves()
        main = self.path_between(start, end)
        on_main = set(main)
        order: List[str] = []
        for node in main:
            for nb in sorted(self.neighbours(node)):
                if nb not in on_main:
                    order.extend(self._subtree_order(nb, node))
            order.append(node)
        return order

    def _subtree_order(self, origin: str, came_from: str) -> List[str]:
        order = []
        for nb in sorted(self.neighbours(origin)):
            if nb != came_from:
                order.extend(self._subtree_order(nb, origin))
        order.append(origin)
        return order

    def undirected_leaves(self) -> List[str]:
        """Nodes of degree one, including a root with a single child."""
        return sorted(n for n in self.parent if len(self.neighbours(n)) <= 1)

    def _furthest_leaves(self) -> Tuple[str, str]:
        leaves = self.undirected_leaves()
        dists = {a: self.distances_from(a) for a in leaves}
        longest = max(dists[a][b] for a in leaves for b in leaves)
        start = min(a for a in leaves if any(dists[a][b] == longest for b in leaves))
        end = max(b for b in leaves if dists[start][b] == longest)
        return start, end

    def to_dict(self) -> dict:
        """Nested ``{id, children: [...]}`` description."""
        def build(node):
            return {"id": node, "children": [build(c) for c in self.children[node]]}
        return build(self.root) if self.root is not None else {}

    @classmethod
    def from_dict(cls, description: dict) -> "TreeTopology":
        tree = cls()
        tree.add_root(description["id"])
        stack = [(description["id"], c) for c in reversed(description.get("children", []))]
        while stack:
            parent, child = stack.pop()
            tree.add_child(parent, child["id"])
            stack.extend((child["id"], c) for c in reversed(child.get("children", [])))
        return tree

    @classmethod
    def from_edges(cls, root: str, edges: Iterable[Tuple[str, str]]) -> "TreeTopology":
        """Builds a tree from ``(parent, child)`` pairs given parents-first."""
        tree = cls()
        tree.add_root(root)
        for parent, child in edges:
            tree.add_child(parent, child)
        return tree
