"""Shared builders for random trees and networks."""
import itertools

import numpy as np
import pytest

from ttnsim.tensor_core import random_tensor
from ttnsim.tree import TreeTopology
from ttnsim.ttn import TreeTensorNetwork


def random_tree(rng: np.random.Generator, num_nodes: int) -> TreeTopology:
    """Random tree on nodes ``n0 .. n{k-1}``; each new node picks a random earlier parent."""
    tree = TreeTopology()
    tree.add_root("n0")
    for i in range(1, num_nodes):
        tree.add_child(f"n{rng.integers(i)}", f"n{i}")
    return tree


def random_ttn(rng: np.random.Generator, tree: TreeTopology, max_dim: int = 4,
               max_open: int = 1, cls=TreeTensorNetwork) -> TreeTensorNetwork:
    """Random tensors with bond and open dimensions in ``1..max_dim``."""
    bonds = {c: int(rng.integers(1, max_dim + 1)) for _, c in tree.edges()}
    tensors = {}
    for node in tree.depth_first():
        shape = []
        if tree.parent[node] is not None:
            shape.append(bonds[node])
        shape += [bonds[c] for c in tree.children[node]]
        shape += [int(rng.integers(1, max_dim + 1)) for _ in range(int(rng.integers(0, max_open + 1)))]
        tensors[node] = random_tensor(shape, rng)
    return cls.from_tensors(tree, tensors)


def einsum_contraction(ttn: TreeTensorNetwork) -> np.ndarray:
    """Whole-network contraction with a single einsum call as an independent oracle."""
    labels = itertools.count()
    edge_label = {c: next(labels) for _, c in ttn.topology.edges()}
    operands, out = [], []
    for node in ttn.topology.depth_first():
        t = ttn.tensors[node]
        subs = []
        if ttn.topology.parent[node] is not None:
            subs.append(edge_label[node])
        subs += [edge_label[c] for c in ttn.topology.children[node]]
        opens = [next(labels) for _ in range(t.ndim - len(subs))]
        out += opens
        operands += [t, subs + opens]
    return np.einsum(*operands, out)


def loop_contract(a, b, legs_a, legs_b):
    """Nested-loop oracle for a general pairwise contraction."""
    free_a = [i for i in range(a.ndim) if i not in legs_a]
    free_b = [i for i in range(b.ndim) if i not in legs_b]
    out_shape = [a.shape[i] for i in free_a] + [b.shape[i] for i in free_b]
    out = np.zeros(out_shape, dtype=complex)
    summed = [a.shape[i] for i in legs_a]
    for out_idx in itertools.product(*[range(d) for d in out_shape]):
        ia, ib = out_idx[:len(free_a)], out_idx[len(free_a):]
        total = 0
        for s_idx in itertools.product(*[range(d) for d in summed]):
            full_a = [0] * a.ndim
            full_b = [0] * b.ndim
            for pos, val in zip(free_a, ia):
                full_a[pos] = val
            for pos, val in zip(free_b, ib):
                full_b[pos] = val
            for la, lb, val in zip(legs_a, legs_b, s_idx):
                full_a[la] = val
                full_b[lb] = val
            total += a[tuple(full_a)] * b[tuple(full_b)]
        out[out_idx] = total
    return out


def eq16_tree() -> TreeTopology:
    return TreeTopology.from_edges("0", [("0", "00"), ("00", "01"), ("0", "10"), ("10", "11"),
                                         ("0", "20"), ("20", "21")])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# --- acceptance reporting ------------------------------------------------------

def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":").rstrip("abcd"))):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Records a one-line verdict for an acceptance criterion and returns it."""
    def record(criterion: str, passed: bool, detail: str) -> bool:
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.acceptance_lines.append(line)
        print(line)
        return passed
    return record
