"""
Time-dependent variational principle on tree tensor network states.

A sweep visits the nodes in the order of
:meth:`~ttnsim.tree.TreeTopology.tdvp_update_path`. Between two consecutive
sites ``s`` and ``s'`` the orthogonality centre travels along the tree path.
Only the first edge of that path carries a variational bond update; the
remaining moves are plain QR gauge moves. Every edge is therefore evolved
exactly once per sweep.

One-site TDVP evolves each site forward and each bond backward in time and
keeps all bond dimensions fixed. Two-site TDVP evolves the pair across the
first edge of every move forward, splits it with a truncated SVD and evolves
the site it moves onto backward again.
"""
from __future__ import annotations

from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from ..environments import EnvironmentCache
from ..tensor_core import SvdParameters, tensor_qr
from ..ttn import NotCanonicalError
from ..ttns import TTNS
from .krylov import DENSE_LIMIT, local_expm_apply


class TdvpOrder(Enum):
    FIRST = 1
    SECOND = 2


def _moves(psi: TTNS, path: List[str]) -> List[List[str]]:
    return [psi.topology.path_between(a, b) for a, b in zip(path[:-1], path[1:])]


def _prepare(psi: TTNS, ham, path: List[str], cache: Optional[EnvironmentCache]) -> EnvironmentCache:
    if psi.orthogonality_center is None:
        raise NotCanonicalError("TDVP needs a state in canonical form; call canonical_form first")
    moved = psi.orthogonality_center != path[0]
    psi.move_orthogonalization_center(path[0])
    if cache is None or cache.state is not psi or cache.op is not ham:
        return EnvironmentCache(psi, ham)
    if moved:
        cache.invalidate_all()
    return cache


def _evolve_site(psi: TTNS, cache: EnvironmentCache, node_id: str, factor: complex):
    tensor = psi.tensors[node_id]
    if tensor.size <= DENSE_LIMIT:
        heff = cache.site_hamiltonian(node_id)
    else:
        operands, ket_sub, bra_sub = cache.site_operands(node_id)
        shape = tensor.shape

        def heff(x):
            out = np.einsum(*operands, x.reshape(shape), ket_sub, bra_sub, optimize=True)
            return out.reshape(-1)
    psi.tensors[node_id] = local_expm_apply(heff, tensor, factor)
    cache.invalidate(node_id)


def _split_bond(psi: TTNS, a: str, b: str) -> np.ndarray:
    """Leaves an isometry at ``a`` and returns the bond matrix ``(a side, b side)``."""
    k = psi.neighbour_index(a, b)
    tensor = psi.tensors[a]
    others = [i for i in range(tensor.ndim) if i != k]
    q, r = tensor_qr(tensor, others, [k])
    psi.tensors[a] = np.moveaxis(q, -1, k)
    return r


def _absorb_bond(psi: TTNS, bond: np.ndarray, b: str, a: str):
    j = psi.neighbour_index(b, a)
    psi.tensors[b] = np.moveaxis(np.tensordot(bond, psi.tensors[b], axes=(1, j)), 0, j)


def _evolve_link(psi: TTNS, cache: EnvironmentCache, a: str, b: str, factor: complex):
    """Moves the centre from ``a`` to ``b`` while evolving the bond with ``factor``."""
    bond = _split_bond(psi, a, b)
    cache.invalidate(a)
    if bond.size <= DENSE_LIMIT:
        heff = cache.link_hamiltonian(a, b)
    else:
        left, right = cache.get(a, b), cache.get(b, a)
        shape = bond.shape

        def heff(x):
            return np.einsum("xoy,zow,yw->xz", left, right, x.reshape(shape),
                             optimize=True).reshape(-1)
    bond = local_expm_apply(heff, bond, factor)
    _absorb_bond(psi, bond, b, a)
    cache.invalidate(b)
    psi.orthogonality_center = b


def _gauge_move(psi: TTNS, cache: EnvironmentCache, a: str, b: str):
    psi._push_gauge(a, b)
    cache.invalidate(a)
    cache.invalidate(b)
    psi.orthogonality_center = b


def _return_to_start(psi: TTNS, cache: EnvironmentCache, path: List[str]):
    back = psi.topology.path_between(path[-1], path[0])
    for a, b in zip(back[:-1], back[1:]):
        _gauge_move(psi, cache, a, b)


def _forward_sweep(psi: TTNS, cache: EnvironmentCache, path: List[str], dt: float):
    moves = _moves(psi, path)
    for i, site in enumerate(path):
        _evolve_site(psi, cache, site, -1j * dt)
        if i == len(moves):
            break
        route = moves[i]
        _evolve_link(psi, cache, route[0], route[1], 1j * dt)
        for a, b in zip(route[1:-1], route[2:]):
            _gauge_move(psi, cache, a, b)


def _backward_sweep(psi: TTNS, cache: EnvironmentCache, path: List[str], dt: float):
    moves = _moves(psi, path)
    for i in range(len(path) - 1, -1, -1):
        _evolve_site(psi, cache, path[i], -1j * dt)
        if i == 0:
            break
        route = list(reversed(moves[i - 1]))
        for a, b in zip(route[:-2], route[1:-1]):
            _gauge_move(psi, cache, a, b)
        _evolve_link(psi, cache, route[-2], route[-1], 1j * dt)


def tdvp1_step(psi: TTNS, ham, dt: float, order: TdvpOrder = TdvpOrder.FIRST,
               cache: Optional[EnvironmentCache] = None) -> EnvironmentCache:
    """
    One time step of one-site TDVP.

    The state must be canonical; the centre is moved to the start of the
    update path. First order sweeps once with ``dt`` and moves the centre
    back to the start; second order sweeps forward and backward with
    ``dt / 2`` each. Bond dimensions never change, so pad them beforehand.
    Returns the environment cache, which can be passed to the next step.
    """
    path = psi.topology.tdvp_update_path()
    cache = _prepare(psi, ham, path, cache)
    if order is TdvpOrder.FIRST:
        _forward_sweep(psi, cache, path, dt)
        _return_to_start(psi, cache, path)
    else:
        _forward_sweep(psi, cache, path, dt / 2)
        _backward_sweep(psi, cache, path, dt / 2)
    return cache


def _evolve_pair(psi: TTNS, cache: EnvironmentCache, a: str, b: str, factor: complex,
                 params: SvdParameters) -> float:
    theta = psi.contract_pair(a, b)
    if theta.size <= DENSE_LIMIT:
        heff = cache.two_site_hamiltonian(a, b)
    else:
        operands, ket_sub, bra_sub = cache.two_site_operands(a, b)
        shape = theta.shape

        def heff(x):
            return np.einsum(*operands, x.reshape(shape), ket_sub, bra_sub,
                             optimize=True).reshape(-1)
    theta = local_expm_apply(heff, theta, factor)
    discarded = psi.split_pair(a, b, theta, params, center=b)
    cache.invalidate(a)
    cache.invalidate(b)
    return discarded


def tdvp2_step(psi: TTNS, ham, dt: float, params: SvdParameters = SvdParameters(),
               cache: Optional[EnvironmentCache] = None) -> Tuple[EnvironmentCache, float]:
    """
    One time step of two-site TDVP.

    For every move of the sweep the pair across its first edge is evolved
    forward, split with ``params`` (singular values towards the next site)
    and that site is evolved backward, except after the final pair.
    Returns the environment cache and the accumulated discarded weight.
    """
    path = psi.topology.tdvp_update_path()
    cache = _prepare(psi, ham, path, cache)
    discarded = 0.0
    moves = _moves(psi, path)
    for i, route in enumerate(moves):
        a, b = route[0], route[1]
        discarded += _evolve_pair(psi, cache, a, b, -1j * dt, params)
        if i < len(moves) - 1:
            _evolve_site(psi, cache, b, 1j * dt)
        for x, y in zip(route[1:-1], route[2:]):
            _gauge_move(psi, cache, x, y)
    if len(path) == 1:
        _evolve_site(psi, cache, path[0], -1j * dt)
    _return_to_start(psi, cache, path)
    return cache, discarded
