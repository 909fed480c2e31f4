"""
Time-evolving block decimation on tree tensor network states.

Single-site gates act directly on the physical leg. A two-site gate moves the
orthogonality centre onto its first site, contracts both site tensors,
applies the gate and splits the result back with a truncated SVD. The
singular values go to the site closer to the next gate.
"""
from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from ..operators import LocalGate
from ..tensor_core import SvdParameters
from ..ttns import TTNS
from .trotter import ProgramEntry


def _ensure_centre(psi: TTNS, node_id: str):
    if psi.orthogonality_center is None:
        psi.canonical_form(node_id)
    else:
        psi.move_orthogonalization_center(node_id)


def _apply_two_site_matrix(psi: TTNS, a: str, b: str, matrix: np.ndarray,
                           params: Optional[SvdParameters], center: str) -> float:
    _ensure_centre(psi, a)
    theta = psi.contract_pair(a, b)
    na = psi.tensors[a].ndim
    pa, pb = na - 2, theta.ndim - 1
    da, db = theta.shape[pa], theta.shape[pb]
    gate = matrix.reshape(da, db, da, db)
    theta = np.tensordot(theta, gate, axes=([pa, pb], [2, 3]))
    theta = np.moveaxis(theta, [-2, -1], [pa, pb])
    return psi.split_pair(a, b, theta, params, center=center)


def apply_swap(psi: TTNS, a: str, b: str, params: Optional[SvdParameters] = None) -> float:
    """
    Exchanges the physical states of two adjacent sites.

    Returns the norm of the discarded singular values.
    """
    if not psi.topology.are_adjacent(a, b):
        raise ValueError(f"Cannot swap non-adjacent nodes {a!r} and {b!r}")
    da, db = psi.tensors[a].shape[-1], psi.tensors[b].shape[-1]
    if da != db:
        raise ValueError(f"Cannot swap sites of dimensions {da} and {db}")
    swap = np.eye(da * db).reshape(da, db, da, db).transpose(1, 0, 2, 3).reshape(da * db, da * db)
    return _apply_two_site_matrix(psi, a, b, swap, params, b)


def apply_gate(psi: TTNS, gate: LocalGate, params: Optional[SvdParameters] = None,
               next_sites: Sequence[str] = ()) -> float:
    """Applies a one- or two-site gate; returns the discarded weight of the split."""
    if len(gate.sites) == 0:
        psi.tensors[psi.orthogonality_center or psi.root_id] *= gate.matrix[0, 0]
        return 0.0
    if len(gate.sites) == 1:
        psi.apply_single_site(gate.sites[0], gate.matrix)
        return 0.0
    if len(gate.sites) > 2:
        raise ValueError(f"Gate on {len(gate.sites)} sites; TEBD applies at most two-site gates")
    a, b = gate.sites
    if not psi.topology.are_adjacent(a, b):
        raise ValueError(f"Gate sites {a!r} and {b!r} are not adjacent; add SWAPs")
    center = b
    if next_sites:
        dist = psi.topology.distances_from(next_sites[0])
        center = a if dist[a] < dist[b] else b
    return _apply_two_site_matrix(psi, a, b, gate.matrix, params, center)


def tebd_step(psi: TTNS, program: List[ProgramEntry], params: Optional[SvdParameters] = None) -> float:
    """
    Applies every gate of a Trotter program once.

    Returns the accumulated norm of discarded singular values.
    """
    discarded = 0.0
    if psi.orthogonality_center is None:
        psi.canonical_form(psi.root_id)
    for k, entry in enumerate(program):
        for a, b in entry.swaps_before:
            discarded += apply_swap(psi, a, b, params)
        following = program[k + 1].gate.sites if k + 1 < len(program) else ()
        discarded += apply_gate(psi, entry.gate, params, following)
        for a, b in entry.swaps_after:
            discarded += apply_swap(psi, a, b, params)
    return discarded
