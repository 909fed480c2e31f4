"""
Trotter splittings of a time step into exponentials of few-site operators.

A splitting is a sequence of :class:`TrotterStep` objects. A step carries a
tensor product and a real factor; for a time step ``dt`` its gate is
``exp(-i * factor * dt * P)``. SWAP lists around a step bring distant sites
next to each other before the gate and back afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..operators import CapabilityError, Hamiltonian, LocalGate, TensorProduct, exp_local

SwapList = List[Tuple[str, str]]

MAX_GATE_SITES = 4


@dataclass
class TrotterStep:
    operator: TensorProduct
    factor: float = 1.0

    def __post_init__(self):
        self.operator = TensorProduct(self.operator)
        if not np.isfinite(self.factor):
            raise ValueError("Trotter step factors must be finite")


@dataclass
class TrotterSplitting:
    """Ordered Trotter steps with optional SWAPs before and after each step."""
    steps: List[TrotterStep] = field(default_factory=list)
    swaps_before: List[SwapList] = field(default_factory=list)
    swaps_after: List[SwapList] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.steps)
        if not self.swaps_before:
            self.swaps_before = [[] for _ in range(n)]
        if not self.swaps_after:
            self.swaps_after = [[] for _ in range(n)]
        if len(self.swaps_before) != n or len(self.swaps_after) != n:
            raise ValueError("Every step needs one swap list before and one after")

    def __len__(self):
        return len(self.steps)

    @classmethod
    def first_order(cls, groups: Sequence[Sequence[TrotterStep]]) -> "TrotterSplitting":
        """``exp(-iA dt) exp(-iB dt) ...`` with one group per summand."""
        return cls([s for group in groups for s in group])

    @classmethod
    def strang(cls, groups: Sequence[Sequence[TrotterStep]]) -> "TrotterSplitting":
        """
        Symmetric splitting: every group but the last at half steps, the last
        group at a full step, then the half steps in reverse order.
        """
        groups = [list(g) for g in groups]
        if not groups:
            return cls([])
        head = [TrotterStep(s.operator, s.factor / 2) for g in groups[:-1] for s in g]
        middle = [TrotterStep(s.operator, s.factor) for s in groups[-1]]
        return cls(head + middle + list(reversed(head)))

    @classmethod
    def from_hamiltonian(cls, ham: Hamiltonian, order: int = 1,
                         groups: Optional[Sequence[Sequence[int]]] = None) -> "TrotterSplitting":
        """
        Splitting of a Hamiltonian with real coefficients.

        ``groups`` lists term indices per group; by default each term forms
        its own group. Matrix factors are kept as they are.
        """
        steps = []
        for coeff, tp in ham.terms:
            if abs(np.imag(coeff)) > 1e-14:
                raise ValueError("Trotter splittings need real coefficients")
            steps.append(TrotterStep(tp, float(np.real(coeff))))
        groups = groups if groups is not None else [[i] for i in range(len(steps))]
        grouped = [[steps[i] for i in g] for g in groups]
        if order == 1:
            return cls.first_order(grouped)
        if order == 2:
            return cls.strang(grouped)
        raise ValueError(f"Only first and second order splittings exist, got {order}")


@dataclass
class ProgramEntry:
    swaps_before: SwapList
    gate: LocalGate
    swaps_after: SwapList


def exponentiate_splitting(splitting: TrotterSplitting, dt: float,
                           symbols: Optional[Mapping[str, np.ndarray]] = None,
                           max_sites: int = MAX_GATE_SITES) -> List[ProgramEntry]:
    """Turns a splitting into the gates of one time step of size ``dt``."""
    program = []
    for step, before, after in zip(splitting.steps, splitting.swaps_before, splitting.swaps_after):
        if len(step.operator) > max_sites:
            raise CapabilityError(f"Trotter step acts on {len(step.operator)} sites, more than "
                                  f"{max_sites}; use a TDVP method for such terms")
        gate = exp_local(step.operator, -1j * step.factor * dt, symbols)
        program.append(ProgramEntry(list(before), gate, list(after)))
    return program
