"""
Running a time evolution and recording measurements.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..environments import EnvironmentCache, operator_expectation
from ..operators import TensorProduct
from ..tensor_core import SvdParameters
from ..ttno import TTNO
from ..ttns import TTNS, feasible_bond_dims
from .tdvp import TdvpOrder, tdvp1_step, tdvp2_step
from .tebd import tebd_step
from .trotter import TrotterSplitting, exponentiate_splitting


class Method(Enum):
    TEBD = "tebd"
    TDVP1_FIRST = "tdvp1"
    TDVP1_SECOND = "tdvp1-2nd"
    TDVP2 = "tdvp2"


Observable = Union[TensorProduct, TTNO]


@dataclass
class TimeEvoConfig:
    """
    Parameters of a run.

    Attributes:
        dt: Time step.
        final_time: Last time of the grid; ``floor(T / dt)`` steps are taken.
        operators: Named observables measured at every grid point.
        record_bond_dims: Store the bond dimension of every edge per step.
        svd_params: Truncation for TEBD and two-site TDVP.
        max_bond_dim: One-site TDVP pads all bonds up to this dimension
            (as far as the tree allows) before the first step.
        symbols: Symbol table for symbolic observables and gates.
    """
    dt: float
    final_time: float
    operators: Mapping[str, Observable] = field(default_factory=dict)
    record_bond_dims: bool = True
    svd_params: SvdParameters = field(default_factory=SvdParameters)
    max_bond_dim: Optional[int] = None
    symbols: Optional[Mapping[str, np.ndarray]] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"The time step must be positive, got {self.dt}")
        if not self.final_time >= 0:
            raise ValueError(f"The final time must be non-negative, got {self.final_time}")

    @property
    def num_steps(self) -> int:
        return int(np.floor(self.final_time / self.dt + 1e-9))


@dataclass
class TimeEvolutionResult:
    times: np.ndarray
    values: Dict[str, np.ndarray]
    bond_dims: Dict[Tuple[str, str], np.ndarray] = field(default_factory=dict)

    def header(self) -> List[str]:
        cols = ["t"]
        for name in self.values:
            cols += [f"{name}_re", f"{name}_im"]
        cols += [f"bond:{p}-{c}" for p, c in self.bond_dims]
        return cols

    def rows(self):
        for k, t in enumerate(self.times):
            row = [f"{t:.17g}"]
            for series in self.values.values():
                row += [f"{series[k].real:.17g}", f"{series[k].imag:.17g}"]
            row += [str(int(series[k])) for series in self.bond_dims.values()]
            yield row

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.header())
            writer.writerows(self.rows())


def _measure(psi: TTNS, name: str, op: Observable, symbols) -> complex:
    if isinstance(op, TTNO):
        value = operator_expectation(psi, op)
    else:
        value = psi.expectation_value(op, symbols)
    if not np.isfinite(value):
        raise FloatingPointError(f"Non-finite expectation value of {name!r}")
    return value


def run(psi: TTNS, method: Method, engine_input, cfg: TimeEvoConfig) -> TimeEvolutionResult:
    """
    Evolves ``psi`` in place and measures after every step.

    ``engine_input`` is a :class:`TrotterSplitting` for TEBD and a
    :class:`TTNO` for the TDVP methods.
    """
    method = Method(method)
    if method is Method.TEBD:
        if not isinstance(engine_input, TrotterSplitting):
            raise TypeError("TEBD needs a TrotterSplitting")
        program = exponentiate_splitting(engine_input, cfg.dt, cfg.symbols)
    else:
        if not isinstance(engine_input, TTNO):
            raise TypeError(f"{method.value} needs a TTNO")
        EnvironmentCache(psi, engine_input)  # validates compatibility
        if psi.orthogonality_center is None:
            psi.canonical_form(psi.topology.tdvp_update_path()[0])
    if method in (Method.TDVP1_FIRST, Method.TDVP1_SECOND) and cfg.max_bond_dim is not None:
        feasible = feasible_bond_dims(psi.topology, psi.physical_dims(), cfg.max_bond_dim)
        current = psi.bond_dims()
        psi.pad_bond_dimensions({e: max(current[e], feasible[e]) for e in current})

    steps = cfg.num_steps
    times = cfg.dt * np.arange(steps + 1)
    values = {name: np.zeros(steps + 1, dtype=complex) for name in cfg.operators}
    edges = psi.topology.edges() if cfg.record_bond_dims else []
    bonds = {e: np.zeros(steps + 1, dtype=int) for e in edges}

    def record(k):
        for name, op in cfg.operators.items():
            values[name][k] = _measure(psi, name, op, cfg.symbols)
        dims = psi.bond_dims()
        for e in edges:
            bonds[e][k] = dims[e]

    record(0)
    cache = None
    for k in range(1, steps + 1):
        if method is Method.TEBD:
            tebd_step(psi, program, cfg.svd_params)
        elif method is Method.TDVP1_FIRST:
            cache = tdvp1_step(psi, engine_input, cfg.dt, TdvpOrder.FIRST, cache)
        elif method is Method.TDVP1_SECOND:
            cache = tdvp1_step(psi, engine_input, cfg.dt, TdvpOrder.SECOND, cache)
        else:
            cache, _ = tdvp2_step(psi, engine_input, cfg.dt, cfg.svd_params, cache)
        record(k)
    return TimeEvolutionResult(times, values, bonds)
