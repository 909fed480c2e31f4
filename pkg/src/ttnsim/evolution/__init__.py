"""Time evolution of tree tensor network states."""
from .krylov import local_expm_apply
from .run import Method, TimeEvoConfig, TimeEvolutionResult, run
from .tdvp import TdvpOrder, tdvp1_step, tdvp2_step
from .tebd import apply_gate, apply_swap, tebd_step
from .trotter import (ProgramEntry, SwapList, TrotterSplitting, TrotterStep,
                      exponentiate_splitting)
