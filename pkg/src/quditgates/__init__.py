"""Pulse shaping, phase bookkeeping and spin-echo compilation for trapped-ion qudit gates."""

from .chain import (InstabilityError, ModeSet, SolverError, TrapConfig, equilibrium_positions,
                    normal_modes)
from .echo import (EchoSequence, EchoStep, PhaseLedger, SequenceError, build_partial,
                   build_sequence, distinct_phases, embedded_zz_check, expand_to_native,
                   nonentangling_uniformity, simulate_ledger)
from .juggling import SwapSequence, apply_swaps, cyclic_shift_swaps, to_native_rotations
from .oracle import CutoffError, OracleConfig, integrate_ls, integrate_ms
from .phases import (LSAmplitudeProfile, LSPhaseTable, MSPhaseSet, PulseBasis, PulseShape,
                     default_basis, displacement_alpha, ls_evolution, ls_phase_table,
                     ms_evolution, ms_phases)
from .shaping import (ConvergenceError, CouplingMatrices, InfeasibleError, OptimizationResult,
                      StabilizationConfig, build_coupling_matrices, existence_theta, max_rabi,
                      optimize_pulse, projection_basis, sensitivity_scan)

__version__ = "0.1.0"
