"""Hybrid quantum-classical dynamics with a continuously measured oscillator."""

from .chain import ChainKernel, KrausWidth, chain_step, run_chain, run_chain_batch
from .classical import ClassicalState, PotentialKind, PotentialSpec, classical_step, hybrid_force
from .config import (ClassicalParams, Coupling, HybridConfig, Mode, Numerics, Packet,
                     config_from_dict)
from .coupler import initial_state, run_hybrid_batch, run_trajectory, thermal_sigma
from .ensemble import (BranchSpec, EnsembleSummary, lindblad_oracle, localization_time,
                       run_ensemble, trace_distance)
from .errors import (ConfigError, DegenerateState, DegenerateSuperposition, DimensionMismatch,
                     EnsembleFailure, HybridError, InvalidDensityMatrix, InvalidParameter,
                     NonHermitian, NumericalBlowup, TruncationError, UnsupportedPotential)
from .experiments import simulate
from .hilbert import (FockBasis, Operators, QuantumState, coherent_state, expect, squeezed_state,
                      superpose, variance)
from .io import __version__, dump_config, parse_config, read_trajectory_csv, write_trajectory_csv
from .meanfield import ehrenfest_oracle, run_meanfield
from .record import BatchRecord, TrajectoryRecord
from .sse import Convention, NoiseIncrement, make_coefficients, record_sample, sse_step
