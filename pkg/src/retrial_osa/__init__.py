"""Overlay secondary spectrum access with a finite retrial orbit.

Analytic pipeline: :mod:`.model` (states and transition rules),
:mod:`.generator` (Q and its LDQBD blocks), :mod:`.solver` (GTH and
matrix-geometric stationary solvers), :mod:`.metrics`. :mod:`.simulation`
is the independent statistical check; :mod:`.experiments` and :mod:`.cli`
drive sweeps.
"""

from .estimator import RetrialSpectrumModel
from .generator import (QbdBlocks, RateMatrix, assemble_generator, closed_form_blocks,
                        extract_blocks, validate_generator)
from .metrics import (MetricsReport, auxiliary_metrics, compute_metrics,
                      dropping_probability_exact, dropping_probability_paper, throughput)
from .model import (ModelParams, ParameterError, StateDomainError, StateSpace, SystemState,
                    Transition, TransitionKind, build_state_space, index_of, state_of,
                    transitions_from)
from .simulation import SimConfig, SimEstimates, run_replication, run_simulation
from .solver import StationaryDistribution, solve_direct, solve_ldqbd

__version__ = "0.1.0"
