"""Indirect optimal control for port-controlled Hamiltonian systems.

Problems are written in a small text format (:mod:`portpmp.model`), solved by
costate shooting on the maximum principle (:mod:`portpmp.indirect`) and
cross-checked against a direct-transcription optimiser
(:mod:`portpmp.direct`).
"""

from .bench import CheapestStopParams, analytic_classic, classic_problem, ported_problem
from .direct import DirectTranscriptionSolver, compare, optimize, transcribe
from .dynamics import (
    IntegrationError, Trajectory, adjoint_rhs, extended_hamiltonian, hamiltonian,
    output_e, output_eprime, rk4_integrate, vector_field,
)
from .expr import ExprError, diff, evaluate, parse, to_text
from .indirect import (
    IndirectShootingSolver, SolverConfig, SolverFailedError, UnboundedHamiltonianError,
    check_certificate, integrate_extremal, maximize_hamiltonian, shooting_residual, solve,
)
from .model import (
    ControlProblem, ProblemError, check_problem, dump_problem, load_problem, read_problem, validate,
)

__version__ = "0.1.0"
