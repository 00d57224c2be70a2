"""
mfginv: periodic mean-field-game solves and cost-coefficient recovery.

The package couples a pseudospectral IMEX solver for the backward
value / forward density system on the unit torus with the total-cost
measurement map m0 -> u(.,0), and inverts linearized measurements for
the Taylor coefficients of the running and terminal costs, including
time-dependent running costs, simultaneous recovery, higher orders, and
the closed-form counterexamples showing why the zero conditions
F(x,t,0) = G(x,0) = 0 are necessary.
"""

from .costs import (
    HamiltonianSeries,
    TaylorCost,
    cauchy_bound,
    cost_eval,
    extract_linearization_coeffs,
    hamiltonian_eval,
    hamiltonian_grad,
    quadratic_hamiltonian,
)
from .forward import MFGConfig, MFGSolution, PicardParams, measure, residual_check, solve_mfg
from .grids import (
    FourierSpectrum,
    ScalarField,
    SpaceTimeField,
    SpatialGrid,
    TimeGrid,
    ValidationError,
    canonical_frequencies,
)
from .linearize import LinearizationResult, ProbeSpec, fd_extract, linearize_direct
from .parabolic import ParabolicProblem, duhamel_solve_order1, solve_parabolic
from .recovery import (
    ProbePlan,
    ReconstructionReport,
    decompose_frequency,
    gram_injectivity_check,
    recover_F1_static,
    recover_F1_timedep,
    recover_FG_simultaneous,
    recover_G1,
    recover_higher_order,
)
from .spectral import (
    dft_forward,
    dft_inverse,
    heat_propagate,
    spectral_divergence,
    spectral_gradient,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
