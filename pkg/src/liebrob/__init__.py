"""Exact open-system lattice dynamics with Lieb-Robinson bound certification.

Small spin lattices evolve exactly through dense vectorized GKSL generators;
large harmonic lattices evolve exactly through a 2n x 2n kernel matrix. The
bounds modules fit the decay constants, evaluate every theorem's right-hand
side, and certify LHS <= RHS pointwise.
"""

from .bounds import (
    BoundReport,
    BoundRow,
    JMatrix,
    PowerLawCert,
    Theorem1Params,
    build_j_matrix,
    c2_path_sum,
    c3_path_sum,
    certify,
    commutator_theorem1_params,
    general_theorem1_params,
    lambda0_fit,
    lightcone_arrivals,
    matrix_exp,
    theorem1_bound,
    theorem2_bound,
    theorem3_bound,
    theorem3_matrix,
)
from .harmonic import (
    CommutatorMatrix,
    HarmonicModel,
    KernelMatrix,
    build_kernel,
    c0_fit,
    harmonic_commutator_norms,
    symplectic_defect,
    symplectic_form,
    theorem4_bound,
)
from .lattice import (
    AssumptionConstants,
    Lattice,
    assumption_constants,
    build_lattice,
    extensivity_sup,
    n_lambda,
    p0_constant,
    p1_constant,
)
from .lindblad import (
    EvolutionConvergenceWarning,
    GKSLModel,
    HamiltonianTerm,
    LindbladTerm,
    Superoperator,
    TimeProfile,
    build_adjoint_generator,
    build_generator,
    commutator_norm_curve,
    commutator_norm_curves,
    heisenberg_evolve,
    schrodinger_evolve,
)
from .operators import (
    ConvergenceError,
    Operator,
    SuperoperatorNormBound,
    adjoint_term_norm_upper,
    embed,
    local_operator,
    named_operator,
    operator_norm,
    schatten_norm,
    superop_norm_1to1_estimate,
    superop_norm_inf_estimate,
    support_distance,
    unvec,
    vec,
)

__version__ = "0.1.0"
