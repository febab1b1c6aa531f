"""Numerical laboratory for maximal Bergman projections on the unit disc.

Implements radial-weight machinery, the weighted Bergman kernel and its
circle means, the characterizing constants that govern boundedness of the
maximal projection between weighted L^p spaces, a discretized radial model
operator with norm estimation, and a verification suite with a CLI.
"""

from .errors import (
    BergmanLabError,
    ConvergenceError,
    DomainError,
    WeightSpecError,
)
from .quadrature import CumulativeTables, RadialGrid, fit_tail, gauss_rule, integrate
from .weights import (
    CounterexampleEtaWeight,
    CounterexampleNuWeight,
    ExponentialWeight,
    InverseLogWeight,
    PowerLogWeight,
    RadialWeight,
    StandardWeight,
    TabulatedWeight,
    log_factor,
    parse_weight,
    quadrature_tail,
)
from .classify import (
    DecayVerdict,
    DoublingVerdict,
    RegularityVerdict,
    WeightClassReport,
    classify,
)
from .kernel import (
    KernelEvaluator,
    MeanTable,
    RatioSweep,
    kernel_norm,
    theoremA_ratio_sweep,
)
from .characterization import (
    ConstantTrace,
    HypothesisReport,
    J_omega,
    LowerBoundReport,
    Mp_constant,
    Np_constant,
    P1Report,
    TripleConfig,
    hypothesis_ratio,
    necessity_lower_bound,
    p1_constant,
    p1_value,
    test_function,
)
from .operator import (
    NormEstimate,
    RadialOperator,
    adjoint,
    apply_at,
    assemble,
    boyd_norm,
    monomial_identity_check,
    rayleigh,
)

__all__ = [
    "BergmanLabError",
    "ConvergenceError",
    "DomainError",
    "WeightSpecError",
    "CumulativeTables",
    "RadialGrid",
    "fit_tail",
    "gauss_rule",
    "integrate",
    "RadialWeight",
    "StandardWeight",
    "PowerLogWeight",
    "ExponentialWeight",
    "InverseLogWeight",
    "CounterexampleNuWeight",
    "CounterexampleEtaWeight",
    "TabulatedWeight",
    "parse_weight",
    "quadrature_tail",
    "log_factor",
    "DoublingVerdict",
    "DecayVerdict",
    "RegularityVerdict",
    "WeightClassReport",
    "classify",
    "KernelEvaluator",
    "MeanTable",
    "RatioSweep",
    "kernel_norm",
    "theoremA_ratio_sweep",
    "TripleConfig",
    "ConstantTrace",
    "HypothesisReport",
    "P1Report",
    "LowerBoundReport",
    "J_omega",
    "Mp_constant",
    "Np_constant",
    "hypothesis_ratio",
    "p1_constant",
    "p1_value",
    "necessity_lower_bound",
    "test_function",
    "RadialOperator",
    "NormEstimate",
    "assemble",
    "adjoint",
    "apply_at",
    "boyd_norm",
    "rayleigh",
    "monomial_identity_check",
]

__version__ = "0.1.0"
