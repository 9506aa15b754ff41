"""Lyapunov exponents and spectra of Schroedinger operators driven by the m-fold circle map."""

__version__ = "0.1.0"

from .cocycle import (
    EnergyGrid,
    LyapunovCurve,
    LyapunovEstimate,
    NumericalFailure,
    TransferCocycle,
    TransferMatrix,
    cocycle_property_check,
    estimate_gamma,
    lyapunov_curve,
    one_step,
    propagate,
)
from .operator import BoundaryCondition, TridiagonalOperator, build_halfline_box, build_wholeline_box, restrict
from .potential import PotentialSpec, SamplingFunction, halfline_potential, wholeline_potential
from .spectral import BandSet, decay_report, eigensolve, periodic_bands
from .symbolic import (
    CirclePoint,
    DigitSequence,
    TwoSidedDigitSequence,
    encode,
    evaluate_D,
    restrict_to_halfline,
    sample_bernoulli,
)
