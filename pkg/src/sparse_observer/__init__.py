"""Joint observer-gain and minimal sensor-precision design for LTI systems.

The package couples a small dense conic solver (:mod:`sparse_observer.sdp`)
with matrix-inequality lowerings of the quadratic and peak-gain observer
synthesis problems (:mod:`sparse_observer.lmi`), iterative-reweighting and
exhaustive-search drivers (:mod:`sparse_observer.design`), and independent
norm verification plus error-dynamics simulation
(:mod:`sparse_observer.analysis`).  A linearized longitudinal F-16 model
ships as the worked example (:func:`sparse_observer.model.load_f16`).
"""

from . import analysis, design, linalg, lmi, model, sdp
from .analysis import NormCertificate, SimulationRun, certify, h2_norm, hinf_norm, simulate
from .design import ReweightOptions, SubsetRecord, exhaustive_search, polish, reweighted_solve
from .lmi import (DesignResult, DesignSpec, DesignStatus, VariableLayout,
                  add_precision_bounds, build_design_problem, build_h2,
                  build_hinf, recover_design, theorem_margins)
from .model import (ErrorSystem, LtiPlant, NormWeights, PrecisionVector,
                    apply_weights, build_error_system, load_f16, load_plant,
                    restrict_sensors)
from .sdp import ConeSpec, SdpProblem, SdpSolution, SolverOptions, Status

__version__ = "0.1.0"

__all__ = [
    "analysis", "design", "linalg", "lmi", "model", "sdp",
    "NormCertificate", "SimulationRun", "certify", "h2_norm", "hinf_norm",
    "simulate", "ReweightOptions", "SubsetRecord", "exhaustive_search",
    "polish", "reweighted_solve", "DesignResult", "DesignSpec", "DesignStatus",
    "VariableLayout", "add_precision_bounds", "build_design_problem",
    "build_h2", "build_hinf", "recover_design", "theorem_margins",
    "ErrorSystem", "LtiPlant", "NormWeights", "PrecisionVector",
    "apply_weights", "build_error_system", "load_f16", "load_plant",
    "restrict_sensors", "ConeSpec", "SdpProblem", "SdpSolution",
    "SolverOptions", "Status",
]
