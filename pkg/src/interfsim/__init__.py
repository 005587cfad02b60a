"""Two-engine simulator for mode-based interferometer experiments.

An exact branch-enumeration engine and a trial-by-trial stochastic engine
share one apparatus model; a small line-oriented DSL describes experiments
and a chi-square layer checks that the two engines agree.
"""

from .core import (
    ATOL,
    UNDETECTED,
    Apparatus,
    BranchAmplitude,
    Detector,
    DetectorBank,
    DeviceKind,
    DeviceOp,
    Observable,
    ProbabilityState,
    TensorSplit,
    basis_state,
    beam_splitter,
    cross,
    custom,
    embed,
    half_mirror,
    is_product,
    phase,
    reflector,
    tensor,
)
from .analytic import (
    BranchNode,
    BranchTree,
    OutcomeDistribution,
    apply,
    born,
    conditional_distribution,
    enumerate_outcomes,
    expectation,
    path_sum_amplitude,
)
from .sampling import (
    DetectorFired,
    EnsembleReport,
    PassedBank,
    TrialRecord,
    ensemble_expectation,
    run_ensemble,
    sample_trial,
    variate,
)
from .stats import Verdict, chi_square, chi_square_p_value, compare
from .dsl import ExperimentDoc, ParseError, parse, serialize
from .cli import builtin, scan_phase

__all__ = [
    "ATOL",
    "UNDETECTED",
    "Apparatus",
    "BranchAmplitude",
    "BranchNode",
    "BranchTree",
    "Detector",
    "DetectorBank",
    "DetectorFired",
    "DeviceKind",
    "DeviceOp",
    "EnsembleReport",
    "ExperimentDoc",
    "Observable",
    "OutcomeDistribution",
    "ParseError",
    "PassedBank",
    "ProbabilityState",
    "TensorSplit",
    "TrialRecord",
    "Verdict",
    "apply",
    "basis_state",
    "beam_splitter",
    "born",
    "builtin",
    "chi_square",
    "chi_square_p_value",
    "compare",
    "conditional_distribution",
    "cross",
    "custom",
    "embed",
    "ensemble_expectation",
    "enumerate_outcomes",
    "expectation",
    "half_mirror",
    "is_product",
    "parse",
    "path_sum_amplitude",
    "phase",
    "reflector",
    "run_ensemble",
    "sample_trial",
    "scan_phase",
    "serialize",
    "tensor",
    "variate",
]
