"""Data-driven stabilization of switched linear systems with a probabilistic
joint spectral radius certificate."""

from .certification import Certificate, certify, jsr_bracket, theorem_bound, whitebox_cqlf_bound
from .errors import StabError
from .geometry import ConfidenceQuery, cap_measure, cap_measure_inv, confidence_violation, epsilon_for_confidence
from .soslift import LiftBasis, lifted_p_step
from .synthesis import SolverConfig, SynthesisResult, alternate, k_step, p_step
from .system import SampleSet, SwitchedSystem, benchmark_system, sample_dataset

__version__ = "0.1.0"

__all__ = [
    "Certificate", "ConfidenceQuery", "LiftBasis", "SampleSet", "SolverConfig", "StabError",
    "SwitchedSystem", "SynthesisResult", "alternate", "cap_measure", "cap_measure_inv",
    "certify", "confidence_violation", "epsilon_for_confidence", "jsr_bracket", "k_step",
    "lifted_p_step", "p_step", "benchmark_system", "sample_dataset", "theorem_bound",
    "whitebox_cqlf_bound",
]
