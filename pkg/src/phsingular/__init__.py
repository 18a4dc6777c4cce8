"""Singular optimal control for port-Hamiltonian systems.

Structure checks, Lie brackets of the augmented control-affine fields, the
Goh and generalized Legendre-Clebsch conditions, singular feedback with box
bounds, index-1 descriptor reduction and a fixed-step RK4 simulator.
"""

from .conditions import (ConditionReport, LCCertificate, evaluate_conditions, goh_linear,
                         goh_nonlinear, lc_check, lc_matrix_linear, lc_matrix_nonlinear)
from .descriptor import (DescriptorPHSystem, IndexViolationError, ReducedSystem, from_mechanical,
                         reduce_linear, reduce_nonlinear)
from .feedback import (ComponentPartition, ControlBounds, FeedbackSolution, classify,
                       constrained_singular_feedback, goh_check_subset, singular_feedback,
                       switching_functions)
from .lie import AugmentedSystem, VectorField, augment, lie_bracket, nested_bracket
from .ph_core import (EnergyLedger, LinearQuadraticCost, NonlinearAffineCost, PHSystem,
                      StructureError, energy, validate_structure)
from .simulator import (ScenarioConfig, Trajectory, audit, consistent_initial_adjoint,
                        integrate_closed_loop)

__version__ = "0.1.0"

__all__ = [
    "PHSystem", "LinearQuadraticCost", "NonlinearAffineCost", "EnergyLedger", "StructureError",
    "energy", "validate_structure",
    "VectorField", "AugmentedSystem", "augment", "lie_bracket", "nested_bracket",
    "ConditionReport", "LCCertificate", "evaluate_conditions", "goh_linear", "goh_nonlinear",
    "lc_check", "lc_matrix_linear", "lc_matrix_nonlinear",
    "ControlBounds", "ComponentPartition", "FeedbackSolution", "classify", "singular_feedback",
    "constrained_singular_feedback", "goh_check_subset", "switching_functions",
    "DescriptorPHSystem", "ReducedSystem", "IndexViolationError", "from_mechanical",
    "reduce_linear", "reduce_nonlinear",
    "ScenarioConfig", "Trajectory", "audit", "consistent_initial_adjoint", "integrate_closed_loop",
]
