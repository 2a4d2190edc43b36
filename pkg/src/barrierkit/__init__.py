"""Control barrier function safety filters for control-affine systems."""

from . import certificates, controllers, models, qp, sim, symbolic
from .certificates import (
    BarrierCertificate,
    CertificatePackage,
    ClassKappa,
    concatenate,
    corridor_barriers,
    future_focused_barrier,
    lie_derivatives,
    rectify_relative_degree,
)
from .controllers import ControllerConfig, cbf_qp_filter, make_controller
from .models import ControlAffineModel, builtin, dynamics, from_expressions
from .qp import QpProblem, QpSolution, solve
from .sim import Scenario, SimulationTrace, execute, monte_carlo
from .symbolic import parse, to_source

__version__ = "0.1.0"

__all__ = [
    "BarrierCertificate",
    "CertificatePackage",
    "ClassKappa",
    "ControlAffineModel",
    "ControllerConfig",
    "QpProblem",
    "QpSolution",
    "Scenario",
    "SimulationTrace",
    "builtin",
    "cbf_qp_filter",
    "certificates",
    "concatenate",
    "controllers",
    "corridor_barriers",
    "dynamics",
    "execute",
    "from_expressions",
    "future_focused_barrier",
    "lie_derivatives",
    "make_controller",
    "models",
    "monte_carlo",
    "parse",
    "qp",
    "rectify_relative_degree",
    "sim",
    "solve",
    "symbolic",
    "to_source",
]
