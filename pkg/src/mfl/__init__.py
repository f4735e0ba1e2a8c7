"""Simulation and likelihood inference for McKean-Vlasov interacting particle systems."""
from mfl.errors import (
    ConfigError,
    DomainError,
    ExperimentError,
    MflError,
    NumericError,
    PreconditionError,
    ShapeError,
    SimulationBlowUpError,
    SingularMatrixError,
    UnsupportedModelError,
)
from mfl.kernels import BACKEND
from mfl.models import (
    DiffusionSpec,
    DoubleLayer,
    EmpiricalMeasure,
    GenLinear,
    McKeanOU,
    NonlinearF,
    ParamBox,
    make_model,
)
from mfl.simulate import InitialLaw, TimeGrid, simulate_particles

__version__ = "0.1.0"
