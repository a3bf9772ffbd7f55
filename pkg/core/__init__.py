"""
核心數值模組
"""

from .errors import (
    SspfError,
    InvalidStateError,
    PreconditionError,
    ReflectionError,
    DegenerateStateError,
    SonicPointError
)
from .models import (
    TypeTag,
    Variable,
    WallEdge,
    GasModel,
    GridSpec,
    ScalarField,
    PointState,
    Translate,
    Rotate,
    Scale,
    Profile1D,
    RadialProfile,
    SolverConfig,
    SolveReport,
    BarrierSpec,
    Verdict,
    EllipticityReport,
    MaxPointDiagnostics,
    WallConditionReport,
    DeltaSweepResult,
    ClassificationSummary,
    ValidationResult
)
from .readers import (
    CSVReader,
    FieldCSVReader,
    ProfileCSVReader,
    KeyValueConfigReader
)
from .validators import (
    DataValidator,
    FieldFrameValidator
)

__all__ = [
    # Errors
    'SspfError',
    'InvalidStateError',
    'PreconditionError',
    'ReflectionError',
    'DegenerateStateError',
    'SonicPointError',
    # Models
    'TypeTag',
    'Variable',
    'WallEdge',
    'GasModel',
    'GridSpec',
    'ScalarField',
    'PointState',
    'Translate',
    'Rotate',
    'Scale',
    'Profile1D',
    'RadialProfile',
    'SolverConfig',
    'SolveReport',
    'BarrierSpec',
    'Verdict',
    'EllipticityReport',
    'MaxPointDiagnostics',
    'WallConditionReport',
    'DeltaSweepResult',
    'ClassificationSummary',
    'ValidationResult',
    # Readers
    'CSVReader',
    'FieldCSVReader',
    'ProfileCSVReader',
    'KeyValueConfigReader',
    # Validators
    'DataValidator',
    'FieldFrameValidator',
]
