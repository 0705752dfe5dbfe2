"""Design toolkit for voided viscoelastic underwater acoustic coatings."""

__version__ = "0.1.0"

from .acoustics import (  # noqa: F401
    AcousticResponse,
    InfeasibleGeometryError,
    LayerStack,
    UnitCell,
    absorption_spectrum,
    cell_to_stack,
    first_peak_frequency,
    stack_response,
)
from .inverse import (  # noqa: F401
    Candidate,
    GaConfig,
    ObjectiveSpec,
    OptimizationResult,
    evolve,
    optimize_coating,
)
from .materials import (  # noqa: F401
    ViscoelasticMaterial,
    reference_dma_sweeps,
    reference_polyurethane,
)
from .rheology import (  # noqa: F401
    IsothermalSweep,
    MasterCurve,
    MasterCurveError,
    ShiftFactors,
    build_master_curve,
    eval_modulus,
)
from .surrogate import (  # noqa: F401
    Mlp,
    Normalizer,
    TrainConfig,
    TrainingDivergedError,
    init_mlp,
    predict_spectrum,
    train,
)
