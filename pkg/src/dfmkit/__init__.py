"""Decoherence-free manifolds of open quantum systems: simulation, geometry and reachability."""

from .bloch import (
    MODES,
    PAPER_15,
    PAPER_16,
    PAULI_FULL,
    BilinearModel,
    bilinear_rhs,
    build_bilinear,
    coherence_map,
    integrate_bilinear,
    inverse_coherence_map,
)
from .errors import DfmError
from .geometry import (
    DfmSpec,
    dfm_dimension,
    isospectral_leaf_dimension,
    multiplicity_preserving_tangent,
    stratum_codimension,
    table_generate,
)
from .lindblad import (
    ControlSchedule,
    LindbladModel,
    PiecewiseConstant,
    Tolerances,
    Trajectory,
    lindblad_rhs,
    propagate,
)
from .presets import get_preset, two_qubit_dephasing
from .reachability import (
    CONSTANT,
    STOCHASTIC,
    closure_defect,
    degree0_check,
    reachability_distribution,
    tangent_containment,
)
from .spectral import (
    BlockSelection,
    consistency_residual,
    dfs_hamiltonian,
    dfs_projector,
    dfs_state,
    eigenframe_path,
    eigenvalue_preservation_report,
    spectral_blocks,
)

__version__ = "0.1.0"
