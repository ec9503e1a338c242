"""Diagonal and off-diagonal geometric phases of pure and mixed states."""

from .errors import (DomainError, GeophaseError, PhysicsError, SchemaError, SingularConfigurationError,
                     ValidationError)
from .evolution import (GaugeFamily, TimeGrid, UnitaryPath, build_parallel_family, compute_trajectory,
                        connection_factor, evolve, parallel_transport_unitary, subspace_parallel_transport)
from .linalg import OrthonormalBasis, PhaseResult, SpectralDensity, cyclic_shift_unitary, phase_functional
from .phases import (IndexTuple, gauge_invariance_report, mixed_offdiagonal_phase_degenerate,
                     mixed_offdiagonal_phase_nondeg, noninterference_check, pure_offdiagonal_phase)

__version__ = "0.1.0"

__all__ = [
    "DomainError", "GeophaseError", "PhysicsError", "SchemaError", "SingularConfigurationError", "ValidationError",
    "GaugeFamily", "TimeGrid", "UnitaryPath", "build_parallel_family", "compute_trajectory", "connection_factor",
    "evolve", "parallel_transport_unitary", "subspace_parallel_transport",
    "OrthonormalBasis", "PhaseResult", "SpectralDensity", "cyclic_shift_unitary", "phase_functional",
    "IndexTuple", "gauge_invariance_report", "mixed_offdiagonal_phase_degenerate", "mixed_offdiagonal_phase_nondeg",
    "noninterference_check", "pure_offdiagonal_phase",
]
