"""Entangled temporal modes of a driven two-level emitter: simulation,
synthetic measurement records, and moment-based state reconstruction."""

from .spaces import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    annihilation,
    embed,
    partial_trace,
    partial_transpose,
    trace_norm,
    truncate_mode_levels,
)
from .filters import Boxcar, HermiteGauss, TemporalFilter, overlap
from .dynamics import (
    CaptureResult,
    SimConfig,
    SystemParams,
    evolve_cascaded,
    qubit_steady_state,
    single_mode_capture,
)
from .observables import (
    MomentIndex,
    MomentVector,
    enumerate_moments,
    fidelity,
    g2_cross,
    log_negativity,
    moment,
    moments_of_state,
    purity,
)

__version__ = "0.1.0"
