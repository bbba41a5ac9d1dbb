"""Band structure and quantum transport for unidirectionally constant
magnetic fields, deterministic or random.

The field varies along one coordinate only; the two-dimensional problem then
splits into a family of one-dimensional fiber Hamiltonians indexed by the
conserved transverse momentum k.  This package samples field profiles,
solves the fibers, assembles energy and velocity bands, and evolves wave
packets exactly in the band representation.
"""

from .errors import BoxAdequacyError, CovarianceError, NumericalError, ValidationError
from .field import (
    BumpProfile,
    Constant,
    ExponentialKernel,
    FieldRealization,
    Gaussian,
    GaussianKernel,
    Grid1D,
    LatticeIID,
    NormalDistribution,
    Poisson,
    SquaredGaussian,
    Step,
    TabulatedCovariance,
    TabulatedProfile,
    Tanh,
    UniformDistribution,
    VectorPotential,
    field_metric,
    growth_rate,
    restrict_field,
    shift_field,
    spatial_mean,
    vector_potential,
)
from .sampling import (
    mercer_eigenpairs,
    sample_field,
    sample_gaussian_circulant,
    sample_gaussian_kl,
    seed_sequence,
)
from .fiber import (
    EigenSolution,
    assemble_fiber,
    effective_potential,
    fh_velocity,
    solve_fiber,
    velocity_bound_check,
    velocity_matrix,
)
from .bands import (
    BandFunction,
    BandStructure,
    KGrid,
    assemble_bands,
    check_velocity_bounds,
    default_kgrid,
    spectrum_sets,
    sweep,
    sweep_fibers,
    velocity_bands,
    verify_shift_covariance,
)
from .dynamics import (
    FiberedWavePacket,
    PacketSpec,
    asymptotic_velocity_apply,
    ballistic_residual,
    energy_half_norm,
    evolve,
    localization_bound,
    packet_norm,
    prepare_packet,
    q1_second_moment,
    simulate,
    time_averaged_velocity_apply,
)

__version__ = "0.1.0"
