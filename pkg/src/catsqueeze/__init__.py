"""Protecting Wigner negativity of cat states against loss by Gaussian squeezing."""

from .channels import ChannelSpec, gaussian_env_channel, loss_adjoint, phase_rotate, pure_loss, squeezed_input_channel
from .errors import (
    CatSqueezeError,
    CutoffError,
    DegenerateStateError,
    InvalidChannelError,
    InvalidStateError,
    NoNegativityError,
    TruncationError,
)
from .metrics import (
    DecayCurve,
    DecayCurvePoint,
    decay_curve,
    fock_rd_ladder,
    optimal_squeezing,
    rate_of_decay,
    rd_reduction_factor,
    squeezed_cat,
)
from .states import (
    DensityMatrix,
    SqueezeParams,
    cat,
    coherent,
    fidelity,
    fock,
    fock_superposition,
    mean_photon,
    purity,
    squeeze,
    thermal,
    vacuum,
)
from .tomography import (
    QuadratureDataset,
    TemporalMode,
    TomographyConfig,
    delay_for_eta,
    delayed_mode_state,
    effective_eta,
    maxlik_reconstruct,
    sample_homodyne,
)
from .wigner import PhasePoint, WignerGrid, find_min, kernel_convolve, wigner_grid, wigner_point, wigner_values

__version__ = "0.1.0"
