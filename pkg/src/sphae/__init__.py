"""Band-limited harmonic analysis on S^2/SO(3) and a rotation-invariant
spherical convolutional autoencoder trained with a max-correlation loss."""

from .backend import active_backend
from .corr import argmax_so3, s2_correlate, so3_correlate
from .exceptions import (
    CheckpointError,
    ConfigConflictError,
    DataFormatError,
    DimensionMismatchError,
    InvalidBandwidthError,
    NonRealSignalError,
    SphaeError,
)
from .harmonics import LegendreTable, WignerTable, legendre_table, wigner_D, wigner_d_table
from .loss import l2_loss, rotinv_loss
from .model import Checkpoint, Model, ModelConfig, build_classifier, load_checkpoint, save_checkpoint, scaled_config
from .rotations import EulerZYZ, random_rotation
from .sgrid import S2Grid, SO3Grid, integrate_s2, integrate_so3, make_s2_grid, make_so3_grid
from .spectral import (
    S2Signal,
    S2Spectrum,
    SO3Signal,
    SO3Spectrum,
    pad_spectrum,
    rotate_s2,
    rotate_so3,
    s2_analyze,
    s2_synthesize,
    so3_analyze,
    so3_synthesize,
    truncate_spectrum,
)
from .train import AdamState, TrainConfig, adam_step, train

__version__ = "0.1.0"
