"""3D point-target tracking from linear-array pulse-echo ultrasound.

Submodules
----------
geometry
    Coordinate, array, frame and image types; pixel <-> mm conversion.
simulate
    Synthetic RF frames, trajectories and calibrated noise.
beamform
    Delay-and-sum reconstruction.
features
    Amplitude marker and high-intensity pixel observations.
mlp
    The offset/aberration estimator network and its trainer.
kalman
    Linear-Gaussian state-space models and recursions.
tracker
    Per-frame tracking sessions; maximum-intensity baseline.
evaluate
    Error metrics, experiment summaries, error matrix.
io
    Sequence / image / model file containers.
"""

from .geometry import (
    ArrayGeometry,
    ImageGrid,
    Point3,
    RFFrame,
    USImage,
    mm_to_pixel,
    pixel_to_mm,
)
from .simulate import (
    NoiseSpec,
    TrajectorySpec,
    calibrate_noise,
    directivity,
    gen_trajectory,
    simulate_frame,
    simulate_sequence,
)
from .beamform import apparent_axial, das_reconstruct
from .features import (
    PixelObservations,
    amplitude_marker,
    image_marker,
    measurement_noise,
    top_intensity_pixels,
)
from .kalman import (
    FilterState,
    ModelMatrices,
    ProcessNoise,
    build_matrices,
    correct_axial,
    initial_state,
    predict,
    update,
)
from .mlp import (
    LMConfig,
    MLPParams,
    TrainingGridSpec,
    TrainingSet,
    forward,
    generate_training_data,
    jacobian,
    load_model,
    save_model,
    train_lm,
)
from .tracker import TrackerConfig, TrackEstimate, TrackingSession, init_session, mi_estimate
from .evaluate import MetricsReport, ErrorMatrix, compute_error_matrix, summarize, track_sequence

__all__ = [
    "ArrayGeometry",
    "ImageGrid",
    "Point3",
    "RFFrame",
    "USImage",
    "mm_to_pixel",
    "pixel_to_mm",
    "NoiseSpec",
    "TrajectorySpec",
    "calibrate_noise",
    "directivity",
    "gen_trajectory",
    "simulate_frame",
    "simulate_sequence",
    "apparent_axial",
    "das_reconstruct",
    "PixelObservations",
    "amplitude_marker",
    "image_marker",
    "measurement_noise",
    "top_intensity_pixels",
    "FilterState",
    "ModelMatrices",
    "ProcessNoise",
    "build_matrices",
    "correct_axial",
    "initial_state",
    "predict",
    "update",
    "LMConfig",
    "MLPParams",
    "TrainingGridSpec",
    "TrainingSet",
    "forward",
    "generate_training_data",
    "jacobian",
    "load_model",
    "save_model",
    "train_lm",
    "TrackerConfig",
    "TrackEstimate",
    "TrackingSession",
    "init_session",
    "mi_estimate",
    "MetricsReport",
    "ErrorMatrix",
    "compute_error_matrix",
    "summarize",
    "track_sequence",
]

__version__ = "0.1.0"
