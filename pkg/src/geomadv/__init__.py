"""Geometric adversarial-robustness lab.

Analytic manifold geometry, delta-covers, closed-form robustness and
sample-complexity bounds, a small ReLU network with manual backprop,
gradient-based and gradient-free attacks, certified nearest-neighbor
classification, and a seeded experiment harness.
"""

from .geometry import (
    ConcentricSpheres,
    GeometryError,
    GeometrySummary,
    ManifoldSpec,
    NormKind,
    ParallelFlats,
    distance_to_class,
    distances_to_class,
    in_tube,
    normal_space_angle,
    separation_sign_change,
    summarize,
)
from .covers import (
    CoverConfig,
    CoverScheme,
    LabeledDataset,
    grid_cover_flats,
    random_sample_circles,
    sample_tube_points,
    verify_cover,
)
from .bounds import (
    AccuracyEstimate,
    BoundResult,
    accuracy_upper_bound_mc,
    coverage_ratio_bound,
    l_cover_bound,
    linear_region_lower_bound,
    linf_axis_offset,
    medial_proximity_bound,
    nn_cover_bound,
    nn_noise_cover_bound,
    plane_coverage_bound,
    sampling_gap_ratio,
    segment_count_lower_bound,
    sphere_coverage_bound,
    tube_cover_sample_lower_bound,
)
from .mlp import (
    MlpModel,
    PgdConfig,
    TrainConfig,
    TrainingDivergedError,
    load_checkpoint,
    loss_and_grads,
    save_checkpoint,
    train,
    train_fresh,
)
from .attacks import (
    AttackConfig,
    AttackOutcome,
    bim,
    fgsm,
    gradient_free_projection,
    nn_walk_attack,
    pgd,
)
from .nearest import NnIndex, RobustnessCertificate, certify, classify, classify_batch, k_nearest
from .data import (
    CodimEmbedding,
    DataFormatError,
    MnistSet,
    embed_dataset,
    load_dataset,
    load_mnist,
    make_circles,
    make_planes,
    make_spheres,
    save_dataset,
)

__version__ = "0.1.0"
