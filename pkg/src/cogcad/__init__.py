"""Visual-cognition-guided cooperative diagnosis toolkit."""

from .trace import (
    AttentionMap,
    I2MCParams,
    StayPointSet,
    Trajectory,
    extract_stay_points,
    render_soft_attention,
    threshold_hard,
)
from .graph import (
    CnnBlock,
    GnnBlock,
    MaxRelativeGraphConv,
    PatchGraph,
    fuse_distances,
    knn_edges,
    minmax_normalize,
    pairwise_attention_distance,
    pairwise_feature_distance,
)
from .attention_gen import VagConfig, VagOutput, VisualAttentionGenerator, vag_loss
from .classifier import (
    CgcmState,
    CognitionGuidedClassifier,
    VccConfig,
    VccOutput,
    cgcm,
    downsample_attention,
    vcc_loss,
)
from .metrics import MetricsReport, binary_auc, compute_metrics
from .synthetic import SyntheticSample, make_synthetic_dataset, split_dataset
from .training import (
    ModelBundle,
    TrainConfig,
    evaluate,
    load_bundle,
    run_ablation,
    save_bundle,
    total_loss,
    train,
)
from .gradcam import gradcam

__version__ = "0.1.0"
