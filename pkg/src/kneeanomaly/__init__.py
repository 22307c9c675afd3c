"""Anomaly maps, loss evaluation, volumetric metrics and lesion-detection statistics
for 3D knee MR segmentation."""

__version__ = "0.1.0"

from .detection import classify_bone, detection_report, roc_auc, sweep_detection
from .io import read_volume, write_volume
from .losses import (
    LossConfig,
    dice_loss,
    error_map,
    focal_ce_loss,
    focal_weights,
    loss_a,
    loss_g,
    prepare_masked_input,
    total_seg_loss,
    total_transfer_loss,
    weighted_dice_loss,
)
from .metrics import distance_transform, dsc, evaluate_case, extract_boundary, surface_distances
from .morphology import (
    connected_components,
    dilate,
    erase_region,
    largest_component_filter,
    remove_small_components,
)
from .phantom import AugmentConfig, PhantomConfig, generate_phantom, random_affine, simulate_reconstruction
from .stats import studentized_range_cdf, tukey_hsd
from .volume import LabelMap, ProbabilityMap, Volume, argmax_labels, one_hot, z_normalize
