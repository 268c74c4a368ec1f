"""gazekit: geometric and evaluation machinery for gaze target detection.

Depth maps are back-projected to 3D point clouds, gaze directions are binned
into image-plane and depth-plane sectors, an oriented cuboid carves the
scene along the binned gaze to produce depth-infused saliency (DISM)
pseudo-label masks, a toy-scale multi-modal fusion dataflow turns the masks
into gaze heatmaps, and a metric suite (AUC, L2, min distance, angular
error) evaluates predictions.
"""

from .binning import (DepthBin, GazeAnnotation, ImageBin, bin_depth_angle,
                      bin_gaze, bin_image_angle, image_plane_angle)
from .dataset_io import (AnnotationRecord, DatasetManifest, load_depth,
                         load_heatmap, load_mask, parse_annotations,
                         save_depth, save_heatmap, save_mask)
from .dism import (DismParams, DismResult, OrientedCuboid, build_cuboid,
                   filter_points, gaze_direction, generate_dism,
                   jaccard_distance)
from .fusion import (LinearProjection, Prediction, WeightBundle,
                     attention_weights, fuse, load_bundle, mask_centroid,
                     modulate, pipeline_predict, pool_flatten, save_bundle)
from .geometry import (DepthMap, Intrinsics, PointCloud, face_depth,
                       project_depth, reproject_points, target_depth)
from .metrics import (EvalReport, angular_error, auc_score, evaluate,
                      gaussian_heatmap, heatmap_argmax, l2_distance,
                      min_distance, mse_heatmap_loss)

__version__ = "0.1.0"
