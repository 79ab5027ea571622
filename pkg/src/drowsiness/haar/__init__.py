"""Haar-cascade object detection: features, cascades, detection and training."""

from .cascade import Cascade, CascadeFormatError, EvalCounter, Stage, Stump, eval_cascade, load_cascade, save_cascade
from .detect import (
    DEFAULT_TILTS,
    EYE_MIN_WINDOW,
    EYE_ROI_SIZE,
    DetectParams,
    Detection,
    detect,
    detect_fast,
    detect_tilted,
    eye_band,
    group_hits,
    raw_hits,
    select_eye_roi,
    tilted_eye_roi,
    upright_frame,
)
from .features import HaarFeature, enumerate_features, eval_feature, random_features
from .train import TrainingError, build_cascade, train_stage
