from .encoding import pool_region, triangle_encode, triangle_from_distances
from .kmeans import Codebook, kmeans_fit
from .motion import (BLOCK, STRIDES, SUPER, LinearEncoder, MotionConfig, MotionFeatures,
                     assign_words, default_encoder_train, dense_superblocks,
                     motion_features_train, sample_video_blocks, superblock_descriptor)
from .mouth import BagOfMouthModel, MouthConfig, bag_of_mouth_predict, bag_of_mouth_train, mouth_crop
from .patches import RegionGrid, extract_patches, normalize_patch
from .whitening import WhiteningTransform, whiten_apply, whiten_fit

__all__ = [
    "BLOCK", "BagOfMouthModel", "Codebook", "LinearEncoder", "MotionConfig", "MotionFeatures",
    "MouthConfig", "RegionGrid", "STRIDES", "SUPER", "WhiteningTransform", "assign_words",
    "bag_of_mouth_predict", "bag_of_mouth_train", "default_encoder_train", "dense_superblocks",
    "extract_patches", "kmeans_fit", "motion_features_train", "mouth_crop", "normalize_patch",
    "pool_region", "sample_video_blocks", "superblock_descriptor", "triangle_encode",
    "triangle_from_distances", "whiten_apply", "whiten_fit",
]
