"""Depth completion with graph propagation and gated fusion, on a numpy autodiff core."""

from .config import DataConfig, ModelConfig, RunConfig, TrainConfig, desk_config
from .graph import GraphLevel, build_pyramid, knn_indices, unproject
from .metrics import MetricsRecord, compute_metrics
from .model import DepthCompletionNet, ForwardResult
from .sparse import CameraIntrinsics, SparseDepthMap, downsample_sparse, sample_nodes
from .tensor import Parameter, Tensor

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics", "DataConfig", "DepthCompletionNet", "ForwardResult",
    "GraphLevel", "MetricsRecord", "ModelConfig", "Parameter", "RunConfig",
    "SparseDepthMap", "Tensor", "TrainConfig", "build_pyramid", "compute_metrics",
    "desk_config", "downsample_sparse", "knn_indices", "sample_nodes", "unproject",
    "__version__",
]
