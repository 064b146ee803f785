from tropnnc.compression.algorithms import (
    baseline_neural_path_kmeans,
    baseline_zonotope_kmeans,
    compress_multi_output,
    compress_multi_output_iterative,
    compress_single_output,
    criterion_value,
)
from tropnnc.compression.clustering import Clustering, hierarchical_cluster, kmeans, layer_threshold
from tropnnc.compression.network import (
    CompressionConfig,
    baseline_l1,
    baseline_random,
    compress_layer,
    compress_network,
)
