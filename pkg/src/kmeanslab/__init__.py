"""Lloyd vs. Hartigan k-means under an isotropic Gaussian mixture."""

from .clustering import (
    CentroidSet,
    EmptyClusterError,
    RunConfig,
    RunReport,
    centroids,
    hartigan_distance,
    hartigan_run,
    init_kmeanspp,
    init_random_centers,
    init_random_partition,
    is_hartigan_fixed_point,
    is_lloyd_fixed_point,
    kmeans_loss,
    lloyd_run,
    pca_reduce,
    pca_split,
    wcss,
)
from .metrics import nmi, wilson_interval, win_rate_score
from .model import (
    Dataset,
    DatasetParseError,
    GmmSpec,
    Partition,
    ValidationError,
    enumerate_bipartitions,
    is_correct_partition,
    is_q_balanced,
    load_dataset_csv,
    purity_view,
    sample_gmm,
    save_dataset_csv,
)
from .rng import Stream, derive_seed

__version__ = "0.1.0"
