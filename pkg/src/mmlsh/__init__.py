"""mmlsh: object-level approximate nearest neighbor search for multimedia data.

Multimedia objects are sets of high-dimensional feature vectors; this package
indexes the points with Euclidean LSH, answers top-k object queries through
collision counting with provable stopping conditions, and simulates
buffer-conscious query scheduling over a modeled disk.
"""

from .baselines import (BordaConfig, GroundTruth, borda_aggregate, exact_knn_objects,
                        full_ranking, load_ground_truth, point_knn_c2lsh,
                        point_knn_linear, save_ground_truth)
from .buffering import (MMLSH, NS1, NS2, BufferState, CostModel, FrequencyProfile,
                        SchedulerConfig, access_bucket, build_frequency_profile,
                        evict_lru, evict_mmlsh, schedule_ns1, schedule_ns2,
                        split_queries, write_trace)
from .engine import (QueryResult, QueryStats, check_t1, check_t2, count_collisions,
                     gamma_min_bound, knn_objects)
from .errors import FeatureFileError, IndexFileError, ObjectMapError, ParameterError
from .lsh import (DEFAULT_C, DEFAULT_W, HashFunction, LshIndex, LshParams,
                  build_index, collision_probability, derive_params, hash_point,
                  load_index, save_index)
from .model import (Dataset, FeatureVector, MultimediaObject, QueryObject,
                    build_dataset, load_feature_file, load_object_map,
                    synth_dataset, write_feature_file)
from .similarity import (GammaParams, collision_index, gamma_distance,
                         is_gamma_candidate, is_gamma_false_positive, object_ratio,
                         r_object_similarity)

__version__ = "0.1.0"
