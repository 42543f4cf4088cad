from .bundle import ExpertBundle, MissingClipError
from .search import (SearchConfig, SearchResult, random_search, random_search_coarse,
                     random_search_local, score_candidates)
from .stacking import (ScalingFactors, StackedSVM, scaling_search, search_factors, stack_features,
                       svm_stack)
from .subsets import SubsetResult, enumerate_subset_averages, subset_mean
from .swapped import bag_seeds, bag_weighted_averages, build_swapped_predictions
from .weights import WeightMatrix, fused_scores, sample_weight_matrix, weighted_average

__all__ = [
    "ExpertBundle", "MissingClipError", "ScalingFactors", "SearchConfig", "SearchResult",
    "StackedSVM", "SubsetResult", "WeightMatrix", "bag_seeds", "bag_weighted_averages",
    "build_swapped_predictions", "enumerate_subset_averages", "fused_scores", "random_search",
    "random_search_coarse", "random_search_local", "sample_weight_matrix", "scaling_search",
    "score_candidates", "search_factors", "stack_features", "subset_mean", "svm_stack",
    "weighted_average",
]
