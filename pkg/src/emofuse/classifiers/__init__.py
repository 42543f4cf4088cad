from .grid import GridSearchPlan, grid_search, two_stage_search
from .kernels import KernelConfig, KernelDomainError, gram, kernel_eval
from .logreg import DivergenceError, LogisticModel, logreg_predict, logreg_train
from .svm import SVMError, TrainedSVM, svm_predict_proba, svm_train

__all__ = [
    "DivergenceError", "GridSearchPlan", "KernelConfig", "KernelDomainError",
    "LogisticModel", "SVMError", "TrainedSVM", "grid_search", "gram", "kernel_eval",
    "logreg_predict", "logreg_train", "svm_predict_proba", "svm_train", "two_stage_search",
]
