from .mlp import (FeatureSequence, FinetuneConfig, FinetuneLog, MLPWithPooling, center_sequences,
                  finetune, loss_and_grad, predict_clip, project_max_norm)
from .optim import NonFiniteGradientError, OptimizerState, rmsprop_nesterov_step
from .pooling import PoolingConfig, topn_pool, topn_pool_backward
from .rbm import (BERNOULLI, NOISY_RELU, DBNConfig, RBMLayer, cd1_update, noisy_relu_bounded,
                  pretrain_dbn, reconstruction_error, train_rbm)

__all__ = [
    "BERNOULLI", "DBNConfig", "FeatureSequence", "FinetuneConfig", "FinetuneLog", "MLPWithPooling",
    "NOISY_RELU", "NonFiniteGradientError", "OptimizerState", "PoolingConfig", "RBMLayer",
    "cd1_update", "center_sequences", "finetune", "loss_and_grad", "noisy_relu_bounded",
    "predict_clip", "pretrain_dbn", "project_max_norm", "reconstruction_error",
    "rmsprop_nesterov_step", "topn_pool", "topn_pool_backward", "train_rbm",
]
