"""Quadratic multiform separation: one quadratic member function per class,
trained with Adam on a clamped-ratio loss."""

__version__ = "0.1.0"

from .adam import AdamConfig, AdamState, adam_init, adam_step, bias_corrected
from .dataio import (
    LabeledDataset,
    ScalerParams,
    SplitSpec,
    apply_standardizer,
    fit_standardizer,
    kfold,
    kfold_indices,
    load_csv,
    load_features,
    split,
    split_indices,
)
from .errors import ConfigError, DataError, ModelFormatError, NumericalError, QmsError, ShapeError
from .evaluation import CvReport, SweepReport, accuracy, cross_validate, evaluate, holdout, sweep
from .loss import (
    ClassPartitionedBatch,
    GradientSet,
    clamp_indicator,
    gradients,
    loss,
    phi_jk,
)
from .model import (
    MemberFunctionParams,
    QmsModel,
    alpha_matrix,
    member_eval,
    member_eval_batch,
    param_count,
    predict,
    predict_batch,
)
from .serialization import deserialize, load_model, save_model, serialize
from .trainer import TrainConfig, Trainer, TrainingHistory, init_model, make_batches, train
