"""Submodular summarization models with jointly learned feature embeddings,
trained end-to-end with a max-margin objective, for generic and
query-focused extractive summarization.
"""

__version__ = "0.1.0"

from .dataset import (
    Collection,
    QuerySet,
    gen_synthetic,
    load_collection,
    load_dataset,
    loocv_splits,
    make_synthetic_dataset,
    save_collection,
    save_dataset,
)
from .estimator import DsnSummarizer
from .learn import (
    TrainConfig,
    TrainExample,
    TrainReport,
    examples_from_collections,
    fit,
    model_summary,
    run_loocv,
)
from .mixture import DsnModel, build_model, eval_model, load_model, save_model
from .optimize import GreedyTrace, greedy, lazy_greedy, loss_augmented_inference
from .vrouge import NormConstants, norm_constants, normalized_vrouge, raw_vrouge, training_loss

__all__ = [
    "Collection",
    "DsnModel",
    "DsnSummarizer",
    "GreedyTrace",
    "NormConstants",
    "QuerySet",
    "TrainConfig",
    "TrainExample",
    "TrainReport",
    "build_model",
    "eval_model",
    "examples_from_collections",
    "fit",
    "gen_synthetic",
    "greedy",
    "lazy_greedy",
    "load_collection",
    "load_dataset",
    "load_model",
    "loocv_splits",
    "loss_augmented_inference",
    "make_synthetic_dataset",
    "model_summary",
    "norm_constants",
    "normalized_vrouge",
    "raw_vrouge",
    "run_loocv",
    "save_collection",
    "save_dataset",
    "save_model",
    "training_loss",
]
