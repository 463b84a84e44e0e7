"""Data, training, frequency evaluation, probes and ablations."""
from .data import Dataset, Splits, load_cifar10, synth_frequency_dataset, synth_splits
from .evaluate import FrequencyEvalSet, FrequencyResult, eval_frequency, predict
from .optim import SGD, AdamW, CosineSchedule
from .train import MetricsRecord, TrainingDiverged, TrainRecipe, TrainResult, train

__all__ = [
    "Dataset", "Splits", "load_cifar10", "synth_frequency_dataset", "synth_splits",
    "FrequencyEvalSet", "FrequencyResult", "eval_frequency", "predict",
    "SGD", "AdamW", "CosineSchedule",
    "MetricsRecord", "TrainingDiverged", "TrainRecipe", "TrainResult", "train",
]
