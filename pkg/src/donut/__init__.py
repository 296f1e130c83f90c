"""Donut: unsupervised anomaly detection for seasonal KPIs with a variational autoencoder."""

from .detector import DetectConfig, detect
from .gaussian_net import DiagGaussian, ModelParams, init_params
from .metrics import EvalReport, GroundTruth, best_fscore, evaluate
from .model_io import load, save
from .series import PreparedSeries, RawSeries, Window, prepare, read_csv, split
from .training import TrainConfig, train

__all__ = [
    "DetectConfig", "DiagGaussian", "EvalReport", "GroundTruth", "ModelParams",
    "PreparedSeries", "RawSeries", "TrainConfig", "Window", "best_fscore", "detect",
    "evaluate", "init_params", "load", "prepare", "read_csv", "save", "split", "train",
]
