"""Intention-conditioned human motion prediction for handovers."""
from .classifier import ClassifierConfig, classify_forward, init_classifier
from .dataio import HandoverSample, generate_synthetic, read_dataset, write_dataset
from .predictor import PredictorConfig, count_parameters, forward, init_weights
from .trainer import TrainConfig, train

__version__ = "0.1.0"
