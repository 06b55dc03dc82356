from .base import ClassifierSpec, FittedModel, fit, load_model, predict_proba, save_model
from .forest import DecisionTree, RandomForest, Split, gini_best_split
from .lstm import LstmNetwork, lstm_backward, lstm_forward, rmsprop_step

__all__ = [
    "ClassifierSpec",
    "DecisionTree",
    "FittedModel",
    "LstmNetwork",
    "RandomForest",
    "Split",
    "fit",
    "gini_best_split",
    "load_model",
    "lstm_backward",
    "lstm_forward",
    "predict_proba",
    "rmsprop_step",
    "save_model",
]
