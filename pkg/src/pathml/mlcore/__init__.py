"""Baseline models and evaluation metrics, implemented on numpy alone."""
from .boosting import GradientBoostingRegressor, fit_tree_ensemble_regressor
from .dataset import Dataset
from .forest import RandomForest, fit_forest
from .iforest import IsolationForest, c_factor, fit_iforest
from .linreg import LinearModel, fit_linreg, predict_linreg
from .metrics import accuracy, auc_roc, confusion_matrix, f1, mae, precision, recall
from .serialize import dumps_model, loads_model
from .split import SplitSpec, temporal_split
from .tree import DecisionTree

__all__ = [
    "Dataset",
    "DecisionTree",
    "GradientBoostingRegressor",
    "IsolationForest",
    "LinearModel",
    "RandomForest",
    "SplitSpec",
    "accuracy",
    "auc_roc",
    "c_factor",
    "confusion_matrix",
    "dumps_model",
    "f1",
    "fit_forest",
    "fit_iforest",
    "fit_linreg",
    "fit_tree_ensemble_regressor",
    "loads_model",
    "mae",
    "precision",
    "predict_linreg",
    "recall",
    "temporal_split",
]
