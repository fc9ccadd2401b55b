from .base import BlackBox, CountingBlackBox
from .io import load_model, model_from_dict, model_to_dict, save_model
from .linear import KNN, LogisticRegression, log_loss_and_grad, train_knn, train_logreg
from .svm import RbfSvm, train_rbf_svm
from .tree import DecisionTree, RandomForest, train_forest, train_tree

__all__ = [
    "BlackBox", "CountingBlackBox", "DecisionTree", "RandomForest", "KNN", "LogisticRegression",
    "RbfSvm", "train_tree", "train_forest", "train_knn", "train_logreg", "train_rbf_svm",
    "log_loss_and_grad", "save_model", "load_model", "model_to_dict", "model_from_dict",
]
