import numpy as np

from rice.estimator import ModelBundle
from rice.regression import ForestModel, ForestParams, LinearModel, PolynomialModel, TrainedModel, TreeModel, TreeParams


def constant_forest(value: float, n_features: int = 2) -> ForestModel:
    leaf = TreeModel(
        feature=np.array([-1]), threshold=np.array([0.0]), left=np.array([-1]), right=np.array([-1]),
        value=np.array([float(value)]), n_features=n_features, params=TreeParams(),
    )
    return ForestModel(trees=(leaf,), seed=0, params=ForestParams(n_trees=1))


def stub_bundle(encoding=1.2, beta=0.02, devices=(0.0, 1.0)) -> ModelBundle:
    """Bundle whose encoding latency and per-token latency are constants."""
    slope, intercept = devices
    return ModelBundle(
        min_devices=TrainedModel(LinearModel(slope, intercept)),
        encoding=TrainedModel(constant_forest(encoding)),
        per_token=TrainedModel(PolynomialModel((beta, 0.0))),
    )
