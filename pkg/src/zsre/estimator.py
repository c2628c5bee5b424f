"""Scikit-learn style estimator wrapping the training and prediction pipeline.

``X`` is a sequence of :class:`~zsre.dataset.Instance`; the relation table
(with descriptions/attributes) plays the role sklearn usually gives to ``y``.
``fit`` trains on every instance passed to it; zero-shot splitting is the
caller's job (see :mod:`zsre.evaluation` for the full protocol).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .dataset import Instance
from .inference import build_relation_index, embed_new_sentence, predict
from .optim import TrainConfig, full_train_split, train
from .validation import check_instances_have_relations


class ZeroShotRelationExtractor(BaseEstimator):
    """Dual-encoder relation extractor with nearest-neighbor zero-shot prediction.

    Parameters mirror :class:`~zsre.optim.TrainConfig`; ``get_params`` /
    ``set_params`` come from :class:`sklearn.base.BaseEstimator`, so the model
    composes with sklearn tooling (cloning, grid search over hyperparameters).
    """

    def __init__(self, hidden_size=32, attr_dim=64, learning_rate=1e-3,
                 batch_size=4, gamma=7.5, alpha=0.4, epochs=50, seed=0,
                 dist_kind="neg_inner_product", description_mode="identity",
                 encoder_trainable=True, mixing_layer=False, clip_grad=0.0):
        self.hidden_size = hidden_size
        self.attr_dim = attr_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.gamma = gamma
        self.alpha = alpha
        self.epochs = epochs
        self.seed = seed
        self.dist_kind = dist_kind
        self.description_mode = description_mode
        self.encoder_trainable = encoder_trainable
        self.mixing_layer = mixing_layer
        self.clip_grad = clip_grad

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            gamma=self.gamma, alpha=self.alpha, epochs=self.epochs,
            seed=self.seed, hidden_size=self.hidden_size, attr_dim=self.attr_dim,
            dist_kind=self.dist_kind, encoder_trainable=self.encoder_trainable,
            mixing_layer=self.mixing_layer, description_mode=self.description_mode,
            clip_grad=self.clip_grad,
        )

    def fit(self, X, relations, y=None):
        """Train on instances ``X`` against the given relation table."""
        X = list(X)
        if not all(isinstance(inst, Instance) for inst in X):
            raise TypeError("X must be a sequence of zsre.dataset.Instance")
        check_instances_have_relations(X, relations)
        split = full_train_split(X)
        self.params_, self.history_ = train(X, relations, split, self._config())
        self.classes_ = self.params_.classes
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(
                "This ZeroShotRelationExtractor instance is not fitted yet."
            )

    def transform(self, X) -> np.ndarray:
        """Sentence embeddings for instances ``X``, shape (n, attr_dim)."""
        self._check_fitted()
        return np.stack([
            embed_new_sentence(inst, self.params_.vocab, self.params_.encoder,
                               self.params_.head)
            for inst in X
        ])

    def fit_transform(self, X, relations, y=None) -> np.ndarray:
        return self.fit(X, relations).transform(X)

    def predict(self, X, candidate_relations) -> list[str]:
        """Nearest candidate relation id for each instance.

        ``candidate_relations`` is the table of relations to choose among
        (for zero-shot use, the unseen relations with their descriptions).
        """
        self._check_fitted()
        index = build_relation_index(
            candidate_relations, list(candidate_relations),
            self.description_mode, self.attr_dim, self.dist_kind,
        )
        return [predict(a_hat, index).relation_id for a_hat in self.transform(X)]

    def predict_ranked(self, X, candidate_relations):
        """Full distance-sorted rankings instead of just the argmin id."""
        self._check_fitted()
        index = build_relation_index(
            candidate_relations, list(candidate_relations),
            self.description_mode, self.attr_dim, self.dist_kind,
        )
        return [predict(a_hat, index) for a_hat in self.transform(X)]
