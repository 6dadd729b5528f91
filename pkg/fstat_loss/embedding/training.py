from __future__ import annotations

import logging as log
from dataclasses import dataclass
from typing import Union

import numpy as np

from fstat_loss.embedding.baselines import triplet_loss_and_grad
from fstat_loss.embedding.encoder import AdamState, EncoderModel, adam_step, backward, forward
from fstat_loss.embedding.errors import ConfigError, DataError
from fstat_loss.embedding.floss import FLossConfig, LabeledEmbeddingBatch, f_loss_and_grad
from fstat_loss.embedding.input.factorial_dataset import FactorialDataset
from fstat_loss.embedding.metrics import explicitness_auc, recall_at_k
from fstat_loss.embedding.output.training_log import TrainingLog
from fstat_loss.embedding.sampling import SamplerConfig, conjunction_labels, oracle_labels
from fstat_loss.embedding.utils import check_finite_decorator

LOSS_KINDS = ("fstat", "triplet")
VALIDATION_KINDS = ("recall@1", "explicitness")
DEFAULT_LEARNING_RATES = {"fstat": 2e-4, "triplet": 1e-4}


@dataclass(frozen=True)
class TrainConfig:
    """Training hyper-parameters.

    Attributes:
        loss (str): ``fstat`` or ``triplet``.
        d (int): dimensions separated per pair by the F-statistic loss.
        margin (float): triplet margin.
        learning_rate (float | None): ADAM step size; 2e-4 for ``fstat`` and 1e-4 for ``triplet`` by default.
        phi_floor (float): clamp of Φ in the F-statistic loss.
        grand_mean (str): grand mean of the F statistic, ``unweighted`` or ``weighted``.
        max_epochs (int): maximum number of epochs.
        patience (int): epochs without validation improvement before stopping.
        validation (str): ``recall@1`` or ``explicitness``.
        seed (int): seed of the episode sampler.

    Example:
        >>> from fstat_loss.embedding.training import TrainConfig
        >>> TrainConfig(loss="triplet").lr
        0.0001
        >>> TrainConfig(max_epochs=0)
        Traceback (most recent call last):
            ...
        fstat_loss.embedding.errors.ConfigError: [TrainConfig] max_epochs must be at least 1: 0
    """

    loss: str = "fstat"
    d: int = 2
    margin: float = 0.1
    learning_rate: Union[float, None] = None
    phi_floor: float = 1e-12
    grand_mean: str = "unweighted"
    max_epochs: int = 200
    patience: int = 10
    validation: str = "recall@1"
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"[TrainConfig] Unknown loss {self.loss!r}, expected one of {LOSS_KINDS}")
        if self.validation not in VALIDATION_KINDS:
            raise ConfigError(
                f"[TrainConfig] Unknown validation {self.validation!r}, expected one of {VALIDATION_KINDS}"
            )
        if self.max_epochs < 1:
            raise ConfigError(f"[TrainConfig] max_epochs must be at least 1: {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"[TrainConfig] patience must be at least 1: {self.patience}")
        if self.margin < 0.0:
            raise ConfigError(f"[TrainConfig] margin must be non-negative: {self.margin}")
        if self.learning_rate is not None and not self.learning_rate > 0.0:
            raise ConfigError(f"[TrainConfig] learning_rate must be positive: {self.learning_rate}")
        if self.loss == "fstat":
            self.floss_config()

    @property
    def lr(self) -> float:
        return DEFAULT_LEARNING_RATES[self.loss] if self.learning_rate is None else self.learning_rate

    def floss_config(self) -> FLossConfig:
        return FLossConfig(d=self.d, phi_floor=self.phi_floor, grand_mean=self.grand_mean)


@dataclass
class TrainingResult:
    """Outcome of a training run.

    Attributes:
        model (EncoderModel): parameters of the best validation epoch.
        log (TrainingLog): per-epoch log, starting with epoch 0 for the initial model.
        best_epoch (int): epoch of the returned parameters, 0 for the initial model.
        improved (bool): False when no epoch improved on the initial model.
    """

    model: EncoderModel
    log: TrainingLog
    best_epoch: int
    improved: bool


@check_finite_decorator
def fstat_step(batch: LabeledEmbeddingBatch, cfg: FLossConfig) -> tuple[float, np.ndarray, float]:
    result = f_loss_and_grad(batch, cfg)
    return result.loss, result.grad, result.min_selected_phi


@check_finite_decorator
def triplet_step(batch: LabeledEmbeddingBatch, margin: float) -> tuple[float, np.ndarray]:
    result = triplet_loss_and_grad(batch, margin)
    return result.loss, result.grad


class Trainer:
    """Episodic training of an encoder with early stopping on a validation metric.

    Attributes:
        model (EncoderModel): initial parameters.
        dataset (FactorialDataset): dataset.
        sampler_config (SamplerConfig): oracle and episode sizes.
        cfg (TrainConfig): training hyper-parameters.
        train_indices (np.ndarray): rows used to build episodes.
        validation_indices (np.ndarray): rows used for the validation metric.
    """

    def __init__(
        self,
        model: EncoderModel,
        dataset: FactorialDataset,
        sampler_config: SamplerConfig,
        cfg: TrainConfig,
        train_indices: Union[np.ndarray, None] = None,
        validation_indices: Union[np.ndarray, None] = None,
    ):
        if model.input_dim != dataset.spec.observation_dim:
            raise ConfigError(
                f"[{self.__class__.__name__}] Model input dimension {model.input_dim} does not match "
                f"observation dimension {dataset.spec.observation_dim}"
            )
        if cfg.loss == "fstat":
            cfg.floss_config().check_dim(model.embedding_dim)
        self.model = model
        self.dataset = dataset
        self.sampler_config = sampler_config
        self.cfg = cfg
        self.train_indices = np.arange(len(dataset)) if train_indices is None else np.asarray(train_indices)
        self.validation_indices = (
            self.train_indices if validation_indices is None else np.asarray(validation_indices)
        )
        self._observations = dataset.observations()

    def _sampler(self):
        return self.sampler_config.sampler(
            self.dataset, self.cfg.loss, self.train_indices, np.random.default_rng(self.cfg.seed)
        )

    def _run_epoch(
        self, model: EncoderModel, episodes: list, state: Union[AdamState, None] = None
    ) -> tuple[EncoderModel, Union[AdamState, None], float, float, float]:
        """Loss steps over the episodes of one epoch, with an ADAM update after each one unless ``state`` is None.

        Returns:
            tuple: model, ADAM state, mean loss, largest absolute gradient with respect to the embeddings and
                smallest selected Φ (NaN for the triplet loss).
        """
        losses, grad_norm, min_phi = [], 0.0, float("nan")
        for episode in episodes:
            observations = self._observations[episode.indices]
            batch = LabeledEmbeddingBatch(forward(model, observations), episode.labels)
            if self.cfg.loss == "fstat":
                loss, grad, episode_min_phi = fstat_step(batch, self.cfg.floss_config())
                min_phi = episode_min_phi if np.isnan(min_phi) else min(min_phi, episode_min_phi)
            else:
                loss, grad = triplet_step(batch, self.cfg.margin)
            if state is not None:
                model, state = adam_step(model, backward(model, observations, grad), state)
            losses.append(loss)
            grad_norm = max(grad_norm, float(np.max(np.abs(grad))))
        return model, state, float(np.mean(losses)), grad_norm, min_phi

    def execute(self) -> TrainingResult:
        sampler = self._sampler()
        validation_target = self._validation_target()
        model = self.model
        state = AdamState.zeros(model, self.cfg.lr)
        training_log = TrainingLog(name=f"{self.cfg.loss} / {self.sampler_config.oracle} oracle")

        # epoch 0 is the initial model on the episodes of epoch 1, without updates
        _, _, initial_loss, initial_grad_norm, initial_min_phi = self._run_epoch(model, self._sampler().epoch())
        best_model, best_epoch = model.copy(), 0
        best_metric, best_loss = self.validate(model, validation_target), float("inf")
        training_log.add(
            epoch=0,
            train_loss=initial_loss,
            val_metric=best_metric,
            grad_norm=initial_grad_norm,
            min_phi=initial_min_phi,
        )
        log.info(
            f"[{self.__class__.__name__}] Initial {self.cfg.validation}: {best_metric:.4f}, "
            f"grad norm {initial_grad_norm:.3g}"
        )
        epochs_without_improvement = 0

        for epoch in range(1, self.cfg.max_epochs + 1):
            model, state, train_loss, grad_norm, min_phi = self._run_epoch(model, sampler.epoch(), state)
            metric = self.validate(model, validation_target)
            training_log.add(
                epoch=epoch, train_loss=train_loss, val_metric=metric, grad_norm=grad_norm, min_phi=min_phi
            )
            log.info(
                f"[{self.__class__.__name__}] Epoch {epoch}: train loss {train_loss:.6f}, "
                f"{self.cfg.validation} {metric:.4f}, grad norm {grad_norm:.3g}"
            )

            if metric > best_metric or (metric == best_metric and train_loss < best_loss):
                best_model, best_epoch = model.copy(), epoch
                best_metric, best_loss = metric, train_loss
                epochs_without_improvement = 0
            else:
                epochs_without_improvement += 1
                if epochs_without_improvement >= self.cfg.patience:
                    log.info(
                        f"[{self.__class__.__name__}] Early stopping at epoch {epoch}: no improvement in "
                        f"{self.cfg.patience} epochs"
                    )
                    break

        improved = best_epoch > 0
        if improved:
            log.info(f"[{self.__class__.__name__}] Parameters restored from epoch {best_epoch}")
        else:
            log.warning(f"[{self.__class__.__name__}] Validation never improved; returning the initial model")
        return TrainingResult(model=best_model, log=training_log, best_epoch=best_epoch, improved=improved)

    def _validation_target(self) -> np.ndarray:
        rows = self.validation_indices
        if self.cfg.validation == "explicitness":
            return self.dataset.factor_matrix(self.dataset.class_factor_names)[rows]
        if self.sampler_config.oracle == "factor":
            return conjunction_labels(self.dataset)[rows]
        return oracle_labels(self.dataset, self.sampler_config.oracle, self.sampler_config.class_factor)[rows]

    def validate(self, model: EncoderModel, target: np.ndarray) -> float:
        """Recall@1 among the validation instances, or their mean explicitness over the class factors."""
        codes = forward(model, self._observations[self.validation_indices])
        if self.cfg.validation == "recall@1":
            return recall_at_k(LabeledEmbeddingBatch(codes, target), k=1)

        aucs = []
        for j, name in enumerate(self.dataset.class_factor_names):
            try:
                aucs += list(explicitness_auc(codes, target[:, j]).per_value.values())
            except DataError as error:
                log.warning(f"[{self.__class__.__name__}] Factor {name} left out of validation: {error}")
        if len(aucs) == 0:
            raise DataError(f"[{self.__class__.__name__}] No factor can be validated on the validation instances")
        return float(np.mean(aucs))


def train(
    model: EncoderModel,
    dataset: FactorialDataset,
    sampler_config: SamplerConfig,
    cfg: TrainConfig,
    train_indices: Union[np.ndarray, None] = None,
    validation_indices: Union[np.ndarray, None] = None,
) -> TrainingResult:
    """Train ``model`` on episodes of ``dataset`` and return the parameters of the best validation epoch."""
    return Trainer(model, dataset, sampler_config, cfg, train_indices, validation_indices).execute()
