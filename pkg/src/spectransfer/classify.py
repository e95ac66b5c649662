"""Classification harness measuring how much class information spectra carry.

Repeated rounds of: stratified train/test split, train a small one-hidden-
layer softmax classifier on raw normalized intensities, record train/test
accuracy and the test confusion matrix. Rounds are independent and seeded
from one split seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .nn import Adam, init_dense, linear, softmax, stack_backward, stack_forward
from .rng import stream
from .spectra import Spectrum

CLASSIFIER_HIDDEN = 128
CLASSIFIER_EPOCHS = 200
CLASSIFIER_BATCH = 32
CLASSIFIER_LR = 1e-3


@dataclass(frozen=True)
class ClassificationRound:
    train_accuracy: float
    test_accuracy: float
    confusion: np.ndarray  # rows true class, columns predicted, test set only


@dataclass(frozen=True)
class ClassificationResult:
    class_names: list[str]
    rounds: list[ClassificationRound]

    @property
    def mean_test_accuracy(self) -> float:
        return float(np.mean([r.test_accuracy for r in self.rounds]))

    @property
    def mean_train_accuracy(self) -> float:
        return float(np.mean([r.train_accuracy for r in self.rounds]))


def _stratified_split(
    labels: np.ndarray, test_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; singleton classes always train."""
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = rng.permutation(members)
        n_test = int(round(test_fraction * members.size))
        n_test = min(n_test, members.size - 1)  # keep at least one in train
        test_idx.extend(members[:n_test])
        train_idx.extend(members[n_test:])
    return np.sort(np.array(train_idx, int)), np.sort(np.array(test_idx, int))


def _train_classifier(
    x: np.ndarray, y_onehot: np.ndarray, rng: np.random.Generator
) -> tuple:
    n_in, n_classes = x.shape[1], y_onehot.shape[1]
    hidden = init_dense(rng, n_in, CLASSIFIER_HIDDEN)
    head = init_dense(rng, CLASSIFIER_HIDDEN, n_classes)
    optimizer = Adam(hidden.arrays + head.arrays, CLASSIFIER_LR)
    n = x.shape[0]
    for _ in range(CLASSIFIER_EPOCHS):
        order = rng.permutation(n)
        for start in range(0, n, CLASSIFIER_BATCH):
            idx = order[start : start + CLASSIFIER_BATCH]
            xb, yb = x[idx], y_onehot[idx]
            h, cache = stack_forward([hidden], xb)
            probs = softmax(linear(head, h))
            # softmax + cross-entropy gradient
            d_logits = (probs - yb) / idx.size
            head_grads = [h.T @ d_logits, d_logits.sum(axis=0)]
            d_h = d_logits @ head.W.T
            _, hidden_grads = stack_backward([hidden], cache, d_h)
            optimizer.step(hidden_grads + head_grads)
    return hidden, head


def _predict(hidden, head, x: np.ndarray) -> np.ndarray:
    h, _ = stack_forward([hidden], x)
    return np.argmax(linear(head, h), axis=1)


def classify_information_transfer(
    spectra: list[tuple[Spectrum, str]],
    rounds: int = 10,
    split_seed: int = 0,
    test_fraction: float = 0.4,
) -> ClassificationResult:
    """Run `rounds` seeded classification rounds over labelled spectra.

    Raises ConfigError with fewer than two classes. Spectra must share one
    grid (raw normalized intensities are the classifier input).
    """
    if not spectra:
        raise ConfigError("no spectra to classify")
    class_names = sorted({label for _, label in spectra})
    if len(class_names) < 2:
        raise ConfigError("classification needs at least two classes")
    index = {name: i for i, name in enumerate(class_names)}
    x = np.asarray([s.intensity for s, _ in spectra])
    labels = np.asarray([index[label] for _, label in spectra])
    n_classes = len(class_names)
    onehot = np.eye(n_classes)[labels]

    results = []
    for round_id in range(rounds):
        rng = stream(split_seed, f"classify-round-{round_id}")
        train_idx, test_idx = _stratified_split(labels, test_fraction, rng)
        hidden, head = _train_classifier(x[train_idx], onehot[train_idx], rng)
        train_pred = _predict(hidden, head, x[train_idx])
        train_acc = float(np.mean(train_pred == labels[train_idx]))
        if test_idx.size:
            test_pred = _predict(hidden, head, x[test_idx])
            test_acc = float(np.mean(test_pred == labels[test_idx]))
        else:
            test_pred = np.array([], dtype=int)
            test_acc = np.nan
        confusion = np.zeros((n_classes, n_classes), dtype=int)
        for true, pred in zip(labels[test_idx], test_pred):
            confusion[true, pred] += 1
        results.append(ClassificationRound(train_acc, test_acc, confusion))
    return ClassificationResult(class_names, results)
