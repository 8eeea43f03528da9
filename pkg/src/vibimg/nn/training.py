from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import functional as F
from .model import CnnModel, backward, forward
from .optim import AdamState, adam_init, adam_step

# Activations of one micro-batch stay under roughly this many input pixels;
# bounds im2col memory on 256x256 inputs without changing the math.
_MAX_CHUNK_PIXELS = 16 * 256 * 256


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


@dataclass
class TrainResult:
    model: CnnModel
    log: list[EpochStats] = field(default_factory=list)
    wall_time_s: float = 0.0
    optimizer: AdamState | None = None


def _chunk_size(model: CnnModel) -> int:
    c, h, w = model.input_shape
    return max(1, _MAX_CHUNK_PIXELS // (c * h * w))


def check_inputs(model: CnnModel, images: np.ndarray, labels: np.ndarray) -> None:
    if images.ndim != 4 or tuple(images.shape[1:]) != model.input_shape:
        raise ValueError(f"images of shape {images.shape[1:]} do not match model input {model.input_shape}")
    if labels.shape != (images.shape[0],):
        raise ValueError("need exactly one label per image")
    if labels.size and (labels.min() < 0 or labels.max() >= model.num_classes):
        raise ValueError(f"labels must lie in 0..{model.num_classes - 1}")


def loss_and_grads(model: CnnModel, x: np.ndarray, y: np.ndarray, scale: int | None = None):
    """Mean softmax cross-entropy over the batch and its parameter gradients."""
    logits, caches = forward(model, x, keep=True)
    probs = F.softmax(logits)
    loss = F.cross_entropy(probs, y)
    dlogits = F.softmax_cross_entropy_grad(probs, y, scale)
    _, grads = backward(model, caches, dlogits)
    return loss, grads, probs


def train(
    model: CnnModel,
    images,
    labels,
    epochs: int = 150,
    batch_size: int = 64,
    seed: int = 0,
    lr: float = 1e-3,
    progress=None,
) -> TrainResult:
    """Mini-batch Adam on shuffled batches.

    ``labels`` are zero-based class indices. The run is a pure function of
    its arguments: same model, data and seed give bit-identical weights.
    ``progress`` is called with each finished :class:`EpochStats`.
    """
    x_all = np.asarray(images, dtype=np.float32)
    y_all = np.asarray(labels, dtype=np.intp)
    check_inputs(model, x_all, y_all)
    if epochs < 0 or batch_size < 1:
        raise ValueError("epochs must be >= 0 and batch_size >= 1")
    if epochs == 0:
        return TrainResult(model, [], 0.0, None)
    if x_all.shape[0] == 0:
        raise ValueError("empty training set")

    rng = np.random.default_rng(seed)
    params = [p.astype(np.float32) for p in model.parameters()]
    state = adam_init(params, lr=lr)
    chunk = _chunk_size(model)
    current = model.with_parameters(params)
    log = []
    t0 = time.perf_counter()
    n = x_all.shape[0]
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            grads = None
            for c0 in range(0, idx.size, chunk):
                sub = idx[c0 : c0 + chunk]
                loss, g, probs = loss_and_grads(current, x_all[sub], y_all[sub], scale=idx.size)
                loss_sum += loss * sub.size
                correct += int((probs.argmax(axis=1) == y_all[sub]).sum())
                grads = g if grads is None else [a + b for a, b in zip(grads, g)]
            params, state = adam_step(params, grads, state)
            current = model.with_parameters(params)
        stats = EpochStats(epoch, loss_sum / n, correct / n)
        log.append(stats)
        if progress is not None:
            progress(stats)
    return TrainResult(current, log, time.perf_counter() - t0, state)


@dataclass(frozen=True)
class Prediction:
    class_index: int
    probabilities: np.ndarray
    inference_time_ns: int

    @property
    def inference_time_ms(self) -> float:
        return self.inference_time_ns / 1e6


def _image_array(image) -> np.ndarray:
    if hasattr(image, "as_input"):
        return image.as_input()
    return np.asarray(image, dtype=np.float32)


def predict(model: CnnModel, image) -> Prediction:
    """Classify one image. Only the forward pass is timed (monotonic clock).

    Ties in the probabilities resolve to the lowest class index.
    """
    x = _image_array(image)
    if tuple(x.shape) != model.input_shape:
        raise ValueError(f"image shape {tuple(x.shape)} does not match model input {model.input_shape}")
    batch = x[None]
    t0 = time.perf_counter_ns()
    logits = forward(model, batch)
    elapsed = time.perf_counter_ns() - t0
    probs = F.softmax(logits.astype(np.float64))[0]
    return Prediction(int(np.argmax(probs)), probs, elapsed)


def predict_proba(model: CnnModel, images) -> np.ndarray:
    """Batched class probabilities (float64) for ``(N, C, H, W)`` images."""
    x = np.asarray(images, dtype=np.float32)
    chunk = _chunk_size(model)
    out = [F.softmax(forward(model, x[i : i + chunk]).astype(np.float64)) for i in range(0, x.shape[0], chunk)]
    return np.concatenate(out) if out else np.zeros((0, model.num_classes))


def accuracy(model: CnnModel, images, labels) -> float:
    probs = predict_proba(model, images)
    return float((probs.argmax(axis=1) == np.asarray(labels)).mean())
