"""Fully connected feed-forward regressor trained with Adam, in plain numpy.

Architecture: flattened look-back input, rectified-linear hidden layers
with inverted dropout (masks scaled by 1/(1-p) at train time so
inference applies no correction), and a linear output head one unit per
horizon step.  Training minimizes MSE over shuffled mini-batches,
validates once per epoch, halves the learning rate when validation stops
improving for half the early-stop patience, stops after ``patience``
non-improving epochs, and restores the best-epoch weights.

All randomness (weight init, shuffling, dropout masks) comes from one
``numpy.random.default_rng(seed)`` stream, so identical inputs and seed
reproduce the identical model.  The backward pass is exposed through
:func:`loss_and_gradients` so analytic gradients can be checked against
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import MlpParams, mse

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
MIN_LEARNING_RATE = 1e-7


@dataclass(frozen=True)
class MlpState:
    """Fitted network weights (best validation epoch)."""

    input_width: int
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def predict(self, X: np.ndarray, timestamps=None) -> np.ndarray:
        return forward(self.weights, self.biases, X)


def init_parameters(
    input_width: int, hidden_sizes, output_width: int, rng: np.random.Generator
):
    """He-initialized weights (std sqrt(2/fan_in)) and zero biases."""
    sizes = [input_width, *hidden_sizes, output_width]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(weights, biases, X, dropout_masks=None) -> np.ndarray:
    """Network output; ``dropout_masks`` (one per hidden layer, already
    scaled by 1/(1-p)) are applied only during training."""
    a = X
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W + b
        if i == last:
            return z
        a = np.maximum(z, 0.0)
        if dropout_masks is not None:
            a = a * dropout_masks[i]
    return a  # unreachable; loop always returns at the output layer


def loss_and_gradients(weights, biases, X, y, dropout_masks=None):
    """MSE loss and its analytic gradients for every weight and bias.

    Loss is the mean over all n*output entries of the squared difference,
    matching :func:`driftcast.models.base.mse`.
    """
    last = len(weights) - 1
    activations = [X]
    a = X
    for i in range(last):
        z = a @ weights[i] + biases[i]
        a = np.maximum(z, 0.0)
        if dropout_masks is not None:
            a = a * dropout_masks[i]
        activations.append(a)
    out = a @ weights[last] + biases[last]
    diff = out - y
    loss = float(np.mean(diff * diff))

    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    delta = 2.0 * diff / diff.size
    for i in range(last, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ weights[i].T
            if dropout_masks is not None:
                delta = delta * dropout_masks[i - 1]
            delta = delta * (activations[i] > 0.0)
    return loss, grad_w, grad_b


class _AdamOptimizer:
    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def train_mlp(
    params: MlpParams,
    X: np.ndarray,
    y: np.ndarray,
    Xv: np.ndarray,
    yv: np.ndarray,
    seed: int,
    val_timestamps=None,
    scaler=None,
    target=None,
):
    """Mini-batch Adam training loop with early stopping.

    Returns ``(state, val_history, epochs_run)``; the state carries the
    weights of the epoch with the lowest validation MSE.
    """
    del val_timestamps, scaler, target
    rng = np.random.default_rng(seed)
    n, input_width = X.shape
    output_width = y.shape[1]
    weights, biases = init_parameters(
        input_width, params.hidden_sizes, output_width, rng
    )
    flat_params = weights + biases
    optimizer = _AdamOptimizer(flat_params)
    n_hidden = len(params.hidden_sizes)
    keep = 1.0 - params.dropout

    lr = params.learning_rate
    halving_patience = max(params.patience // 2, 1)
    best_loss = np.inf
    best_weights = [w.copy() for w in weights]
    best_biases = [b.copy() for b in biases]
    epochs_since_best = 0
    epochs_since_lr_event = 0
    val_history = []
    epochs_run = 0

    for _epoch in range(params.max_epochs):
        epochs_run += 1
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            batch = order[start : start + params.batch_size]
            Xb, yb = X[batch], y[batch]
            if params.dropout > 0.0:
                masks = [
                    (rng.random((Xb.shape[0], h)) >= params.dropout) / keep
                    for h in params.hidden_sizes
                ]
            else:
                masks = None
            _, grad_w, grad_b = loss_and_gradients(weights, biases, Xb, yb, masks)
            optimizer.step(flat_params, grad_w + grad_b, lr)

        val_loss = mse(forward(weights, biases, Xv), yv)
        val_history.append(val_loss)
        if val_loss < best_loss:
            best_loss = val_loss
            best_weights = [w.copy() for w in weights]
            best_biases = [b.copy() for b in biases]
            epochs_since_best = 0
            epochs_since_lr_event = 0
        else:
            epochs_since_best += 1
            epochs_since_lr_event += 1
        if epochs_since_best >= params.patience:
            break
        if (
            params.lr_halving_on_plateau
            and epochs_since_lr_event >= halving_patience
            and lr > MIN_LEARNING_RATE
        ):
            lr = max(lr / 2.0, MIN_LEARNING_RATE)
            epochs_since_lr_event = 0

    state = MlpState(
        input_width=input_width,
        weights=tuple(best_weights),
        biases=tuple(best_biases),
    )
    return state, val_history, epochs_run


def finite_difference_gradients(weights, biases, X, y, epsilon: float = 1e-6):
    """Central-difference gradients of the same loss, for verification.

    Perturbs each parameter entry in place (restoring it afterwards), so
    the passed arrays are unchanged on return.
    """

    def current_loss():
        d = forward(weights, biases, X) - y
        return float(np.mean(d * d))

    grad_w = [np.zeros_like(w) for w in weights]
    grad_b = [np.zeros_like(b) for b in biases]
    for param_list, grads in ((weights, grad_w), (biases, grad_b)):
        for p, g in zip(param_list, grads):
            flat, gflat = p.ravel(), g.ravel()
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + epsilon
                hi = current_loss()
                flat[k] = orig - epsilon
                lo = current_loss()
                flat[k] = orig
                gflat[k] = (hi - lo) / (2.0 * epsilon)
    return grad_w, grad_b
