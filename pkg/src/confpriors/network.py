"""Fully-connected classifier: configuration, parameter layout, forward pass,
and reverse-mode gradients of posterior log-densities.

The network is a plain MLP with ReLU hidden activations and a log-softmax
head.  Parameters live in one flat float64 vector laid out per layer as the
row-major weight matrix followed by the bias vector; gradients are computed
by hand-written backpropagation inside the kernel layer (no autodiff).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._rng import make_rng
from .exceptions import DimensionError, NonFiniteError

_ACTIVATIONS = ("relu",)


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture of the classifier.

    ``hidden_layers`` lists the widths of the hidden layers in order;
    ``num_classes`` must be at least 2.  The parameter count is fully
    determined by these fields.
    """

    input_dim: int
    hidden_layers: tuple[int, ...]
    num_classes: int
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.input_dim < 1:
            raise DimensionError("input_dim", ">= 1", self.input_dim)
        if self.num_classes < 2:
            raise DimensionError("num_classes", ">= 2", self.num_classes)
        for h in self.hidden_layers:
            if h < 1:
                raise DimensionError("hidden layer width", ">= 1", h)
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}, got {self.activation!r}")

    @property
    def widths(self) -> np.ndarray:
        """int64 vector [input_dim, h1, ..., num_classes]."""
        return np.array([self.input_dim, *self.hidden_layers, self.num_classes], dtype=np.int64)

    @property
    def param_count(self) -> int:
        w = self.widths
        return int(((w[1:] * (w[:-1] + 1))).sum())


@dataclass(frozen=True)
class LayerSlot:
    """Offsets of one layer's weights and biases inside the flat vector."""

    weight_offset: int
    weight_shape: tuple[int, int]
    bias_offset: int
    bias_length: int


def layer_layout(config: NetworkConfig) -> tuple[LayerSlot, ...]:
    slots = []
    w = config.widths
    off = 0
    for layer in range(len(w) - 1):
        d_in, d_out = int(w[layer]), int(w[layer + 1])
        slots.append(LayerSlot(off, (d_out, d_in), off + d_out * d_in, d_out))
        off += d_out * (d_in + 1)
    return tuple(slots)


@dataclass
class ParamVector:
    """Flat parameter vector plus its per-layer layout."""

    values: np.ndarray
    layout: tuple[LayerSlot, ...] = field(repr=False)

    @classmethod
    def from_array(cls, config: NetworkConfig, values) -> "ParamVector":
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != config.param_count:
            raise DimensionError("parameter vector length", config.param_count, arr.shape)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("parameters")
        return cls(arr, layer_layout(config))

    def weight(self, layer: int) -> np.ndarray:
        slot = self.layout[layer]
        n = slot.weight_shape[0] * slot.weight_shape[1]
        return self.values[slot.weight_offset : slot.weight_offset + n].reshape(slot.weight_shape)

    def bias(self, layer: int) -> np.ndarray:
        slot = self.layout[layer]
        return self.values[slot.bias_offset : slot.bias_offset + slot.bias_length]


@dataclass(frozen=True)
class Prediction:
    """Logits and the log-probabilities they induce for one input."""

    logits: np.ndarray
    log_probs: np.ndarray

    @classmethod
    def from_logits(cls, logits) -> "Prediction":
        z = np.asarray(logits, dtype=np.float64).reshape(1, -1)
        return cls(z[0], kernels.log_softmax2d(np.ascontiguousarray(z))[0])


def _as_param_array(config: NetworkConfig, params) -> np.ndarray:
    if isinstance(params, ParamVector):
        arr = params.values
    else:
        arr = np.ascontiguousarray(params, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != config.param_count:
        raise DimensionError("parameter vector length", config.param_count, arr.shape)
    return arr


def _as_input_matrix(config: NetworkConfig, inputs) -> np.ndarray:
    X = np.ascontiguousarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise DimensionError("input matrix shape", f"(N, {config.input_dim})", X.shape)
    return X


def _as_labels(config: NetworkConfig, labels, n: int) -> np.ndarray:
    Y = np.ascontiguousarray(labels, dtype=np.int64).reshape(-1)
    if Y.shape[0] != n:
        raise DimensionError("label count", n, Y.shape[0])
    if Y.size and (Y.min() < 0 or Y.max() >= config.num_classes):
        raise DimensionError("label values", f"in [0, {config.num_classes})", (int(Y.min()), int(Y.max())))
    return Y


def init_params(config: NetworkConfig, seed: int) -> ParamVector:
    """Initial parameters: weights ~ Normal(0, 1/fan_in), biases zero.

    Deterministic in (config, seed); the scaling keeps initial logits at
    order one so prior-confidence sweeps are well-behaved.
    """
    rng = make_rng(seed, purpose=7)
    values = np.zeros(config.param_count)
    pv = ParamVector(values, layer_layout(config))
    for layer, slot in enumerate(pv.layout):
        fan_in = slot.weight_shape[1]
        n = slot.weight_shape[0] * fan_in
        values[slot.weight_offset : slot.weight_offset + n] = rng.normal(
            0.0, 1.0 / np.sqrt(fan_in), size=n
        )
    return pv


def forward(config: NetworkConfig, params, inputs) -> list[Prediction]:
    """Run the network on a batch; one Prediction per input row."""
    theta = _as_param_array(config, params)
    X = _as_input_matrix(config, inputs)
    if not np.all(np.isfinite(X)):
        raise NonFiniteError("inputs")
    cache = kernels.forward_cached(config.widths, theta, X)
    K = config.num_classes
    logits = np.ascontiguousarray(cache[len(config.widths) - 1, :, :K])
    log_probs = kernels.log_softmax2d(logits)
    return [Prediction(logits[i].copy(), log_probs[i].copy()) for i in range(X.shape[0])]


def log_prob_matrix(config: NetworkConfig, params, inputs) -> np.ndarray:
    """(N, K) log-probabilities; the array-in, array-out sibling of forward()."""
    theta = _as_param_array(config, params)
    X = _as_input_matrix(config, inputs)
    return kernels.mlp_log_probs(config.widths, theta, X)


def _locate_nonfinite(config, theta, X, Y, posterior) -> str:
    """Name the first non-finite term of a blown-up log-density evaluation."""
    from . import priors

    if not np.all(np.isfinite(theta)):
        return "parameters"
    cache = kernels.forward_cached(config.widths, theta, X)
    K = config.num_classes
    logits = np.ascontiguousarray(cache[len(config.widths) - 1, :, :K])
    if not np.all(np.isfinite(logits)):
        return "logits"
    P = kernels.log_softmax2d(logits)
    if posterior.param_prior is not None:
        sigma = posterior.param_prior.sigma
        if not np.isfinite(-0.5 * float(theta @ theta) / (sigma * sigma)):
            return "param_prior"
    if posterior.prediction_prior is not None:
        vals = [
            priors.prediction_logpdf(posterior.prediction_prior, P[i], int(Y[i]))
            for i in range(P.shape[0])
        ]
        if not np.all(np.isfinite(vals)):
            return "prediction_prior"
    if posterior.likelihood == "categorical":
        if not np.all(np.isfinite(P[np.arange(len(Y)), Y])):
            return "likelihood"
    return "gradient"


def grad_log_density(config: NetworkConfig, params, inputs, labels, posterior):
    """Log-density of the posterior at ``params`` and its parameter gradient.

    Returns ``(value, grad)`` with ``grad`` the same length as the flat
    parameter vector.  Raises NonFiniteError naming the offending term when
    the evaluation blows up.
    """
    from . import priors

    theta = _as_param_array(config, params)
    X = _as_input_matrix(config, inputs)
    Y = _as_labels(config, labels, X.shape[0])
    spec_i, spec_f, mu_t, var_t = priors.encode_posterior(posterior, config.num_classes)
    value, grad = kernels.posterior_value_and_grad(
        config.widths, theta, X, Y, spec_i, spec_f, mu_t, var_t
    )
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NonFiniteError(_locate_nonfinite(config, theta, X, Y, posterior))
    return float(value), grad
