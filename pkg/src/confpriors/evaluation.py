"""Posterior-sample ensembling, metrics and convergence diagnostics.

An Ensemble is a bag of parameter vectors for one network architecture.
Predictions average the per-sample class probabilities; metrics can score
either the averaged ensemble or each sample separately (training accuracy
is conventionally reported per sample, test accuracy on the ensemble).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network
from ._rng import make_rng
from .exceptions import ConfigurationError, DimensionError
from .network import NetworkConfig, ParamVector

PURPOSE_PRIOR_SWEEP = 11

_MODES = ("ensemble", "per-sample")


@dataclass
class Ensemble:
    """Posterior parameter samples for one architecture."""

    samples: list
    config: NetworkConfig

    def __post_init__(self):
        if not self.samples:
            raise ConfigurationError("an ensemble needs at least one sample")
        coerced = []
        for s in self.samples:
            arr = np.asarray(
                s.values if isinstance(s, ParamVector) else s, dtype=np.float64
            ).reshape(-1)
            if arr.size != self.config.param_count:
                raise DimensionError(
                    "sample length", self.config.param_count, arr.size
                )
            coerced.append(arr)
        self.samples = coerced

    @classmethod
    def from_array(cls, values, config: NetworkConfig) -> "Ensemble":
        arr = np.atleast_2d(np.asarray(values, dtype=np.float64))
        return cls([arr[i] for i in range(arr.shape[0])], config)

    @classmethod
    def from_run_log(cls, run_log, config: NetworkConfig, thin: int = 1) -> "Ensemble":
        if thin < 1:
            raise ConfigurationError(f"thin must be >= 1, got {thin}")
        return cls.from_array(run_log.kept_samples()[::thin], config)

    def __len__(self) -> int:
        return len(self.samples)

    def log_prob_matrices(self, inputs) -> list:
        return [network.log_prob_matrix(self.config, s, inputs) for s in self.samples]


@dataclass
class Metrics:
    accuracy: float
    mean_log_likelihood: float
    mean_confidence: float
    per_sample_accuracy: list


def posterior_predictive(ensemble: Ensemble, inputs) -> np.ndarray:
    """Ensemble-averaged class probabilities, one row per input."""
    total = None
    for logp in ensemble.log_prob_matrices(inputs):
        probs = np.exp(logp)
        total = probs if total is None else total + probs
    return total / len(ensemble)


def evaluate(ensemble: Ensemble, inputs, labels, mode: str = "ensemble") -> Metrics:
    """Accuracy, mean true-class log-likelihood and mean confidence.

    ``mode="ensemble"`` scores the averaged predictive distribution;
    ``mode="per-sample"`` averages the scores of the individual samples.
    Per-sample accuracies are reported in both modes.
    """
    mode = mode.replace("_", "-")
    if mode not in _MODES:
        raise ConfigurationError(f"mode must be one of {_MODES}, got {mode!r}")
    Y = np.asarray(labels, dtype=np.int64).reshape(-1)
    log_mats = ensemble.log_prob_matrices(inputs)
    n = log_mats[0].shape[0]
    if Y.shape[0] != n:
        raise DimensionError("label count", n, Y.shape[0])
    rows = np.arange(n)

    per_sample_acc = [float(np.mean(np.argmax(m, axis=1) == Y)) for m in log_mats]
    if mode == "ensemble":
        P = np.mean([np.exp(m) for m in log_mats], axis=0)
        accuracy = float(np.mean(np.argmax(P, axis=1) == Y))
        with np.errstate(divide="ignore"):
            mean_ll = float(np.mean(np.log(P[rows, Y])))
        mean_conf = float(np.mean(P.max(axis=1)))
    else:
        accuracy = float(np.mean(per_sample_acc))
        mean_ll = float(np.mean([m[rows, Y].mean() for m in log_mats]))
        mean_conf = float(np.mean([np.exp(m).max(axis=1).mean() for m in log_mats]))
    return Metrics(
        accuracy=accuracy,
        mean_log_likelihood=mean_ll,
        mean_confidence=mean_conf,
        per_sample_accuracy=per_sample_acc,
    )


@dataclass(frozen=True)
class RHatResult:
    value: float
    degenerate: bool


def _as_chain_matrix(chains) -> np.ndarray:
    if len(chains) < 2:
        raise ConfigurationError(f"need at least 2 chains, got {len(chains)}")
    arrs = [np.asarray(c, dtype=np.float64) for c in chains]
    lengths = {a.shape[0] for a in arrs}
    if len(lengths) != 1:
        raise ConfigurationError(f"chains must have equal lengths, got {sorted(lengths)}")
    n = lengths.pop()
    if n < 4:
        raise ConfigurationError(f"chains must have length >= 4, got {n}")
    return np.stack(arrs)  # (m, n) or (m, n, d)


def _split_rhat_values(stacked: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized split statistic over the trailing dimension.

    ``stacked`` is (m, n) or (m, n, d); returns per-component values and a
    per-component degenerate mask (zero within-sequence variance).
    """
    if stacked.ndim == 2:
        stacked = stacked[:, :, None]
    m, n, d = stacked.shape
    half = n // 2
    seqs = np.concatenate(
        [stacked[:, :half, :], stacked[:, half : 2 * half, :]], axis=0
    )  # (2m, half, d)
    means = seqs.mean(axis=1)
    within = seqs.var(axis=1, ddof=1).mean(axis=0)  # (d,)
    between_over_l = means.var(axis=0, ddof=1)  # (d,) = B / half
    degenerate = within == 0.0
    values = np.ones(d)
    ok = ~degenerate
    var_plus = (half - 1) / half * within[ok] + between_over_l[ok]
    values[ok] = np.sqrt(var_plus / within[ok])
    return values, degenerate


def split_r_hat(chains) -> RHatResult:
    """Split convergence diagnostic for scalar chains.

    Each chain is halved, and the ratio of pooled to within-sequence
    variance is folded into the usual sqrt statistic.  Chains that are all
    bitwise identical carry no between-chain information, and constant
    sequences have zero within-variance; both return 1.0 with the
    degenerate flag raised.
    """
    stacked = _as_chain_matrix(chains)
    if all(np.array_equal(stacked[i], stacked[0]) for i in range(1, stacked.shape[0])):
        return RHatResult(1.0, True)
    values, degenerate = _split_rhat_values(stacked)
    if degenerate[0]:
        return RHatResult(1.0, True)
    return RHatResult(float(values[0]), False)


def r_hat(chains) -> float:
    return split_r_hat(chains).value


def parameter_r_hat(chains) -> float:
    """Worst split diagnostic over parameter coordinates.

    ``chains`` is a list of (n_samples, dim) arrays, one per chain; the
    result is the maximum statistic over the dim coordinates, degenerate
    coordinates contributing 1.0.
    """
    stacked = _as_chain_matrix(chains)
    if stacked.ndim != 3:
        raise DimensionError("chain array rank", "(n, dim) per chain", stacked.ndim - 1)
    if all(np.array_equal(stacked[i], stacked[0]) for i in range(1, stacked.shape[0])):
        return 1.0
    values, _ = _split_rhat_values(stacked)
    return float(values.max())


def function_r_hat(config: NetworkConfig, chains, inputs) -> float:
    """Worst split diagnostic over predicted class-0 probabilities.

    Every parameter sample is pushed through the network on ``inputs``;
    the diagnostic is computed per input point on the predicted probability
    of class 0 and the maximum over points is returned.
    """
    prob_chains = []
    for chain in chains:
        chain = np.atleast_2d(np.asarray(chain, dtype=np.float64))
        probs = np.stack(
            [
                np.exp(network.log_prob_matrix(config, theta, inputs))[:, 0]
                for theta in chain
            ]
        )  # (n_samples, n_inputs)
        prob_chains.append(probs)
    stacked = _as_chain_matrix(prob_chains)
    if all(np.array_equal(stacked[i], stacked[0]) for i in range(1, stacked.shape[0])):
        return 1.0
    values, _ = _split_rhat_values(stacked)
    return float(values.max())


def prior_confidence_sweep(
    config: NetworkConfig,
    prior_scales,
    n_prior_samples: int,
    inputs,
    seed: int = 0,
) -> np.ndarray:
    """Mean prediction confidence under Normal(0, scale) parameter draws.

    For each scale, ``n_prior_samples`` parameter vectors are drawn from the
    isotropic Normal prior, pushed through the network on ``inputs``, and
    the per-model mean max-probability is averaged.  As the scale tends to
    zero the logits collapse and the confidence tends to 1/num_classes.
    """
    scales = np.asarray(prior_scales, dtype=np.float64).reshape(-1)
    if np.any(scales <= 0.0):
        raise ConfigurationError("prior scales must be positive")
    if n_prior_samples < 1:
        raise ConfigurationError("n_prior_samples must be >= 1")
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    dim = config.param_count
    out = np.empty(scales.size)
    for i, scale in enumerate(scales):
        conf = 0.0
        for j in range(n_prior_samples):
            rng = make_rng(seed, stream=i, step=j, purpose=PURPOSE_PRIOR_SWEEP)
            theta = scale * rng.standard_normal(dim)
            logp = network.log_prob_matrix(config, theta, X)
            conf += float(np.exp(logp).max(axis=1).mean())
        out[i] = conf / n_prior_samples
    return out


@dataclass
class BoundaryGrid:
    """Ensemble class probabilities over a rectangular grid of 2D inputs."""

    xs: np.ndarray  # (nx,)
    ys: np.ndarray  # (ny,)
    probs: np.ndarray  # (ny, nx, K)


def decision_boundary_grid(
    ensemble: Ensemble, bounds, resolution: int
) -> BoundaryGrid:
    """Evaluate the posterior predictive over a grid spanning ``bounds``.

    ``bounds`` is (xmin, xmax, ymin, ymax); ``resolution`` is the number of
    points per axis.
    """
    if ensemble.config.input_dim != 2:
        raise DimensionError("input dimension", 2, ensemble.config.input_dim)
    xmin, xmax, ymin, ymax = (float(b) for b in bounds)
    if not (xmax > xmin and ymax > ymin):
        raise ConfigurationError(f"empty bounding box {bounds}")
    if resolution < 2:
        raise ConfigurationError(f"resolution must be >= 2, got {resolution}")
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    P = posterior_predictive(ensemble, points)
    K = ensemble.config.num_classes
    return BoundaryGrid(xs=xs, ys=ys, probs=P.reshape(resolution, resolution, K))


def logprob_cdf(
    ensemble: Ensemble, inputs, labels=None, selector: str = "true"
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF of predicted log-probabilities, pooled over samples.

    ``selector="true"`` keeps only each example's true-class log-probability
    (labels required); ``selector="all"`` pools all classes.  Returns the
    sorted values and the CDF levels at those values.
    """
    if selector not in ("true", "all"):
        raise ConfigurationError(f"selector must be 'true' or 'all', got {selector!r}")
    pooled = []
    for logp in ensemble.log_prob_matrices(inputs):
        if selector == "true":
            if labels is None:
                raise ConfigurationError("selector 'true' needs labels")
            Y = np.asarray(labels, dtype=np.int64).reshape(-1)
            if Y.shape[0] != logp.shape[0]:
                raise DimensionError("label count", logp.shape[0], Y.shape[0])
            pooled.append(logp[np.arange(logp.shape[0]), Y])
        else:
            pooled.append(logp.ravel())
    values = np.sort(np.concatenate(pooled))
    cdf = np.arange(1, values.size + 1) / values.size
    return values, cdf
