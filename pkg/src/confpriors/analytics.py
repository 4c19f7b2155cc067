"""Closed-form analyses of prediction-space densities on the simplex.

Everything in this module is network-free: gradient-step directions and
their phase diagrams, the critical Dirichlet concentration, gradient flow
on the probability simplex, the analytic CDFs of the cold likelihood and
its upper bound together with rejection-sampling oracles, the Wasserstein
distance between the two, and log-density slices along a single parameter
of a trained network (the one operation here that does touch a network).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, network, priors
from ._rng import make_rng
from .exceptions import ConfigurationError, DimensionError
from .network import NetworkConfig
from .priors import PosteriorSpec, PriorSpec

PURPOSE_FLOW_INIT = 5
PURPOSE_REJECTION_COLD = 8
PURPOSE_REJECTION_UPPER = 9
PURPOSE_SIMPLEX_SAMPLE = 10


@dataclass(frozen=True)
class SimplexPoint:
    """A point on the probability simplex."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "probs", np.asarray(self.probs, dtype=np.float64).reshape(-1)
        )
        if self.probs.size < 2:
            raise DimensionError("simplex dimension", ">= 2", self.probs.size)
        if np.any(self.probs < 0.0):
            raise ConfigurationError("simplex coordinates must be non-negative")
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(
                f"simplex coordinates must sum to 1 within 1e-12, got {total!r}"
            )

    @classmethod
    def from_unnormalized(cls, vec) -> "SimplexPoint":
        arr = np.asarray(vec, dtype=np.float64).reshape(-1)
        total = arr.sum()
        if not (total > 0 and np.all(np.isfinite(arr))):
            raise ConfigurationError("cannot normalize a non-positive vector")
        arr = arr / total
        return cls(arr / arr.sum())


@dataclass(frozen=True)
class GradientField:
    """Gradient of a log-density w.r.t. log-probabilities at one point.

    ``g_plus`` is recomputed from ``g`` on every access so it can never go
    stale if callers build fields from mutated arrays.
    """

    g: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g", np.asarray(self.g, dtype=np.float64).reshape(-1))

    @property
    def g_plus(self) -> float:
        return float(self.g.sum())


def dirichlet_posterior_field(alpha: float, num_classes: int, label: int) -> GradientField:
    """Gradient field of Dirichlet(alpha) prior times categorical likelihood.

    In log-probability space that density has constant gradient
    g_k = alpha - 1 + [k = label].
    """
    g = np.full(num_classes, alpha - 1.0)
    g[label] += 1.0
    return GradientField(g)


def true_class_update(point, field: GradientField, label: int) -> float:
    """Sign and size of the true-class log-probability change per unit step.

    For an infinitesimal gradient-ascent step on the logits, the change of
    log yhat_y is proportional to

        g_y - g_plus*yhat_y - yhat.g + g_plus*sum(yhat^2)

    so the returned value is positive exactly when the step increases the
    true-class probability.
    """
    yhat = point.probs if isinstance(point, SimplexPoint) else SimplexPoint(point).probs
    g = field.g
    if g.shape != yhat.shape:
        raise DimensionError("gradient length", yhat.size, g.size)
    if not 0 <= label < yhat.size:
        raise DimensionError("label", f"in [0, {yhat.size})", label)
    g_plus = field.g_plus
    return float(
        g[label]
        - g_plus * yhat[label]
        - float(yhat @ g)
        + g_plus * float(yhat @ yhat)
    )


def critical_alpha(num_classes: int) -> float:
    """Concentration above which the true-class probability always increases."""
    if num_classes < 2:
        raise ConfigurationError(f"num_classes must be >= 2, got {num_classes}")
    return (num_classes - 2) / num_classes


def phase_diagram(num_classes: int, alphas, wrong_probs) -> np.ndarray:
    """True-class update values over a (alpha, wrong-class probability) grid.

    Row i, column j holds the update direction for the Dirichlet-posterior
    gradient with concentration alphas[i] at the simplex point where one
    wrong class has probability wrong_probs[j] and the remaining K-1
    classes (the true one among them) share the rest equally.
    """
    K = num_classes
    if K < 2:
        raise ConfigurationError(f"num_classes must be >= 2, got {K}")
    a = np.asarray(alphas, dtype=np.float64).reshape(-1)
    x = np.asarray(wrong_probs, dtype=np.float64).reshape(-1)
    if np.any(a <= 0.0):
        raise ConfigurationError("concentration grid must be positive")
    if np.any((x <= 0.0) | (x >= 1.0)):
        raise ConfigurationError("wrong-class probabilities must lie in (0, 1)")

    # Closed form of true_class_update on this one-wrong-class family:
    # with r = (1-x)/(K-1) and g_plus = K*(alpha-1) + 1,
    #   delta = 1 - r - g_plus*r + g_plus*(x^2 + (K-1)*r^2)
    r = (1.0 - x) / (K - 1.0)
    g_plus = K * (a - 1.0) + 1.0
    sq = x * x + (K - 1.0) * r * r
    return 1.0 - r[None, :] + g_plus[:, None] * (sq[None, :] - r[None, :])


@dataclass
class FlowResult:
    """Simplex gradient-flow trajectories and their corner statistics."""

    trajectories: np.ndarray  # (n_particles, n_stored, K) probabilities
    corner_fractions: np.ndarray  # (K,)
    wrong_corner_fraction: float
    clamp_events: int
    label: int
    step_size: float
    n_steps: int


def simplex_flow(
    prediction_prior: PriorSpec | None,
    likelihood: str,
    *,
    label: int = 0,
    num_classes: int = 3,
    n_particles: int = 500,
    step_size: float = 0.05,
    n_steps: int = 2000,
    seed: int = 0,
    clamp: float = 40.0,
    store_every: int = 50,
) -> FlowResult:
    """Integrate the prediction-space gradient flow from uniform particles.

    Particles start uniformly distributed over the simplex and follow the
    logit-space gradient of the chosen density (prior, likelihood, or their
    product).  Log-probabilities escaping [-clamp, clamp] are clamped and
    counted.  Corner fractions assign each particle to the class its final
    point puts the most mass on.
    """
    if num_classes < 2:
        raise ConfigurationError(f"num_classes must be >= 2, got {num_classes}")
    if not 0 <= label < num_classes:
        raise DimensionError("label", f"in [0, {num_classes})", label)
    if prediction_prior is None and likelihood == "none":
        raise ConfigurationError("flow density needs a prior, a likelihood, or both")
    if n_steps < 1 or store_every < 1 or n_steps % store_every != 0:
        raise ConfigurationError(
            f"store_every ({store_every}) must divide n_steps ({n_steps})"
        )
    spec_i, spec_f, mu_t, var_t = priors.encode_prediction_density(
        prediction_prior, likelihood, num_classes
    )
    rng = make_rng(seed, purpose=PURPOSE_FLOW_INIT)
    probs0 = rng.dirichlet(np.ones(num_classes), size=n_particles)
    logp0 = np.log(np.maximum(probs0, 1e-300))
    traj_log, clamp_events = kernels.flow_run(
        logp0, label, spec_i, spec_f, mu_t, var_t,
        float(step_size), int(n_steps), float(clamp), int(store_every),
    )
    trajectories = np.exp(traj_log)
    final = trajectories[:, -1, :]
    corners = np.argmax(final, axis=1)
    corner_fractions = np.bincount(corners, minlength=num_classes) / n_particles
    return FlowResult(
        trajectories=trajectories,
        corner_fractions=corner_fractions,
        wrong_corner_fraction=float(1.0 - corner_fractions[label]),
        clamp_events=int(clamp_events),
        label=label,
        step_size=float(step_size),
        n_steps=int(n_steps),
    )


def sample_flow_density(
    prediction_prior: PriorSpec | None,
    likelihood: str,
    *,
    label: int = 0,
    num_classes: int = 3,
    n_samples: int = 100_000,
    seed: int = 0,
) -> np.ndarray:
    """Exact samples from a Dirichlet-family flow density on the simplex.

    A Dirichlet(alpha) prior times a categorical likelihood is itself a
    Dirichlet with the true-class concentration raised by one, so these
    densities admit exact sampling; with alpha < 1 they are unbounded at
    the corners, which rules the uniform-proposal rejection route out.
    """
    if not 0 <= label < num_classes:
        raise DimensionError("label", f"in [0, {num_classes})", label)
    if prediction_prior is None or prediction_prior.family == "uniform":
        alpha = np.ones(num_classes)
    elif prediction_prior.family == "dirichlet":
        alpha = np.full(num_classes, prediction_prior.alpha)
    else:
        raise ConfigurationError(
            "exact simplex sampling covers Dirichlet-family densities only, "
            f"got {prediction_prior.family!r}"
        )
    if likelihood == "categorical":
        alpha[label] += 1.0
    elif likelihood != "none":
        raise ConfigurationError(f"unsupported likelihood {likelihood!r} for sampling")
    rng = make_rng(seed, purpose=PURPOSE_SIMPLEX_SAMPLE)
    return rng.dirichlet(alpha, size=n_samples)


def bottom_half_mass(samples: np.ndarray, label: int) -> float:
    """Fraction of simplex samples whose true-class coordinate is below 1/2.

    On a ternary plot with the true class at the top corner this is exactly
    the mass in the bottom half of the triangle.
    """
    samples = np.asarray(samples, dtype=np.float64)
    return float(np.mean(samples[:, label] < 0.5))


def cdf_cold(z, temperature: float):
    """CDF of the tempered true-class density proportional to z**(1/T) on [0, 1]."""
    if not temperature > 0:
        raise ConfigurationError(f"temperature must be positive, got {temperature}")
    arr = np.asarray(z, dtype=np.float64)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ConfigurationError("CDF argument must lie in [0, 1]")
    out = arr ** (1.0 + 1.0 / temperature)
    return float(out) if np.isscalar(z) else out


def cdf_upper_bound(z, temperature: float):
    """CDF of the normalized density max(z, 1-z)**(1/T - 1) * z on [0, 1].

    Closed form with s = 1/T, written in terms of q = 2**(-s) so that small
    temperatures underflow gracefully instead of overflowing: for z <= 1/2

        H(z) = c - z*(1-z)**s / s - (1-z)**(s+1) / (s*(s+1)),   c = 1/(s*(s+1))

    and for z > 1/2, H(z) = H(1/2) + (z**(s+1) - q/2)/(s+1); the CDF is
    H(z)/H(1).  At T = 1 both branches reduce to z**2.
    """
    if not temperature > 0:
        raise ConfigurationError(f"temperature must be positive, got {temperature}")
    arr = np.asarray(z, dtype=np.float64)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ConfigurationError("CDF argument must lie in [0, 1]")
    s = 1.0 / temperature
    q = 2.0 ** (-s)
    c = 1.0 / (s * (s + 1.0))
    # mass of the lower branch and of the whole line
    lower_mass = c - q / s + q / (2.0 * (s + 1.0))
    total = lower_mass + (1.0 - 0.5 * q) / (s + 1.0)

    one_minus = 1.0 - arr
    low = c - arr * one_minus**s / s - one_minus ** (s + 1.0) / (s * (s + 1.0))
    high = lower_mass + (arr ** (s + 1.0) - 0.5 * q) / (s + 1.0)
    out = np.where(arr <= 0.5, low, high) / total
    return float(out) if np.isscalar(z) else out


def _rejection_sample(density, bound: float, n_samples: int, seed: int, purpose: int):
    """Uniform-proposal rejection sampler on [0, 1], chunked and seeded."""
    out = np.empty(n_samples)
    got = 0
    chunk = 1 << 21
    step = 0
    while got < n_samples:
        rng = make_rng(seed, step=step, purpose=purpose)
        z = rng.random(chunk)
        u = rng.random(chunk)
        keep = z[u * bound <= density(z)]
        take = min(keep.size, n_samples - got)
        out[got : got + take] = keep[:take]
        got += take
        step += 1
    return out


def rejection_sample_cold(temperature: float, n_samples: int, seed: int = 0) -> np.ndarray:
    """Samples from the density proportional to z**(1/T) on [0, 1]."""
    if not temperature > 0:
        raise ConfigurationError(f"temperature must be positive, got {temperature}")
    s = 1.0 / temperature
    return _rejection_sample(
        lambda z: z**s, 1.0, n_samples, seed, PURPOSE_REJECTION_COLD
    )


def rejection_sample_upper(temperature: float, n_samples: int, seed: int = 0) -> np.ndarray:
    """Samples from the density proportional to max(z, 1-z)**(1/T-1) * z."""
    if not temperature > 0:
        raise ConfigurationError(f"temperature must be positive, got {temperature}")
    s = 1.0 / temperature
    bound = max(1.0, 2.0 ** (1.0 - s))

    def density(z):
        return np.maximum(z, 1.0 - z) ** (s - 1.0) * z

    return _rejection_sample(density, bound, n_samples, seed, PURPOSE_REJECTION_UPPER)


def empirical_sup_distance(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov sup-distance between samples and an analytic CDF."""
    x = np.sort(np.asarray(samples, dtype=np.float64).reshape(-1))
    n = x.size
    if n == 0:
        raise DimensionError("sample count", ">= 1", 0)
    f = np.asarray(cdf(x))
    steps = np.arange(1, n + 1) / n
    return float(max(np.max(np.abs(f - steps)), np.max(np.abs(f - steps + 1.0 / n))))


def wasserstein_cold_vs_upper(temperatures, n_nodes: int = 100_000) -> np.ndarray:
    """1-Wasserstein distance between the two CDFs per temperature.

    Both distributions live on [0, 1], where the 1-Wasserstein distance is
    the integral of |F_cold - F_upper|; a midpoint rule on ``n_nodes``
    uniform nodes keeps the quadrature error well under 1e-6.
    """
    ts = np.asarray(temperatures, dtype=np.float64).reshape(-1)
    if np.any(ts <= 0.0):
        raise ConfigurationError("temperatures must be positive")
    z = (np.arange(n_nodes) + 0.5) / n_nodes
    out = np.empty(ts.size)
    for i, t in enumerate(ts):
        out[i] = float(np.mean(np.abs(cdf_cold(z, t) - cdf_upper_bound(z, t))))
    return out


def divergence_slice(
    config: NetworkConfig,
    params,
    inputs,
    grid,
    density,
    labels=None,
    bias_index: int = 0,
) -> np.ndarray:
    """Log-density along one output-layer bias of an otherwise fixed network.

    ``density`` is either a PriorSpec (a parameter prior evaluated on the
    parameters, or a prediction prior evaluated on the network outputs) or a
    full PosteriorSpec.  Varying a single output bias tilts one logit, which
    is enough to expose whether the density is bounded along that direction.
    """
    theta = np.array(
        params.values if isinstance(params, network.ParamVector) else params,
        dtype=np.float64,
    ).reshape(-1)
    if theta.size != config.param_count:
        raise DimensionError("parameter length", config.param_count, theta.size)
    slot = network.layer_layout(config)[-1]
    if not 0 <= bias_index < slot.bias_length:
        raise DimensionError("bias index", f"in [0, {slot.bias_length})", bias_index)
    flat_index = slot.bias_offset + bias_index
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(inputs, dtype=np.float64)))

    if isinstance(density, PosteriorSpec):
        if labels is None:
            raise ConfigurationError("a posterior slice needs labels")
        Y = np.ascontiguousarray(np.asarray(labels, dtype=np.int64).reshape(-1))
        spec_i, spec_f, mu_t, var_t = priors.encode_posterior(
            density, config.num_classes
        )
    elif isinstance(density, PriorSpec):
        if density.family == "normal":
            values = np.empty(grid.size)
            for i, v in enumerate(grid):
                theta[flat_index] = v
                values[i] = -0.5 * float(theta @ theta) / density.sigma**2
            return values
        if density.family == "ndg" and labels is None:
            raise ConfigurationError("the per-class Normal prior needs labels")
        Y = (
            np.zeros(X.shape[0], dtype=np.int64)
            if labels is None
            else np.ascontiguousarray(np.asarray(labels, dtype=np.int64).reshape(-1))
        )
        spec_i, spec_f, mu_t, var_t = priors.encode_prediction_density(
            density, "none", config.num_classes
        )
    else:
        raise ConfigurationError(
            f"density must be PriorSpec or PosteriorSpec, got {type(density).__name__}"
        )

    if Y.shape[0] != X.shape[0]:
        raise DimensionError("label count", X.shape[0], Y.shape[0])
    values = np.empty(grid.size)
    for i, v in enumerate(grid):
        theta[flat_index] = v
        if isinstance(density, PosteriorSpec):
            value, _ = kernels.posterior_value_and_grad(
                config.widths, theta, X, Y, spec_i, spec_f, mu_t, var_t
            )
            values[i] = value
        else:
            P = kernels.mlp_log_probs(config.widths, theta, X)
            value, _ = kernels.pred_value_grad(P, Y, spec_i, spec_f, mu_t, var_t)
            values[i] = value
    return values
