"""Prior and likelihood families over predictions, plus posterior assembly.

All densities here are unnormalized log-densities: MCMC and gradient flows
only ever need ratios, so normalization constants are never computed.  The
families over predictions take log-probabilities (a point on the log-simplex)
and return scalars; their gradients with respect to the log-probabilities are
what the samplers backpropagate through the network.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .kernels import spec as S

PREDICTION_FAMILIES = ("uniform", "dirichlet", "dirclip", "ndg", "confidence")
LIKELIHOODS = ("categorical", "ndg_quadratic", "none")


class ImproperPosteriorWarning(UserWarning):
    """An unclipped Dirichlet prediction prior makes the posterior improper."""


@dataclass(frozen=True)
class PriorSpec:
    """One prior family and its parameters.

    Families: ``uniform`` (flat over predictions), ``normal`` (isotropic over
    parameters, scale ``sigma``), ``dirichlet`` (concentration ``alpha``),
    ``dirclip`` (``alpha`` plus clip value ``clip`` < 0), ``ndg`` (``alpha``),
    and ``confidence`` (temperature ``temperature``).
    """

    family: str
    sigma: float | None = None
    alpha: float | None = None
    clip: float | None = None
    temperature: float | None = None

    def __post_init__(self):
        fam = self.family
        if fam == "normal":
            if self.sigma is None or self.sigma <= 0:
                raise ConfigurationError(f"normal prior needs sigma > 0, got {self.sigma}")
        elif fam == "dirichlet":
            if self.alpha is None or self.alpha <= 0:
                raise ConfigurationError(f"dirichlet prior needs alpha > 0, got {self.alpha}")
        elif fam == "dirclip":
            if self.alpha is None:
                raise ConfigurationError("dirclip prior needs alpha")
            if self.clip is None or self.clip >= 0:
                raise ConfigurationError(f"dirclip prior needs clip < 0, got {self.clip}")
        elif fam == "ndg":
            if self.alpha is None or self.alpha <= 0:
                raise ConfigurationError(f"ndg prior needs alpha > 0, got {self.alpha}")
        elif fam == "confidence":
            if self.temperature is None or self.temperature <= 0:
                raise ConfigurationError(
                    f"confidence prior needs temperature > 0, got {self.temperature}"
                )
        elif fam != "uniform":
            raise ConfigurationError(f"unknown prior family {fam!r}")

    @property
    def applies_to(self) -> str:
        return "parameters" if self.family == "normal" else "predictions"

    @classmethod
    def uniform(cls) -> "PriorSpec":
        return cls("uniform")

    @classmethod
    def normal(cls, sigma: float) -> "PriorSpec":
        return cls("normal", sigma=float(sigma))

    @classmethod
    def dirichlet(cls, alpha: float) -> "PriorSpec":
        return cls("dirichlet", alpha=float(alpha))

    @classmethod
    def dirclip(cls, alpha: float, clip: float) -> "PriorSpec":
        return cls("dirclip", alpha=float(alpha), clip=float(clip))

    @classmethod
    def ndg(cls, alpha: float) -> "PriorSpec":
        return cls("ndg", alpha=float(alpha))

    @classmethod
    def confidence(cls, temperature: float) -> "PriorSpec":
        return cls("confidence", temperature=float(temperature))


@dataclass(frozen=True)
class PosteriorSpec:
    """Parameter prior, optional prediction prior, likelihood, temperature.

    The log-posterior is
    ``(1/T) * [log p(params) + sum_i (log p(pred_i) + log p(y_i | pred_i))]``.

    Two NDG configurations exist and are distinct: ``prediction_prior=ndg``
    with ``likelihood="none"`` is the joint label-dependent density, while
    pairing it with ``likelihood="ndg_quadratic"`` selects the factorized
    form (identical wrong-class Normals as the prior part plus a linear +
    quadratic term in the true-class log-probability).
    """

    param_prior: PriorSpec
    prediction_prior: PriorSpec | None = None
    likelihood: str = "categorical"
    temperature: float = 1.0

    def __post_init__(self):
        if self.param_prior.family != "normal":
            raise ConfigurationError(
                f"param_prior must be the normal family, got {self.param_prior.family!r}"
            )
        if self.prediction_prior is not None and self.prediction_prior.applies_to != "predictions":
            raise ConfigurationError(
                f"prediction_prior must apply to predictions, got {self.prediction_prior.family!r}"
            )
        if self.likelihood not in LIKELIHOODS:
            raise ConfigurationError(
                f"likelihood must be one of {LIKELIHOODS}, got {self.likelihood!r}"
            )
        if self.likelihood == "ndg_quadratic" and (
            self.prediction_prior is None or self.prediction_prior.family != "ndg"
        ):
            raise ConfigurationError(
                "ndg_quadratic likelihood requires an ndg prediction_prior "
                "(the factorized configuration)"
            )
        if not self.temperature > 0:
            raise ConfigurationError(f"temperature must be > 0, got {self.temperature}")


@dataclass(frozen=True)
class NDGParams:
    """Per-class Normal parameters over log-probabilities for one label.

    ``alpha_tilde[k] = alpha + 1`` for the true class and ``alpha`` otherwise;
    ``sigma[k] = log(1/alpha_tilde[k] + 1)``; the means are shifted so that
    ``mu[label] = 0``.
    """

    alpha_tilde: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray


def ndg_params(alpha: float, num_classes: int, label: int) -> NDGParams:
    alpha_tilde = np.full(num_classes, float(alpha))
    alpha_tilde[label] += 1.0
    sigma = np.log(1.0 / alpha_tilde + 1.0)
    mu = np.log(alpha_tilde) - np.log(alpha_tilde[label]) + (sigma[label] ** 2 - sigma**2) / 2.0
    return NDGParams(alpha_tilde, mu, sigma)


def ndg_quadratic_coefficients(alpha: float, num_classes: int) -> tuple[float, float]:
    """Coefficients (a, b) of the factorized true-class term a*x + b*x^2.

    Derived from the joint parameters: with mu_1 = 0 after the shift,
    a = (sigma_0^2*mu_1 - sigma_1^2*mu_0) / (sigma_0^2*sigma_1^2) = -mu_0/sigma_0^2
    and b = (sigma_1^2 - sigma_0^2) / (2*sigma_0^2*sigma_1^2).
    """
    p = ndg_params(alpha, num_classes, 0)
    mu0 = p.mu[1]
    s0sq = p.sigma[1] ** 2
    s1sq = p.sigma[0] ** 2
    a = -mu0 / s0sq
    b = (s1sq - s0sq) / (2.0 * s0sq * s1sq)
    return float(a), float(b)


def _as_log_probs(log_probs) -> np.ndarray:
    return np.asarray(log_probs, dtype=np.float64).reshape(-1)


def dirichlet_logpdf(log_probs, alpha: float) -> float:
    """sum_k (alpha - 1) * log yhat_k, up to an additive constant."""
    lp = _as_log_probs(log_probs)
    return float((alpha - 1.0) * lp.sum())


def dirclip_logpdf(log_probs, alpha: float, clip: float) -> float:
    """Dirichlet log-density with each log-probability clipped below at ``clip``."""
    lp = _as_log_probs(log_probs)
    return float((alpha - 1.0) * np.maximum(lp, clip).sum())


def dirclip_bound(alpha: float, clip: float, num_classes: int) -> float:
    """Loose analytic upper bound on dirclip_logpdf over the whole simplex.

    Each clipped term lies in [clip, 0], so |(alpha-1) * max(log yhat_k, clip)|
    is at most |alpha-1| * |clip| per class, plus |clip| of slack to keep the
    bound safely above the supremum for every alpha.
    """
    return num_classes * abs(clip) * abs(alpha - 1.0) + abs(clip)


def ndg_logpdf(log_probs, alpha: float, label: int) -> float:
    """Joint per-class Normal log-density over log-probabilities (unnormalized)."""
    lp = _as_log_probs(log_probs)
    p = ndg_params(alpha, lp.shape[0], label)
    dev = lp - p.mu
    return float(-0.5 * (dev * dev / p.sigma**2).sum())


def ndg_factorized(log_probs, alpha: float, label: int) -> tuple[float, float]:
    """Factorized NDG: (prior_term, likelihood_term).

    The prior term treats every class with the wrong-class Normal
    (mu_0, sigma_0); the likelihood term is linear + quadratic in the
    true-class log-probability.  Their sum equals ndg_logpdf up to a
    constant independent of the log-probabilities.
    """
    lp = _as_log_probs(log_probs)
    K = lp.shape[0]
    p = ndg_params(alpha, K, label)
    wrong = (label + 1) % K
    mu0 = p.mu[wrong]
    s0sq = p.sigma[wrong] ** 2
    prior_term = float(-0.5 * ((lp - mu0) ** 2).sum() / s0sq)
    a, b = ndg_quadratic_coefficients(alpha, K)
    x = lp[label]
    return prior_term, float(a * x + b * x * x)


def confidence_logpdf(log_probs, temperature: float) -> float:
    """(1/T - 1) * max_k log yhat_k; flat at T = 1."""
    lp = _as_log_probs(log_probs)
    return float((1.0 / temperature - 1.0) * lp.max())


def prediction_logpdf(spec: PriorSpec, log_probs, label: int | None = None) -> float:
    """Dispatch to the family of ``spec`` (which must apply to predictions)."""
    if spec.family == "uniform":
        return 0.0
    if spec.family == "dirichlet":
        return dirichlet_logpdf(log_probs, spec.alpha)
    if spec.family == "dirclip":
        return dirclip_logpdf(log_probs, spec.alpha, spec.clip)
    if spec.family == "ndg":
        if label is None:
            raise ConfigurationError("ndg prior needs the observation label")
        return ndg_logpdf(log_probs, spec.alpha, label)
    if spec.family == "confidence":
        return confidence_logpdf(log_probs, spec.temperature)
    raise ConfigurationError(f"{spec.family!r} does not apply to predictions")


def prediction_grad(spec: PriorSpec, log_probs, label: int | None = None) -> np.ndarray:
    """Gradient of prediction_logpdf w.r.t. the log-probabilities."""
    lp = _as_log_probs(log_probs)
    K = lp.shape[0]
    g = np.zeros(K)
    if spec.family == "uniform":
        return g
    if spec.family == "dirichlet":
        g += spec.alpha - 1.0
        return g
    if spec.family == "dirclip":
        g[lp > spec.clip] = spec.alpha - 1.0
        return g
    if spec.family == "ndg":
        if label is None:
            raise ConfigurationError("ndg prior needs the observation label")
        p = ndg_params(spec.alpha, K, label)
        return -(lp - p.mu) / p.sigma**2
    if spec.family == "confidence":
        g[int(np.argmax(lp))] = 1.0 / spec.temperature - 1.0
        return g
    raise ConfigurationError(f"{spec.family!r} does not apply to predictions")


def posterior_flags(spec: PosteriorSpec) -> list[str]:
    """Warning flags a run log should record for this posterior."""
    flags = []
    if spec.prediction_prior is not None and spec.prediction_prior.family == "dirichlet":
        flags.append("improper_dirichlet_prediction_prior")
    if (
        spec.prediction_prior is not None
        and spec.prediction_prior.family == "dirclip"
        and spec.prediction_prior.alpha > 1.0
    ):
        flags.append("dirclip_alpha_above_one_bounds_below")
    return flags


def encode_prediction_density(prediction_prior, likelihood: str, num_classes: int):
    """Encode prediction-prior and likelihood terms into the kernel arrays.

    Returns (spec_i, spec_f, mu_table, var_table) with no parameter-prior
    component; used directly for simplex-space densities (gradient flow,
    density slices) and as the inner half of encode_posterior.
    """
    K = num_classes
    spec_i = np.zeros(S.N_SPEC_I, dtype=np.int64)
    spec_f = np.zeros(S.N_SPEC_F, dtype=np.float64)
    mu_table = np.zeros((K, K))
    var_table = np.ones((K, K))
    spec_f[S.F_INV_TEMP] = 1.0
    spec_f[S.F_DATA_SCALE] = 1.0

    if likelihood not in ("categorical", "ndg_quadratic", "none"):
        raise ConfigurationError(f"unknown likelihood {likelihood!r}")
    factorized = likelihood == "ndg_quadratic"
    pred = prediction_prior
    if pred is not None and pred.applies_to != "predictions":
        raise ConfigurationError(
            f"{pred.family!r} is not a prediction-space family"
        )
    if factorized and (pred is None or pred.family != "ndg"):
        raise ConfigurationError(
            "the quadratic likelihood is only defined together with the "
            "Normal-over-log-probabilities prediction prior"
        )

    if pred is not None and pred.family != "uniform":
        if pred.family == "dirichlet":
            spec_i[S.I_PRED] = S.PRED_DIRICHLET
            spec_f[S.F_ALPHA] = pred.alpha
        elif pred.family == "dirclip":
            spec_i[S.I_PRED] = S.PRED_DIRCLIP
            spec_f[S.F_ALPHA] = pred.alpha
            spec_f[S.F_CLIP] = pred.clip
        elif pred.family == "ndg":
            spec_i[S.I_PRED] = S.PRED_NDG
            spec_f[S.F_ALPHA] = pred.alpha
            if factorized:
                # identical wrong-class Normals for every class
                p = ndg_params(pred.alpha, K, 0)
                mu_table[:, :] = p.mu[1]
                var_table[:, :] = p.sigma[1] ** 2
            else:
                for y in range(K):
                    p = ndg_params(pred.alpha, K, y)
                    mu_table[y] = p.mu
                    var_table[y] = p.sigma**2
        elif pred.family == "confidence":
            spec_i[S.I_PRED] = S.PRED_CONFIDENCE
            spec_f[S.F_CONF_T] = pred.temperature

    if likelihood == "categorical":
        spec_i[S.I_LIK] = S.LIK_CATEGORICAL
    elif factorized:
        spec_i[S.I_LIK] = S.LIK_NDGQ
        a, b = ndg_quadratic_coefficients(pred.alpha, K)
        spec_f[S.F_NDG_A] = a
        spec_f[S.F_NDG_B] = b

    return spec_i, spec_f, mu_table, var_table


def encode_posterior(spec: PosteriorSpec, num_classes: int):
    """Encode a PosteriorSpec into the kernel arrays.

    Returns (spec_i, spec_f, mu_table, var_table); see kernels._spec for the
    slot meanings.  Emits ImproperPosteriorWarning for an unclipped Dirichlet
    prediction prior.
    """
    spec_i, spec_f, mu_table, var_table = encode_prediction_density(
        spec.prediction_prior, spec.likelihood, num_classes
    )
    if spec.prediction_prior is not None and spec.prediction_prior.family == "dirichlet":
        warnings.warn(
            "unclipped Dirichlet prediction prior: the posterior is improper "
            "(intended for divergence demonstrations only)",
            ImproperPosteriorWarning,
            stacklevel=2,
        )
    spec_i[S.I_PARAM] = S.PARAM_NORMAL
    spec_f[S.F_SIGMA] = spec.param_prior.sigma
    spec_f[S.F_INV_TEMP] = 1.0 / spec.temperature
    return spec_i, spec_f, mu_table, var_table


def assemble_log_posterior(spec: PosteriorSpec, predictions, labels, params) -> float:
    """Tempered log-posterior over a batch of predictions.

    ``predictions`` may be a list of Prediction objects or an (N, K) matrix
    of log-probabilities.  This is the reference composition; the samplers
    use the fused kernel which must agree with it.
    """
    if hasattr(predictions, "shape"):
        P = np.asarray(predictions, dtype=np.float64)
    else:
        P = np.stack([p.log_probs for p in predictions])
    Y = np.asarray(labels, dtype=np.int64).reshape(-1)
    theta = params.values if hasattr(params, "values") else np.asarray(params, dtype=np.float64)

    sigma = spec.param_prior.sigma
    total = -0.5 * float(theta @ theta) / (sigma * sigma)

    if spec.prediction_prior is not None and spec.prediction_prior.family == "dirichlet":
        warnings.warn(
            "unclipped Dirichlet prediction prior: the posterior is improper "
            "(intended for divergence demonstrations only)",
            ImproperPosteriorWarning,
            stacklevel=2,
        )

    for i in range(P.shape[0]):
        if spec.prediction_prior is not None:
            if spec.likelihood == "ndg_quadratic":
                prior_term, _ = ndg_factorized(P[i], spec.prediction_prior.alpha, int(Y[i]))
                total += prior_term
            else:
                total += prediction_logpdf(spec.prediction_prior, P[i], int(Y[i]))
        if spec.likelihood == "categorical":
            total += float(P[i, Y[i]])
        elif spec.likelihood == "ndg_quadratic":
            _, lik_term = ndg_factorized(P[i], spec.prediction_prior.alpha, int(Y[i]))
            total += lik_term

    return total / spec.temperature
