"""Gradient-based MCMC over assembled log-posteriors.

Two kernels are provided.  ``hmc_sample`` runs full-batch Hamiltonian Monte
Carlo with a leapfrog integrator and an exact Metropolis correction.
``sghmc_epoch`` performs the stochastic-gradient variant: a momentum update
per minibatch with friction and temperature-scaled injected noise, no
accept/reject step.  ``run_chains`` orchestrates independent chains on top
of either kernel and persists the results as a RunLog directory.

Randomness is counter-based throughout: every draw comes from a Philox
generator keyed by the chain seed with the step index in the counter, so
serial and thread-parallel execution produce identical streams.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, network, priors
from ._io import load_array, read_csv, read_json, save_array, write_csv, write_json
from ._rng import make_rng
from ._version import VERSION
from .exceptions import ConfigurationError, DimensionError, NonFiniteError
from .network import NetworkConfig, ParamVector

# Purpose codes keep the per-step Philox streams for distinct uses disjoint.
PURPOSE_HMC_PROPOSAL = 1
PURPOSE_SGHMC_MOMENTUM = 2
PURPOSE_SGHMC_NOISE = 3
PURPOSE_SGHMC_SHUFFLE = 4


def _flat_params(init) -> np.ndarray:
    if isinstance(init, ParamVector):
        return np.array(init.values, dtype=np.float64)
    arr = np.array(init, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DimensionError("parameter vector", "non-empty", 0)
    return arr


@dataclass
class SamplerState:
    """Mutable per-chain sampler state.

    ``steps_taken`` counts minibatch updates since chain start and feeds the
    counter-based RNG, so restarting from a saved state reproduces the same
    noise stream.
    """

    params: np.ndarray
    momentum: np.ndarray
    step_size: float
    friction: float
    temperature: float
    rng_seed: int
    epoch_fraction: float = 0.0
    steps_taken: int = 0

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64).reshape(-1)
        self.momentum = np.asarray(self.momentum, dtype=np.float64).reshape(-1)
        if self.momentum.shape != self.params.shape:
            raise DimensionError(
                "momentum length", self.params.size, self.momentum.size
            )
        if not self.step_size > 0:
            raise ConfigurationError(f"step_size must be positive, got {self.step_size}")
        if self.friction < 0:
            raise ConfigurationError(f"friction must be non-negative, got {self.friction}")
        if self.temperature < 0:
            raise ConfigurationError(
                f"temperature must be non-negative, got {self.temperature}"
            )


@dataclass(frozen=True)
class Schedule:
    """Per-epoch learning-rate and temperature schedule.

    The temperature ramp is piecewise linear: zero for the first third of
    training, rising linearly to ``max_temperature`` over the middle third,
    then flat.  The learning rate holds at ``max_lr`` for the first half and
    follows a quarter-period sine down to zero at the end.
    """

    max_lr: float
    max_temperature: float
    epochs: int

    def __post_init__(self):
        if not self.max_lr > 0:
            raise ConfigurationError(f"max_lr must be positive, got {self.max_lr}")
        if self.max_temperature < 0:
            raise ConfigurationError(
                f"max_temperature must be non-negative, got {self.max_temperature}"
            )
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")


def schedule_at(schedule: Schedule, fraction: float) -> tuple[float, float]:
    """(learning rate, temperature) at epoch fraction ``fraction`` in [0, 1]."""
    f = float(fraction)
    if math.isnan(f) or f < 0.0 or f > 1.0:
        raise ConfigurationError(f"epoch fraction must lie in [0, 1], got {fraction}")
    if f >= 2.0 / 3.0:
        temperature = schedule.max_temperature
    elif f <= 1.0 / 3.0:
        temperature = 0.0
    else:
        temperature = schedule.max_temperature * (3.0 * f - 1.0)
    if f <= 0.5:
        lr = schedule.max_lr
    else:
        # sin(pi*(1-f)) == cos(pi*(f-1/2)) but hits 0.0 exactly at f=1
        lr = schedule.max_lr * math.sin(math.pi * (1.0 - f))
    return lr, temperature


@dataclass
class HMCResult:
    """One HMC chain: every post-proposal state plus acceptance statistics."""

    samples: np.ndarray  # (n_samples, dim)
    log_densities: np.ndarray  # (n_samples,)
    accept_rate: float
    n_divergent: int
    mean_abs_delta_h: float


def hmc_sample(
    target,
    init,
    leapfrog_steps: int,
    step_size: float,
    n_samples: int,
    seed: int,
) -> HMCResult:
    """Sample with leapfrog HMC and an exact Metropolis accept/reject.

    ``target`` is either a callable ``theta -> (log_density, gradient)`` or
    an object exposing ``value_and_grad``.  Momentum is refreshed from a
    standard Normal before every proposal; acceptance uses the exact
    Hamiltonian difference.  A non-finite Hamiltonian rejects the proposal
    and is recorded as a divergence.  With ``leapfrog_steps=0`` the proposal
    equals the current state and is always accepted.
    """
    fn = target.value_and_grad if hasattr(target, "value_and_grad") else target
    if leapfrog_steps < 0:
        raise ConfigurationError(f"leapfrog_steps must be >= 0, got {leapfrog_steps}")
    if not step_size > 0:
        raise ConfigurationError(f"step_size must be positive, got {step_size}")
    if n_samples < 1:
        raise ConfigurationError(f"n_samples must be >= 1, got {n_samples}")

    theta = _flat_params(init)
    dim = theta.size
    logp, grad = fn(theta)
    logp = float(logp)
    if not (np.isfinite(logp) and np.all(np.isfinite(grad))):
        raise NonFiniteError("initial log-density")

    samples = np.empty((n_samples, dim))
    log_densities = np.empty(n_samples)
    n_accept = 0
    n_divergent = 0
    abs_dh_sum = 0.0
    n_dh = 0

    for i in range(n_samples):
        rng = make_rng(seed, step=i, purpose=PURPOSE_HMC_PROPOSAL)
        v0 = rng.standard_normal(dim)
        u = rng.random()

        if leapfrog_steps == 0:
            n_accept += 1
            n_dh += 1
            samples[i] = theta
            log_densities[i] = logp
            continue

        th = theta.copy()
        g = grad
        v = v0 + 0.5 * step_size * g
        lp_new = math.nan
        ok = True
        for step in range(leapfrog_steps):
            th += step_size * v
            lp_new, g = fn(th)
            lp_new = float(lp_new)
            if not (np.isfinite(lp_new) and np.all(np.isfinite(g))):
                ok = False
                break
            v += (0.5 if step == leapfrog_steps - 1 else 1.0) * step_size * g

        if ok:
            h0 = -logp + 0.5 * float(v0 @ v0)
            h1 = -lp_new + 0.5 * float(v @ v)
            delta_h = h1 - h0
            if np.isfinite(delta_h):
                abs_dh_sum += abs(delta_h)
                n_dh += 1
                if delta_h <= 0.0 or u < math.exp(-delta_h):
                    theta = th
                    logp = lp_new
                    grad = g
                    n_accept += 1
            else:
                n_divergent += 1
        else:
            n_divergent += 1

        samples[i] = theta
        log_densities[i] = logp

    return HMCResult(
        samples=samples,
        log_densities=log_densities,
        accept_rate=n_accept / n_samples,
        n_divergent=n_divergent,
        mean_abs_delta_h=abs_dh_sum / n_dh if n_dh else math.nan,
    )


def sghmc_epoch(state: SamplerState, minibatches, grad_log_posterior) -> SamplerState:
    """One pass of minibatch-gradient HMC over all minibatches.

    Per minibatch, with step size e, friction C and temperature T:

        theta <- theta + e*v
        v     <- (1 - e*C)*v + e*grad(theta) + Normal(0, 2*T*C*e*I)

    ``grad_log_posterior(theta, batch)`` must return an unbiased estimate of
    the full-batch gradient (the caller bakes in any N/batch-size scaling).
    At T=0 the injected noise vanishes and the update is a deterministic map
    of (theta, v).
    """
    eps = state.step_size
    friction = state.friction
    if eps * friction > 1.0:
        raise ConfigurationError(
            f"step_size*friction = {eps * friction:g} > 1 flips the momentum sign; "
            "reduce the step size or the friction"
        )
    noise_scale = math.sqrt(2.0 * state.temperature * friction * eps)

    theta = state.params.copy()
    v = state.momentum.copy()
    step = state.steps_taken
    for batch in minibatches:
        theta += eps * v
        g = grad_log_posterior(theta, batch)
        v *= 1.0 - eps * friction
        v += eps * np.asarray(g, dtype=np.float64)
        if noise_scale > 0.0:
            rng = make_rng(state.rng_seed, step=step, purpose=PURPOSE_SGHMC_NOISE)
            v += noise_scale * rng.standard_normal(theta.size)
        step += 1

    return dataclasses.replace(state, params=theta, momentum=v, steps_taken=step)


class PosteriorTarget:
    """Flat-vector log-density adapter for a network posterior on a dataset.

    Encodes the posterior once and exposes the callables the samplers need:
    full-batch value+gradient, unbiased minibatch gradients (likelihood terms
    rescaled by N/batch), and seeded initial parameter draws.
    """

    def __init__(self, config: NetworkConfig, posterior, inputs, labels):
        self.config = config
        self.posterior = posterior
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(inputs, dtype=np.float64)))
        if X.shape[1] != config.input_dim:
            raise DimensionError("input width", config.input_dim, X.shape[1])
        Y = np.ascontiguousarray(np.asarray(labels, dtype=np.int64).reshape(-1))
        if Y.shape[0] != X.shape[0]:
            raise DimensionError("label count", X.shape[0], Y.shape[0])
        self.inputs = X
        self.labels = Y
        self._widths = config.widths
        enc = priors.encode_posterior(posterior, config.num_classes)
        self._spec_i, self._spec_f, self._mu_table, self._var_table = enc

    @property
    def dim(self) -> int:
        return self.config.param_count

    @property
    def n_examples(self) -> int:
        return self.inputs.shape[0]

    def value_and_grad(self, theta) -> tuple[float, np.ndarray]:
        value, grad = kernels.posterior_value_and_grad(
            self._widths,
            np.ascontiguousarray(theta, dtype=np.float64),
            self.inputs,
            self.labels,
            self._spec_i,
            self._spec_f,
            self._mu_table,
            self._var_table,
        )
        return float(value), grad

    def minibatch_grad(self, theta, batch_index) -> np.ndarray:
        idx = np.asarray(batch_index, dtype=np.intp)
        spec_f = self._spec_f.copy()
        spec_f[kernels.spec.F_DATA_SCALE] *= self.n_examples / idx.size
        _, grad = kernels.posterior_value_and_grad(
            self._widths,
            np.ascontiguousarray(theta, dtype=np.float64),
            np.ascontiguousarray(self.inputs[idx]),
            np.ascontiguousarray(self.labels[idx]),
            self._spec_i,
            spec_f,
            self._mu_table,
            self._var_table,
        )
        return grad

    def init(self, seed: int) -> np.ndarray:
        return network.init_params(self.config, seed).values


@dataclass(frozen=True)
class HMCRunConfig:
    leapfrog_steps: int
    step_size: float
    n_samples: int
    warmup: int = 0

    def __post_init__(self):
        if self.leapfrog_steps < 0:
            raise ConfigurationError("leapfrog_steps must be >= 0")
        if not self.step_size > 0:
            raise ConfigurationError("step_size must be positive")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be >= 1")
        if self.warmup < 0:
            raise ConfigurationError("warmup must be >= 0")


@dataclass(frozen=True)
class SGHMCRunConfig:
    schedule: Schedule
    friction: float
    batch_size: int

    def __post_init__(self):
        if not self.friction >= 0:
            raise ConfigurationError("friction must be non-negative")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")


@dataclass
class RunLog:
    """Results of a multi-chain run plus everything needed to reproduce it.

    Persisted as a directory: ``manifest.json`` (config echo, seeds,
    versions, failures), ``chain_###.bin`` raw little-endian float64 arrays
    with ``chain_###.json`` shape headers, and ``metrics.csv``.
    """

    manifest: dict
    chains: list
    metrics_header: list
    metrics_rows: list

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "manifest.json", self.manifest)
        for i, arr in enumerate(self.chains):
            save_array(out / f"chain_{i:03d}", arr)
        write_csv(out / "metrics.csv", self.metrics_header, self.metrics_rows)
        return out

    @classmethod
    def load(cls, run_dir) -> "RunLog":
        run = Path(run_dir)
        manifest = read_json(run / "manifest.json")
        chains = [
            load_array(run / f"chain_{i:03d}")
            for i in range(int(manifest["n_chains"]))
        ]
        header, rows = read_csv(run / "metrics.csv")
        return cls(manifest=manifest, chains=chains, metrics_header=header, metrics_rows=rows)

    def kept_samples(self) -> np.ndarray:
        """All non-empty chains stacked into one (n_total, dim) array."""
        keep = [c for c in self.chains if c.size]
        if not keep:
            raise ConfigurationError("run produced no samples")
        return np.concatenate(keep, axis=0)


_HMC_METRICS = [
    "chain",
    "method",
    "failed",
    "n_kept",
    "accept_rate",
    "divergences",
    "mean_abs_delta_h",
    "final_log_density",
]
_SGHMC_METRICS = [
    "chain",
    "method",
    "failed",
    "n_kept",
    "epochs",
    "minibatch_steps",
    "final_log_density",
]


def _run_hmc_chain(target, config: HMCRunConfig, chain_seed: int, init):
    fn = target.value_and_grad if hasattr(target, "value_and_grad") else target
    if init is None:
        theta0 = target.init(chain_seed)
    elif callable(init):
        theta0 = init(chain_seed)
    else:
        theta0 = init
    total = config.warmup + config.n_samples
    result = hmc_sample(
        fn, theta0, config.leapfrog_steps, config.step_size, total, chain_seed
    )
    kept = result.samples[config.warmup :]
    final_logp = float(result.log_densities[-1])
    return kept, {
        "accept_rate": result.accept_rate,
        "divergences": result.n_divergent,
        "mean_abs_delta_h": result.mean_abs_delta_h,
        "final_log_density": final_logp,
    }


def _run_sghmc_chain(target, config: SGHMCRunConfig, chain_seed: int, init):
    schedule = config.schedule
    if init is None:
        theta0 = target.init(chain_seed)
    elif callable(init):
        theta0 = init(chain_seed)
    else:
        theta0 = init
    theta0 = _flat_params(theta0)
    momentum = make_rng(
        chain_seed, step=0, purpose=PURPOSE_SGHMC_MOMENTUM
    ).standard_normal(theta0.size)

    lr0, t0 = schedule_at(schedule, 0.0)
    state = SamplerState(
        params=theta0,
        momentum=momentum,
        step_size=lr0,
        friction=config.friction,
        temperature=t0,
        rng_seed=chain_seed,
    )
    n = target.n_examples
    batch = min(config.batch_size, n)
    for epoch in range(schedule.epochs):
        fraction = epoch / schedule.epochs
        lr, temperature = schedule_at(schedule, fraction)
        state = dataclasses.replace(
            state, step_size=lr, temperature=temperature, epoch_fraction=fraction
        )
        perm = make_rng(
            chain_seed, step=epoch, purpose=PURPOSE_SGHMC_SHUFFLE
        ).permutation(n)
        minibatches = [perm[j : j + batch] for j in range(0, n, batch)]
        state = sghmc_epoch(state, minibatches, target.minibatch_grad)
        if not np.all(np.isfinite(state.params)):
            raise NonFiniteError("parameters", f"chain diverged in epoch {epoch}")

    final_logp, _ = target.value_and_grad(state.params)
    return state.params[None, :].copy(), {
        "epochs": schedule.epochs,
        "minibatch_steps": state.steps_taken,
        "final_log_density": float(final_logp),
    }


def run_chains(
    target,
    n_chains: int,
    config,
    base_seed: int,
    *,
    init=None,
    threads: int = 1,
    extra_manifest: dict | None = None,
) -> RunLog:
    """Run independent chains and collect a RunLog.

    Chain ``i`` uses seed ``base_seed + i`` for initialization and for every
    draw inside the chain, so results are bitwise reproducible and do not
    depend on ``threads``.  HMC mode keeps full chains; SGHMC mode keeps one
    final sample per chain.  A chain that fails is recorded in the manifest
    and the run continues.
    """
    if n_chains < 1:
        raise ConfigurationError(f"n_chains must be >= 1, got {n_chains}")
    if isinstance(config, HMCRunConfig):
        method = "hmc"
        header = _HMC_METRICS
        runner = _run_hmc_chain
    elif isinstance(config, SGHMCRunConfig):
        method = "sghmc"
        header = _SGHMC_METRICS
        runner = _run_sghmc_chain
    else:
        raise ConfigurationError(
            f"config must be HMCRunConfig or SGHMCRunConfig, got {type(config).__name__}"
        )

    dim = getattr(target, "dim", None)

    def one_chain(i: int):
        try:
            samples, stats = runner(target, config, base_seed + i, init)
            return samples, stats, None
        except Exception as exc:  # noqa: BLE001 - failures are data here
            return None, None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one_chain, range(n_chains)))
    else:
        outcomes = [one_chain(i) for i in range(n_chains)]

    chains = []
    rows = []
    failures = []
    for i, (samples, stats, error) in enumerate(outcomes):
        if error is not None:
            failures.append({"chain": i, "error": error})
            width = dim if dim is not None else 0
            chains.append(np.empty((0, width)))
            row = [i, method, 1, 0] + [math.nan] * (len(header) - 4)
            rows.append(row)
            continue
        chains.append(samples)
        row = [i, method, 0, samples.shape[0]]
        row += [stats[key] for key in header[4:]]
        rows.append(row)

    manifest = {
        "kind": "run_log",
        "method": method,
        "base_seed": int(base_seed),
        "n_chains": int(n_chains),
        "config": _config_dict(config),
        "failures": failures,
        "versions": {
            "package": VERSION,
            "numpy": np.__version__,
            "backend": kernels.BACKEND,
        },
    }
    if hasattr(target, "posterior"):
        manifest["posterior_flags"] = priors.posterior_flags(target.posterior)
    if extra_manifest:
        manifest.update(extra_manifest)
    return RunLog(
        manifest=manifest, chains=chains, metrics_header=list(header), metrics_rows=rows
    )


def _config_dict(config) -> dict:
    out = dataclasses.asdict(config)
    return out
