"""Command-line entry point.

Eight subcommands cover the pipeline end to end: ``sample`` runs chains on
the toy problem from a JSON config; ``phase-diagram``, ``cdf``,
``wasserstein``, ``flow`` and ``slice`` emit the closed-form analyses as
CSV; ``sweep`` measures prior confidence against prior scale; ``eval``
scores a finished run.  Every subcommand writes its artifacts plus a
``manifest.json`` echoing the full configuration and seeds into the output
directory, so any artifact can be regenerated from its manifest alone.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures.
"""

from __future__ import annotations

import json
import sys
import warnings
from pathlib import Path
from typing import Literal, Optional, Union

import click
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import analytics, evaluation, kernels, priors
from ._io import write_csv, write_json
from ._version import VERSION
from .datasets import DatasetSpec, ToyDataset, generate_dataset
from .exceptions import ConfigurationError, DimensionError, NonFiniteError
from .network import NetworkConfig, init_params
from .priors import PosteriorSpec, PriorSpec
from .samplers import (
    HMCRunConfig,
    PosteriorTarget,
    RunLog,
    Schedule,
    SGHMCRunConfig,
    run_chains,
)


# ---------------------------------------------------------------------------
# configuration schema (strict: unknown keys are rejected at every level)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NetworkModel(_Strict):
    input_dim: int = 2
    hidden_layers: list[int]
    num_classes: int = 2

    def build(self) -> NetworkConfig:
        return NetworkConfig(
            input_dim=self.input_dim,
            hidden_layers=tuple(self.hidden_layers),
            num_classes=self.num_classes,
        )


class PriorModel(_Strict):
    family: Literal["uniform", "normal", "dirichlet", "dirclip", "ndg", "confidence"]
    sigma: Optional[float] = None
    alpha: Optional[float] = None
    clip: Optional[float] = None
    temperature: Optional[float] = None

    def build(self) -> PriorSpec:
        return PriorSpec(
            family=self.family,
            sigma=self.sigma,
            alpha=self.alpha,
            clip=self.clip,
            temperature=self.temperature,
        )


class PosteriorModel(_Strict):
    param_prior: PriorModel
    prediction_prior: Optional[PriorModel] = None
    likelihood: Literal["categorical", "ndg_quadratic", "none"] = "categorical"
    temperature: float = 1.0

    def build(self) -> PosteriorSpec:
        return PosteriorSpec(
            param_prior=self.param_prior.build(),
            prediction_prior=(
                None if self.prediction_prior is None else self.prediction_prior.build()
            ),
            likelihood=self.likelihood,
            temperature=self.temperature,
        )


class HMCModel(_Strict):
    method: Literal["hmc"]
    leapfrog_steps: int
    step_size: float
    n_samples: int
    warmup: int = 0

    def build(self) -> HMCRunConfig:
        return HMCRunConfig(
            leapfrog_steps=self.leapfrog_steps,
            step_size=self.step_size,
            n_samples=self.n_samples,
            warmup=self.warmup,
        )


class ScheduleModel(_Strict):
    max_lr: float
    max_temperature: float
    epochs: int

    def build(self) -> Schedule:
        return Schedule(
            max_lr=self.max_lr,
            max_temperature=self.max_temperature,
            epochs=self.epochs,
        )


class SGHMCModel(_Strict):
    method: Literal["sghmc"]
    friction: float
    batch_size: int
    schedule: ScheduleModel

    def build(self) -> SGHMCRunConfig:
        return SGHMCRunConfig(
            schedule=self.schedule.build(),
            friction=self.friction,
            batch_size=self.batch_size,
        )


class GeneratorModel(_Strict):
    n_points: int = 60
    centers: list[list[float]] = Field(default=[[-1.5, 0.0], [1.5, 0.0]])
    spread: float = 0.5
    n_ambiguous: int = 2
    ambiguous_jitter: float = 0.15

    def build(self) -> DatasetSpec:
        return DatasetSpec(
            n_points=self.n_points,
            centers=tuple(tuple(c) for c in self.centers),
            spread=self.spread,
            n_ambiguous=self.n_ambiguous,
            ambiguous_jitter=self.ambiguous_jitter,
        )


class DatasetModel(_Strict):
    path: Optional[str] = None
    generator: Optional[GeneratorModel] = None
    seed: int = 0

    @model_validator(mode="after")
    def _one_source(self):
        if (self.path is None) == (self.generator is None):
            raise ValueError("dataset needs exactly one of 'path' or 'generator'")
        return self

    def build(self) -> ToyDataset:
        if self.path is not None:
            return ToyDataset.from_csv(self.path)
        return generate_dataset(self.generator.build(), self.seed)


class ExperimentModel(_Strict):
    network: NetworkModel
    posterior: PosteriorModel
    sampler: Union[HMCModel, SGHMCModel] = Field(discriminator="method")
    dataset: DatasetModel
    seed: int = 0
    chains: int = 2
    threads: int = 1
    out: Optional[str] = None


def load_experiment(path, overrides: dict) -> ExperimentModel:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config {path} must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentModel.model_validate(raw)


# ---------------------------------------------------------------------------
# subcommands


@click.group(name="confpriors")
@click.version_option(VERSION, prog_name="confpriors")
def cli():
    """Confidence-inducing priors: sampling, analytics and evaluation."""


def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _args_manifest(command: str, **kwargs) -> dict:
    return {
        "kind": f"{command}_artifact",
        "command": command,
        "arguments": kwargs,
        "versions": {
            "package": VERSION,
            "numpy": np.__version__,
            "backend": kernels.BACKEND,
        },
    }


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out", type=click.Path(), default=None, help="override the output directory")
@click.option("--chains", type=int, default=None, help="override the chain count")
@click.option("--threads", type=int, default=None, help="threads for chain execution")
def sample(config_path, seed, out, chains, threads):
    """Run MCMC chains for the experiment described by a JSON config."""
    model = load_experiment(
        config_path, {"seed": seed, "out": out, "chains": chains, "threads": threads}
    )
    if model.out is None:
        raise ConfigurationError("an output directory is required (config 'out' or --out)")
    config = model.network.build()
    posterior = model.posterior.build()
    dataset = model.dataset.build()
    if config.input_dim != dataset.points.shape[1]:
        raise DimensionError("network input_dim", dataset.points.shape[1], config.input_dim)
    target = PosteriorTarget(config, posterior, dataset.points, dataset.labels)
    run_config = model.sampler.build()
    run_log = run_chains(
        target,
        model.chains,
        run_config,
        model.seed,
        threads=model.threads,
        extra_manifest={"experiment": model.model_dump(mode="json")},
    )
    out_path = run_log.save(_out_dir(model.out))
    dataset.to_csv(out_path / "dataset.csv")
    if run_log.manifest["failures"]:
        raise NonFiniteError(
            "chains", f"{len(run_log.manifest['failures'])} chain(s) failed; see manifest"
        )
    click.echo(str(out_path))


@cli.command(name="phase-diagram")
@click.option("--k", "num_classes", type=int, default=10, show_default=True)
@click.option("--alpha-min", type=float, default=0.01, show_default=True)
@click.option("--alpha-max", type=float, default=1.2, show_default=True)
@click.option("--alpha-steps", type=int, default=120, show_default=True)
@click.option("--x-steps", type=int, default=100, show_default=True)
@click.option("--out", required=True, type=click.Path())
def phase_diagram(num_classes, alpha_min, alpha_max, alpha_steps, x_steps, out):
    """True-class update direction over a (concentration, wrong-prob) grid."""
    alphas = np.linspace(alpha_min, alpha_max, alpha_steps)
    xs = np.linspace(0.005, 0.995, x_steps)
    values = analytics.phase_diagram(num_classes, alphas, xs)
    out_path = _out_dir(out)
    rows = [
        [alphas[i], xs[j], values[i, j]]
        for i in range(alphas.size)
        for j in range(xs.size)
    ]
    write_csv(out_path / "phase_diagram.csv", ["alpha", "wrong_prob", "delta"], rows)
    manifest = _args_manifest(
        "phase-diagram",
        k=num_classes,
        alpha_min=alpha_min,
        alpha_max=alpha_max,
        alpha_steps=alpha_steps,
        x_steps=x_steps,
    )
    manifest["critical_alpha"] = analytics.critical_alpha(num_classes)
    write_json(out_path / "manifest.json", manifest)
    click.echo(str(out_path))


@cli.command()
@click.option("--t", "temperatures", type=float, multiple=True,
              default=(1.0, 0.3, 0.1, 0.03), show_default=True)
@click.option("--grid", type=int, default=1001, show_default=True)
@click.option("--samples", type=int, default=200_000, show_default=True,
              help="rejection-sampling draws per temperature for the empirical columns")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def cdf(temperatures, grid, samples, seed, out):
    """Analytic and empirical CDFs of the cold and upper-bound densities."""
    zs = np.linspace(0.0, 1.0, grid)
    rows = []
    for t in temperatures:
        cold = analytics.cdf_cold(zs, t)
        upper = analytics.cdf_upper_bound(zs, t)
        cold_draws = np.sort(analytics.rejection_sample_cold(t, samples, seed))
        upper_draws = np.sort(analytics.rejection_sample_upper(t, samples, seed))
        ecdf_cold = np.searchsorted(cold_draws, zs, side="right") / samples
        ecdf_upper = np.searchsorted(upper_draws, zs, side="right") / samples
        for j in range(zs.size):
            rows.append([t, zs[j], cold[j], upper[j], ecdf_cold[j], ecdf_upper[j]])
    out_path = _out_dir(out)
    write_csv(
        out_path / "cdf.csv",
        ["t", "z", "cdf_cold", "cdf_upper", "ecdf_cold", "ecdf_upper"],
        rows,
    )
    write_json(
        out_path / "manifest.json",
        _args_manifest(
            "cdf", t=list(temperatures), grid=grid, samples=samples, seed=seed
        ),
    )
    click.echo(str(out_path))


@cli.command()
@click.option("--t-min", type=float, default=1e-4, show_default=True)
@click.option("--t-max", type=float, default=1.0, show_default=True)
@click.option("--steps", type=int, default=81, show_default=True)
@click.option("--out", required=True, type=click.Path())
def wasserstein(t_min, t_max, steps, out):
    """Wasserstein distance between the cold and upper-bound distributions."""
    if not 0 < t_min < t_max:
        raise ConfigurationError(f"need 0 < t-min < t-max, got {t_min}, {t_max}")
    ts = np.logspace(np.log10(t_min), np.log10(t_max), steps)
    values = analytics.wasserstein_cold_vs_upper(ts)
    out_path = _out_dir(out)
    write_csv(
        out_path / "wasserstein.csv",
        ["t", "distance"],
        [[ts[i], values[i]] for i in range(ts.size)],
    )
    write_json(
        out_path / "manifest.json",
        _args_manifest("wasserstein", t_min=t_min, t_max=t_max, steps=steps),
    )
    click.echo(str(out_path))


@cli.command()
@click.option("--density", type=click.Choice(["prior", "likelihood", "posterior"]),
              default="posterior", show_default=True)
@click.option("--family", type=click.Choice(["dirichlet", "dirclip", "ndg", "confidence"]),
              default="dirichlet", show_default=True)
@click.option("--alpha", type=float, default=0.65, show_default=True)
@click.option("--clip", type=float, default=-50.0, show_default=True,
              help="clip value when --family dirclip")
@click.option("--conf-t", type=float, default=0.5, show_default=True,
              help="temperature when --family confidence")
@click.option("--label", type=int, default=0, show_default=True)
@click.option("--particles", type=int, default=500, show_default=True)
@click.option("--steps", type=int, default=2000, show_default=True)
@click.option("--step-size", type=float, default=0.05, show_default=True)
@click.option("--store-every", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mass-samples", type=int, default=200_000, show_default=True,
              help="exact density draws for the mass summary (Dirichlet families)")
@click.option("--out", required=True, type=click.Path())
def flow(density, family, alpha, clip, conf_t, label, particles, steps, step_size,
         store_every, seed, mass_samples, out):
    """Integrate the simplex gradient flow and summarize corner convergence."""
    if density == "likelihood":
        pred, likelihood = None, "categorical"
    else:
        if family == "dirichlet":
            pred = PriorSpec.dirichlet(alpha)
        elif family == "dirclip":
            pred = PriorSpec.dirclip(alpha, clip)
        elif family == "ndg":
            pred = PriorSpec.ndg(alpha)
        else:
            pred = PriorSpec.confidence(conf_t)
        likelihood = "categorical" if density == "posterior" else "none"
    result = analytics.simplex_flow(
        pred,
        likelihood,
        label=label,
        n_particles=particles,
        step_size=step_size,
        n_steps=steps,
        seed=seed,
        store_every=store_every,
    )
    out_path = _out_dir(out)
    traj = result.trajectories
    rows = []
    for p in range(traj.shape[0]):
        for s in range(traj.shape[1]):
            rows.append([p, s * store_every, traj[p, s, 0], traj[p, s, 1], traj[p, s, 2]])
    write_csv(out_path / "trajectories.csv", ["particle", "step", "p0", "p1", "p2"], rows)

    summary_header = ["label", "wrong_corner_fraction", "clamp_events"] + [
        f"corner_{k}_fraction" for k in range(traj.shape[2])
    ]
    summary_row = [result.label, result.wrong_corner_fraction, result.clamp_events] + [
        result.corner_fractions[k] for k in range(traj.shape[2])
    ]
    manifest = _args_manifest(
        "flow",
        density=density,
        family=family,
        alpha=alpha,
        clip=clip,
        conf_t=conf_t,
        label=label,
        particles=particles,
        steps=steps,
        step_size=step_size,
        store_every=store_every,
        seed=seed,
        mass_samples=mass_samples,
    )
    if density != "prior" or family == "dirichlet":
        try:
            draws = analytics.sample_flow_density(
                pred,
                likelihood,
                label=label,
                n_samples=mass_samples,
                seed=seed,
            )
        except ConfigurationError:
            draws = None
        if draws is not None:
            summary_header.append("bottom_half_mass")
            summary_row.append(analytics.bottom_half_mass(draws, label))
    write_csv(out_path / "summary.csv", summary_header, [summary_row])
    write_json(out_path / "manifest.json", manifest)
    click.echo(str(out_path))


@cli.command(name="slice")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--run", "run_dir", type=click.Path(exists=True), default=None,
              help="take parameters from this run (final sample) instead of an init draw")
@click.option("--grid-lo", type=float, default=-20.0, show_default=True)
@click.option("--grid-hi", type=float, default=20.0, show_default=True)
@click.option("--grid-steps", type=int, default=401, show_default=True)
@click.option("--bias-index", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out", required=True, type=click.Path())
def density_slice(config_path, run_dir, grid_lo, grid_hi, grid_steps, bias_index, seed, out):
    """Log-density slices along one output bias of the configured network."""
    model = load_experiment(config_path, {"seed": seed})
    config = model.network.build()
    posterior = model.posterior.build()
    dataset = model.dataset.build()
    if run_dir is not None:
        params = RunLog.load(run_dir).kept_samples()[-1]
    else:
        params = init_params(config, model.seed).values
    grid = np.linspace(grid_lo, grid_hi, grid_steps)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", priors.ImproperPosteriorWarning)
        post_curve = analytics.divergence_slice(
            config, params, dataset.points, grid, posterior,
            labels=dataset.labels, bias_index=bias_index,
        )
    param_curve = analytics.divergence_slice(
        config, params, dataset.points, grid, posterior.param_prior,
        bias_index=bias_index,
    )
    header = ["theta", "posterior", "param_prior"]
    columns = [grid, post_curve, param_curve]
    manifest = _args_manifest(
        "slice",
        config=str(config_path),
        run=None if run_dir is None else str(run_dir),
        grid_lo=grid_lo,
        grid_hi=grid_hi,
        grid_steps=grid_steps,
        bias_index=bias_index,
        seed=model.seed,
    )
    pred = posterior.prediction_prior
    if pred is not None and pred.family != "uniform":
        pred_curve = analytics.divergence_slice(
            config, params, dataset.points, grid, pred,
            labels=dataset.labels, bias_index=bias_index,
        )
        header.append("prediction_prior")
        columns.append(pred_curve)
        if pred.family == "dirclip":
            manifest["dirclip_bound_per_point"] = priors.dirclip_bound(
                pred.alpha, pred.clip, config.num_classes
            )
            manifest["dirclip_bound_total"] = (
                len(dataset) * manifest["dirclip_bound_per_point"]
            )
    out_path = _out_dir(out)
    rows = [[col[i] for col in columns] for i in range(grid.size)]
    write_csv(out_path / "slice.csv", header, rows)
    write_json(out_path / "manifest.json", manifest)
    click.echo(str(out_path))


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--scale", "scales", type=float, multiple=True,
              help="prior scales; default is a 10-point log grid over [0.01, 10]")
@click.option("--samples-per-scale", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out", required=True, type=click.Path())
def sweep(config_path, scales, samples_per_scale, seed, out):
    """Mean prior-predictive confidence as a function of the prior scale."""
    model = load_experiment(config_path, {"seed": seed})
    config = model.network.build()
    dataset = model.dataset.build()
    scale_grid = (
        np.asarray(scales, dtype=np.float64)
        if scales
        else np.logspace(-2, 1, 10)
    )
    curve = evaluation.prior_confidence_sweep(
        config, scale_grid, samples_per_scale, dataset.points, seed=model.seed
    )
    out_path = _out_dir(out)
    write_csv(
        out_path / "sweep.csv",
        ["scale", "mean_confidence"],
        [[scale_grid[i], curve[i]] for i in range(scale_grid.size)],
    )
    manifest = _args_manifest(
        "sweep",
        config=str(config_path),
        scales=[float(s) for s in scale_grid],
        samples_per_scale=samples_per_scale,
        seed=model.seed,
    )
    manifest["uniform_confidence"] = 1.0 / config.num_classes
    write_json(out_path / "manifest.json", manifest)
    click.echo(str(out_path))


@cli.command(name="eval")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True))
@click.option("--thin", type=int, default=1, show_default=True)
@click.option("--grid-resolution", type=int, default=50, show_default=True)
@click.option("--out", required=True, type=click.Path())
def eval_run(run_dir, thin, grid_resolution, out):
    """Score a finished run: metrics, log-probability CDF, boundary grid."""
    run_log = RunLog.load(run_dir)
    experiment = run_log.manifest.get("experiment")
    if experiment is None:
        raise ConfigurationError(
            f"{run_dir} has no experiment echo in its manifest; re-run 'sample'"
        )
    config = NetworkModel.model_validate(experiment["network"]).build()
    dataset = ToyDataset.from_csv(Path(run_dir) / "dataset.csv")
    ensemble = evaluation.Ensemble.from_run_log(run_log, config, thin=thin)

    rows = []
    for mode in ("ensemble", "per-sample"):
        metrics = evaluation.evaluate(ensemble, dataset.points, dataset.labels, mode)
        rows.append(
            [mode, metrics.accuracy, metrics.mean_log_likelihood, metrics.mean_confidence]
        )
    out_path = _out_dir(out)
    write_csv(
        out_path / "metrics.csv",
        ["mode", "accuracy", "mean_log_likelihood", "mean_confidence"],
        rows,
    )

    values, cdf_levels = evaluation.logprob_cdf(
        ensemble, dataset.points, dataset.labels, selector="true"
    )
    write_csv(
        out_path / "logprob_cdf.csv",
        ["log_prob", "cdf"],
        [[values[i], cdf_levels[i]] for i in range(values.size)],
    )

    pts = dataset.points
    pad = 1.0
    bounds = (
        float(pts[:, 0].min() - pad),
        float(pts[:, 0].max() + pad),
        float(pts[:, 1].min() - pad),
        float(pts[:, 1].max() + pad),
    )
    grid = evaluation.decision_boundary_grid(ensemble, bounds, grid_resolution)
    grid_rows = []
    for yi in range(grid.ys.size):
        for xi in range(grid.xs.size):
            row = [grid.xs[xi], grid.ys[yi]] + [
                grid.probs[yi, xi, k] for k in range(grid.probs.shape[2])
            ]
            grid_rows.append(row)
    write_csv(
        out_path / "boundary_grid.csv",
        ["x", "y"] + [f"p{k}" for k in range(grid.probs.shape[2])],
        grid_rows,
    )

    chain_arrays = [c for c in run_log.chains if c.size and c.shape[0] >= 4]
    manifest = _args_manifest(
        "eval",
        run=str(run_dir),
        thin=thin,
        grid_resolution=grid_resolution,
    )
    if len(chain_arrays) >= 2 and len({c.shape[0] for c in chain_arrays}) == 1:
        manifest["parameter_r_hat"] = evaluation.parameter_r_hat(chain_arrays)
        manifest["function_r_hat"] = evaluation.function_r_hat(
            config, chain_arrays, dataset.points
        )
    write_json(out_path / "manifest.json", manifest)
    click.echo(str(out_path))


def main(argv=None) -> int:
    """Entry point with the documented exit codes."""
    try:
        cli.main(args=argv, prog_name="confpriors", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.Abort:
        click.echo("aborted", err=True)
        return 130
    except (ConfigurationError, DimensionError, ValidationError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except FileNotFoundError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except NonFiniteError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    except FloatingPointError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
