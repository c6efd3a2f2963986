"""Command-line interface.

Subcommands: simulate, spectrum, basin, truncated, rde, fourier.  Every
command takes ``--config FILE`` (INI scenario file) with flags overriding
individual fields; ``--seed`` is mandatory for randomized commands unless a
config file supplies it.

Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
3 completed but not converged (lets CI assert convergence).
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .analysis import basin_monte_carlo, convergence_schedule, minimal_truncation
from .backend import active_backend
from .core import FrequencySet, geometric_weights, random_ensemble
from .dynamics import ControlLaw, IntegratorConfig, Method, integrate
from .experiment import (
    ConfigError,
    ScenarioConfig,
    fourier_rows,
    run_scenario,
    spectrum_rows,
    write_basin_csv,
    write_fourier_csv,
    write_schedule_csv,
    write_spectrum_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_NOT_CONVERGED = 3


def _base_config(config_path, seed):
    if config_path is not None:
        cfg = ScenarioConfig.load(config_path)
    elif seed is None:
        raise click.UsageError("--seed is required when no --config file is given")
    else:
        cfg = ScenarioConfig()
    if seed is not None:
        cfg = cfg.override(seed=seed)
    return cfg


def random_frequencies(seed: int, p: int, lo: float, hi: float) -> FrequencySet:
    """Uniform draw on [lo, hi), redrawn on exact collision; deterministic per seed."""
    if not lo < hi:
        raise ConfigError(f"empty frequency interval [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    vals = rng.uniform(lo, hi, p)
    while np.unique(vals).size < p:
        vals = rng.uniform(lo, hi, p)
    return FrequencySet(vals)


@click.group()
def cli():
    """Closed-loop simulation and analysis of Bloch-equation ensembles."""


_config_opt = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), default=None,
    help="INI scenario file; flags override its fields.",
)


@cli.command()
@_config_opt
@click.option("--seed", type=int, default=None)
@click.option("--p", type=int, default=None)
@click.option("--freq-lo", type=float, default=None)
@click.option("--freq-hi", type=float, default=None)
@click.option("--z0-lo", type=float, default=None)
@click.option("--z0-hi", type=float, default=None)
@click.option("--weights", "weight_scheme", type=click.Choice(["unit", "geometric"]), default=None)
@click.option("--weight-base", type=float, default=None)
@click.option("--law", type=click.Choice(["zero", "full-sum", "weighted", "truncated", "radiation-damping"]), default=None)
@click.option("--trunc-n", type=int, default=None)
@click.option("--rde-rate", type=float, default=None)
@click.option("--rde-sign", type=int, default=None)
@click.option("--method", type=click.Choice(["rk4", "lie-euler"]), default=None)
@click.option("--h", type=float, default=None)
@click.option("--t-final", type=float, default=None)
@click.option("--stride", type=int, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
@click.option("--plot", "plot_svg", type=str, default=None,
              help="Also write a self-contained SVG (V, z_i, u panels) under this name.")
def simulate(config, seed, out_dir, plot_svg, **overrides):
    """Run one closed-loop scenario; writes trajectory CSV and summary."""
    cfg = _base_config(config, seed)
    cfg = cfg.override(directory=out_dir, plot_svg=plot_svg, **overrides)
    summary, _ = run_scenario(cfg)
    click.echo(f"backend={active_backend()} law={cfg.law} p={cfg.p} seed={cfg.seed}")
    click.echo(f"trajectory: {summary.trajectory_path}")
    click.echo(f"summary:    {summary.summary_path}")
    click.echo(
        f"converged={summary.converged} pole={summary.pole_reached} "
        f"final_V={summary.final_v:.6g} wall={summary.wall_seconds:.2f}s"
    )
    return EXIT_OK if summary.converged else EXIT_NOT_CONVERGED


@cli.command()
@_config_opt
@click.option("--freqs", type=str, default=None, help="Comma-separated frequencies (overrides random draw).")
@click.option("--seed", type=int, default=None)
@click.option("--p", type=int, default=None)
@click.option("--freq-lo", type=float, default=None)
@click.option("--freq-hi", type=float, default=None)
@click.option("--which", type=str, default="all",
              help="'all', 'down', 'up', or a sign pattern like '+--'.")
@click.option("--out", type=click.Path(dir_okay=False), default="spectrum.csv")
def spectrum(config, freqs, seed, p, freq_lo, freq_hi, which, out):
    """Classify equilibria: eigenvalues, secular residuals, stability."""
    if freqs is not None:
        fs = FrequencySet(np.array([float(tok) for tok in freqs.split(",")]))
    else:
        cfg = _base_config(config, seed).override(p=p, freq_lo=freq_lo, freq_hi=freq_hi)
        fs = random_frequencies(cfg.seed, cfg.p, cfg.freq_lo, cfg.freq_hi)
    reports = spectrum_rows(fs, which)
    write_spectrum_csv(out, reports)
    n_hyp = sum(r.hyperbolic for r in reports)
    click.echo(f"{len(reports)} equilibria -> {out} ({n_hyp} hyperbolic)")
    for r in reports[:8]:
        click.echo(
            f"  {r.pattern.label()}: {r.classification.value}, "
            f"unstable={r.n_unstable}, max|residual|={r.max_abs_residual:.2e}"
        )
    return EXIT_OK


@cli.command()
@_config_opt
@click.option("--seed", type=int, default=None)
@click.option("--p", type=int, default=None)
@click.option("--freq-lo", type=float, default=None)
@click.option("--freq-hi", type=float, default=None)
@click.option("--weights", "weight_scheme", type=click.Choice(["unit", "geometric"]), default=None)
@click.option("--weight-base", type=float, default=None)
@click.option("--samples", type=int, default=100)
@click.option("--horizon", type=float, default=20000.0)
@click.option("--z-threshold", type=float, default=-0.99)
@click.option("--h", type=float, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=".")
def basin(config, seed, samples, horizon, z_threshold, out_dir, **overrides):
    """Monte-Carlo estimate of the attraction basin of the down state."""
    if samples < 1:
        raise click.UsageError("--samples must be >= 1")
    cfg = _base_config(config, seed).override(**overrides)
    fs = random_frequencies(cfg.seed, cfg.p, cfg.freq_lo, cfg.freq_hi)
    w = cfg.build_weights()
    est = basin_monte_carlo(
        fs, w, samples, horizon, z_threshold=z_threshold, seed=cfg.seed, h=cfg.h,
    )
    outdir = Path(out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "basin.csv"
    write_basin_csv(path, est)
    click.echo(
        f"p={cfg.p} samples={est.samples} converged={est.converged} "
        f"fraction={est.fraction:.4f} -> {path}"
    )
    return EXIT_OK if est.converged == est.samples else EXIT_NOT_CONVERGED


@cli.command()
@_config_opt
@click.option("--seed", type=int, default=None)
@click.option("--p", type=int, default=12)
@click.option("--eps", type=float, required=True)
@click.option("--n-min", type=int, default=None, help="Defaults to the minimal truncation for eps.")
@click.option("--n-max", type=int, default=None, help="Defaults to p.")
@click.option("--horizon", type=float, default=20000.0)
@click.option("--h", type=float, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=".")
def truncated(config, seed, p, eps, n_min, n_max, horizon, h, out_dir):
    """Truncated-feedback sweep: hitting times of the eps-ball around the down state."""
    if eps <= 0:
        raise click.UsageError("--eps must be positive")
    cfg = _base_config(config, seed).override(p=p, h=h)
    n_bar = minimal_truncation(eps)
    lo = n_bar if n_min is None else n_min
    hi = cfg.p if n_max is None else n_max
    if not 1 <= lo <= hi <= cfg.p:
        raise click.UsageError(f"need 1 <= n_min <= n_max <= p (got {lo}..{hi} for p={cfg.p})")
    ens = random_ensemble(
        cfg.seed, cfg.p, (cfg.freq_lo, cfg.freq_hi), (-1.0, 1.0),
        geometric_weights(cfg.p, 2.0),
    )
    icfg = IntegratorConfig(t_final=horizon, h=cfg.h, method=Method(cfg.method))
    family = {
        n: integrate(ens, ControlLaw.truncated(n), icfg, stride=cfg.stride)
        for n in range(lo, hi + 1)
    }
    sched = convergence_schedule(family, eps)
    outdir = Path(out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "schedule.csv"
    write_schedule_csv(path, sched)
    click.echo(f"eps={eps} n_bar={sched.n_bar} -> {path}")
    for e in sched.entries:
        click.echo(f"  N={e.n}: t_hit={e.t_hit} converged={e.converged}")
    return EXIT_OK if sched.all_converged else EXIT_NOT_CONVERGED


@cli.command()
@_config_opt
@click.option("--seed", type=int, default=None)
@click.option("--p", type=int, default=5)
@click.option("--rate", type=float, default=1.0)
@click.option("--sign", type=click.Choice(["+1", "-1", "1"]), default="+1")
@click.option("--horizon", type=float, default=2000.0)
@click.option("--z0-lo", type=float, default=-1.0)
@click.option("--z0-hi", type=float, default=1.0)
@click.option("--out-dir", type=click.Path(file_okay=False), default=".")
def rde(config, seed, p, rate, sign, horizon, z0_lo, z0_hi, out_dir):
    """Damping-mode run; the summary reports which pole was approached."""
    cfg = _base_config(config, seed).override(
        p=p, law="radiation-damping", rde_rate=rate, rde_sign=int(sign),
        t_final=horizon, z0_lo=z0_lo, z0_hi=z0_hi, directory=out_dir,
    )
    summary, _ = run_scenario(cfg)
    click.echo(
        f"sign={int(sign):+d} pole_reached={summary.pole_reached} "
        f"converged={summary.converged} non_generic_start={summary.non_generic_start}"
    )
    return EXIT_OK if summary.converged else EXIT_NOT_CONVERGED


@cli.command()
@_config_opt
@click.option("--seed", type=int, default=None)
@click.option("--p", type=int, default=4)
@click.option("--t-final", type=float, default=1000.0)
@click.option("--h", type=float, default=0.01)
@click.option("--stride", type=int, default=2)
@click.option("--probe", type=float, multiple=True,
              help="Extra probe frequencies (closed form is 0 off the lines).")
@click.option("--out", type=click.Path(dir_okay=False), default="fourier.csv")
def fourier(config, seed, p, t_final, h, stride, probe, out):
    """Averaged Fourier coefficients on a free run: closed form vs quadrature."""
    cfg = _base_config(config, seed).override(p=p, h=h, stride=stride, t_final=t_final)
    ens = random_ensemble(
        cfg.seed, cfg.p, (cfg.freq_lo, cfg.freq_hi), (-1.0, 1.0),
        geometric_weights(cfg.p, 2.0),
    )
    traj = integrate(
        ens, ControlLaw.zero(),
        IntegratorConfig(t_final=cfg.t_final, h=cfg.h), stride=cfg.stride,
    )
    rows = fourier_rows(traj, extra_omegas=tuple(probe))
    write_fourier_csv(out, rows)
    worst = max(r["abs_error"] for r in rows)
    click.echo(f"{len(rows)} coefficients -> {out} (max |error| = {worst:.4f})")
    return EXIT_OK


def main(argv=None) -> int:
    """Run the CLI with the documented exit-code mapping."""
    try:
        rv = cli.main(args=argv, prog_name="blochensemble", standalone_mode=False)
        return int(rv) if rv is not None else EXIT_OK
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except (ConfigError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except (RuntimeError, OSError) as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        return EXIT_RUNTIME


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
