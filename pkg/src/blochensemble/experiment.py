"""Configuration-driven experiment runner and report serialization.

Scenario files use INI syntax (flat ``key = value`` pairs inside sections;
see README for the grammar).  All trajectory and report files are plain
CSV with fixed headers; floats are serialized with ``repr`` so identical
configurations produce byte-identical files.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, fields, replace
from configparser import ConfigParser
from pathlib import Path
from typing import Optional

import numpy as np

from . import svgplot
from .analysis import (
    BasinEstimate,
    ConvergenceSchedule,
    bohr_fourier_closed,
    bohr_fourier_numeric,
)
from .backend import active_backend
from .core import (
    EnsembleState,
    FrequencySet,
    WeightVector,
    geometric_weights,
    random_ensemble,
    unit_weights,
)
from .dynamics import (
    ControlLaw,
    IntegratorConfig,
    LawKind,
    Method,
    Trajectory,
    integrate,
)
from .spectral import Equilibrium, EquilibriumReport, enumerate_equilibria, spectrum_at

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "RunSummary",
    "run_scenario",
    "write_trajectory_csv",
    "spectrum_rows",
    "write_spectrum_csv",
    "write_basin_csv",
    "write_schedule_csv",
    "fourier_rows",
    "write_fourier_csv",
]

#: per-spin convergence threshold operationalizing "reaches the pole"
Z_CONVERGED = -0.99


class ConfigError(Exception):
    """Invalid scenario configuration; message names the offending field."""


_LAW_NAMES = {k.value for k in LawKind}
_METHOD_NAMES = {m.value for m in Method}
_SCHEMES = {"unit", "geometric"}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to rerun one closed-loop experiment."""

    seed: int = 0
    p: int = 30
    freq_lo: float = 1.0
    freq_hi: float = 4.0
    z0_lo: float = 0.8
    z0_hi: float = 1.0
    weight_scheme: str = "unit"
    weight_base: float = 2.0
    law: str = "full-sum"
    trunc_n: int = 1
    rde_rate: float = 1.0
    rde_sign: int = 1
    method: str = "rk4"
    h: float = 0.01
    t_final: float = 20000.0
    stride: int = 100
    directory: str = "."
    trajectory_csv: str = "trajectory.csv"
    summary: str = "summary.txt"
    plot_svg: str = ""

    _SECTIONS = {
        "ensemble": ("seed", "p", "freq_lo", "freq_hi", "z0_lo", "z0_hi",
                     "weight_scheme", "weight_base"),
        "control": ("law", "trunc_n", "rde_rate", "rde_sign"),
        "integrator": ("method", "h", "t_final", "stride"),
        "output": ("directory", "trajectory_csv", "summary", "plot_svg"),
    }

    def validate(self) -> "ScenarioConfig":
        if self.p < 1:
            raise ConfigError(f"ensemble.p must be >= 1 (got {self.p})")
        if not self.freq_lo < self.freq_hi:
            raise ConfigError(
                f"ensemble.freq_lo/freq_hi must be an interval (got [{self.freq_lo}, {self.freq_hi}])"
            )
        if not (-1.0 <= self.z0_lo <= self.z0_hi <= 1.0):
            raise ConfigError(
                f"ensemble.z0_lo/z0_hi must satisfy -1 <= lo <= hi <= 1 (got [{self.z0_lo}, {self.z0_hi}])"
            )
        if self.weight_scheme not in _SCHEMES:
            raise ConfigError(f"ensemble.weight_scheme must be one of {sorted(_SCHEMES)}")
        if self.weight_scheme == "geometric" and self.weight_base <= 1.0:
            raise ConfigError(f"ensemble.weight_base must exceed 1 (got {self.weight_base})")
        if self.law not in _LAW_NAMES:
            raise ConfigError(f"control.law must be one of {sorted(_LAW_NAMES)}")
        if self.law == "truncated" and not 1 <= self.trunc_n <= self.p:
            raise ConfigError(f"control.trunc_n must lie in 1..{self.p} (got {self.trunc_n})")
        if self.law == "radiation-damping":
            if self.rde_rate <= 0:
                raise ConfigError(f"control.rde_rate must be positive (got {self.rde_rate})")
            if self.rde_sign not in (-1, 1):
                raise ConfigError(f"control.rde_sign must be -1 or +1 (got {self.rde_sign})")
        if self.method not in _METHOD_NAMES:
            raise ConfigError(f"integrator.method must be one of {sorted(_METHOD_NAMES)}")
        if self.h <= 0:
            raise ConfigError(f"integrator.h must be positive (got {self.h})")
        if self.t_final < self.h:
            raise ConfigError("integrator.t_final must cover at least one step")
        if self.stride < 1:
            raise ConfigError(f"integrator.stride must be >= 1 (got {self.stride})")
        return self

    # -- INI round trip --------------------------------------------------

    def to_ini(self) -> str:
        lines = []
        by_name = {f.name: getattr(self, f.name) for f in fields(self)}
        for section, keys in self._SECTIONS.items():
            lines.append(f"[{section}]")
            for key in keys:
                v = by_name[key]
                lines.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_ini(cls, text: str) -> "ScenarioConfig":
        parser = ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.read_string(text)
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for section, keys in cls._SECTIONS.items():
            if not parser.has_section(section):
                continue
            for key in keys:
                if not parser.has_option(section, key):
                    continue
                raw = parser.get(section, key).strip()
                t = types[key]
                try:
                    if t == "int":
                        kwargs[key] = int(raw)
                    elif t == "float":
                        kwargs[key] = float(raw)
                    else:
                        kwargs[key] = raw
                except ValueError as exc:
                    raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        return cls.from_ini(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_ini())

    def override(self, **kwargs) -> "ScenarioConfig":
        provided = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **provided)

    # -- materialization -------------------------------------------------

    def build_weights(self) -> WeightVector:
        if self.weight_scheme == "geometric":
            return geometric_weights(self.p, self.weight_base)
        return unit_weights(self.p)

    def build_ensemble(self) -> EnsembleState:
        return random_ensemble(
            self.seed, self.p, (self.freq_lo, self.freq_hi),
            (self.z0_lo, self.z0_hi), self.build_weights(),
        )

    def build_law(self) -> ControlLaw:
        kind = LawKind(self.law)
        if kind is LawKind.TRUNCATED:
            return ControlLaw.truncated(self.trunc_n)
        if kind is LawKind.RADIATION_DAMPING:
            return ControlLaw.radiation_damping(self.rde_rate, self.rde_sign)
        return ControlLaw(kind)

    def build_integrator(self) -> IntegratorConfig:
        return IntegratorConfig(t_final=self.t_final, h=self.h, method=Method(self.method))


@dataclass(frozen=True, eq=False)
class RunSummary:
    """Outcome of one scenario run, consistent with its trajectory file."""

    converged: bool
    non_generic_start: bool
    pole_reached: str          # 'down' | 'up' | 'none'
    final_v: float
    final_spins: np.ndarray
    max_norm_drift: float
    max_v_increase: float
    wall_seconds: float
    trajectory_path: Optional[Path] = None
    summary_path: Optional[Path] = None
    plot_path: Optional[Path] = None


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """Fixed schema: t,u1,u2,V then x_i,y_i,z_i per spin (4 + 3p fields)."""
    p = traj.p
    cols = ["t", "u1", "u2", "V"]
    for i in range(1, p + 1):
        cols += [f"x{i}", f"y{i}", f"z{i}"]
    rows = [",".join(cols)]
    flat = traj.states.reshape(traj.n_samples, 3 * p)
    for k in range(traj.n_samples):
        vals = [traj.times[k], traj.controls[k, 0], traj.controls[k, 1], traj.lyapunov[k]]
        rows.append(",".join(_fmt(v) for v in vals) + "," + ",".join(_fmt(v) for v in flat[k]))
    Path(path).write_text("\n".join(rows) + "\n")


def _pole_reached(z: np.ndarray) -> str:
    if np.all(z < Z_CONVERGED):
        return "down"
    if np.all(z > -Z_CONVERGED):
        return "up"
    return "none"


def _write_summary(path, cfg: ScenarioConfig, summary: RunSummary) -> None:
    lines = [
        "[summary]",
        f"backend = {active_backend()}",
        f"law = {cfg.law}",
        f"p = {cfg.p}",
        f"seed = {cfg.seed}",
        f"t_final = {_fmt(cfg.t_final)}",
        f"converged = {str(summary.converged).lower()}",
        f"non_generic_start = {str(summary.non_generic_start).lower()}",
        f"pole_reached = {summary.pole_reached}",
        f"final_v = {_fmt(summary.final_v)}",
        f"max_norm_drift = {_fmt(summary.max_norm_drift)}",
        f"max_v_increase = {_fmt(summary.max_v_increase)}",
        f"wall_seconds = {summary.wall_seconds:.3f}",
        "",
        "[final_state]",
    ]
    for i, (x, y, z) in enumerate(summary.final_spins, start=1):
        lines.append(f"spin_{i} = {_fmt(x)} {_fmt(y)} {_fmt(z)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _write_plot(path, traj: Trajectory) -> None:
    t = traj.times
    total_w = float(np.sum(traj.weights.values))
    panels = [
        ("V(t) / total weight", [(t, traj.lyapunov / total_w)]),
        ("z_i(t)", [(t, traj.states[:, i, 2]) for i in range(traj.p)]),
        ("u1(t), u2(t)", [(t, traj.controls[:, 0]), (t, traj.controls[:, 1])]),
    ]
    Path(path).write_text(svgplot.render_panels(panels))


def run_scenario(cfg: ScenarioConfig, write_files: bool = True):
    """Materialize, integrate and serialize one scenario.

    Returns ``(summary, trajectory)``.  Deterministic per seed: rerunning
    the same config produces byte-identical CSV output.
    """
    cfg.validate()
    t0 = time.perf_counter()
    ensemble = cfg.build_ensemble()
    law = cfg.build_law()
    traj = integrate(ensemble, law, cfg.build_integrator(), stride=cfg.stride)
    wall = time.perf_counter() - t0

    z_final = traj.final_state.z
    pole = _pole_reached(z_final)
    kind = law.kind
    if kind in (LawKind.FULL_SUM, LawKind.WEIGHTED, LawKind.TRUNCATED):
        converged = pole == "down"
    elif kind is LawKind.RADIATION_DAMPING:
        converged = pole == ("up" if law.sign == 1 else "down")
    else:
        converged = False
    non_generic = bool(np.all(np.abs(ensemble.spins[:, :2]) == 0.0))

    summary = RunSummary(
        converged=converged,
        non_generic_start=non_generic,
        pole_reached=pole,
        final_v=float(traj.lyapunov[-1]),
        final_spins=traj.final_state.spins,
        max_norm_drift=traj.max_norm_drift(),
        max_v_increase=traj.max_lyapunov_increase(),
        wall_seconds=wall,
    )

    if write_files:
        outdir = Path(cfg.directory)
        outdir.mkdir(parents=True, exist_ok=True)
        tpath = outdir / cfg.trajectory_csv
        spath = outdir / cfg.summary
        write_trajectory_csv(tpath, traj)
        _write_summary(spath, cfg, summary)
        ppath = None
        if cfg.plot_svg:
            ppath = outdir / cfg.plot_svg
            _write_plot(ppath, traj)
        summary = replace(summary, trajectory_path=tpath, summary_path=spath, plot_path=ppath)
    return summary, traj


# -- spectral reports -----------------------------------------------------


def spectrum_rows(freqs: FrequencySet, which: str = "all") -> list[EquilibriumReport]:
    """Reports for the selected equilibria: 'all', 'down', 'up' or a pattern."""
    p = freqs.p
    if which == "all":
        patterns = enumerate_equilibria(p)
    elif which == "down":
        patterns = [Equilibrium.down(p)]
    elif which == "up":
        patterns = [Equilibrium.up(p)]
    else:
        patterns = [Equilibrium.from_label(which)]
        if patterns[0].p != p:
            raise ConfigError(f"pattern {which!r} has {patterns[0].p} signs for p={p}")
    return [spectrum_at(q, freqs) for q in patterns]


def write_spectrum_csv(path, reports: list[EquilibriumReport]) -> None:
    """One row per equilibrium; eigenvalue re/im pairs live in the last field."""
    rows = ["pattern,class,hyperbolic,n_unstable,max_residual,eigenvalues"]
    for r in reports:
        eigs = ";".join(repr(complex(ell)) for ell in r.eigenvalues)
        rows.append(
            f"{r.pattern.label()},{r.classification.value},{str(r.hyperbolic).lower()},"
            f"{r.n_unstable},{_fmt(r.max_abs_residual)},{eigs}"
        )
    Path(path).write_text("\n".join(rows) + "\n")


def write_basin_csv(path, est: BasinEstimate) -> None:
    rows = ["sample,converged,final_max_z,stopped_early"]
    for o in est.outcomes:
        rows.append(
            f"{o.index},{str(o.converged).lower()},{_fmt(o.final_max_z)},{str(o.stopped_early).lower()}"
        )
    Path(path).write_text("\n".join(rows) + "\n")


def write_schedule_csv(path, sched: ConvergenceSchedule) -> None:
    rows = [
        f"# epsilon = {_fmt(sched.epsilon)}",
        f"# n_bar = {sched.n_bar}",
        "N,t_hit,converged",
    ]
    for e in sched.entries:
        t_hit = _fmt(e.t_hit) if e.t_hit is not None else ""
        rows.append(f"{e.n},{t_hit},{str(e.converged).lower()}")
    Path(path).write_text("\n".join(rows) + "\n")


def fourier_rows(traj: Trajectory, extra_omegas: tuple = ()) -> list[dict]:
    """Closed-form vs numeric averaged coefficients on a free trajectory.

    Covers a(f, +-e_i) and a(g, +-e_i) for every spin plus |a| at any extra
    probe frequencies (closed form 0 off the spectral lines).
    """
    s0 = traj.ensemble_at(0)
    rows = []
    for i in range(traj.p):
        closed = bohr_fourier_closed(s0, i)
        e_i = float(traj.freqs.values[i])
        for comp, omega, ref in (
            ("f", e_i, closed.f_plus),
            ("f", -e_i, closed.f_minus),
            ("g", e_i, closed.g_plus),
            ("g", -e_i, closed.g_minus),
        ):
            est = bohr_fourier_numeric(traj, omega, comp)
            rows.append(
                dict(omega=omega, component=comp, closed=ref, numeric=est,
                     abs_error=abs(est - ref))
            )
    for omega in extra_omegas:
        for comp in ("f", "g"):
            est = bohr_fourier_numeric(traj, float(omega), comp)
            rows.append(
                dict(omega=float(omega), component=comp, closed=0j, numeric=est,
                     abs_error=abs(est))
            )
    return rows


def write_fourier_csv(path, rows: list[dict]) -> None:
    out = ["omega,component,closed_re,closed_im,numeric_re,numeric_im,abs_error"]
    for r in rows:
        out.append(
            f"{_fmt(r['omega'])},{r['component']},{_fmt(r['closed'].real)},"
            f"{_fmt(r['closed'].imag)},{_fmt(r['numeric'].real)},"
            f"{_fmt(r['numeric'].imag)},{_fmt(r['abs_error'])}"
        )
    Path(path).write_text("\n".join(out) + "\n")
