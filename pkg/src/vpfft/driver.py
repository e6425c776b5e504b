"""Time stepping, load programs, classical/improved comparisons and reports.

A run drives the macroscopic strain ``E(t) = eps_appl(t) * direction`` in
uniform increments and records iteration counts, residuals and wall time of
every increment.
"""
import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import material as M
from . import microstructure as MS
from . import spectral as S

CSV_HEADER = ["step", "time_s", "eps_appl", "ig_mode", "nr_iters", "cg_iters",
              "res_i0", "res_final", "wall_ms"]


def pure_shear_direction():
    """``(sqrt3/2)(e_x e_x - e_y e_y)``: unit equivalent strain, deviatoric."""
    d = np.zeros(6)
    d[0] = np.sqrt(3.0) / 2.0
    d[1] = -np.sqrt(3.0) / 2.0
    return d


@dataclass
class LoadProgram:
    eps_appl_final: float
    strain_rate: float = 0.01
    n_steps: int = 100
    direction: np.ndarray = field(default_factory=pure_shear_direction)

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=float)
        if self.direction.shape != (6,):
            raise ValueError("direction must be a Mandel 6-vector")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.strain_rate <= 0:
            raise ValueError("strain_rate must be positive")
        if self.eps_appl_final <= 0:
            raise ValueError("eps_appl_final must be positive")

    @property
    def dt(self):
        return self.eps_appl_final / (self.strain_rate * self.n_steps)

    def eps_appl(self, step):
        return self.eps_appl_final * step / self.n_steps

    def macro_strain(self, step):
        return self.eps_appl(step) * self.direction


FERRITE = dict(E=206.824e9, nu=0.3, gamma0_dot=1e-3, m=0.05, sigma0=425e6)
MARTENSITE = dict(E=206.824e9, nu=0.3, gamma0_dot=1e-3, m=0.05, sigma0=1180e6)

# name -> (h ferrite, h martensite, final applied strain)
PRESETS = {
    "hardening": (940e6, 1740e6, 0.05),
    "perfect": (0.0, 0.0, 0.05),
    "softening": (-940e6, -1740e6, 0.01),
}


def _preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def preset_catalog(name):
    """Two-phase catalog: 0 ferrite, 1 martensite."""
    h_f, h_m, _ = _preset(name)
    return MS.PhaseCatalog(
        {0: M.MaterialParams(h=h_f, **FERRITE), 1: M.MaterialParams(h=h_m, **MARTENSITE)},
        {0: "ferrite", 1: "martensite"},
    )


def preset_load(name, n_steps=100, strain_rate=0.01, eps_final=None):
    _, _, eps = _preset(name)
    return LoadProgram(eps if eps_final is None else eps_final, strain_rate, n_steps)


@dataclass
class RunConfig:
    """Everything a run needs.

    The microstructure is either an in-memory ``grid`` or a ``micro`` path
    read with ``format``; ``crop`` takes the top-left ``crop x crop`` section.
    ``theta = 1`` is Backward Euler, anything in ``[0, 1)`` the trapezoidal
    scheme.
    """

    catalog: MS.PhaseCatalog
    load: LoadProgram
    solver: S.SolverConfig = field(default_factory=S.SolverConfig)
    grid: MS.PhaseGrid | None = None
    micro: str | None = None
    format: str = "ascii-grid"
    crop: int | None = None
    scheme: str = "be"
    theta: float = 1.0
    repetitions: int = 1
    out_dir: str | None = None
    backend: str | None = None

    def __post_init__(self):
        if self.scheme not in ("be", "trapz"):
            raise ValueError(f"scheme must be 'be' or 'trapz', got {self.scheme!r}")
        if self.scheme == "be":
            self.theta = 1.0
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.grid is None and self.micro is None:
            raise ValueError("a microstructure grid or file is required")

    def phase_grid(self):
        grid = self.grid
        if grid is None:
            with open(self.micro, "rb") as fh:
                grid = MS.load_grid(fh, self.format)
        if self.crop:
            grid = grid.crop(self.crop)
        return grid

    def normalizer(self):
        """Stress scale of the residual: the largest initial yield stress."""
        return max(float(p.sigma0) for p in self.catalog.params.values())

    def echo(self):
        return {
            "micro": self.micro or "<in-memory grid>",
            "format": self.format,
            "crop": self.crop,
            "scheme": self.scheme,
            "theta": self.theta,
            "eps_final": self.load.eps_appl_final,
            "rate": self.load.strain_rate,
            "steps": self.load.n_steps,
            "dt": self.load.dt,
            "newton_tol": self.solver.newton_tol,
            "newton_max": self.solver.newton_max,
            "cg_tol": self.solver.cg_tol,
            "repetitions": self.repetitions,
        }


@dataclass
class StepRecord:
    step: int
    time_s: float
    eps_appl: float
    ig_mode: str
    nr_iters: int
    cg_iters: int
    res_i0: float
    res_final: float
    wall_ms: float
    residuals: list = field(default_factory=list, repr=False)

    def row(self):
        return [self.step, repr(self.time_s), repr(self.eps_appl), self.ig_mode, self.nr_iters,
                self.cg_iters, f"{self.res_i0:.6e}", f"{self.res_final:.6e}", f"{self.wall_ms:.3f}"]


class StepFailure(S.SolverError):
    """A solver or constitutive failure, tagged with the step it happened in."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass
class RunReport:
    ig_mode: str
    records: list = field(default_factory=list)
    complete: bool = True
    message: str = ""
    config: dict = field(default_factory=dict)
    fields: S.FieldGrid | None = field(default=None, repr=False)
    rep_wall_s: list = field(default_factory=list)

    @property
    def total_nr_iters(self):
        return int(sum(r.nr_iters for r in self.records))

    @property
    def total_cg_iters(self):
        return int(sum(r.cg_iters for r in self.records))

    @property
    def avg_nr_iters(self):
        return self.total_nr_iters / len(self.records) if self.records else 0.0

    @property
    def cumulative_nr_iters(self):
        return np.cumsum([r.nr_iters for r in self.records], dtype=int)

    @property
    def wall_s(self):
        """Solver wall time, averaged over repetitions."""
        if self.rep_wall_s:
            return float(np.mean(self.rep_wall_s))
        return sum(r.wall_ms for r in self.records) / 1e3

    def summary(self):
        return {
            "ig_mode": self.ig_mode,
            "complete": self.complete,
            "steps": len(self.records),
            "total_nr_iters": self.total_nr_iters,
            "avg_nr_iters": round(self.avg_nr_iters, 6),
            "total_cg_iters": self.total_cg_iters,
            "wall_s": round(self.wall_s, 6),
        }


def _simulate(config, grid, params, ig_mode):
    load = config.load
    solver = replace(config.solver, ig_mode=ig_mode)
    projection = S.Projection(*grid.shape)
    fields = S.FieldGrid.initial(grid.shape, params)
    report = RunReport(ig_mode, config=config.echo())
    norm = config.normalizer()
    for step in range(1, load.n_steps + 1):
        try:
            fields, log = S.newton_increment(
                fields, projection, params, load.macro_strain(step), load.dt, solver,
                theta=config.theta, normalizer=norm, backend=config.backend,
            )
        except S.PixelConstitutiveError as exc:
            if isinstance(exc.cause, M.NonPositiveYieldError):
                report.complete = False
                report.message = f"stopped at step {step}: {exc}"
                break
            raise StepFailure(step, exc) from exc
        except S.SolverError as exc:
            raise StepFailure(step, exc) from exc
        report.records.append(StepRecord(
            step=step,
            time_s=step * load.dt,
            eps_appl=load.eps_appl(step),
            ig_mode=ig_mode,
            nr_iters=log.nr_iters,
            cg_iters=int(sum(log.cg_iters)),
            res_i0=log.residuals[0],
            res_final=log.residuals[-1],
            wall_ms=log.wall_time * 1e3,
            residuals=list(log.residuals),
        ))
    report.fields = fields
    return report


def run(config, ig_mode=None):
    """Run the load program; repetitions only refine the wall-time figures."""
    ig_mode = ig_mode or config.solver.ig_mode
    grid = config.phase_grid()
    params = config.catalog.per_pixel(grid)
    reports = [_simulate(config, grid, params, ig_mode) for _ in range(config.repetitions)]
    report = reports[0]
    report.rep_wall_s = [sum(r.wall_ms for r in rep.records) / 1e3 for rep in reports]
    for i, rec in enumerate(report.records):
        rec.wall_ms = float(np.mean([rep.records[i].wall_ms for rep in reports]))
    return report


@dataclass
class Comparison:
    classical: RunReport
    improved: RunReport

    @property
    def iteration_reduction(self):
        c = self.classical.total_nr_iters
        return 1.0 - self.improved.total_nr_iters / c if c else 0.0

    @property
    def time_reduction(self):
        c = self.classical.wall_s
        return 1.0 - self.improved.wall_s / c if c else 0.0

    @property
    def records(self):
        return self.classical.records + self.improved.records

    def summary(self):
        out = {f"classical.{k}": v for k, v in self.classical.summary().items()}
        out.update({f"improved.{k}": v for k, v in self.improved.summary().items()})
        out["iteration_reduction_pct"] = round(100.0 * self.iteration_reduction, 3)
        out["time_reduction_pct"] = round(100.0 * self.time_reduction, 3)
        return out


def compare(config):
    """Classical and improved runs that differ only in the initial guess."""
    return Comparison(run(config, "classical"), run(config, "improved"))


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())


def write_summary(summary, config, path):
    lines = [f"{k} = {v}" for k, v in summary.items()]
    lines += [f"config.{k} = {v}" for k, v in config.items()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_reports(report, out_dir):
    """Write ``steps.csv`` and ``summary.txt`` for a :class:`RunReport` or
    :class:`Comparison`; returns the two paths."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "steps.csv")
        txt_path = os.path.join(out_dir, "summary.txt")
        write_csv(report.records, csv_path)
        config = report.classical.config if isinstance(report, Comparison) else report.config
        write_summary(report.summary(), config, txt_path)
    except OSError as exc:
        raise OSError(f"cannot write reports to {out_dir}: {exc}") from exc
    return csv_path, txt_path
