"""Visco-plastic FFT micromechanics with an improved Newton initial guess."""
from .driver import (Comparison, LoadProgram, RunConfig, RunReport, StepRecord, compare,
                     emit_reports, preset_catalog, preset_load, run)
from .kernels import BACKEND
from .material import MaterialParams, PointState
from .microstructure import PhaseCatalog, PhaseGrid, load_grid, synth_inclusion
from .spectral import FieldGrid, Projection, SolverConfig, newton_increment

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Comparison", "FieldGrid", "LoadProgram", "MaterialParams", "PhaseCatalog",
    "PhaseGrid", "PointState", "Projection", "RunConfig", "RunReport", "SolverConfig",
    "StepRecord", "compare", "emit_reports", "load_grid", "newton_increment",
    "preset_catalog", "preset_load", "run", "synth_inclusion",
]
