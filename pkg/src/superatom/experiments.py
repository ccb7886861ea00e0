"""Parameter sweeps, basis-convergence scans and model ablations.

Every routine here is a composition of :func:`~superatom.propagator.evolve`
and :func:`~superatom.optimizer.optimize_parametrized`; cells of a sweep are
independent and can run in a process pool.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import IntegrationFailure, InvalidArgument, OptimizationFailure
from .model import LeakageTables, PhysicalParams, build_model
from .optimizer import (
    FAST_INTEGRATOR,
    SEARCH_INTEGRATOR,
    DEConfig,
    LocalConfig,
    OptimizationResult,
    leak_target,
    optimize_parametrized,
)
from .propagator import IntegratorConfig, evolve
from .pulses import PulseParams, Shape

log = logging.getLogger(__name__)

# threshold columns of the sweep output
M_THRESHOLD = 0.054
R0_THRESHOLD = 0.898
S3_THRESHOLD = 0.001

SWEEP_KINDS = (Shape.SINE_SQUARED, Shape.NON_PERTURBATIVE_DRAG)


def dominant_leakage(final_populations: Mapping[str, float]) -> str:
    """Label of the most populated doubly-excited state.

    Ties go to the lowest index.
    """
    keys = sorted((k for k in final_populations if k.startswith("S") and k[1:].isdigit()),
                  key=lambda k: int(k[1:]))
    if not keys:
        raise InvalidArgument("no S_k populations supplied")
    vals = [final_populations[k] for k in keys]
    return keys[int(np.argmax(vals))]


def rydberg_leakage(final_populations: Mapping[str, float]) -> float:
    """``P(R_1..R_n) + P(M_th)``: population lost to thermal dephasing."""
    return sum(v for k, v in final_populations.items()
               if (k.startswith("R") and k != "R0") or k == "Mth")


@dataclass(frozen=True)
class SweepSpec:
    """Grid of pulse durations and ensemble radii.

    Parameters
    ----------
    T_values : sequence of float
        Pulse durations, µs.
    sigma_values : sequence of float
        Ensemble radii, µm.
    kinds : tuple of Shape
        Subset of ``SineSquared`` and ``NonPerturbativeDrag``.
    params : PhysicalParams
        Template; ``T`` and ``sigma`` are replaced per cell.
    seed : int
    tables : LeakageTables, optional
    de, local : optimizer settings of the DRAG stage
    integrator : IntegratorConfig
    """

    T_values: tuple[float, ...]
    sigma_values: tuple[float, ...]
    kinds: tuple[Shape, ...] = SWEEP_KINDS
    params: PhysicalParams = field(default_factory=PhysicalParams)
    seed: int = 0
    tables: LeakageTables | None = None
    de: DEConfig = field(default_factory=DEConfig)
    local: LocalConfig = field(default_factory=LocalConfig)
    integrator: IntegratorConfig = FAST_INTEGRATOR

    def __post_init__(self):
        T = tuple(float(t) for t in self.T_values)
        s = tuple(float(v) for v in self.sigma_values)
        if not T or not s:
            raise InvalidArgument("sweep grids must be non-empty")
        if any(not v > 0 for v in T + s):
            raise InvalidArgument("T and sigma values must be positive")
        kinds = tuple(Shape(k) for k in self.kinds)
        if not kinds or any(k not in SWEEP_KINDS for k in kinds):
            raise InvalidArgument(f"sweep kinds must be a subset of {[k.value for k in SWEEP_KINDS]}")
        object.__setattr__(self, "T_values", T)
        object.__setattr__(self, "sigma_values", s)
        object.__setattr__(self, "kinds", kinds)


@dataclass
class SweepCell:
    """Results at one ``(T, σ)`` grid point.

    ``populations`` maps pulse kind to final populations; ``params`` holds the
    optimized DRAG parameters and leakage target.
    """

    T: float
    sigma: float
    populations: dict[str, dict[str, float]] = field(default_factory=dict)
    dominant: str = ""
    params: dict[str, float] = field(default_factory=dict)
    failed: bool = False
    error: str = ""

    def thresholds(self, kind: str) -> dict[str, bool]:
        p = self.populations[kind]
        return {
            "M_below": p["M"] < M_THRESHOLD,
            "R0_above": p["R0"] > R0_THRESHOLD,
            "S3_below": p.get("S3", 0.0) < S3_THRESHOLD,
        }


def cell_seed(seed: int, i: int, j: int) -> int:
    """Deterministic per-cell seed derived from the sweep seed and grid indices."""
    return int(np.random.SeedSequence([int(seed), i, j]).generate_state(1)[0])


def _run_cell(spec: SweepSpec, i: int, j: int) -> SweepCell:
    T, sigma = spec.T_values[i], spec.sigma_values[j]
    cell = SweepCell(T, sigma)
    try:
        model = build_model(dataclasses.replace(spec.params, T=T, sigma=sigma), spec.tables)
        base = evolve(model, PulseParams(Shape.SINE_SQUARED), T, spec.integrator)
        cell.dominant = dominant_leakage(base.final_populations)
        if Shape.SINE_SQUARED in spec.kinds:
            cell.populations[Shape.SINE_SQUARED.value] = base.final_populations
        if Shape.NON_PERTURBATIVE_DRAG in spec.kinds:
            k = int(cell.dominant[1:])
            targets = leak_target(model, k)
            res = optimize_parametrized(
                Shape.NON_PERTURBATIVE_DRAG, model, None, spec.de, spec.local,
                cell_seed(spec.seed, i, j), T=T, targets=targets, integrator=spec.integrator,
            )
            cell.populations[Shape.NON_PERTURBATIVE_DRAG.value] = res.final_populations
            cell.params = {**res.params, **targets}
    except (IntegrationFailure, OptimizationFailure) as exc:
        log.warning("sweep cell T=%g sigma=%g failed: %s", T, sigma, exc)
        cell.failed, cell.error = True, str(exc)
    return cell


def _run_cell_star(args):
    return _run_cell(*args)


def run_sweep(spec: SweepSpec, threads: int = 1) -> list[SweepCell]:
    """Evaluate every grid cell; results are ordered T-major.

    A failing cell is marked ``failed`` and the sweep continues. With
    ``threads > 1`` cells run in a process pool; results do not depend on
    the pool size.
    """
    jobs = [(spec, i, j) for i in range(len(spec.T_values)) for j in range(len(spec.sigma_values))]
    if threads <= 1 or len(jobs) == 1:
        return [_run_cell(*a) for a in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_cell_star, jobs))


def write_sweep(cells: Sequence[SweepCell], path: str | Path, labels: Sequence[str] | None = None) -> None:
    """One CSV row per ``(cell, pulse kind)``; failed cells get one row with ``failed=true``."""
    if labels is None:
        labels = next((tuple(p) for c in cells for p in c.populations.values()), ())
    param_keys = sorted({k for c in cells for k in c.params})
    head = ["T", "sigma", "pulse", *labels, "dominant_leakage", "M_below", "R0_above",
            "S3_below", "failed", *param_keys]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for c in cells:
            if c.failed:
                w.writerow([c.T, c.sigma, "", *[""] * len(labels), c.dominant, "", "", "", "true",
                            *[""] * len(param_keys)])
                continue
            for kind, pops in c.populations.items():
                flags = c.thresholds(kind)
                params = [repr(c.params[k]) if kind != Shape.SINE_SQUARED.value and k in c.params else ""
                          for k in param_keys]
                w.writerow([c.T, c.sigma, kind, *[repr(pops[k]) for k in labels], c.dominant,
                            *[str(v).lower() for v in flags.values()], "false", *params])


@dataclass
class ConvergenceResult:
    """Total Rydberg population per basis size and amplitude scale.

    ``metric[n]`` is the mean absolute difference from the largest basis.
    """

    amplitude_scales: np.ndarray
    curves: dict[int, np.ndarray]
    metric: dict[int, float]
    reference: int


def convergence_scan(
    table_set: Sequence[LeakageTables] | Mapping[int, LeakageTables],
    amplitude_scales: Sequence[float],
    params: PhysicalParams | None = None,
    cfg: IntegratorConfig = FAST_INTEGRATOR,
) -> ConvergenceResult:
    """Sine-squared runs over basis sizes and amplitudes.

    Parameters
    ----------
    table_set : sequence of LeakageTables or mapping ``n_max -> tables``
        A mapping label must agree with the table dimensions.
    amplitude_scales : sequence of float
        Multiples of the π-pulse amplitude.
    params : PhysicalParams, optional
        Template; ``n_max`` is taken from each table.
    """
    items = list(table_set.items()) if isinstance(table_set, Mapping) else [(t.n_max, t) for t in table_set]
    if len(items) < 2:
        raise InvalidArgument("convergence scan needs at least two tables")
    for label, tab in items:
        if label != tab.n_max:
            raise InvalidArgument(f"table labelled n_max={label} has dimensions of n_max={tab.n_max}")
    if len({label for label, _ in items}) != len(items):
        raise InvalidArgument("each n_max may be supplied only once")
    scales = np.asarray(amplitude_scales, dtype=float)
    if scales.ndim != 1 or scales.size == 0:
        raise InvalidArgument("amplitude_scales must be a non-empty list")
    params = params or PhysicalParams()
    curves = {}
    for n, tab in sorted(items):
        model = build_model(dataclasses.replace(params, n_max=n), tab)
        amp = 2.0 * np.pi / params.T
        curves[n] = np.array([
            1.0 - evolve(model, PulseParams(Shape.SINE_SQUARED, A=s * amp), params.T, cfg).final_populations["G"]
            for s in scales
        ])
    ref = max(curves)
    metric = {n: float(np.mean(np.abs(c - curves[ref]))) for n, c in curves.items()}
    return ConvergenceResult(scales, curves, metric, ref)


def high_n_scenarios(c6: float, T: float, sigma: float, params: PhysicalParams | None = None,
                     cfg: IntegratorConfig = FAST_INTEGRATOR) -> dict[str, float]:
    """Final populations of the sine-squared π pulse with a substituted ``C6``."""
    params = dataclasses.replace(params or PhysicalParams(), c6=c6, T=T, sigma=sigma)
    return evolve(build_model(params), PulseParams(Shape.SINE_SQUARED), T, cfg).final_populations


@dataclass
class DephasingFreeRecord:
    """Sine-squared and multi-level DRAG results with and without sinks."""

    baseline: dict[str, float]
    multilevel: OptimizationResult
    restored_baseline: dict[str, float] | None = None
    restored: OptimizationResult | None = None
    targets: dict[str, float] = field(default_factory=dict)


def multilevel_targets(model, first: int, second: int) -> dict[str, float]:
    """Leakage detunings of two channels for ``MultiLevelDrag``."""
    t1, t2 = leak_target(model, first), leak_target(model, second)
    return dict(beta_leak=t1["beta_leak"], delta_leak=t1["delta_leak"], delta_leak2=t2["delta_leak"])


# good multi-level candidates need < 100 steps; the cap makes stiff corners of the box cheap to reject
MULTILEVEL_SEARCH_INTEGRATOR = dataclasses.replace(SEARCH_INTEGRATOR, max_steps=400)


def dephasing_free_study(
    T: float = 0.25,
    sigma: float = 4.6,
    *,
    params: PhysicalParams | None = None,
    seed: int = 0,
    channels: tuple[int, int] | None = None,
    restore: bool = True,
    de: DEConfig | None = None,
    local: LocalConfig | None = None,
    cfg: IntegratorConfig = FAST_INTEGRATOR,
    search_cfg: IntegratorConfig = MULTILEVEL_SEARCH_INTEGRATOR,
) -> DephasingFreeRecord:
    """Compare sine-squared and optimized multi-level DRAG without sinks.

    The two DRAG channels default to the two most populated ``S_k`` after
    the sine-squared pulse in the full model. With ``restore`` the
    multi-level pulse is also optimized in the full model.
    """
    params = dataclasses.replace(params or PhysicalParams(), T=T, sigma=sigma)
    free = build_model(params, dephasing_free=True)
    full = build_model(params)
    sine = PulseParams(Shape.SINE_SQUARED)
    full_base = evolve(full, sine, T, cfg).final_populations
    if channels is None:
        s = {int(k[1:]): v for k, v in full_base.items() if k.startswith("S")}
        channels = tuple(sorted(s, key=lambda k: (-s[k], k))[:2])
    targets = multilevel_targets(free, *channels)

    def opt(model):
        return optimize_parametrized(Shape.MULTI_LEVEL_DRAG, model, None, de, local, seed, T=T,
                                     targets=targets, integrator=cfg, search_integrator=search_cfg)

    record = DephasingFreeRecord(
        baseline=evolve(free, sine, T, cfg).final_populations,
        multilevel=opt(free),
        targets=targets,
    )
    if restore:
        record.restored_baseline = full_base
        record.restored = opt(full)
    return record
