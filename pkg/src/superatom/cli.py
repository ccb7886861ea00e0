"""Command-line front end.

Usage::

    superatom simulate --config run.json --out results/
    superatom optimize --config run.json --out results/ --seed 7
    superatom grape | sweep | convergence | dephasing-free ...

Each command writes into the ``--out`` directory a ``summary.txt`` of
``key = value`` lines, ending with the resolved configuration as one JSON
line (``config = {...}``), plus a ``config.json`` copy that re-runs the
same computation. Relative paths inside a configuration are taken
relative to the working directory.

Exit status: 0 success, 1 invalid configuration or arguments, 2 integration
or optimization failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from .config import RunConfig, dump_config, load_config, parse_config, resolve
from .errors import IntegrationFailure, InvalidArgument, OptimizationFailure
from .experiments import (
    MULTILEVEL_SEARCH_INTEGRATOR,
    convergence_scan,
    dephasing_free_study,
    dominant_leakage,
    multilevel_targets,
    run_sweep,
    SweepSpec,
    write_sweep,
)
from .model import LeakageTables, build_model, read_tables
from .optimizer import (
    DEConfig,
    grape_optimize,
    initial_from_pulse,
    leak_target,
    loss,
    optimize_parametrized,
    random_initial,
    write_result,
)
from .propagator import evolve, write_trajectory
from .pulses import (
    DRAG_SHAPES,
    PulseParams,
    Shape,
    read_controls,
    sample_pulse,
    samples_from_piecewise,
    savitzky_golay,
    write_controls,
)

log = logging.getLogger("superatom")

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_IO = 0, 1, 2, 3


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _write_summary(out: Path, cfg: RunConfig, items: dict) -> None:
    lines = [f"{k} = {_fmt(v)}" for k, v in items.items()]
    lines.append(f"seed = {cfg.seed}")
    lines.append("config = " + json.dumps(cfg.raw, sort_keys=True))
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    (out / "config.json").write_text(dump_config(cfg.raw) + "\n")


def _populations(prefix: str, pops: dict) -> dict:
    return {f"{prefix}{k}": v for k, v in pops.items()}


def _model(cfg: RunConfig, dephasing_free: bool | None = None):
    free = cfg.dephasing_free if dephasing_free is None else dephasing_free
    return build_model(cfg.params, cfg.tables, dephasing_free=free)


def _targets(cfg: RunConfig, model, shape: Shape) -> tuple[dict, dict]:
    """DRAG target couplings and the labels they were taken from."""
    if shape not in DRAG_SHAPES:
        return {}, {}
    k = cfg.leak_state
    if k is None:
        base = evolve(model, PulseParams(Shape.SINE_SQUARED), cfg.params.T, cfg.integrator)
        k = int(dominant_leakage(base.final_populations)[1:])
    if not 0 <= k < cfg.params.n_max:
        raise InvalidArgument(f"'pulse.leak_state' S{k} is outside S0..S{cfg.params.n_max - 1}")
    labels = {"leak_state": f"S{k}"}
    if shape is Shape.MULTI_LEVEL_DRAG:
        k2 = cfg.leak_state2
        if k2 is None:
            raise InvalidArgument("MultiLevelDrag needs 'pulse.leak_state2'")
        if not 0 <= k2 < cfg.params.n_max:
            raise InvalidArgument(f"'pulse.leak_state2' S{k2} is outside S0..S{cfg.params.n_max - 1}")
        labels["leak_state2"] = f"S{k2}"
        return multilevel_targets(model, k, k2), labels
    return leak_target(model, k), labels


def _configured_pulse(cfg: RunConfig, model) -> tuple[PulseParams, dict]:
    if cfg.pulse.shape is Shape.PIECEWISE_CONSTANT:
        if cfg.controls_file is None:
            raise InvalidArgument("PiecewiseConstant needs 'pulse.controls_file'")
        s = read_controls(cfg.controls_file)
        return PulseParams(Shape.PIECEWISE_CONSTANT, segments=s.channels[:-1], edges=s.grid), {}
    targets, labels = _targets(cfg, model, cfg.pulse.shape)
    return cfg.pulse.with_(**targets), labels


def cmd_simulate(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    model = _model(cfg)
    pulse, labels = _configured_pulse(cfg, model)
    traj = evolve(model, pulse, cfg.params.T, cfg.integrator)
    write_trajectory(traj, out / "trajectory.csv")
    write_controls(sample_pulse(pulse, cfg.params.T, traj.times), out / "controls.csv")
    _write_summary(out, cfg, {
        "command": "simulate",
        "shape": pulse.shape.value,
        **labels,
        "loss": loss(traj),
        "steps": traj.steps,
        **_populations("population.", traj.final_populations),
    })
    return EXIT_OK


def _de(cfg: RunConfig, threads: int) -> DEConfig:
    if threads <= 1:
        return cfg.de
    return DEConfig(cfg.de.popsize, cfg.de.mutation, cfg.de.recombination, cfg.de.maxiter, cfg.de.tol, threads)


def cmd_optimize(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    model = _model(cfg)
    targets, labels = _targets(cfg, model, cfg.opt_shape)
    res = optimize_parametrized(
        cfg.opt_shape, model, cfg.bounds, _de(cfg, threads), cfg.local, cfg.seed,
        T=cfg.params.T, targets=targets, integrator=cfg.integrator, search_integrator=cfg.search_integrator,
    )
    write_controls(sample_pulse(res.pulse, cfg.params.T, None), out / "controls.csv")
    write_result(res, out / "result.txt", labels)
    _write_summary(out, cfg, {
        "command": "optimize",
        "shape": cfg.opt_shape.value,
        **labels,
        "loss": res.loss,
        "converged": res.converged,
        "n_evals": res.n_evals,
        **{f"param.{k}": v for k, v in res.params.items()},
        **_populations("population.", res.final_populations),
    })
    return EXIT_OK


def cmd_grape(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    model = _model(cfg)
    n = int(cfg.grape["n_segments"])
    init = cfg.grape["init"]
    probe = cfg.grape_problem()
    if init == "pulse":
        pulse, _ = _configured_pulse(cfg, model)
        u0 = initial_from_pulse(pulse, cfg.params.T, n)
    elif init == "random":
        u0 = random_initial(probe, cfg.seed, float(cfg.grape["random_fraction"]))
    else:
        u0 = None
    res = grape_optimize(cfg.grape_problem(u0), model, cfg.integrator, seed=cfg.seed)
    pc = samples_from_piecewise(res.pulse, cfg.params.T)
    write_controls(pc, out / "controls.csv")
    items = {
        "command": "grape",
        "loss": res.loss,
        "converged": res.converged,
        "n_evals": res.n_evals,
        "initial_loss": res.stage_losses["initial"],
        "constraint_violation": probe.violation(res.pulse.segments),
        **_populations("population.", res.final_populations),
    }
    w, o = int(cfg.grape["sg_window"]), int(cfg.grape["sg_order"])
    if w < n:
        smooth = savitzky_golay(res.controls, w, o)
        sg_pulse = PulseParams(Shape.PIECEWISE_CONSTANT, segments=smooth.channels, edges=probe.edges)
        write_controls(samples_from_piecewise(sg_pulse, cfg.params.T), out / "controls_sg.csv")
        sg = evolve(model, sg_pulse, cfg.params.T, cfg.integrator)
        items["sg.R0"] = sg.final_populations["R0"]
    write_result(res, out / "result.txt")
    _write_summary(out, cfg, items)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    spec = SweepSpec(cfg.sweep_T, cfg.sweep_sigma, cfg.sweep_kinds, cfg.params, cfg.seed, cfg.tables,
                     cfg.de, cfg.local, cfg.integrator)
    cells = run_sweep(spec, threads)
    write_sweep(cells, out / "sweep.csv")
    _write_summary(out, cfg, {
        "command": "sweep",
        "cells": len(cells),
        "failed_cells": sum(c.failed for c in cells),
    })
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    tables = [read_tables(p) for p in cfg.convergence_tables]
    base = cfg.tables or LeakageTables.bundled()
    if all(t.n_max != base.n_max for t in tables):
        tables.append(base)
    res = convergence_scan(tables, [float(s) for s in cfg.amplitude_scales], cfg.params, cfg.integrator)
    rows = ["amplitude_scale," + ",".join(f"n_max_{n}" for n in res.curves)]
    for i, s in enumerate(res.amplitude_scales):
        rows.append(f"{s:.12g}," + ",".join(f"{c[i]:.12g}" for c in res.curves.values()))
    (out / "convergence.csv").write_text("\n".join(rows) + "\n")
    _write_summary(out, cfg, {
        "command": "convergence",
        "reference_n_max": res.reference,
        **{f"metric.n_max_{n}": v for n, v in res.metric.items()},
    })
    return EXIT_OK


def cmd_dephasing_free(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    channels = None
    if cfg.leak_state is not None and cfg.leak_state2 is not None:
        channels = (cfg.leak_state, cfg.leak_state2)
    search = cfg.search_integrator
    if cfg.raw["optimizer"]["search_max_steps"] is None:
        search = dataclasses.replace(search, max_steps=MULTILEVEL_SEARCH_INTEGRATOR.max_steps)
    rec = dephasing_free_study(
        cfg.params.T, cfg.params.sigma, params=cfg.params, seed=cfg.seed, channels=channels,
        de=_de(cfg, threads), local=cfg.local, cfg=cfg.integrator, search_cfg=search,
    )
    items = {"command": "dephasing-free",
             **_populations("baseline.", rec.baseline),
             **_populations("multilevel.", rec.multilevel.final_populations),
             **{f"multilevel.param.{k}": v for k, v in rec.multilevel.params.items()}}
    if rec.restored is not None:
        items.update(_populations("restored_baseline.", rec.restored_baseline))
        items.update(_populations("restored.", rec.restored.final_populations))
        items.update({f"restored.param.{k}": v for k, v in rec.restored.params.items()})
    _write_summary(out, cfg, items)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "grape": cmd_grape,
    "sweep": cmd_sweep,
    "convergence": cmd_convergence,
    "dephasing-free": cmd_dephasing_free,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="superatom", description="Rydberg superatom pulse simulation and optimization.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
    ap.add_argument("--out", default="out", help="output directory (created if missing)")
    ap.add_argument("--seed", type=int, help="override optimizer.seed (unsigned 64-bit)")
    ap.add_argument("--threads", type=int, default=1, help="size of the worker pool")
    ap.add_argument("--dephasing-free", action="store_true", default=None,
                    help="drop the decay channels into M and M_th")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise InvalidArgument("--threads must be at least 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise InvalidArgument("--seed must be an unsigned 64-bit integer")
        raw = load_config(args.config) if args.config else parse_config("{}")
        cfg = resolve(raw, seed=args.seed, dephasing_free=args.dephasing_free)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        status = COMMANDS[args.command](cfg, out, args.threads)
        log.info("%s finished in %.1f s", args.command, time.perf_counter() - t0)
        print((out / "summary.txt").read_text(), end="")
        return status
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationFailure, OptimizationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
