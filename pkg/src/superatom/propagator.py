"""Master-equation integration for the superatom model.

The density matrix is evolved directly; each right-hand-side evaluation is a
dense matrix product plus element-wise dissipation (see ``_kernels``).

Two integrators are available through :class:`IntegratorConfig`:

``"dopri5"``
    Adaptive Dormand-Prince 5(4) pair with cubic Hermite dense output.
``"expo"``
    Fourth-order exponential Runge-Kutta (ETDRK4) that propagates the
    diagonal drift and the damping exactly and controls the step by step
    doubling. Its step is limited by accuracy only, which matters when the
    doubly-excited shifts make the equations stiff (large ``C6/σ^6``).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import IntegrationFailure, InvalidArgument
from .model import SuperatomModel
from .pulses import ControlSamples, PulseParams, Shape

_STATUS_TEXT = {
    K.STATUS_MAX_STEPS: "step budget exhausted",
    K.STATUS_STEP_UNDERFLOW: "step size underflow, tolerance not achievable",
    K.STATUS_NONFINITE: "non-finite state encountered",
}

_METHODS = {"dopri5": K.integrate_dopri, "expo": K.integrate_expo}


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    Parameters
    ----------
    rel_tol, abs_tol : float
        Local error tolerances.
    max_steps : int
        Budget of accepted plus rejected steps for one evolution.
    output_points : int
        Size of the uniform output grid over ``[0, T]``.
    method : {"dopri5", "expo"}
    validate : bool
        Check trace, Hermiticity and positivity of every output snapshot.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps: int = 50000
    output_points: int = 100
    method: str = "dopri5"
    validate: bool = True

    def __post_init__(self):
        if self.method not in _METHODS:
            raise InvalidArgument(f"unknown integrator method {self.method!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidArgument("tolerances must be positive")
        if self.max_steps < 1 or self.output_points < 2:
            raise InvalidArgument("max_steps must be >= 1 and output_points >= 2")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Density-matrix snapshots on the output grid."""

    times: np.ndarray
    rho: np.ndarray
    labels: tuple[str, ...]
    steps: int = 0

    @property
    def populations(self) -> np.ndarray:
        """Real diagonal, shape ``(n_times, dim)``."""
        return np.real(np.einsum("tii->ti", self.rho))

    @property
    def final_rho(self) -> np.ndarray:
        return self.rho[-1]

    @property
    def final_populations(self) -> dict[str, float]:
        return dict(zip(self.labels, np.real(np.diag(self.rho[-1])).tolist()))

    def population(self, label: str) -> np.ndarray:
        return self.populations[:, self.labels.index(label)]


def initial_state(model: SuperatomModel) -> np.ndarray:
    rho = np.zeros((model.dim, model.dim), dtype=complex)
    rho[model.space.g, model.space.g] = 1.0
    return rho


def run_kernel(model, Y0, t0, t1, t_out, kind, p, cfg, *, sens=None, adjoint=False,
               h0=0.0, max_steps=None):
    """Integrate a state stack over ``[t0, t1]`` with fixed pulse arguments.

    With ``adjoint=True`` the Heisenberg-picture generator is used; the
    caller integrates it over reversed time with ``t0 < t1`` measured
    backwards from the end of the segment. Raises
    :class:`IntegrationFailure` on any solver failure.
    """
    c = model.compiled
    rsrc, rdst = (c["rdst"], c["rsrc"]) if adjoint else (c["rsrc"], c["rdst"])
    sens = np.zeros(0, dtype=np.int64) if sens is None else np.asarray(sens, dtype=np.int64)
    budget = cfg.max_steps if max_steps is None else max_steps
    snaps, Y, status, steps, t_reached, h = _METHODS[cfg.method](
        Y0, float(t0), float(t1), np.asarray(t_out, dtype=float), c["H0"], c["Hc"], c["damp"],
        rsrc, rdst, c["rrate"], sens, kind, p, -1 if adjoint else 1,
        cfg.rel_tol, cfg.abs_tol, budget, h0,
    )
    if status != K.STATUS_OK:
        raise IntegrationFailure(_STATUS_TEXT[status], t_reached)
    return snaps, Y, steps, h


def _const_args(values) -> np.ndarray:
    p = np.zeros(K.P_SIZE)
    p[K.P_CX], p[K.P_CY], p[K.P_CZ] = values
    return p


def evolve(model: SuperatomModel, pulse: PulseParams | ControlSamples, T: float,
           cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate the master equation from ``|G><G|`` over ``[0, T]``.

    Analytic pulses are evaluated continuously inside the solver.
    Piecewise-constant pulses, and :class:`ControlSamples` (read as a
    zero-order hold on their grid), restart the integration at every
    segment boundary.
    """
    cfg = cfg or IntegratorConfig()
    if not T > 0:
        raise InvalidArgument(f"T must be positive, got {T}")
    if isinstance(pulse, ControlSamples):
        edges = pulse.grid if pulse.grid[-1] >= T else np.append(pulse.grid, T)
        pulse = PulseParams(Shape.PIECEWISE_CONSTANT, segments=pulse.channels[: len(edges) - 1], edges=edges)
    pulse.validate(T)
    t_out = np.linspace(0.0, T, cfg.output_points)
    Y0 = initial_state(model)[None]

    if pulse.shape is not Shape.PIECEWISE_CONSTANT:
        kind, p = pulse.kernel_args(T)
        snaps, _, steps, _ = run_kernel(model, Y0, 0.0, T, t_out, kind, p, cfg)
    else:
        edges = pulse.segment_edges(T)
        if abs(edges[0]) > 1e-12 * T or abs(edges[-1] - T) > 1e-9 * T:
            raise InvalidArgument("segment edges must span [0, T]")
        snaps = np.zeros((len(t_out), model.dim, model.dim), dtype=complex)
        Y, h, steps = Y0, 0.0, 0
        lo = 0
        for i, vals in enumerate(pulse.segments):
            a, b = edges[i], (T if i == len(pulse.segments) - 1 else edges[i + 1])
            hi = lo
            while hi < len(t_out) and t_out[hi] <= b:
                hi += 1
            part, Y, n, h = run_kernel(
                model, Y, a, b, t_out[lo:hi], K.KIND_CONST, _const_args(vals), cfg,
                h0=h, max_steps=cfg.max_steps - steps,
            )
            snaps[lo:hi] = part
            steps += n
            lo = hi
    traj = Trajectory(t_out, snaps, model.space.labels, steps)
    if cfg.validate:
        check_trajectory(traj)
    return traj


def check_trajectory(traj: Trajectory, trace_tol=1e-8, herm_tol=1e-10, eig_tol=-1e-7) -> None:
    """Raise :class:`IntegrationFailure` if any snapshot is not a valid state."""
    rho = traj.rho
    tr = np.real(np.einsum("tii->t", rho))
    herm = np.max(np.abs(rho - np.conj(np.swapaxes(rho, 1, 2))), axis=(1, 2))
    eig = np.linalg.eigvalsh(0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))).min(axis=1)
    for name, bad in (
        ("trace deviates from 1", np.abs(tr - 1) > trace_tol),
        ("snapshot not Hermitian", herm > herm_tol),
        ("negative eigenvalue", eig < eig_tol),
    ):
        if np.any(bad):
            i = int(np.argmax(bad))
            raise IntegrationFailure(f"invalid state: {name}", float(traj.times[i]))


def total_rydberg_population(traj: Trajectory) -> float:
    """``1 - P_G`` at the final time."""
    return 1.0 - float(np.real(traj.final_rho[0, 0]))


def write_trajectory(traj: Trajectory, path: str | Path) -> None:
    """Write ``time`` plus one population column per state label."""
    data = np.column_stack([traj.times, traj.populations])
    np.savetxt(path, data, delimiter=",", header=",".join(("time",) + traj.labels), comments="",
               fmt="%.12g")


def final_state(model: SuperatomModel, pulse: PulseParams, T: float,
                cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Density matrix at ``T`` for an analytic pulse, without snapshots or checks."""
    cfg = cfg or IntegratorConfig()
    kind, p = pulse.kernel_args(T)
    _, Y, _, _ = run_kernel(model, initial_state(model)[None], 0.0, T, np.zeros(0), kind, p, cfg)
    return Y[0]
