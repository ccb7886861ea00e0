"""Pulse optimization: two-stage parametrized search and constrained GRAPE.

The figure of merit is the transfer loss ``1 - <R_0|ρ(T)|R_0>``.

Parametrized shapes are optimized by differential evolution followed by a
bounded quasi-Newton refinement (L-BFGS-B with central finite differences).
GRAPE optimizes piecewise-constant ``(Ωx, Ωy, Ωz)`` segments with SLSQP
under amplitude, slew and endpoint constraints, using exact adjoint
gradients: one forward sweep carrying first-order control sensitivities of
each segment, and one backward sweep of the Heisenberg-picture observable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import Bounds as _ScipyBounds
from scipy.optimize import LinearConstraint, differential_evolution, minimize

from . import _kernels as K
from .errors import IntegrationFailure, InvalidArgument, OptimizationFailure
from .model import TWO_PI, SuperatomModel, scaled_shifts_and_rates
from .propagator import (
    IntegratorConfig,
    Trajectory,
    evolve,
    final_state,
    initial_state,
    run_kernel,
)
from .pulses import ControlSamples, PulseParams, Shape, sample_pulse

log = logging.getLogger(__name__)

# accuracy-limited stepping keeps thousands of objective calls affordable
FAST_INTEGRATOR = IntegratorConfig(method="expo")
# the global search only ranks candidates, so 1e-6 accuracy is ample there
SEARCH_INTEGRATOR = IntegratorConfig(method="expo", rel_tol=1e-6, abs_tol=1e-8)

PARAM_NAMES = {
    Shape.DETUNED_SINE_SQUARED: ("A", "delta_d"),
    Shape.PERTURBATIVE_DRAG: ("A", "delta_d", "alpha"),
    Shape.NON_PERTURBATIVE_DRAG: ("A", "delta_d", "alpha"),
    Shape.MULTI_LEVEL_DRAG: ("A", "delta_d", "alpha", "alpha1", "alpha2"),
}


def loss(traj: Trajectory | np.ndarray, target: int = 1) -> float:
    """Transfer loss ``1 - <R_0|ρ_final|R_0>``.

    Accepts a trajectory or a final density matrix.
    """
    rho = traj.final_rho if isinstance(traj, Trajectory) else np.asarray(traj)
    return 1.0 - float(np.real(rho[target, target]))


@dataclass(frozen=True)
class Bounds:
    """Per-parameter box limits."""

    names: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if not self.names or not (len(self.names) == len(self.lower) == len(self.upper)):
            raise InvalidArgument("bounds must be non-empty and of matching length")
        if any(not (lo <= hi) for lo, hi in zip(self.lower, self.upper)):
            raise InvalidArgument("every lower bound must not exceed its upper bound")

    @classmethod
    def default(cls, shape: Shape | str, T: float) -> Bounds:
        """Default search box.

        ``A``, ``α`` and ``α1`` lie in ``2π·[-3/T, 3/T]`` and ``Δ_d`` in
        ``2π·[-5, 5]``. ``α2`` scales ``Ω''/(δ_1 δ_2)``; at ``|α2| = 1``
        that term is already more than twice the amplitude limit for
        typical leakage detunings, so ``α2`` is kept in ``[-1, 1]``.
        """
        shape = Shape(shape)
        if shape not in PARAM_NAMES:
            raise InvalidArgument(f"{shape.value} has no optimizable parameters")
        names = PARAM_NAMES[shape]
        amp = TWO_PI * 3.0 / T
        half = {"delta_d": TWO_PI * 5.0, "alpha2": 1.0}
        return cls(names, tuple(-half.get(n, amp) for n in names), tuple(half.get(n, amp) for n in names))

    def as_list(self) -> list[tuple[float, float]]:
        return list(zip(self.lower, self.upper))


@dataclass(frozen=True)
class DEConfig:
    """Differential-evolution settings (stage 1)."""

    popsize: int = 15
    mutation: tuple[float, float] = (0.5, 1.0)
    recombination: float = 0.7
    maxiter: int = 200
    tol: float = 0.01
    workers: int = 1


@dataclass(frozen=True)
class LocalConfig:
    """Quasi-Newton refinement settings (stage 2)."""

    rel_step: float = 1e-6
    gtol: float = 1e-9
    ftol: float = 1e-9
    maxiter: int = 500


@dataclass
class OptimizationResult:
    """Outcome of one optimization run.

    ``loss`` and ``final_populations`` always come from a fresh, validated
    evolution of the returned pulse.
    """

    pulse: PulseParams
    loss: float
    final_populations: dict[str, float]
    n_evals: int
    seed: int | None
    converged: bool
    params: dict[str, float] = field(default_factory=dict)
    controls: ControlSamples | None = None
    stage_losses: dict[str, float] = field(default_factory=dict)
    message: str = ""


def leak_target(model: SuperatomModel, k: int) -> dict[str, float]:
    """DRAG coupling and detuning targeting ``S_k``."""
    delta_s, _ = scaled_shifts_and_rates(model.tables, model.params)
    return dict(beta_leak=float(model.tables.beta[0, k]), delta_leak=float(delta_s[k]))


def make_pulse(shape: Shape | str, x, targets: dict[str, float] | None = None) -> PulseParams:
    """Pulse for parameter vector ``x`` ordered as :data:`PARAM_NAMES`."""
    shape = Shape(shape)
    kw = dict(zip(PARAM_NAMES[shape], (float(v) for v in x)))
    return PulseParams(shape, **kw, **(targets or {}))


class _ParamObjective:
    """Picklable loss of a parametrized pulse; failed integrations score 1."""

    def __init__(self, model, shape, targets, T, cfg):
        self.model, self.shape, self.targets, self.T, self.cfg = model, shape, targets, T, cfg
        self.n_evals = 0
        self.n_failed = 0

    def __call__(self, x) -> float:
        self.n_evals += 1
        try:
            rho = final_state(self.model, make_pulse(self.shape, x, self.targets), self.T, self.cfg)
        except IntegrationFailure:
            self.n_failed += 1
            return 1.0
        return loss(rho)


def optimize_parametrized(
    shape: Shape | str,
    model: SuperatomModel,
    bounds: Bounds | None = None,
    global_cfg: DEConfig | None = None,
    local_cfg: LocalConfig | None = None,
    seed: int | None = 0,
    *,
    T: float | None = None,
    targets: dict[str, float] | None = None,
    integrator: IntegratorConfig = FAST_INTEGRATOR,
    search_integrator: IntegratorConfig = SEARCH_INTEGRATOR,
) -> OptimizationResult:
    """Two-stage optimization of a parametrized pulse.

    Parameters
    ----------
    shape : Shape
        One of the keys of :data:`PARAM_NAMES`.
    model : SuperatomModel
    bounds : Bounds, optional
        Defaults to :meth:`Bounds.default`.
    global_cfg, local_cfg : DEConfig, LocalConfig, optional
    seed : int, optional
        Seed of the differential-evolution RNG.
    T : float, optional
        Pulse duration; defaults to ``model.params.T``.
    targets : dict, optional
        ``beta_leak``, ``delta_leak`` (and ``delta_leak2``) of DRAG shapes.
    integrator : IntegratorConfig
        Used by the local stage; the reported loss is recomputed with the
        same settings and full validation.
    search_integrator : IntegratorConfig
        Used by the differential-evolution stage.
    """
    shape = Shape(shape)
    if shape not in PARAM_NAMES:
        raise InvalidArgument(f"{shape.value} cannot be optimized parametrically")
    T = model.params.T if T is None else T
    bounds = bounds or Bounds.default(shape, T)
    if bounds.names != PARAM_NAMES[shape]:
        raise InvalidArgument(f"bounds must cover {PARAM_NAMES[shape]}")
    gcfg = global_cfg or DEConfig()
    lcfg = local_cfg or LocalConfig()
    targets = dict(targets or {})
    # fail fast on a bad target before launching thousands of evaluations
    make_pulse(shape, [0.5 * (lo + hi) for lo, hi in bounds.as_list()], targets).validate(T)

    obj = _ParamObjective(model, shape, targets, T, search_integrator)
    de = differential_evolution(
        obj,
        bounds.as_list(),
        strategy="rand1bin",
        popsize=gcfg.popsize,
        mutation=gcfg.mutation,
        recombination=gcfg.recombination,
        maxiter=gcfg.maxiter,
        tol=gcfg.tol,
        seed=np.random.default_rng(seed),
        polish=False,
        updating="deferred",
        workers=gcfg.workers,
    )
    n_evals = de.nfev
    if obj.n_failed >= max(obj.n_evals, 1) and gcfg.workers == 1:
        raise OptimizationFailure("every objective evaluation failed to integrate")
    x1 = np.asarray(de.x)
    local_obj = _ParamObjective(model, shape, targets, T, integrator)
    f1 = local_obj(x1)
    loc = minimize(
        local_obj,
        x1,
        method="L-BFGS-B",
        jac="3-point",
        bounds=bounds.as_list(),
        options=dict(
            gtol=lcfg.gtol,
            ftol=lcfg.ftol,
            maxiter=lcfg.maxiter,
            finite_diff_rel_step=lcfg.rel_step,
        ),
    )
    n_evals += local_obj.n_evals
    x2, f2 = np.asarray(loc.x), float(loc.fun)
    best = x2 if f2 <= f1 else x1

    pulse = make_pulse(shape, best, targets)
    traj = evolve(model, pulse, T, integrator)
    return OptimizationResult(
        pulse=pulse,
        loss=loss(traj),
        final_populations=traj.final_populations,
        n_evals=n_evals,
        seed=seed,
        converged=bool(loc.success),
        params=dict(zip(PARAM_NAMES[shape], map(float, best))),
        stage_losses={"global": f1, "local": f2},
        message=str(loc.message),
    )


def finite_diff_gradient(objective: Callable[[np.ndarray], float], point, step) -> np.ndarray:
    """Central-difference gradient; ``step`` is a scalar or per-coordinate array."""
    x = np.asarray(point, dtype=float)
    h = np.broadcast_to(np.asarray(step, dtype=float), x.shape)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h.flat[i]
        g.flat[i] = (objective(x + e) - objective(x - e)) / (2.0 * h.flat[i])
    return g


# ---------------------------------------------------------------- GRAPE


@dataclass(frozen=True, eq=False)
class GrapeProblem:
    """Piecewise-constant control problem.

    Parameters
    ----------
    T : float
        Pulse duration, µs.
    n_segments : int
    lower, upper : tuple of 3 floats, optional
        Amplitude bounds for ``(Ωx, Ωy, Ωz)``; default ``2π·[-3/T, 3/T]``
        for the drive and ``2π·[-5, 5]`` for the detuning.
    slew : float or None
        Maximum change between consecutive segments per channel, rad/µs.
        ``None`` disables the slew constraint.
    endpoint_zero : bool
        Force the first and last ``Ωx``, ``Ωy`` segments to zero.
    initial : ndarray, shape (n_segments, 3), optional
        Initial guess; zero when omitted.
    maxiter : int
    constraint_tol : float
        Feasibility tolerance for reporting, and SLSQP's ``ftol``.
    """

    T: float
    n_segments: int = 50
    lower: tuple[float, float, float] | None = None
    upper: tuple[float, float, float] | None = None
    slew: float | None = TWO_PI * 0.5
    endpoint_zero: bool = True
    initial: np.ndarray | None = None
    maxiter: int = 500
    constraint_tol: float = 1e-8

    def __post_init__(self):
        if not self.T > 0 or self.n_segments < 2:
            raise InvalidArgument("need T > 0 and at least two segments")
        amp = TWO_PI * 3.0 / self.T
        if self.lower is None:
            object.__setattr__(self, "lower", (-amp, -amp, -TWO_PI * 5.0))
        if self.upper is None:
            object.__setattr__(self, "upper", (amp, amp, TWO_PI * 5.0))
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise InvalidArgument("infeasible amplitude bounds")
        if self.endpoint_zero and any(
            not (self.lower[c] <= 0.0 <= self.upper[c]) for c in (0, 1)
        ):
            raise InvalidArgument("endpoint constraint needs 0 inside the drive bounds")
        if self.slew is not None and self.slew < 0:
            raise InvalidArgument("slew limit must be non-negative")
        init = np.zeros((self.n_segments, 3)) if self.initial is None else np.array(self.initial, float)
        if init.shape != (self.n_segments, 3):
            raise InvalidArgument(f"initial guess must have shape {(self.n_segments, 3)}")
        object.__setattr__(self, "initial", init)

    @property
    def n_params(self) -> int:
        return 3 * self.n_segments

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_segments + 1)

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-variable bounds on the ``(n_segments, 3)`` layout, flattened."""
        lo = np.tile(np.asarray(self.lower, float), (self.n_segments, 1))
        hi = np.tile(np.asarray(self.upper, float), (self.n_segments, 1))
        if self.endpoint_zero:
            for i in (0, -1):
                lo[i, :2] = 0.0
                hi[i, :2] = 0.0
        return lo.ravel(), hi.ravel()

    def slew_matrix(self) -> np.ndarray:
        """Rows give ``u[i+1, c] - u[i, c]`` on the flattened layout."""
        n = self.n_segments
        D = np.zeros((3 * (n - 1), 3 * n))
        r = 0
        for c in range(3):
            for i in range(n - 1):
                D[r, 3 * (i + 1) + c] = 1.0
                D[r, 3 * i + c] = -1.0
                r += 1
        return D

    def violation(self, u: np.ndarray) -> float:
        """Largest constraint violation of segment values ``u``."""
        x = np.asarray(u, float).ravel()
        lo, hi = self.box()
        v = max(0.0, float(np.max(lo - x)), float(np.max(x - hi)))
        if self.slew is not None:
            v = max(v, float(np.max(np.abs(self.slew_matrix() @ x))) - self.slew)
        return v

    def project(self, u: np.ndarray) -> np.ndarray:
        """Closest feasible point in the Euclidean norm."""
        lo, hi = self.box()
        raw = np.asarray(u, float).ravel()
        x0 = np.clip(raw, lo, hi)
        if self.slew is None or self.violation(x0) <= 0.0:
            return x0.reshape(self.n_segments, 3)
        # channels decouple; solve each small QP in slew units from a feasible start
        n, s = self.n_segments, self.slew
        D = np.diff(np.eye(n), axis=0)
        x = x0.copy()
        start = _repair(x0, self)
        for c in range(3):
            y0, lo_c, hi_c = raw[c::3] / s, lo[c::3] / s, hi[c::3] / s
            res = minimize(
                lambda y: 0.5 * np.sum((y - y0) ** 2),
                start[c::3] / s,
                jac=lambda y: y - y0,
                method="SLSQP",
                bounds=_ScipyBounds(lo_c, hi_c),
                constraints=[LinearConstraint(D, -1.0, 1.0)],
                options=dict(maxiter=500, ftol=1e-14),
            )
            x[c::3] = res.x * s
        x = _repair(np.clip(x, lo, hi), self)
        if self.violation(x) > 1e-9:
            raise InvalidArgument("could not project the initial guess onto the constraints")
        return x.reshape(self.n_segments, 3)


def _repair(x: np.ndarray, prob: GrapeProblem) -> np.ndarray:
    # remove round-off slew violations left by the QP solver
    if prob.slew is None:
        return x
    u = x.reshape(prob.n_segments, 3).copy()
    lo, hi = (a.reshape(prob.n_segments, 3) for a in prob.box())
    for _ in range(3):
        for i in range(1, prob.n_segments):
            u[i] = np.clip(u[i], u[i - 1] - prob.slew, u[i - 1] + prob.slew)
        for i in range(prob.n_segments - 2, -1, -1):
            u[i] = np.clip(u[i], u[i + 1] - prob.slew, u[i + 1] + prob.slew)
        u = np.clip(u, lo, hi)
    return u.ravel()


def initial_from_pulse(pulse: PulseParams, T: float, n_segments: int) -> np.ndarray:
    """Sample a pulse at segment midpoints, shape ``(n_segments, 3)``."""
    mid = (np.arange(n_segments) + 0.5) * T / n_segments
    return sample_pulse(pulse, T, mid).channels


class GrapeObjective:
    """Loss and exact gradient of piecewise-constant controls.

    Parameters
    ----------
    model : SuperatomModel
    problem : GrapeProblem
    cfg : IntegratorConfig
    """

    def __init__(self, model: SuperatomModel, problem: GrapeProblem, cfg: IntegratorConfig = FAST_INTEGRATOR):
        self.model, self.problem, self.cfg = model, problem, cfg
        self.dt = np.diff(problem.edges)
        self.n_evals = 0
        self.n_grads = 0
        self._target = model.space.r(0)

    def _args(self, v):
        p = np.zeros(K.P_SIZE)
        p[K.P_CX], p[K.P_CY], p[K.P_CZ] = v
        return p

    def __call__(self, u) -> float:
        u = np.asarray(u, float).reshape(self.problem.n_segments, 3)
        self.n_evals += 1
        Y = initial_state(self.model)[None]
        h = 0.0
        empty = np.zeros(0)
        for k in range(len(u)):
            _, Y, _, h = run_kernel(self.model, Y, 0.0, self.dt[k], empty, K.KIND_CONST,
                                    self._args(u[k]), self.cfg, h0=h)
        return loss(Y[0], self._target)

    def gradient(self, u) -> tuple[float, np.ndarray]:
        """Loss and its gradient with respect to the segment values."""
        u = np.asarray(u, float).reshape(self.problem.n_segments, 3)
        self.n_grads += 1
        n, d = len(u), self.model.dim
        empty = np.zeros(0)
        sens = np.arange(3)
        Y = np.zeros((4, d, d), dtype=complex)
        Y[0] = initial_state(self.model)
        xis = np.empty((n, 3, d, d), dtype=complex)
        h = 0.0
        for k in range(n):
            Y[1:] = 0.0
            _, Y, _, h = run_kernel(self.model, Y, 0.0, self.dt[k], empty, K.KIND_CONST,
                                    self._args(u[k]), self.cfg, sens=sens, h0=h)
            xis[k] = Y[1:]
        f = loss(Y[0], self._target)
        lam = np.zeros((1, d, d), dtype=complex)
        lam[0, self._target, self._target] = 1.0
        g = np.empty((n, 3))
        h = 0.0
        for k in range(n - 1, -1, -1):
            g[k] = -np.real(np.einsum("ij,cji->c", lam[0], xis[k]))
            _, lam, _, h = run_kernel(self.model, lam, 0.0, self.dt[k], empty, K.KIND_CONST,
                                      self._args(u[k]), self.cfg, adjoint=True, h0=h)
        return f, g.ravel()


def grape_optimize(
    problem: GrapeProblem,
    model: SuperatomModel,
    cfg: IntegratorConfig = FAST_INTEGRATOR,
    seed: int | None = None,
) -> OptimizationResult:
    """Minimize the loss over segment values with SLSQP and adjoint gradients.

    Returns the best feasible point seen, so the reported loss never exceeds
    that of the projected initial guess.
    """
    u0 = problem.project(problem.initial).ravel()
    lo, hi = problem.box()
    # scale variables to O(1) so SLSQP's quadratic model is well conditioned
    scale = np.maximum(np.maximum(np.abs(lo), np.abs(hi)), 1e-12)
    obj = GrapeObjective(model, problem, cfg)
    best = dict(x=u0.copy(), f=obj(u0))
    f_init = best["f"]
    cache = {}

    def record(u, f):
        if f < best["f"] and problem.violation(u) <= problem.constraint_tol:
            best["x"], best["f"] = u.copy(), f

    def fun(z):
        u = z * scale
        key = u.tobytes()
        if key not in cache:
            try:
                cache.clear()
                cache[key] = obj(u)
            except IntegrationFailure:
                return 1.0
            record(u, cache[key])
        return cache[key]

    def jac(z):
        u = z * scale
        f, g = obj.gradient(u)
        record(u, f)
        return g * scale

    frozen = lo == hi
    cons = []
    if problem.slew is not None:
        D = problem.slew_matrix() * scale[None, :]
        cons.append(LinearConstraint(D, -problem.slew, problem.slew))
    if np.all(frozen):
        res = None
    else:
        res = minimize(
            fun,
            u0 / scale,
            jac=jac,
            method="SLSQP",
            bounds=_ScipyBounds(lo / scale, hi / scale),
            constraints=cons,
            options=dict(maxiter=problem.maxiter, ftol=problem.constraint_tol),
        )
        u_end = np.clip(res.x * scale, lo, hi)
        u_end = _repair(u_end, problem)
        try:
            record(u_end, obj(u_end))
        except IntegrationFailure:
            pass

    u = best["x"].reshape(problem.n_segments, 3)
    pulse = PulseParams(Shape.PIECEWISE_CONSTANT, segments=u, edges=problem.edges)
    traj = evolve(model, pulse, problem.T, cfg)
    mid = 0.5 * (problem.edges[1:] + problem.edges[:-1])
    return OptimizationResult(
        pulse=pulse,
        loss=loss(traj),
        final_populations=traj.final_populations,
        n_evals=obj.n_evals + obj.n_grads,
        seed=seed,
        converged=bool(res.success) if res is not None else True,
        controls=ControlSamples(mid, u[:, 0], u[:, 1], u[:, 2]),
        stage_losses=dict(initial=f_init),
        message="feasible set is a single point" if res is None else str(res.message),
    )


def random_initial(problem: GrapeProblem, seed: int | None, fraction: float = 0.25) -> np.ndarray:
    """Uniform random segment values within ``fraction`` of the bounds."""
    rng = np.random.default_rng(seed)
    lo, hi = (a.reshape(problem.n_segments, 3) for a in problem.box())
    mid = 0.5 * (lo + hi)
    return mid + fraction * (rng.random(lo.shape) - 0.5) * (hi - lo)


def write_result(result: OptimizationResult, path: str | Path, extra: dict | None = None) -> None:
    """Key-value export of a result (``key = value`` per line)."""
    lines = [
        f"shape = {result.pulse.shape.value}",
        f"loss = {result.loss:.12g}",
        f"n_evals = {result.n_evals}",
        f"seed = {result.seed}",
        f"converged = {str(result.converged).lower()}",
    ]
    lines += [f"param.{k} = {v:.12g}" for k, v in result.params.items()]
    lines += [f"population.{k} = {v:.12g}" for k, v in result.final_populations.items()]
    lines += [f"stage.{k} = {v:.12g}" for k, v in result.stage_losses.items()]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_result(path: str | Path) -> dict[str, str]:
    """Parse a key-value export into a dict of strings."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line and not line.lstrip().startswith("#"):
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out
