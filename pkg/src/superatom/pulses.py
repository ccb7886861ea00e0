"""Control-pulse parametrizations and post-filters.

All analytic shapes are built on the sine-squared primary envelope
``Ω_I(t) = A sin²(πt/T)`` and use closed-form derivatives. The complex drive
is ``Ω = Ωx + iΩy``; ``Ωz`` is the detuning channel, entering the
Hamiltonian as ``Ωz·h_z`` with ``h_z = -n_exc``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import savgol_filter

from . import _kernels as K
from .errors import InvalidArgument


class Shape(str, enum.Enum):
    SINE_SQUARED = "SineSquared"
    DETUNED_SINE_SQUARED = "DetunedSineSquared"
    PERTURBATIVE_DRAG = "PerturbativeDrag"
    NON_PERTURBATIVE_DRAG = "NonPerturbativeDrag"
    MULTI_LEVEL_DRAG = "MultiLevelDrag"
    PIECEWISE_CONSTANT = "PiecewiseConstant"


_KIND = {
    Shape.SINE_SQUARED: K.KIND_SINE2,
    Shape.DETUNED_SINE_SQUARED: K.KIND_SINE2,
    Shape.PERTURBATIVE_DRAG: K.KIND_PERT,
    Shape.NON_PERTURBATIVE_DRAG: K.KIND_NONPERT,
    Shape.MULTI_LEVEL_DRAG: K.KIND_MULTI,
}

DRAG_SHAPES = (Shape.PERTURBATIVE_DRAG, Shape.NON_PERTURBATIVE_DRAG, Shape.MULTI_LEVEL_DRAG)


def pi_pulse_amplitude(T: float) -> float:
    """Peak amplitude ``2π/T`` giving ``∫ A sin²(πt/T) dt = π``."""
    if not T > 0:
        raise InvalidArgument(f"T must be positive, got {T}")
    return 2.0 * math.pi / T


@dataclass(frozen=True, eq=False)
class PulseParams:
    """Parameters of one control pulse.

    Parameters
    ----------
    shape : Shape
    A : float, optional
        Primary amplitude, rad/µs. ``None`` means the π-pulse amplitude.
    delta_d : float
        Constant detuning, rad/µs. Ignored by ``SineSquared``.
    alpha, alpha1, alpha2 : float
        DRAG coefficients.
    beta_leak : float
        Coupling of ``R_0`` to the targeted leakage state.
    delta_leak, delta_leak2 : float
        Leakage detunings, rad/µs.
    segments : ndarray, shape (n, 3), optional
        Piecewise-constant ``(Ωx, Ωy, Ωz)`` values.
    edges : ndarray, shape (n + 1,), optional
        Segment boundaries in µs; uniform over ``[0, T]`` when omitted.
    frame : {"diagonal", "phase"}
        Carry ``delta_d`` as ``Ωz`` or as the phase ``e^{iΔ_d t}`` on ``Ω``.
    """

    shape: Shape = Shape.SINE_SQUARED
    A: float | None = None
    delta_d: float = 0.0
    alpha: float = 0.0
    alpha1: float = 0.0
    alpha2: float = 0.0
    beta_leak: float = 0.0
    delta_leak: float = 0.0
    delta_leak2: float = 0.0
    segments: np.ndarray | None = None
    edges: np.ndarray | None = None
    frame: str = "diagonal"

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if self.frame not in ("diagonal", "phase"):
            raise InvalidArgument(f"frame must be 'diagonal' or 'phase', got {self.frame!r}")
        if self.segments is not None:
            seg = np.array(self.segments, dtype=float)
            if seg.ndim != 2 or seg.shape[1] != 3 or len(seg) == 0:
                raise InvalidArgument("segments must have shape (n, 3)")
            seg.setflags(write=False)
            object.__setattr__(self, "segments", seg)
        if self.edges is not None:
            e = np.array(self.edges, dtype=float)
            e.setflags(write=False)
            object.__setattr__(self, "edges", e)

    def with_(self, **kw) -> PulseParams:
        return replace(self, **kw)

    def validate(self, T: float) -> None:
        """Check the coefficients required by ``shape``."""
        if not T > 0:
            raise InvalidArgument(f"T must be positive, got {T}")
        sh = self.shape
        if sh is Shape.PIECEWISE_CONSTANT:
            if self.segments is None:
                raise InvalidArgument("PiecewiseConstant needs segments")
            if not np.all(np.isfinite(self.segments)):
                raise InvalidArgument("segment values must be finite")
            e = self.segment_edges(T)
            if len(e) != len(self.segments) + 1 or np.any(np.diff(e) <= 0):
                raise InvalidArgument("edges must be strictly increasing with n_segments + 1 entries")
            return
        vals = [self.amplitude(T), self.delta_d, self.alpha, self.alpha1, self.alpha2,
                self.beta_leak, self.delta_leak, self.delta_leak2]
        if not all(np.isfinite(v) for v in vals):
            raise InvalidArgument("pulse parameters must be finite")
        if sh in DRAG_SHAPES and self.delta_leak == 0:
            raise InvalidArgument(f"{sh.value} requires a non-zero delta_leak")
        if sh is Shape.NON_PERTURBATIVE_DRAG and self.beta_leak == 0:
            raise InvalidArgument("NonPerturbativeDrag requires a non-zero beta_leak")
        if sh is Shape.MULTI_LEVEL_DRAG and self.delta_leak2 == 0:
            raise InvalidArgument("MultiLevelDrag requires a non-zero delta_leak2")

    def amplitude(self, T: float) -> float:
        return pi_pulse_amplitude(T) if self.A is None else float(self.A)

    def segment_edges(self, T: float) -> np.ndarray:
        if self.edges is not None:
            return self.edges
        return np.linspace(0.0, T, len(self.segments) + 1)

    def kernel_args(self, T: float) -> tuple[int, np.ndarray]:
        """Kind code and parameter vector for the compiled control evaluator."""
        if self.shape is Shape.PIECEWISE_CONSTANT:
            raise InvalidArgument("piecewise-constant pulses are evaluated per segment")
        self.validate(T)
        p = np.zeros(K.P_SIZE)
        p[K.P_T] = T
        p[K.P_A] = self.amplitude(T)
        if self.shape is not Shape.SINE_SQUARED:
            p[K.P_DD] = self.delta_d
        p[K.P_AL] = self.alpha
        p[K.P_AL1] = self.alpha1
        p[K.P_AL2] = self.alpha2
        p[K.P_BL] = self.beta_leak
        p[K.P_DL] = self.delta_leak
        p[K.P_DL2] = self.delta_leak2
        p[K.P_PHASE] = 1.0 if self.frame == "phase" else 0.0
        return _KIND[self.shape], p


@dataclass(frozen=True, eq=False)
class ControlSamples:
    """Control channels on a time grid (µs, rad/µs)."""

    grid: np.ndarray
    omega_x: np.ndarray
    omega_y: np.ndarray
    omega_z: np.ndarray = field(default=None)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        chans = []
        for c in (self.omega_x, self.omega_y, self.omega_z):
            chans.append(np.zeros_like(g) if c is None else np.asarray(c, dtype=float))
        if any(c.shape != g.shape for c in chans) or g.ndim != 1:
            raise InvalidArgument("grid and channels must be 1-D arrays of equal length")
        if len(g) > 1 and np.any(np.diff(g) <= 0):
            raise InvalidArgument("grid must be strictly increasing")
        if not all(np.all(np.isfinite(a)) for a in (g, *chans)):
            raise InvalidArgument("control samples must be finite")
        for name, a in zip(("grid", "omega_x", "omega_y", "omega_z"), (g, *chans)):
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def channels(self) -> np.ndarray:
        """Array of shape ``(n, 3)``."""
        return np.stack([self.omega_x, self.omega_y, self.omega_z], axis=1)


def sample_pulse(p: PulseParams, T: float, grid=None) -> ControlSamples:
    """Evaluate a pulse on ``grid`` (default: 100 points over ``[0, T]``).

    Piecewise-constant pulses use zero-order hold, each segment being
    closed on the left; the final edge takes the last segment's value.
    """
    grid = np.linspace(0.0, T, 100) if grid is None else np.asarray(grid, dtype=float)
    p.validate(T)
    if np.any(grid < -1e-12 * T) or np.any(grid > T * (1 + 1e-12)):
        raise InvalidArgument("grid must lie inside [0, T]")
    if p.shape is Shape.PIECEWISE_CONSTANT:
        e = p.segment_edges(T)
        idx = np.clip(np.searchsorted(e, grid, side="right") - 1, 0, len(p.segments) - 1)
        v = p.segments[idx]
        return ControlSamples(grid, v[:, 0], v[:, 1], v[:, 2])
    kind, vec = p.kernel_args(T)
    out = np.empty((len(grid), 3))
    u = np.empty(3)
    for i, t in enumerate(grid):
        K.controls_at(kind, vec, float(t), u)
        out[i] = u
    return ControlSamples(grid, out[:, 0], out[:, 1], out[:, 2])


def piecewise_from_samples(samples: ControlSamples) -> PulseParams:
    """Zero-order-hold pulse whose segment ``i`` spans ``grid[i]..grid[i+1]``."""
    if len(samples.grid) < 2:
        raise InvalidArgument("need at least two grid points")
    return PulseParams(Shape.PIECEWISE_CONSTANT, segments=samples.channels[:-1], edges=samples.grid)


def samples_from_piecewise(p: PulseParams, T: float) -> ControlSamples:
    """Inverse of :func:`piecewise_from_samples` (last row repeats the last segment)."""
    e = p.segment_edges(T)
    v = np.vstack([p.segments, p.segments[-1:]])
    return ControlSamples(e, v[:, 0], v[:, 1], v[:, 2])


def savitzky_golay(samples: ControlSamples, window: int = 7, order: int = 3) -> ControlSamples:
    """Local least-squares polynomial smoothing of every channel.

    Edges are handled by evaluating the polynomial fitted to the first and
    last ``window`` samples.
    """
    g = samples.grid
    n = len(g)
    if window % 2 != 1 or window <= order:
        raise InvalidArgument("window must be odd and larger than order")
    if window >= n:
        raise InvalidArgument(f"window {window} must be smaller than the sample count {n}")
    dt = np.diff(g)
    if np.max(np.abs(dt - dt.mean())) > 1e-9 * max(abs(dt.mean()), 1e-300):
        raise InvalidArgument("Savitzky-Golay filtering needs a uniform grid")
    f = lambda c: savgol_filter(c, window, order, mode="interp")  # noqa: E731
    return ControlSamples(g, f(samples.omega_x), f(samples.omega_y), f(samples.omega_z))


def write_controls(samples: ControlSamples, path: str | Path) -> None:
    """Write ``t, omega_x, omega_y, omega_z`` rows (µs, rad/µs)."""
    data = np.column_stack([samples.grid, samples.channels])
    np.savetxt(path, data, delimiter=",", header="t,omega_x,omega_y,omega_z", comments="", fmt="%.17g")


def read_controls(path: str | Path) -> ControlSamples:
    """Read a file written by :func:`write_controls`."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().replace(" ", "")
    if header.split(",") != ["t", "omega_x", "omega_y", "omega_z"]:
        raise InvalidArgument(f"{path}: expected header 't,omega_x,omega_y,omega_z'")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise InvalidArgument(f"{path}: {exc}") from None
    if data.shape[1] != 4:
        raise InvalidArgument(f"{path}: expected 4 columns")
    return ControlSamples(data[:, 0], data[:, 1], data[:, 2], data[:, 3])
