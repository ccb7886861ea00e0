"""Truncated superatom state space, Hamiltonian generators and dissipators.

The basis is ordered ``[G, R_0..R_n, S_0..S_{n-1}, M_th, M]`` with
``n = n_max``. Frequencies are in rad/µs and times in µs throughout; a value
quoted as ``2π × f MHz`` is ``2π·f`` here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidArgument

TWO_PI = 2.0 * math.pi

DEFAULT_C6 = TWO_PI * 1.54e8  # rad/µs · µm^6
DEFAULT_DELTA_T = TWO_PI * 0.08
DEFAULT_GAMMA = TWO_PI * 0.04


@dataclass(frozen=True)
class PhysicalParams:
    """Scalar physics inputs.

    Parameters
    ----------
    n_max : int
        Number of asymmetric singly-excited states kept (``R_1..R_n``).
    sigma : float
        Ensemble RMS radius, µm.
    c6 : float
        Van der Waals coefficient, rad/µs · µm^6.
    delta_T : float
        Thermal Doppler width, rad/µs.
    gamma : float
        Common dephasing rate, rad/µs.
    T : float
        Pulse duration, µs.
    """

    n_max: int = 8
    sigma: float = 4.6
    c6: float = DEFAULT_C6
    delta_T: float = DEFAULT_DELTA_T
    gamma: float = DEFAULT_GAMMA
    T: float = 0.25

    def __post_init__(self):
        for name in ("sigma", "c6", "delta_T", "gamma", "T"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise InvalidArgument(f"{name} must be finite, got {v}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise InvalidArgument(f"n_max must be a positive integer, got {self.n_max}")
        if self.sigma <= 0:
            raise InvalidArgument(f"sigma must be positive, got {self.sigma}")
        if self.T <= 0:
            raise InvalidArgument(f"T must be positive, got {self.T}")
        if self.delta_T < 0 or self.gamma < 0:
            raise InvalidArgument("delta_T and gamma must be non-negative")


@dataclass(frozen=True, eq=False)
class LeakageTables:
    """Couplings and raw shift/rate coefficients for one truncation.

    Parameters
    ----------
    n_max : int
    beta : ndarray, shape (n_max + 1, n_max)
        Row ``j`` couples ``R_j`` to ``S_0..S_{n_max-1}``.
    delta_s_raw, gamma_s_raw : ndarray, shape (n_max,)
        Coefficients multiplied by ``C6 / sigma^6``.
    """

    n_max: int
    beta: np.ndarray
    delta_s_raw: np.ndarray
    gamma_s_raw: np.ndarray

    def __post_init__(self):
        n = self.n_max
        if int(n) != n or n < 1:
            raise InvalidArgument(f"n_max must be a positive integer, got {n}")
        beta = np.array(self.beta, dtype=float)
        ds = np.array(self.delta_s_raw, dtype=float).ravel()
        gs = np.array(self.gamma_s_raw, dtype=float).ravel()
        if beta.shape != (n + 1, n):
            raise InvalidArgument(f"beta must have shape {(n + 1, n)}, got {beta.shape}")
        if ds.shape != (n,) or gs.shape != (n,):
            raise InvalidArgument(f"delta_s_raw and gamma_s_raw need {n} entries")
        if np.any(gs < 0):
            raise InvalidArgument("gamma_s_raw entries must be non-negative")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(ds)) and np.all(np.isfinite(gs))):
            raise InvalidArgument("table entries must be finite")
        for a in (beta, ds, gs):
            a.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "delta_s_raw", ds)
        object.__setattr__(self, "gamma_s_raw", gs)

    def __eq__(self, other):
        if not isinstance(other, LeakageTables):
            return NotImplemented
        return (
            self.n_max == other.n_max
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.delta_s_raw, other.delta_s_raw)
            and np.array_equal(self.gamma_s_raw, other.gamma_s_raw)
        )

    __hash__ = None

    @classmethod
    def bundled(cls) -> LeakageTables:
        """The shipped ``n_max = 8`` table."""
        text = resources.files("superatom").joinpath("data/leakage_nmax8.txt").read_text()
        return parse_tables(text)


def parse_tables(text: str, source: str = "<string>") -> LeakageTables:
    """Parse the leakage-table text format.

    The format is a header ``n_max=<int>``, a line ``delta_s_raw: v0 ...``,
    a line ``gamma_s_raw: v0 ...`` and then ``n_max + 1`` rows of β values.
    Blank lines and ``#`` comments are ignored; values may be separated by
    whitespace or commas.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line))
    if len(rows) < 3:
        raise InvalidArgument(f"{source}: leakage table is incomplete")

    def numbers(lineno, s):
        try:
            return [float(v) for v in s.replace(",", " ").split()]
        except ValueError as exc:
            raise InvalidArgument(f"{source}:{lineno}: {exc}") from None

    lineno, head = rows[0]
    key, _, val = head.partition("=")
    if key.strip() != "n_max" or not val.strip().isdigit():
        raise InvalidArgument(f"{source}:{lineno}: expected 'n_max=<int>', got {head!r}")
    n = int(val)
    vecs = {}
    for (lineno, line), name in zip(rows[1:3], ("delta_s_raw", "gamma_s_raw")):
        key, sep, rest = line.partition(":")
        if not sep or key.strip() != name:
            raise InvalidArgument(f"{source}:{lineno}: expected '{name}: ...'")
        vecs[name] = numbers(lineno, rest)
        if len(vecs[name]) != n:
            raise InvalidArgument(f"{source}:{lineno}: {name} needs {n} values")
    beta_rows = rows[3:]
    if len(beta_rows) != n + 1:
        raise InvalidArgument(f"{source}: expected {n + 1} beta rows, found {len(beta_rows)}")
    beta = []
    for lineno, line in beta_rows:
        r = numbers(lineno, line)
        if len(r) != n:
            raise InvalidArgument(f"{source}:{lineno}: beta row needs {n} values")
        beta.append(r)
    return LeakageTables(n, np.array(beta), np.array(vecs["delta_s_raw"]), np.array(vecs["gamma_s_raw"]))


def read_tables(path: str | Path) -> LeakageTables:
    """Read a leakage-table file."""
    path = Path(path)
    return parse_tables(path.read_text(), source=str(path))


def write_tables(tables: LeakageTables, path: str | Path) -> None:
    """Write ``tables`` in the format accepted by :func:`read_tables`."""
    fmt = lambda v: " ".join(repr(float(x)) for x in v)  # noqa: E731
    lines = [
        f"n_max={tables.n_max}",
        f"delta_s_raw: {fmt(tables.delta_s_raw)}",
        f"gamma_s_raw: {fmt(tables.gamma_s_raw)}",
    ]
    lines += [fmt(row) for row in tables.beta]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class StateSpace:
    """Ordered basis labels of the truncated model."""

    n_max: int
    labels: tuple[str, ...] = field(init=False)
    dim: int = field(init=False)

    def __post_init__(self):
        n = self.n_max
        labels = ["G"] + [f"R{j}" for j in range(n + 1)] + [f"S{k}" for k in range(n)]
        labels += ["Mth", "M"]
        object.__setattr__(self, "labels", tuple(labels))
        object.__setattr__(self, "dim", 2 * n + 4)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @property
    def g(self) -> int:
        return 0

    def r(self, j: int) -> int:
        return 1 + j

    def s(self, k: int) -> int:
        return self.n_max + 2 + k

    @property
    def m_th(self) -> int:
        return 2 * self.n_max + 2

    @property
    def m(self) -> int:
        return 2 * self.n_max + 3

    @property
    def r_indices(self) -> list[int]:
        return [self.r(j) for j in range(self.n_max + 1)]

    @property
    def s_indices(self) -> list[int]:
        return [self.s(k) for k in range(self.n_max)]


def thermal_decay_factor(n_max: int) -> float:
    """Dimensionless decay factor of the last thermal ladder state.

    ``(2/π)^((-1)^n / 2) · n!! / (n-1)!!`` with ``0!! = 1``. Multiply by
    ``delta_T`` for the physical rate.
    """
    if int(n_max) != n_max or n_max < 1:
        raise InvalidArgument(f"n_max must be a positive integer, got {n_max}")
    n = int(n_max)
    dfact = lambda m: math.prod(range(m, 0, -2))  # noqa: E731, empty product is 1
    return (2.0 / math.pi) ** ((-1) ** n / 2.0) * dfact(n) / dfact(n - 1)


def scaled_shifts_and_rates(tables: LeakageTables, params: PhysicalParams) -> tuple[np.ndarray, np.ndarray]:
    """Physical shifts and continuum decay rates of the doubly-excited states.

    Returns
    -------
    delta_s : ndarray
        ``-(C6/σ^6)·|raw|``, rad/µs (non-positive).
    gamma_s : ndarray
        ``(C6/σ^6)·raw``, rad/µs.
    """
    if tables.n_max != params.n_max:
        raise InvalidArgument(f"table n_max {tables.n_max} != params n_max {params.n_max}")
    if params.sigma == 0:
        raise InvalidArgument("sigma must be non-zero")
    scale = params.c6 / params.sigma**6
    return -scale * np.abs(tables.delta_s_raw), scale * tables.gamma_s_raw


def _ket_bra(dim: int, a: int, b: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[a, b] = 1.0
    return m


@dataclass(frozen=True, eq=False)
class SuperatomModel:
    """Generators of the driven, dissipative superatom.

    ``H = h_drift + Ωx·h_x + Ωy·h_y + Ωz·h_z`` with ``h_z = -n_exc``. The
    complex drive ``Ω = Ωx + iΩy`` appears as ``Ω/2·K + Ω*/2·K†``.

    Attributes
    ----------
    jumps : list of (float, ndarray)
        Rates and lowering operators ``|sink><source|``.
    dephasers : list of (float, ndarray)
        Rates and projectors ``|a><a|``.
    """

    space: StateSpace
    h_drift: np.ndarray
    h_x: np.ndarray
    h_y: np.ndarray
    n_exc: np.ndarray
    jumps: tuple
    dephasers: tuple
    dephasing_free: bool
    params: PhysicalParams
    tables: LeakageTables

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def h_z(self) -> np.ndarray:
        return -self.n_exc

    def hamiltonian(self, omega_x: float, omega_y: float = 0.0, omega_z: float = 0.0) -> np.ndarray:
        return self.h_drift + omega_x * self.h_x + omega_y * self.h_y + omega_z * self.h_z

    def lindblad_rhs(self, rho: np.ndarray, omega_x=0.0, omega_y=0.0, omega_z=0.0) -> np.ndarray:
        """Dense reference right-hand side of the master equation."""
        H = self.hamiltonian(omega_x, omega_y, omega_z)
        out = -1j * (H @ rho - rho @ H)
        for rate, L in self.jumps + self.dephasers:
            LdL = L.conj().T @ L
            out += rate * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
        return out

    @cached_property
    def compiled(self) -> dict:
        """Arrays consumed by the compiled integrators.

        Every dissipator is a single matrix unit, so it reduces to a decay
        rate ``g_a`` on its source plus a recycling entry source -> sink.
        """
        d = self.dim
        g = np.zeros(d)
        src, dst, rate = [], [], []
        for r, L in self.jumps + self.dephasers:
            nz = np.argwhere(np.abs(L) > 0)
            if len(nz) != 1 or abs(L[tuple(nz[0])] - 1.0) > 1e-15:
                raise InvalidArgument("dissipators must be single matrix units")
            b, a = nz[0]  # L = |b><a|
            g[a] += r
            src.append(a)
            dst.append(b)
            rate.append(r)
        hc = np.array([self.h_x, self.h_y, self.h_z], dtype=complex)
        return dict(
            H0=np.ascontiguousarray(self.h_drift, dtype=complex),
            Hc=np.ascontiguousarray(hc),
            damp=0.5 * (g[:, None] + g[None, :]),
            rsrc=np.array(src, dtype=np.int64),
            rdst=np.array(dst, dtype=np.int64),
            rrate=np.array(rate, dtype=float),
        )


def build_model(
    params: PhysicalParams | None = None,
    tables: LeakageTables | None = None,
    dephasing_free: bool = False,
) -> SuperatomModel:
    """Assemble the Hamiltonian generators and dissipators.

    Parameters
    ----------
    params : PhysicalParams, optional
        Defaults to ``PhysicalParams()``.
    tables : LeakageTables, optional
        Defaults to the bundled ``n_max = 8`` table.
    dephasing_free : bool
        Drop both sink-targeting jump families; dephasers are kept.
    """
    params = params or PhysicalParams()
    tables = tables or LeakageTables.bundled()
    if tables.n_max != params.n_max:
        raise InvalidArgument(f"table n_max {tables.n_max} != params n_max {params.n_max}")
    sp = StateSpace(params.n_max)
    n, d = sp.n_max, sp.dim
    delta_s, gamma_s = scaled_shifts_and_rates(tables, params)

    K = np.zeros((d, d), dtype=complex)
    K[sp.g, sp.r(0)] = 1.0
    for j in range(n + 1):
        for k in range(n):
            K[sp.r(j), sp.s(k)] = tables.beta[j, k]
    h_x = 0.5 * (K + K.conj().T)
    h_y = 0.5j * (K - K.conj().T)

    h_drift = np.zeros((d, d), dtype=complex)
    for k in range(n):
        h_drift[sp.s(k), sp.s(k)] = -delta_s[k]
    for j in range(1, n + 1):
        h_drift[sp.r(j - 1), sp.r(j)] = h_drift[sp.r(j), sp.r(j - 1)] = -math.sqrt(j) * params.delta_T

    n_exc = np.zeros((d, d), dtype=complex)
    for i in sp.r_indices:
        n_exc[i, i] = 1.0
    for i in sp.s_indices:
        n_exc[i, i] = 2.0

    jumps = []
    if not dephasing_free:
        for k in range(n):
            jumps.append((2.0 * gamma_s[k], _ket_bra(d, sp.m, sp.s(k))))
        rate_th = 2.0 * thermal_decay_factor(n) * params.delta_T
        jumps.append((rate_th, _ket_bra(d, sp.m_th, sp.r(n))))
    dephasers = [(2.0 * params.gamma, _ket_bra(d, i, i)) for i in sp.r_indices]
    dephasers += [(4.0 * params.gamma, _ket_bra(d, i, i)) for i in sp.s_indices]

    for a in (h_drift, h_x, h_y, n_exc):
        a.setflags(write=False)
    return SuperatomModel(
        space=sp,
        h_drift=h_drift,
        h_x=h_x,
        h_y=h_y,
        n_exc=n_exc,
        jumps=tuple(jumps),
        dephasers=tuple(dephasers),
        dephasing_free=bool(dephasing_free),
        params=params,
        tables=tables,
    )
