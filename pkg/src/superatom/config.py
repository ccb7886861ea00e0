"""Run configuration files.

Configurations are JSON objects. Every frequency is written in ``2π·MHz``
(key suffix ``_2pi_MHz``) and converted to rad/µs once, in
:func:`resolve`. Unknown keys are rejected and missing keys take the
defaults in :data:`DEFAULTS`.

Example::

    {
      "physical": {"sigma_um": 4.6, "T_us": 0.25},
      "pulse": {"shape": "SineSquared"},
      "integrator": {"method": "dopri5"}
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import InvalidArgument
from .model import TWO_PI, LeakageTables, PhysicalParams, read_tables
from .optimizer import PARAM_NAMES, Bounds, DEConfig, GrapeProblem, LocalConfig
from .propagator import IntegratorConfig
from .pulses import PulseParams, Shape

DEFAULTS: dict[str, Any] = {
    "physical": {
        "n_max": 8,
        "sigma_um": 4.6,
        "c6_2pi_MHz_um6": 1.54e8,
        "delta_T_2pi_MHz": 0.08,
        "gamma_2pi_MHz": 0.04,
        "T_us": 0.25,
        "dephasing_free": False,
    },
    "pulse": {
        "shape": "SineSquared",
        "A_2pi_MHz": None,  # None: π-pulse amplitude
        "delta_d_2pi_MHz": 0.0,
        "alpha": 0.0,
        "alpha1": 0.0,
        "alpha2": 0.0,
        "leak_state": None,  # e.g. "S3"; None: dominant channel of the sine-squared pulse
        "leak_state2": None,
        "frame": "diagonal",
        "controls_file": None,  # PiecewiseConstant input, as written by write_controls
    },
    "optimizer": {
        "seed": 0,
        "shape": "NonPerturbativeDrag",
        "bounds": None,  # {"A_2pi_MHz": [lo, hi], "delta_d_2pi_MHz": [lo, hi], "alpha": [lo, hi], ...}
        "search_rel_tol": 1e-6,
        "search_abs_tol": 1e-8,
        "search_max_steps": None,  # null: integrator.max_steps (dephasing-free search: 400)
        "de": {"popsize": 15, "mutation": [0.5, 1.0], "recombination": 0.7, "maxiter": 200, "tol": 0.01},
        "local": {"rel_step": 1e-6, "gtol": 1e-9, "ftol": 1e-9, "maxiter": 500},
        "grape": {
            "n_segments": 50,
            "slew_2pi_MHz": 0.5,  # None disables the slew limit
            "endpoint_zero": True,
            "init": "pulse",  # "pulse" | "random" | "zero"
            "random_fraction": 0.25,
            "maxiter": 500,
            "constraint_tol": 1e-8,
            "sg_window": 7,
            "sg_order": 3,
        },
    },
    "integrator": {
        "method": "expo",
        "rel_tol": 1e-8,
        "abs_tol": 1e-10,
        "max_steps": 50000,
        "output_points": 100,
    },
    "sweep": {
        "T_us": [0.25],
        "sigma_um": [4.6],
        "kinds": ["SineSquared", "NonPerturbativeDrag"],
    },
    "convergence": {
        "tables": [],
        "amplitude_scales": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
    },
    "tables": None,
}

_PARAM_KEYS = {"A": "A_2pi_MHz", "delta_d": "delta_d_2pi_MHz"}


def _merge(defaults: dict, user: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise InvalidArgument(f"unknown configuration key '{where}'")
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                raise InvalidArgument(f"configuration key '{where}' must be an object")
            out[key] = _merge(defaults[key], val, where)
        else:
            out[key] = val
    return out


def parse_config(text: str, source: str = "<string>") -> dict:
    """Parse JSON text and fill in defaults; raises :class:`InvalidArgument`."""
    try:
        user = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"{source}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(user, dict):
        raise InvalidArgument(f"{source}: top level must be an object")
    return _merge(DEFAULTS, user, "")


def load_config(path: str | Path) -> dict:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def dump_config(raw: dict) -> str:
    return json.dumps(raw, indent=2, sort_keys=True)


def _num(section: dict, key: str, where: str, positive: bool = False) -> float:
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidArgument(f"'{where}.{key}' must be a number, got {v!r}")
    if positive and not v > 0:
        raise InvalidArgument(f"'{where}.{key}' must be positive, got {v}")
    return float(v)


def _bool(section: dict, key: str, where: str) -> bool:
    v = section[key]
    if not isinstance(v, bool):
        raise InvalidArgument(f"'{where}.{key}' must be true or false, got {v!r}")
    return v


def _state_index(v, where: str) -> int | None:
    if v is None:
        return None
    if not (isinstance(v, str) and v.startswith("S") and v[1:].isdigit()):
        raise InvalidArgument(f"'{where}' must name a doubly-excited state such as 'S3', got {v!r}")
    return int(v[1:])


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Configuration converted to internal units (rad/µs, µs, µm)."""

    raw: dict
    params: PhysicalParams
    dephasing_free: bool
    tables: LeakageTables | None
    pulse: PulseParams
    leak_state: int | None
    leak_state2: int | None
    controls_file: str | None
    seed: int
    opt_shape: Shape
    bounds: Bounds | None
    de: DEConfig
    local: LocalConfig
    integrator: IntegratorConfig
    search_integrator: IntegratorConfig
    grape: dict
    sweep_T: tuple[float, ...]
    sweep_sigma: tuple[float, ...]
    sweep_kinds: tuple[Shape, ...]
    convergence_tables: tuple[str, ...]
    amplitude_scales: tuple[float, ...]

    def grape_problem(self, initial=None) -> GrapeProblem:
        g = self.grape
        slew = None if g["slew_2pi_MHz"] is None else TWO_PI * float(g["slew_2pi_MHz"])
        return GrapeProblem(
            T=self.params.T,
            n_segments=int(g["n_segments"]),
            slew=slew,
            endpoint_zero=bool(g["endpoint_zero"]),
            initial=initial,
            maxiter=int(g["maxiter"]),
            constraint_tol=float(g["constraint_tol"]),
        )


def resolve(raw: dict, *, seed: int | None = None, dephasing_free: bool | None = None) -> RunConfig:
    """Validate a merged configuration and convert it to internal units.

    ``seed`` and ``dephasing_free`` override the file; the overrides are
    written back into ``raw`` so that the echoed configuration reproduces
    the run.
    """
    raw = copy.deepcopy(raw)
    if seed is not None:
        raw["optimizer"]["seed"] = int(seed)
    if dephasing_free is not None:
        raw["physical"]["dephasing_free"] = bool(dephasing_free)

    ph = raw["physical"]
    n_max = ph["n_max"]
    if isinstance(n_max, bool) or not isinstance(n_max, int) or n_max < 1:
        raise InvalidArgument(f"'physical.n_max' must be a positive integer, got {n_max!r}")
    params = PhysicalParams(
        n_max=n_max,
        sigma=_num(ph, "sigma_um", "physical", positive=True),
        c6=TWO_PI * _num(ph, "c6_2pi_MHz_um6", "physical", positive=True),
        delta_T=TWO_PI * _num(ph, "delta_T_2pi_MHz", "physical"),
        gamma=TWO_PI * _num(ph, "gamma_2pi_MHz", "physical"),
        T=_num(ph, "T_us", "physical", positive=True),
    )
    dfree = _bool(ph, "dephasing_free", "physical")
    tables = None if raw["tables"] is None else read_tables(raw["tables"])
    if tables is not None and tables.n_max != n_max:
        raise InvalidArgument(f"'tables' has n_max={tables.n_max} but 'physical.n_max' is {n_max}")
    if tables is None and n_max != 8:
        raise InvalidArgument("'physical.n_max' other than 8 needs a 'tables' file")

    pu = raw["pulse"]
    try:
        shape = Shape(pu["shape"])
    except ValueError:
        raise InvalidArgument(f"'pulse.shape' must be one of {[s.value for s in Shape]}") from None
    A = None if pu["A_2pi_MHz"] is None else TWO_PI * _num(pu, "A_2pi_MHz", "pulse")
    pulse = PulseParams(
        shape,
        A=A,
        delta_d=TWO_PI * _num(pu, "delta_d_2pi_MHz", "pulse"),
        alpha=_num(pu, "alpha", "pulse"),
        alpha1=_num(pu, "alpha1", "pulse"),
        alpha2=_num(pu, "alpha2", "pulse"),
        frame=pu["frame"],
    )

    op = raw["optimizer"]
    s = op["seed"]
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
        raise InvalidArgument(f"'optimizer.seed' must be an unsigned 64-bit integer, got {s!r}")
    try:
        opt_shape = Shape(op["shape"])
    except ValueError:
        raise InvalidArgument(f"'optimizer.shape' must be one of {[k.value for k in PARAM_NAMES]}") from None
    if opt_shape not in PARAM_NAMES:
        raise InvalidArgument(f"'optimizer.shape' must be one of {[k.value for k in PARAM_NAMES]}")
    bounds = None
    if op["bounds"] is not None:
        b = op["bounds"]
        names = PARAM_NAMES[opt_shape]
        keys = [_PARAM_KEYS.get(n, n) for n in names]
        extra = set(b) - set(keys)
        if extra:
            raise InvalidArgument(f"unknown configuration key 'optimizer.bounds.{sorted(extra)[0]}'")
        default = Bounds.default(opt_shape, params.T)
        lo, hi = list(default.lower), list(default.upper)
        for i, (n, k) in enumerate(zip(names, keys)):
            if k in b:
                pair = b[k]
                if not (isinstance(pair, list) and len(pair) == 2):
                    raise InvalidArgument(f"'optimizer.bounds.{k}' must be [lower, upper]")
                f = TWO_PI if k.endswith("_2pi_MHz") else 1.0
                lo[i], hi[i] = f * float(pair[0]), f * float(pair[1])
        bounds = Bounds(names, tuple(lo), tuple(hi))
    de = op["de"]
    de_cfg = DEConfig(popsize=int(de["popsize"]), mutation=tuple(de["mutation"]),
                      recombination=float(de["recombination"]), maxiter=int(de["maxiter"]),
                      tol=float(de["tol"]))
    lc = op["local"]
    local_cfg = LocalConfig(rel_step=float(lc["rel_step"]), gtol=float(lc["gtol"]),
                            ftol=float(lc["ftol"]), maxiter=int(lc["maxiter"]))
    g = op["grape"]
    if g["init"] not in ("pulse", "random", "zero"):
        raise InvalidArgument("'optimizer.grape.init' must be 'pulse', 'random' or 'zero'")

    it = raw["integrator"]
    integ = IntegratorConfig(
        rel_tol=_num(it, "rel_tol", "integrator", positive=True),
        abs_tol=_num(it, "abs_tol", "integrator", positive=True),
        max_steps=int(it["max_steps"]),
        output_points=int(it["output_points"]),
        method=it["method"],
    )
    search = IntegratorConfig(
        rel_tol=_num(op, "search_rel_tol", "optimizer", positive=True),
        abs_tol=_num(op, "search_abs_tol", "optimizer", positive=True),
        max_steps=integ.max_steps if op["search_max_steps"] is None
        else int(_num(op, "search_max_steps", "optimizer", positive=True)),
        method=integ.method,
    )

    sw = raw["sweep"]
    for key in ("T_us", "sigma_um"):
        if not sw[key] or any(isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0 for v in sw[key]):
            raise InvalidArgument(f"'sweep.{key}' must be a non-empty list of positive numbers")
    try:
        kinds = tuple(Shape(k) for k in sw["kinds"])
    except ValueError:
        raise InvalidArgument("'sweep.kinds' entries must be pulse shape names") from None

    cv = raw["convergence"]
    return RunConfig(
        raw=raw,
        params=params,
        dephasing_free=dfree,
        tables=tables,
        pulse=pulse,
        leak_state=_state_index(pu["leak_state"], "pulse.leak_state"),
        leak_state2=_state_index(pu["leak_state2"], "pulse.leak_state2"),
        controls_file=pu["controls_file"],
        seed=s,
        opt_shape=opt_shape,
        bounds=bounds,
        de=de_cfg,
        local=local_cfg,
        integrator=integ,
        search_integrator=search,
        grape=dict(g),
        sweep_T=tuple(float(v) for v in sw["T_us"]),
        sweep_sigma=tuple(float(v) for v in sw["sigma_um"]),
        sweep_kinds=kinds,
        convergence_tables=tuple(str(p) for p in cv["tables"]),
        amplitude_scales=tuple(float(v) for v in cv["amplitude_scales"]),
    )


def pulse_to_section(pulse: PulseParams, leak_state: str | None = None, leak_state2: str | None = None) -> dict:
    """Inverse conversion of a parametrized pulse into a ``pulse`` section."""
    return {
        "shape": pulse.shape.value,
        "A_2pi_MHz": None if pulse.A is None else pulse.A / TWO_PI,
        "delta_d_2pi_MHz": pulse.delta_d / TWO_PI,
        "alpha": pulse.alpha,
        "alpha1": pulse.alpha1,
        "alpha2": pulse.alpha2,
        "leak_state": leak_state,
        "leak_state2": leak_state2,
        "frame": pulse.frame,
        "controls_file": None,
    }

