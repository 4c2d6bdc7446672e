"""Experiment harness: scenario configs, Monte Carlo sweeps and CSV output."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .beamform import LinkBudget, dbm_to_watts, db_to_linear, linear_to_db
from .channel import RicianParams, spawn_rng
from .errors import ConfigError, NumericalError
from .geometry import ArrayLayout, Orientation, ScenarioGeometry, single_irs_geometry
from .rotation import PsoConfig
from .solver import Scheme, SchemeKind, distance_product, solve_ao_pso, solve_los

__all__ = [
    "AXES",
    "CSV_HEADER",
    "PRESETS",
    "ExperimentSpec",
    "ResultRow",
    "default_geometry",
    "parse_config",
    "load_config",
    "run_experiment",
    "emit_csv",
    "format_csv",
]

SPEED_OF_LIGHT = 299_792_458.0

AXES = ("elements", "pt_dbm", "kappa_db")

CSV_HEADER = ("scheme", "sweep_axis", "sweep_value", "snr_db_mean", "snr_db_std", "trials", "seed",
              "gain1", "gain2", "theta1", "phi1", "theta2", "phi2", "dist_product")

# anchors of the first element of BS, IRS 1, IRS 2 and the user position (m)
DEFAULT_ANCHORS = {
    "bs": (-7.0, -15.0, 0.0),
    "irs1": (0.0, 25.0, 5.0),
    "irs2": (5.0, -20.0, 10.0),
    "user": (15.0, 20.0, 0.0),
}

PRESETS: Dict[str, dict] = {
    "desk": dict(m=8, n1=32, n2=32, trials=50,
                 pso=dict(swarm_size=60, max_iters=40, early_stop=True, patience=10)),
    "paper": dict(m=64, n1=256, n2=256, trials=50,
                  pso=dict(swarm_size=800, max_iters=50, early_stop=False)),
}


def default_geometry(m: int = 8, n1: int = 32, n2: int = 32, frequency: float = 2.4e9,
                     spacing_wavelengths: float = 0.5) -> ScenarioGeometry:
    """The reference four-node scenario with near-square arrays."""
    lam = SPEED_OF_LIGHT / frequency
    d = spacing_wavelengths * lam
    return ScenarioGeometry(
        np.array(DEFAULT_ANCHORS["bs"]), np.array(DEFAULT_ANCHORS["irs1"]),
        np.array(DEFAULT_ANCHORS["irs2"]), np.array(DEFAULT_ANCHORS["user"]),
        ArrayLayout.square(m, d), ArrayLayout.square(n1, d), ArrayLayout.square(n2, d), lam)


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """Everything needed to reproduce one sweep.

    Internal units are linear and SI: ``pt`` and ``noise_power`` in watts,
    ``beta`` and ``kappa`` linear. ``values`` are in the units of ``axis``
    (element count, dBm or dB).
    """

    geometry: ScenarioGeometry
    axis: str
    values: Tuple[float, ...]
    schemes: Tuple[Scheme, ...]
    trials: int = 50
    seed: int = 0
    pso: PsoConfig = PsoConfig(early_stop=True)
    pt: float = 1.0
    noise_power: float = 1e-11
    beta: float = 1e-4
    kappa: float = math.inf
    los_model: str = "spherical"
    nlos_amplitude: str = "anchor"
    single_position: Optional[np.ndarray] = None
    convergence_eps: float = 1e-4
    max_outer_iters: int = 30
    rotation_search: str = "joint"
    workers: int = 1
    preset: str = "desk"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"sweep.axis: unknown axis {self.axis!r}, expected one of {AXES}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ConfigError("sweep.values: must be nonempty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError(f"sweep.values: must be strictly increasing, got {list(values)}")
        if self.axis == "elements":
            for v in values:
                if v != int(v) or v < 1:
                    raise ConfigError(f"sweep.values: element counts must be positive integers, got {v}")
                if int(v) % 2 and any(s.double for s in self.schemes):
                    raise ConfigError(f"sweep.values: odd element count {int(v)} cannot be split "
                                      "evenly between two surfaces")
        object.__setattr__(self, "values", values)
        if not self.schemes:
            raise ConfigError("schemes: must be nonempty")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials: must be a positive integer, got {self.trials}")
        if self.seed < 0:
            raise ConfigError(f"seed: must be nonnegative, got {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers: must be >= 1, got {self.workers}")

    def budget_at(self, value: float) -> LinkBudget:
        pt = float(dbm_to_watts(value)) if self.axis == "pt_dbm" else self.pt
        return LinkBudget(pt, self.noise_power)

    def params_at(self, value: float) -> RicianParams:
        kappa = float(db_to_linear(value)) if self.axis == "kappa_db" else self.kappa
        return RicianParams.uniform(kappa, self.beta)

    def geometry_at(self, value: float) -> ScenarioGeometry:
        if self.axis != "elements":
            return self.geometry
        n = int(value)
        return self.geometry.with_sizes(n1=n // 2, n2=n - n // 2)

    def with_overrides(self, **changes) -> "ExperimentSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class ResultRow:
    """Summary of one (scheme, sweep value) point.

    Gains and angles are trial means. ``theta2``/``phi2`` are None for
    single-surface schemes; ``dist_product`` is the BS-surface-user
    distance product of the system the scheme actually uses.
    """

    scheme: str
    sweep_axis: str
    sweep_value: float
    snr_db_mean: float
    snr_db_std: float
    trials: int
    seed: int
    gain1: float
    gain2: float
    theta1: float
    phi1: float
    theta2: Optional[float]
    phi2: Optional[float]
    dist_product: float

    def fields(self) -> tuple:
        return tuple(getattr(self, name) for name in CSV_HEADER)


def _derived_seed(seed: int, *keys) -> int:
    return int(spawn_rng(seed, *keys).integers(2 ** 63))


def _run_trial(spec: ExperimentSpec, scheme: Scheme, value: float, trial: int):
    """SNR (linear), gains and orientations of one Monte Carlo trial."""
    geom = spec.geometry_at(value)
    budget = spec.budget_at(value)
    params = spec.params_at(value)
    # the NLoS draw depends on the trial only, so all schemes and sweep values
    # share realizations (common random numbers)
    seed = _derived_seed(spec.seed, "trial", trial)
    pso = spec.pso.with_seed(_derived_seed(spec.seed, "pso", scheme.name, trial))
    target = geom if scheme.double else single_irs_geometry(geom, spec.single_position)
    if params.is_los:
        res = solve_los(target, budget, scheme, params, pso, with_solution=False)
        return res.snr, res.gain1, res.gain2, res.orient1, res.orient2, res.distance_product
    state = solve_ao_pso(target, params, budget, pso, spec.convergence_eps, spec.max_outer_iters,
                         seed, scheme, los_model=spec.los_model,
                         nlos_amplitude=spec.nlos_amplitude,
                         rotation_search=spec.rotation_search)
    return (state.snr, state.gain1, state.gain2, state.orient1, state.orient2,
            distance_product(target))


def _run_point(args) -> ResultRow:
    spec, scheme, value = args
    params = spec.params_at(value)
    # pure LoS points are deterministic, so one evaluation stands for every trial
    n_eval = 1 if params.is_los else spec.trials
    out = [_run_trial(spec, scheme, value, t) for t in range(n_eval)]
    snr_lin = np.array([o[0] for o in out])
    with np.errstate(divide="ignore"):
        snr_db = linear_to_db(snr_lin)
    if not np.all(np.isfinite(snr_db)):
        raise NumericalError(f"{scheme.name} at {spec.axis}={value:g}: SNR is zero or non-finite "
                             "in at least one trial")
    std = float(np.std(snr_db, ddof=1)) if len(snr_db) > 1 else 0.0
    o1 = np.array([[o[3].theta, o[3].phi] for o in out]).mean(axis=0)
    o2 = None if out[0][4] is None else np.array([[o[4].theta, o[4].phi] for o in out]).mean(axis=0)
    return ResultRow(
        scheme=scheme.name, sweep_axis=spec.axis, sweep_value=value,
        snr_db_mean=float(np.mean(snr_db)), snr_db_std=std, trials=spec.trials, seed=spec.seed,
        gain1=float(np.mean([o[1] for o in out])), gain2=float(np.mean([o[2] for o in out])),
        theta1=float(o1[0]), phi1=float(o1[1]),
        theta2=None if o2 is None else float(o2[0]), phi2=None if o2 is None else float(o2[1]),
        dist_product=float(out[0][5]))


def run_experiment(spec: ExperimentSpec) -> List[ResultRow]:
    """One row per (scheme, sweep value), schemes outermost, in config order.

    Every trial derives its seeds from ``spec.seed``, so the output does not
    depend on ``spec.workers``.
    """
    tasks = [(spec, scheme, value) for scheme in spec.schemes for value in spec.values]
    if spec.workers == 1:
        return [_run_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=spec.workers) as pool:
        return list(pool.map(_run_point, tasks))


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".6g")
    return str(value)


def format_csv(rows: Sequence[ResultRow]) -> str:
    """CSV text with a header line; floats use 6 significant digits."""
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_format(v) for v in row.fields()])
    return buf.getvalue()


def emit_csv(rows: Sequence[ResultRow], destination) -> None:
    """Write rows as UTF-8 CSV with LF line endings to a path or text stream."""
    text = format_csv(rows)
    if hasattr(destination, "write"):
        destination.write(text)
        return
    with open(os.fspath(destination), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_SCHEMA = {
    "preset": None,
    "seed": None,
    "trials": None,
    "workers": None,
    "schemes": None,
    "fixed_orientation_deg": None,
    "scenario": {"bs", "irs1", "irs2", "user", "single_irs", "frequency_hz", "m", "n1", "n2",
                 "spacing_wavelengths"},
    "channel": {"beta_db", "kappa_db", "los_model", "nlos_amplitude"},
    "budget": {"pt_dbm", "noise_dbm"},
    "sweep": {"axis", "values"},
    "pso": {"swarm_size", "max_iters", "c1", "c2", "omega_init", "omega_final", "tau",
            "velocity_clamp", "early_stop", "patience", "min_improvement", "update_order"},
    "solver": {"convergence_eps", "max_outer_iters", "rotation_search"},
}

_REQUIRED = ("sweep.axis", "sweep.values", "schemes")


def _check_keys(tree: dict):
    for key, value in tree.items():
        if key not in _SCHEMA:
            raise ConfigError(f"{key}: unknown key")
        allowed = _SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a mapping")
        for sub in value:
            if sub not in allowed:
                raise ConfigError(f"{key}.{sub}: unknown key")


def _get(tree: dict, path: str, default=None, required=False):
    node = tree
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(f"{path}: missing required key")
            return default
        node = node[part]
    return node


def _number(value, path: str, lo=-math.inf, hi=math.inf, integer=False, allow_inf=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: expected a number, got {value!r}") from None
    value = float(value)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise ConfigError(f"{path}: value {value} is not finite")
    if not lo <= value <= hi:
        raise ConfigError(f"{path}: value {value:g} out of range [{lo:g}, {hi:g}]")
    if integer:
        if value != int(value):
            raise ConfigError(f"{path}: expected an integer, got {value:g}")
        return int(value)
    return value


def _position(value, path: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{path}: expected a list of 3 numbers, got {value!r}")
    return np.array([_number(v, path) for v in value])


def _scheme(name, path: str, fixed: Orientation) -> Scheme:
    try:
        kind = SchemeKind(str(name).strip().lower().replace("_", "-"))
    except ValueError:
        options = ", ".join(k.value for k in SchemeKind)
        raise ConfigError(f"{path}: unknown scheme {name!r}, expected one of {options}") from None
    return Scheme(kind, fixed)


def parse_config(text: str, preset: Optional[str] = None) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from YAML text.

    Positions are 3-element lists in metres, angles in degrees, powers in
    dBm, ``beta_db`` and ``kappa_db`` in dB (``.inf`` or ``los`` for pure
    LoS). Unknown keys are rejected. ``preset`` overrides the file's own
    ``preset`` key; explicit size, trial and PSO keys in the file still win
    over the preset.

    Raises
    ------
    ConfigError
        With the offending key path in the message.
    """
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigError("config must be a mapping at the top level")
    _check_keys(tree)
    for path in _REQUIRED:
        _get(tree, path, required=True)

    preset = preset or tree.get("preset", "desk")
    if preset not in PRESETS:
        raise ConfigError(f"preset: unknown preset {preset!r}, expected one of {sorted(PRESETS)}")
    base = PRESETS[preset]

    sc = tree.get("scenario", {}) or {}
    anchors = {k: _position(sc.get(k, DEFAULT_ANCHORS[k]), f"scenario.{k}") for k in DEFAULT_ANCHORS}
    freq = _number(sc.get("frequency_hz", 2.4e9), "scenario.frequency_hz", lo=1.0)
    spacing = _number(sc.get("spacing_wavelengths", 0.5), "scenario.spacing_wavelengths",
                      lo=1e-6, hi=100)
    sizes = {k: _number(sc.get(k, base[k]), f"scenario.{k}", lo=1, integer=True)
             for k in ("m", "n1", "n2")}
    lam = SPEED_OF_LIGHT / freq
    d = spacing * lam
    try:
        geometry = ScenarioGeometry(anchors["bs"], anchors["irs1"], anchors["irs2"], anchors["user"],
                                    ArrayLayout.square(sizes["m"], d),
                                    ArrayLayout.square(sizes["n1"], d),
                                    ArrayLayout.square(sizes["n2"], d), lam)
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from None
    single = sc.get("single_irs")
    single = None if single is None else _position(single, "scenario.single_irs")

    fixed_deg = tree.get("fixed_orientation_deg", [-45.0, -45.0])
    if not isinstance(fixed_deg, (list, tuple)) or len(fixed_deg) != 2:
        raise ConfigError(f"fixed_orientation_deg: expected [theta, phi], got {fixed_deg!r}")
    fixed = Orientation.from_degrees(*(_number(v, "fixed_orientation_deg", lo=-90, hi=90)
                                       for v in fixed_deg))
    names = tree["schemes"]
    if isinstance(names, str):
        names = [names]
    if not isinstance(names, list) or not names:
        raise ConfigError("schemes: expected a nonempty list of scheme names")
    schemes = tuple(_scheme(n, "schemes", fixed) for n in names)

    ch = tree.get("channel", {}) or {}
    beta = float(db_to_linear(_number(ch.get("beta_db", -40.0), "channel.beta_db", hi=0)))
    kappa_raw = ch.get("kappa_db", math.inf)
    if isinstance(kappa_raw, str) and kappa_raw.strip().lower() == "los":
        kappa_raw = math.inf
    kappa = float(db_to_linear(_number(kappa_raw, "channel.kappa_db", lo=-100, allow_inf=True)))
    los_model = ch.get("los_model", "spherical")
    if los_model not in ("spherical", "planar"):
        raise ConfigError(f"channel.los_model: expected spherical or planar, got {los_model!r}")
    nlos_amp = ch.get("nlos_amplitude", "anchor")
    if nlos_amp not in ("anchor", "element"):
        raise ConfigError(f"channel.nlos_amplitude: expected anchor or element, got {nlos_amp!r}")

    bd = tree.get("budget", {}) or {}
    pt = float(dbm_to_watts(_number(bd.get("pt_dbm", 30.0), "budget.pt_dbm", lo=-100, hi=100)))
    noise = float(dbm_to_watts(_number(bd.get("noise_dbm", -80.0), "budget.noise_dbm",
                                       lo=-250, hi=100)))

    axis = tree["sweep"]["axis"]
    if axis not in AXES:
        raise ConfigError(f"sweep.axis: unknown axis {axis!r}, expected one of {AXES}")
    raw_values = tree["sweep"]["values"]
    if not isinstance(raw_values, list):
        raise ConfigError("sweep.values: expected a list")
    values = tuple(_number(v, "sweep.values", allow_inf=(axis == "kappa_db")) for v in raw_values)

    pso_kw = dict(base["pso"])
    for key, val in (tree.get("pso") or {}).items():
        if key == "early_stop":
            if not isinstance(val, bool):
                raise ConfigError(f"pso.early_stop: expected true or false, got {val!r}")
            pso_kw[key] = val
        elif key == "update_order":
            if val not in ("velocity-first", "position-first"):
                raise ConfigError(f"pso.update_order: expected velocity-first or position-first, "
                                  f"got {val!r}")
            pso_kw[key] = val
        elif key in ("swarm_size", "max_iters", "patience"):
            pso_kw[key] = _number(val, f"pso.{key}", lo=1, integer=True)
        else:
            pso_kw[key] = _number(val, f"pso.{key}", lo=0)
    try:
        pso = PsoConfig(**pso_kw)
    except ValueError as exc:
        raise ConfigError(f"pso: {exc}") from None

    so = tree.get("solver", {}) or {}
    eps = _number(so.get("convergence_eps", 1e-4), "solver.convergence_eps", lo=1e-300,
                  allow_inf=True)
    max_outer = _number(so.get("max_outer_iters", 30), "solver.max_outer_iters", lo=1, integer=True)
    search = so.get("rotation_search", "joint")
    if search not in ("joint", "alternating"):
        raise ConfigError(f"solver.rotation_search: expected joint or alternating, got {search!r}")

    return ExperimentSpec(
        geometry=geometry, axis=axis, values=values, schemes=schemes,
        trials=_number(tree.get("trials", base["trials"]), "trials", lo=1, integer=True),
        seed=_number(tree.get("seed", 0), "seed", lo=0, hi=2 ** 64 - 1, integer=True),
        pso=pso, pt=pt, noise_power=noise, beta=beta, kappa=kappa, los_model=los_model,
        nlos_amplitude=nlos_amp, single_position=single, convergence_eps=eps,
        max_outer_iters=max_outer, rotation_search=search,
        workers=_number(tree.get("workers", 1), "workers", lo=1, integer=True), preset=preset)


def load_config(path, preset: Optional[str] = None) -> ExperimentSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, preset)
