"""LoS pipeline, AO-PSO for Rician channels, comparison schemes and the upper bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

from .beamform import (BeamformingSolution, LinkBudget, irs1_phases, irs2_phases,
                       los_closed_form, mrt_weights, snr, snr_los_closed_form,
                       snr_los_single_irs)
from .channel import (ChannelSynthesizer, RicianParams, far_field_distances,
                      los_signature_decomposition, planar_user_channel, single_los_signature,
                      spawn_rng)
from .errors import DegenerateGeometryError
from .geometry import (Orientation, ScenarioGeometry, SingleGeometry, feasibility_slacks,
                       single_feasibility_slacks, single_gain, single_irs_geometry,
                       surface_gains)
from .rotation import (PsoConfig, closed_form_azimuth_irs1, closed_form_azimuth_irs2,
                       closed_form_azimuth_single, penalized_fitness_los,
                       penalized_fitness_rician, penalized_fitness_single, pso_optimize)

__all__ = [
    "SchemeKind",
    "Scheme",
    "DOUBLE_ROTATABLE",
    "SINGLE_ROTATABLE",
    "DOUBLE_FIXED",
    "SINGLE_FIXED",
    "LosResult",
    "AoPsoState",
    "solve_los",
    "solve_ao_pso",
    "upper_bound_snr",
    "distance_product",
]

DEFAULT_FIXED = Orientation(-math.pi / 4, -math.pi / 4)


class SchemeKind(str, Enum):
    DOUBLE_ROTATABLE = "double-rotatable"
    SINGLE_ROTATABLE = "single-rotatable"
    DOUBLE_FIXED = "double-fixed"
    SINGLE_FIXED = "single-fixed"


@dataclass(frozen=True)
class Scheme:
    """Comparison scheme; fixed schemes hold every surface at ``fixed``."""

    kind: SchemeKind
    fixed: Orientation = DEFAULT_FIXED

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        fixed = Orientation(float(self.fixed[0]), float(self.fixed[1]))
        if max(abs(fixed.theta), abs(fixed.phi)) > math.pi / 2 + 1e-12:
            raise ValueError(f"fixed orientation {fixed} is outside the feasible box")
        object.__setattr__(self, "fixed", fixed)

    @property
    def double(self) -> bool:
        return self.kind in (SchemeKind.DOUBLE_ROTATABLE, SchemeKind.DOUBLE_FIXED)

    @property
    def rotatable(self) -> bool:
        return self.kind in (SchemeKind.DOUBLE_ROTATABLE, SchemeKind.SINGLE_ROTATABLE)

    @property
    def name(self) -> str:
        return self.kind.value


DOUBLE_ROTATABLE = Scheme(SchemeKind.DOUBLE_ROTATABLE)
SINGLE_ROTATABLE = Scheme(SchemeKind.SINGLE_ROTATABLE)
DOUBLE_FIXED = Scheme(SchemeKind.DOUBLE_FIXED)
SINGLE_FIXED = Scheme(SchemeKind.SINGLE_FIXED)


def distance_product(geometry) -> float:
    """Product of the hop distances along the cascade (t*d*r, or t*r for one surface)."""
    if isinstance(geometry, SingleGeometry):
        return float(np.linalg.norm(geometry.bs_origin - geometry.irs_origin)
                     * np.linalg.norm(geometry.user_pos - geometry.irs_origin))
    return float(np.prod(far_field_distances(geometry)))


def upper_bound_snr(geometry: ScenarioGeometry, budget: LinkBudget,
                    params: RicianParams = RicianParams()) -> float:
    """LoS SNR with both aperture gains set to one."""
    return float(snr_los_closed_form(geometry, 1.0, 1.0, params, budget))


def _on_ground(*points) -> bool:
    return all(abs(p[2]) <= 1e-12 for p in points)


def _optimize_surface(fitness, config: PsoConfig, closed_form: Optional[float]) -> Orientation:
    """PSO over one surface, cross-checked against the closed form when available."""
    result = pso_optimize(fitness, 2, config)
    best = Orientation(float(result.best_position[0]), float(result.best_position[1]))
    if closed_form is not None:
        cf = Orientation(closed_form, 0.0)
        if float(fitness(np.array([[cf.theta, cf.phi]]))[0]) >= result.best_fitness:
            best = cf
    return best


def _los_orientations(geometry, scheme: Scheme, pso: PsoConfig):
    """Gain-maximizing orientations for a rotatable scheme in the LoS case.

    The two surfaces decouple, so each gets its own two-dimensional swarm.
    """
    if isinstance(geometry, SingleGeometry):
        cf = None
        if _on_ground(geometry.bs_origin, geometry.irs_origin, geometry.user_pos):
            try:
                cf = closed_form_azimuth_single(geometry)
            except DegenerateGeometryError:
                cf = None
        fit = lambda p: penalized_fitness_single(geometry, Orientation.from_array(p), pso.tau)
        return _optimize_surface(fit, pso, cf), None
    g = geometry
    ground = _on_ground(g.bs_origin, g.irs1_origin, g.irs2_origin, g.user_pos)
    cfs = [None, None]
    if ground:
        for i, f in enumerate((closed_form_azimuth_irs1, closed_form_azimuth_irs2)):
            try:
                cfs[i] = f(g)
            except DegenerateGeometryError:
                pass
    o1 = _optimize_surface(
        lambda p: penalized_fitness_los(g, Orientation.from_array(p), pso.tau, "irs1"),
        pso.with_seed(int(spawn_rng(pso.seed, "irs1").integers(2 ** 63))), cfs[0])
    o2 = _optimize_surface(
        lambda p: penalized_fitness_los(g, Orientation.from_array(p), pso.tau, "irs2"),
        pso.with_seed(int(spawn_rng(pso.seed, "irs2").integers(2 ** 63))), cfs[1])
    return o1, o2


@dataclass(frozen=True, eq=False)
class LosResult:
    """Outcome of the LoS pipeline. Unpacks as ``(orientations, solution, snr)``."""

    orient1: Orientation
    orient2: Optional[Orientation]
    solution: Optional[BeamformingSolution]
    snr: float
    gain1: float
    gain2: float
    feasible: bool
    distance_product: float

    @property
    def orientations(self):
        return (self.orient1, self.orient2)

    def __iter__(self):
        return iter((self.orientations, self.solution, self.snr))


def _as_single(geometry, single_position=None) -> SingleGeometry:
    if isinstance(geometry, SingleGeometry):
        return geometry
    return single_irs_geometry(geometry, single_position)


def solve_los(geometry: Union[ScenarioGeometry, SingleGeometry], budget: LinkBudget,
              scheme: Scheme = DOUBLE_ROTATABLE, params: RicianParams = RicianParams(),
              pso: PsoConfig = PsoConfig(), single_position=None,
              with_solution: bool = True) -> LosResult:
    """Orientation, beamformers and closed-form SNR for pure LoS channels.

    Single-surface schemes use ``single_irs_geometry(geometry, single_position)``
    unless ``geometry`` already is a :class:`SingleGeometry`. A fixed
    orientation that puts a node behind a surface keeps its gain when that
    gain still lies in [0, 1]; otherwise the SNR is zero. Either way
    ``feasible`` is False.
    """
    if scheme.double:
        if not isinstance(geometry, ScenarioGeometry):
            raise TypeError("double-surface schemes need a ScenarioGeometry")
        if scheme.rotatable:
            o1, o2 = _los_orientations(geometry, scheme, pso)
        else:
            o1 = o2 = scheme.fixed
        g1, g2 = (float(v) for v in surface_gains(geometry, o1, o2))
        feasible = bool(feasibility_slacks(geometry, o1, o2).all_feasible())
        if not (0 <= g1 <= 1 and 0 <= g2 <= 1):
            g1 = g2 = 0.0
        value = float(snr_los_closed_form(geometry, g1, g2, params, budget))
        sol = None
        if with_solution:
            sig = los_signature_decomposition(geometry, o1, o2, params.beta)
            sol = los_closed_form(sig, planar_user_channel(geometry, o2, params.beta), budget)
        return LosResult(o1, o2, sol, value, g1, g2, feasible, distance_product(geometry))

    single = _as_single(geometry, single_position)
    o = _los_orientations(single, scheme, pso)[0] if scheme.rotatable else scheme.fixed
    g = float(single_gain(single, o))
    feasible = bool(all(s >= 0 for s in single_feasibility_slacks(single, o)))
    if not 0 <= g <= 1:
        g = 0.0
    value = float(snr_los_single_irs(single, g, budget, beta=params.beta))
    sol = None
    if with_solution:
        sig = single_los_signature(single, o, params.beta)
        sol = los_closed_form(sig, planar_user_channel(single, o, params.beta), budget)
    return LosResult(o, None, sol, value, g, 1.0, feasible, distance_product(single))


@dataclass
class AoPsoState:
    """Iterates of the AO-PSO loop.

    ``objective_trace[0]`` is the SNR after the initial beamforming pass;
    each outer iteration then appends four values (rotation, BS weights,
    IRS-1 phases, IRS-2 phases).
    """

    orient1: Orientation
    orient2: Optional[Orientation]
    sol: BeamformingSolution
    objective_trace: List[float] = field(default_factory=list)
    iteration: int = 0
    converged: bool = False
    gain1: float = 1.0
    gain2: float = 1.0

    @property
    def snr(self) -> float:
        return self.objective_trace[-1]


class _Problem:
    """Objective, gains and beamforming blocks of one fading trial."""

    def __init__(self, geometry, synth: ChannelSynthesizer, budget: LinkBudget):
        self.geometry = geometry
        self.synth = synth
        self.budget = budget
        self.single = isinstance(geometry, SingleGeometry)

    def split(self, pos):
        pos = np.asarray(pos, dtype=float)
        if self.single:
            return Orientation(pos[..., 0], pos[..., 1]), None
        return Orientation(pos[..., 0], pos[..., 1]), Orientation(pos[..., 2], pos[..., 3])

    def join(self, o1, o2):
        if self.single:
            return np.array([o1.theta, o1.phi], dtype=float)
        return np.array([o1.theta, o1.phi, o2.theta, o2.phi], dtype=float)

    def gains(self, o1, o2):
        if self.single:
            return float(single_gain(self.geometry, o1)), 1.0
        g1, g2 = surface_gains(self.geometry, o1, o2)
        return float(g1), float(g2)

    def feasible(self, o1, o2) -> bool:
        if self.single:
            return all(s >= 0 for s in single_feasibility_slacks(self.geometry, o1))
        return bool(feasibility_slacks(self.geometry, o1, o2).all_feasible())

    def objective(self, chans, sol, o1, o2) -> float:
        g1, g2 = self.gains(o1, o2)
        return float(snr(chans, sol, g1, g2, self.budget))

    def fitness(self, sol, tau, penalize="all", fixed=None, rng=None):
        """Vectorized penalized fitness; ``fixed`` pins one surface for alternating search."""
        def fit(pos):
            if fixed is not None:
                which, orient = fixed
                pos = np.asarray(pos)
                other = np.broadcast_to(np.array([orient.theta, orient.phi]), pos.shape)
                pos = np.concatenate([pos, other] if which == "irs2" else [other, pos], axis=-1)
            o1, o2 = self.split(pos)
            chans = self.synth(o1, o2, rng=rng)
            return penalized_fitness_rician(o1, o2, chans, sol, self.budget, tau, self.geometry,
                                            penalize=penalize)
        return fit


def _rotation_step(prob: _Problem, sol, config: PsoConfig, o1, o2, chans, held, rng):
    """One PSO pass over the orientations, seeded with the incumbent.

    ``held`` names a surface kept at its current orientation (alternating
    search) or is None for the joint search. The PSO result replaces the
    incumbent only when it is feasible and strictly better.
    """
    if held is None:
        fixed, penalize, incumbent = None, "all", prob.join(o1, o2)
    elif held == "irs2":
        fixed, penalize, incumbent = ("irs2", o2), "irs1", np.array([o1.theta, o1.phi])
    else:
        fixed, penalize, incumbent = ("irs1", o1), "irs2", np.array([o2.theta, o2.phi])
    fit = prob.fitness(sol, config.tau, penalize, fixed, rng)
    pos = pso_optimize(fit, len(incumbent), config, init_positions=incumbent).best_position
    if held == "irs2":
        pos = np.concatenate([pos, [o2.theta, o2.phi]])
    elif held == "irs1":
        pos = np.concatenate([[o1.theta, o1.phi], pos])
    c1, c2 = prob.split(pos)
    c1 = Orientation(float(c1.theta), float(c1.phi))
    c2 = None if c2 is None else Orientation(float(c2.theta), float(c2.phi))
    cand = prob.synth(c1, c2)
    if (prob.feasible(c1, c2)
            and prob.objective(cand, sol, c1, c2) > prob.objective(chans, sol, o1, o2)):
        return c1, c2, cand
    return o1, o2, chans


def _initial_solution(chans, budget: LinkBudget, n1: int, n2: int) -> BeamformingSolution:
    psi1, psi2 = np.zeros(n1), np.zeros(n2)
    w = mrt_weights(chans, psi1, psi2, budget)
    psi1 = irs1_phases(chans, psi2, w)
    if chans.S is not None:
        psi2 = irs2_phases(chans, psi1, w)
    return BeamformingSolution(w, psi1, psi2)


def solve_ao_pso(geometry: Union[ScenarioGeometry, SingleGeometry], params: RicianParams,
                 budget: LinkBudget, pso: PsoConfig = PsoConfig(), convergence_eps: float = 1e-4,
                 max_outer_iters: int = 30, seed: int = 0, scheme: Scheme = DOUBLE_ROTATABLE,
                 init_orientations: Optional[Tuple[Orientation, Optional[Orientation]]] = None,
                 los_model: str = "spherical", nlos_amplitude: str = "anchor",
                 rotation_search: str = "joint", freeze_nlos: bool = True,
                 single_position=None) -> AoPsoState:
    """Alternate PSO over the orientations with closed-form beamforming updates.

    Every outer iteration runs (1) a PSO over the orientations with the
    current beamformers fixed, (2) MRT, (3) IRS-1 phases and (4) IRS-2
    phases. The PSO swarm always contains the incumbent orientation, and a
    PSO candidate replaces it only if it is feasible and strictly better,
    so the objective trace never decreases. The loop stops once one outer
    iteration improves the SNR by a relative amount below
    ``convergence_eps`` or after ``max_outer_iters`` iterations.

    Rotatable schemes start from the LoS gain-optimal orientations unless
    ``init_orientations`` is given. ``rotation_search="alternating"``
    replaces the joint swarm by one swarm per surface. With
    ``freeze_nlos=False`` every PSO candidate sees a fresh NLoS draw, which
    voids the monotonicity guarantee.
    """
    if not convergence_eps > 0:
        raise ValueError("convergence_eps must be positive")
    if max_outer_iters < 1:
        raise ValueError("max_outer_iters must be >= 1")
    if rotation_search not in ("joint", "alternating"):
        raise ValueError(f"unknown rotation_search {rotation_search!r}")
    geom = geometry if scheme.double else _as_single(geometry, single_position)
    if scheme.double and not isinstance(geom, ScenarioGeometry):
        raise TypeError("double-surface schemes need a ScenarioGeometry")
    synth = ChannelSynthesizer(geom, params, seed, los_model, nlos_amplitude)
    prob = _Problem(geom, synth, budget)

    if not scheme.rotatable:
        o1 = scheme.fixed
        o2 = None if prob.single else scheme.fixed
    elif init_orientations is not None:
        o1, o2 = init_orientations
    else:
        o1, o2 = _los_orientations(geom, scheme, pso.with_seed(int(spawn_rng(seed, "init").integers(2 ** 63))))

    n1 = geom.n if prob.single else geom.n1
    n2 = 0 if prob.single else geom.n2
    chans = synth(o1, o2)
    sol = _initial_solution(chans, budget, n1, n2)
    state = AoPsoState(o1, o2, sol, [prob.objective(chans, sol, o1, o2)])
    redraw = None if freeze_nlos else spawn_rng(seed, "redraw")

    for it in range(max_outer_iters):
        start = state.objective_trace[-1]
        if scheme.rotatable:
            run_cfg = pso.with_seed(int(spawn_rng(seed, "pso", it).integers(2 ** 63)))
            if rotation_search == "joint" or prob.single:
                stages = [None]
            else:
                stages = ["irs2", "irs1"]
            for held in stages:
                o1, o2, chans = _rotation_step(prob, sol, run_cfg, o1, o2, chans, held, redraw)
        state.objective_trace.append(prob.objective(chans, sol, o1, o2))
        w = mrt_weights(chans, sol.psi1, sol.psi2, budget)
        sol = BeamformingSolution(w, sol.psi1, sol.psi2)
        state.objective_trace.append(prob.objective(chans, sol, o1, o2))
        psi1 = irs1_phases(chans, sol.psi2, sol.w)
        sol = BeamformingSolution(sol.w, psi1, sol.psi2)
        state.objective_trace.append(prob.objective(chans, sol, o1, o2))
        if not prob.single:
            psi2 = irs2_phases(chans, sol.psi1, sol.w)
            sol = BeamformingSolution(sol.w, sol.psi1, psi2)
        state.objective_trace.append(prob.objective(chans, sol, o1, o2))
        state.iteration = it + 1
        end = state.objective_trace[-1]
        gain = (end - start) / start if start > 0 else (0.0 if end == start else math.inf)
        if gain < convergence_eps:
            state.converged = True
            break

    state.orient1, state.orient2, state.sol = o1, o2, sol
    state.gain1, state.gain2 = prob.gains(o1, o2)
    return state
