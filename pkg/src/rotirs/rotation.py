"""Orientation optimization: ground-plane closed form and penalized PSO.

The particle swarm maximizes a fitness over the box ``[-pi/2, pi/2]^dims``.
Fitness functions are vectorized: they take a ``(B, dims)`` array of
particle positions and return ``B`` values, so one call scores a whole
iteration.

Infeasible orientations (a node behind a surface) are handled by the
penalty ``tau * sum(max(0, -slack))`` where the slacks are local
z-coordinates in meters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .beamform import BeamformingSolution, LinkBudget, snr
from .channel import ChannelSet
from .errors import DegenerateGeometryError
from .geometry import (ANGLE_BOUND, Orientation, ScenarioGeometry, SingleGeometry,
                       aperture_gain, elevation_angles, feasibility_slacks,
                       single_feasibility_slacks, single_gain)

__all__ = [
    "PsoConfig",
    "SwarmState",
    "PsoResult",
    "inertia_weight",
    "pso_optimize",
    "azimuth_offsets",
    "closed_form_azimuth_irs1",
    "closed_form_azimuth_irs2",
    "closed_form_azimuth_single",
    "penalized_fitness_los",
    "penalized_fitness_single",
    "penalized_fitness_rician",
    "violation",
]


@dataclass(frozen=True)
class PsoConfig:
    """Swarm hyperparameters.

    ``velocity_clamp`` is a fraction of the box width. With ``early_stop``
    the run ends once the global best improved by less than
    ``min_improvement`` for ``patience`` consecutive iterations.

    ``update_order="velocity-first"`` is the usual inertia-weight PSO: the
    velocity is refreshed from the current position and the particle then
    moves by the new velocity. ``"position-first"`` moves by the previous
    velocity before refreshing it; the attraction terms then act on a
    position one step stale, which makes the swarm oscillate out to the
    velocity clamp for c1 + c2 near 3.
    """

    swarm_size: int = 60
    max_iters: int = 40
    c1: float = 1.49445
    c2: float = 1.49445
    omega_init: float = 0.9
    omega_final: float = 0.4
    tau: float = 1e3
    seed: int = 0
    velocity_clamp: float = 0.5
    early_stop: bool = False
    patience: int = 15
    min_improvement: float = 1e-10
    update_order: str = "velocity-first"

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError(f"swarm_size must be >= 2, got {self.swarm_size}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be nonnegative")
        if not self.omega_init >= self.omega_final >= 0:
            raise ValueError("need omega_init >= omega_final >= 0")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.velocity_clamp > 0:
            raise ValueError("velocity_clamp must be positive")
        if self.update_order not in ("velocity-first", "position-first"):
            raise ValueError(f"unknown update_order {self.update_order!r}")

    def with_seed(self, seed: int) -> "PsoConfig":
        return replace(self, seed=int(seed))


def inertia_weight(t, config: PsoConfig):
    """Linearly decreasing inertia: omega_init at t = 0, omega_final at t = max_iters."""
    T = config.max_iters
    return (config.omega_init - config.omega_final) * (T - t) / T + config.omega_final


@dataclass
class SwarmState:
    positions: np.ndarray
    velocities: np.ndarray
    pbest_positions: np.ndarray
    pbest_fitness: np.ndarray
    gbest_position: np.ndarray = field(default=None)
    gbest_fitness: float = -math.inf
    iteration: int = 0

    def update_bests(self, fitness: np.ndarray):
        better = fitness > self.pbest_fitness
        self.pbest_positions[better] = self.positions[better]
        self.pbest_fitness[better] = fitness[better]
        i = int(np.argmax(self.pbest_fitness))
        if self.pbest_fitness[i] > self.gbest_fitness:
            self.gbest_fitness = float(self.pbest_fitness[i])
            self.gbest_position = self.pbest_positions[i].copy()


@dataclass(frozen=True)
class PsoResult:
    """Best position, its fitness and the global-best trace (index 0 = initial swarm).

    Unpacks as ``best_position, best_fitness, trace``.
    """

    best_position: np.ndarray
    best_fitness: float
    trace: np.ndarray
    state: SwarmState
    evaluations: int

    def __iter__(self):
        return iter((self.best_position, self.best_fitness, self.trace))


def pso_optimize(fitness: Callable[[np.ndarray], np.ndarray], dims: int, config: PsoConfig,
                 init_positions=None, vectorized: bool = True,
                 lower: float = -ANGLE_BOUND, upper: float = ANGLE_BOUND) -> PsoResult:
    """Maximize ``fitness`` over the box ``[lower, upper]^dims``.

    Parameters
    ----------
    fitness : callable
        Maps a ``(B, dims)`` array to ``B`` fitness values, or a single
        ``(dims,)`` position to a scalar when ``vectorized`` is False.
    dims : int
    config : PsoConfig
    init_positions : array_like, optional
        Up to ``swarm_size`` positions that replace the first random
        particles. Seeding the incumbent here makes the result no worse
        than the incumbent.

    Returns
    -------
    PsoResult
        ``trace[t]`` is the global-best fitness after iteration ``t``; it
        is nondecreasing and ends at ``best_fitness``.
    """
    if dims < 1:
        raise ValueError("dims must be positive")
    rng = np.random.default_rng(config.seed)
    B = config.swarm_size
    width = upper - lower
    vmax = config.velocity_clamp * width

    def evaluate(pos):
        if vectorized:
            vals = np.asarray(fitness(pos), dtype=float).reshape(-1)
        else:
            vals = np.array([float(fitness(p)) for p in pos])
        if vals.shape != (len(pos),):
            raise ValueError(f"fitness returned shape {vals.shape}, expected ({len(pos)},)")
        # NaN would silently poison the comparisons below
        return np.where(np.isnan(vals), -np.inf, vals)

    pos = rng.uniform(lower, upper, size=(B, dims))
    vel = rng.uniform(-0.1, 0.1, size=(B, dims)) * width
    if init_positions is not None:
        seeds = np.atleast_2d(np.asarray(init_positions, dtype=float))
        if seeds.shape[1] != dims:
            raise ValueError(f"init_positions must have {dims} columns")
        k = min(len(seeds), B)
        pos[:k] = np.clip(seeds[:k], lower, upper)

    state = SwarmState(pos, vel, pos.copy(), np.full(B, -np.inf))
    state.update_bests(evaluate(pos))
    if state.gbest_position is None:
        state.gbest_position = pos[0].copy()
    evaluations = B
    trace = [state.gbest_fitness]
    stall = 0
    for t in range(config.max_iters):
        omega = inertia_weight(t, config)
        if config.update_order == "position-first":
            new_pos = np.clip(state.positions + state.velocities, lower, upper)
        r1 = rng.random((B, dims))
        r2 = rng.random((B, dims))
        state.velocities = (omega * state.velocities
                            + config.c1 * r1 * (state.pbest_positions - state.positions)
                            + config.c2 * r2 * (state.gbest_position - state.positions))
        np.clip(state.velocities, -vmax, vmax, out=state.velocities)
        if config.update_order == "velocity-first":
            new_pos = np.clip(state.positions + state.velocities, lower, upper)
        state.positions = new_pos
        state.iteration = t + 1
        state.update_bests(evaluate(new_pos))
        evaluations += B
        gain = state.gbest_fitness - trace[-1]
        trace.append(state.gbest_fitness)
        if config.early_stop:
            stall = stall + 1 if gain < config.min_improvement else 0
            if stall >= config.patience:
                break
    return PsoResult(state.gbest_position.copy(), state.gbest_fitness, np.array(trace),
                     state, evaluations)


def violation(*slacks):
    """Total constraint violation ``sum(max(0, -slack))``."""
    return sum(np.maximum(0.0, -np.asarray(s)) for s in slacks)


# ---------------------------------------------------------------------------
# Ground-plane closed form
# ---------------------------------------------------------------------------

def _require_ground_plane(points: dict):
    for name, p in points.items():
        if abs(p[2]) > 1e-12:
            raise DegenerateGeometryError(
                f"closed-form azimuth needs every node at z = 0; {name} has z = {p[2]!r}")


def azimuth_offsets(geometry: ScenarioGeometry, surface: str = "irs1"):
    """Signed in-plane angles of the two links seen from a surface.

    With ``phi = 0`` the normalized local z-coordinate of each link
    endpoint equals ``sin(theta + offset)``. For a nonnegative x-offset the
    value coincides with ``arccos(dy / rho)``.
    """
    g = geometry
    if isinstance(g, SingleGeometry):
        a = g.bs_origin - g.irs_origin
        b = g.user_pos - g.irs_origin
        return math.atan2(a[0], a[1]), math.atan2(b[0], b[1])
    if surface == "irs1":
        a = g.bs_origin - g.irs1_origin
        b = g.irs2_origin - g.irs1_origin
        return math.atan2(a[0], a[1]), math.atan2(b[0], b[1])
    if surface == "irs2":
        a = g.irs1_origin - g.irs2_origin
        b = g.user_pos - g.irs2_origin
        return math.atan2(a[0], -a[1]), math.atan2(b[0], -b[1])
    raise ValueError(f"unknown surface {surface!r}")


def _best_azimuth(da: float, db: float) -> float:
    """Maximize ``sin(t+da) sin(t+db)`` over ``|t| <= pi/2`` with both factors >= 0."""
    half = ANGLE_BOUND
    stationary = [(math.pi - da - db) / 2 + k * math.pi for k in range(-3, 4)]
    edges = [-da + k * math.pi for k in range(-3, 4)] + [-db + k * math.pi for k in range(-3, 4)]
    candidates = [t for t in stationary if abs(t) <= half + 1e-12]
    candidates += [t for t in edges if abs(t) <= half + 1e-12] + [-half, half]
    best, best_val = None, -math.inf
    for t in candidates:
        t = min(max(t, -half), half)
        sa, sb = math.sin(t + da), math.sin(t + db)
        if sa < -1e-12 or sb < -1e-12:
            continue
        val = sa * sb
        # stationary points come first, so ties keep them
        if val > best_val + 1e-15:
            best, best_val = t, val
    if best is None:
        raise DegenerateGeometryError("no azimuth keeps both nodes on the reflective side")
    return best


def closed_form_azimuth_irs1(geometry: ScenarioGeometry) -> float:
    """Optimal IRS-1 azimuth for a ground-plane deployment (elevation 0 is optimal).

    The unconstrained optimum is ``(pi - d1 - d2)/2`` with ``d1``, ``d2``
    from :func:`azimuth_offsets`. When that normal is outside the azimuth
    range or would face away from the nodes, the best reachable azimuth on
    the boundary of the feasible arc is returned instead.
    """
    g = geometry
    _require_ground_plane({"BS": g.bs_origin, "IRS 1": g.irs1_origin,
                           "IRS 2": g.irs2_origin, "user": g.user_pos})
    return _best_azimuth(*azimuth_offsets(g, "irs1"))


def closed_form_azimuth_single(single: SingleGeometry) -> float:
    """Ground-plane optimal azimuth of a single surface (IRS-1 frame)."""
    _require_ground_plane({"BS": single.bs_origin, "IRS": single.irs_origin,
                           "user": single.user_pos})
    return _best_azimuth(*azimuth_offsets(single))


def closed_form_azimuth_irs2(geometry: ScenarioGeometry) -> float:
    """IRS-2 counterpart of :func:`closed_form_azimuth_irs1`."""
    g = geometry
    _require_ground_plane({"BS": g.bs_origin, "IRS 1": g.irs1_origin,
                           "IRS 2": g.irs2_origin, "user": g.user_pos})
    return _best_azimuth(*azimuth_offsets(g, "irs2"))


# ---------------------------------------------------------------------------
# Fitness functions
# ---------------------------------------------------------------------------

def penalized_fitness_los(geometry: ScenarioGeometry, orient: Orientation, tau: float,
                          surface: str = "irs1"):
    """Aperture gain of one surface minus the penalty on its two slacks.

    The other surface's orientation does not enter, so it is set to 0.
    """
    zero = Orientation(np.zeros_like(np.asarray(orient[0], float)),
                       np.zeros_like(np.asarray(orient[1], float)))
    if surface == "irs1":
        o1, o2 = orient, zero
    elif surface == "irs2":
        o1, o2 = zero, orient
    else:
        raise ValueError(f"unknown surface {surface!r}")
    ang = elevation_angles(geometry, o1, o2)
    z = feasibility_slacks(geometry, o1, o2)
    if surface == "irs1":
        return aperture_gain(ang.incident1, ang.reflected1) - tau * violation(z.bs_at_irs1,
                                                                             z.irs2_at_irs1)
    return aperture_gain(ang.incident2, ang.reflected2) - tau * violation(z.irs1_at_irs2,
                                                                         z.user_at_irs2)


def penalized_fitness_single(single: SingleGeometry, orient: Orientation, tau: float):
    return single_gain(single, orient) - tau * violation(*single_feasibility_slacks(single, orient))


def penalized_fitness_rician(orient1: Orientation, orient2: Optional[Orientation],
                             channels: ChannelSet, sol: BeamformingSolution, budget: LinkBudget,
                             tau: float, geometry, penalize: str = "all"):
    """SNR with the given beamformers minus the reflective-side penalty.

    ``channels`` must be synthesized for the same orientations. For a
    double-surface geometry ``penalize`` selects the slacks: ``"all"``
    (both surfaces), ``"irs1"`` or ``"irs2"``.
    """
    if isinstance(geometry, SingleGeometry):
        gain = single_gain(geometry, orient1)
        return snr(channels, sol, gain, 1.0, budget) - tau * violation(
            *single_feasibility_slacks(geometry, orient1))
    ang = elevation_angles(geometry, orient1, orient2)
    z = feasibility_slacks(geometry, orient1, orient2)
    g1 = aperture_gain(ang.incident1, ang.reflected1)
    g2 = aperture_gain(ang.incident2, ang.reflected2)
    picked = {"all": z, "irs1": z[:2], "irs2": z[2:]}[penalize]
    return snr(channels, sol, g1, g2, budget) - tau * violation(*picked)
