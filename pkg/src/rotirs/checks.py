"""Invariant suites run by ``rotirs prop-check``.

Each check draws seeded random instances and returns a :class:`CheckResult`;
the suites are cheap enough to run in a few seconds at desk scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .beamform import (BeamformingSolution, LinkBudget, irs1_phases, irs2_phases, mrt_weights,
                       snr)
from .channel import RicianParams, synthesize_channels
from .experiment import default_geometry
from .geometry import (Orientation, elevation_angles, feasibility_slacks, irs_element_positions,
                       local_coordinates, rotation_matrix, surface_gains)
from .rotation import PsoConfig, pso_optimize
from .solver import (DOUBLE_FIXED, DOUBLE_ROTATABLE, SINGLE_FIXED, SINGLE_ROTATABLE, solve_ao_pso,
                     solve_los, upper_bound_snr)

__all__ = ["CheckResult", "SUITES", "run_suite"]


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.suite}.{self.name}" + (f": {self.detail}" if self.detail else "")


def _random_orientations(rng, n):
    return Orientation(rng.uniform(-math.pi / 2, math.pi / 2, n),
                       rng.uniform(-math.pi / 2, math.pi / 2, n))


def _geometry_checks(rng) -> Dict[str, tuple]:
    o = _random_orientations(rng, 200)
    out = {}
    for surface in ("irs1", "irs2"):
        Q = rotation_matrix(o, surface)
        ortho = np.abs(np.swapaxes(Q, -1, -2) @ Q - np.eye(3)).max()
        det = np.abs(np.abs(np.linalg.det(Q)) - 1).max()
        out[f"{surface}_orthonormal"] = (ortho < 1e-12 and det < 1e-12,
                                         f"max |Q^T Q - I| = {ortho:.1e}")
    geom = default_geometry(4, 16, 16)
    p = irs_element_positions(geom.irs1_origin, geom.irs1_layout, o, "irs1")
    z = local_coordinates(p, geom.irs1_origin, rotation_matrix(o, "irs1")[..., None, :, :])[..., 2]
    out["elements_in_surface_plane"] = (np.abs(z).max() < 1e-12, f"max |z| = {np.abs(z).max():.1e}")
    g1, g2 = surface_gains(geom, o, o)
    feas = feasibility_slacks(geom, o, o)
    ok1 = np.all(np.abs(g1) <= 1 + 1e-12) and np.all(g1[(feas.bs_at_irs1 >= 0)
                                                          & (feas.irs2_at_irs1 >= 0)] >= 0)
    ok2 = np.all(np.abs(g2) <= 1 + 1e-12) and np.all(g2[(feas.irs1_at_irs2 >= 0)
                                                          & (feas.user_at_irs2 >= 0)] >= 0)
    out["gains_bounded"] = (bool(ok1 and ok2), "|F| <= 1, and F >= 0 when feasible")
    ang = elevation_angles(geom, o, o)
    d = np.linalg.norm(geom.bs_origin - geom.irs1_origin)
    err = np.abs(np.cos(ang.incident1) * d - feas.bs_at_irs1).max()
    out["slack_elevation_consistent"] = (err < 1e-9, f"max error {err:.1e} m")
    return out


def _channel_checks(rng) -> Dict[str, tuple]:
    geom = default_geometry(4, 16, 16)
    o = Orientation(-1.2, -0.1)
    params = RicianParams.uniform(1.0, 1e-4)
    a = synthesize_channels(geom, o, o, params, seed=7)
    b = synthesize_channels(geom, o, o, params, seed=7)
    same = all(np.array_equal(x, y) for x, y in ((a.G, b.G), (a.S, b.S), (a.f, b.f)))
    sph = synthesize_channels(geom, o, o, RicianParams(), seed=0)
    pla = synthesize_channels(geom, o, o, RicianParams(), seed=0, los_model="planar")
    # the two LoS models agree in magnitude and nearly in the rank-one structure
    s_sph = np.linalg.svd(sph.S, compute_uv=False)
    s_pla = np.linalg.svd(pla.S, compute_uv=False)
    return {
        "seeded_determinism": (same, ""),
        "los_magnitudes_equal": (np.allclose(np.abs(sph.G), np.abs(pla.G), rtol=1e-12), ""),
        "planar_rank_one": (s_pla[1] / s_pla[0] < 1e-10, f"sigma2/sigma1 = {s_pla[1] / s_pla[0]:.1e}"),
        "spherical_near_rank_one": (s_sph[1] / s_sph[0] < 0.1,
                                    f"sigma2/sigma1 = {s_sph[1] / s_sph[0]:.2e}"),
    }


def _beamform_checks(rng) -> Dict[str, tuple]:
    budget = LinkBudget(1.0, 1.0)
    worst = 0.0
    for seed in range(10):
        geom = default_geometry(4, 8, 8)
        o = Orientation(-1.2, -0.1)
        ch = synthesize_channels(geom, o, o, RicianParams.uniform(1.0, 1e-4), seed=seed)
        sol = BeamformingSolution(np.full(4, 0.5 + 0j), rng.uniform(-np.pi, np.pi, 8),
                                  rng.uniform(-np.pi, np.pi, 8))
        vals = [snr(ch, sol, 1, 1, budget)]
        sol = BeamformingSolution(mrt_weights(ch, sol.psi1, sol.psi2, budget), sol.psi1, sol.psi2)
        vals.append(snr(ch, sol, 1, 1, budget))
        sol = BeamformingSolution(sol.w, irs1_phases(ch, sol.psi2, sol.w), sol.psi2)
        vals.append(snr(ch, sol, 1, 1, budget))
        sol = BeamformingSolution(sol.w, sol.psi1, irs2_phases(ch, sol.psi1, sol.w))
        vals.append(snr(ch, sol, 1, 1, budget))
        vals = np.array(vals)
        worst = min(worst, float(np.min(np.diff(vals) / vals[:-1])))
    return {"block_updates_monotone": (worst > -1e-9, f"worst relative step {worst:.1e}")}


def _rotation_checks(rng) -> Dict[str, tuple]:
    def sphere(x):
        return -np.sum((x - 0.3) ** 2, axis=-1)
    res = pso_optimize(sphere, 3, PsoConfig(seed=int(rng.integers(2 ** 31))))
    pos = res.state.positions
    return {
        "trace_nondecreasing": (bool(np.all(np.diff(res.trace) >= 0)), ""),
        "positions_in_box": (bool(np.all(np.abs(pos) <= math.pi / 2)), ""),
        "finds_interior_optimum": (res.best_fitness > -1e-4, f"best {res.best_fitness:.2e}"),
    }


def _solver_checks(rng) -> Dict[str, tuple]:
    geom = default_geometry(4, 16, 16)
    budget = LinkBudget.from_dbm(30, -80)
    pso = PsoConfig(early_stop=True)
    results = {s.name: solve_los(geom, budget, s, pso=pso, with_solution=False)
               for s in (DOUBLE_ROTATABLE, DOUBLE_FIXED, SINGLE_ROTATABLE, SINGLE_FIXED)}
    ub = upper_bound_snr(geom, budget)
    worst = 0.0
    for seed in range(3):
        st = solve_ao_pso(geom.with_sizes(n1=8, n2=8), RicianParams.uniform(1.0, 1e-4), budget,
                          pso, seed=seed)
        tr = np.array(st.objective_trace)
        worst = min(worst, float(np.min(np.diff(tr) / tr[:-1])))
    return {
        "double_dominates_fixed": (results["double-rotatable"].snr
                                   >= results["double-fixed"].snr * (1 - 1e-9), ""),
        "single_dominates_fixed": (results["single-rotatable"].snr
                                   >= results["single-fixed"].snr * (1 - 1e-9), ""),
        "upper_bound_holds": (results["double-rotatable"].snr <= ub * (1 + 1e-12), ""),
        "ao_trace_monotone": (worst > -1e-9, f"worst relative step {worst:.1e}"),
    }


SUITES: Dict[str, Callable] = {
    "geometry": _geometry_checks,
    "channel": _channel_checks,
    "beamform": _beamform_checks,
    "rotation": _rotation_checks,
    "solver": _solver_checks,
}


def run_suite(name: str, seed: int = 0) -> List[CheckResult]:
    """Run one suite, or every suite for ``name == "all"``."""
    if name == "all":
        return [r for n in SUITES for r in run_suite(n, seed)]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}, expected one of {sorted(SUITES) + ['all']}")
    rng = np.random.default_rng(seed)
    return [CheckResult(name, key, bool(ok), detail)
            for key, (ok, detail) in SUITES[name](rng).items()]
