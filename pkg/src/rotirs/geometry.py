"""Scenario geometry for double rotatable reflecting-surface links.

All angles are in radians. Orientations, rotation matrices and element
positions broadcast over leading array dimensions, so a whole particle swarm
can be evaluated in one call::

    >>> orient = Orientation(np.array([0.0, 0.3]), np.array([0.0, -0.2]))
    >>> rotation_matrix_irs1(orient).shape
    (2, 3, 3)

The two surfaces use mirrored local frames,
which differ in the sign of the azimuth terms. The surface normal is always
the third column of the rotation matrix, and every reflective-side slack is
the local z-coordinate of the relevant node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateGeometryError, DomainError

__all__ = [
    "ANGLE_BOUND",
    "Orientation",
    "ArrayLayout",
    "ScenarioGeometry",
    "SingleGeometry",
    "ElevationAngles",
    "ReflectionSlacks",
    "rotation_matrix_irs1",
    "rotation_matrix_irs2",
    "rotation_matrix",
    "surface_normal",
    "irs_element_positions",
    "bs_antenna_positions",
    "local_coordinates",
    "elevation_angles",
    "aperture_gain",
    "feasibility_slacks",
    "surface_gains",
    "single_elevation_angles",
    "single_feasibility_slacks",
    "single_gain",
    "single_irs_geometry",
]

ANGLE_BOUND = np.pi / 2
# round-off slack when validating angles produced by projections/conversions
_ANGLE_TOL = 1e-12
_SURFACES = ("irs1", "irs2")


class Orientation(NamedTuple):
    """Azimuth/elevation pair of one surface normal (radians).

    Either field may be an array; the pair then describes a batch of
    orientations with broadcast shape.
    """

    theta: float
    phi: float

    @classmethod
    def from_degrees(cls, theta_deg, phi_deg) -> "Orientation":
        return cls(np.deg2rad(theta_deg), np.deg2rad(phi_deg))

    @classmethod
    def from_array(cls, arr) -> "Orientation":
        """Split a ``(..., 2)`` array into an orientation batch."""
        arr = np.asarray(arr, dtype=float)
        return cls(arr[..., 0], arr[..., 1])

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(np.asarray(self.theta, float),
                                            np.asarray(self.phi, float)), axis=-1)


def _checked_angles(orient: Orientation):
    theta = np.asarray(orient[0], dtype=float)
    phi = np.asarray(orient[1], dtype=float)
    for name, val in (("theta", theta), ("phi", phi)):
        if not np.all(np.isfinite(val)):
            raise DomainError(f"{name} must be finite")
        if np.any(np.abs(val) > ANGLE_BOUND + _ANGLE_TOL):
            worst = float(val.flat[np.argmax(np.abs(val))])
            raise DomainError(
                f"{name}={worst!r} rad is outside the feasible interval [-pi/2, pi/2]")
    return theta, phi


@dataclass(frozen=True)
class ArrayLayout:
    """Uniform planar array of ``rows x cols`` elements, row-major numbering."""

    rows: int
    cols: int
    spacing: float

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise ValueError("rows and cols must be integers")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array layout must be nonempty, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

    @property
    def size(self) -> int:
        return int(self.rows * self.cols)

    def indices(self):
        """Row and column index of every element, element 1 first.

        Uses ``row = floor((n-1)/cols)`` and ``col = n - cols*row - 1``.
        """
        n = np.arange(1, self.size + 1)
        row = (n - 1) // self.cols
        col = n - self.cols * row - 1
        return row, col

    @classmethod
    def square(cls, n: int, spacing: float) -> "ArrayLayout":
        """Most nearly square layout with exactly ``n`` elements (rows <= cols)."""
        if n < 1:
            raise ValueError(f"element count must be positive, got {n}")
        rows = max(d for d in range(1, math.isqrt(n) + 1) if n % d == 0)
        return cls(rows, n // rows, spacing)


def _vec3(v, name) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise DegenerateGeometryError(f"{name} must be a finite 3-vector, got {v!r}")
    return arr


def _check_distinct(points: dict):
    names = list(points)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if np.linalg.norm(points[a] - points[b]) <= 1e-12:
                raise DegenerateGeometryError(f"{a} and {b} coincide")


@dataclass(frozen=True, eq=False)
class ScenarioGeometry:
    """Anchor positions (first element of each array), layouts and wavelength."""

    bs_origin: np.ndarray
    irs1_origin: np.ndarray
    irs2_origin: np.ndarray
    user_pos: np.ndarray
    bs_layout: ArrayLayout
    irs1_layout: ArrayLayout
    irs2_layout: ArrayLayout
    wavelength: float

    def __post_init__(self):
        for name in ("bs_origin", "irs1_origin", "irs2_origin", "user_pos"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))
        if not self.wavelength > 0:
            raise DegenerateGeometryError(f"wavelength must be positive, got {self.wavelength}")
        _check_distinct({"BS": self.bs_origin, "IRS 1": self.irs1_origin,
                         "IRS 2": self.irs2_origin, "user": self.user_pos})

    @property
    def m(self) -> int:
        return self.bs_layout.size

    @property
    def n1(self) -> int:
        return self.irs1_layout.size

    @property
    def n2(self) -> int:
        return self.irs2_layout.size

    def with_sizes(self, m: Optional[int] = None, n1: Optional[int] = None,
                   n2: Optional[int] = None) -> "ScenarioGeometry":
        """Copy with near-square layouts of the requested element counts."""
        changes = {}
        if m is not None:
            changes["bs_layout"] = ArrayLayout.square(m, self.bs_layout.spacing)
        if n1 is not None:
            changes["irs1_layout"] = ArrayLayout.square(n1, self.irs1_layout.spacing)
        if n2 is not None:
            changes["irs2_layout"] = ArrayLayout.square(n2, self.irs2_layout.spacing)
        return replace(self, **changes)

    def projected_to_ground(self) -> "ScenarioGeometry":
        """Copy with every anchor moved to the z = 0 plane."""
        def flat(p):
            return np.array([p[0], p[1], 0.0])
        return replace(self, bs_origin=flat(self.bs_origin), irs1_origin=flat(self.irs1_origin),
                       irs2_origin=flat(self.irs2_origin), user_pos=flat(self.user_pos))


@dataclass(frozen=True, eq=False)
class SingleGeometry:
    """BS, one reflecting surface and the user. The surface uses the IRS-1 frame."""

    bs_origin: np.ndarray
    irs_origin: np.ndarray
    user_pos: np.ndarray
    bs_layout: ArrayLayout
    irs_layout: ArrayLayout
    wavelength: float

    def __post_init__(self):
        for name in ("bs_origin", "irs_origin", "user_pos"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))
        if not self.wavelength > 0:
            raise DegenerateGeometryError(f"wavelength must be positive, got {self.wavelength}")
        _check_distinct({"BS": self.bs_origin, "IRS": self.irs_origin, "user": self.user_pos})

    @property
    def m(self) -> int:
        return self.bs_layout.size

    @property
    def n(self) -> int:
        return self.irs_layout.size


def single_irs_geometry(geometry: ScenarioGeometry, position=None,
                        n_elements: Optional[int] = None) -> SingleGeometry:
    """Single-surface counterpart of a double-surface scenario.

    The surface sits at ``position`` (default: the IRS-1 anchor) and carries
    ``n_elements`` elements (default: N1 + N2) in a near-square layout.
    """
    pos = geometry.irs1_origin if position is None else position
    n = geometry.n1 + geometry.n2 if n_elements is None else n_elements
    return SingleGeometry(geometry.bs_origin, pos, geometry.user_pos, geometry.bs_layout,
                          ArrayLayout.square(n, geometry.irs1_layout.spacing), geometry.wavelength)


def _stack_matrix(rows):
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def rotation_matrix_irs1(orient: Orientation) -> np.ndarray:
    """Rotation matrix of IRS 1; columns are the local x, y, z axes.

    >>> np.round(rotation_matrix_irs1(Orientation(0.0, 0.0)), 12) + 0.0
    array([[ 0.,  0.,  1.],
           [ 0.,  1.,  0.],
           [-1.,  0.,  0.]])
    """
    theta, phi = _checked_angles(orient)
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    ct, st, cp, sp = np.broadcast_arrays(ct, st, cp, sp)
    zero = np.zeros_like(ct)
    return _stack_matrix([
        (ct * sp, -st, ct * cp),
        (st * sp, ct, st * cp),
        (-cp, zero, sp),
    ])


def rotation_matrix_irs2(orient: Orientation) -> np.ndarray:
    """Rotation matrix of IRS 2 (azimuth enters with the opposite sign)."""
    theta, phi = _checked_angles(orient)
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    ct, st, cp, sp = np.broadcast_arrays(ct, st, cp, sp)
    zero = np.zeros_like(ct)
    return _stack_matrix([
        (ct * sp, st, ct * cp),
        (-st * sp, ct, -st * cp),
        (-cp, zero, sp),
    ])


def rotation_matrix(orient: Orientation, surface: str = "irs1") -> np.ndarray:
    if surface == "irs1":
        return rotation_matrix_irs1(orient)
    if surface == "irs2":
        return rotation_matrix_irs2(orient)
    raise ValueError(f"surface must be one of {_SURFACES}, got {surface!r}")


def surface_normal(orient: Orientation, surface: str = "irs1") -> np.ndarray:
    return rotation_matrix(orient, surface)[..., :, 2]


def _axis_vectors(orient: Orientation, surface: str):
    theta, phi = _checked_angles(orient)
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    ct, st, cp, sp = np.broadcast_arrays(ct, st, cp, sp)
    zero = np.zeros_like(ct)
    if surface == "irs1":
        m_row = np.stack([st, -ct, zero], axis=-1)
        m_col = np.stack([-ct * sp, -st * sp, cp], axis=-1)
    elif surface == "irs2":
        m_row = np.stack([st, ct, zero], axis=-1)
        m_col = np.stack([-ct * sp, st * sp, cp], axis=-1)
    else:
        raise ValueError(f"surface must be one of {_SURFACES}, got {surface!r}")
    return m_row, m_col


def irs_element_positions(origin, layout: ArrayLayout, orient: Orientation,
                          which: str = "irs1") -> np.ndarray:
    """Global coordinates of every surface element, shape ``(..., N, 3)``.

    Element ``n`` sits at ``origin + col*l*m_r + row*l*m_c`` where ``m_r`` and
    ``m_c`` are the in-plane axis vectors of the rotated surface.
    """
    origin = np.asarray(origin, dtype=float)
    m_row, m_col = _axis_vectors(orient, which)
    row, col = layout.indices()
    l = layout.spacing
    return (origin
            + (col * l)[:, None] * m_row[..., None, :]
            + (row * l)[:, None] * m_col[..., None, :])


_BS_ROW_AXIS = np.array([0.0, 1.0, 0.0])
_BS_COL_AXIS = np.array([-1.0, 0.0, 0.0])


def bs_antenna_positions(geometry) -> np.ndarray:
    """BS antenna coordinates, shape ``(M, 3)``; antenna 1 at the BS anchor."""
    row, col = geometry.bs_layout.indices()
    l = geometry.bs_layout.spacing
    return (geometry.bs_origin
            + (col * l)[:, None] * _BS_COL_AXIS
            + (row * l)[:, None] * _BS_ROW_AXIS)


def local_coordinates(point, frame_origin, rotation) -> np.ndarray:
    """Coordinates of ``point`` in the frame ``(frame_origin, rotation)``: Q^T (p - o)."""
    offset = np.asarray(point, dtype=float) - np.asarray(frame_origin, dtype=float)
    q = np.asarray(rotation, dtype=float)
    return np.einsum("...ji,...j->...i", q, offset)


class ElevationAngles(NamedTuple):
    incident1: np.ndarray
    reflected1: np.ndarray
    incident2: np.ndarray
    reflected2: np.ndarray


class ReflectionSlacks(NamedTuple):
    """Local z-coordinates that must be nonnegative for reflection."""

    bs_at_irs1: np.ndarray
    irs2_at_irs1: np.ndarray
    irs1_at_irs2: np.ndarray
    user_at_irs2: np.ndarray

    def all_feasible(self, tol: float = 0.0):
        return np.all(np.stack(np.broadcast_arrays(*self)) >= -tol, axis=0)


def _elevation(local_z, distance):
    # round-off can push the ratio a hair outside [-1, 1]
    return np.arccos(np.clip(local_z / distance, -1.0, 1.0))


def feasibility_slacks(geometry: ScenarioGeometry, orient1: Orientation,
                       orient2: Orientation) -> ReflectionSlacks:
    q1 = rotation_matrix_irs1(orient1)
    q2 = rotation_matrix_irs2(orient2)
    g = geometry
    return ReflectionSlacks(
        local_coordinates(g.bs_origin, g.irs1_origin, q1)[..., 2],
        local_coordinates(g.irs2_origin, g.irs1_origin, q1)[..., 2],
        local_coordinates(g.irs1_origin, g.irs2_origin, q2)[..., 2],
        local_coordinates(g.user_pos, g.irs2_origin, q2)[..., 2],
    )


def elevation_angles(geometry: ScenarioGeometry, orient1: Orientation,
                     orient2: Orientation) -> ElevationAngles:
    """Incident/reflected elevation angles at both surfaces, each in [0, pi]."""
    g = geometry
    z = feasibility_slacks(g, orient1, orient2)
    t11 = np.linalg.norm(g.bs_origin - g.irs1_origin)
    d11 = np.linalg.norm(g.irs2_origin - g.irs1_origin)
    r1 = np.linalg.norm(g.user_pos - g.irs2_origin)
    return ElevationAngles(
        _elevation(z.bs_at_irs1, t11),
        _elevation(z.irs2_at_irs1, d11),
        _elevation(z.irs1_at_irs2, d11),
        _elevation(z.user_at_irs2, r1),
    )


def aperture_gain(phi_i, phi_r):
    """Effective aperture gain ``cos(phi_i) * cos(phi_r)``."""
    return np.cos(phi_i) * np.cos(phi_r)


def surface_gains(geometry: ScenarioGeometry, orient1: Orientation, orient2: Orientation):
    ang = elevation_angles(geometry, orient1, orient2)
    return (aperture_gain(ang.incident1, ang.reflected1),
            aperture_gain(ang.incident2, ang.reflected2))


def single_feasibility_slacks(single: SingleGeometry, orient: Orientation):
    """(BS slack, user slack) in the local frame of the single surface."""
    q = rotation_matrix_irs1(orient)
    return (local_coordinates(single.bs_origin, single.irs_origin, q)[..., 2],
            local_coordinates(single.user_pos, single.irs_origin, q)[..., 2])


def single_elevation_angles(single: SingleGeometry, orient: Orientation):
    z_b, z_u = single_feasibility_slacks(single, orient)
    t = np.linalg.norm(single.bs_origin - single.irs_origin)
    r = np.linalg.norm(single.user_pos - single.irs_origin)
    return _elevation(z_b, t), _elevation(z_u, r)


def single_gain(single: SingleGeometry, orient: Orientation):
    return aperture_gain(*single_elevation_angles(single, orient))
