"""LoS and Rician channel synthesis for the BS -> IRS 1 -> IRS 2 -> user cascade.

Channel matrices are indexed ``[receiver, transmitter]``: ``G`` is N1 x M,
``S`` is N2 x N1 and ``f`` holds the N2 IRS-2 -> user coefficients, entering
the received signal as ``f^H``.

Amplitudes use the far-field anchor distances (t11, d11, r1) while LoS phases
use either the exact per-element distances (``los_model="spherical"``) or
their first-order planar expansion (``los_model="planar"``). The planar
model factors into signature vectors, e.g. ``G = outer(g2, g1)``.

Randomness comes from one integer master seed. Each link gets its own
stream through :func:`spawn_rng`, which feeds ``(seed, keys)`` to
:class:`numpy.random.SeedSequence` as entropy and spawn key.
"""
from __future__ import annotations

import math
import warnings
import zlib
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from .geometry import (Orientation, ScenarioGeometry, SingleGeometry, bs_antenna_positions,
                       irs_element_positions)

__all__ = [
    "RicianParams",
    "ChannelSet",
    "LosSignature",
    "spawn_rng",
    "complex_gaussian",
    "far_field_distances",
    "los_matrix",
    "los_signature_decomposition",
    "single_los_signature",
    "planar_user_channel",
    "mix_rician",
    "rician_channel",
    "ChannelSynthesizer",
    "synthesize_channels",
]

LINK_G, LINK_S, LINK_F = 0, 1, 2
FAR_FIELD_RATIO = 0.1


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("seed keys must be nonnegative")
        return int(k)
    # crc32 is stable across interpreter runs, unlike hash()
    return zlib.crc32(str(k).encode("utf-8"))


def spawn_rng(seed: int, *keys) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *keys)``.

    Keys may be nonnegative integers or strings. Distinct key tuples give
    statistically independent streams; identical tuples give identical ones.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples: real and imaginary parts each of variance 1/2."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


@dataclass(frozen=True)
class RicianParams:
    """Rician factors of the three links (linear, ``inf`` = pure LoS) and beta."""

    kappa_g: float = math.inf
    kappa_s: float = math.inf
    kappa_f: float = math.inf
    beta: float = 1e-4

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        for name in ("kappa_g", "kappa_s", "kappa_f"):
            k = getattr(self, name)
            if math.isnan(k) or k < 0:
                raise ValueError(f"{name} must be >= 0 or inf, got {k}")

    @classmethod
    def uniform(cls, kappa: float, beta: float) -> "RicianParams":
        return cls(kappa, kappa, kappa, beta)

    @classmethod
    def from_db(cls, kappa_db: float, beta_db: float) -> "RicianParams":
        kappa = math.inf if math.isinf(kappa_db) and kappa_db > 0 else 10 ** (kappa_db / 10)
        return cls.uniform(kappa, 10 ** (beta_db / 10))

    @property
    def is_los(self) -> bool:
        return all(math.isinf(k) for k in (self.kappa_g, self.kappa_s, self.kappa_f))


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One channel realization. ``S`` is ``None`` for a single-surface link."""

    G: np.ndarray
    S: Optional[np.ndarray]
    f: np.ndarray

    @property
    def single(self) -> bool:
        return self.S is None

    def rotated(self, alpha_g=0.0, alpha_s=0.0, alpha_f=0.0) -> "ChannelSet":
        """Copy with each link multiplied by a global phase."""
        S = None if self.S is None else self.S * np.exp(1j * alpha_s)
        return ChannelSet(self.G * np.exp(1j * alpha_g), S, self.f * np.exp(1j * alpha_f))


class LosSignature(NamedTuple):
    """Rank-one factors of the planar LoS channels: G = g2 g1^T, S = s2 s1^T.

    The complex link scalar (amplitude and common phase) is folded into
    ``g2`` and ``s2``; ``g1`` and ``s1`` have unit-modulus entries.
    """

    g1: np.ndarray
    g2: np.ndarray
    s1: Optional[np.ndarray] = None
    s2: Optional[np.ndarray] = None

    def G(self) -> np.ndarray:
        return np.multiply.outer(self.g2, self.g1)

    def S(self) -> Optional[np.ndarray]:
        if self.s1 is None:
            return None
        return np.multiply.outer(self.s2, self.s1)


def far_field_distances(geometry: ScenarioGeometry):
    """Anchor distances ``(t11, d11, r1)`` used for every channel amplitude."""
    g = geometry
    return (float(np.linalg.norm(g.bs_origin - g.irs1_origin)),
            float(np.linalg.norm(g.irs2_origin - g.irs1_origin)),
            float(np.linalg.norm(g.user_pos - g.irs2_origin)))


def _cis(phase: np.ndarray) -> np.ndarray:
    """``exp(1j*phase)`` for real input, written straight into a complex buffer."""
    out = np.empty(phase.shape, dtype=complex)
    parts = out.view(float).reshape(phase.shape + (2,))
    np.cos(phase, out=parts[..., 0])
    np.sin(phase, out=parts[..., 1])
    return out


def _distances(tx, rx):
    # per-coordinate accumulation avoids a (..., rx, tx, 3) temporary
    sq = np.zeros(np.broadcast_shapes(rx.shape[:-2], tx.shape[:-2])
                  + (rx.shape[-2], tx.shape[-2]))
    for k in range(3):
        diff = rx[..., :, None, k] - tx[..., None, :, k]
        sq += diff * diff
    return np.sqrt(sq)


def los_matrix(tx_positions, rx_positions, beta: float, wavelength: float,
               amp_distance: float) -> np.ndarray:
    """LoS matrix ``[rx, tx]`` with exact-distance phases and a common amplitude.

    Entry ``(n, m)`` is ``sqrt(beta)/amp_distance * exp(-2j*pi*t_nm/wavelength)``.
    """
    if not amp_distance > 0:
        raise ValueError("amp_distance must be positive")
    t = _distances(np.asarray(tx_positions, float), np.asarray(rx_positions, float))
    return math.sqrt(beta) / amp_distance * np.exp(-2j * np.pi * t / wavelength)


def _planar_factors(tx_offsets, rx_offsets, direction, distance, beta, wavelength):
    """Unit transmit steering vector and amplitude-carrying receive vector."""
    k = 2 * np.pi / wavelength
    tx_vec = np.exp(1j * k * (tx_offsets @ direction))
    scalar = math.sqrt(beta) / distance * np.exp(-1j * k * distance)
    rx_vec = scalar * np.exp(-1j * k * (rx_offsets @ direction))
    return tx_vec, rx_vec


def _aperture(positions) -> float:
    p = np.asarray(positions).reshape(-1, 3)
    return float(np.max(np.linalg.norm(p - p[0], axis=-1))) if len(p) > 1 else 0.0


def los_signature_decomposition(geometry: ScenarioGeometry, orient1: Orientation,
                                orient2: Orientation, beta: float = 1.0,
                                far_field_ratio: float = FAR_FIELD_RATIO) -> LosSignature:
    """Planar-wavefront signature vectors of the BS->IRS1 and IRS1->IRS2 links.

    Warns (does not fail) when an array aperture exceeds ``far_field_ratio``
    times the link distance.
    """
    g = geometry
    bs = bs_antenna_positions(g)
    p1 = irs_element_positions(g.irs1_origin, g.irs1_layout, orient1, "irs1")
    p2 = irs_element_positions(g.irs2_origin, g.irs2_layout, orient2, "irs2")
    t11, d11, _ = far_field_distances(g)
    u_g = (g.irs1_origin - g.bs_origin) / t11
    u_s = (g.irs2_origin - g.irs1_origin) / d11
    for name, pts, dist in (("BS", bs, t11), ("IRS 1", p1, min(t11, d11)), ("IRS 2", p2, d11)):
        if _aperture(pts) > far_field_ratio * dist:
            warnings.warn(f"{name} aperture {_aperture(pts):.3g} m is not small against "
                          f"link distance {dist:.3g} m; planar approximation is coarse",
                          RuntimeWarning, stacklevel=2)
    g1, g2 = _planar_factors(bs - g.bs_origin, p1 - g.irs1_origin, u_g, t11, beta,
                             wavelength=g.wavelength)
    s1, s2 = _planar_factors(p1 - g.irs1_origin, p2 - g.irs2_origin, u_s, d11, beta,
                             wavelength=g.wavelength)
    return LosSignature(g1, g2, s1, s2)


def planar_user_channel(geometry, orient: Orientation, beta: float = 1.0) -> np.ndarray:
    """Planar LoS coefficients from the last surface to the user.

    ``geometry`` is a :class:`ScenarioGeometry` (IRS 2 -> user) or a
    :class:`SingleGeometry` (surface -> user).
    """
    if isinstance(geometry, SingleGeometry):
        origin, layout, surface = geometry.irs_origin, geometry.irs_layout, "irs1"
    else:
        origin, layout, surface = geometry.irs2_origin, geometry.irs2_layout, "irs2"
    p = irs_element_positions(origin, layout, orient, surface)
    r = float(np.linalg.norm(geometry.user_pos - origin))
    tx_vec, rx_vec = _planar_factors(p - origin, np.zeros((1, 3)), (geometry.user_pos - origin) / r,
                                     r, beta, geometry.wavelength)
    return rx_vec[0] * tx_vec


def single_los_signature(single: SingleGeometry, orient: Orientation,
                         beta: float = 1.0) -> LosSignature:
    """Signature of the BS -> surface link of a single-surface scenario (``s1 = s2 = None``)."""
    bs = bs_antenna_positions(single)
    p = irs_element_positions(single.irs_origin, single.irs_layout, orient, "irs1")
    t = float(np.linalg.norm(single.irs_origin - single.bs_origin))
    g1, g2 = _planar_factors(bs - single.bs_origin, p - single.irs_origin,
                             (single.irs_origin - single.bs_origin) / t, t, beta,
                             wavelength=single.wavelength)
    return LosSignature(g1, g2)


def mix_rician(los: np.ndarray, nlos: np.ndarray, kappa: float) -> np.ndarray:
    """``sqrt(k/(k+1)) * los + sqrt(1/(k+1)) * nlos``; ``inf`` returns ``los``."""
    if math.isinf(kappa):
        return los
    return math.sqrt(kappa / (kappa + 1)) * los + math.sqrt(1 / (kappa + 1)) * nlos


def rician_channel(los: np.ndarray, kappa: float, beta: float, amp_distance: float,
                   rng_seed) -> np.ndarray:
    """Rician realization around ``los`` with i.i.d. NLoS of power beta/amp_distance^2.

    ``rng_seed`` may be an integer or a :class:`numpy.random.Generator`.
    """
    if math.isinf(kappa):
        return los
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else spawn_rng(rng_seed)
    nlos = math.sqrt(beta) / amp_distance * complex_gaussian(rng, np.shape(los))
    return mix_rician(los, nlos, kappa)


class ChannelSynthesizer:
    """Channels of one fading trial as a function of the surface orientations.

    NLoS components are drawn once, at construction, from sub-streams of
    ``seed``; every call re-derives the LoS components for the requested
    orientations and reuses the frozen draws. Orientation arguments may be
    batches, in which case the outputs gain the same leading shape.

    Parameters
    ----------
    geometry : ScenarioGeometry or SingleGeometry
    params : RicianParams
        For a single surface ``kappa_g`` and ``kappa_f`` apply to the
        BS -> IRS and IRS -> user links.
    seed : int
    los_model : {"spherical", "planar"}
    nlos_amplitude : {"anchor", "element"}
        Scale NLoS entries by the anchor distance or the per-element one.
    """

    def __init__(self, geometry: Union[ScenarioGeometry, SingleGeometry], params: RicianParams,
                 seed: int = 0, los_model: str = "spherical", nlos_amplitude: str = "anchor"):
        if los_model not in ("spherical", "planar"):
            raise ValueError(f"unknown los_model {los_model!r}")
        if nlos_amplitude not in ("anchor", "element"):
            raise ValueError(f"unknown nlos_amplitude {nlos_amplitude!r}")
        self.geometry = geometry
        self.params = params
        self.seed = seed
        self.los_model = los_model
        self.nlos_amplitude = nlos_amplitude
        self.single = isinstance(geometry, SingleGeometry)
        self._bs = bs_antenna_positions(geometry)
        g = geometry
        if self.single:
            self._shapes = {LINK_G: (g.n, g.m), LINK_F: (g.n,)}
            self._kappa = {LINK_G: params.kappa_g, LINK_F: params.kappa_f}
            self._amp = {LINK_G: float(np.linalg.norm(g.bs_origin - g.irs_origin)),
                         LINK_F: float(np.linalg.norm(g.user_pos - g.irs_origin))}
        else:
            t11, d11, r1 = far_field_distances(g)
            self._shapes = {LINK_G: (g.n1, g.m), LINK_S: (g.n2, g.n1), LINK_F: (g.n2,)}
            self._kappa = {LINK_G: params.kappa_g, LINK_S: params.kappa_s, LINK_F: params.kappa_f}
            self._amp = {LINK_G: t11, LINK_S: d11, LINK_F: r1}
        self._nlos = {link: complex_gaussian(spawn_rng(seed, link), shape)
                      for link, shape in self._shapes.items()
                      if not math.isinf(self._kappa[link])}

    def _link(self, link, tx, rx, tx0, rx0, rng=None):
        beta, k = self.params.beta, 2 * np.pi / self.geometry.wavelength
        amp = self._amp[link]
        kappa = self._kappa[link]
        mixed = link in self._nlos
        need_dist = self.los_model == "spherical" or (mixed and self.nlos_amplitude == "element")
        dist = _distances(tx, rx) if need_dist else None
        if self.los_model == "spherical":
            phase = dist * -k
        else:
            direction = (rx0 - tx0) / amp
            tx_phase = (tx - tx0) @ direction
            rx_phase = (rx - rx0) @ direction
            phase = -k * (amp + rx_phase[..., :, None] - tx_phase[..., None, :])
        los = _cis(phase)
        # scale in place: this runs once per PSO candidate batch
        los *= math.sqrt(beta) / amp * (math.sqrt(kappa / (kappa + 1)) if mixed else 1.0)
        if not mixed:
            return los
        weight = math.sqrt(beta / (kappa + 1))
        if rng is None:
            unit = self._nlos[link].reshape(los.shape[-2:])
        else:
            unit = complex_gaussian(rng, los.shape)
        if self.nlos_amplitude == "element":
            los += (weight / dist) * unit
        else:
            los += (weight / amp) * unit
        return los

    def __call__(self, orient1: Orientation, orient2: Optional[Orientation] = None,
                 rng: Optional[np.random.Generator] = None) -> ChannelSet:
        """Channels for the given orientation(s).

        Passing ``rng`` replaces the frozen NLoS draws by fresh ones, drawn
        independently for every orientation in a batch.
        """
        g = self.geometry
        user = g.user_pos[None, :]
        if self.single:
            p = irs_element_positions(g.irs_origin, g.irs_layout, orient1, "irs1")
            G = self._link(LINK_G, self._bs, p, g.bs_origin, g.irs_origin, rng)
            f = self._link(LINK_F, p, user, g.irs_origin, g.user_pos, rng)
            return ChannelSet(G, None, np.swapaxes(f, -1, -2)[..., 0])
        if orient2 is None:
            raise ValueError("double-surface synthesis needs both orientations")
        p1 = irs_element_positions(g.irs1_origin, g.irs1_layout, orient1, "irs1")
        p2 = irs_element_positions(g.irs2_origin, g.irs2_layout, orient2, "irs2")
        G = self._link(LINK_G, self._bs, p1, g.bs_origin, g.irs1_origin, rng)
        S = self._link(LINK_S, p1, p2, g.irs1_origin, g.irs2_origin, rng)
        f = self._link(LINK_F, p2, user, g.irs2_origin, g.user_pos, rng)
        return ChannelSet(G, S, np.swapaxes(f, -1, -2)[..., 0])


def synthesize_channels(geometry, orient1: Orientation, orient2: Optional[Orientation],
                        params: RicianParams, seed: int = 0, los_model: str = "spherical",
                        nlos_amplitude: str = "anchor") -> ChannelSet:
    """One channel realization; identical arguments give bit-identical output."""
    synth = ChannelSynthesizer(geometry, params, seed, los_model, nlos_amplitude)
    return synth(orient1, orient2)
