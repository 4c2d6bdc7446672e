"""Closed-form transmit and passive beamforming, and SNR evaluation.

The received SNR of the double-reflection link is

    gain1 * gain2 * |f^H Phi2 S Phi1 G w|^2 / noise_power

with ``Phi = diag(exp(1j*psi))``. Each of :func:`mrt_weights`,
:func:`irs1_phases` and :func:`irs2_phases` is the exact maximizer of this
objective over its own block with the other two held fixed, so applying any
of them never lowers the SNR.

A :class:`~rotirs.channel.ChannelSet` whose ``S`` is ``None`` describes a
single-reflection link ``f^H Phi G w``; the functions below accept it and
ignore ``psi2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, LosSignature, RicianParams, far_field_distances
from .errors import DegenerateChannelError

__all__ = [
    "LinkBudget",
    "BeamformingSolution",
    "wrap_phase",
    "cascade",
    "snr",
    "mrt_weights",
    "irs1_phases",
    "irs2_phases",
    "los_closed_form",
    "snr_los_closed_form",
    "snr_los_single_irs",
    "dbm_to_watts",
    "db_to_linear",
    "linear_to_db",
]


def dbm_to_watts(dbm):
    return 10 ** ((np.asarray(dbm, dtype=float) - 30) / 10)


def db_to_linear(db):
    return 10 ** (np.asarray(db, dtype=float) / 10)


def linear_to_db(x):
    return 10 * np.log10(x)


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power and noise power, both in watts."""

    pt: float
    noise_power: float

    def __post_init__(self):
        if not (self.pt > 0 and self.noise_power > 0):
            raise ValueError(f"pt and noise_power must be positive, got {self.pt}, {self.noise_power}")

    @classmethod
    def from_dbm(cls, pt_dbm: float, noise_dbm: float) -> "LinkBudget":
        return cls(float(dbm_to_watts(pt_dbm)), float(dbm_to_watts(noise_dbm)))


@dataclass(frozen=True, eq=False)
class BeamformingSolution:
    """BS weights ``w`` and the phase vectors of both surfaces (radians)."""

    w: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray

    @classmethod
    def initial(cls, m: int, n1: int, n2: int, pt: float) -> "BeamformingSolution":
        """Uniform power over the antennas and zero phases."""
        return cls(np.full(m, math.sqrt(pt / m), dtype=complex), np.zeros(n1), np.zeros(n2))


def wrap_phase(x):
    """Map phases into [-pi, pi)."""
    return (np.asarray(x, dtype=float) + np.pi) % (2 * np.pi) - np.pi


def _forward_to_irs2(channels: ChannelSet, psi1, w):
    """``S Phi1 G w`` (or ``Phi1 G w`` for a single surface)."""
    x = np.exp(1j * psi1) * (channels.G @ w)
    if channels.S is None:
        return x
    return (channels.S @ x[..., None])[..., 0]


def cascade(channels: ChannelSet, sol: BeamformingSolution):
    """Complex end-to-end gain ``f^H Phi2 S Phi1 G w``; broadcasts over channel batches."""
    x = _forward_to_irs2(channels, sol.psi1, sol.w)
    if channels.S is not None:
        x = np.exp(1j * sol.psi2) * x
    return np.sum(np.conj(channels.f) * x, axis=-1)


def snr(channels: ChannelSet, sol: BeamformingSolution, gain1, gain2, budget: LinkBudget):
    """Linear received SNR including the two aperture gains.

    Raises
    ------
    ValueError
        If the solution dimensions do not match the channels.
    """
    m = channels.G.shape[-1]
    n1 = channels.G.shape[-2]
    if sol.w.shape[-1] != m or np.shape(sol.psi1)[-1] != n1:
        raise ValueError(f"solution sized for M={sol.w.shape[-1]}, N1={np.shape(sol.psi1)[-1]} "
                         f"but channels have M={m}, N1={n1}")
    if channels.S is not None and np.shape(sol.psi2)[-1] != channels.S.shape[-2]:
        raise ValueError(f"psi2 has {np.shape(sol.psi2)[-1]} entries, S has "
                         f"{channels.S.shape[-2]} rows")
    c = cascade(channels, sol)
    return np.asarray(gain1) * np.asarray(gain2) * np.abs(c) ** 2 / budget.noise_power


def _effective_row(channels: ChannelSet, psi1, psi2):
    """Row vector ``f^H Phi2 S Phi1 G`` seen by the BS."""
    v = np.conj(channels.f)
    if channels.S is not None:
        v = (v * np.exp(1j * psi2)) @ channels.S
    return (v * np.exp(1j * psi1)) @ channels.G


def mrt_weights(channels: ChannelSet, psi1, psi2, budget: LinkBudget) -> np.ndarray:
    """Maximum ratio transmission ``sqrt(Pt) h / ||h||`` for ``h^H = f^H Phi2 S Phi1 G``."""
    row = _effective_row(channels, psi1, psi2)
    norm = np.linalg.norm(row)
    if norm == 0:
        raise DegenerateChannelError("effective BS channel is zero; MRT is undefined")
    return math.sqrt(budget.pt) * np.conj(row) / norm


def _cophase(terms):
    """Phases that rotate every term onto the real axis; zero terms get 0."""
    if not np.any(terms != 0):
        raise DegenerateChannelError("every reflected term is zero; phases are undefined")
    return wrap_phase(np.where(terms != 0, -np.angle(terms), 0.0))


def irs1_phases(channels: ChannelSet, psi2, w) -> np.ndarray:
    """Optimal IRS-1 phases ``arg(h_n) - arg(g_n)`` with ``h^H = f^H Phi2 S`` and ``g = G w``."""
    v = np.conj(channels.f)
    if channels.S is not None:
        v = (v * np.exp(1j * psi2)) @ channels.S
    return _cophase(v * (channels.G @ w))


def irs2_phases(channels: ChannelSet, psi1, w) -> np.ndarray:
    """Optimal IRS-2 phases ``arg(f_n) - arg(hbar_n)`` with ``hbar = S Phi1 G w``."""
    if channels.S is None:
        raise ValueError("single-surface channels have no IRS 2")
    return _cophase(np.conj(channels.f) * _forward_to_irs2(channels, psi1, w))


def los_closed_form(signature: LosSignature, f_los, budget: LinkBudget) -> BeamformingSolution:
    """Beamformers that co-phase the rank-one LoS cascade.

    For a single surface pass a signature whose ``s1``/``s2`` are ``None``;
    ``g2`` then carries the BS -> surface link and ``psi2`` is empty.
    """
    g1 = np.asarray(signature.g1)
    norm = np.linalg.norm(g1)
    if norm == 0:
        raise DegenerateChannelError("zero BS signature vector")
    w = math.sqrt(budget.pt) * np.conj(g1) / norm
    f_los = np.asarray(f_los)
    if signature.s1 is None:
        psi1 = wrap_phase(np.angle(f_los) - np.angle(signature.g2))
        return BeamformingSolution(w, psi1, np.zeros(0))
    psi1 = wrap_phase(-np.angle(signature.s1 * signature.g2))
    psi2 = wrap_phase(np.angle(f_los) - np.angle(signature.s2))
    return BeamformingSolution(w, psi1, psi2)


def snr_los_closed_form(geometry, gain1, gain2, params: RicianParams, budget: LinkBudget):
    """LoS SNR with optimal beamforming: quartic in the element counts."""
    t11, d11, r1 = far_field_distances(geometry)
    num = budget.pt * params.beta ** 3 * geometry.n1 ** 2 * geometry.n2 ** 2 * geometry.m
    return gain1 * gain2 * num / (budget.noise_power * t11 ** 2 * d11 ** 2 * r1 ** 2)


def snr_los_single_irs(single, gain, budget: LinkBudget, n_elements=None, m_antennas=None,
                       beta: float = 1e-4):
    """Single-reflection LoS SNR ``F Pt beta^2 N^2 M / (noise t^2 r^2)``."""
    n = single.n if n_elements is None else n_elements
    m = single.m if m_antennas is None else m_antennas
    t = np.linalg.norm(single.bs_origin - single.irs_origin)
    r = np.linalg.norm(single.user_pos - single.irs_origin)
    return gain * budget.pt * beta ** 2 * n ** 2 * m / (budget.noise_power * t ** 2 * r ** 2)
