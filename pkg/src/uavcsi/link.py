"""End-to-end simulation of one superimposed uplink frame.

Couples a G2U draw (the CSI being fed back), the paired U2G draw (same
LoS state, same environment), the transmitter chain, AWGN reception and
the LS link estimate into a single record that dataset builders, the
online pipeline, and the benchmark sweeps all consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import G2uChannel, U2gChannel, generate_g2u, generate_u2g, ls_estimate_u2g
from .config import ChannelConfig, LinkConfig
from .receive import receive, snr_db_to_sigma2
from .transmit import SuperFrame, build_superframe, modulate_qpsk, superimpose, walsh_matrix


@lru_cache(maxsize=8)
def cached_walsh(m: int, n: int) -> np.ndarray:
    q = walsh_matrix(m, n)
    q.setflags(write=False)
    return q


@dataclass(frozen=True)
class FrameRecord:
    """Everything one frame produced, transmit side and receive side."""

    g2u: G2uChannel
    u2g: U2gChannel
    frame: SuperFrame
    bits: np.ndarray
    y: np.ndarray          # (N, M) received samples
    G_hat: np.ndarray      # (La, N) LS estimate of the U2G taps
    sigma2: float
    los: bool


def simulate_frame(ch: ChannelConfig, link: LinkConfig, phi, los: bool,
                   snr_db: float, rng: np.random.Generator, *,
                   rho: float | None = None, pilot_len: int | None = None,
                   perfect_g: bool = False) -> FrameRecord:
    """Draw paired channels, transmit one superimposed frame, receive it."""
    rho = link.rho if rho is None else rho
    pilot = pilot_len or ch.n_antennas
    q = cached_walsh(link.m_symbols, ch.n_antennas)
    g2u = generate_g2u(ch, los, rng)
    u2g = generate_u2g(ch, los, rng)
    bits = rng.integers(0, 2, size=2 * link.m_symbols)
    frame = build_superframe(g2u.h, bits, phi, q, rho, link.eu)
    sigma2 = snr_db_to_sigma2(snr_db, link.eu)
    y = receive(frame.x, u2g.g, sigma2, rng)
    if perfect_g:
        G_hat = u2g.G.copy()
    else:
        G_hat = ls_estimate_u2g(u2g, snr_db, pilot, rng, eu=link.eu)
    return FrameRecord(g2u=g2u, u2g=u2g, frame=frame, bits=bits, y=y,
                       G_hat=G_hat, sigma2=sigma2, los=los)


@dataclass(frozen=True)
class Ref8FrameRecord:
    """A frame of the uncompressed baseline: full h spread, no compression."""

    g2u: G2uChannel
    u2g: U2gChannel
    h_unit: np.ndarray     # normalized CSI actually spread (unit-power entries)
    h_scale: float         # ||h|| / sqrt(La*N); h = h_scale * h_unit
    d: np.ndarray
    bits: np.ndarray
    y: np.ndarray
    G_hat: np.ndarray
    sigma2: float
    los: bool


def simulate_ref8_frame(ch: ChannelConfig, link: LinkConfig, los: bool,
                        snr_db: float, rng: np.random.Generator, *,
                        rho: float | None = None,
                        pilot_len: int | None = None) -> Ref8FrameRecord:
    """Transmit the full vectorized CSI through La*N Walsh columns."""
    rho = link.rho if rho is None else rho
    pilot = pilot_len or ch.n_antennas
    la_n = ch.n_truncated * ch.n_antennas
    q8 = cached_walsh(link.m_symbols, la_n)
    g2u = generate_g2u(ch, los, rng)
    u2g = generate_u2g(ch, los, rng)
    h_scale = np.linalg.norm(g2u.h) / math.sqrt(la_n)
    h_unit = g2u.h / h_scale
    s = (h_unit @ q8.T) / math.sqrt(la_n)
    bits = rng.integers(0, 2, size=2 * link.m_symbols)
    d = modulate_qpsk(bits)
    x = superimpose(s, d, rho, link.eu)
    sigma2 = snr_db_to_sigma2(snr_db, link.eu)
    y = receive(x, u2g.g, sigma2, rng)
    G_hat = ls_estimate_u2g(u2g, snr_db, pilot, rng, eu=link.eu)
    return Ref8FrameRecord(g2u=g2u, u2g=u2g, h_unit=h_unit, h_scale=float(h_scale),
                           d=d, bits=bits, y=y, G_hat=G_hat, sigma2=sigma2, los=los)
