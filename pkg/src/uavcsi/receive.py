"""gBS receiver front end: despreading, LMMSE estimation, cancellation.

The initial feature extraction runs one refinement cycle:

    despread -> LMMSE CSI -> cancel CSI -> detect data (hard)
             -> cancel data -> despread -> LMMSE CSI

The first CSI estimate sees the full data interference, so its LMMSE
denominator carries a (1-rho)Eu/M term; after the data has been
remodulated and subtracted that term is dropped.  A "zf" detector mode
zeroes the interference and noise terms of both estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateLinkError
from .transmit import demap_qpsk, remodulate


@dataclass(frozen=True)
class RxObservation:
    """Received frame plus the side information the receiver works with."""

    y: np.ndarray           # (N, M)
    sigma2: float
    g_hat: np.ndarray       # (N,) estimated dominant-tap link vector
    eu: float
    rho: float


@dataclass(frozen=True)
class InitialFeature:
    """Refined compressed-CSI estimate and the data decisions that shaped it."""

    z_hat: np.ndarray       # (N,) refined compressed CSI
    d_init: np.ndarray      # (M,) hard-decision symbols from the first pass
    z_first: np.ndarray     # (N,) first-pass estimate, kept for diagnostics


def snr_db_to_sigma2(snr_db: float, eu: float = 1.0) -> float:
    """Per-entry noise variance from SNR = 10*log10(Eu/sigma^2)."""
    if math.isinf(snr_db):
        return 0.0
    return eu * 10.0 ** (-snr_db / 10.0)


def sigma2_to_snr_db(sigma2: float, eu: float = 1.0) -> float:
    if sigma2 == 0.0:
        return math.inf
    return 10.0 * math.log10(eu / sigma2)


def receive(x: np.ndarray, g: np.ndarray, sigma2: float,
            rng: np.random.Generator) -> np.ndarray:
    """Y = g x + W with i.i.d. CN(0, sigma2) entries."""
    if sigma2 < 0:
        raise ConfigurationError("noise variance must be >= 0")
    y = np.outer(g, x)
    if sigma2 > 0.0:
        y = y + math.sqrt(sigma2 / 2.0) * (
            rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y


def despread(y: np.ndarray, q: np.ndarray) -> np.ndarray:
    """V = Y Q / M; entries of the noise part end up with variance sigma2/M."""
    if y.shape[1] != q.shape[0]:
        raise ConfigurationError("Y columns must match spreading rows")
    return (y @ q) / q.shape[0]


def lmmse_csi(v: np.ndarray, g_hat: np.ndarray, rho: float, eu: float,
              sigma2: float, m_symbols: int, *, data_interference: bool = True,
              detector: str = "lmmse") -> np.ndarray:
    """Per-column scalar LMMSE of the compressed CSI from the despread signal.

    Matched-filter combine each column with g_hat, then scale by the LMMSE
    coefficient for a unit-power prior:

        z_n = a ||g||^2 u_n / (a^2 ||g||^4 + ||g||^4 (1-rho)Eu/M + ||g||^2 sigma2/M)

    with a = sqrt(rho*Eu/N) and u_n = g_hat^H V[:, n].  The middle term is
    the residual data interference; pass ``data_interference=False`` after
    the data has been cancelled.
    """
    g2 = float(np.vdot(g_hat, g_hat).real)
    if g2 == 0.0:
        raise DegenerateLinkError("estimated link vector has zero norm")
    n_coef = v.shape[1]  # spread coefficient count: N here, La*N for ref8
    a = math.sqrt(rho * eu / n_coef)
    u = g_hat.conj() @ v
    if detector == "zf":
        if a == 0.0:
            raise ConfigurationError("zf CSI estimate undefined for rho = 0")
        return u / (a * g2)
    denom = a * a * g2 * g2 + g2 * sigma2 / m_symbols
    if data_interference:
        denom += g2 * g2 * (1.0 - rho) * eu / m_symbols
    if denom == 0.0:
        return np.zeros_like(u)
    return (a * g2) * u / denom


def cancel_csi(y: np.ndarray, g_hat: np.ndarray, z_est: np.ndarray,
               rho: float, eu: float, q: np.ndarray) -> np.ndarray:
    """Remove the reconstructed CSI component: Y - sqrt(rho*Eu/N) g z Q^T."""
    n = z_est.shape[0]
    return y - math.sqrt(rho * eu / n) * np.outer(g_hat, z_est @ q.T)


def lmmse_data(y_c: np.ndarray, g_hat: np.ndarray, rho: float, eu: float,
               sigma2: float, *, detector: str = "lmmse") -> np.ndarray:
    """Per-symbol LMMSE detection after CSI cancellation."""
    g2 = float(np.vdot(g_hat, g_hat).real)
    if g2 == 0.0:
        raise DegenerateLinkError("estimated link vector has zero norm")
    amp = math.sqrt((1.0 - rho) * eu)
    u = g_hat.conj() @ y_c
    if detector == "zf":
        if amp == 0.0:
            raise ConfigurationError("zf data detection undefined for rho = 1")
        return u / (amp * g2)
    denom = (1.0 - rho) * eu * g2 + sigma2
    if denom == 0.0:
        return np.zeros_like(u)
    return amp * u / denom


def cancel_data(y: np.ndarray, g_hat: np.ndarray, d_init: np.ndarray,
                rho: float, eu: float) -> np.ndarray:
    """Remove the remodulated data component: Y - sqrt((1-rho)*Eu) g d."""
    return y - math.sqrt((1.0 - rho) * eu) * np.outer(g_hat, d_init)


def initial_feature(y: np.ndarray, g_hat: np.ndarray, rho: float, eu: float,
                    sigma2: float, q: np.ndarray, *,
                    detector: str = "lmmse") -> InitialFeature:
    """One superimposed-interference cancellation cycle (no iteration)."""
    v = despread(y, q)
    z_first = lmmse_csi(v, g_hat, rho, eu, sigma2, q.shape[0],
                        data_interference=True, detector=detector)
    y_c = cancel_csi(y, g_hat, z_first, rho, eu, q)
    d_soft = lmmse_data(y_c, g_hat, rho, eu, sigma2, detector=detector)
    d_init = remodulate(d_soft)
    y_d = cancel_data(y, g_hat, d_init, rho, eu)
    v2 = despread(y_d, q)
    z_hat = lmmse_csi(v2, g_hat, rho, eu, sigma2, q.shape[0],
                      data_interference=False, detector=detector)
    return InitialFeature(z_hat=z_hat, d_init=d_init, z_first=z_first)


def detect_with_csi(y: np.ndarray, g_hat: np.ndarray, z_est: np.ndarray,
                    rho: float, eu: float, sigma2: float, q: np.ndarray, *,
                    detector: str = "lmmse"):
    """Cancel a given CSI estimate, detect, and demap to bits."""
    y_c = cancel_csi(y, g_hat, z_est, rho, eu, q)
    d_soft = lmmse_data(y_c, g_hat, rho, eu, sigma2, detector=detector)
    return d_soft, demap_qpsk(d_soft)


def ref8_baseline(y: np.ndarray, g_hat: np.ndarray, rho: float, eu: float,
                  sigma2: float, q_full: np.ndarray, iters: int = 3, *,
                  detector: str = "lmmse"):
    """Uncompressed superimposed feedback: estimate/cancel cycle on full h.

    The transmitter counterpart spreads the normalized h (unit per-entry
    power, length La*N) with ``q_full`` (M, La*N).  Returns the normalized
    CSI estimate and the final hard-decision data symbols.
    """
    if iters < 1:
        raise ConfigurationError("ref8 baseline needs at least one iteration")
    m, la_n = q_full.shape
    if m < la_n:
        raise ConfigurationError("ref8 spreading needs M >= La*N")
    v = despread(y, q_full)
    z = lmmse_csi(v, g_hat, rho, eu, sigma2, m,
                  data_interference=True, detector=detector)
    d_hard = None
    for _ in range(iters):
        y_c = cancel_csi(y, g_hat, z, rho, eu, q_full)
        d_soft = lmmse_data(y_c, g_hat, rho, eu, sigma2, detector=detector)
        d_hard = remodulate(d_soft)
        y_d = cancel_data(y, g_hat, d_hard, rho, eu)
        z = lmmse_csi(despread(y_d, q_full), g_hat, rho, eu, sigma2, m,
                      data_interference=False, detector=detector)
    return z, d_hard
