"""UAV transmitter chain: compression, spreading, QPSK, superposition.

The vectorized CSI ``h`` (length La*N) is compressed to length N by a
shared random matrix, normalized to unit per-entry power, spread by +-1
Walsh columns with a 1/sqrt(N) factor (so per-symbol CSI power is exactly
rho*Eu after superposition), and added on top of the QPSK data stream.
The normalization scalar stays inside the simulator; the receiver-side
networks are trained against the normalized target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .errors import ConfigurationError, DegenerateSignalError

INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class CompressionMatrix:
    """Shared (La*N, N) compression matrix plus the seed it was drawn from."""

    phi: np.ndarray
    seed: int


@dataclass(frozen=True)
class SuperFrame:
    """One transmitted superimposed frame and its components."""

    d: np.ndarray       # (M,) unit-power QPSK symbols
    z: np.ndarray       # (N,) normalized compressed CSI
    z_norm: float       # simulator-side normalization scalar
    s: np.ndarray       # (M,) spread CSI, unit per-symbol power
    x: np.ndarray       # (M,) superimposed transmit signal
    rho: float
    eu: float


def draw_compression_matrix(la_n: int, n: int, seed: int) -> CompressionMatrix:
    """I.i.d. circular Gaussian entries with variance 1/(La*N)."""
    rng = np.random.default_rng(seed)
    scale = math.sqrt(1.0 / (2.0 * la_n))
    phi = scale * (rng.standard_normal((la_n, n)) + 1j * rng.standard_normal((la_n, n)))
    return CompressionMatrix(phi=phi, seed=seed)


def walsh_matrix(m: int, n: int) -> np.ndarray:
    """First n columns of the m x m Sylvester-Hadamard matrix (+-1 ints).

    Requires m a power of two and n <= m; then Q^T Q = m*I_n holds in
    exact integer arithmetic.
    """
    if m < 1 or m & (m - 1):
        raise ConfigurationError("spreading length must be a power of two")
    if not 1 <= n <= m:
        raise ConfigurationError("need 1 <= n <= m for the Walsh construction")
    return hadamard(m, dtype=np.int64)[:, :n]


def compress(h: np.ndarray, phi: CompressionMatrix | np.ndarray):
    """Compress and normalize the CSI: returns (z, z_norm) with ||z||^2 = N.

    ``z_norm * z`` reproduces the raw product ``h @ phi``.
    """
    mat = phi.phi if isinstance(phi, CompressionMatrix) else phi
    if h.shape[0] != mat.shape[0]:
        raise ConfigurationError(
            f"h length {h.shape[0]} does not match compression rows {mat.shape[0]}")
    z_raw = h @ mat
    norm = np.linalg.norm(z_raw)
    if norm == 0.0:
        raise DegenerateSignalError("compressed CSI is identically zero")
    z_norm = norm / math.sqrt(mat.shape[1])
    return z_raw / z_norm, float(z_norm)


def spread(z: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Spread the length-N CSI to M symbols: s = z Q^T / sqrt(N)."""
    if z.shape[0] != q.shape[1]:
        raise ConfigurationError("z length must equal the Walsh column count")
    return (z @ q.T) / math.sqrt(z.shape[0])


def despread_tx_check(s: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Noise-free inverse of :func:`spread`: (s Q / M) * sqrt(N)."""
    return (s @ q) / q.shape[0] * math.sqrt(q.shape[1])


def superimpose(s: np.ndarray, d: np.ndarray, rho: float, eu: float) -> np.ndarray:
    """x = sqrt(rho*Eu) s + sqrt((1-rho)*Eu) d."""
    if not 0.0 <= rho <= 1.0:
        raise ConfigurationError("rho must lie in [0, 1]")
    if eu <= 0:
        raise ConfigurationError("eu must be positive")
    return math.sqrt(rho * eu) * s + math.sqrt((1.0 - rho) * eu) * d


def modulate_qpsk(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped QPSK, ((1-2*b_even) + j(1-2*b_odd))/sqrt(2)."""
    bits = np.asarray(bits)
    if bits.size % 2:
        raise ConfigurationError("QPSK needs an even number of bits")
    b = bits.reshape(-1, 2)
    return ((1.0 - 2.0 * b[:, 0]) + 1j * (1.0 - 2.0 * b[:, 1])) * INV_SQRT2


def demap_qpsk(d_soft: np.ndarray) -> np.ndarray:
    """Hard QPSK demap; sign(0) decides bit 0 by convention."""
    bits = np.empty(2 * d_soft.shape[0], dtype=np.int64)
    bits[0::2] = d_soft.real < 0.0
    bits[1::2] = d_soft.imag < 0.0
    return bits


def remodulate(d_soft: np.ndarray) -> np.ndarray:
    """Hard-decision QPSK symbols from soft values (unit power)."""
    re = np.where(d_soft.real < 0.0, -1.0, 1.0)
    im = np.where(d_soft.imag < 0.0, -1.0, 1.0)
    return (re + 1j * im) * INV_SQRT2


def build_superframe(h: np.ndarray, bits: np.ndarray, phi, q: np.ndarray,
                     rho: float, eu: float) -> SuperFrame:
    """Run the full transmitter on one CSI vector and one bit payload."""
    z, z_norm = compress(h, phi)
    s = spread(z, q)
    d = modulate_qpsk(bits)
    if d.shape[0] != s.shape[0]:
        raise ConfigurationError("payload must supply 2*M bits")
    x = superimpose(s, d, rho, eu)
    return SuperFrame(d=d, z=z, z_norm=z_norm, s=s, x=x, rho=rho, eu=eu)
