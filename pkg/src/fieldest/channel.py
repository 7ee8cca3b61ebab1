"""Quantization, bit mapping, and the two forward channels.

Each sensor reading R_k either goes out as-is over one AWGN channel
(amplify-and-forward) or is quantized to one of M = 2^alpha levels whose
index is transmitted as an alpha-bit word over parallel AWGN channels
(quantize-and-forward).  Level indices j are 1-based throughout, matching
cell j = [tau_j, tau_{j+1}).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import erfc

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _as_readings(r):
    """Accept an ObservationVector-like object (with .r) or a plain array."""
    arr = np.asarray(getattr(r, "r", r), dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a K-vector of readings, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Quantizer:
    """Scalar quantizer: boundaries (tau_1=-inf < ... < tau_{M+1}=+inf) and
    finite reproduction points nu_j, one per cell.

    M must be a power of two (M = 2^alpha, alpha >= 1); the degenerate M = 1
    quantizer (a single cell covering the whole line) is also accepted, for
    channel-SNR calibration checks only — it cannot be bit-mapped.
    """

    boundaries: np.ndarray
    reproduction: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        v = np.asarray(self.reproduction, dtype=float)
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "reproduction", v)
        if b.ndim != 1 or v.ndim != 1 or b.size != v.size + 1:
            raise ValueError("need M+1 boundaries for M reproduction points")
        m = v.size
        if m < 1 or (m & (m - 1)) != 0:
            raise ValueError(f"level count must be a power of two (or 1), got {m}")
        if not (np.isneginf(b[0]) and np.isposinf(b[-1])):
            raise ValueError("first/last boundaries must be -inf/+inf")
        if not np.all(np.diff(b) > 0):
            raise ValueError("boundaries must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("reproduction points must be finite")

    @property
    def m(self):
        return self.reproduction.size


@dataclass(frozen=True)
class BitMapper:
    """Natural binary level-to-bits map: level j -> (j-1) as alpha bits, MSB first."""

    alpha: int

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError(f"need at least one bit, got alpha={self.alpha}")

    @property
    def m(self):
        return 2**self.alpha

    @cached_property
    def codebook(self):
        """(M, alpha) array of bit words; row j-1 encodes level j."""
        j = np.arange(self.m)[:, None]
        shifts = np.arange(self.alpha - 1, -1, -1)[None, :]
        return ((j >> shifts) & 1).astype(float)


@dataclass(frozen=True, eq=False)
class ObservationVector:
    """Raw sensor readings R_k, one per sensor."""

    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        if self.r.ndim != 1:
            raise ValueError(f"readings must be a K-vector, got shape {self.r.shape}")

    @property
    def k(self):
        return self.r.size


@dataclass(frozen=True, eq=False)
class ReceivedMatrix:
    """What the fusion center sees: z of shape (K,) for the analog channel or
    (K, alpha) for the quantized channel, plus per-sensor channel variances."""

    z: np.ndarray
    eta2: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        e = np.asarray(self.eta2, dtype=float)
        object.__setattr__(self, "z", z)
        if z.ndim not in (1, 2):
            raise ValueError(f"received data must be (K,) or (K, alpha), got {z.shape}")
        e = np.broadcast_to(e, (z.shape[0],)).copy()
        if np.any(e <= 0):
            raise ValueError("channel variances must be positive")
        object.__setattr__(self, "eta2", e)

    @property
    def k(self):
        return self.z.shape[0]

    @property
    def kind(self):
        return "analog" if self.z.ndim == 1 else "bits"


def make_uniform_quantizer(m, lo, hi):
    """Uniform quantizer with M cells over [lo, hi].

    Interior boundaries split [lo, hi] into M equal pieces; the two unbounded
    edge cells reuse the same cell width, so every reproduction point is the
    midpoint of a width-(hi-lo)/M cell: nu_j = lo + (j - 1/2)(hi-lo)/M.
    """
    m = int(m)
    if m < 2 or (m & (m - 1)) != 0:
        raise ValueError(f"level count must be a power of two >= 2, got {m}")
    if not hi > lo:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    delta = (hi - lo) / m
    interior = lo + delta * np.arange(1, m)
    boundaries = np.concatenate(([-np.inf], interior, [np.inf]))
    reproduction = lo + delta * (np.arange(m) + 0.5)
    return Quantizer(boundaries, reproduction)


def quantize(q, r):
    """Level index j in 1..M of reading(s) r; cells are right-open, so a
    reading equal to an interior boundary belongs to the upper cell."""
    r = np.asarray(r, dtype=float)
    j = 1 + np.searchsorted(q.boundaries[1:-1], r, side="right")
    return int(j) if np.isscalar(r) or r.ndim == 0 else j


def level_probabilities(q, g, sigma):
    """Cell probabilities p_j = P[R in cell j] for R ~ N(g, sigma^2).

    p_j = Q((tau_j - g)/sigma) - Q((tau_{j+1} - g)/sigma).  Both tails are
    evaluated from their own side of the distribution so tiny probabilities
    keep relative accuracy, and the total telescopes to 1 within 1e-12.

    g may be a scalar (returns shape (M,)) or an (N,) array (returns (N, M));
    sigma is a positive scalar or an array broadcastable against g.
    """
    g_arr = np.atleast_1d(np.asarray(g, dtype=float))
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), g_arr.shape)
    if np.any(sig <= 0):
        raise ValueError("sigma must be positive")
    u = (q.boundaries[None, :] - g_arr[:, None]) / sig[:, None]
    right = 0.5 * erfc(u / _SQRT2)
    p = right[:, :-1] - right[:, 1:]
    # cells entirely on the left of g: difference of left-tail values instead
    left = 0.5 * erfc(-u / _SQRT2)
    p_left = left[:, 1:] - left[:, :-1]
    p = np.where(u[:, 1:] <= 0.0, p_left, p)
    p = np.maximum(p, 0.0)
    if np.isscalar(g) or np.asarray(g).ndim == 0:
        return p[0]
    return p


def bits_of_level(bm, j):
    """Bit word(s) for level index j (1-based); j may be scalar or array."""
    j = np.asarray(j)
    if np.any(j < 1) or np.any(j > bm.m):
        raise ValueError(f"level index out of range 1..{bm.m}")
    word = bm.codebook[j - 1]
    return word


def amplify_forward(r, eta2, seed):
    """Analog channel: z_k = R_k + N(0, eta2_k)."""
    readings = _as_readings(r)
    eta2v = np.broadcast_to(np.asarray(eta2, dtype=float), readings.shape)
    rng = np.random.default_rng(seed)
    z = readings + rng.standard_normal(readings.shape) * np.sqrt(eta2v)
    return ReceivedMatrix(z=z, eta2=eta2v.copy())


def quantize_forward(r, q, bm, eta2, seed):
    """Quantized channel: quantize each reading, emit its bit word over
    alpha parallel AWGN channels with common per-sensor variance eta2_k."""
    if q.m != bm.m:
        raise ValueError(f"quantizer has {q.m} levels but bit mapper expects {bm.m}")
    readings = _as_readings(r)
    eta2v = np.broadcast_to(np.asarray(eta2, dtype=float), readings.shape)
    levels = quantize(q, readings)
    words = bm.codebook[levels - 1]
    rng = np.random.default_rng(seed)
    z = words + rng.standard_normal(words.shape) * np.sqrt(eta2v)[:, None]
    return ReceivedMatrix(z=z, eta2=eta2v.copy())
