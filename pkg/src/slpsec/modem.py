"""QPSK mapping, detection-region geometry, pilots, and frame assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fec import ConvCode, conv_encode
from .numerics import SeededRng


class FramingError(ValueError):
    """Bit/symbol counts do not line up with the frame structure."""


_SQ2 = np.sqrt(2.0)

#: Gray-labelled unit-energy QPSK points, indexed by 2*b0 + b1 where
#: b0 = (Re < 0) and b1 = (Im < 0).
QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / _SQ2

BITS_PER_SYMBOL = 2


@dataclass(frozen=True)
class SymbolAlphabet:
    """Constellation with a Gray bit labelling (only QPSK is shipped)."""

    points: np.ndarray = field(default_factory=lambda: QPSK_POINTS.copy())

    @property
    def order(self) -> int:
        return len(self.points)

    def bits_of(self, index: int) -> np.ndarray:
        return np.array([(index >> 1) & 1, index & 1], dtype=np.int8)

    def index_of(self, bits) -> int:
        b0, b1 = int(bits[0]), int(bits[1])
        return 2 * b0 + b1


QPSK = SymbolAlphabet()


@dataclass
class Frame:
    """One coded frame for one user: info bits, coded bits, mapped symbols."""

    info_bits: np.ndarray
    coded_bits: np.ndarray
    symbols: np.ndarray
    role: str  # "pilot" or "data"
    user: int

    def __post_init__(self):
        if len(self.coded_bits) != BITS_PER_SYMBOL * len(self.symbols):
            raise FramingError("coded bit count must be twice the symbol count")


@dataclass
class CoherenceBlock:
    """Pilot + data frames transmitted inside one channel coherence interval."""

    n_slots: int
    n_pilot: int
    pilot_frames: list  # per user, list of Frame
    data_frames: list  # per user, list of Frame

    def __post_init__(self):
        if not self.n_pilot < self.n_slots:
            raise FramingError("pilot slots must leave room for data slots")


def modulate(bits) -> np.ndarray:
    """Gray-map pairs of bits onto unit-energy QPSK points."""
    bits = np.asarray(bits, dtype=np.int8).ravel()
    if bits.size % 2:
        raise FramingError("QPSK needs an even number of bits")
    b = bits.reshape(-1, 2)
    return ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) / _SQ2


def hard_detect(v) -> np.ndarray:
    """Nearest-point bit labels by quadrant; ties at zero go to bit 0."""
    v = np.asarray(v, dtype=complex)
    scalar = v.ndim == 0
    v = np.atleast_1d(v)
    bits = np.empty((v.size, 2), dtype=np.int8)
    bits[:, 0] = v.real < 0
    bits[:, 1] = v.imag < 0
    return bits[0] if scalar else bits.reshape(-1)


def detect_symbols(v) -> np.ndarray:
    """Constellation indices (2*b0 + b1) of the nearest QPSK points."""
    v = np.asarray(v, dtype=complex)
    return (2 * (v.real < 0) + (v.imag < 0)).astype(np.int8)


def ci_margins(d: complex, v: complex, tau: float):
    """Componentwise depth of v inside the constructive-interference region of d.

    Returns (m_re, m_im) with m_re = sign(Re d) * Re v - tau * |Re d| and the
    imaginary analogue; both are >= 0 exactly when v sits at least tau-deep
    in d's detection quadrant.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if not np.isclose(abs(d), 1.0, atol=1e-9) or np.isclose(d.real, 0, atol=1e-9):
        raise ValueError("d must be a unit-energy QPSK alphabet point")
    m_re = np.sign(d.real) * np.real(v) - tau * abs(d.real)
    m_im = np.sign(d.imag) * np.imag(v) - tau * abs(d.imag)
    return float(m_re), float(m_im)


def ci_margins_block(d: np.ndarray, v: np.ndarray, tau) -> np.ndarray:
    """Vectorized ci_margins; returns an array (..., 2) of (re, im) margins."""
    d = np.asarray(d, dtype=complex)
    v = np.asarray(v, dtype=complex)
    tau = np.asarray(tau, dtype=float)
    m_re = np.sign(d.real) * v.real - tau * np.abs(d.real)
    m_im = np.sign(d.imag) * v.imag - tau * np.abs(d.imag)
    return np.stack([m_re, m_im], axis=-1)


def generate_pilot_block(rng: SeededRng, K: int, N: int, code: ConvCode) -> list:
    """Coded pseudo-random pilot frames, one list of frames per user.

    The N pilot symbols per user must come from a whole number of coded
    frames.  The same (rng, K, N, code) regenerates identical pilots, which
    is what lets every party in the system know them.
    """
    symbols_per_frame = code.frame_symbols
    if N % symbols_per_frame:
        raise FramingError(
            f"{N} pilot symbols is not a whole number of {symbols_per_frame}-symbol frames")
    n_frames = N // symbols_per_frame
    frames = []
    for k in range(K):
        gen = rng.derive(k).generator()
        user_frames = []
        for _ in range(n_frames):
            info = gen.integers(0, 2, size=code.payload_bits).astype(np.int8)
            coded = conv_encode(code, info)
            user_frames.append(Frame(info_bits=info, coded_bits=coded,
                                     symbols=modulate(coded), role="pilot", user=k))
        frames.append(user_frames)
    return frames


def frames_symbol_matrix(frames_per_user: list) -> np.ndarray:
    """Stack per-user frame symbols into a K x S matrix of transmit symbols."""
    return np.vstack([np.concatenate([f.symbols for f in user_frames])
                      for user_frames in frames_per_user])
