"""Convolutional encoding and hard/soft Viterbi decoding."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np


class FrameLengthError(ValueError):
    """Input length does not match one coded frame."""


#: Industry-standard constraint-length-7 tap sets (octal, MSB = current bit).
GENERATORS_RATE_THIRD = (0o133, 0o171, 0o165)
GENERATORS_RATE_QUARTER = (0o133, 0o171, 0o165, 0o117)

_BIG = 1e30


@dataclass(frozen=True)
class ConvCode:
    """Zero-tail terminated convolutional code framed onto QPSK symbols.

    generators are octal tap polynomials, one per output bit, with the most
    significant bit weighting the newest input bit.  A frame carries
    payload_bits + tail_bits inputs and fills frame_symbols QPSK symbols
    exactly.
    """

    generators: tuple[int, ...]
    constraint_length: int = 7
    frame_symbols: int = 150
    tail_bits: int = 6

    def __post_init__(self):
        n = len(self.generators)
        if n < 2:
            raise ValueError("need at least two generator polynomials")
        for g in self.generators:
            if g <= 0 or g >= (1 << self.constraint_length):
                raise ValueError(f"generator {g:o} does not fit in {self.constraint_length} bits")
        if self.tail_bits != self.constraint_length - 1:
            raise ValueError("tail must flush the whole register")
        if (self.frame_symbols * 2) % n:
            raise ValueError("frame does not hold a whole number of coded steps")
        if self.payload_bits <= 0:
            raise ValueError("frame too small for any payload")

    @property
    def n_out(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> Fraction:
        return Fraction(1, self.n_out)

    @property
    def coded_bits_per_frame(self) -> int:
        return self.frame_symbols * 2

    @property
    def payload_bits(self) -> int:
        return self.coded_bits_per_frame // self.n_out - self.tail_bits

    @property
    def generators_octal(self) -> str:
        return "/".join(format(g, "o") for g in self.generators)


def rate_third(frame_symbols: int = 150) -> ConvCode:
    return ConvCode(GENERATORS_RATE_THIRD, frame_symbols=frame_symbols)


def rate_quarter(frame_symbols: int = 150) -> ConvCode:
    return ConvCode(GENERATORS_RATE_QUARTER, frame_symbols=frame_symbols)


def make_code(rate: str, frame_symbols: int = 150) -> ConvCode:
    if rate == "1/3":
        return rate_third(frame_symbols)
    if rate == "1/4":
        return rate_quarter(frame_symbols)
    raise ValueError(f"unsupported code rate {rate!r}")


@dataclass
class LlrFrame:
    """Per-coded-bit log-likelihood ratios; positive favours bit 0."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("LLRs must be finite (clip upstream)")


def _popcount_parity(values: np.ndarray) -> np.ndarray:
    table = _PARITY_TABLE
    return table[values]


_PARITY_TABLE = np.array([bin(i).count("1") & 1 for i in range(256)], dtype=np.int8)


@lru_cache(maxsize=8)
def _trellis(generators: tuple[int, ...], constraint_length: int):
    """Transition tables over the 2^(K-1) shift-register states.

    State packs the previous K-1 input bits with the newest at the MSB:
    next_state(s, u) = (s >> 1) | (u << (K-2)).  Output bit of generator g
    for register r = (u << (K-1)) | s is parity(r & g).
    """
    k = constraint_length
    n_states = 1 << (k - 1)
    states = np.arange(n_states)
    out = np.zeros((n_states, 2, len(generators)), dtype=np.int8)
    for u in (0, 1):
        reg = (u << (k - 1)) | states
        for j, g in enumerate(generators):
            out[:, u, j] = _popcount_parity(reg & g)
    # Gather-form predecessors: state t is reached on input u(t) = t >> (k-2)
    # from either ((t << 1) & (n_states-1)) or that value | 1.
    pred0 = (states << 1) & (n_states - 1)
    pred1 = pred0 | 1
    input_bit = (states >> (k - 2)).astype(np.int8)
    return out, pred0, pred1, input_bit


def conv_encode(code: ConvCode, info_bits) -> np.ndarray:
    """Encode one frame: zero start state, payload then tail_bits zeros."""
    info_bits = np.asarray(info_bits, dtype=np.int8).ravel()
    if len(info_bits) != code.payload_bits:
        raise FrameLengthError(
            f"payload has {len(info_bits)} bits, frame expects {code.payload_bits}")
    bits = np.concatenate([info_bits, np.zeros(code.tail_bits, dtype=np.int8)])
    k = code.constraint_length
    regs = np.empty(len(bits), dtype=np.int64)
    reg = 0
    for t, u in enumerate(bits):
        reg = (int(u) << (k - 1)) | (reg >> 1)
        regs[t] = reg
    out = np.empty((len(bits), code.n_out), dtype=np.int8)
    for j, g in enumerate(code.generators):
        out[:, j] = _popcount_parity(regs & g)
    return out.reshape(-1)


def _viterbi(code: ConvCode, branch_costs: np.ndarray, traceback_window=None) -> np.ndarray:
    """Shared trellis search; branch_costs has shape (steps, n_states, 2)."""
    out, pred0, pred1, input_bit = _trellis(code.generators, code.constraint_length)
    n_states = out.shape[0]
    n_steps = branch_costs.shape[0]
    pm = np.full(n_states, _BIG)
    pm[0] = 0.0
    back = np.empty((n_steps, n_states), dtype=np.int16)
    metrics = np.empty((n_steps, n_states)) if traceback_window is not None else None
    u = input_bit  # input leading into each state, fixed by the state index
    for t in range(n_steps):
        cost = branch_costs[t]
        cand0 = pm[pred0] + cost[pred0, u]
        cand1 = pm[pred1] + cost[pred1, u]
        take1 = cand1 < cand0  # ties prefer the even predecessor
        pm = np.where(take1, cand1, cand0)
        back[t] = np.where(take1, pred1, pred0)
        if metrics is not None:
            metrics[t] = pm
    if traceback_window is None:
        return _traceback(back, input_bit, final_state=0)
    return _windowed_traceback(back, input_bit, metrics, traceback_window)


def _traceback(back, input_bit, final_state):
    n_steps = back.shape[0]
    bits = np.empty(n_steps, dtype=np.int8)
    s = final_state
    for t in range(n_steps - 1, -1, -1):
        bits[t] = input_bit[s]
        s = back[t, s]
    return bits


def _windowed_traceback(back, input_bit, metrics, depth):
    # Optional fixed-depth mode: each bit is decided by tracing `depth`
    # steps back from the then-best state.  Full traceback (default) is
    # strictly better at these frame lengths.
    n_steps = back.shape[0]
    bits = np.empty(n_steps, dtype=np.int8)
    last = n_steps - 1
    for i in range(n_steps):
        end = min(i + depth - 1, last)
        s = 0 if end == last else int(np.argmin(metrics[end]))
        for t in range(end, i, -1):
            s = back[t, s]
        bits[i] = input_bit[s]
    return bits


def viterbi_hard(code: ConvCode, coded_bits, traceback_window=None) -> np.ndarray:
    """Maximum-likelihood payload under the Hamming metric, tail stripped."""
    coded = np.asarray(coded_bits, dtype=np.int8).ravel()
    if len(coded) != code.coded_bits_per_frame:
        raise FrameLengthError(
            f"frame has {len(coded)} coded bits, expected {code.coded_bits_per_frame}")
    out, *_ = _trellis(code.generators, code.constraint_length)
    rx = coded.reshape(-1, code.n_out)
    costs = np.sum(out[None, :, :, :] != rx[:, None, None, :], axis=-1).astype(float)
    bits = _viterbi(code, costs, traceback_window)
    return bits[: code.payload_bits]


def viterbi_soft(code: ConvCode, llrs, traceback_window=None) -> np.ndarray:
    """Maximum-likelihood payload under the LLR correlation metric.

    Positive LLR favours coded bit 0, so the branch cost sums the LLRs of
    the trellis outputs that are 1; minimizing it maximizes agreement.
    """
    values = llrs.values if isinstance(llrs, LlrFrame) else np.asarray(llrs, dtype=float).ravel()
    if len(values) != code.coded_bits_per_frame:
        raise FrameLengthError(
            f"frame has {len(values)} LLRs, expected {code.coded_bits_per_frame}")
    if not np.all(np.isfinite(values)):
        raise ValueError("LLRs must be finite")
    out, *_ = _trellis(code.generators, code.constraint_length)
    lv = values.reshape(-1, code.n_out)
    costs = np.einsum("tj,suj->tsu", lv, out.astype(float))
    bits = _viterbi(code, costs, traceback_window)
    return bits[: code.payload_bits]


def soft_path_cost(code: ConvCode, llrs, payload) -> float:
    """Correlation-metric cost of a payload's codeword (lower is better)."""
    values = llrs.values if isinstance(llrs, LlrFrame) else np.asarray(llrs, dtype=float)
    coded = conv_encode(code, payload)
    return float(np.sum(values * coded))
