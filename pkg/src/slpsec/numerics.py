"""Complex linear algebra helpers and deterministic stream-based randomness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularChannelError(ValueError):
    """Channel Gram matrix is numerically rank deficient."""


#: Condition-number bound on the Gram matrix above which a channel is
#: treated as singular.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class SeededRng:
    """Counter-based random stream addressed by (seed, stream ids).

    Identical (seed, stream) pairs produce identical draw sequences on any
    host or thread schedule.  ``generator()`` always restarts the stream, so
    distinct purposes must use distinct derived streams rather than sharing
    one generator object across call sites.
    """

    seed: int
    stream: tuple[int, ...] = ()

    def derive(self, *ids: int) -> "SeededRng":
        """Child stream for a sub-purpose; order of derivation is irrelevant."""
        return SeededRng(self.seed, self.stream + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng) -> np.random.Generator:
    """Accept either a SeededRng or an already-instantiated Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()


def real_embed(v: np.ndarray) -> np.ndarray:
    """Interleave real and imaginary parts: [Re v1, Im v1, Re v2, Im v2, ...].

    Works on vectors and on batches (embedding applies to the last axis,
    doubling its length).
    """
    v = np.asarray(v, dtype=complex)
    out = np.empty(v.shape[:-1] + (2 * v.shape[-1],), dtype=float)
    out[..., 0::2] = v.real
    out[..., 1::2] = v.imag
    return out


def real_unembed(r: np.ndarray) -> np.ndarray:
    """Inverse of real_embed; re-pairs interleaved reals into complex entries."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1] % 2:
        raise ValueError("interleaved real vector must have even length")
    return r[..., 0::2] + 1j * r[..., 1::2]


def embed_matrix(H: np.ndarray) -> np.ndarray:
    """Real 2m x 2n representation of a complex m x n map, acting on
    interleaved real embeddings: embed_matrix(H) @ real_embed(x) == real_embed(H @ x).
    """
    H = np.asarray(H, dtype=complex)
    m, n = H.shape
    R = np.zeros((2 * m, 2 * n))
    R[0::2, 0::2] = H.real
    R[0::2, 1::2] = -H.imag
    R[1::2, 0::2] = H.imag
    R[1::2, 1::2] = H.real
    return R


def pseudo_inverse(H: np.ndarray) -> np.ndarray:
    """Right pseudo-inverse H^H (H H^H)^-1 of a full-row-rank matrix.

    Solved through a Cholesky factorization of the Gram matrix; raises
    SingularChannelError when the Gram condition estimate exceeds COND_LIMIT.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    k, n = H.shape
    if k > n:
        raise ValueError(f"matrix is {k}x{n}; need rows <= cols for a right inverse")
    gram = H @ H.conj().T
    if not np.all(np.isfinite(gram)):
        raise ValueError("non-finite entries in channel matrix")
    if np.linalg.cond(gram) > COND_LIMIT:
        raise SingularChannelError("channel Gram matrix condition exceeds 1e12")
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError("channel Gram matrix is not positive definite") from exc
    # H^H @ gram^-1 via two triangular solves.
    tmp = np.linalg.solve(L, H)  # L^-1 H
    tmp = np.linalg.solve(L.conj().T, tmp)  # gram^-1 H
    return tmp.conj().T


def sample_cn(rng, n: int, variance: float) -> np.ndarray:
    """n i.i.d. circularly-symmetric complex Gaussian draws.

    Real and imaginary parts each carry variance/2, so the complex entries
    have the requested total variance.
    """
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if variance == 0:
        return np.zeros(n, dtype=complex)
    gen = as_generator(rng)
    scale = np.sqrt(variance / 2.0)
    return scale * (gen.standard_normal(n) + 1j * gen.standard_normal(n))


def sample_cn_matrix(rng, shape: tuple[int, ...], variance: float) -> np.ndarray:
    """Matrix-shaped variant of sample_cn (one stream, row-major draw order)."""
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if variance == 0:
        return np.zeros(shape, dtype=complex)
    gen = as_generator(rng)
    scale = np.sqrt(variance / 2.0)
    return scale * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))
