"""Block-fading channel generation and received-signal models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import SeededRng, as_generator, sample_cn, sample_cn_matrix


class ConfigurationError(ValueError):
    """Inconsistent simulation dimensions or parameters."""


@dataclass(frozen=True)
class ChannelRealization:
    """One coherence block: user channels, eavesdropper channels, noise levels.

    H is K x N_t (one row per single-antenna user), H_e is M x N_t (one row
    per eavesdropper antenna).  Entries are flat-fading complex gains held
    constant for the whole block.
    """

    H: np.ndarray
    H_e: np.ndarray
    sigma_z2: float
    sigma_e2: float

    def __post_init__(self):
        K, n_tx = self.H.shape
        M, n_tx_e = self.H_e.shape
        if n_tx != n_tx_e:
            raise ConfigurationError("user and eavesdropper channels disagree on antenna count")
        if K > n_tx:
            raise ConfigurationError(f"K={K} users exceed N_t={n_tx} transmit antennas")
        if M < 1:
            raise ConfigurationError("eavesdropper needs at least one antenna")
        if self.sigma_z2 <= 0 or self.sigma_e2 <= 0:
            raise ConfigurationError("noise variances must be positive")
        if not (np.all(np.isfinite(self.H)) and np.all(np.isfinite(self.H_e))):
            raise ConfigurationError("non-finite channel entries")

    @property
    def n_users(self) -> int:
        return self.H.shape[0]

    @property
    def n_tx(self) -> int:
        return self.H.shape[1]

    @property
    def n_eve(self) -> int:
        return self.H_e.shape[0]


def sample_channel(rng: SeededRng, K: int, N_t: int, M: int,
                   sigma_z2: float = 1.0, sigma_e2: float = 1.0) -> ChannelRealization:
    """Draw i.i.d. unit-variance Rayleigh channels for users and eavesdropper.

    Deterministic under (rng, dims): H is drawn first, then H_e, from one
    stream.
    """
    if K < 1 or K > N_t:
        raise ConfigurationError(f"need 1 <= K <= N_t, got K={K}, N_t={N_t}")
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    gen = as_generator(rng)
    H = sample_cn_matrix(gen, (K, N_t), 1.0)
    H_e = sample_cn_matrix(gen, (M, N_t), 1.0)
    return ChannelRealization(H=H, H_e=H_e, sigma_z2=sigma_z2, sigma_e2=sigma_e2)


def receive_users(ch: ChannelRealization, x: np.ndarray, rng=None,
                  noiseless: bool = False) -> np.ndarray:
    """y = H x + z with z ~ CN(0, sigma_z2 I); omit z when noiseless."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (ch.n_tx,):
        raise ConfigurationError(f"transmit vector has shape {x.shape}, expected ({ch.n_tx},)")
    y = ch.H @ x
    if noiseless:
        return y
    return y + sample_cn(rng, ch.n_users, ch.sigma_z2)


def receive_eve(ch: ChannelRealization, x: np.ndarray, rng=None,
                noiseless: bool = False) -> np.ndarray:
    """y_e = H_e x + z_e with z_e ~ CN(0, sigma_e2 I); omit z_e when noiseless."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (ch.n_tx,):
        raise ConfigurationError(f"transmit vector has shape {x.shape}, expected ({ch.n_tx},)")
    y = ch.H_e @ x
    if noiseless:
        return y
    return y + sample_cn(rng, ch.n_eve, ch.sigma_e2)


def receive_eve_block(ch: ChannelRealization, X: np.ndarray, rng=None,
                      noiseless: bool = False) -> np.ndarray:
    """Batch form of receive_eve for an N_t x S block of transmit vectors."""
    Y = ch.H_e @ X
    if noiseless:
        return Y
    return Y + sample_cn_matrix(rng, Y.shape, ch.sigma_e2)


def receive_user_block(ch: ChannelRealization, X: np.ndarray, user: int, rng=None,
                       noiseless: bool = False) -> np.ndarray:
    """Received slots of a single user over an N_t x S block."""
    y = ch.H[user] @ X
    if noiseless:
        return y
    return y + sample_cn(rng, y.shape[0], ch.sigma_z2)


def save_channel_csv(ch: ChannelRealization, path) -> None:
    """Dump a realization as CSV of interleaved real/imag entries."""
    with open(path, "w") as f:
        f.write(f"# K={ch.n_users} N_t={ch.n_tx} M={ch.n_eve} "
                f"sigma_z2={ch.sigma_z2!r} sigma_e2={ch.sigma_e2!r}\n")
        for row in ch.H:
            f.write(",".join(f"{v!r}" for pair in zip(row.real, row.imag) for v in pair) + "\n")
        for row in ch.H_e:
            f.write(",".join(f"{v!r}" for pair in zip(row.real, row.imag) for v in pair) + "\n")


def load_channel_csv(path) -> ChannelRealization:
    """Inverse of save_channel_csv."""
    with open(path) as f:
        header = f.readline()
        fields = dict(tok.split("=") for tok in header.lstrip("# ").split())
        K, n_tx, M = int(fields["K"]), int(fields["N_t"]), int(fields["M"])
        rows = [np.array([float(v) for v in line.strip().split(",")]) for line in f if line.strip()]
    mat = np.vstack(rows)
    cmat = mat[:, 0::2] + 1j * mat[:, 1::2]
    if cmat.shape != (K + M, n_tx):
        raise ConfigurationError("channel CSV does not match its header dimensions")
    return ChannelRealization(H=cmat[:K], H_e=cmat[K:],
                              sigma_z2=float(fields["sigma_z2"]),
                              sigma_e2=float(fields["sigma_e2"]))
