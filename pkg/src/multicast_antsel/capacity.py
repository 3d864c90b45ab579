"""Log-det capacity of selected antenna sub-channels.

For a selected sub-matrix ``Hs`` (rows: chosen receive antennas, columns:
chosen transmit antennas, ``L_s`` of them) the capacity is

    C = log2 det(I_{L_s} + rho * Hs^H Hs),   rho = (Es/N0) / L_s

i.e. the transmit power is split evenly over the active transmit antennas.
The matrix ``I + rho * Hs^H Hs`` is Hermitian with all eigenvalues >= 1, so
its log-determinant is taken from a Cholesky factor,
``C = 2 * sum_i log2(L_ii)``, instead of forming the determinant itself
(which overflows or loses digits at high SNR).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .channel import ChannelRealization, MulticastChannel, SystemDims
from .errors import DomainError

__all__ = [
    "SelectionSpec",
    "AntennaSubset",
    "SnrParams",
    "MulticastRate",
    "SYNCHRONOUS",
    "ASYNCHRONOUS",
    "extract_submatrix",
    "capacity",
    "capacity_batch",
    "subset_capacity",
    "multicast_rate",
]

SYNCHRONOUS = "synchronous"
ASYNCHRONOUS = "asynchronous"
MODES = (ASYNCHRONOUS, SYNCHRONOUS)


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


@dataclass(frozen=True)
class SelectionSpec:
    """How many antennas to keep: ``L_s`` transmit, ``L_U[r]`` per receiver."""

    num_tx_selected: int
    num_rx_selected_per_receiver: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "num_rx_selected_per_receiver", tuple(int(n) for n in self.num_rx_selected_per_receiver)
        )
        if self.num_tx_selected < 1:
            raise DomainError(f"num_tx_selected must be >= 1, got {self.num_tx_selected}")
        if not self.num_rx_selected_per_receiver or min(self.num_rx_selected_per_receiver) < 1:
            raise DomainError(f"receive selections must be >= 1: {self.num_rx_selected_per_receiver}")

    @classmethod
    def uniform(cls, num_tx_selected: int, num_rx_selected: int, num_receivers: int) -> "SelectionSpec":
        return cls(num_tx_selected, (num_rx_selected,) * num_receivers)

    def validate(self, dims: SystemDims) -> None:
        if len(self.num_rx_selected_per_receiver) != dims.num_receivers:
            raise DomainError(
                f"selection covers {len(self.num_rx_selected_per_receiver)} receivers, system has {dims.num_receivers}"
            )
        if self.num_tx_selected > dims.num_tx:
            raise DomainError(f"cannot select {self.num_tx_selected} of {dims.num_tx} transmit antennas")
        for r, (k, n) in enumerate(zip(self.num_rx_selected_per_receiver, dims.num_rx_per_receiver)):
            if k > n:
                raise DomainError(f"receiver {r}: cannot select {k} of {n} receive antennas")


@dataclass(frozen=True)
class AntennaSubset:
    """Selected transmit indices and, per receiver, selected receive indices.

    Index tuples are stored sorted ascending.
    """

    tx_indices: tuple
    rx_indices_per_receiver: tuple

    def __post_init__(self):
        tx = tuple(sorted(int(i) for i in self.tx_indices))
        rx = tuple(tuple(sorted(int(i) for i in s)) for s in self.rx_indices_per_receiver)
        object.__setattr__(self, "tx_indices", tx)
        object.__setattr__(self, "rx_indices_per_receiver", rx)

    def validate(self, dims: SystemDims, spec: SelectionSpec = None) -> None:
        _check_indices(self.tx_indices, dims.num_tx, "transmit")
        if len(self.rx_indices_per_receiver) != dims.num_receivers:
            raise DomainError(
                f"subset covers {len(self.rx_indices_per_receiver)} receivers, system has {dims.num_receivers}"
            )
        for r, rx in enumerate(self.rx_indices_per_receiver):
            _check_indices(rx, dims.num_rx_per_receiver[r], f"receiver {r} receive")
        if spec is not None:
            if len(self.tx_indices) != spec.num_tx_selected:
                raise DomainError(f"{len(self.tx_indices)} transmit antennas selected, spec asks {spec.num_tx_selected}")
            for r, (rx, k) in enumerate(zip(self.rx_indices_per_receiver, spec.num_rx_selected_per_receiver)):
                if len(rx) != k:
                    raise DomainError(f"receiver {r}: {len(rx)} receive antennas selected, spec asks {k}")


@dataclass(frozen=True)
class SnrParams:
    """Transmit SNR per symbol ``Es/N0`` (linear)."""

    es_over_n0: float

    def __post_init__(self):
        v = float(self.es_over_n0)
        if not (np.isfinite(v) and v > 0):
            raise DomainError(f"es_over_n0 must be finite and > 0, got {self.es_over_n0}")
        object.__setattr__(self, "es_over_n0", v)

    @classmethod
    def from_db(cls, snr_db: float) -> "SnrParams":
        return cls(10.0 ** (snr_db / 10.0))

    @property
    def db(self) -> float:
        return 10.0 * np.log10(self.es_over_n0)


def _check_indices(idx, size, what):
    idx = list(idx)
    if len(set(idx)) != len(idx):
        raise DomainError(f"duplicate {what} index in {idx}")
    for i in idx:
        if not 0 <= i < size:
            raise DomainError(f"{what} index {i} out of range [0, {size})")


def _gains(h) -> np.ndarray:
    if isinstance(h, ChannelRealization):
        return h.gains
    return np.asarray(h, dtype=complex)


def _rho(snr) -> float:
    if isinstance(snr, SnrParams):
        return snr.es_over_n0
    return SnrParams(snr).es_over_n0


def extract_submatrix(h, rx_idx: Sequence[int], tx_idx: Sequence[int]) -> np.ndarray:
    """Rows ``rx_idx`` and columns ``tx_idx`` of ``h``, in the given order."""
    g = _gains(h)
    if g.ndim != 2:
        raise DomainError(f"channel must be 2-D, got shape {g.shape}")
    rx_idx = [int(i) for i in rx_idx]
    tx_idx = [int(i) for i in tx_idx]
    _check_indices(rx_idx, g.shape[0], "receive")
    _check_indices(tx_idx, g.shape[1], "transmit")
    return g[np.ix_(rx_idx, tx_idx)]


def capacity(h_sub, snr: Union[SnrParams, float], l_s: int) -> float:
    """Capacity in bit/s/Hz of the sub-channel ``h_sub`` with ``l_s`` active
    transmit antennas.

    Parameters
    ----------
    h_sub : array_like, shape (L_U, L_s)
        Selected sub-matrix.
    snr : SnrParams or float
        ``Es/N0``, linear.
    l_s : int
        Number of active transmit antennas; must equal ``h_sub.shape[1]``.
    """
    h = np.asarray(h_sub, dtype=complex)
    if h.ndim != 2:
        raise DomainError(f"h_sub must be 2-D, got shape {h.shape}")
    if l_s < 1 or h.shape[1] != l_s:
        raise DomainError(f"h_sub has {h.shape[1]} columns but l_s = {l_s}")
    return float(capacity_batch(h, snr, l_s))


def capacity_batch(h_sub, snr: Union[SnrParams, float], l_s: int) -> np.ndarray:
    """Vectorised :func:`capacity` over leading axes of ``h_sub`` (..., L_U, L_s)."""
    h = np.asarray(h_sub, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise DomainError("channel sub-matrix has non-finite entries")
    rho = _rho(snr) / l_s
    gram = np.conj(np.swapaxes(h, -1, -2)) @ h
    chol = np.linalg.cholesky(np.eye(h.shape[-1]) + rho * gram)
    return 2.0 * np.sum(np.log2(np.diagonal(chol, axis1=-2, axis2=-1).real), axis=-1)


def subset_capacity(channel: MulticastChannel, subset: AntennaSubset, snr) -> list:
    """Per-receiver capacity of ``subset`` on a flat multicast channel."""
    if not channel.is_flat:
        raise DomainError("capacity is defined on flat (single-tap) channels")
    subset.validate(channel.dims)
    l_s = len(subset.tx_indices)
    return [
        capacity(extract_submatrix(channel.gains(r), rx, subset.tx_indices), snr, l_s)
        for r, rx in enumerate(subset.rx_indices_per_receiver)
    ]


@dataclass(frozen=True)
class MulticastRate:
    mode: str
    min: float
    mean: float
    per_receiver: tuple


def multicast_rate(per_receiver: Sequence[float], mode: str = ASYNCHRONOUS) -> MulticastRate:
    """Summarise per-receiver capacities.

    ``min`` is the common rate every receiver can decode; ``mean`` the
    average. ``mode`` only labels which selection semantics produced the
    inputs.
    """
    check_mode(mode)
    values = tuple(float(c) for c in per_receiver)
    if not values:
        raise DomainError("multicast_rate needs at least one receiver")
    return MulticastRate(mode, min(values), float(np.mean(values)), values)
