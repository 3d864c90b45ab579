"""Seeded multicast MIMO channel generation.

Every receiver ``r`` sees an ``N_r x M`` complex gain matrix (rows are
receive antennas, columns transmit antennas). Entries are i.i.d. circularly
symmetric complex Gaussian with unit variance (flat Rayleigh fading). A
power-delay profile turns this into a set of independent taps whose average
powers follow the profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .seeding import SeedLike, make_rng, substream

__all__ = [
    "SystemDims",
    "ChannelRealization",
    "PowerDelayProfile",
    "MulticastChannel",
    "generate_rayleigh",
    "generate_pdp_channel",
    "generate_multicast",
]


@dataclass(frozen=True)
class SystemDims:
    """Antenna counts of a multicast system.

    Parameters
    ----------
    num_tx : int
        Transmit antennas at the base station (M).
    num_rx_per_receiver : sequence of int
        Receive antennas of each mobile receiver (N_r). Its length is the
        number of receivers R.
    """

    num_tx: int
    num_rx_per_receiver: tuple

    def __post_init__(self):
        object.__setattr__(self, "num_rx_per_receiver", tuple(int(n) for n in self.num_rx_per_receiver))
        if int(self.num_tx) < 1:
            raise DomainError(f"num_tx must be >= 1, got {self.num_tx}")
        if not self.num_rx_per_receiver:
            raise DomainError("at least one receiver is required")
        if any(n < 1 for n in self.num_rx_per_receiver):
            raise DomainError(f"receive antenna counts must be >= 1, got {self.num_rx_per_receiver}")

    @classmethod
    def uniform(cls, num_tx: int, num_rx: int, num_receivers: int) -> "SystemDims":
        return cls(num_tx, (num_rx,) * num_receivers)

    @property
    def num_receivers(self) -> int:
        return len(self.num_rx_per_receiver)

    def shape(self, receiver: int) -> tuple:
        self.check_receiver(receiver)
        return (self.num_rx_per_receiver[receiver], self.num_tx)

    def check_receiver(self, receiver: int) -> None:
        if not 0 <= receiver < self.num_receivers:
            raise DomainError(f"receiver {receiver} out of range [0, {self.num_receivers})")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One block-fading gain matrix ``h_r`` (rows: receive, cols: transmit)."""

    gains: np.ndarray
    receiver_id: int = 0
    tap: int = 0

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=complex)
        if g.ndim != 2:
            raise DomainError(f"gain matrix must be 2-D, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise DomainError("gain matrix has non-finite entries")
        object.__setattr__(self, "gains", g)

    def __eq__(self, other):
        if not isinstance(other, ChannelRealization):
            return NotImplemented
        return (
            self.receiver_id == other.receiver_id
            and self.tap == other.tap
            and np.array_equal(self.gains, other.gains)
        )

    __hash__ = None

    @property
    def shape(self) -> tuple:
        return self.gains.shape


@dataclass(frozen=True)
class PowerDelayProfile:
    """Discrete average power-delay profile ``sum_l P_l delta(tau - tau_l)``.

    ``delays`` in seconds (strictly increasing), ``powers`` linear and > 0.
    """

    delays: tuple
    powers: tuple

    def __post_init__(self):
        d = tuple(float(x) for x in self.delays)
        p = tuple(float(x) for x in self.powers)
        if len(d) == 0:
            raise DomainError("power-delay profile needs at least one tap")
        if len(d) != len(p):
            raise DomainError(f"{len(d)} delays but {len(p)} powers")
        if any(b <= a for a, b in zip(d, d[1:])):
            raise DomainError(f"tap delays must be strictly increasing: {d}")
        if not all(np.isfinite(x) and x > 0 for x in p):
            raise DomainError(f"tap powers must be finite and > 0: {p}")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "powers", p)

    @classmethod
    def from_taps(cls, taps: Sequence) -> "PowerDelayProfile":
        """Build from ``[(delay, power), ...]``."""
        taps = list(taps)
        return cls(tuple(t[0] for t in taps), tuple(t[1] for t in taps))

    @classmethod
    def flat(cls) -> "PowerDelayProfile":
        return cls((0.0,), (1.0,))

    @property
    def num_taps(self) -> int:
        return len(self.delays)

    @property
    def total_power(self) -> float:
        return float(sum(self.powers))

    def rms_delay_spread(self) -> float:
        p = np.asarray(self.powers)
        d = np.asarray(self.delays)
        mean = np.sum(p * d) / p.sum()
        return float(np.sqrt(np.sum(p * (d - mean) ** 2) / p.sum()))


@dataclass(frozen=True)
class MulticastChannel:
    """Stacked channel ``H = [h_1; ...; h_R]`` for all receivers and taps.

    ``realizations`` is ordered receiver-major: index ``r * num_taps + l``.
    """

    realizations: tuple
    dims: SystemDims
    pdp: Optional[PowerDelayProfile] = None

    def __post_init__(self):
        object.__setattr__(self, "realizations", tuple(self.realizations))
        expected = self.dims.num_receivers * self.num_taps
        if len(self.realizations) != expected:
            raise DomainError(f"expected {expected} realizations, got {len(self.realizations)}")
        for i, h in enumerate(self.realizations):
            r, l = divmod(i, self.num_taps)
            if h.receiver_id != r or h.tap != l:
                raise DomainError(f"realization {i} is labelled (r={h.receiver_id}, tap={h.tap}), expected ({r}, {l})")
            if h.shape != self.dims.shape(r):
                raise DomainError(f"receiver {r} gain shape {h.shape} != {self.dims.shape(r)}")

    @property
    def num_taps(self) -> int:
        return 1 if self.pdp is None else self.pdp.num_taps

    @property
    def is_flat(self) -> bool:
        return self.num_taps == 1

    def realization(self, receiver: int, tap: int = 0) -> ChannelRealization:
        self.dims.check_receiver(receiver)
        if not 0 <= tap < self.num_taps:
            raise DomainError(f"tap {tap} out of range [0, {self.num_taps})")
        return self.realizations[receiver * self.num_taps + tap]

    def gains(self, receiver: int, tap: int = 0) -> np.ndarray:
        return self.realization(receiver, tap).gains

    def stacked(self, tap: int = 0) -> np.ndarray:
        """Block matrix of all receivers' gains for one tap, shape (sum N_r, M)."""
        return np.vstack([self.gains(r, tap) for r in range(self.dims.num_receivers)])

    @classmethod
    def from_gains(cls, gains: Sequence) -> "MulticastChannel":
        """Wrap fixed flat gain matrices (one per receiver), e.g. for tests."""
        mats = [np.asarray(g, dtype=complex) for g in gains]
        if not mats:
            raise DomainError("at least one receiver gain matrix is required")
        num_tx = mats[0].shape[1]
        dims = SystemDims(num_tx, tuple(m.shape[0] for m in mats))
        return cls(tuple(ChannelRealization(m, r) for r, m in enumerate(mats)), dims)


def _complex_gaussian(rng: np.random.Generator, shape, power: float = 1.0) -> np.ndarray:
    scale = np.sqrt(power / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)


def generate_rayleigh(dims: SystemDims, receiver: int, seed: SeedLike) -> ChannelRealization:
    """Draw one flat Rayleigh realization for ``receiver``.

    Entries are CN(0, 1). The result is a pure function of ``seed``.
    """
    shape = dims.shape(receiver)
    rng = make_rng(seed)
    return ChannelRealization(_complex_gaussian(rng, shape), receiver)


def generate_pdp_channel(
    dims: SystemDims, receiver: int, pdp: PowerDelayProfile, seed: SeedLike
) -> list:
    """Draw one realization per tap of ``pdp``.

    Tap ``l`` comes from its own sub-stream ``substream(seed, l)`` and has
    entries CN(0, P_l), so taps are mutually independent.
    """
    if pdp is None or pdp.num_taps == 0:
        raise DomainError("a non-empty power-delay profile is required")
    shape = dims.shape(receiver)
    taps = []
    for l, power in enumerate(pdp.powers):
        rng = make_rng(substream(seed, l))
        taps.append(ChannelRealization(_complex_gaussian(rng, shape, power), receiver, l))
    return taps


def generate_multicast(
    dims: SystemDims, pdp: Optional[PowerDelayProfile] = None, seed: SeedLike = 0
) -> MulticastChannel:
    """Draw independent channels for all receivers.

    Receiver ``r`` uses ``substream(seed, r)``; with a profile, its taps are
    further split as ``substream(seed, r, l)``.
    """
    realizations = []
    for r in range(dims.num_receivers):
        child = substream(seed, r)
        if pdp is None:
            realizations.append(generate_rayleigh(dims, r, child))
        else:
            realizations.extend(generate_pdp_channel(dims, r, pdp, child))
    return MulticastChannel(tuple(realizations), dims, pdp)
