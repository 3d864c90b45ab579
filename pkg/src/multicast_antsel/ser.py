"""Symbol error rate of square QAM: closed form and link simulation.

Analytic side: the AWGN symbol error probability of K-ary square QAM,
averaged over the combined-SNR density ``g^(L-1) exp(-g/gbar) / ((L-1)! gbar^L)``
(the output SNR of L-branch maximal-ratio combining in Rayleigh fading).

Simulation side: QAM symbols pushed through a selected multicast sub-channel
``y = h W x + n`` with per-antenna combining and minimum-distance detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate, special

from .capacity import AntennaSubset
from .channel import MulticastChannel
from .errors import DomainError, QuadratureError
from .seeding import SeedLike, make_rng, substream

__all__ = [
    "STANDARD",
    "PAPER_LITERAL",
    "QamConstellation",
    "SerParams",
    "SerCurve",
    "LinkSimConfig",
    "q_function",
    "conditional_ser_qam",
    "combined_snr_pdf",
    "average_ser",
    "analytic_ser_curve",
    "simulate_link",
    "binomial_halfwidth",
]

STANDARD = "standard"
PAPER_LITERAL = "paper_literal"
VARIANTS = (STANDARD, PAPER_LITERAL)

SELECTION = "selection"
MRC = "mrc"
COMBINERS = (SELECTION, MRC)


def _check_order(k: int) -> int:
    k = int(k)
    m = math.isqrt(k)
    if k < 4 or m * m != k:
        raise DomainError(f"QAM order must be a perfect square >= 4, got {k}")
    return k


def _gray(n):
    return n ^ (n >> 1)


class QamConstellation:
    """Gray-mapped square K-QAM with unit average symbol energy.

    ``points[label]`` is the symbol whose bit pattern is the binary
    expansion of ``label`` (high half of the bits: in-phase axis).
    """

    def __init__(self, order: int = 16):
        k = _check_order(order)
        m = math.isqrt(k)
        if m & (m - 1):
            raise DomainError(f"Gray mapping needs sqrt(K) to be a power of two, got K={k}")
        self.order = k
        self.bits_per_symbol = int(math.log2(k))
        half = self.bits_per_symbol // 2
        # amplitude index j carries Gray label gray(j) on each axis
        level_of_label = np.empty(m, dtype=int)
        level_of_label[[_gray(j) for j in range(m)]] = np.arange(m)
        amps = 2.0 * level_of_label - (m - 1)
        labels = np.arange(k)
        i_amp = amps[labels >> half]
        q_amp = amps[labels & (m - 1)]
        scale = np.sqrt(2.0 * (k - 1) / 3.0)
        self.points = (i_amp + 1j * q_amp) / scale
        self.points.setflags(write=False)

    def __repr__(self):
        return f"QamConstellation(order={self.order})"

    @property
    def min_distance(self) -> float:
        return 2.0 / np.sqrt(2.0 * (self.order - 1) / 3.0)

    @property
    def gray_map(self) -> np.ndarray:
        """Bit matrix, row ``label`` holds the bits of ``points[label]`` (MSB first)."""
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return (np.arange(self.order)[:, None] >> shifts) & 1

    def modulate(self, labels) -> np.ndarray:
        return self.points[np.asarray(labels)]

    def detect(self, z) -> np.ndarray:
        """Minimum-distance decision; returns labels."""
        z = np.asarray(z)
        d = np.abs(z[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)


# -- closed forms -----------------------------------------------------------


def q_function(x):
    """Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def conditional_ser_qam(gamma, k: int = 16, variant: str = STANDARD):
    """Symbol error probability of square K-QAM at symbol SNR ``gamma`` (linear).

    ``standard`` is the exact expression
    ``1 - (1 - 2(1 - 1/sqrt(K)) Q(sqrt(3 gamma/(K-1))))^2``;
    ``paper_literal`` keeps only the leading term
    ``4(1 - 1/sqrt(K)) Q(sqrt(3 gamma/(K-1)))``, clipped to 1.
    """
    k = _check_order(k)
    if variant not in VARIANTS:
        raise DomainError(f"variant must be one of {VARIANTS}, got {variant!r}")
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise DomainError("gamma must be >= 0")
    a = 1.0 - 1.0 / np.sqrt(k)
    q = 0.5 * special.erfc(np.sqrt(3.0 * g / (k - 1)) / np.sqrt(2.0))
    if variant == STANDARD:
        p = 2.0 * a * q
        out = p * (2.0 - p)
    else:
        out = np.minimum(4.0 * a * q, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def combined_snr_pdf(gamma, L: int, mean_snr: float):
    """Density of the sum of ``L`` i.i.d. exponential branch SNRs of mean ``mean_snr``."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise DomainError("gamma must be >= 0")
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    if not mean_snr > 0:
        raise DomainError(f"mean_snr must be > 0, got {mean_snr}")
    logp = special.xlogy(L - 1, g) - g / mean_snr - special.gammaln(L) - L * np.log(mean_snr)
    out = np.exp(logp)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SerParams:
    """Inputs of the fading-averaged SER.

    ``mean_branch_snr`` is the average SNR per diversity branch (linear);
    ``symbol_snr_grid`` lists values of it in dB for curve sweeps.
    """

    branches: int = 1
    mean_branch_snr: float = 1.0
    symbol_snr_grid: tuple = ()
    variant: str = STANDARD

    def __post_init__(self):
        object.__setattr__(self, "symbol_snr_grid", tuple(float(x) for x in self.symbol_snr_grid))
        if int(self.branches) < 1:
            raise DomainError(f"branches must be >= 1, got {self.branches}")
        if not (np.isfinite(self.mean_branch_snr) and self.mean_branch_snr > 0):
            raise DomainError(f"mean_branch_snr must be finite and > 0, got {self.mean_branch_snr}")
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @staticmethod
    def ebn0_to_esn0(ebn0: float, k: int) -> float:
        """Per-bit to per-symbol SNR: ``Es = Eb log2(K)``."""
        return ebn0 * math.log2(_check_order(k))


# Erlang mass beyond L + 40 sqrt(L) (in units of the mean branch SNR) is < 1e-12.
def _upper_limit(L: int) -> float:
    return L + 40.0 * math.sqrt(L)


def average_ser(params: SerParams, k: int = 16) -> float:
    """Conditional SER averaged over the combined-SNR density.

    Integrates in the normalised variable ``t = gamma / mean_snr`` on
    ``[0, L + 40 sqrt(L)]``; the neglected tail is bracketed by
    ``[0, f(U) * P(T > U)]`` and its midpoint is added.

    Raises
    ------
    QuadratureError
        If the adaptive rule does not reach relative accuracy 1e-8.
    """
    k = _check_order(k)
    L = int(params.branches)
    gbar = float(params.mean_branch_snr)
    U = _upper_limit(L)
    log_norm = special.gammaln(L)

    def integrand(t):
        w = math.exp(special.xlogy(L - 1, t) - t - log_norm)
        return conditional_ser_qam(gbar * t, k, params.variant) * w

    # the conditional SER falls off on the scale (K-1)/(3 gbar); tell quad where
    knee = (k - 1) / (3.0 * gbar)
    points = [p for p in (knee, 10 * knee, 100 * knee, float(L)) if 0 < p < U]
    val, abserr, info, *msg = integrate.quad(
        integrand, 0.0, U, epsabs=0.0, epsrel=1e-11, limit=500, points=points or None, full_output=1
    )
    if not np.isfinite(val) or abserr > 1e-8 * abs(val) + 1e-300:
        raise QuadratureError(
            f"average_ser did not converge: value={val!r}, abserr={abserr!r}, "
            f"L={L}, mean_snr={gbar!r}, K={k}, evaluations={info.get('neval')}, "
            f"message={msg[0] if msg else ''}"
        )
    tail = conditional_ser_qam(gbar * U, k, params.variant) * special.gammaincc(L, U)
    return float(min(max(val + 0.5 * tail, 0.0), 1.0))


@dataclass(frozen=True)
class SerCurve:
    """Sequence of ``(snr_db, ser)`` points with provenance.

    Monte Carlo curves also carry symbol/error counts and 3-sigma binomial
    half-widths in ``confidence``.
    """

    points: tuple
    method: str
    config: dict = field(default_factory=dict, compare=False)
    confidence: Optional[tuple] = None
    symbols: Optional[tuple] = None
    errors: Optional[tuple] = None

    def __post_init__(self):
        pts = tuple((float(s), float(p)) for s, p in self.points)
        object.__setattr__(self, "points", pts)
        if self.method not in ("analytic", "monte_carlo"):
            raise DomainError(f"unknown method {self.method!r}")
        snr = [s for s, _ in pts]
        if any(b <= a for a, b in zip(snr, snr[1:])):
            raise DomainError("snr_db must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for _, p in pts):
            raise DomainError("SER values must lie in [0, 1]")

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([s for s, _ in self.points])

    @property
    def ser(self) -> np.ndarray:
        return np.array([p for _, p in self.points])


def analytic_ser_curve(params: SerParams, k: int = 16) -> SerCurve:
    """:func:`average_ser` at every mean branch SNR of ``params.symbol_snr_grid``."""
    grid = params.symbol_snr_grid
    if not grid:
        raise DomainError("symbol_snr_grid is empty")
    pts = [(db, average_ser(replace(params, mean_branch_snr=10.0 ** (db / 10.0)), k)) for db in grid]
    return SerCurve(
        tuple(pts),
        "analytic",
        {"branches": params.branches, "variant": params.variant, "order": k},
    )


# -- link simulation --------------------------------------------------------


@dataclass(frozen=True)
class LinkSimConfig:
    """Monte Carlo link settings.

    ``noise_variance`` is the per-receive-antenna noise power used when no
    SNR grid is given; with a grid, point ``s`` dB uses ``10**(-s/10)``
    (transmit power per symbol is normalised to 1).
    """

    symbols_per_block: int = 1000
    num_blocks: int = 100
    noise_variance: float = 1.0
    combining: str = SELECTION
    seed: SeedLike = 0

    def __post_init__(self):
        if self.symbols_per_block < 1 or self.num_blocks < 1:
            raise DomainError("symbols_per_block and num_blocks must be >= 1")
        if not (np.isfinite(self.noise_variance) and self.noise_variance > 0):
            raise DomainError(f"noise_variance must be finite and > 0, got {self.noise_variance}")
        if self.combining not in COMBINERS:
            raise DomainError(f"combining must be one of {COMBINERS}, got {self.combining!r}")

    @property
    def symbols(self) -> int:
        return self.symbols_per_block * self.num_blocks


def binomial_halfwidth(errors: int, n: int, z: float = 3.0) -> float:
    p = errors / n
    return float(z * math.sqrt(p * (1.0 - p) / n))


def _receiver_pairs(channel: MulticastChannel, subset) -> list:
    if isinstance(subset, AntennaSubset):
        subset.validate(channel.dims)
        return [(subset.tx_indices, rx) for rx in subset.rx_indices_per_receiver]
    pairs = subset.pairs()
    if len(pairs) != channel.dims.num_receivers:
        raise DomainError(f"selection covers {len(pairs)} receivers, channel has {channel.dims.num_receivers}")
    AntennaSubset(pairs[0][0], [rx for _, rx in pairs]).validate(channel.dims)
    for tx, _ in pairs:
        AntennaSubset(tx, [rx for _, rx in pairs]).validate(channel.dims)
    return pairs


def effective_branch_gains(h: np.ndarray, tx, rx) -> np.ndarray:
    """Per-receive-antenna gain when every selected transmit antenna sends
    the same symbol at power ``1/L_s``."""
    sub = h[np.ix_(list(rx), list(tx))]
    return sub.sum(axis=1) / np.sqrt(len(tx))


def _combine(y, g, combining):
    if combining == SELECTION:
        n = int(np.argmax(np.abs(g) ** 2))
        if g[n] == 0:
            return np.zeros(y.shape[1], dtype=complex)
        return y[n] / g[n]
    energy = np.sum(np.abs(g) ** 2)
    if energy == 0:
        return np.zeros(y.shape[1], dtype=complex)
    return (g.conj() @ y) / energy


def _count_errors(g, noise_var, const, cfg, seed) -> int:
    rng = make_rng(seed)
    T = cfg.symbols_per_block
    labels = rng.integers(const.order, size=T)
    x = const.points[labels]
    noise = np.sqrt(noise_var / 2.0) * (
        rng.standard_normal((g.size, T)) + 1j * rng.standard_normal((g.size, T))
    )
    y = g[:, None] * x[None, :] + noise
    z = _combine(y, g, cfg.combining)
    return int(np.count_nonzero(const.detect(z) != labels))


def simulate_link(
    channel: MulticastChannel,
    subset,
    cfg: LinkSimConfig,
    constellation: Optional[QamConstellation] = None,
    snr_grid_db: Optional[Sequence[float]] = None,
) -> list:
    """Monte Carlo SER of each receiver over its selected sub-channel.

    The channel is held fixed (one fading block per call); each of the
    ``cfg.num_blocks`` blocks draws fresh symbols and noise from
    ``substream(cfg.seed, r, i, b)`` for receiver ``r``, grid point ``i``
    and block ``b``, so results do not depend on evaluation order.

    Parameters
    ----------
    channel : MulticastChannel
        Flat channel.
    subset : AntennaSubset or MulticastSelection
        A common selection, or per-receiver selections (transmit sets may
        differ between receivers).
    cfg : LinkSimConfig
    constellation : QamConstellation, optional
        Defaults to 16-QAM.
    snr_grid_db : sequence of float, optional
        Average received SNR per receive antenna. ``None`` simulates a
        single point at ``cfg.noise_variance``.

    Returns
    -------
    list of SerCurve
        One curve per receiver.
    """
    if not channel.is_flat:
        raise DomainError("simulate_link needs a flat (single-tap) channel")
    const = constellation or QamConstellation(16)
    pairs = _receiver_pairs(channel, subset)
    if snr_grid_db is None:
        noise = [cfg.noise_variance]
        grid = [-10.0 * math.log10(cfg.noise_variance)]
    else:
        grid = [float(s) for s in snr_grid_db]
        if not grid:
            raise DomainError("snr_grid_db is empty")
        noise = [10.0 ** (-s / 10.0) for s in grid]

    curves = []
    n = cfg.symbols
    for r, (tx, rx) in enumerate(pairs):
        g = effective_branch_gains(channel.gains(r), tx, rx)
        errs = []
        for i, nv in enumerate(noise):
            errs.append(
                sum(_count_errors(g, nv, const, cfg, substream(cfg.seed, r, i, b)) for b in range(cfg.num_blocks))
            )
        curves.append(
            SerCurve(
                tuple((s, e / n) for s, e in zip(grid, errs)),
                "monte_carlo",
                {"receiver": r, "combining": cfg.combining, "order": const.order, "tx": tx, "rx": rx},
                tuple(binomial_halfwidth(e, n) for e in errs),
                (n,) * len(errs),
                tuple(errs),
            )
        )
    return curves
