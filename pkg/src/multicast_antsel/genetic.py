"""Real-valued priority genetic antenna selection and its exhaustive oracle.

A chromosome is a real vector of priorities: the first ``N`` genes rank the
receive antennas, the last ``M`` genes rank the transmit antennas. Decoding
keeps the ``L_U`` highest receive priorities and the ``L_s`` highest
transmit priorities, so any real vector decodes to a valid subset and the
sort-refill repair needed by integer-priority GAs never arises.

One generation: score, copy the ``elite_count`` best unchanged, take the
``T`` best into a mating pool, pair the pool at random, blend-crossover each
pair, mutate the children with Gaussian noise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .capacity import (
    ASYNCHRONOUS,
    SYNCHRONOUS,
    AntennaSubset,
    MulticastRate,
    SelectionSpec,
    SnrParams,
    capacity,
    capacity_batch,
    check_mode,
    extract_submatrix,
    multicast_rate,
)
from .channel import ChannelRealization, MulticastChannel, SystemDims
from .errors import ContractError, DomainError, EnumerationCapError
from .seeding import SeedLike, make_rng, substream

__all__ = [
    "Chromosome",
    "GaConfig",
    "PRESETS",
    "SelectionOutcome",
    "MulticastSelection",
    "DEFAULT_ENUMERATION_CAP",
    "init_population",
    "decode",
    "score",
    "select_mating_pool",
    "crossover",
    "mutate",
    "evolve",
    "evolve_multicast",
    "exhaustive_search",
    "exhaustive_evaluations",
]

DEFAULT_ENUMERATION_CAP = 2_000_000


@dataclass
class Chromosome:
    """Priority vector ``[rx_1..rx_N, tx_1..tx_M]`` with cached fitness."""

    priorities: np.ndarray
    fitness: Optional[float] = None

    def __post_init__(self):
        p = np.array(self.priorities, dtype=float)
        if p.ndim != 1:
            raise DomainError(f"priorities must be a vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DomainError("priorities must be finite")
        self.priorities = p

    def __len__(self):
        return self.priorities.size


@dataclass(frozen=True)
class GaConfig:
    """Genetic algorithm hyper-parameters.

    ``mutation_std`` defaults to twice ``priority_std``: blend crossover
    shrinks the spread of the population, so mutation compensates with a
    larger step than the initial draw.
    """

    population_size: int = 20
    mating_pool_size: int = 8
    generations: int = 12
    mutation_prob: float = 0.09
    crossover_prob: float = 0.75
    priority_std: float = 1.0
    mutation_std: Optional[float] = None
    elite_count: int = 2
    seed: SeedLike = 0

    def __post_init__(self):
        if self.mutation_std is None:
            object.__setattr__(self, "mutation_std", 2.0 * self.priority_std)
        if self.population_size < 1:
            raise DomainError("population_size must be >= 1")
        if not 1 <= self.mating_pool_size <= self.population_size:
            raise DomainError(
                f"mating_pool_size must be in [1, population_size], got {self.mating_pool_size}"
            )
        if self.generations < 1:
            raise DomainError("generations must be >= 1")
        if not 1 <= self.elite_count <= self.population_size:
            raise DomainError(f"elite_count must be in [1, population_size], got {self.elite_count}")
        for name in ("mutation_prob", "crossover_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be in [0, 1], got {v}")
        for name in ("priority_std", "mutation_std"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {v}")


#: Hyper-parameter sets used for the two reference scenarios.
PRESETS = {
    "paper-4T4R-2T2R": GaConfig(
        population_size=20, mating_pool_size=8, generations=12, mutation_prob=0.09, crossover_prob=0.75
    ),
    "paper-8T8R-3T3R": GaConfig(
        population_size=40, mating_pool_size=16, generations=24, mutation_prob=0.09, crossover_prob=0.75
    ),
}


@dataclass(frozen=True)
class SelectionOutcome:
    """Result of one single-receiver search (GA or exhaustive)."""

    best_subset: AntennaSubset
    best_capacity: float
    fitness_history: tuple
    evaluations: int
    receiver: int = 0
    best_priorities: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def tx_indices(self) -> tuple:
        return self.best_subset.tx_indices

    @property
    def rx_indices(self) -> tuple:
        return self.best_subset.rx_indices_per_receiver[0]


@dataclass(frozen=True)
class MulticastSelection:
    """Per-receiver selections for a whole multicast channel.

    In synchronous mode every receiver shares ``tx_indices_per_receiver[0]``.
    """

    mode: str
    method: str
    tx_indices_per_receiver: tuple
    rx_indices_per_receiver: tuple
    per_receiver_capacity: tuple
    rate: MulticastRate
    evaluations: int
    fitness_history: tuple = ()

    @property
    def num_receivers(self) -> int:
        return len(self.rx_indices_per_receiver)

    def pairs(self) -> list:
        """``[(tx_indices, rx_indices), ...]`` per receiver."""
        return list(zip(self.tx_indices_per_receiver, self.rx_indices_per_receiver))

    def common_subset(self) -> AntennaSubset:
        if len(set(self.tx_indices_per_receiver)) != 1:
            raise DomainError("receivers use different transmit subsets")
        return AntennaSubset(self.tx_indices_per_receiver[0], self.rx_indices_per_receiver)


# -- primitive operators ----------------------------------------------------


def _top_k(values: np.ndarray, k: int) -> np.ndarray:
    """Sorted indices of the ``k`` largest entries along the last axis.

    Ties go to the lower index (stable sort on the negated values).
    """
    order = np.argsort(-values, axis=-1, kind="stable")[..., :k]
    return np.sort(order, axis=-1)


def _init_array(rng: np.random.Generator, size: int, length: int, std: float) -> np.ndarray:
    return std * rng.standard_normal((size, length))


def _crossover_arrays(a, b, p_c, rng):
    """Blend crossover of paired rows of ``a`` and ``b``."""
    gate = rng.random(a.shape[0]) < p_c
    alpha = rng.random(a.shape)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    c1 = np.clip(b + alpha * (a - b), lo, hi)
    c2 = np.clip(a + alpha * (b - a), lo, hi)
    gate = gate[:, None]
    return np.where(gate, c1, a), np.where(gate, c2, b)


def _mutate_array(x, p_m, std, rng):
    mask = rng.random(x.shape) < p_m
    noise = std * rng.standard_normal(x.shape)
    return x + np.where(mask, noise, 0.0)


def init_population(cfg: GaConfig, chromosome_len: int) -> list:
    """``cfg.population_size`` chromosomes with genes drawn from N(0, sigma^2)."""
    rng = make_rng(cfg.seed)
    arr = _init_array(rng, cfg.population_size, chromosome_len, cfg.priority_std)
    return [Chromosome(row) for row in arr]


def _split_lengths(dims_or_n, receiver):
    if isinstance(dims_or_n, SystemDims):
        return dims_or_n.num_rx_per_receiver[receiver], dims_or_n.num_tx
    n_rx, n_tx = dims_or_n
    return int(n_rx), int(n_tx)


def decode(c, spec: SelectionSpec, dims, receiver: int = 0) -> tuple:
    """Map priorities to ``(rx_indices, tx_indices)`` for one receiver.

    ``dims`` is a :class:`SystemDims` or an ``(N, M)`` pair.
    """
    p = c.priorities if isinstance(c, Chromosome) else np.asarray(c, dtype=float)
    n_rx, n_tx = _split_lengths(dims, receiver)
    if p.size != n_rx + n_tx:
        raise DomainError(f"chromosome length {p.size} != N + M = {n_rx + n_tx}")
    l_u = spec.num_rx_selected_per_receiver[receiver]
    l_s = spec.num_tx_selected
    if l_u > n_rx or l_s > n_tx:
        raise DomainError(f"cannot select {l_u}x{l_s} from {n_rx}x{n_tx}")
    rx = tuple(int(i) for i in _top_k(p[:n_rx], l_u))
    tx = tuple(int(i) for i in _top_k(p[n_rx:], l_s))
    return rx, tx


def _as_realization(h) -> ChannelRealization:
    if isinstance(h, ChannelRealization):
        return h
    return ChannelRealization(np.asarray(h, dtype=complex), 0)


def score(c: Chromosome, h_r, spec: SelectionSpec, snr) -> float:
    """Capacity of the decoded sub-channel; cached on ``c.fitness``."""
    h = _as_realization(h_r)
    rx, tx = decode(c, spec, h.shape, h.receiver_id)
    c.fitness = capacity(extract_submatrix(h.gains, rx, tx), snr, len(tx))
    return c.fitness


def _ranked(fitness: np.ndarray, k: int) -> np.ndarray:
    return np.argsort(-fitness, kind="stable")[:k]


def select_mating_pool(population: Sequence[Chromosome], T: int) -> list:
    """The ``T`` fittest chromosomes, best first; ties keep population order."""
    if not 1 <= T <= len(population):
        raise DomainError(f"mating pool size {T} not in [1, {len(population)}]")
    if any(c.fitness is None for c in population):
        raise ContractError("every chromosome must be scored before selection")
    fit = np.array([c.fitness for c in population], dtype=float)
    return [population[i] for i in _ranked(fit, T)]


def crossover(p1: Chromosome, p2: Chromosome, p_c: float, rng: np.random.Generator) -> tuple:
    """Per-gene blend of two parents, applied with probability ``p_c``.

    When the pair crosses, each gene gets its own weight ``a ~ U[0, 1)``:
    ``child1 = a*p1 + (1-a)*p2`` and ``child2 = (1-a)*p1 + a*p2``.
    """
    if len(p1) != len(p2):
        raise DomainError(f"parent lengths differ: {len(p1)} vs {len(p2)}")
    c1, c2 = _crossover_arrays(p1.priorities[None, :], p2.priorities[None, :], p_c, rng)
    return Chromosome(c1[0]), Chromosome(c2[0])


def mutate(c: Chromosome, p_m: float, mutation_std: float, rng: np.random.Generator) -> Chromosome:
    """Add N(0, mutation_std^2) noise to each gene with probability ``p_m``."""
    return Chromosome(_mutate_array(c.priorities[None, :], p_m, mutation_std, rng)[0])


# -- the generational loop --------------------------------------------------


def _pairing(rng, pool_size, n_pairs):
    rounds = math.ceil(2 * n_pairs / pool_size)
    idx = np.concatenate([rng.permutation(pool_size) for _ in range(rounds)])
    idx = idx[: 2 * n_pairs]
    return idx[0::2], idx[1::2]


def _run_ga(n_genes: int, fitness_fn: Callable, cfg: GaConfig):
    rng = make_rng(cfg.seed)
    Q = cfg.population_size
    pop = _init_array(rng, Q, n_genes, cfg.priority_std)
    fit = fitness_fn(pop)
    evaluations = Q
    history = []
    for gen in range(cfg.generations):
        history.append(float(fit.max()))
        if gen == cfg.generations - 1:
            break
        order = _ranked(fit, max(cfg.elite_count, cfg.mating_pool_size))
        elite = order[: cfg.elite_count]
        pool = pop[order[: cfg.mating_pool_size]]
        n_children = Q - cfg.elite_count
        if n_children == 0:
            continue
        ia, ib = _pairing(rng, cfg.mating_pool_size, math.ceil(n_children / 2))
        c1, c2 = _crossover_arrays(pool[ia], pool[ib], cfg.crossover_prob, rng)
        children = np.empty((2 * len(ia), n_genes))
        children[0::2] = c1
        children[1::2] = c2
        children = _mutate_array(children[:n_children], cfg.mutation_prob, cfg.mutation_std, rng)
        pop = np.vstack([pop[elite], children])
        fit = np.concatenate([fit[elite], fitness_fn(children)])
        evaluations += n_children
    best = int(np.argmax(fit))
    return pop[best], float(fit[best]), tuple(history), evaluations


def _population_capacity(pop, gains, n_rx, l_u, l_s, rho, offset=0):
    rx = _top_k(pop[:, offset : offset + n_rx], l_u)
    tx = _top_k(pop[:, -gains.shape[1] :], l_s)
    sub = gains[rx[:, :, None], tx[:, None, :]]
    return capacity_batch(sub, rho, l_s)


def _rho(snr) -> float:
    return snr.es_over_n0 if isinstance(snr, SnrParams) else SnrParams(snr).es_over_n0


def evolve(h_r, spec: SelectionSpec, snr, cfg: GaConfig) -> SelectionOutcome:
    """Run the GA on a single receiver's channel.

    Parameters
    ----------
    h_r : ChannelRealization or array_like
        ``N x M`` gains. A realization's ``receiver_id`` picks ``L_U`` from
        ``spec``; a bare array is treated as receiver 0.
    spec : SelectionSpec
    snr : SnrParams or float
        ``Es/N0`` (linear).
    cfg : GaConfig

    Returns
    -------
    SelectionOutcome
        Best chromosome of the last generation, decoded.
    """
    h = _as_realization(h_r)
    r = h.receiver_id
    n_rx, n_tx = h.shape
    l_u, l_s = spec.num_rx_selected_per_receiver[r], spec.num_tx_selected
    if l_u > n_rx or l_s > n_tx:
        raise DomainError(f"cannot select {l_u}x{l_s} from {n_rx}x{n_tx}")
    rho = _rho(snr)

    def fitness(pop):
        return _population_capacity(pop, h.gains, n_rx, l_u, l_s, rho)

    best, cap, history, evals = _run_ga(n_rx + n_tx, fitness, cfg)
    rx = tuple(int(i) for i in _top_k(best[:n_rx], l_u))
    tx = tuple(int(i) for i in _top_k(best[n_rx:], l_s))
    return SelectionOutcome(AntennaSubset(tx, (rx,)), cap, history, evals, r, best)


def _evolve_synchronous(channel, spec, snr, cfg):
    dims = channel.dims
    n_rx = dims.num_rx_per_receiver
    offsets = np.concatenate([[0], np.cumsum(n_rx)[:-1]]).astype(int)
    l_s = spec.num_tx_selected
    rho = _rho(snr)
    gains = [channel.gains(r) for r in range(dims.num_receivers)]

    def per_receiver(pop):
        return np.stack(
            [
                _population_capacity(pop, gains[r], n_rx[r], spec.num_rx_selected_per_receiver[r], l_s, rho, offsets[r])
                for r in range(dims.num_receivers)
            ],
            axis=-1,
        )

    best, cap, history, evals = _run_ga(sum(n_rx) + dims.num_tx, lambda pop: per_receiver(pop).min(axis=-1), cfg)
    per_r = per_receiver(best[None, :])[0]
    tx = tuple(int(i) for i in _top_k(best[-dims.num_tx :], l_s))
    rx = tuple(
        tuple(int(i) for i in _top_k(best[offsets[r] : offsets[r] + n_rx[r]], spec.num_rx_selected_per_receiver[r]))
        for r in range(dims.num_receivers)
    )
    return MulticastSelection(
        SYNCHRONOUS,
        "ga",
        (tx,) * dims.num_receivers,
        rx,
        tuple(float(c) for c in per_r),
        multicast_rate(per_r, SYNCHRONOUS),
        evals,
        history,
    )


def _flat_channel(channel: MulticastChannel, spec: SelectionSpec) -> None:
    if not channel.is_flat:
        raise DomainError("antenna selection runs on flat (single-tap) channels")
    spec.validate(channel.dims)


def evolve_multicast(
    channel: MulticastChannel, spec: SelectionSpec, snr, cfg: GaConfig, mode: str = ASYNCHRONOUS
) -> MulticastSelection:
    """GA selection for every receiver of ``channel``.

    ``asynchronous``: one independent run per receiver, run ``r`` seeded
    with ``substream(cfg.seed, r)``; transmit subsets may differ.
    ``synchronous``: one run over a joint chromosome
    ``[rx_0 .. rx_{R-1}, tx]`` whose fitness is the minimum receiver
    capacity; seeded with ``substream(cfg.seed, 0)``.
    """
    check_mode(mode)
    _flat_channel(channel, spec)
    if mode == SYNCHRONOUS:
        return _evolve_synchronous(channel, spec, snr, replace(cfg, seed=substream(cfg.seed, 0)))
    outcomes = [
        evolve(channel.realization(r), spec, snr, replace(cfg, seed=substream(cfg.seed, r)))
        for r in range(channel.dims.num_receivers)
    ]
    caps = [o.best_capacity for o in outcomes]
    return MulticastSelection(
        ASYNCHRONOUS,
        "ga",
        tuple(o.tx_indices for o in outcomes),
        tuple(o.rx_indices for o in outcomes),
        tuple(caps),
        multicast_rate(caps, ASYNCHRONOUS),
        sum(o.evaluations for o in outcomes),
        tuple(o.fitness_history for o in outcomes),
    )


# -- exhaustive oracle ------------------------------------------------------


def _combos(n, k) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n), k)), dtype=int).reshape(-1, k)


def exhaustive_evaluations(dims: SystemDims, spec: SelectionSpec, mode: str = ASYNCHRONOUS) -> int:
    """Number of capacity evaluations :func:`exhaustive_search` performs.

    Both modes enumerate ``C(M, L_s) * sum_r C(N_r, L_U_r)`` sub-matrices;
    the synchronous optimum decomposes because, for a fixed transmit set,
    each receiver's best receive set is chosen independently.
    """
    check_mode(mode)
    n_tx = math.comb(dims.num_tx, spec.num_tx_selected)
    return n_tx * sum(math.comb(n, k) for n, k in zip(dims.num_rx_per_receiver, spec.num_rx_selected_per_receiver))


def _all_capacities(gains, l_u, l_s, rho):
    """Capacity table indexed [rx combo, tx combo] (lexicographic order)."""
    rxc = _combos(gains.shape[0], l_u)
    txc = _combos(gains.shape[1], l_s)
    sub = gains[rxc[:, None, :, None], txc[None, :, None, :]]
    return capacity_batch(sub, rho, l_s), rxc, txc


def exhaustive_search(
    channel: Union[ChannelRealization, MulticastChannel, np.ndarray],
    spec: SelectionSpec,
    snr,
    mode: str = ASYNCHRONOUS,
    cap: int = DEFAULT_ENUMERATION_CAP,
):
    """Exact optimum by enumerating every antenna subset.

    Given a single realization (or bare matrix), returns a
    :class:`SelectionOutcome` maximising that receiver's capacity. Given a
    :class:`MulticastChannel`, returns a :class:`MulticastSelection`:
    per-receiver optima (``asynchronous``) or the common transmit set
    maximising the minimum receiver capacity (``synchronous``).

    Ties resolve to the lexicographically smallest (rx, tx) index sets.

    Raises
    ------
    EnumerationCapError
        If more than ``cap`` capacity evaluations would be needed.
    """
    check_mode(mode)
    rho = _rho(snr)
    l_s = spec.num_tx_selected
    if not isinstance(channel, MulticastChannel):
        h = _as_realization(channel)
        n_rx, n_tx = h.shape
        l_u = spec.num_rx_selected_per_receiver[h.receiver_id]
        if l_u > n_rx or l_s > n_tx:
            raise DomainError(f"cannot select {l_u}x{l_s} from {n_rx}x{n_tx}")
        count = math.comb(n_rx, l_u) * math.comb(n_tx, l_s)
        if count > cap:
            raise EnumerationCapError(count, cap)
        table, rxc, txc = _all_capacities(h.gains, l_u, l_s, rho)
        i, j = np.unravel_index(int(np.argmax(table)), table.shape)
        best = float(table[i, j])
        subset = AntennaSubset(tuple(txc[j]), (tuple(rxc[i]),))
        return SelectionOutcome(subset, best, (best,), count, h.receiver_id)

    _flat_channel(channel, spec)
    dims = channel.dims
    count = exhaustive_evaluations(dims, spec, mode)
    if count > cap:
        raise EnumerationCapError(count, cap)
    tables = []
    for r in range(dims.num_receivers):
        tables.append(_all_capacities(channel.gains(r), spec.num_rx_selected_per_receiver[r], l_s, rho))
    txc = tables[0][2]

    if mode == ASYNCHRONOUS:
        tx_sets, rx_sets, caps = [], [], []
        for table, rxc, _ in tables:
            i, j = np.unravel_index(int(np.argmax(table)), table.shape)
            tx_sets.append(tuple(int(t) for t in txc[j]))
            rx_sets.append(tuple(int(x) for x in rxc[i]))
            caps.append(float(table[i, j]))
    else:
        best_rx = [np.argmax(table, axis=0) for table, _, _ in tables]  # per tx combo
        best_cap = np.stack([table.max(axis=0) for table, _, _ in tables])  # (R, n_tx_combos)
        j = int(np.argmax(best_cap.min(axis=0)))
        tx = tuple(int(t) for t in txc[j])
        tx_sets = [tx] * dims.num_receivers
        rx_sets = [tuple(int(x) for x in tables[r][1][best_rx[r][j]]) for r in range(dims.num_receivers)]
        caps = [float(best_cap[r, j]) for r in range(dims.num_receivers)]

    rate = multicast_rate(caps, mode)
    return MulticastSelection(
        mode,
        "exhaustive",
        tuple(tx_sets),
        tuple(rx_sets),
        tuple(caps),
        rate,
        count,
        (rate.min,) if mode == SYNCHRONOUS else tuple((c,) for c in caps),
    )
