"""Config-driven capacity and SER experiments with CSV output.

Every random draw is keyed by ``(master_seed, hash(scenario name), snr
index, trial)``, so results do not change when scenarios are added, removed
or run in a different order, nor with the number of worker processes.

Config files are YAML; see ``docs/config.md`` for the schema.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .capacity import ASYNCHRONOUS, MODES, SelectionSpec, SnrParams
from .channel import SystemDims, generate_multicast
from .errors import ConfigError, DomainError, EnumerationCapError
from .genetic import (
    DEFAULT_ENUMERATION_CAP,
    PRESETS,
    GaConfig,
    evolve_multicast,
    exhaustive_evaluations,
    exhaustive_search,
)
from .seeding import BIT_GENERATOR, substream, stable_hash
from .ser import LinkSimConfig, QamConstellation, SerParams, analytic_ser_curve, binomial_halfwidth, simulate_link

__all__ = [
    "SCHEMA_VERSION",
    "Scenario",
    "CapacityRow",
    "SerRow",
    "ScenarioReport",
    "RunReport",
    "load_config",
    "parse_config",
    "run_capacity_experiment",
    "run_ser_experiment",
    "run",
    "emit_csv",
    "CAPACITY_HEADER",
    "SER_HEADER",
]

SCHEMA_VERSION = 1
METHODS = ("ga", "exhaustive", "both")
EXPERIMENTS = ("capacity", "ser")

CAPACITY_HEADER = ("scenario", "mode", "method", "snr_db", "trial", "receiver", "capacity_bps_hz")
SER_HEADER = ("scenario", "method", "snr_db", "symbols", "errors", "ser", "ci_halfwidth")

# num_tx, num_rx, num_receivers, num_tx_selected, num_rx_selected
SCENARIO_PRESETS = {
    "paper-4T4R-2T2R": (4, 4, 4, 2, 2),
    "paper-8T8R-3T3R": (8, 8, 4, 3, 3),
}


@dataclass(frozen=True)
class Scenario:
    name: str
    dims: SystemDims
    spec: SelectionSpec
    ga: GaConfig
    snr_grid_db: tuple
    trials: int = 1
    mode: str = ASYNCHRONOUS
    method: str = "ga"
    master_seed: int = 0
    experiments: tuple = ("capacity",)
    link: LinkSimConfig = field(default_factory=LinkSimConfig)
    qam_order: int = 16
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "experiments", tuple(self.experiments))
        if not self.name:
            raise DomainError("scenario name must be non-empty")
        if not self.snr_grid_db:
            raise DomainError(f"{self.name}: snr_grid_db is empty")
        if self.trials < 1:
            raise DomainError(f"{self.name}: trials must be >= 1")
        if self.mode not in MODES:
            raise DomainError(f"{self.name}: mode must be one of {MODES}")
        if self.method not in METHODS:
            raise DomainError(f"{self.name}: method must be one of {METHODS}")
        bad = set(self.experiments) - set(EXPERIMENTS)
        if bad or not self.experiments:
            raise DomainError(f"{self.name}: experiments must be a non-empty subset of {EXPERIMENTS}")
        self.spec.validate(self.dims)

    @property
    def methods(self) -> tuple:
        return ("ga", "exhaustive") if self.method == "both" else (self.method,)

    def trial_seed(self, snr_index: int, trial: int):
        return substream(self.master_seed, stable_hash(self.name), snr_index, trial)

    def echo(self) -> dict:
        """JSON-friendly description of the scenario."""
        ga = asdict(self.ga)
        ga.pop("seed")
        link = asdict(self.link)
        link.pop("seed")
        return {
            "name": self.name,
            "num_tx": self.dims.num_tx,
            "num_rx": list(self.dims.num_rx_per_receiver),
            "num_tx_selected": self.spec.num_tx_selected,
            "num_rx_selected": list(self.spec.num_rx_selected_per_receiver),
            "ga": ga,
            "snr_grid_db": list(self.snr_grid_db),
            "trials": self.trials,
            "mode": self.mode,
            "method": self.method,
            "master_seed": self.master_seed,
            "experiments": list(self.experiments),
            "link": link,
            "qam_order": self.qam_order,
            "enumeration_cap": self.enumeration_cap,
        }


# -- config loading ---------------------------------------------------------


class _Mapping(dict):
    """dict remembering the source line of itself and of each key."""

    line = 0
    key_lines: dict


class _LineLoader(yaml.SafeLoader):
    def construct_mapping(self, node, deep=False):
        mapping = _Mapping(super().construct_mapping(node, deep=True))
        mapping.line = node.start_mark.line + 1
        mapping.key_lines = {k.value: k.start_mark.line + 1 for k, _ in node.value}
        return mapping


_LineLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, lambda loader, node: loader.construct_mapping(node)
)


_TOP_KEYS = {"schema_version", "master_seed", "scenarios"}
_SCENARIO_KEYS = {
    "name",
    "preset",
    "num_tx",
    "num_rx",
    "num_receivers",
    "num_tx_selected",
    "num_rx_selected",
    "ga",
    "snr_grid_db",
    "trials",
    "mode",
    "method",
    "seed",
    "experiments",
    "link",
    "qam_order",
    "enumeration_cap",
}
_GA_KEYS = {
    "population_size",
    "mating_pool_size",
    "generations",
    "mutation_prob",
    "crossover_prob",
    "priority_std",
    "mutation_std",
    "elite_count",
}
_LINK_KEYS = {"symbols_per_block", "num_blocks", "combining"}


def _where(source, m, key=None):
    line = getattr(m, "key_lines", {}).get(key, getattr(m, "line", 0)) if key is not None else getattr(m, "line", 0)
    return f"{source}:{line}"


def _check_keys(m, allowed, source, what):
    if not isinstance(m, dict):
        raise ConfigError(f"{source}: {what} must be a mapping")
    for k in m:
        if k not in allowed:
            raise ConfigError(f"{_where(source, m, k)}: unknown key {k!r} in {what}")


def _per_receiver(value, count, source, m, key):
    if isinstance(value, int) and not isinstance(value, bool):
        return (value,) * count
    if isinstance(value, list) and all(isinstance(v, int) for v in value):
        if len(value) != count:
            raise ConfigError(f"{_where(source, m, key)}: {key} lists {len(value)} receivers, expected {count}")
        return tuple(value)
    raise ConfigError(f"{_where(source, m, key)}: {key} must be an integer or a list of integers")


def _build_scenario(m, master_seed, source, override=False) -> Scenario:
    _check_keys(m, _SCENARIO_KEYS, source, "scenario")
    if "name" not in m:
        raise ConfigError(f"{_where(source, m)}: scenario is missing 'name'")
    name = str(m["name"])
    base = {}
    ga = GaConfig()
    if "preset" in m:
        preset = m["preset"]
        if preset not in SCENARIO_PRESETS:
            raise ConfigError(
                f"{_where(source, m, 'preset')}: unknown preset {preset!r}; known: {sorted(SCENARIO_PRESETS)}"
            )
        M, N, R, ls, lu = SCENARIO_PRESETS[preset]
        base = {"num_tx": M, "num_rx": N, "num_receivers": R, "num_tx_selected": ls, "num_rx_selected": lu}
        ga = PRESETS[preset]
    merged = {**base, **{k: v for k, v in m.items() if k in base or k.startswith("num_")}}
    for key in ("num_tx", "num_rx", "num_tx_selected", "num_rx_selected"):
        if key not in merged:
            raise ConfigError(f"{_where(source, m)}: scenario {name!r} needs {key!r} (or a preset)")
    if "num_receivers" in merged:
        R = merged["num_receivers"]
    elif isinstance(merged["num_rx"], list):
        R = len(merged["num_rx"])
    else:
        R = 1
    try:
        if "ga" in m:
            _check_keys(m["ga"], _GA_KEYS, source, f"scenario {name!r} ga")
            ga = replace(ga, **m["ga"])
            if "mutation_std" not in m["ga"] and "priority_std" in m["ga"]:
                ga = replace(ga, mutation_std=2.0 * ga.priority_std)
        link = LinkSimConfig()
        if "link" in m:
            _check_keys(m["link"], _LINK_KEYS, source, f"scenario {name!r} link")
            link = replace(link, **m["link"])
        dims = SystemDims(merged["num_tx"], _per_receiver(merged["num_rx"], R, source, m, "num_rx"))
        spec = SelectionSpec(
            merged["num_tx_selected"], _per_receiver(merged["num_rx_selected"], R, source, m, "num_rx_selected")
        )
        grid = m.get("snr_grid_db", [0, 5, 10, 15, 20])
        if not isinstance(grid, list):
            raise ConfigError(f"{_where(source, m, 'snr_grid_db')}: snr_grid_db must be a list")
        seed = master_seed if override else m.get("seed", master_seed)
        experiments = m.get("experiments", ["capacity"])
        if isinstance(experiments, str):
            experiments = [experiments]
        return Scenario(
            name=name,
            dims=dims,
            spec=spec,
            ga=ga,
            snr_grid_db=tuple(grid),
            trials=int(m.get("trials", 1)),
            mode=m.get("mode", ASYNCHRONOUS),
            method=m.get("method", "ga"),
            master_seed=int(seed),
            experiments=tuple(experiments),
            link=link,
            qam_order=int(m.get("qam_order", 16)),
            enumeration_cap=int(m.get("enumeration_cap", DEFAULT_ENUMERATION_CAP)),
        )
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"{_where(source, m)}: scenario {name!r}: {exc}") from exc


def parse_config(text: str, source: str = "<config>", seed: Optional[int] = None) -> list:
    """Parse config ``text`` into scenarios.

    ``seed`` replaces ``master_seed`` and any per-scenario ``seed``.
    """
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: cannot parse config: {getattr(exc, 'problem', exc)}") from exc
    if doc is None:
        raise ConfigError(f"{source}: no scenarios (file is empty)")
    _check_keys(doc, _TOP_KEYS, source, "config")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{_where(source, doc, 'schema_version')}: schema_version must be {SCHEMA_VERSION}, got {version!r}")
    master = seed if seed is not None else doc.get("master_seed", 0)
    if not isinstance(master, int) or isinstance(master, bool) or master < 0:
        raise ConfigError(f"{_where(source, doc, 'master_seed')}: master_seed must be a non-negative integer")
    entries = doc.get("scenarios") or []
    if not isinstance(entries, list):
        raise ConfigError(f"{_where(source, doc, 'scenarios')}: scenarios must be a list")
    if not entries:
        raise ConfigError(f"{source}: no scenarios")
    scenarios, seen = [], {}
    for entry in entries:
        s = _build_scenario(entry, master, source, seed is not None)
        if s.name in seen:
            raise ConfigError(f"{_where(source, entry)}: duplicate scenario name {s.name!r} (first at line {seen[s.name]})")
        seen[s.name] = getattr(entry, "line", 0)
        scenarios.append(s)
    return scenarios


def load_config(path, seed: Optional[int] = None) -> list:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    return parse_config(text, str(path), seed)


# -- experiments ------------------------------------------------------------


@dataclass(frozen=True)
class CapacityRow:
    scenario: str
    mode: str
    method: str
    snr_db: float
    trial: int
    receiver: int
    capacity_bps_hz: float


@dataclass(frozen=True)
class SerRow:
    scenario: str
    method: str
    snr_db: float
    symbols: Optional[int]
    errors: Optional[int]
    ser: float
    ci_halfwidth: Optional[float]


@dataclass
class ScenarioReport:
    scenario: Scenario
    capacity_rows: list = field(default_factory=list)
    ser_rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0


@dataclass
class RunReport:
    scenarios: list = field(default_factory=list)
    master_seed: Optional[int] = None
    config_sha256: Optional[str] = None
    wall_clock_s: float = 0.0

    def get(self, name: str) -> ScenarioReport:
        for r in self.scenarios:
            if r.scenario.name == name:
                return r
        raise KeyError(name)


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _select(s: Scenario, channel, snr, method, seed):
    if method == "ga":
        return evolve_multicast(channel, s.spec, snr, replace(s.ga, seed=seed), s.mode)
    return exhaustive_search(channel, s.spec, snr, s.mode, cap=s.enumeration_cap)


def _capacity_trial(task):
    s, i, t = task
    seed = s.trial_seed(i, t)
    channel = generate_multicast(s.dims, None, substream(seed, 0))
    snr = SnrParams.from_db(s.snr_grid_db[i])
    return {m: _select(s, channel, snr, m, substream(seed, 1)) for m in s.methods}


def _check_cap(s: Scenario):
    if "exhaustive" in s.methods:
        need = exhaustive_evaluations(s.dims, s.spec, s.mode)
        if need > s.enumeration_cap:
            raise EnumerationCapError(need, s.enumeration_cap)


def _stderr(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def run_capacity_experiment(s: Scenario, jobs: int = 1) -> ScenarioReport:
    """Channel draws x antenna selection for every SNR point of ``s``.

    Returns per-(snr, trial, receiver) capacity rows and, in ``summary``,
    per-SNR mean capacity, mean min-rate (with standard errors), evaluation
    counts and GA-vs-exhaustive gap statistics when both methods ran.
    """
    _check_cap(s)
    start = time.perf_counter()
    tasks = [(s, i, t) for i in range(len(s.snr_grid_db)) for t in range(s.trials)]
    results = _map(_capacity_trial, tasks, jobs)
    report = ScenarioReport(s)
    per_snr = []
    for i, snr_db in enumerate(s.snr_grid_db):
        block = results[i * s.trials : (i + 1) * s.trials]
        point = {"snr_db": snr_db}
        for m in s.methods:
            sel = [b[m] for b in block]
            for t, out in enumerate(sel):
                for r, c in enumerate(out.per_receiver_capacity):
                    report.capacity_rows.append(CapacityRow(s.name, s.mode, m, snr_db, t, r, c))
            caps = np.array([out.per_receiver_capacity for out in sel])
            mins = caps.min(axis=1)
            point[m] = {
                "mean_capacity": float(caps.mean()),
                "mean_capacity_stderr": _stderr(caps.mean(axis=1)),
                "mean_min_rate": float(mins.mean()),
                "mean_min_rate_stderr": _stderr(mins),
                "per_receiver_mean": caps.mean(axis=0).tolist(),
                "evaluations": int(sum(out.evaluations for out in sel)),
            }
        if s.method == "both":
            ga = np.array([b["ga"].per_receiver_capacity for b in block])
            ex = np.array([b["exhaustive"].per_receiver_capacity for b in block])
            if s.mode == ASYNCHRONOUS:
                ratio = ga / ex
            else:
                ratio = ga.min(axis=1) / ex.min(axis=1)
            point["gap"] = {
                "mean_ratio": float(ratio.mean()),
                "min_ratio": float(ratio.min()),
                "optimal_fraction": float(np.mean(ratio >= 1.0 - 1e-12)),
                "max_excess": float(np.max(ga - ex)),
            }
        per_snr.append(point)
    report.summary = {"capacity": per_snr}
    report.wall_clock_s = time.perf_counter() - start
    return report


def _ser_trial(task):
    s, link, k, i, t = task
    seed = s.trial_seed(i, t)
    channel = generate_multicast(s.dims, None, substream(seed, 0))
    snr_db = s.snr_grid_db[i]
    snr = SnrParams.from_db(min(snr_db, 300.0))
    const = QamConstellation(k)
    out = {}
    for m in s.methods:
        sel = _select(s, channel, snr, m, substream(seed, 1))
        curves = simulate_link(channel, sel, replace(link, seed=substream(seed, 2)), const, [snr_db])
        out[m] = sum(c.errors[0] for c in curves), sum(c.symbols[0] for c in curves)
    return out


def run_ser_experiment(s: Scenario, link: Optional[LinkSimConfig] = None, k: Optional[int] = None, jobs: int = 1) -> ScenarioReport:
    """Monte Carlo SER of the selected sub-channels, plus the analytic curve.

    Each trial draws a channel, selects antennas at that SNR, and pushes
    ``link.symbols`` symbols per receiver through the selection. Errors are
    pooled over trials and receivers. The analytic curve uses
    ``L = min_r L_U_r`` combined branches with mean branch SNR equal to the
    grid value.
    """
    link = link or s.link
    k = k or s.qam_order
    _check_cap(s)
    start = time.perf_counter()
    tasks = [(s, link, k, i, t) for i in range(len(s.snr_grid_db)) for t in range(s.trials)]
    results = _map(_ser_trial, tasks, jobs)
    report = ScenarioReport(s)
    points = []
    for m in s.methods:
        for i, snr_db in enumerate(s.snr_grid_db):
            block = results[i * s.trials : (i + 1) * s.trials]
            errors = sum(b[m][0] for b in block)
            symbols = sum(b[m][1] for b in block)
            report.ser_rows.append(
                SerRow(s.name, m, snr_db, symbols, errors, errors / symbols, binomial_halfwidth(errors, symbols))
            )
            points.append({"method": m, "snr_db": snr_db, "ser": errors / symbols, "symbols": symbols})
    L = min(s.spec.num_rx_selected_per_receiver)
    analytic = analytic_ser_curve(SerParams(L, 1.0, s.snr_grid_db), k)
    for snr_db, p in analytic.points:
        report.ser_rows.append(SerRow(s.name, "analytic", snr_db, None, None, p, None))
    report.summary = {"ser": points, "analytic_branches": L}
    report.wall_clock_s = time.perf_counter() - start
    return report


def run(
    config_path,
    out_dir=None,
    seed: Optional[int] = None,
    scenario: Optional[str] = None,
    jobs: int = 1,
) -> RunReport:
    """Load a config, run every requested experiment, optionally write CSVs."""
    start = time.perf_counter()
    path = Path(config_path)
    scenarios = load_config(path, seed)
    if scenario is not None:
        scenarios = [s for s in scenarios if s.name == scenario]
        if not scenarios:
            raise ConfigError(f"{path}: no scenario named {scenario!r}")
    report = RunReport(
        master_seed=seed,
        config_sha256=hashlib.sha256(path.read_bytes()).hexdigest(),
    )
    for s in scenarios:
        part = ScenarioReport(s)
        if "capacity" in s.experiments:
            cap = run_capacity_experiment(s, jobs)
            part.capacity_rows = cap.capacity_rows
            part.summary.update(cap.summary)
            part.wall_clock_s += cap.wall_clock_s
        if "ser" in s.experiments:
            ser = run_ser_experiment(s, jobs=jobs)
            part.ser_rows = ser.ser_rows
            part.summary.update(ser.summary)
            part.wall_clock_s += ser.wall_clock_s
        report.scenarios.append(part)
    report.wall_clock_s = time.perf_counter() - start
    if out_dir is not None:
        emit_csv(report, out_dir)
    return report


# -- output -----------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _write_rows(path: Path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(getattr(row, col)) for col in header])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_csv(report: RunReport, out_dir) -> list:
    """Write ``<scenario>.capacity.csv`` / ``<scenario>.ser.csv`` per
    requested experiment, plus ``manifest.json``. Returns written paths.

    CSV content depends only on the config and seed; the manifest also
    records wall-clock times.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for part in report.scenarios:
        s = part.scenario
        if "capacity" in s.experiments:
            p = out / f"{_safe(s.name)}.capacity.csv"
            _write_rows(p, CAPACITY_HEADER, part.capacity_rows)
            written.append(p)
        if "ser" in s.experiments:
            p = out / f"{_safe(s.name)}.ser.csv"
            _write_rows(p, SER_HEADER, part.ser_rows)
            written.append(p)
    manifest = {
        "tool": "multicast_antsel",
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "config_sha256": report.config_sha256,
        "seed_override": report.master_seed,
        "bit_generator": BIT_GENERATOR,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "wall_clock_s": report.wall_clock_s,
        "files": [p.name for p in written],
        "scenarios": [
            {
                "config": part.scenario.echo(),
                "summary": part.summary,
                "rows": {"capacity": len(part.capacity_rows), "ser": len(part.ser_rows)},
                "wall_clock_s": part.wall_clock_s,
            }
            for part in report.scenarios
        ],
    }
    mpath = out / "manifest.json"
    try:
        mpath.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {mpath}: {exc}") from exc
    written.append(mpath)
    return written
