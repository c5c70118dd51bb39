"""Random-graph path auctions: AP versus reserve-cost VCG over a reserve sweep.

Each trial draws a graph (uniform random pairs over points in the unit
square, or a Watts-Strogatz small world), uses Euclidean edge lengths as
costs with one agent per edge, picks s and t at random and runs both
mechanisms truthfully at every reserve cost of the grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .mechanisms import PathAuction
from .setsystem import OwnedSetSystem, StGraph

MECHS = ("ap", "rvcg")
CSV_HEADER = ("trial", "r", "mechanism", "purchased", "payment", "surplus", "winner_hops")


class ConfigError(ValueError):
    pass


class BadParams(ConfigError):
    pass


class ReportError(OSError):
    pass


def default_reserve_grid(r_max: float = 3.5, step: float = 0.05) -> Tuple[float, ...]:
    n = int(round(r_max / step))
    return tuple(round(i * step, 10) for i in range(n + 1))


@dataclass(frozen=True)
class ExperimentConfig:
    nodes: int = 40
    edges: int = 200
    trials: int = 100
    reserve_grid: Tuple[float, ...] = field(default_factory=default_reserve_grid)
    graph_kind: str = "uniform"  # or "smallworld"
    k: int = 4  # small-world lattice degree
    rewire_prob: float = 0.1
    seed: int = 0
    directed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "reserve_grid", tuple(float(r) for r in self.reserve_grid))
        if self.nodes < 2:
            raise ConfigError("nodes must be >= 2")
        if self.edges < 1:
            raise ConfigError("edges must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        grid = self.reserve_grid
        if not grid:
            raise ConfigError("reserve grid is empty")
        if any(b < a for a, b in zip(grid, grid[1:])) or grid[0] < 0:
            raise ConfigError("reserve grid must be non-negative and ascending")
        if self.graph_kind not in ("uniform", "smallworld"):
            raise ConfigError(f"unknown graph kind {self.graph_kind!r}")
        max_pairs = self.nodes * (self.nodes - 1) // (1 if self.directed else 2)
        if self.graph_kind == "uniform" and self.edges > max_pairs:
            raise ConfigError(f"at most {max_pairs} distinct node pairs exist")

    def rng(self, trial_id: int) -> np.random.Generator:
        """Independent stream per trial, so trials can run in any order."""
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(trial_id,)))


@dataclass(frozen=True)
class Row:
    r: float
    mechanism: str
    purchased: bool
    payment: float
    surplus: float
    winner_hops: int


@dataclass
class TrialRecord:
    trial_id: int
    s: int
    t: int
    rows: List[Row]


def _as_system(n: int, pairs: Sequence[Tuple[int, int]], pos: np.ndarray, s: int, t: int,
               directed: bool):
    edges = tuple((i, u, v) for i, (u, v) in enumerate(pairs))
    g = StGraph(n, edges, s, t, directed)
    elements = tuple(range(len(edges)))
    sys = OwnedSetSystem(elements, g, {e: e for e in elements})
    costs = {i: float(np.hypot(*(pos[u] - pos[v]))) for i, (u, v) in enumerate(pairs)}
    return sys, costs


def gen_uniform_graph(config: ExperimentConfig, trial_id: int):
    """Nodes uniform in the unit square, ``edges`` distinct random node pairs.

    Returns ``(system, costs, s, t)``.
    """
    rng = config.rng(trial_id)
    n = config.nodes
    pos = rng.random((n, 2))
    seen, pairs = set(), []
    while len(pairs) < config.edges:
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u == v:
            continue
        key = (u, v) if config.directed else (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        pairs.append((u, v))
    s, t = (int(x) for x in rng.choice(n, size=2, replace=False))
    sys, costs = _as_system(n, pairs, pos, s, t, config.directed)
    return sys, costs, s, t


def ring_lattice(n: int, k: int) -> List[Tuple[int, int]]:
    return [(u, (u + j) % n) for j in range(1, k // 2 + 1) for u in range(n)]


def gen_small_world(config: ExperimentConfig, trial_id: int):
    """Watts-Strogatz graph: ring lattice of degree ``k``, each edge's far end
    rewired once with probability ``rewire_prob`` (no loops or duplicates)."""
    n, k, p = config.nodes, config.k, config.rewire_prob
    if k % 2 or not 2 <= k < n:
        raise BadParams("k must be even with 2 <= k < nodes")
    if not 0.0 <= p <= 1.0:
        raise BadParams("rewire probability must lie in [0, 1]")
    rng = config.rng(trial_id)
    pos = rng.random((n, 2))
    pairs = ring_lattice(n, k)
    adj = {u: set() for u in range(n)}
    for u, v in pairs:
        adj[u].add(v)
        adj[v].add(u)
    for i, (u, v) in enumerate(pairs):
        if rng.random() >= p:
            continue
        choices = [w for w in range(n) if w != u and w not in adj[u]]
        if not choices:
            continue
        w = int(choices[int(rng.integers(len(choices)))])
        adj[u].discard(v)
        adj[v].discard(u)
        adj[u].add(w)
        adj[w].add(u)
        pairs[i] = (u, w)
    s, t = (int(x) for x in rng.choice(n, size=2, replace=False))
    sys, costs = _as_system(n, pairs, pos, s, t, config.directed)
    return sys, costs, s, t


def generate(config: ExperimentConfig, trial_id: int):
    if config.graph_kind == "smallworld":
        return gen_small_world(config, trial_id)
    return gen_uniform_graph(config, trial_id)


def run_trial(config: ExperimentConfig, trial_id: int) -> TrialRecord:
    sys, costs, s, t = generate(config, trial_id)
    pa = PathAuction(sys.feasible, costs)
    rows = []
    for r in config.reserve_grid:
        for out in (pa.ap(r), pa.rvcg(r)):
            if out.winner is None:
                rows.append(Row(r, out.mechanism, False, 0.0, 0.0, 0))
            else:
                cost = sum(costs[e] for e in out.winner)
                rows.append(Row(r, out.mechanism, True, out.total_payment(), r - cost, len(out.winner)))
    return TrialRecord(trial_id, s, t, rows)


@dataclass
class AggregateReport:
    reserve_grid: Tuple[float, ...]
    mean_surplus: Dict[str, List[float]]
    mean_payment: Dict[str, List[float]]
    surplus_ratio: List[Optional[float]]
    surplus_ratio_mean: Optional[float]
    payment_crossing_r: Optional[float]
    mean_winner_hops: Dict[str, Optional[float]]

    def to_json(self) -> dict:
        key = _fmt
        return {
            "mean_surplus": {m: {key(r): v for r, v in zip(self.reserve_grid, vals)}
                             for m, vals in self.mean_surplus.items()},
            "mean_payment": {m: {key(r): v for r, v in zip(self.reserve_grid, vals)}
                             for m, vals in self.mean_payment.items()},
            "surplus_ratio": {key(r): v for r, v in zip(self.reserve_grid, self.surplus_ratio)},
            "surplus_ratio_mean": self.surplus_ratio_mean,
            "payment_crossing_r": self.payment_crossing_r,
            "mean_winner_hops": self.mean_winner_hops,
        }


def crossing_point(grid: Sequence[float], a: Sequence[float], b: Sequence[float]) -> Optional[float]:
    """First r where curve ``a`` exceeds ``b``, linearly interpolated."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    above = np.flatnonzero(d > 1e-12)
    if not len(above):
        return None
    i = int(above[0])
    if i == 0:
        return float(grid[0])
    d0, d1 = d[i - 1], d[i]
    return float(grid[i - 1] + (grid[i] - grid[i - 1]) * (-d0) / (d1 - d0))


def aggregate(records: Sequence[TrialRecord], grid: Sequence[float]) -> AggregateReport:
    grid = tuple(grid)
    nr = len(grid)
    surplus = {m: np.zeros((len(records), nr)) for m in MECHS}
    payment = {m: np.zeros((len(records), nr)) for m in MECHS}
    hops = {m: [] for m in MECHS}
    col = {r: i for i, r in enumerate(grid)}
    for ti, rec in enumerate(records):
        for row in rec.rows:
            j = col[row.r]
            surplus[row.mechanism][ti, j] = row.surplus
            payment[row.mechanism][ti, j] = row.payment
            if row.purchased:
                hops[row.mechanism].append(row.winner_hops)
    ratio: List[Optional[float]] = []
    for j in range(nr):
        keep = surplus["rvcg"][:, j] > 0
        if keep.any():
            ratio.append(float(surplus["ap"][keep, j].mean() / surplus["rvcg"][keep, j].mean()))
        else:
            ratio.append(None)
    defined = [v for v in ratio if v is not None]
    mean_pay = {m: [float(v) for v in payment[m].mean(axis=0)] for m in MECHS}
    return AggregateReport(
        grid,
        {m: [float(v) for v in surplus[m].mean(axis=0)] for m in MECHS},
        mean_pay,
        ratio,
        float(np.mean(defined)) if defined else None,
        crossing_point(grid, mean_pay["ap"], mean_pay["rvcg"]),
        {m: (float(np.mean(h)) if h else None) for m, h in hops.items()},
    )


def run_sweep(config: ExperimentConfig, jobs: int = 1):
    """Run every trial; returns ``(records in trial order, AggregateReport)``."""
    ids = range(config.trials)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_trial, [config] * config.trials, ids))
    else:
        records = [run_trial(config, i) for i in ids]
    return records, aggregate(records, config.reserve_grid)


# ---------------------------------------------------------------------------
# reports


def _fmt(x) -> str:
    return format(float(x), ".12g")


def results_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        for row in rec.rows:
            w.writerow((rec.trial_id, _fmt(row.r), row.mechanism, int(row.purchased),
                        _fmt(row.payment), _fmt(row.surplus), row.winner_hops))
    return buf.getvalue()


def atomic_write(path: str, data, mode: str = "w") -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _line_chart(grid, series: Dict[str, Sequence[float]], ylabel: str, title: str) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "teamauction", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, ys in series.items():
            ax.plot(grid, [np.nan if y is None else y for y in ys], label=name.upper())
        ax.set_xlabel("reserve cost r")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def emit_report(records: Sequence[TrialRecord], out_dir: str,
                report: Optional[AggregateReport] = None,
                grid: Optional[Sequence[float]] = None) -> List[str]:
    """Write results.csv, aggregate.json, surplus.svg and payments.svg."""
    if not records:
        raise ConfigError("no records to report")
    if report is None:
        if grid is None:
            grid = sorted({row.r for row in records[0].rows})
        report = aggregate(records, grid)
    try:
        os.makedirs(out_dir, exist_ok=True)
        files = {
            "results.csv": results_csv(records),
            "aggregate.json": json.dumps(report.to_json(), indent=2) + "\n",
            "surplus.svg": _line_chart(report.reserve_grid, report.mean_surplus,
                                       "mean social surplus", "Social surplus"),
            "payments.svg": _line_chart(report.reserve_grid, report.mean_payment,
                                        "mean total payment", "Payments"),
        }
        paths = []
        for name, data in files.items():
            path = os.path.join(out_dir, name)
            atomic_write(path, data)
            paths.append(path)
    except OSError as exc:
        raise ReportError(str(exc)) from exc
    return paths
