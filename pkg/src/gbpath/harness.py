"""Monte-Carlo experiment runner: corpus of map sizes, trials per cell, CSV output."""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from gbpath.errors import ConfigError, InternalNontermination, UnusableMap
from gbpath.graph import edge_key, generate_map
from gbpath.publish import SEARCH_MODES, publish_full
from gbpath.recover import reconstruct_path, score_good_output

CSV_VERSION = 1
COLUMNS = (
    "vertices",
    "edges",
    "eps_v",
    "eps_e",
    "mode",
    "trials",
    "usable_fraction",
    "good_output_fraction",
    "overall_good_fraction",
    "exact_edges_fraction",
    "capped_fraction",
    "mean_splits",
    "mean_transitions",
    "mean_runtime",
    "median_runtime",
)


@dataclass(frozen=True)
class ExperimentConfig:
    vertices: tuple[int, int] = (3, 10)
    edges: str | tuple[int, ...] = "full"  # "full" or explicit edge counts
    trials: int = 1000
    eps_v: tuple[float, ...] = (0.5, 1.0)
    eps_e: tuple[float, ...] = (0.5, 1.0)
    dp_vertices: bool = True
    dp_edges: bool = True
    split: bool = True
    seed: int = 0
    cyclic: int = 0
    timing: bool = False
    workers: int = 1
    search: str = "pruned"

    def __post_init__(self) -> None:
        lo, hi = self.vertices
        if not 2 <= lo <= hi:
            raise ConfigError(f"vertex range must satisfy 2 <= lo <= hi, got {self.vertices}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.dp_vertices and not self.eps_v:
            raise ConfigError("eps_v grid is empty")
        if self.dp_edges and not self.eps_e:
            raise ConfigError("eps_e grid is empty")
        for eps in (*self.eps_v, *self.eps_e):
            if not (eps > 0 and math.isfinite(eps)):
                raise ConfigError(f"privacy budgets must be positive and finite, got {eps}")
        if self.edges != "full" and (isinstance(self.edges, str) or not self.edges):
            raise ConfigError("edges must be 'full' or a nonempty list of counts")
        if self.search not in SEARCH_MODES:
            raise ConfigError(f"search must be one of {SEARCH_MODES}")
        if self.cyclic < 0 or self.workers < 1:
            raise ConfigError("cyclic must be >= 0 and workers >= 1")

    @property
    def mode(self) -> str:
        parts = [p for p, on in (("dpv", self.dp_vertices), ("dpe", self.dp_edges), ("split", self.split)) if on]
        return "+".join(parts) or "plain"

    def sizes(self) -> list[tuple[int, int]]:
        out = []
        for n in range(self.vertices[0], self.vertices[1] + 1):
            legal = range(n - 1, n * (n - 1) // 2 + 1)
            counts = legal if self.edges == "full" else [m for m in self.edges if m in legal]
            out += [(n, m) for m in counts]
        return out

    def cells(self) -> list[Cell]:
        grid_v = list(enumerate(self.eps_v)) if self.dp_vertices else [(0, None)]
        grid_e = list(enumerate(self.eps_e)) if self.dp_edges else [(0, None)]
        return [
            Cell(n, m, ev, ee, iv, ie)
            for n, m in self.sizes()
            for iv, ev in grid_v
            for ie, ee in grid_e
        ]


@dataclass(frozen=True)
class Cell:
    vertices: int
    edges: int
    eps_v: float | None
    eps_e: float | None
    i_v: int = 0
    i_e: int = 0


@dataclass(frozen=True, order=True)
class ResultRow:
    vertices: int
    edges: int
    eps_v: float | None
    eps_e: float | None
    mode: str
    trials: int
    usable_fraction: float
    good_output_fraction: float
    overall_good_fraction: float
    exact_edges_fraction: float  # usable trials whose recovered path edges equal the truth
    capped_fraction: float  # trials stopped by the transition cap
    mean_splits: float
    mean_transitions: float
    mean_runtime: float | None = None
    median_runtime: float | None = None
    runtimes: tuple[float, ...] = field(default=(), compare=False, repr=False)


_KEYS = {
    "vertices",
    "edges",
    "trials",
    "eps_v",
    "eps_e",
    "dp_vertices",
    "dp_edges",
    "split",
    "seed",
    "cyclic",
    "timing",
    "workers",
    "search",
}


def _flag(tok: str) -> bool:
    low = tok.lower()
    if low in ("yes", "true", "on", "1"):
        return True
    if low in ("no", "false", "off", "0"):
        return False
    raise ValueError(f"expected yes/no, got {tok!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key value ...`` lines; ``#`` starts a comment."""
    kw: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *vals = line.split()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in kw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key == "vertices":
                lo, hi = (int(v) for v in vals)
                kw[key] = (lo, hi)
            elif key == "edges":
                kw[key] = "full" if vals == ["full"] else tuple(int(v) for v in vals)
            elif key in ("eps_v", "eps_e"):
                kw[key] = tuple(float(v) for v in vals)
            elif key == "search":
                (kw[key],) = vals
            elif key in ("dp_vertices", "dp_edges", "split", "timing"):
                (v,) = vals
                kw[key] = _flag(v)
            else:
                (v,) = vals
                kw[key] = int(v)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return ExperimentConfig(**kw)


def _seeds(cfg: ExperimentConfig, cell: Cell) -> tuple[list[np.random.SeedSequence], list[np.random.SeedSequence]]:
    # common random numbers: every budget setting of a size sees the same maps and
    # the same uniform draws, so matched cells differ only through the budgets
    maps = np.random.SeedSequence(cfg.seed, spawn_key=(cell.vertices, cell.edges, 0)).spawn(cfg.trials)
    runs = np.random.SeedSequence(cfg.seed, spawn_key=(cell.vertices, cell.edges, 1)).spawn(cfg.trials)
    return maps, runs


def run_cell(cfg: ExperimentConfig, cell: Cell) -> ResultRow:
    map_seeds, run_seeds = _seeds(cfg, cell)
    usable, capped, scores, exact, splits, transitions, runtimes = 0, 0, [], 0, 0, 0, []
    for ms, rs in zip(map_seeds, run_seeds):
        net, path = generate_map(cell.vertices, cell.edges, np.random.default_rng(ms), cyclic=cfg.cyclic)
        truth = {edge_key(a, b) for a, b in zip(path, path[1:])}
        rng = np.random.default_rng(rs)
        start = time.perf_counter()
        try:
            pub = publish_full(net, path, cell.eps_v, cell.eps_e, rng, allow_split=cfg.split, search=cfg.search)
        except (UnusableMap, InternalNontermination) as exc:
            # a capped trial counts as unusable and keeps its truncated runtime
            capped += isinstance(exc, InternalNontermination)
            runtimes.append(time.perf_counter() - start)
            continue
        runtimes.append(time.perf_counter() - start)
        usable += 1
        splits += pub.splits
        transitions += pub.transitions
        rec = reconstruct_path(pub.graph, net)
        exact += rec.edge_set == truth
        scores.append(score_good_output(rec, path))
    u = usable / cfg.trials
    good = float(np.mean(scores)) if scores else 0.0
    return ResultRow(
        vertices=cell.vertices,
        edges=cell.edges,
        eps_v=cell.eps_v,
        eps_e=cell.eps_e,
        mode=cfg.mode,
        trials=cfg.trials,
        usable_fraction=u,
        good_output_fraction=good,
        overall_good_fraction=u * good,
        exact_edges_fraction=exact / usable if usable else 1.0,
        capped_fraction=capped / cfg.trials,
        mean_splits=splits / usable if usable else 0.0,
        mean_transitions=transitions / usable if usable else 0.0,
        mean_runtime=statistics.fmean(runtimes) if cfg.timing else None,
        median_runtime=statistics.median(runtimes) if cfg.timing else None,
        runtimes=tuple(runtimes) if cfg.timing else (),
    )


def _run_cell_args(args: tuple[ExperimentConfig, Cell]) -> ResultRow:
    return run_cell(*args)


def run_rows(cfg: ExperimentConfig) -> list[ResultRow]:
    cells = cfg.cells()
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_run_cell_args, [(cfg, c) for c in cells], chunksize=4))
    else:
        rows = [run_cell(cfg, c) for c in cells]
    return sorted(rows, key=lambda r: (r.vertices, r.edges, r.eps_v or 0.0, r.eps_e or 0.0))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def rows_to_csv(rows: list[ResultRow], cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    sizes = len(cfg.sizes())
    buf.write(f"# gbpath results v{CSV_VERSION} sizes={sizes} cells={len(rows)} mode={cfg.mode} seed={cfg.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig) -> str:
    """Run every cell and return the CSV text."""
    return rows_to_csv(run_rows(cfg), cfg)


def default_config(**overrides) -> ExperimentConfig:
    """Full corpus grid with both privacy steps and splitting, 1000 trials per cell."""
    return replace(ExperimentConfig(), **overrides)
