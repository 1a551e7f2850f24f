import csv
import io

import pytest

from gbpath.errors import ConfigError
from gbpath.harness import (
    COLUMNS,
    Cell,
    ExperimentConfig,
    default_config,
    parse_config,
    run_cell,
    run_experiment,
    _seeds,
)


def read_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_default_corpus_size():
    cfg = default_config()
    sizes = cfg.sizes()
    assert len(sizes) == sum(n * (n - 1) // 2 - n + 2 for n in range(3, 11)) == 128
    assert len(cfg.cells()) == 4 * 128
    assert cfg.trials == 1000
    assert cfg.mode == "dpv+dpe+split"


def test_parse_config():
    cfg = parse_config(
        """
        # small sweep
        vertices 4 5
        edges 4 6   # counts outside a size's range are skipped
        trials 3
        eps_v 0.5
        eps_e 0.5 1
        split no
        seed 9
        search exhaustive
        """
    )
    assert cfg.vertices == (4, 5)
    assert cfg.sizes() == [(4, 4), (4, 6), (5, 4), (5, 6)]
    assert cfg.eps_e == (0.5, 1.0)
    assert not cfg.split
    assert cfg.mode == "dpv+dpe"
    assert len(cfg.cells()) == 8


@pytest.mark.parametrize(
    "text",
    [
        "colour blue\n",
        "trials 3\ntrials 4\n",
        "trials x\n",
        "vertices 5 3\n",
        "eps_v 0\n",
        "split maybe\n",
        "search random\n",
        "edges\n",
        "workers 0\n",
    ],
)
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_disabled_steps_collapse_the_budget_grid():
    cfg = ExperimentConfig(vertices=(3, 3), trials=2, dp_vertices=False, dp_edges=False, split=False)
    assert [(c.eps_v, c.eps_e) for c in cfg.cells()] == [(None, None)] * 2
    assert cfg.mode == "plain"


def test_run_cell_fields():
    cfg = ExperimentConfig(vertices=(5, 5), trials=20, timing=True)
    row = run_cell(cfg, Cell(5, 7, 0.5, 1.0))
    assert row.usable_fraction == 1.0
    assert row.exact_edges_fraction == 1.0
    assert 0.0 <= row.good_output_fraction <= 1.0
    assert row.overall_good_fraction == pytest.approx(row.usable_fraction * row.good_output_fraction)
    assert len(row.runtimes) == 20
    assert row.mean_runtime > 0


def test_csv_is_deterministic_and_complete():
    cfg = ExperimentConfig(vertices=(3, 4), trials=5, eps_v=(1.0,), eps_e=(0.5, 1.0))
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert a == b
    assert a.startswith("# gbpath results v1 sizes=6 cells=12 ")
    rows = read_csv(a)
    assert tuple(rows[0]) == COLUMNS
    assert len(rows) == 12
    assert all(r["mean_runtime"] == "" for r in rows)


def test_budget_cells_share_their_random_streams():
    cfg = ExperimentConfig(vertices=(6, 6), trials=5)
    a, b = Cell(6, 9, 0.5, 0.5, 0, 0), Cell(6, 9, 1.0, 1.0, 1, 1)
    for sa, sb in zip(_seeds(cfg, a), _seeds(cfg, b)):
        assert [s.entropy for s in sa] == [s.entropy for s in sb]
        assert [s.spawn_key for s in sa] == [s.spawn_key for s in sb]
    maps, runs = _seeds(cfg, a)
    assert {s.spawn_key for s in maps}.isdisjoint(s.spawn_key for s in runs)
    assert _seeds(cfg, Cell(6, 10, 0.5, 0.5))[0][0].spawn_key != maps[0].spawn_key


def test_parallel_workers_match_serial():
    cfg = ExperimentConfig(vertices=(4, 5), trials=4, eps_v=(1.0,), eps_e=(1.0,))
    par = ExperimentConfig(vertices=(4, 5), trials=4, eps_v=(1.0,), eps_e=(1.0,), workers=2)
    assert run_experiment(cfg) == run_experiment(par)
