from __future__ import annotations

import csv
import hashlib
import io
import json

import pytest

from mrlpos.cli import (
    ROUND_COLUMNS,
    ScenarioError,
    aggregate_windows,
    cmd_compare,
    cmd_run,
    list_presets,
    load_scenario,
    load_trace_script,
    main,
    rounds_csv,
    scenario_from_mapping,
)
from mrlpos.core import AttackKind
from mrlpos.sim import Elector, NodeGroup, Scenario, run_simulation

DATA_FILES = ("rounds.csv", "snapshots.csv", "windows.csv", "summary.json")


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def digests(out_dir, names=DATA_FILES):
    return {n: hashlib.sha256((out_dir / n).read_bytes()).hexdigest() for n in names}


# scenario files -------------------------------------------------------------

def test_minimal_file_gets_defaults(tmp_path):
    sc = load_scenario(write(tmp_path, "seed: 3\nrounds: 5\nnodes:\n  - count: 4\n"))
    assert sc.seed == 3 and sc.rounds == 5 and sc.node_count == 4
    assert sc.elector is Elector.MRLPOS and sc.learning.alpha == 0.3
    assert sc == Scenario(seed=3, rounds=5, nodes=(NodeGroup(4),), name=sc.name)


def test_bad_value_names_field_and_line(tmp_path):
    text = "seed: 0\nrounds: 5\nnodes:\n  - count: 4\nlearning:\n  alpha: 1.5\n"
    with pytest.raises(ScenarioError) as err:
        load_scenario(write(tmp_path, text))
    msg = str(err.value)
    assert "learning.alpha" in msg and ":6:" in msg


def test_unknown_key(tmp_path):
    with pytest.raises(ScenarioError, match="colour"):
        load_scenario(write(tmp_path, "seed: 0\nrounds: 5\ncolour: red\nnodes:\n  - count: 1\n"))


def test_parse_error(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "seed: [0\n"))


def test_duplicate_key(tmp_path):
    with pytest.raises(ScenarioError, match="duplicate"):
        load_scenario(write(tmp_path, "seed: 0\nseed: 1\nrounds: 5\nnodes:\n  - count: 1\n"))


@pytest.mark.parametrize("text", [
    "seed: 0\nrounds: 2.5\nnodes:\n  - count: 1\n",
    "seed: 0\nrounds: 5\nnodes:\n  - count: 1\n    persistence: 0.5\n",
    "seed: 0\nrounds: 5\nnodes:\n  - count: 1\n    attack: teleport\n",
    "seed: 0\nrounds: 5\nelector: pow\nnodes:\n  - count: 1\n",
    "seed: 0\nrounds: 5\nnodes: []\n",
])
def test_rejected_scenarios(tmp_path, text):
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, text))


def test_presets_listed_and_loadable():
    names = list_presets()
    assert "fig3_double_spend" in names and "fig5_comparison" in names
    sc = load_scenario("fig3_double_spend")
    honest = sum(g.count for g in sc.nodes if g.strategy.attack is None)
    attackers = [g for g in sc.nodes if g.strategy.attack is not None]
    assert (honest, sum(g.count for g in attackers), sc.rounds) == (60, 40, 100)
    assert all(g.strategy.attack is AttackKind.DOUBLE_SPEND for g in attackers)


def test_scenario_dict_round_trip():
    for name in list_presets():
        if name.startswith("fig4"):
            continue
        sc = load_scenario(name)
        assert scenario_from_mapping(json.loads(json.dumps(sc.to_dict()))) == sc


def test_trace_preset():
    script = load_trace_script("fig4_trace")
    assert len(script.steps) == 6 and script.steps[0].elected


# windows ----------------------------------------------------------------------

def test_windows_full_run():
    res = run_simulation(load_scenario("fig3_double_spend"))
    ws = aggregate_windows(res.records)
    assert len(ws) == 10 and ws[-1].malicious == 0
    assert all(w.malicious + w.honest + w.skipped == 10 for w in ws)


@pytest.mark.parametrize("rounds, sizes, partial", [(10, [10], [False]), (25, [10, 10, 5], [False, False, True])])
def test_window_shapes(rounds, sizes, partial):
    res = run_simulation(Scenario(seed=0, rounds=rounds, nodes=(NodeGroup(4),)))
    ws = aggregate_windows(res.records)
    assert [w.rounds for w in ws] == sizes and [w.partial for w in ws] == partial


def test_rounds_csv_round_trip():
    res = run_simulation(load_scenario("fig3_sybil"))
    rows = list(csv.DictReader(io.StringIO(rounds_csv(res.records))))
    assert tuple(rows[0]) == ROUND_COLUMNS and len(rows) == len(res.records)
    for row, rec in zip(rows, res.records):
        assert int(row["round"]) == rec.round
        assert (int(row["elected"]) if row["elected"] else None) == rec.elected
        detected = tuple(
            (int(n), b) for n, b in (x.split(":") for x in row["behaviors_detected"].split(";") if x)
        )
        assert detected == tuple((n, b.key) for n, b in rec.behaviors_detected)
        assert float(row["fee_paid"]) == rec.fee_paid


# commands -------------------------------------------------------------------

def test_same_seed_same_bytes(tmp_path):
    sc = load_scenario("fig3_replay")
    cmd_run(sc, tmp_path / "a")
    cmd_run(sc, tmp_path / "b")
    cmd_run(sc, tmp_path / "c", seed=1)
    assert digests(tmp_path / "a") == digests(tmp_path / "b")
    assert digests(tmp_path / "a")["rounds.csv"] != digests(tmp_path / "c")["rounds.csv"]


def test_manifest_lists_outputs(tmp_path):
    m = cmd_run(Scenario(seed=0, rounds=3, nodes=(NodeGroup(3),)), tmp_path)
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert {f["name"] for f in data["files"]} == set(DATA_FILES) == set(m.files)
    for f in data["files"]:
        assert f["sha256"] == hashlib.sha256((tmp_path / f["name"]).read_bytes()).hexdigest()


def test_compare_without_attackers(tmp_path):
    cmd_compare(Scenario(seed=0, rounds=6, nodes=(NodeGroup(5),)), tmp_path)
    rows = list(csv.reader((tmp_path / "comparison.csv").open()))
    assert rows[0] == ["round", "active_malicious_mrlpos", "active_malicious_pos", "active_malicious_dpos"]
    assert all(r[1:] == ["0", "0", "0"] for r in rows[1:]) and len(rows) == 7


def test_main_run_and_trace(tmp_path, capsys):
    assert main(["trace", "fig4_trace", "--out", str(tmp_path / "t")]) == 0
    header = (tmp_path / "t" / "trace.csv").read_text().splitlines()[0]
    assert header == "round,attack_probability,last_attack_age,restrictions,balance,is_active"
    src = write(tmp_path, "seed: 0\nrounds: 4\nnodes:\n  - count: 3\n")
    assert main(["run", str(src), "--out", str(tmp_path / "r"), "--window", "2"]) == 0
    assert len((tmp_path / "r" / "windows.csv").read_text().splitlines()) == 3
    assert main(["presets"]) == 0
    assert "fig5_comparison" in capsys.readouterr().out


def test_main_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.yaml")]) == 1
    assert capsys.readouterr().err.startswith("mrlpos: error:")
    bad = write(tmp_path, "seed: 0\nrounds: -1\nnodes:\n  - count: 1\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "rounds" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["explode"])
