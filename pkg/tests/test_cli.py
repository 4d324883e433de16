import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from conftest import k4_instance
from sparse_mcts.cli import RESULT_COLUMNS, main
from sparse_mcts.graph import Graph
from sparse_mcts.instances import Instance, load_dataset, load_samples, save_dataset

SVG = "{http://www.w3.org/2000/svg}"


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def k4_file(tmp_path):
    path = tmp_path / "k4.json"
    save_dataset(path, [k4_instance()])
    return path


# -- gen ------------------------------------------------------------------------------------


def test_gen_steiner(tmp_path, capsys):
    out = tmp_path / "d.json"
    assert run("gen", "--n", 20, "--count", 40, "--kind", "steiner", "--out", out) == 0
    insts = load_dataset(out)
    assert len(insts) == 40 and all(len(i.terminals) == 10 for i in insts)
    assert "connectivity retries" in capsys.readouterr().out


def test_gen_spanner_parameters(tmp_path):
    assert run("gen", "--n", 12, "--count", 2, "--kind", "mult", "--alpha", 2, "--out", tmp_path / "m.json") == 0
    assert all(i.alpha == 2 for i in load_dataset(tmp_path / "m.json"))
    assert run("gen", "--n", 12, "--count", 2, "--kind", "add", "--beta-w", 2, "--out", tmp_path / "a.json") == 0
    insts = load_dataset(tmp_path / "a.json")
    assert all(i.beta_w == 2 and i.beta == 2 * i.graph.max_weight for i in insts)


def test_gen_failure_exits_nonzero(tmp_path):
    assert run("gen", "--n", 10, "--count", 1, "--max-retries", 0, "--out", tmp_path / "x.json") != 0


# -- label / train ---------------------------------------------------------------------------


def test_label_examples(tmp_path):
    path_graph = Instance(Graph(3, [(0, 1, 1), (1, 2, 1)]), (0, 1, 2))
    save_dataset(tmp_path / "d.json", [k4_instance(), path_graph])
    assert run("label", tmp_path / "d.json", "--out", tmp_path / "s.json", "--cache", tmp_path / "c.json") == 0
    insts, samples = load_samples(tmp_path / "s.json")
    assert len(insts) == 2
    # K4: one Steiner node, one ordering, one sample; the all-terminal path gives none
    assert [(s.instance, s.current_set, s.target) for s in samples] == [(0, (0, 1, 2), 3)]
    assert len(json.loads((tmp_path / "c.json").read_text())) == 2


def test_label_skips_timeouts(tmp_path, caplog):
    assert run("gen", "--n", 40, "--count", 1, "--kind", "mult", "--out", tmp_path / "d.json") == 0
    assert run("label", tmp_path / "d.json", "--budget", 0, "--out", tmp_path / "s.json") == 0
    insts, samples = load_samples(tmp_path / "s.json")
    assert len(insts) == 1 and samples == []
    assert "skipped" in caplog.text


def test_train_writes_model_and_history(tmp_path):
    assert run("gen", "--n", 10, "--count", 4, "--out", tmp_path / "d.json") == 0
    assert run("label", tmp_path / "d.json", "--out", tmp_path / "s.json") == 0
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 3, "d": 8, "lr": 0.0}))
    assert run("train", tmp_path / "s.json", "--config", cfg, "--out", tmp_path / "m.npz") == 0
    hist = rows(tmp_path / "m_history.csv")
    assert [h["epoch"] for h in hist] == ["1", "2", "3"]
    assert len({h["train_loss"] for h in hist}) == 1


# -- solve ------------------------------------------------------------------------------------


def test_solve_k4(tmp_path, k4_file):
    out = tmp_path / "r.csv"
    assert run("solve", k4_file, "--out", out) == 0
    (row,) = rows(out)
    assert (row["baseline_cost"], row["mcts_cost"], row["exact_cost"]) == ("10", "9", "9")
    assert row["random_mcts_cost"] == ""
    timing = rows(tmp_path / "r_timing.csv")
    assert float(timing[0]["mcts_s"]) >= 0


def test_solve_random_policy_column(tmp_path, k4_file):
    out = tmp_path / "r.csv"
    assert run("solve", k4_file, "--policy", "random", "--out", out) == 0
    (row,) = rows(out)
    assert row["random_mcts_cost"] == "9" and row["mcts_cost"] == ""


def test_solve_empty_dataset(tmp_path):
    save_dataset(tmp_path / "e.json", [])
    assert run("solve", tmp_path / "e.json", "--out", tmp_path / "r.csv") == 0
    assert (tmp_path / "r.csv").read_text() == ",".join(RESULT_COLUMNS) + "\n"


def test_solve_invariants_and_jobs(tmp_path):
    assert run("gen", "--n", 14, "--count", 4, "--seed", 2, "--out", tmp_path / "d.json") == 0
    base = ["solve", tmp_path / "d.json", "--policy", "both", "--d", 16]
    assert run(*base, "--out", tmp_path / "a.csv") == 0
    assert run(*base, "--jobs", 2, "--out", tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    result = rows(tmp_path / "a.csv")
    assert [r["instance"] for r in result] == ["0", "1", "2", "3"]
    for r in result:
        for col in ("mcts_cost", "random_mcts_cost"):
            assert float(r["exact_cost"]) <= float(r[col]) <= float(r["baseline_cost"])


def test_solve_accepts_stp(tmp_path):
    from sparse_mcts.instances import write_stp

    (tmp_path / "f.stp").write_text(write_stp(k4_instance()))
    assert run("solve", tmp_path / "f.stp", "--policy", "random", "--out", tmp_path / "r.csv") == 0
    assert rows(tmp_path / "r.csv")[0]["random_mcts_cost"] == "9"


def test_seed_from_environment(tmp_path, monkeypatch):
    assert run("gen", "--n", 10, "--count", 2, "--seed", 42, "--out", tmp_path / "a.json") == 0
    monkeypatch.setenv("SPARSE_MCTS_SEED", "42")
    assert run("gen", "--n", 10, "--count", 2, "--out", tmp_path / "b.json") == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_config_flags_lose_to_command_line(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 10, "count": 3, "kind": "mult"}))
    assert run("gen", "--config", cfg, "--count", 1, "--out", tmp_path / "d.json") == 0
    (inst,) = load_dataset(tmp_path / "d.json")
    assert inst.n == 10 and inst.alpha == 2


# -- exit codes ---------------------------------------------------------------------------------


def test_exit_codes(tmp_path):
    assert run("solve", tmp_path / "missing.json", "--out", tmp_path / "r.csv") == 1
    (tmp_path / "bad.json").write_text("{oops")
    assert run("solve", tmp_path / "bad.json", "--out", tmp_path / "r.csv") == 1
    (tmp_path / "cfg.json").write_text(json.dumps({"nope": 1}))
    assert run("gen", "--config", tmp_path / "cfg.json", "--out", tmp_path / "x.json") == 2
    assert run("gen", "--count", -1, "--out", tmp_path / "x.json") == 2
    with pytest.raises(SystemExit) as err:
        run("gen", "--bogus")
    assert err.value.code == 2


# -- plot / exact -----------------------------------------------------------------------------------


def write_results(path, data):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for i, (b, m, e) in enumerate(data):
            w.writerow([i, "steiner", 20, 10, b, m, "", e])


def markers(svg_path):
    root = ET.parse(svg_path).getroot()
    return [c for c in root.iter(f"{SVG}circle")]


def test_plot_without_exact(tmp_path, capsys):
    write_results(tmp_path / "r.csv", [(10, 9, ""), (12, 12, "")])
    assert run("plot", tmp_path / "r.csv", "--out", tmp_path / "p") == 0
    assert sorted(p.name for p in (tmp_path / "p").iterdir()) == ["mcts-vs-baseline.svg"]


def test_plot_single_point(tmp_path):
    write_results(tmp_path / "r.csv", [(10, 9, 9)])
    assert run("plot", tmp_path / "r.csv", "--out", tmp_path / "p") == 0
    names = sorted(p.name for p in (tmp_path / "p").iterdir())
    assert names == ["baseline-vs-exact.svg", "mcts-vs-baseline.svg", "mcts-vs-exact.svg"]
    assert len(markers(tmp_path / "p" / "mcts-vs-exact.svg")) == 1
    assert "href" not in (tmp_path / "p" / "mcts-vs-exact.svg").read_text()


def test_plot_identical_columns_on_diagonal(tmp_path):
    write_results(tmp_path / "r.csv", [(v, v, "") for v in (3, 7, 8, 15)])
    assert run("plot", tmp_path / "r.csv", "--out", tmp_path / "p") == 0
    pts = markers(tmp_path / "p" / "mcts-vs-baseline.svg")
    assert len(pts) == 4
    for c in pts:
        # the axes share one range, so y = x maps to cx + cy = width
        assert float(c.get("cx")) + float(c.get("cy")) == pytest.approx(400, abs=0.02)


def test_plot_missing_column(tmp_path):
    (tmp_path / "r.csv").write_text("instance,exact_cost\n0,3\n")
    assert run("plot", tmp_path / "r.csv", "--out", tmp_path / "p") == 2


def test_exact_subcommand(tmp_path, k4_file):
    assert run("exact", k4_file, "--out", tmp_path / "e.csv") == 0
    assert rows(tmp_path / "e.csv")[0]["exact_cost"] == "9"


def test_console_entry_point(tmp_path, k4_file):
    proc = subprocess.run(
        [sys.executable, "-m", "sparse_mcts.cli", "exact", str(k4_file), "--out", str(tmp_path / "e.csv")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
