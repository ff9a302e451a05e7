import numpy as np
import pytest

import gel.energy
import gel.verify as verify
from gel.cli import CSV_HEADER, main, trajectory_csv
from gel.dynamics import ModelSpec, run_trajectory
from gel.energy import WeightSet
from gel.graphs import complete_bipartite

HFD_CFG = """\
graph = complete_bipartite(5,5)
variant = gradient_flow
W = [[-1.0]]
tau = 0.5
steps = 60
init = random_normal(7)
csv = run.csv
svg = run.svg
report = run.txt
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("GEL_SEED", raising=False)
    return tmp_path


def write(path, text):
    path.write_text(text)
    return str(path)


# --- run --------------------------------------------------------------------

def test_run_hfd_contract(workdir):
    cfg = write(workdir / "run.cfg", HFD_CFG)
    assert main(["run", cfg]) == 0

    rows = (workdir / "run.csv").read_text().splitlines()
    assert rows[0] == CSV_HEADER
    assert len(rows) == 62  # header + steps 0..60
    final_rq = float(rows[-1].split(",")[2])
    assert abs(final_rq - 2.0) <= 1e-6

    report = (workdir / "run.txt").read_text()
    assert "regime = HFD" in report

    svg = (workdir / "run.svg").read_text()
    assert svg.startswith("<svg")
    assert 'viewBox="0 0 800 500"' in svg
    assert "polyline" in svg and "lambda_max" in svg


def test_run_is_byte_deterministic(workdir):
    cfg = write(workdir / "run.cfg", HFD_CFG)
    assert main(["run", cfg]) == 0
    first = [(workdir / f"run.{ext}").read_bytes() for ext in ("csv", "svg", "txt")]
    assert main(["run", cfg]) == 0
    second = [(workdir / f"run.{ext}").read_bytes() for ext in ("csv", "svg", "txt")]
    assert first == second


def test_run_gel_seed_override(workdir, monkeypatch):
    cfg = write(workdir / "run.cfg", HFD_CFG)
    main(["run", cfg])
    base = (workdir / "run.csv").read_text()
    monkeypatch.setenv("GEL_SEED", "99")
    assert main(["run", cfg]) == 0
    assert (workdir / "run.csv").read_text() != base
    assert "seed overridden: 99" in (workdir / "run.txt").read_text()


def test_bad_gel_seed_is_config_error(workdir, monkeypatch, capsys):
    cfg = write(workdir / "run.cfg", HFD_CFG)
    monkeypatch.setenv("GEL_SEED", "many")
    assert main(["run", cfg]) == 3
    assert "GEL_SEED" in capsys.readouterr().err


def test_run_bipartite_no_residual_notes_hypothesis(workdir):
    cfg = write(
        workdir / "nr.cfg",
        HFD_CFG.replace("variant = gradient_flow", "variant = no_residual")
        .replace("W = [[-1.0]]", "W = [[1.0]]"),
    )
    assert main(["run", cfg]) == 0
    report = (workdir / "run.txt").read_text()
    assert "terminal prediction unavailable" in report
    assert "bipartite" in report
    assert "regime =" not in report


def test_run_non_bipartite_no_residual_collapses(workdir):
    cfg = write(
        workdir / "c5.cfg",
        "graph = cycle(5)\nvariant = no_residual\nW = [[2.0,0.0],[0.0,-1.0]]\n"
        "tau = 0.5\nsteps = 300\ninit = random_normal(3)\n"
        "csv = c.csv\nsvg = c.svg\nreport = c.txt\n",
    )
    assert main(["run", cfg]) == 0
    rows = (workdir / "c.csv").read_text().splitlines()
    assert float(rows[-1].split(",")[2]) <= 1e-6


# --- exit codes -------------------------------------------------------------

def test_exit_2_on_parse_error(workdir, capsys):
    cfg = write(workdir / "bad.cfg", HFD_CFG.replace("[[-1.0]]", "[[-1.0]"))
    assert main(["run", cfg]) == 2
    assert "'W'" in capsys.readouterr().err


def test_exit_3_on_missing_field(workdir):
    cfg = write(workdir / "bad.cfg", "graph = cycle(4)\n")
    assert main(["run", cfg]) == 3


def test_exit_4_on_overflow(workdir):
    cfg = write(
        workdir / "ov.cfg",
        "graph = cycle(5)\nvariant = gradient_flow\nW = [[-9.0]]\n"
        "Wtilde = [[1.0]]\ntau = 5.0\nsteps = 500\ninit = one_hot(0)\n"
        "csv = o.csv\nsvg = o.svg\nreport = o.txt\n",
    )
    assert main(["run", cfg]) == 4


def test_exit_5_on_missing_config(workdir):
    assert main(["run", "does_not_exist.cfg"]) == 5


def test_exit_5_on_unwritable_output(workdir):
    cfg = write(
        workdir / "run.cfg",
        HFD_CFG.replace("csv = run.csv", "csv = no_such_dir/run.csv"),
    )
    assert main(["run", cfg]) == 5


# --- bipartite preset -------------------------------------------------------

def test_bipartite_demo_passes(workdir):
    assert main(["bipartite", "5", "5"]) == 0
    report = (workdir / "gel_bipartite.txt").read_text()
    assert report.count("[PASS]") == 3
    svg = (workdir / "gel_bipartite.svg").read_text()
    assert svg.count("<polyline") == 2


def test_bipartite_demo_unequal_parts(workdir):
    assert main(["bipartite", "2", "3"]) == 0
    assert (workdir / "gel_bipartite.txt").read_text().count("[PASS]") == 3


def test_bipartite_non_hfd_weight_skips_assertions(workdir):
    assert main(["bipartite", "5", "5", "--w", "1.0"]) == 0
    report = (workdir / "gel_bipartite.txt").read_text()
    assert "skipped" in report
    assert "[PASS]" not in report and "[FAIL]" not in report


def test_bipartite_rejects_tiny_parts(workdir):
    assert main(["bipartite", "1", "5"]) == 3


def test_bipartite_seed_changes_curves(workdir):
    main(["bipartite", "5", "5", "--svg", "a.svg", "--report", "a.txt"])
    main(["bipartite", "5", "5", "--seed", "2", "--svg", "b.svg", "--report", "b.txt"])
    assert (workdir / "a.svg").read_text() != (workdir / "b.svg").read_text()


# --- suite and replay -------------------------------------------------------

def test_suite_prints_one_line_per_check(workdir, monkeypatch, capsys):
    picked = [w for w in verify.default_suite() if w.check == "kronecker_energy"][:2]
    monkeypatch.setattr(verify, "default_suite", lambda: picked)
    assert main(["suite"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert sum(1 for line in out if line.startswith("[PASS]")) == 2
    assert out[-1] == "2 checks: 2 passed, 0 failed"


def test_suite_failure_writes_witness(workdir, monkeypatch, capsys):
    fd_witnesses = [w for w in verify.default_suite() if w.check == "gradient_fd"][:1]
    monkeypatch.setattr(verify, "default_suite", lambda: fd_witnesses)
    true_grad = gel.energy.energy_gradient
    monkeypatch.setattr(
        gel.energy, "energy_gradient", lambda *a, **kw: -true_grad(*a, **kw)
    )
    assert main(["suite"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL]" in out
    witness_files = list(workdir.glob("witness_*.txt"))
    assert len(witness_files) == 1
    monkeypatch.undo()
    # replaying the recorded witness against the honest code passes
    assert main(["replay", str(witness_files[0])]) == 0


def test_replay_missing_file(workdir):
    assert main(["replay", "nope.txt"]) == 5


def test_replay_corrupt_file(workdir):
    bad = write(workdir / "bad.txt", "not a witness\n")
    assert main(["replay", bad]) == 2


# --- csv formatting ---------------------------------------------------------

def test_trajectory_csv_roundtrips_floats():
    rng = np.random.default_rng(5)
    g = complete_bipartite(2, 3)
    spec = ModelSpec("gradient_flow", weights=WeightSet(W=[[-0.8]]), tau=0.25)
    traj = run_trajectory(spec, g, rng.normal(size=(5, 1)), 7)
    rows = trajectory_csv(traj).splitlines()
    assert rows[0] == CSV_HEADER
    for k, row in enumerate(rows[1:]):
        cells = row.split(",")
        assert int(cells[0]) == k
        # 17 significant digits reproduce the doubles exactly; the golden
        # comparison contract only demands 1e-12
        assert abs(float(cells[2]) - traj.rayleigh[k]) <= 1e-12
        assert abs(float(cells[5]) - traj.log_scale[k]) <= 1e-12
