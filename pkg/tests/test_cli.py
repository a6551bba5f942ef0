import filecmp
import os

import numpy as np
import pytest

from kernelhm.cli import main
from kernelhm.selection import load_classification


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory):
    d = str(tmp_path_factory.mktemp("cli") / "data")
    assert main(["toy-generate", "--out", d, "--n", "16", "--auto-label"]) == 0
    return d


WAVE_FLAGS = ["--budget", "60", "--q", "2", "--mc", "300",
              "--nugget", "1e-6", "--seed", "1"]


@pytest.fixture(scope="module")
def wave_store(toy_dir, tmp_path_factory):
    root = str(tmp_path_factory.mktemp("stores"))
    store = os.path.join(root, "wave1")
    assert main(["wave-run", "--dir", toy_dir, "--store", store]
                + WAVE_FLAGS) == 0
    return root, store


def test_toy_generate_writes_the_fixture(toy_dir):
    for name in ("design.csv", "design.csv.bounds", "outputs.csv",
                 "outputs.csv.grid", "observation.csv", "observation.csv.cov",
                 "classification.csv"):
        assert os.path.exists(os.path.join(toy_dir, name)), name
    cls_ = load_classification(os.path.join(toy_dir, "classification.csv"),
                               n=16)
    assert cls_.acceptable_indices.size > 0
    assert cls_.unacceptable_indices.size > 0


def test_fit_emulate_match_pipeline(toy_dir, capsys):
    assert main(["fit-kernel", "--dir", toy_dir, "--budget", "60"]) == 0
    out = capsys.readouterr().out
    assert "selection score" in out and "T**" in out
    assert os.path.exists(os.path.join(toy_dir, "kernel.txt"))
    assert os.path.exists(os.path.join(toy_dir, "i0.csv"))

    assert main(["emulate", "--dir", toy_dir, "--q", "2",
                 "--nugget", "1e-6"]) == 0
    for name in ("basis.txt", "coefficients.csv", "emulators.txt"):
        assert os.path.exists(os.path.join(toy_dir, name)), name

    assert main(["history-match", "--dir", toy_dir, "--sample", "50"]) == 0
    out = capsys.readouterr().out
    assert "bound a" in out and "T2" in out
    table = os.path.join(toy_dir, "candidates.csv")
    lines = open(table).read().strip().splitlines()
    assert lines[0] == "x1,x2,x3,imp_f1,threshold,imp_f2,nroy"
    assert len(lines) == 51

    # explicit candidate files must match the design dimension
    bad = os.path.join(toy_dir, "bad_candidates.csv")
    with open(bad, "w") as fh:
        fh.write("0.0,0.0\n0.1,0.2\n")
    assert main(["history-match", "--dir", toy_dir,
                 "--candidates", bad]) == 2
    assert "column" in capsys.readouterr().err


def test_ingest_round_trip(toy_dir, tmp_path, capsys):
    out_dir = str(tmp_path / "ingested")
    assert main(["ingest",
                 "--design", os.path.join(toy_dir, "design.csv"),
                 "--bounds", os.path.join(toy_dir, "design.csv.bounds"),
                 "--outputs", os.path.join(toy_dir, "outputs.csv"),
                 "--observation", os.path.join(toy_dir, "observation.csv"),
                 "--obs-cov", os.path.join(toy_dir, "observation.csv.cov"),
                 "--out", out_dir]) == 0
    for name in ("design.csv", "outputs.csv", "observation.csv"):
        src = open(os.path.join(toy_dir, name)).read()
        dst = open(os.path.join(out_dir, name)).read()
        assert src == dst, name


def test_wave_run_is_byte_identical(toy_dir, wave_store, tmp_path):
    _, store = wave_store
    twin = str(tmp_path / "wave1b")
    assert main(["wave-run", "--dir", toy_dir, "--store", twin]
                + WAVE_FLAGS) == 0
    names = sorted(os.listdir(store))
    assert names == sorted(os.listdir(twin))
    match, mismatch, errors = filecmp.cmpfiles(store, twin, names,
                                               shallow=False)
    assert mismatch == [] and errors == []


def test_nroy_sample_reads_a_store(wave_store, capsys):
    _, store = wave_store
    assert main(["nroy-sample", store, "--mc", "500"]) == 0
    out = capsys.readouterr().out
    assert "nroy_fraction" in out and "500 samples" in out


def test_next_design_from_a_store(wave_store, tmp_path, capsys):
    _, store = wave_store
    out_path = str(tmp_path / "next.csv")
    assert main(["next-design", store, "--n-new", "4",
                 "--budget", "800", "--out", out_path]) == 0
    assert os.path.exists(out_path)
    assert os.path.exists(out_path + ".bounds")
    pts = np.loadtxt(out_path, delimiter=",", skiprows=1, ndmin=2)
    assert pts.shape == (4, 3)


def test_report_expands_a_store_root(wave_store, capsys):
    root, _ = wave_store
    assert main(["report", root]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "wave  n_runs  score   nroy_fraction  change"
    assert "   1      16  " in out


def test_unknown_subcommand_exits_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_missing_inputs_exit_2(tmp_path, capsys):
    empty = str(tmp_path / "empty")
    os.makedirs(empty)
    assert main(["fit-kernel", "--dir", empty]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "design.csv" in err

    assert main(["nroy-sample", str(tmp_path / "missing")]) == 2


def test_missing_classification_exits_2(toy_dir, tmp_path, capsys):
    clean = str(tmp_path / "nolabels")
    assert main(["toy-generate", "--out", clean, "--n", "8"]) == 0
    capsys.readouterr()
    assert main(["fit-kernel", "--dir", clean]) == 2
    assert "classification" in capsys.readouterr().err
