import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slezip import AtomicMeasure, TraceSample, cli, sample_sle_driving
from slezip.config import EXPERIMENTS, ConfigError, ExperimentConfig, parse, serialize
from slezip.io import (measure_from_csv, measure_to_csv, path_from_csv, path_to_csv, read_csv,
                       read_plot, trace_from_csv, trace_to_csv)

FIXTURES = Path(__file__).parent / "fixtures"


def _files(out):
    return {p.relative_to(out): p.read_bytes() for p in sorted(Path(out).rglob("*"))
            if p.is_file() and p.name != "manifest.json"}


# -- config --------------------------------------------------------------------

@given(st.sampled_from(EXPERIMENTS), st.integers(0, 2 ** 40), st.integers(1, 500))
def test_config_roundtrip(name, seed, reps):
    cfg = ExperimentConfig(name, seed, reps, "somewhere")
    back = parse(serialize(cfg))
    assert back == cfg


def test_config_errors_name_the_line():
    text = "[experiment]\nname = zipper\nseed = 1\n\n[params]\nkappa = 5.0\n"
    with pytest.raises(ConfigError) as exc:
        parse(text, source="bad.ini")
    assert exc.value.line == 6 and "bad.ini:6" in str(exc.value)
    with pytest.raises(ConfigError) as exc:
        parse("[experiment]\nname = gmc\n[params]\nkappa = 1.0\n")
    assert exc.value.line == 4
    with pytest.raises(ConfigError):
        parse("[experiment]\nname = zipper\n[params]\neps_curve = -1\n")


def test_invalid_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nname = zipper\n[params]\nkappa = 4.5\n")
    assert cli.main(["zipper", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "bad.ini:4" in capsys.readouterr().err
    assert cli.main(["gmc", "--config", str(bad)]) == 2


# -- experiments -----------------------------------------------------------------

def test_sle_trace_zero_driving(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["sle-trace", "--out", str(out)]) == 0
    _, cols, data = read_csv(out / "results" / "trace_0000.csv")
    assert cols == ["t", "re", "im"]
    assert data[-1] == pytest.approx([1.0, 0.0, 2.0], abs=1e-6)


SMALL = {
    "sle-trace": ["--kappa", "2.0", "--T", "0.05", "--dt", "1e-3"],
    "gff-probes": ["--n_probes", "4"],
    "gmc": ["--eps_schedule", "0.1,0.05"],
    "minkowski": ["--T", "0.02", "--dt", "1e-4", "--eps_schedule", "0.0625,0.03125"],
    "natural-param": ["--t", "0.05", "--dt", "1e-4", "--field_replicates", "20",
                      "--segments", "2", "--eps", "0.01"],
    "zipper": ["--T", "0.05", "--dt", "1e-4"],
    "markov-check": ["--s", "0.02", "--t", "0.04", "--dt", "1e-4", "--field_replicates", "20",
                     "--segments", "2", "--eps", "0.01"],
}


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_reruns_are_byte_identical(name, tmp_path):
    args = [name, "--seed", "3", "--replicates", "2"] + SMALL[name]
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(args + ["--out", str(a)])
    cli.main(args + ["--out", str(b)])
    fa, fb = _files(a), _files(b)
    assert fa and fa == fb
    man = json.loads((a / "manifest.json").read_text())
    tag = man["manifest_hash"]
    for rel, blob in fa.items():
        assert tag in blob.decode(), rel
    assert sorted(man["files"]) == sorted(str(p) for p in fa)


def test_workers_do_not_change_results(tmp_path):
    args = ["sle-trace", "--seed", "5", "--replicates", "3"] + SMALL["sle-trace"]
    cli.main(args + ["--out", str(tmp_path / "a"), "--workers", "1"])
    cli.main(args + ["--out", str(tmp_path / "b"), "--workers", "2"])
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_mostly_flagged_exits_3(tmp_path, monkeypatch):
    def fake(cfg, seeds, workers):
        return cli.ExperimentResult(flagged=2, total=3)

    monkeypatch.setitem(cli.RUNNERS, "gmc", fake)
    assert cli.main(["gmc", "--replicates", "3", "--out", str(tmp_path)]) == 3
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == 3 and man["excluded"] == 2

    monkeypatch.setitem(cli.RUNNERS, "gmc",
                        lambda c, s, w: cli.ExperimentResult(flagged=1, total=2))
    assert cli.main(["gmc", "--replicates", "2", "--out", str(tmp_path)]) == 0


def test_zipper_report_matches_golden_schema(tmp_path):
    golden = json.loads((FIXTURES / "zipper_schema.json").read_text())
    out = tmp_path / "z"
    cli.main(["zipper", "--seed", "1", "--replicates", "3"] + SMALL["zipper"] + ["--out", str(out)])
    rep = json.loads((out / "results" / "slope_report.json").read_text())
    assert set(rep) == set(golden["slope_report"])
    for key, typ in golden["slope_report"].items():
        assert type(rep[key]).__name__ == typ or rep[key] is None, key
    cols, _ = read_plot(out / "plot" / "clocks.dat")
    assert cols == golden["clocks_columns"]
    _, ccols, _ = read_csv(out / "results" / "clocks.csv")
    assert ccols == golden["clocks_columns"]


# -- io round trips ----------------------------------------------------------------

def test_io_roundtrips(tmp_path):
    p = sample_sle_driving(2.0, 1e-3, 0.1, 2)
    path_to_csv(p, tmp_path / "p.csv")
    q = path_from_csv(tmp_path / "p.csv")
    assert np.array_equal(q.values, p.values) and q.dt == p.dt

    tr = TraceSample(np.linspace(0, 1, 5), np.exp(1j * np.linspace(0.1, 3, 5)))
    trace_to_csv(tr, tmp_path / "t.csv")
    back = trace_from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.points, tr.points) and np.array_equal(back.times, tr.times)

    m = AtomicMeasure(np.array([0.1 + 1j, 0.3 + 2j]), np.array([0.5, 0.25]), d=1.25,
                      support="curve", tags=np.array([0.0, 0.1]))
    measure_to_csv(m, tmp_path / "m.csv", header={"seed": 4})
    mb, header = measure_from_csv(tmp_path / "m.csv")
    assert header["seed"] == 4 and mb.d == 1.25
    assert np.array_equal(mb.positions, m.positions) and np.array_equal(mb.weights, m.weights)
    assert np.array_equal(mb.tags, m.tags)


def test_zipper_report_matches_golden_values(zipper_runs, zipper_args):
    golden = json.loads((FIXTURES / "zipper_schema.json").read_text())
    assert zipper_args == (2.0, 0.3, 200, 2024)
    rep = zipper_runs[1].to_dict()
    for key, val in golden["reference"].items():
        assert rep[key] == pytest.approx(val, rel=1e-9), key
