import json
import math

import numpy as np

from timebinsim import EventStream, PhysicalParams, run, save_params, sequence_for_pgen
from timebinsim.cli import main
from timebinsim.core import PARAM_FIELDS


def read_lines(path):
    return path.read_text().splitlines()


# -- argument and configuration errors ----------------------------------------

def test_no_command_is_a_usage_error(capsys):
    assert main([]) == 2
    capsys.readouterr()


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "visibility-sweep" in capsys.readouterr().out


def test_unknown_parameter_key_fails_before_writing(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["simulate", "--trajectories", "10", "--out", str(out),
                 "--param", "nonsense=1"]) == 2
    assert not out.exists()
    assert "nonsense" in capsys.readouterr().err


def test_non_numeric_parameter_value_fails(tmp_path, capsys):
    assert main(["simulate", "--trajectories", "10",
                 "--out", str(tmp_path / "o"),
                 "--param", "t1_radiative=abc"]) == 2
    assert "not a number" in capsys.readouterr().err


def test_invalid_parameter_value_fails_validation(tmp_path, capsys):
    assert main(["simulate", "--trajectories", "10",
                 "--out", str(tmp_path / "o"),
                 "--param", "t1_radiative=-5"]) == 2
    assert "t1_radiative" in capsys.readouterr().err


def test_every_subcommand_documents_the_parameter_keys(capsys):
    for cmd in ("visibility-sweep", "phase-qubits", "wdm", "g2", "simulate"):
        assert main([cmd, "--help"]) == 0
        text = capsys.readouterr().out
        for key in PARAM_FIELDS:
            assert key in text, f"{cmd} --help is missing {key}"


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "params.txt"
    save_params(PhysicalParams(t1_radiative=100.0), cfg)
    out = tmp_path / "o"
    assert main(["simulate", "--trajectories", "20", "--out", str(out),
                 "--config", str(cfg), "--param", "detector_jitter=0"]) == 0
    meta = json.loads((out / "simulate.meta.json").read_text())
    assert meta["params"]["t1_radiative"] == 100.0
    assert meta["params"]["detector_jitter"] == 0.0
    capsys.readouterr()


# -- simulate ------------------------------------------------------------------

def test_simulate_writes_csv_events_and_sidecar(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["simulate", "--trajectories", "50", "--seed", "4",
                 "--out", str(out)]) == 0
    stream = EventStream.from_csv(out / "events.csv", params=PhysicalParams(),
                                  sequence=sequence_for_pgen(1.0))
    direct = run(sequence_for_pgen(1.0), PhysicalParams(), 50, 4)
    assert len(stream) == len(direct) > 0
    meta = json.loads((out / "simulate.meta.json").read_text())
    assert meta["command"] == "simulate"
    assert meta["seed"] == 4
    assert meta["files"] == ["events.csv"]
    assert meta["options"]["trajectories"] == 50
    assert set(meta["params"]) == set(PARAM_FIELDS)
    capsys.readouterr()


def test_simulate_binary_round_trip(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["simulate", "--binary", "--trajectories", "40", "--seed", "6",
                 "--p-gen", "0.7", "--phase2", "0.25", "--out", str(out)]) == 0
    loaded = EventStream.from_binary(out / "events.bin")
    assert loaded.seed == 6
    assert loaded.n_trajectories == 40
    direct = run(sequence_for_pgen(0.7, phase2=0.25), PhysicalParams(), 40, 6)
    for name in direct.columns:
        assert np.array_equal(loaded.columns[name], direct.columns[name])
    capsys.readouterr()


def test_identical_invocations_produce_identical_bytes(tmp_path, capsys):
    args = ["simulate", "--trajectories", "60", "--seed", "9"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    for name in ("events.csv", "simulate.meta.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    capsys.readouterr()


# -- analysis subcommands --------------------------------------------------------

def test_visibility_sweep_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["visibility-sweep", "--trajectories", "800", "--points", "5",
                 "--mc-points", "2", "--scan-points", "8", "--t1", "100,250",
                 "--out", str(out)]) == 0
    curve = read_lines(out / "visibility_curve.csv")
    assert curve[0] == "p_gen,t1_ps,visibility"
    assert len(curve) == 1 + 5 * 2
    t1_seen = {float(ln.split(",")[1]) for ln in curve[1:]}
    assert t1_seen == {100.0, 250.0}
    mc = read_lines(out / "visibility_mc.csv")
    assert mc[0] == "p_gen,visibility,visibility_err,expected"
    assert len(mc) == 1 + 2
    capsys.readouterr()


def test_phase_qubits_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["phase-qubits", "--trajectories", "600", "--scan-points", "8",
                 "--phases", "0.5,1.0", "--seed", "2", "--out", str(out)]) == 0
    meta = json.loads((out / "phase-qubits.meta.json").read_text())
    assert meta["files"] == sorted(["fringe_reference.csv", "fringe_01.csv",
                                    "fringe_02.csv", "fits.csv", "bloch.csv"])
    fits = read_lines(out / "fits.csv")
    assert fits[0] == "programmed_rad,recovered_rad,visibility,visibility_err"
    assert len(fits) == 3
    for line, programmed in zip(fits[1:], (0.5, 1.0)):
        vals = [float(x) for x in line.split(",")]
        assert vals[0] == programmed
        assert abs(math.remainder(vals[1] - programmed, 2 * math.pi)) < 0.3
    bloch = read_lines(out / "bloch.csv")
    assert bloch[0] == "x,y,z,fidelity,visibility,phase_rad"
    assert len(bloch) == 3
    capsys.readouterr()


def test_wdm_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["wdm", "--trajectories", "3000", "--param", "p_hole_init=1",
                 "--out", str(out)]) == 0
    lines = read_lines(out / "recovery.csv")
    assert lines[0] == "filter,early_frac,late_frac,transmitted,total"
    assert len(lines) == 4
    red = lines[2].split(",")
    assert red[0] == "red"
    assert float(red[1]) > 0.95  # early fraction behind the red filter
    capsys.readouterr()


def test_g2_defaults_to_a_background_free_stream(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["g2", "--trajectories", "4000", "--out", str(out)]) == 0
    lines = read_lines(out / "g2.csv")
    assert lines[0] == "lag_periods,g2"
    by_lag = {int(ln.split(",")[0]): float(ln.split(",")[1]) for ln in lines[1:]}
    assert by_lag[0] == 0.0
    assert set(by_lag) == set(range(-5, 6))
    capsys.readouterr()


def test_g2_with_calibration(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["g2", "--trajectories", "3000", "--calibrate-g2", "0.05",
                 "--out", str(out)]) == 0
    meta = json.loads((out / "g2.meta.json").read_text())
    assert meta["options"]["calibrated_background"] > 0
    assert meta["params"]["background_rate"] == \
        meta["options"]["calibrated_background"]
    assert "calibrated background rate" in capsys.readouterr().out


def test_g2_needs_enough_statistics(tmp_path, capsys):
    assert main(["g2", "--trajectories", "1",
                 "--out", str(tmp_path / "o")]) == 3
    assert "error" in capsys.readouterr().err
