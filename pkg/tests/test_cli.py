import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from kicqed import calibration as cal
from kicqed import readout as ro
from kicqed.circuit import load_device, spec_to_json
from kicqed.cli import main
from kicqed.fitting import synthesize, write_spectroscopy_csv
from kicqed.fock import FockConfig

from .conftest import TABLE_DEVICES

GOLDEN = json.loads((Path(__file__).parent / "golden" / "cli_devices.json").read_text())
SMALL = ["--nR", "6", "--nQ", "16", "--guard-R", "2", "--guard-Q", "5"]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 0, err
    return json.loads(out)


# --- exit codes --------------------------------------------------------------

def test_usage_errors_exit_2(capsys):
    assert run([], capsys)[0] == 2
    assert run(["bogus"], capsys)[0] == 2
    assert run(["chi"], capsys)[0] == 2
    assert run(["chi", "--device", "missing.json"], capsys)[0] == 2
    assert run(["jumps", "--data", "nope.csv"], capsys)[0] == 2
    assert run(["spectrum", "--device", "q7", "--flux-grid", "0:1"], capsys)[0] == 2
    assert run(["t1", "--device", "q7"], capsys)[0] == 2


def test_help_exits_0(capsys):
    assert run(["--help"], capsys)[0] == 0


def test_domain_error_exit_1(tmp_path, capsys):
    doc = spec_to_json(load_device("q7"))
    doc["capacitances_fF"]["C12"] = -1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, out, err = run(["chi", "--device", str(path)], capsys)
    assert code == 1 and out == ""
    msg = json.loads(err)
    assert msg["error"] == "InvalidCircuit" and msg["command"] == "chi"


def test_stark_zero_chi_is_domain_error(tmp_path, capsys):
    path = tmp_path / "s.csv"
    cal.write_stark_csv(path, [cal.StarkRecord(p, 0.02 * p) for p in (0.0, 50.0, 100.0)])
    assert run(["stark", "--data", str(path), "--chi", "0"], capsys)[0] == 1


# --- subcommands -------------------------------------------------------------

def test_chi_q7(capsys):
    doc = run_json(["chi", "--device", "q7.json", "--flux", "0.5"], capsys)
    assert doc["chi_MHz"] == pytest.approx(0.98, rel=0.1)
    assert doc["nR"] == 15 and doc["nQ"] == 30


def test_modes_output(capsys):
    doc = run_json(["modes", "--device", "q6"], capsys)
    assert doc["f_R_GHz"] == pytest.approx(5.77, rel=0.02)
    assert len(doc["S"]) == 4 and doc["zero_index"] is not None


def test_delta_c_flag(capsys):
    doc = run_json(["modes", "--device", "q7", "--delta-c-aF", "25"], capsys)
    assert doc["delta_C_aF"] == pytest.approx(5.0)


def test_spectrum_decoupled_device(tmp_path, capsys):
    spec = load_device("q7").symmetrized().replace(Dk=0.0)
    path = tmp_path / "sym.json"
    path.write_text(json.dumps(spec_to_json(spec)))
    out = tmp_path / "sweep.csv"
    code, _, err = run(["spectrum", "--device", str(path), "--flux-grid", "0:1:11", "--out", str(out)] + SMALL, capsys)
    assert code == 0, err
    lines = out.read_text().splitlines()
    assert lines[0] == "flux_phi0,fQ01_GHz,fQ02_GHz,fR0_GHz,fR1_GHz,chi_MHz,ambiguous"
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert rows.shape == (11, 7)
    assert np.abs(rows[:, 5]).max() < 1e-3


def test_spectrum_periodic(capsys):
    code, out, _ = run(["spectrum", "--device", "q7", "--flux-grid", "0:1:5", "--threads", "2"] + SMALL, capsys)
    rows = np.array([[float(v) for v in line.split(",")] for line in out.splitlines()[1:]])
    np.testing.assert_allclose(rows[0, 1:6], rows[-1, 1:6], rtol=1e-9)
    np.testing.assert_allclose(rows[1, 1:6], rows[3, 1:6], rtol=1e-9)


def test_idealized(capsys):
    doc = run_json(["idealized", "--device", "q7", "--dk-grid=-1:1:3"] + SMALL, capsys)
    assert doc["params"]["LQ"] == pytest.approx(38.78)
    assert [r["Dk"] for r in doc["comparison"]] == [-1.0, 0.0, 1.0]


def test_t1_round_trip(capsys):
    a = run_json(["t1", "--device", "q7", "--t1-us", "8"], capsys)
    assert a["Q_ind"] == pytest.approx(0.61e6, rel=0.3)
    b = run_json(["t1", "--device", "q7", "--qind", str(a["Q_ind"])], capsys)
    assert b["T1_us"] == pytest.approx(8.0, rel=1e-12)


def test_fit_round_trip(tmp_path, capsys):
    q7 = load_device("q7")
    cfg = FockConfig(nR=5, nQ=16, guard_R=3, guard_Q=6)
    data = tmp_path / "spec.csv"
    write_spectroscopy_csv(data, synthesize(q7, np.linspace(0, 0.5, 6), cfg=cfg))
    start = q7.replace(Lr=q7.Lr * 1.05, Lq=q7.Lq * 0.95, Dk=q7.Dk * 1.05, EJ=q7.EJ * 1.05, CJ=q7.CJ * 0.95)
    dev = tmp_path / "start.json"
    dev.write_text(json.dumps(spec_to_json(start)))
    argv = ["fit", "--device", str(dev), "--data", str(data), "--nR", "5", "--nQ", "16",
            "--guard-R", "3", "--guard-Q", "6", "--threads", "1"]
    doc = run_json(argv, capsys)
    for k, v in zip(("Lr", "Lq", "Dk", "EJ", "CJ"), (q7.Lr, q7.Lq, q7.Dk, q7.EJ, q7.CJ)):
        assert doc["theta"][k] == pytest.approx(v, rel=0.01)
    assert {"theta", "rss", "converged", "evals", "residuals"} <= set(doc)


def test_jumps(tmp_path, capsys):
    em = ro.pointer_model([[0.0, 0.0], [7.4, 0.0], [3.7, 7.4]], 1.0)
    P = [[0.98, 0.015, 0.005], [0.07, 0.92, 0.01], [0.1, 0.1, 0.8]]
    _, X = ro.synth_trace(P, em, 20000, seed=1)
    path = tmp_path / "trace.csv"
    ro.write_trace_csv(path, X)
    hist = tmp_path / "hist.csv"
    doc = run_json(["jumps", "--data", str(path), "--seed", "3", "--histogram", str(hist)], capsys)
    assert doc["snr"] == pytest.approx(3.7, abs=0.2)
    assert sum(doc["populations"].values()) == pytest.approx(1.0, abs=1e-12)
    assert hist.read_text().splitlines()[0] == "I,Q,count"
    again = run(["jumps", "--data", str(path), "--seed", "3"], capsys)[1]
    assert json.loads(again) == doc


def test_pipulse_and_stark(tmp_path, capsys):
    n = np.arange(60)
    pi = tmp_path / "pi.csv"
    cal.write_pipulse_csv(pi, [cal.PiPulseRecord(int(k), float(p))
                               for k, p in zip(n, cal.pipulse_population(n, 0.95, 0.02, 0.05, 0.01))])
    doc = run_json(["pipulse", "--data", str(pi)], capsys)
    assert doc["f"] == pytest.approx(0.05, rel=0.01)
    st = tmp_path / "stark.csv"
    cal.write_stark_csv(st, [cal.StarkRecord(p, 0.02 * p) for p in (0.0, 50.0, 100.0, 150.0)])
    doc = run_json(["stark", "--data", str(st), "--chi", "0.5", "--power", "100"], capsys)
    assert doc["nbar"] == pytest.approx(4.0, rel=1e-12)


# --- golden values and byte stability ----------------------------------------

@pytest.mark.parametrize("name", TABLE_DEVICES)
def test_golden_values(name, capsys):
    modes = run_json(["modes", "--device", name], capsys)
    chi = run_json(["chi", "--device", name], capsys)
    for k, v in GOLDEN[name].items():
        got = modes[k] if k in modes else chi[k]
        assert got == pytest.approx(v, rel=1e-9, abs=1e-12), k


@pytest.mark.parametrize("name", TABLE_DEVICES)
def test_byte_identical_reruns(name, capsys):
    commands = [
        ["modes", "--device", name],
        ["chi", "--device", name],
        ["spectrum", "--device", name, "--flux-grid", "0.3:0.7:3", "--threads", "2"] + SMALL,
        ["idealized", "--device", name, "--dk-grid=-0.5:0.5:2"] + SMALL,
        ["t1", "--device", name, "--t1-us", "8"] + SMALL,
    ]
    for argv in commands:
        a = run(argv, capsys)
        b = run(argv, capsys)
        assert a == b and a[0] == 0, argv


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "kicqed", "chi", "--device", "q7"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["name"] == "q7"
