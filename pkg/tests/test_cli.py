import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from enmeas.cli import main
from enmeas.linalg import matrix_to_json
from enmeas.povm import Povm, projective_qubit
from enmeas.tau import optimal_finite_state


def run_cli(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_tau_finite_d2(capsys):
    code, out, _ = run_cli(["tau", "finite", "--d", "2"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["tau"] == pytest.approx(0.5, abs=1e-12)
    assert data["epsilon"] == pytest.approx(0.25, abs=1e-12)


def test_unknown_flag_exits_2():
    proc = subprocess.run(
        [sys.executable, "-m", "enmeas.cli", "tau", "finite", "--bogus"],
        capture_output=True,
    )
    assert proc.returncode == 2


def test_unknown_subcommand_exits_2():
    proc = subprocess.run(
        [sys.executable, "-m", "enmeas.cli", "frobnicate"], capture_output=True
    )
    assert proc.returncode == 2


def test_domain_error_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run_cli(["povm", "validate", "--file", str(bad)], capsys)
    assert code == 1
    assert "error:" in err


def test_phi_command(capsys):
    code, out, _ = run_cli(["phi", "--z", "3.0"], capsys)
    assert code == 0
    data = json.loads(out)
    assert 0 < data["phi"] < 1
    assert data["energy_check"] == pytest.approx(3.0, abs=1e-5)


def test_phi_sweep_csv_roundtrip(tmp_path, capsys):
    out_path = tmp_path / "sweep.csv"
    code, _, _ = run_cli(
        ["phi-sweep", "--zmin", "1", "--zmax", "3", "--steps", "3",
         "--out", str(out_path)], capsys)
    assert code == 0
    with open(out_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    from enmeas.bessel import phi

    for row in rows:
        again = phi(float(row["z"]))
        assert float(row["phi"]) == pytest.approx(again.phi, abs=1e-12)
        # re-serialization reproduces the file value exactly
        assert f"{again.phi:.17g}" == row["phi"]


def test_power_state_output(tmp_path, capsys):
    out_path = tmp_path / "state.json"
    code, _, _ = run_cli(
        ["power-state", "--ebar", "4.0", "--delta", "1.0", "--out", str(out_path)],
        capsys)
    assert code == 0
    data = json.loads(out_path.read_text())
    assert data["kind"] == "pure"
    assert data["mean_energy"] == pytest.approx(4.0, abs=1e-4)
    from enmeas.tau import BatteryState

    st = BatteryState.from_json(data)
    assert st.dim == len(data["amplitudes"])


def test_povm_validate_and_degrade(tmp_path, capsys):
    path = tmp_path / "povm.json"
    path.write_text(json.dumps(projective_qubit("x").to_json()))
    code, out, _ = run_cli(["povm", "validate", "--file", str(path)], capsys)
    assert code == 0
    assert json.loads(out)["ok"]

    code, out, _ = run_cli(
        ["povm", "degrade", "--file", str(path), "--tau", "0.5"], capsys)
    assert code == 0
    data = json.loads(out)
    m = Povm.from_json(data)
    assert m.elements[0][0, 1] == pytest.approx(0.25)


def test_povm_validate_invalid_exits_1(tmp_path, capsys):
    bad = {"dim": 2, "elements": {"a": matrix_to_json(0.4 * np.eye(2)),
                                  "b": matrix_to_json(0.4 * np.eye(2))}}
    path = tmp_path / "bad_povm.json"
    path.write_text(json.dumps(bad))
    code, out, _ = run_cli(["povm", "validate", "--file", str(path)], capsys)
    assert code == 1
    assert not json.loads(out)["ok"]


def test_spectrum_chains(tmp_path, capsys):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"delta": 1.0, "levels": [0.0, 0.5, 1.0, 1.5, 3.0]}))
    code, out, _ = run_cli(["spectrum", "chains", "--file", str(path)], capsys)
    assert code == 0
    data = json.loads(out)
    assert [c["length"] for c in data["chains"]] == [2, 2, 1]
    assert all("level_ids" in c for c in data["chains"])


def test_spectrum_joint(tmp_path, capsys):
    path = tmp_path / "joint.json"
    path.write_text(json.dumps({"target_levels": [0.0, 1.0],
                                "battery_levels": [0.0, 1.0, 2.0]}))
    code, out, _ = run_cli(["spectrum", "joint", "--file", str(path)], capsys)
    assert code == 0
    assert [s["rank"] for s in json.loads(out)["sectors"]] == [1, 2, 2, 1]


def test_tau_state_command(tmp_path, capsys):
    st = optimal_finite_state(3)
    path = tmp_path / "state.json"
    path.write_text(json.dumps(st.to_json()))
    code, out, _ = run_cli(
        ["tau", "state", "--file", str(path), "--delta", "1.0"], capsys)
    assert code == 0
    assert json.loads(out)["tau"] == pytest.approx(math.cos(math.pi / 4), abs=1e-10)


def test_tau_gaussian(capsys):
    code, out, _ = run_cli(
        ["tau", "gaussian", "--sigma", "1.0", "--delta", "1.0"], capsys)
    assert code == 0
    assert json.loads(out)["tau"] == pytest.approx(math.exp(-1 / 8), abs=1e-6)


def test_tau_sweep_csv(capsys):
    code, out, _ = run_cli(
        ["tau", "coherent", "--sweep-min", "1", "--sweep-max", "5",
         "--sweep-steps", "3", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [r["parameter"] for r in rows] == ["1", "3", "5"]
    from enmeas.tau import epsilon_from_tau, tau_coherent

    for r in rows:
        assert float(r["tau"]) == pytest.approx(tau_coherent(float(r["parameter"])))
        assert float(r["epsilon"]) == pytest.approx(
            epsilon_from_tau(float(r["tau"])), abs=1e-15)


def test_distance_cli(tmp_path, capsys):
    p0 = tmp_path / "m0.json"
    p1 = tmp_path / "m1.json"
    p0.write_text(json.dumps(projective_qubit("z").to_json()))
    p1.write_text(json.dumps(projective_qubit("x").to_json()))
    code, out, _ = run_cli(
        ["distance", "classical", "--m0", str(p0), "--m1", str(p1)], capsys)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(1 / math.sqrt(2), abs=1e-10)
    code, out, _ = run_cli(
        ["distance", "quantum", "--m0", str(p0), "--m1", str(p1)], capsys)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(1 / math.sqrt(2), abs=1e-6)


def test_charact_cli(tmp_path, capsys):
    from enmeas.povm import degrade

    path = tmp_path / "m.json"
    path.write_text(json.dumps(degrade(projective_qubit("x"), 0.4).to_json()))
    code, out, _ = run_cli(
        ["charact", "finite", "--povm", str(path), "--d", "3"], capsys)
    assert code == 0
    assert json.loads(out)["verdict"] == "member"


def test_bell_chsh_cli(capsys):
    code, out, _ = run_cli(["bell", "chsh"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["chsh_value"] == pytest.approx(1 + 0.75 * math.sqrt(2), abs=1e-12)
    assert data["mixture_bound"] == pytest.approx(2.2071067811865475, abs=1e-12)


def test_bell_seesaw_deterministic(tmp_path, capsys):
    rho = np.zeros((4, 4), complex)
    rho[1, 1] = 0.5
    rho[2, 2] = 0.5
    path = tmp_path / "rho.json"
    path.write_text(json.dumps({"rho": matrix_to_json(rho), "dims": [2, 2]}))
    outs = []
    for _ in range(2):
        code, out, _ = run_cli(
            ["bell", "seesaw", "--state", str(path), "--restarts", "5",
             "--seed", "7"], capsys)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]  # fixed seed, bit-identical output


def test_charact_dump_sdp(tmp_path, capsys):
    from enmeas.povm import degrade

    path = tmp_path / "m.json"
    path.write_text(json.dumps(degrade(projective_qubit("x"), 0.4).to_json()))
    dump = tmp_path / "program.json"
    code, _, _ = run_cli(
        ["charact", "finite", "--povm", str(path), "--d", "2",
         "--dump-sdp", str(dump)], capsys)
    assert code == 0
    prog = json.loads(dump.read_text())
    assert prog["block_dims"]
    assert prog["equalities"]


def test_reproduce_single_check(capsys):
    code, out, _ = run_cli(["reproduce", "chsh-value"], capsys)
    assert code == 0
    assert "PASS" in out


def test_reproduce_requires_selection(capsys):
    code, _, err = run_cli(["reproduce"], capsys)
    assert code == 2
