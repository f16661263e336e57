import json
import subprocess
import sys

import numpy as np
import pytest

from mblab.cli import main
from mblab.grid import DomainSpec, constant_field, read_field, write_field


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


PERIODIC_ZERO = """
[rotation]
alpha = 1/2, 0
[potential]
kind = zero
[domain]
periods = 2, 1
m = 16
"""

PERIODIC_PENDULUM = """
[rotation]
alpha = 0
[potential]
kind = pendulum
eps = 0.25
[domain]
periods = 1
m = 16
"""

J2_KINK = """
[rotation]
alpha = 0
[potential]
kind = pendulum
eps = 0.25
[domain]
n2 = 1
R = 6
m = 16
[pair]
lower = const:0
upper = const:1
"""


def run(args):
    return main(args)


def test_periodic_zero_exits_ok(tmp_path):
    cfg = write(tmp_path, "p.ini", PERIODIC_ZERO)
    out = tmp_path / "out"
    assert run(["periodic", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["result"]["energy"]["total"] == pytest.approx(0.125)
    assert rep["verification"]["overall"]
    for name in ("minimizer.mbf", "minimizer.png", "residual.png", "energy.csv", "manifest.json"):
        assert (out / name).is_file()


def test_periodic_deterministic(tmp_path):
    cfg = write(tmp_path, "p.ini", PERIODIC_PENDULUM)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert run(["periodic", "--config", cfg, "--out", str(out), "--seed", "3"]) == 0
        outs.append(out)
    u = read_field(outs[0] / "minimizer.mbf")
    assert np.allclose(u.values, 0.0)
    names = sorted(p.name for p in outs[0].iterdir() if p.name != "manifest.json")
    assert names == sorted(p.name for p in outs[1].iterdir() if p.name != "manifest.json")
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


@pytest.mark.parametrize("text", [
    "[rotation\nalpha = 1",
    "[rotation]\nalpha = sqrt(2) + sqrt(3)\n",
    "[rotation]\nalpha = 1/2\n[potential]\nkind = wavy\n",
    "[potential]\nkind = zero\n",
    "[rotation]\nalpha = 1/2\n[domain]\nperiods = 3\nm = 8\n",
    "[rotation]\nalpha = 1/2\n[solver]\nrelaxation = 2.5\n",
])
def test_malformed_configs_exit_2(tmp_path, text):
    cfg = write(tmp_path, "bad.ini", text)
    assert run(["periodic", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file(tmp_path):
    assert run(["periodic", "--config", str(tmp_path / "nope.ini")]) == 2


def test_lamination_rational_exits_2(tmp_path):
    cfg = write(tmp_path, "l.ini", "[rotation]\nalpha = 1/2\n[potential]\nkind = zero\n")
    assert run(["lamination", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_lamination_zero_is_foliation(tmp_path):
    cfg = write(tmp_path, "l.ini", "[rotation]\nalpha = (1+sqrt(5))/2\n[potential]\nkind = zero\n"
                                   "[lamination]\ndepths = 3, 4\nm = 16\n")
    out = tmp_path / "o"
    assert run(["lamination", "--config", cfg, "--out", str(out)]) == 0
    data = json.loads((out / "gap_report.json").read_text())
    assert data["classification"] == "foliation_like"
    assert (out / "orbit_d4.png").is_file()


def test_j1_init_lower_exits_ok(tmp_path):
    cfg = write(tmp_path, "j1.ini", J2_KINK.replace("R = 6", "R = 2") + "init = lower\n")
    out = tmp_path / "o"
    assert run(["j1-gap", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["result"]["iterations"] == 0
    assert rep["result"]["energy"]["total"] == 0.0


def test_j2_kink_report(tmp_path):
    cfg = write(tmp_path, "j2.ini", J2_KINK)
    out = tmp_path / "o"
    assert run(["j2-heteroclinic", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["result"]["c2"] == pytest.approx(2 / np.pi, rel=0.03)
    assert rep["verification"]["overall"]
    assert (out / "strips.png").is_file() and (out / "heteroclinic.png").is_file()


def test_j2_empty_gap_exits_4(tmp_path):
    cfg = write(tmp_path, "j2.ini", J2_KINK.replace("upper = const:1", "upper = const:0"))
    assert run(["j2-heteroclinic", "--config", cfg, "--out", str(tmp_path / "o")]) == 4


def test_verify_pipeline(tmp_path):
    dom = DomainSpec(1, 0, 0, (1,), 16)
    write_field(constant_field(dom, 0.0), tmp_path / "v.mbf")
    write_field(constant_field(dom, 1.0), tmp_path / "w.mbf")
    text = ("[rotation]\nalpha = 0\n[potential]\nkind = pendulum\neps = 0.25\n"
            "[verify]\nfields = v.mbf, w.mbf\nchecks = wsi, ordered, rotation_bound, bangert_bound, residual\n"
            "eps_quad = 0\n")
    cfg = write(tmp_path, "v.ini", text)
    out = tmp_path / "o"
    assert run(["verify", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["overall"]


def test_verify_failure_exits_1(tmp_path):
    dom = DomainSpec(1, 0, 0, (2,), 16)
    u = constant_field(dom, 0.0)
    u = u.copy(0.3 * np.sin(np.pi * dom.axis_coords(0)))
    write_field(u, tmp_path / "u.mbf")
    cfg = write(tmp_path, "v.ini", "[rotation]\nalpha = 0\n[verify]\nfields = u.mbf\nchecks = wsi\n")
    assert run(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_console_script_entry_point(tmp_path):
    cfg = write(tmp_path, "p.ini", PERIODIC_ZERO)
    proc = subprocess.run([sys.executable, "-m", "mblab.cli", "periodic", "--config", cfg,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
