import json
import math
import re
import subprocess
import sys

import numpy as np
import pytest

from ccchart import io
from ccchart.cli import main
from ccchart.geometry import boundary_trace
from ccchart.model import ConverterDesign, load_design, save_design
from ccchart.sizing import S4_OPT, preset


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def read(path):
    return json.loads(path.read_text())


def test_area_fixed_design(tmp_path):
    assert run(tmp_path, "area", "--preset", "ufix4") == 0
    out = read(tmp_path / "ufix4_cca.json")
    assert out["cca"] == pytest.approx(math.pi / 24, rel=1e-3)
    assert out["cca_grid"] == pytest.approx(math.pi / 24, rel=0.01)
    assert out["relative_difference"] < 0.01
    assert out["grid_resolution"] == [801, 801] and out["angles"] == 720
    assert out["config"]["subcommand"] == "area"
    assert out["design"]["name"] == "ufix4"


def test_area_three_leg(tmp_path):
    assert run(tmp_path, "area", "--preset", "ufix3", "--grid", "201") == 0
    out = read(tmp_path / "ufix3_cca.json")
    assert out["cca"] == 0 and out["cca_grid"] == 0 and out["relative_difference"] == 0


def test_area_ratio(tmp_path, capsys):
    assert run(tmp_path, "area", "--preset", "omega", "--preset", "ufix4", "--ratio") == 0
    out = read(tmp_path / "ratio_cca_omega_ufix4.json")
    assert out["eta"] == pytest.approx(1.753, abs=0.02)
    assert out["eta_grid"] == pytest.approx(1.753, abs=0.02)
    assert "eta_A(ufix4 -> omega)" in capsys.readouterr().out


def test_ratio_command(tmp_path):
    assert run(tmp_path, "ratio", "--preset", "s4opt", "--preset", "ufix4") == 0
    assert read(tmp_path / "ratio_cca_s4opt_ufix4.json")["eta"] == pytest.approx(1.578, rel=0.02)
    assert run(tmp_path, "ratio", "--preset", "omega", "--preset", "ufix4", "--objective", "ccv", "--angles", "180") == 0
    assert read(tmp_path / "ratio_ccv_omega_ufix4.json")["eta"] == pytest.approx(1.627, rel=0.03)


def test_volume(tmp_path):
    assert run(tmp_path, "volume", "--preset", "ufix4", "--grid", "101", "--angles", "180") == 0
    out = read(tmp_path / "ufix4_ccv.json")
    assert out["ccv_spherical"] == pytest.approx(out["ccv_grid"], rel=0.05)
    assert out["angles"] == [90, 180] and out["grid_resolution"] == [101, 101, 101]


def test_user_design_file(tmp_path):
    path = tmp_path / "mine.json"
    save_design(ConverterDesign(S4_OPT, name="mine"), path)
    assert run(tmp_path, "area", "--design", str(path), "--grid", "201") == 0
    assert read(tmp_path / "mine_cca.json")["cca"] == pytest.approx(0.3259, abs=1e-3)


def test_boundary_spherical(tmp_path):
    assert run(tmp_path, "boundary", "--preset", "i4opt", "--mode", "spherical", "--psi", "45") == 0
    path = tmp_path / "i4opt_boundary_spherical_psi45.csv"
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ccchart ")
    assert lines[1] == "theta_rad,psi_rad,r_pu"
    tr, meta = io.read_boundary_csv(path)
    ref = boundary_trace(preset("i4opt"), "spherical", 181, psi=math.radians(45))
    assert np.allclose(tr.radii, ref.radii, rtol=1e-8, atol=1e-12)
    assert np.allclose(tr.angles, ref.angles, rtol=1e-8, atol=1e-12)
    assert meta["config"]["psi_deg"] == 45


def test_boundary_planar_and_cylindrical(tmp_path):
    assert run(tmp_path, "boundary", "--preset", "s4opt") == 0
    assert (tmp_path / "s4opt_boundary_planar.csv").read_text().splitlines()[1] == "theta_rad,r_pu"
    assert run(tmp_path, "boundary", "--preset", "ufix4", "--mode", "cylindrical", "--ptotal", "0.9") == 0
    tr, _ = io.read_boundary_csv(tmp_path / "ufix4_boundary_cylindrical_p0.9.csv")
    assert np.all(np.isnan(tr.radii))


def test_numbers_use_nine_significant_digits(tmp_path):
    run(tmp_path, "boundary", "--preset", "s4opt")
    for line in (tmp_path / "s4opt_boundary_planar.csv").read_text().splitlines()[2:]:
        for field in line.split(","):
            digits = re.sub(r"e.*$", "", field).replace("-", "").replace(".", "").lstrip("0")
            assert len(digits) <= 9


def test_slice(tmp_path):
    assert run(tmp_path, "slice", "--preset", "i4opt", "--ptotal", "0.75") == 0
    info = read(tmp_path / "i4opt_slice_p0.75.json")
    assert info["components"] > 1
    assert {"p_ttl", "components", "holes", "cca_of_slice"} <= set(info)
    sl, _ = io.read_slice(tmp_path / "i4opt_slice_p0.75.json")
    assert sl.mask.shape == (801, 801) and sl.components == info["components"]
    assert (tmp_path / "i4opt_slice_p0.75.csv").read_text().splitlines()[1] == "phat1,phat2,feasible"


def test_optimize(tmp_path):
    assert run(tmp_path, "optimize", "--legs", "4", "--objective", "cca", "--step", "0.02") == 0
    path = tmp_path / "opt_cca_m4.json"
    d = load_design(path)
    assert np.max(np.abs(np.array(d.legs) - S4_OPT)) <= 0.04
    out = read(path)
    assert out["metric"] > 0 and out["candidates"] == 920
    lines = (tmp_path / "opt_cca_m4_top.csv").read_text().splitlines()
    assert lines[1] == "alpha1,alpha2,alpha3,alpha4,metric"
    assert len(lines) == 12


# failures -------------------------------------------------------------------


def test_missing_design_file(tmp_path, capsys):
    assert run(tmp_path, "area", "--design", str(tmp_path / "nope.json")) == 2
    assert "not found" in capsys.readouterr().err
    assert run(tmp_path, "area", "--preset", "nonsense") == 2


@pytest.mark.parametrize("text", ['{"legs": [0.5, 0.5]}', "not json", '{"legs": [0.5, 0.6], "reconfigurable": true}'])
def test_invalid_schema(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert run(tmp_path, "area", "--design", str(path)) == 3


@pytest.mark.parametrize(
    "args",
    [
        ["boundary", "--preset", "s4opt", "--ptotal", "0.3"],
        ["boundary", "--preset", "s4opt", "--mode", "spherical", "--ptotal", "0.3"],
        ["boundary", "--preset", "s4opt", "--mode", "cylindrical", "--ptotal", "0.3", "--psi", "10"],
        ["boundary", "--preset", "s4opt", "--mode", "planar", "--psi", "10"],
        ["boundary", "--preset", "s4opt", "--mode", "cylindrical"],
        ["area", "--preset", "s4opt", "--ptotal", "0.2"],
        ["area", "--preset", "s4opt", "--ratio"],
        ["slice", "--preset", "s4opt"],
        ["optimize", "--preset", "s4opt"],
        ["area"],
    ],
)
def test_conflicting_flags(tmp_path, args):
    assert run(tmp_path, *args) == 4
    assert not list(tmp_path.iterdir())


def test_malformed_render_input(tmp_path):
    bad = tmp_path / "junk.csv"
    bad.write_text("theta_rad,r_pu\n0,1\n")
    assert run(tmp_path, "render", str(bad)) == 5
    bad_json = tmp_path / "junk.json"
    bad_json.write_text('{"hello": 1}')
    assert run(tmp_path, "render", str(bad_json)) == 5
    assert run(tmp_path, "render", str(tmp_path / "missing.csv")) == 5


def test_computation_error_exit(tmp_path):
    assert run(tmp_path, "slice", "--preset", "s4opt", "--ptotal", "1.5") == 1
    assert run(tmp_path, "area", "--preset", "s4opt", "--grid", "20") == 1


# rendering ------------------------------------------------------------------


def test_render_is_deterministic(tmp_path):
    assert run(tmp_path, "boundary", "--preset", "u8") == 0
    names = ("u8_boundary_planar_clarke.svg", "u8_boundary_planar_nominal.svg")
    renders = []
    for _ in range(2):
        assert run(tmp_path, "render", str(tmp_path / "u8_boundary_planar.csv")) == 0
        renders.append([(tmp_path / n).read_bytes() for n in names])
    assert renders[0] == renders[1]
    text = (tmp_path / names[0]).read_text()
    assert text.count('stroke-dasharray="6,4"') == 2  # omega and ufix4 references
    assert "(pu)" in text


def test_render_slice_and_constraints(tmp_path):
    assert run(tmp_path, "slice", "--preset", "i4opt", "--ptotal", "0.6", "--grid", "201", "--svg") == 0
    assert (tmp_path / "i4opt_slice_p0.6_clarke.svg").exists()
    assert (tmp_path / "i4opt_slice_p0.6_nominal.svg").exists()
    out = tmp_path / "r"
    assert main(["render", str(tmp_path / "i4opt_slice_p0.6.json"), "--preset", "ufix4", "--out", str(out)]) == 0

    def body(path):
        return [line for line in path.read_text().splitlines() if not line.startswith("<metadata>")]

    assert body(out / "i4opt_slice_p0.6_clarke.svg") == body(tmp_path / "i4opt_slice_p0.6_clarke.svg")
    assert "&quot;source&quot;" in (out / "i4opt_slice_p0.6_clarke.svg").read_text()
    fig = (out / "ufix4_constraints.svg").read_text()
    assert fig.count("<polyline") == 3  # hexagon, ellipse, dashed ideal boundary


def test_render_constraints_needs_fixed_design(tmp_path):
    assert run(tmp_path, "render", "--preset", "s4opt") == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ccchart", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "area" in res.stdout
