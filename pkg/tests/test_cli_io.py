import json
import math
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geobouquet import Bouquet, Polytope
from geobouquet.billiards import BilliardTrajectory
from geobouquet.cli import main
from geobouquet.constructions import SimplexFamilyParams, build_simplex_family
from geobouquet.io import dumps, format_float, load_json, obj_mesh, read_obj, save_json
from geobouquet.smoothing import is_watertight


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


# -- serialization ------------------------------------------------------------------

@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_bit_exactly(x):
    assert float(json.loads(format_float(x))) == x
    assert math.copysign(1.0, float(format_float(x))) == math.copysign(1.0, x)


def test_integral_floats_stay_floats():
    assert format_float(2.0) == "2.0"
    assert isinstance(json.loads(dumps({"a": 2.0}))["a"], float)


def test_polytope_and_bouquet_round_trip(tmp_path):
    fam = build_simplex_family(SimplexFamilyParams(4))
    save_json(tmp_path / "p.json", fam.polytope)
    save_json(tmp_path / "b.json", fam.bouquet)
    P = Polytope.from_json(load_json(tmp_path / "p.json"))
    assert np.array_equal(P.normals, fam.polytope.normals)
    assert np.array_equal(P.offsets, fam.polytope.offsets)
    B = Bouquet.from_json(P, load_json(tmp_path / "b.json"))
    for a, b in zip(fam.bouquet.loops, B.loops):
        assert np.array_equal(a.trajectory.points, b.trajectory.points)
        assert a.trajectory.faces == b.trajectory.faces
        assert a.start_sheet == b.start_sheet


@given(st.integers(0, 2**31))
def test_trajectory_round_trip(seed):
    r = np.random.default_rng(seed)
    T = BilliardTrajectory(r.standard_normal((5, 3)), (0, 2, 1))
    U = BilliardTrajectory.from_json(json.loads(dumps(T.to_json())))
    assert np.array_equal(T.points, U.points)


def test_obj_mesh_round_trip():
    V = np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
    F = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    V2, F2, _ = read_obj(obj_mesh(V, F))
    assert np.array_equal(V, V2) and np.array_equal(F, F2)


# -- command line -------------------------------------------------------------------

def test_simplex_command(tmp_path):
    out = tmp_path / "s"
    assert main(["simplex", "--dim", "3", "--out", str(out)]) == 0
    for name in ("polytope.json", "bouquet.json", "certificate.json", "manifest.json",
                 "construction.json", "timing.txt"):
        assert (out / name).exists()
    cert = load_json(out / "certificate.json")
    assert cert["verdict"] == "Stable"
    assert "tolerances" in cert
    assert "wall_time" not in load_json(out / "manifest.json")


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GEOBOUQUET_OUTDIR", str(tmp_path / "env"))
    assert main(["hexagon", "--theta", "1.3"]) == 0
    assert (tmp_path / "env" / "certificate.json").exists()


def test_hexagon_out_of_range_is_a_usage_error(tmp_path, capsys):
    assert main(["hexagon", "--theta", "1.0", "--out", str(tmp_path)]) == 1
    assert "DomainError" in capsys.readouterr().err


def test_bad_arguments_are_usage_errors(tmp_path):
    assert main(["hexagon"]) == 1
    assert main(["no-such-command"]) == 1
    assert main(["verify", str(tmp_path / "missing.json")]) == 1


def test_verify_round_trip_and_tamper(tmp_path):
    src = tmp_path / "src"
    assert main(["simplex", "--dim", "3", "--out", str(src)]) == 0
    assert main(["verify", str(src / "bouquet.json"), "--out", str(tmp_path / "ok")]) == 0

    P = Polytope.from_json(load_json(src / "polytope.json"))
    data = load_json(src / "bouquet.json")
    loop = data["loops"][0]
    pts = np.array(loop["points"])
    n = P.normals[loop["faces"][0]]
    w = np.cross(n, [0.0, 0.0, 1.0])
    pts[1] += 1e-3 * w / np.linalg.norm(w)  # slide the collision within its face
    loop["points"] = pts.tolist()
    save_json(tmp_path / "tampered.json", data)
    out = tmp_path / "bad"
    code = main(["verify", str(tmp_path / "tampered.json"), "--polytope",
                 str(src / "polytope.json"), "--out", str(out)])
    assert code == 2
    cert = load_json(out / "certificate.json")
    assert cert["all_loops_valid"] is False
    # oracle: the reflection residual recomputed from the tampered points
    T = BilliardTrajectory(pts, tuple(loop["faces"]))
    u = T.directions
    direct = max(np.linalg.norm(u[i + 1] - P.reflect_dir(f, u[i])) for i, f in enumerate(T.faces))
    assert cert["max_reflection_residual"] == pytest.approx(direct, rel=1e-12)
    assert 1e-4 < direct < 1e-2


def test_shoot_command(tmp_path):
    save_json(tmp_path / "sq.json", Polytope.box([0.0, 0.0], [1.0, 1.0]))
    out = tmp_path / "o"
    assert main(["shoot", "--polytope", str(tmp_path / "sq.json"), "--start", "0.5,0.5",
                 "--direction", "1,0", "--collisions", "1", "--out", str(out)]) == 0
    data = load_json(out / "trajectory.json")
    assert data["trajectory"]["points"][1] == [1.0, 0.5]
    assert data["lift"] == "OpenGeodesic"


def test_export_obj(tmp_path):
    assert main(["hexagon", "--theta", "1.3", "--out", str(tmp_path)]) == 0
    assert main(["export-obj", str(tmp_path / "bouquet.json"), "--out", str(tmp_path)]) == 0
    V, F, lines = read_obj((tmp_path / "bouquet.obj").read_text())
    assert len(lines) == 3 + 6


def test_smooth_writes_a_watertight_mesh(tmp_path):
    save_json(tmp_path / "sq.json", Polytope.box([0.0, 0.0], [1.0, 1.0]))
    out = tmp_path / "m"
    code = main(["smooth", "--input", str(tmp_path / "sq.json"), "--sigma", "0.1",
                 "--mesh", "40", "--points", "20", "--out", str(out)])
    assert code == 0
    V, F, _ = read_obj((out / "surface.obj").read_text())
    assert is_watertight(F)
    rep = load_json(out / "smoothing.json")
    assert rep["mesh"]["euler_characteristic"] == 2
    assert rep["hessian_lambda_min"] > 0


def test_report_command(tmp_path, capsys):
    assert main(["simplex", "--dim", "3", "--out", str(tmp_path)]) == 0
    assert main(["report", str(tmp_path)]) == 0
    summary = load_json(tmp_path / "summary.json")
    assert summary["certificate.json"]["verdict"] == "Stable"


def test_reruns_are_byte_identical(tmp_path):
    out = tmp_path / "r"
    argv = ["simplex", "--dim", "4", "--out", str(out)]
    assert main(argv) == 0
    first = {p: _read(out / p) for p in os.listdir(out) if p.endswith(".json")}
    assert main(argv) == 0
    second = {p: _read(out / p) for p in os.listdir(out) if p.endswith(".json")}
    assert first == second
