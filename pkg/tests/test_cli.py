import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import CONFIG_DIR
from gelflow import cli
from gelflow.config import load_config, parse_config
from gelflow.errors import ConfigError
from gelflow.mesh import gen_rect_mesh, write_mesh
from gelflow.scheme import State
from gelflow.vtk import read_point_data, write_snapshot

SMALL = {
    "domain": {"type": "rect", "nx": 4, "ny": 4},
    "load": {"type": "tangential", "magnitude": 0.1},
    "dt": 0.01,
    "T": 0.05,
}


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_parse_bundled_configs():
    c1 = load_config(CONFIG_DIR / "test1.json")
    assert c1.load == {"type": "tangential", "magnitude": 0.1}
    assert c1.dt == 0.01 and c1.T == 0.1
    assert c1.build_mesh().n_vertices == 36 * 36
    c3 = load_config(CONFIG_DIR / "test3.json")
    assert (c3.domain["a"], c3.domain["b"]) == (0.4, 0.2)
    assert c3.dt == 0.001
    for name in ("test2.json", "mms.json"):
        load_config(CONFIG_DIR / name)


@pytest.mark.parametrize("patch, path", [
    ({"dt": 0}, "dt"),
    ({"T": -1.0}, "T"),
    ({"material": {"K": 1, "G": 1, "phi": 1.2, "xi": 1}}, "material"),
    ({"algorithm": "alg3"}, "algorithm"),
    ({"stride": 0}, "stride"),
    ({"colour": "red"}, "colour"),
    ({"domain": {"type": "rect", "nx": 4, "ny": 4, "spacing": 1}}, "domain.spacing"),
    ({"load": {"type": "named", "name": "mms"}}, "initial"),
])
def test_config_errors_name_key(patch, path):
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps({**SMALL, **patch}))
    assert info.value.path.startswith(path)


def test_config_missing_and_malformed():
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"dt": 0.1, "T": 1.0}))
    with pytest.raises(ConfigError):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config(json.dumps({**SMALL, "initial": {"type": "expression", "u1": "sin(y)", "u2": "0"}}))


def test_expression_initial_matches_named():
    doc = {**SMALL, "initial": {"type": "expression", "u1": "1e-4*sin(x1+x2)", "u2": "1e-4*sin(x1+x2)"}}
    a = parse_config(json.dumps(doc)).build_initial()
    b = parse_config(json.dumps(SMALL)).build_initial()
    x = np.random.default_rng(0).random((10, 2))
    assert np.allclose(a.displacement(x), b.displacement(x), rtol=1e-14)
    assert np.allclose(a.div_u0(x), b.div_u0(x), rtol=1e-14)


def test_run_outputs(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {**SMALL, "stride": 2})
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
    snaps = sorted(out.glob("snap_*.vtk"))
    assert len(snaps) == 5 // 2 + 1
    rows = (out / "diagnostics.csv").read_text().splitlines()
    assert rows[0].startswith("step,t,J_h,C_q")
    cq = np.array([float(r.split(",")[3]) for r in rows[1:]])
    assert np.ptp(cq) <= 1e-12 * abs(cq[0])
    assert "C_q =" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    for d in ("a", "b"):
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / d)]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["run", str(write_cfg(tmp_path, {**SMALL, "dt": 0}))]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.json")]) == cli.EXIT_IO
    # a net-force load cannot be balanced
    bad = {**SMALL, "load": {"type": "per_tag", "values": {"1": [1.0, 0.0]}}}
    assert cli.main(["run", str(write_cfg(tmp_path, bad)), "--out", str(tmp_path / "o")]) == cli.EXIT_SOLVER


def test_mesh_info(tmp_path, capsys):
    m = gen_rect_mesh(3, 2)
    good = tmp_path / "good.msh"
    good.write_text(write_mesh(m))
    assert cli.main(["mesh-info", str(good)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["vertices"] == 12 and stats["triangles"] == 12
    # reverse the orientation of the first triangle
    lines = write_mesh(m).splitlines()
    i = lines.index("$Triangles") + 1
    k, a, b, c = lines[i + 1].split()
    lines[i + 1] = f"{k} {a} {c} {b}"
    bad = tmp_path / "bad.msh"
    bad.write_text("\n".join(lines) + "\n")
    assert cli.main(["mesh-info", str(bad)]) == cli.EXIT_MESH
    assert "negative area" in capsys.readouterr().err


def test_vtk_zero_state():
    m = gen_rect_mesh(2, 2)
    nu, np_ = 2 * (m.n_vertices + m.n_edges), m.n_vertices
    s = State(0, 0.0, np.zeros(nu), np.zeros(np_), p=np.zeros(np_))
    d = read_point_data(write_snapshot(s, m))
    assert d["POINTS"].shape == (m.n_vertices, 3)
    assert not np.any(d["displacement"]) and not np.any(d["pressure"])
    assert "pressure" not in read_point_data(write_snapshot(State(0, 0.0, np.zeros(nu), np.zeros(np_)), m))


def test_vtk_warp_is_magnified():
    m = gen_rect_mesh(2, 2)
    rng = np.random.default_rng(3)
    u = rng.standard_normal(2 * (m.n_vertices + m.n_edges))
    s = State(1, 0.5, u, rng.standard_normal(m.n_vertices), p=rng.standard_normal(m.n_vertices))
    d = read_point_data(write_snapshot(s, m, magnification=500.0))
    assert np.allclose(d["displacement"][:, :2], u.reshape(-1, 2)[:m.n_vertices], rtol=0, atol=0)
    assert np.allclose(d["warp"], 500.0 * d["displacement"], rtol=1e-15)


def test_convergence_command(tmp_path, capsys):
    doc = {"domain": {"type": "rect", "nx": 2, "ny": 2},
           "material": {"K": 1, "G": 1, "phi": 0, "xi": 1},
           "load": {"type": "named", "name": "mms"}, "initial": {"type": "named", "name": "mms"},
           "dt": 0.05, "T": 0.05, "convergence": {"levels": 3, "dt0": 0.05, "T": 0.05}}
    out = tmp_path / "conv"
    assert cli.main(["convergence", str(write_cfg(tmp_path, doc)), "--out", str(out)]) == 0
    rows = (out / "rates.csv").read_text().splitlines()
    assert rows[0] == "level,h,dt,H1_u,rate_u,L2_q,rate_q,gradP,rate_p"
    assert len(rows) == 4


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "gelflow.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "mesh-info" in r.stdout
