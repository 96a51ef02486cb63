import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgoplanes.pipeline import experiments as ex
from cgoplanes.pipeline.cli import main
from cgoplanes.pipeline.config import ConfigError, ExperimentConfig, resolution_problems
from cgoplanes.pipeline.phantoms import Phantom, difference, parse_phantom


def tiny(tmp_path, **sections):
    base = dict(domain={"N": 64}, cgo={"s_list": (6.0, 8.0)}, boundary={"n_theta": 16, "n_phi": 32},
                estimates={"phantoms": ("zero", "gaussian:1.0:0.3:0,0,0")},
                reconstruct={"direct_dirs": 20, "direct_offsets": 9, "dirs": 3, "offsets": 5},
                localize={"dirs": 2, "offsets": 5, "cap_offsets": 1}, run={"out": str(tmp_path)})
    base.update(sections)
    return ExperimentConfig().replace(**base)


@given(st.floats(0.01, 0.24), st.floats(1e-6, 10), st.lists(st.floats(0.5, 50), min_size=1, max_size=6))
@settings(max_examples=40, deadline=None)
def test_config_roundtrip_bit_exact(beta, tol, s_list):
    cfg = ExperimentConfig().replace(cgo={"beta": beta, "solver_tol": tol, "s_list": tuple(s_list)})
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back == cfg and back.hash() == cfg.hash()


def test_config_file_roundtrip(tmp_path):
    cfg = ExperimentConfig().replace(estimates={"normals": ((0.1, 0.2, 1.0), (1.0, 0.0, 0.0))})
    cfg.save(tmp_path / "c.ini")
    assert ExperimentConfig.load(tmp_path / "c.ini") == cfg


@pytest.mark.parametrize("section,update,needle", [
    ("cgo", {"beta": 0.3}, "beta"),
    ("cgo", {"eps0": 0.3}, "eps0"),
    ("cutoffs", {"R_cut": 0.9}, "R_cut"),
    ("domain", {"N": 63}, "N must be"),
    ("reconstruct", {"phantom": "blob:1:1:0,0,0"}, "unknown phantom"),
    ("localize", {"offsets": 20}, "odd"),
])
def test_config_validation_messages(section, update, needle):
    with pytest.raises(ConfigError, match=needle):
        ExperimentConfig().replace(**{section: update}).validate()


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown key"):
        ExperimentConfig.from_text("[domain]\nM = 3\n")
    with pytest.raises(ConfigError, match="unknown section"):
        ExperimentConfig.from_text("[nope]\n")


def test_resolution_problems():
    assert resolution_problems(128, 2.5, (6, 8, 12, 16, 24), 0.15) == []
    probs = resolution_problems(32, 2.5, (24,), 0.15)
    assert len(probs) == 2 and "wavelength" in probs[0]


def test_phantoms():
    g = parse_phantom("gaussian:2.0:0.5:0.1,0,0")
    assert g(0.1, 0.0, 0.0) == 2.0 and parse_phantom(g.spec()) == g
    b = parse_phantom("bump:1.0:0.3:0,0,0")
    assert b(0.0, 0.0, 0.0) == 1.0 and b(np.array(0.31), 0.0, 0.0) == 0.0 and b.support_radius == 0.3
    assert parse_phantom("zero").is_zero
    assert difference(Phantom("zero"), g)(0.1, 0.0, 0.0) == 2.0
    for bad in ("gaussian:1:0.3", "bump:1:-1:0,0,0", "zero:1", "gaussian:1:1:0,0"):
        with pytest.raises(ValueError):
            parse_phantom(bad)


def test_loglog_slope():
    s = np.array([6.0, 8.0, 12.0, 16.0, 24.0])
    slope, hw = ex.loglog_slope(s, 3 * s**-0.7)
    assert slope == pytest.approx(-0.7) and hw < 1e-10


def test_estimates_rows_and_determinism(tmp_path):
    cfg = tiny(tmp_path / "a")
    rep = ex.run_estimates(cfg)
    lines = open(rep.tables["norms"]).read().splitlines()
    assert len(lines) == 1 + 2 * 2                  # planes x phantoms x |s list|
    assert rep.checks["support"]
    rep2 = ex.run_estimates(cfg.replace(run={"out": str(tmp_path / "b")}))
    for key in rep.tables:
        assert open(rep.tables[key], "rb").read() == open(rep2.tables[key], "rb").read()


def test_estimates_resolution_stability(tmp_path):
    """Doubling N changes the recorded norms by at most 2 percent."""
    cfg = tiny(tmp_path, cgo={"s_list": (8.0,)}, estimates={"phantoms": ("gaussian:1.0:0.3:0,0,0",)})
    lo = ex.run_estimates(cfg.replace(run={"out": str(tmp_path / "lo")}))
    hi = ex.run_estimates(cfg.replace(domain={"N": 128}, run={"out": str(tmp_path / "hi")}))
    import csv
    a = next(csv.DictReader(open(lo.tables["norms"])))
    b = next(csv.DictReader(open(hi.tables["norms"])))
    for k in ("g_norm", "u0_box", "u_app_box"):
        assert float(a[k]) == pytest.approx(float(b[k]), rel=0.02)


def test_infeasible_sweep_lists_violations(tmp_path):
    with pytest.raises(ex.InfeasibleSweep, match="s=60"):
        ex.run_estimates(tiny(tmp_path, cgo={"s_list": (6.0, 60.0)}))


def test_localize_and_reconstruct_smoke(tmp_path):
    cfg = tiny(tmp_path)
    rep = ex.run_localize(cfg)
    assert rep.complete and {"avoid_contained", "cap_tube_depth", "cap_touching_no_tube"} <= set(rep.checks)
    assert rep.summary["max_rel_value:contained:avoid:direct"] == 0.0
    rep = ex.run_reconstruct(cfg)
    assert rep.complete and rep.summary["e2e_planes"] == 15


def test_reconstruct_zero_phantom_is_near_silent(tmp_path):
    """q2 = q1 = 0: the reconstruction is the measurement noise floor, far below the
    signal level of a unit phantom at the same sampling (N=64, s=16 floor is about 4%)."""
    from cgoplanes.fields import ball_mask, load, norm_l2
    norms = []
    for amp in ("0.0", "1.0"):
        out = tmp_path / amp
        cfg = tiny(out, boundary={"n_theta": 64, "n_phi": 128},
                   reconstruct={"phantom": f"gaussian:{amp}:0.25:0,0,0", "direct_dirs": 10, "direct_offsets": 5,
                                "dirs": 3, "offsets": 5})
        ex.run_reconstruct(cfg)
        norms.append(norm_l2(load(out / "reconstruct_e2e.field"), ball_mask(64, 2.5, 1.0)))
    assert norms[0] <= 0.1 * norms[1]


def test_cli(tmp_path, capsys):
    assert main(["default-config"]) == 0
    assert "[domain]" in capsys.readouterr().out
    cfg = tiny(tmp_path / "run")
    cfg.save(tmp_path / "c.ini")
    code = main(["transform", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "out"),
                 "--workers", "1", "--seed", "7"])
    out = capsys.readouterr().out
    assert code in (0, 1) and "check fbp_rel_err" in out
    man = json.loads((tmp_path / "out" / "transform_manifest.json").read_text())
    assert man["config_hash"] == ExperimentConfig.load(tmp_path / "out" / "config.ini").hash()
    assert set(man["versions"]) >= {"cgoplanes", "numpy", "scipy"}
    (tmp_path / "bad.ini").write_text("[cgo]\nbeta = 0.4\n")
    assert main(["estimates", "--config", str(tmp_path / "bad.ini"), "--out", str(tmp_path)]) == 2
    assert main(["estimates", "--seed", "-1", "--out", str(tmp_path)]) == 2
