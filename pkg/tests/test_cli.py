import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from per1lab import cli
from per1lab.cli import RunConfig, UsageError, main
from per1lab.imaging import read_pgm, write_image, write_pgm, write_sidecar


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


# -- exit codes ------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["pcf", "--lambda", "2", "--n", "0", "--m", "0"],
    ["render", "--lambda", "2", "--window", "1:1:0:1", "--res", "8"],
    ["render", "--lambda", "2", "--window", "0:1", "--res", "8"],
    ["render", "--lambda", "2", "--res", "1"],
    ["heights", "--lambda", "2"],
    ["gamma", "--lambda", "1.5", "--places", "2"],
    ["gamma", "--lambda", "2", "--places", "4"],
    ["capacity", "--lambda", "abc"],
    ["pcf", "--lambda", "2", "--n", "1", "--m", "0", "--threads", "0"],
    ["verify", "--config", "/nonexistent/run.json"],
    ["nosuch"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_pcf_single_root(capsys):
    assert main(["pcf", "--lambda", "2", "--n", "1", "--m", "0"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 2
    re_, im = (float(x) for x in rows[1].split(",")[:2])
    assert abs(re_) < 1e-12 and abs(im) < 1e-12


def test_pcf_degree_and_json(tmp_path, capsys):
    out = tmp_path / "roots.json"
    assert main(["pcf", "--lambda", "-4", "--n", "8", "--m", "0", "--format", "json", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["degree"] == 128 and sum(r["multiplicity"] for r in data["roots"]) == 128
    assert out.with_suffix(".config.json").exists()


def test_verify_all_pass(capsys):
    assert main(["verify"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == len(cli.CHECKS) and all(l.startswith("PASS") for l in lines)


def test_verify_equality_case(capsys):
    assert main(["verify", "--check", "h12", "--lambda", "-2"]) == 0


def test_verify_injected_fault(monkeypatch, capsys):
    monkeypatch.setitem(cli.CHECKS, "h12", lambda lam: (False, "injected"))
    assert main(["verify", "--check", "h12"]) == 1
    assert "FAIL h12: injected" in capsys.readouterr().out


def test_verify_check_raising_is_a_failure(monkeypatch, capsys):
    def boom(lam):
        raise ArithmeticError("injected")
    monkeypatch.setitem(cli.CHECKS, "claim2", boom)
    assert main(["verify", "--check", "claim2"]) == 1


def test_heights_zero_at_pcf(capsys):
    assert main(["heights", "--lambda", "2", "--t", "0", "--sign", "+"]) == 0
    rep = _json_out(capsys)
    assert rep["canonical_height"] == 0.0 and rep["config"]["subcommand"] == "heights"


def test_gamma_places_and_global_sum(capsys):
    assert main(["gamma", "--lambda", "1", "--places", "2,3,5,inf"]) == 0
    rep = _json_out(capsys)
    assert [r["place"] for r in rep["places"]] == ["2", "3", "5", "inf"]
    g = rep["global_sum"]
    assert abs(g["total"]) <= g["tail_bound"] + g["rounding_bound"]


def test_capacity_both(capsys):
    assert main(["capacity", "--lambda", "2", "--mode", "both", "--n", "8"]) == 0
    rep = _json_out(capsys)
    assert rep["gap"] < 1e-2 and all(rep["resultant_limit"]["modular_certificate"].values())


# -- configs and replay ---------------------------------------------------------------------

@given(st.builds(RunConfig, subcommand=st.sampled_from(cli.SUBCOMMANDS),
                 lam=st.none() | st.sampled_from(["2", "-4", "3/2", "1+2i"]),
                 resolution=st.none() | st.integers(2, 4096), n=st.none() | st.integers(1, 20),
                 sign=st.sampled_from(["+", "-", "both"]), tol=st.floats(1e-15, 1e-3),
                 threads=st.integers(1, 16), seed=st.integers(0, 2 ** 31),
                 options=st.dictionaries(st.sampled_from(["mode", "budget"]), st.integers(0, 99))))
def test_runconfig_round_trip(cfg):
    assert RunConfig.from_json(cfg.to_json()) == cfg


def test_runconfig_rejects_unknown_keys():
    with pytest.raises(UsageError):
        RunConfig.from_json('{"subcommand": "pcf", "colour": 1}')


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    ns = cli.build_parser().parse_args(["pcf", "--n", "1", "--m", "0"])
    assert cli.config_from_args(ns).threads == 3


def test_render_both_and_replay(tmp_path, capsys):
    out = tmp_path / "loc.png"
    argv = ["render", "--lambda", "2", "--sign", "both", "--res", "24", "--out", str(out)]
    assert main(argv) == 0
    names = {p.name for p in tmp_path.iterdir()}
    for stem in ("loc_plus", "loc_minus", "loc_overlay"):
        assert f"{stem}.png" in names and f"{stem}.json" in names
    side = json.loads((tmp_path / "loc_plus.json").read_text())
    assert side["window"] == "-3.0:3.0:-3.0:3.0" and side["resolution"] == [24, 24]
    first = {n: (tmp_path / n).read_bytes() for n in names if n.endswith(".png")}
    for n in first:
        (tmp_path / n).unlink()
    assert main(["render", "--config", str(tmp_path / "loc_overlay.json")]) == 0
    assert {n: (tmp_path / n).read_bytes() for n in first} == first


def test_render_density_mode(tmp_path, capsys):
    out = tmp_path / "mu.pgm"
    assert main(["render", "--lambda", "2", "--mode", "density", "--res", "20", "--out", str(out)]) == 0
    img = read_pgm(tmp_path / "mu_plus.pgm")
    assert img.shape == (18, 18)
    assert "mass" in json.loads((tmp_path / "mu_plus.json").read_text())


def test_config_for_other_subcommand_rejected(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(RunConfig("pcf", lam="2", n=1, m=0).to_json())
    assert main(["heights", "--config", str(p)]) == 2
    assert main(["pcf", "--config", str(p)]) == 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "per1lab", "pcf", "--n", "0", "--m", "0"],
                       capture_output=True, text=True)
    assert r.returncode == 2 and "error" in r.stderr


# -- image output -------------------------------------------------------------------------

def test_pgm_round_trip(tmp_path):
    g = (np.arange(35).reshape(5, 7) * 7).astype(np.uint8)
    assert np.array_equal(read_pgm(write_pgm(tmp_path / "a.pgm", g)), g)


def test_png_with_palette(tmp_path):
    from PIL import Image

    px = np.array([[0, 252], [253, 254]], dtype=np.uint8)
    p = write_image(tmp_path / "o.png", px, [(i, i, i) for i in range(252)] + [(255, 0, 0)] * 4)
    with Image.open(p) as im:
        assert im.mode == "P" and np.array_equal(np.asarray(im), px)
    side = write_sidecar(p, {"b": 1, "a": 2})
    assert side.suffix == ".json" and list(json.loads(side.read_text())) == ["a", "b"]
    with pytest.raises(ValueError):
        write_image(tmp_path / "x.png", px.astype(float))
