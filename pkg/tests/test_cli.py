import json
import subprocess
import sys

import numpy as np
import pytest

from fracbound import io, pipeline
from fracbound.cli import main


@pytest.fixture(scope="module")
def omega4(tmp_path_factory):
    path = tmp_path_factory.mktemp("dom") / "omega4.txt"
    assert main(["domain", "build", "--family", "shell_slug", "--h", "1/8", "--param", "k=4", str(path)]) == 0
    return str(path)


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "constants.cfg"
    p.write_text("A_dir = 1.5\nM_pw = 1.0\nphi22 = 0.5\n")
    return str(p)


def test_raster_round_trip():
    dom = pipeline.omega_k(5, 1 / 4)
    back = io.loads_raster(io.dumps_raster(dom))
    assert np.array_equal(back.mask, dom.mask)
    assert back.h == dom.h and back.origin == dom.origin
    assert back.punctures == dom.punctures and back.label == dom.label


@pytest.mark.parametrize("text", ["", "frgeo v2 1 1 1 0 0\n1\n", "frgeo v1 2 1 1 0 0\n1\n",
                                  "frgeo v1 2 1 1 0 0\n12\n", "frgeo v1 1 1 1 0 0\n1\npunctures: 0.5\n",
                                  "frgeo v1 1 1 x 0 0\n1\n", "frgeo v1 1 1 1 0 0\n1\nnoise\n"])
def test_malformed_raster(text):
    with pytest.raises(io.FormatError):
        io.loads_raster(text)


def test_stencil_dump_round_trip():
    from fracbound.gagliardo import kernel_2d
    K = kernel_2d(0.75, (5, 7), 0.25)
    data = io.dump_stencil(K, 0.75, 0.25)
    back, s, h = io.load_stencil(data)
    assert np.array_equal(back, K) and (s, h) == (0.75, 0.25)
    with pytest.raises(io.FormatError):
        io.load_stencil(data[:-8])
    with pytest.raises(io.FormatError):
        io.load_stencil(b"XXXX" + data[4:])


def test_csv_and_json_reports():
    rows = [{"a": 1, "b": float("inf")}, {"a": 2, "c": np.float64(0.5)}]
    assert io.to_csv(io.records(rows)).splitlines() == ["a,b,c", "1,inf,", "2,,0.5"]
    assert json.loads(io.to_json(rows))[1]["c"] == 0.5
    assert io.to_csv([]) == ""


def test_svg_plot():
    svg = io.svg_plot([{"x": 1, "y": 2.0}, {"x": 2, "y": 4.0}], "x", ["y"], log_y=True)
    assert svg.count("<circle") == 2
    with pytest.raises(ValueError):
        io.svg_plot([], "x", ["y"])


def test_domain_info(omega4, capsys):
    assert main(["domain", "info", omega4, "--format", "json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["k"] == 4 and info["punctures"] == 3


def test_eig(omega4, capsys):
    assert main(["eig", "--domain", omega4, "--s", "3/4"]) == 0
    head, row = capsys.readouterr().out.splitlines()
    assert head.startswith("s,lambda")
    lam = float(row.split(",")[1])
    assert lam == pytest.approx(pipeline_eig(omega4), rel=1e-10)


def pipeline_eig(path):
    from fracbound import spectral
    return spectral.eigenvalue(io.read_raster(path), 0.75).lam


def test_cap(tmp_path, capsys):
    sq = tmp_path / "sq.txt"
    main(["domain", "build", "--family", "square", "--h", "1/16", str(sq)])
    assert main(["cap", "--domain", str(sq), "--s", "0.75", "--disk", "0.5,0.5,0.2"]) == 0
    assert float(capsys.readouterr().out.splitlines()[1].split(",")[0]) > 0
    assert main(["cap", "--domain", str(sq), "--disk", "0.5,0.5"]) == 1


def test_fatness_and_plot(omega4, tmp_path):
    assert main(["fatness", "--domain", omega4, "--out", str(tmp_path), "--plot"]) == 0
    assert any(p.suffix == ".svg" for p in tmp_path.iterdir())


def test_verify_exit_codes(omega4, config):
    assert main(["verify", "--domain", omega4, "--s", "0.75", "--config", config]) == 0
    assert main(["verify", "--domain", omega4, "--s", "0.75", "--config", config, "--inflate", "1e6"]) == 2


def test_bound(omega4, config, capsys):
    assert main(["bound", "--domain", omega4, "--s", "0.75", "--config", config, "--format", "json"]) == 0
    assert "bound" in capsys.readouterr().out


def test_sweep_and_constants(tmp_path, config, capsys):
    assert main(["sweep", "s", "--s", "0.55,0.65", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep_s.csv").read_text().startswith("s,")
    assert main(["constants", "--config", config, "--no-estimate"]) == 0
    assert "phi22" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [["eig", "--domain", "/nonexistent/file"], ["nonsense"],
                                  ["eig", "--domain", "x", "--s", "abc"],
                                  ["domain", "build", "--family", "blob", "--h", "0.1"]])
def test_error_exit(argv):
    assert main(argv) == 1


def test_console_entry_point(omega4):
    res = subprocess.run([sys.executable, "-m", "fracbound.cli", "domain", "info", omega4],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "inradius" in res.stdout.splitlines()[0]
