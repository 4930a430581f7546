import json
import os
import subprocess
import sys

import pytest

from synthforge.cli import EXIT_USAGE, main
from synthforge.config import SAMPLE_CONFIG, SEED_ENV, load_config, parse_config
from synthforge.errors import EXIT_CODES, ConfigError
from synthforge.meshio import save_mesh
from synthforge.demo import box_mesh

SMALL = """\
seed: 3
output_root: out
camera: {width: 80, height: 60, fx: 90, fy: 90, cx: 40, cy: 30}
defaults: {num_scenes: 1, views_per_scene: 2}
procedures: {P1: {}, P4: {}}
mix_total_images: 4
mixes:
  M: {percent: {P1: 50, P4: 50}}
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_defaults():
    cfg = parse_config({}, "/base", env={})
    assert sorted(cfg.procedures) == ["P1", "P2", "P3", "P4", "P5"]
    assert cfg.seed == 0 and cfg.split_ratio == 0.7
    assert (cfg.intrinsics.width, cfg.intrinsics.height) == (640, 480)
    assert sorted(cfg.mixes) == ["C1", "C2", "C3", "C4", "C5"]
    assert cfg.output_root == os.path.normpath("/base/out")


def test_env_seed_override(tmp_path):
    p = write(tmp_path, SMALL)
    assert load_config(p, env={SEED_ENV: "77"}).seed == 77
    assert load_config(p, env={}).procedure("P1").seed == 3
    with pytest.raises(ConfigError):
        load_config(p, env={SEED_ENV: "abc"})


@pytest.mark.parametrize("text", [
    "bogus: 1\n",
    "procedures: {P9: {}}\n",
    "procedures: {P1: {num_scenes: 0}}\n",
    "procedures: {P1: {colour: red}}\n",
    "textures_dir: nowhere\n",
    "assembly: nowhere\n",
    "mixes: {X: {percent: {P1: 60, P2: 60}}}\n",
    "[1, 2]\n",
    "a: [\n",
])
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text), env={})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_help_lists_exit_codes():
    r = subprocess.run([sys.executable, "-m", "synthforge", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for name, code in EXIT_CODES.items():
        assert name in r.stdout and str(code) in r.stdout
    assert SEED_ENV in r.stdout


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["generate"])
    assert e.value.code == EXIT_USAGE


def test_generate_mix_visualize_evaluate(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["generate", "--config", cfg, "--procedure", "P1", "-q"]) == 0
    assert main(["generate", "--config", cfg, "--procedure", "P4", "-q"]) == 0
    assert main(["mix", "--config", cfg, "--combination", "M"]) == 0
    out = tmp_path / "out"
    assert sorted(os.listdir(out)) == ["M", "P1", "P4"]
    assert main(["visualize", "--dataset", str(out / "M"), "--mode", "2d"]) == 0
    assert len(os.listdir(out / "M" / "viz2d")) == 4

    coco = json.loads((out / "P1" / "coco_annotations.json").read_text())
    dets = [{"image_id": a["image_id"], "category_id": a["category_id"], "bbox": a["bbox"], "score": 1.0}
            for a in coco["annotations"]]
    (tmp_path / "dets.json").write_text(json.dumps(dets))
    capsys.readouterr()
    assert main(["evaluate", "--gt", str(out / "P1"), "--dets", str(tmp_path / "dets.json")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["mAP@0.5"] == 1.0 and rep["mAP@[0.5:0.95]"] == 1.0

    matrix = {"sets": {"P1": "out/P1", "real": "out/P1"}, "models": {"A": {"P1": "dets.json", "real": "dets.json"}}}
    (tmp_path / "matrix.json").write_text(json.dumps(matrix))
    assert main(["evaluate", "--matrix", str(tmp_path / "matrix.json"), "--csv", str(tmp_path / "m.csv")]) == 0
    text = capsys.readouterr().out
    assert "Average Sim" in text and "Average Real" in text
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "Validated on,A"


def test_error_exit_codes(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["generate", "--config", str(tmp_path / "missing.yaml"), "--procedure", "P1"]) == EXIT_CODES["ConfigError"]
    assert main(["generate", "--config", cfg, "--procedure", "P2", "-q"]) == EXIT_CODES["ConfigError"]
    assert main(["mix", "--config", cfg, "--combination", "M"]) == EXIT_CODES["InsufficientImagesError"]
    (tmp_path / "bad.stl").write_bytes(b"solid x\nfacet normal 0 0 1\nouter loop\nvertex 0 0\n")
    assert main(["meshinfo", str(tmp_path / "bad.stl"), "--format", "stl-ascii"]) == EXIT_CODES["MeshFormatError"]


def test_meshinfo(tmp_path, capsys):
    save_mesh(box_mesh((1, 1, 1)), str(tmp_path / "cube.ply"))
    assert main(["meshinfo", str(tmp_path / "cube.ply")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["vertices"] == 8 and info["triangles"] == 12
    assert info["diameter"] == pytest.approx(3 ** 0.5)


def test_init_demo(tmp_path, capsys):
    assert main(["init-demo", str(tmp_path / "demo")]) == 0
    cfg = load_config(tmp_path / "demo" / "config.yaml", env={})
    assert cfg.mix("C1").total_images == 10
    assert (tmp_path / "demo" / "config.yaml").read_text() == SAMPLE_CONFIG
