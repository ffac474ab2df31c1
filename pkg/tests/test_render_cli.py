import json
import subprocess
import sys

import numpy as np
import pytest

from semslam.cli import main, metrics_table
from semslam.metrics import macro_iou, precision_recall_ap
from semslam.ontology import UNKNOWN
from semslam.render import PaletteError, RenderSpec, default_palette, read_pgm, render_pgm, render_svg
from semslam.scenario import generate_scenario
from semslam.trial import OUTPUT_FILES, RENDER_FILES, grid_from_csv, grid_to_csv


def full(label, n=24):
    return np.full((n, n), label, dtype=object)


def halves(a, b):
    g = full(a)
    g[:, 12:] = b
    return g


def test_uniform_image():
    img = read_pgm(render_pgm(full("A"), palette={"A": 77, UNKNOWN: 255}))
    assert img.shape == (240, 240) and (img == 77).all()


def test_side_by_side_layout():
    pal = {"A": 10, "B": 200, UNKNOWN: 255}
    img = read_pgm(render_pgm(full("A"), full("B"), pal, RenderSpec(px_per_cell=10, gap=10)))
    assert img.shape == (240, 490)
    assert (img[:, :240] == 10).all() and (img[:, 240:250] == 255).all() and (img[:, 250:] == 200).all()


def test_north_up():
    g = full("A")
    g[0, :] = "B"  # bottom row of the world
    img = read_pgm(render_pgm(g, palette={"A": 1, "B": 2, UNKNOWN: 255}, spec=RenderSpec(px_per_cell=1)))
    assert (img[-1] == 2).all() and (img[0] == 1).all()


def test_whitespace_gray_levels_survive():
    pal = {"A": 32, "B": 10, UNKNOWN: 255}
    img = read_pgm(render_pgm(halves("A", "B"), palette=pal))
    assert (img[:, :120] == 32).all() and (img[:, 120:] == 10).all()


def test_palette_errors():
    with pytest.raises(PaletteError):
        render_pgm(full("A"), palette={UNKNOWN: 255})
    with pytest.raises(ValueError):
        RenderSpec(px_per_cell=0)
    pal = default_palette(["A", "B", UNKNOWN])
    assert pal[UNKNOWN] == 255 and len(set(pal.values())) == 3


def test_render_deterministic():
    g = halves("A", "B")
    assert render_pgm(g, g) == render_pgm(g.copy(), g.copy())
    spec = generate_scenario("quadrant", 5, seed=1)
    assert render_svg(spec) == render_svg(spec)
    assert render_svg(spec).startswith("<svg")


# ---------------------------------------------------------------- cli

def test_gen_scenario(tmp_path, capsys):
    out = tmp_path / "q.json"
    assert main(["gen-scenario", "--preset", "quadrant", "--density", "20", "--seed", "7",
                 "--out", str(out)]) == 0
    assert "80 features" in capsys.readouterr().out
    first = out.read_bytes()
    main(["--seed", "7", "gen-scenario", "--preset", "quadrant", "--density", "20", "--out", str(out)])
    assert out.read_bytes() == first
    assert len(json.loads(first)["features"]) == 80


def test_usage_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["gen-scenario", "--preset", "atlantis"])
    assert err.value.code == 2
    assert main(["run"]) == 2
    proc = subprocess.run([sys.executable, "-m", "semslam.cli", "gen-scenario", "--preset", "nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "invalid choice" in proc.stderr


def test_runtime_failures_exit_1(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenario": {"preset": "small"}, "alpha": 2}))
    assert main(["run", "--config", str(bad)]) == 1


def test_run_artifacts(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--preset", "city", "--seed", "3", "--out", str(out)]) in (0, 1)
    for name in OUTPUT_FILES + RENDER_FILES:
        assert (out / name).is_file(), name
    assert len(OUTPUT_FILES) == 7
    header = (out / "report.csv").read_text().splitlines()[0]
    assert header.startswith("scenario,seed")
    img = read_pgm((out / "compare_grid.pgm").read_bytes())
    assert img.shape == (240, 490)


def test_run_no_render(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--preset", "small", "--seed", "1", "--no-render", "--out", str(out)]) == 0
    assert all((out / n).is_file() for n in OUTPUT_FILES)
    assert not any((out / n).exists() for n in RENDER_FILES)


def test_run_config_seed_determinism(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": {"preset": "small"}, "sigma_drift": 0.0005}))
    outs = []
    for k in range(2):
        o = tmp_path / f"o{k}"
        assert main(["run", "--config", str(cfg), "--seed", "42", "--out", str(o), "--no-render"]) == 0
        outs.append(o)
    for name in ("report.csv", "pred_grid_grid.csv", "pred_grid_branch.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_metrics_command_matches_module(tmp_path, capsys):
    rng = np.random.default_rng(0)
    labels = np.array(["A", "B", UNKNOWN], dtype=object)
    pred = labels[rng.integers(0, 3, (24, 24))]
    truth = labels[rng.integers(0, 2, (24, 24))]
    conf = np.round(rng.uniform(0, 1, (24, 24)), 3)
    (tmp_path / "p.csv").write_text(grid_to_csv(pred, conf))
    (tmp_path / "t.csv").write_text(grid_to_csv(truth))
    out = tmp_path / "m.csv"
    assert main(["metrics", "--pred", str(tmp_path / "p.csv"), "--truth", str(tmp_path / "t.csv"),
                 "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    rows = {r.split(",")[0]: r.split(",") for r in out.read_text().splitlines()}
    direct = precision_recall_ap(pred, conf, truth)
    m_iou, per = macro_iou(pred, truth)
    for c in ("A", "B"):
        assert float(rows[c][1]) == per[c]
        assert float(rows[c][2]) == direct["per_class"][c]["ap"]
    assert float(rows["macro"][1]) == m_iou and float(rows["macro"][2]) == direct["mAP"]
    assert float(rows["micro"][2]) == direct["micro_ap"]
    assert printed == metrics_table(pred, conf, truth)[0]


def test_metrics_identity_and_disjoint(tmp_path, capsys):
    g = halves("A", "B")
    (tmp_path / "g.csv").write_text(grid_to_csv(g, np.ones((24, 24))))
    main(["metrics", "--pred", str(tmp_path / "g.csv"), "--truth", str(tmp_path / "g.csv")])
    assert "1.0000" in capsys.readouterr().out
    (tmp_path / "h.csv").write_text(grid_to_csv(halves("B", "A"), np.ones((24, 24))))
    out = tmp_path / "m.csv"
    main(["metrics", "--pred", str(tmp_path / "h.csv"), "--truth", str(tmp_path / "g.csv"),
          "--out", str(out)])
    rows = {r.split(",")[0]: r.split(",") for r in out.read_text().splitlines()}
    assert float(rows["A"][1]) == 0.0 and float(rows["B"][1]) == 0.0


def test_metrics_size_mismatch(tmp_path):
    (tmp_path / "a.csv").write_text(grid_to_csv(full("A")))
    (tmp_path / "b.csv").write_text(grid_to_csv(full("A", 12)))
    assert main(["metrics", "--pred", str(tmp_path / "a.csv"), "--truth", str(tmp_path / "b.csv")]) == 1


def test_render_command(tmp_path):
    (tmp_path / "t.csv").write_text(grid_to_csv(full("Commercial")))
    out = tmp_path / "r.pgm"
    assert main(["render", "--truth", str(tmp_path / "t.csv"), "--out", str(out)]) == 0
    img = read_pgm(out.read_bytes())
    assert img.shape == (240, 240) and len(np.unique(img)) == 1
    pal = tmp_path / "pal.json"
    pal.write_text(json.dumps({"Residential": 3}))
    assert main(["render", "--truth", str(tmp_path / "t.csv"), "--palette", str(pal),
                 "--out", str(out)]) == 1
    assert main(["gen-scenario", "--preset", "small", "--out", str(tmp_path / "s.json")]) == 0
    svg = tmp_path / "m.svg"
    assert main(["render", "--format", "svg", "--scenario", str(tmp_path / "s.json"),
                 "--out", str(svg)]) == 0
    assert svg.read_text().startswith("<svg")


def test_batch_command(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": {"preset": "small"}}))
    out = tmp_path / "b"
    assert main(["batch", "--config", str(cfg), "--sweep", "seed=1,2,3", "--out", str(out)]) == 0
    lines = (out / "batch.csv").read_text().splitlines()
    assert len(lines) == 4 and [l.split(",")[1] for l in lines[1:]] == ["1", "2", "3"]
    assert main(["batch", "--config", str(cfg), "--sweep", "seed"]) == 2


def test_grid_csv_round_trip():
    g = halves("A", UNKNOWN)
    labels, conf = grid_from_csv(grid_to_csv(g))
    assert (labels == g).all() and (conf == 0).all()
