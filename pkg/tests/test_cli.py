import json
import os

import pytest

from segface.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "run.toml"
    config.write_text(
        f'data_dir = "{root / "data"}"\n'
        f'model = "{root / "model.json"}"\n'
        f'output_dir = "{root / "out"}"\n'
        "synth_frames = 60\n"
        "svm_epochs = 30\n"
        "bench_frames = 5\n"
    )
    assert main(["synth", "--config", str(config)]) == 0
    return root, str(config)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_zero_noise_eval_is_perfect(workspace, capsys):
    root, config = workspace
    assert run(capsys, "train", "--config", config)[0] == 0
    code, out, _ = run(capsys, "eval", "--config", config)
    assert code == 0 and out.startswith("F1=1.0000")
    report = json.loads((root / "out" / "report.json").read_text())
    assert report["metrics"]["f1"] == 1.0
    assert report["config"]["zeta"] == 20 and report["config"]["resolved_kinds"][0] == "EP"
    assert (root / "out" / "curve.csv").read_text().startswith("theta,tp,fp,fn,tn")


def test_detect_lines(workspace, capsys):
    root, config = workspace
    run(capsys, "train", "--config", config)
    code, out, _ = run(capsys, "detect", "--config", config, "split=all")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 60
    anns = [json.loads(line) for line in (root / "data" / "annotations.jsonl").read_text().splitlines()]
    for line, ann in zip(lines, anns):
        name, *rest = line.split()
        assert name == ann["image"]
        if ann["face"] is None:
            assert rest == ["NONE"]
        else:
            assert len(rest) == 5


def test_jobs_do_not_change_results(workspace, capsys):
    root, config = workspace
    noisy = ["fixture_miss_rate=0.1", "fixture_fp_rate=1.0", "fixture_jitter=0.03", "fixture_scale_jitter=0.15",
             f"model={root / 'noisy.json'}"]
    assert run(capsys, "train", "--config", config, *noisy)[0] == 0
    one = run(capsys, "detect", "--config", config, *noisy)
    four = run(capsys, "detect", "--config", config, "--jobs", "4", *noisy)
    assert one[0] == four[0] == 0 and one[1] == four[1]


def test_bench_writes_timing(workspace, capsys):
    root, config = workspace
    run(capsys, "train", "--config", config)
    code, out, _ = run(capsys, "bench", "--config", config)
    assert code == 0
    bench = json.loads((root / "out" / "bench.json").read_text())
    assert bench["timing"]["frames"] == 5
    assert set(bench["cascade_scaling"]) == {"one_kind", "nine_kinds", "ratio", "sublinear"}


def test_no_face_training_fails(workspace, capsys, tmp_path):
    root, config = workspace
    lines = (root / "data" / "annotations.jsonl").read_text().splitlines()
    kept = [json.loads(line) for line in lines if json.loads(line)["face"] is None]
    ann = tmp_path / "noface.jsonl"
    ann.write_text("".join(json.dumps({**r, "image": str(root / "data" / r["image"]), "split": "train"}) + "\n"
                           for r in kept))
    code, _, err = run(capsys, "train", "--config", config, f"annotations={ann}", f"model={tmp_path / 'm.json'}")
    assert code != 0 and "error" in err
    assert not os.path.exists(tmp_path / "m.json")


def test_errors_exit_nonzero(workspace, capsys, tmp_path):
    root, config = workspace
    run(capsys, "train", "--config", config)
    cases = [
        ["eval", "--config", config, f"model={tmp_path / 'missing.json'}"],
        ["eval", "--config", config, "active_kinds=Cbest"],
        ["eval", "--config", str(tmp_path / "missing.toml")],
        ["eval", "--config", config, "bogus_key=1"],
        ["train", "--config", config, f"data_dir={tmp_path}"],
        ["detect", "--config", config, "--jobs", "0"],
    ]
    for argv in cases:
        code, _, err = run(capsys, *argv)
        assert code == 2 and err.startswith(f"segface {argv[0]}: error:"), argv
    assert "mismatch" in run(capsys, *cases[1])[2]


def test_seed_flag_overrides_config(workspace, capsys, tmp_path):
    root, config = workspace
    out = tmp_path / "d"
    assert run(capsys, "synth", "--config", config, "--seed", "7", f"data_dir={out}", "synth_frames=5")[0] == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["split_seed"] == 7 and manifest["config"]["seed"] == 7
