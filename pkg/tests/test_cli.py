import hashlib
import json
from pathlib import Path

import pytest

from biasforge.cli import EXIT_DATA, EXIT_OK, EXIT_SERVICE, EXIT_USAGE, main
from biasforge.factor_space import save_space
from biasforge.simulate import PlantedBiasModel, save_model

from conftest import make_space


@pytest.fixture()
def workdir(tmp_path):
    space = make_space(
        colors=(("red", (255, 0, 0)), ("blue", (0, 0, 255)), ("gray", (128, 128, 128)),
                ("orange", (255, 165, 0))),
        n_poses=2, n_positions=2, n_shapes=2, n_instructions=1,
    )
    space_path = tmp_path / "space.json"
    save_space(space, space_path)
    model = PlantedBiasModel.make(
        base_logit=0.3, main_effects={("color", "red"): 1.2, ("color", "blue"): -0.8}
    )
    model_path = tmp_path / "model.json"
    save_model(model, model_path)
    return tmp_path, space, space_path, model_path


def sha_tree(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def run_pipeline(base: Path, space_path: Path, model_path: Path, tag: str) -> Path:
    out = base / tag
    assert main([
        "generate", "--space", str(space_path), "--eval-dim", "color",
        "--out", str(out / "gen"),
    ]) == EXIT_OK
    assert main([
        "simulate", str(out / "gen" / "task_subspace_color.jsonl"),
        "--space", str(space_path), "--model", str(model_path),
        "--seed", "42", "--reps", "5", "--out", str(out / "sim"),
    ]) == EXIT_OK
    assert main([
        "analyze", "--trials", str(out / "sim" / "trials.jsonl"),
        "--space", str(space_path), "--out", str(out / "rep"),
    ]) == EXIT_OK
    assert main(["report", str(out / "rep" / "report.json")]) == EXIT_OK
    return out


def test_pipeline_composes_and_is_byte_deterministic(workdir, capsys):
    base, space, space_path, model_path = workdir
    out1 = run_pipeline(base, space_path, model_path, "run1")
    out2 = run_pipeline(base, space_path, model_path, "run2")
    capsys.readouterr()
    assert sha_tree(out1) == sha_tree(out2)


def test_generate_factorial_grid(workdir, capsys):
    base, space, space_path, _ = workdir
    out = base / "fact"
    assert main([
        "generate", "--space", str(space_path), "--factorial", "camera_pose,color",
        "--out", str(out),
    ]) == EXIT_OK
    capsys.readouterr()
    manifest = out / "factorial_camera_posexcolor.jsonl"
    lines = [json.loads(line) for line in manifest.read_text().splitlines()]
    assert len(lines) == 2 * 4
    header = json.loads((out / "factorial_camera_posexcolor.header.json").read_text())
    assert header["evaluated_dims"] == ["camera_pose", "color"]
    assert header["c_star"] is not None


def test_generate_requires_work(workdir, capsys):
    base, _, space_path, _ = workdir
    code = main(["generate", "--space", str(space_path), "--out", str(base / "empty")])
    capsys.readouterr()
    assert code == EXIT_DATA


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["generate"])  # missing required flags
    assert exc.value.code == EXIT_USAGE


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["report", "x.json", "--frobnicate"])
    assert exc.value.code == EXIT_USAGE


def test_data_error_exit_code(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code = main(["report", str(missing)])
    capsys.readouterr()
    assert code == EXIT_DATA


def test_analyze_rejects_inconsistent_log(workdir, capsys):
    base, space, space_path, model_path = workdir
    out = run_pipeline(base, space_path, model_path, "run3")
    trials_path = out / "sim" / "trials.jsonl"
    rows = [json.loads(line) for line in trials_path.read_text().splitlines()]
    rows[0]["instance_id"] = "f" * 16
    trials_path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    code = main([
        "analyze", "--trials", str(trials_path), "--space", str(space_path),
        "--out", str(base / "bad"),
    ])
    capsys.readouterr()
    assert code == EXIT_DATA


def test_screen_with_mock_and_exit_codes(workdir, capsys):
    base, space, space_path, model_path = workdir
    out = base / "screen"
    assert main([
        "generate", "--space", str(space_path), "--eval-dim", "color",
        "--out", str(out / "gen"),
    ]) == EXIT_OK
    script = out / "mock.json"
    script.write_text(json.dumps({"default_answer": "yes"}))
    assert main([
        "screen", str(out / "gen" / "task_subspace_color.jsonl"),
        "--adjudicator", f"mock:{script}", "--out", str(out / "scr"),
    ]) == EXIT_OK
    capsys.readouterr()
    state = json.loads((out / "scr" / "batch_state.json").read_text())
    assert state["phase"] == "human_review"
    assert (out / "scr" / "flagged.txt").read_text() == ""


def test_screen_service_failure_exit_code(workdir, capsys, monkeypatch):
    base, space, space_path, model_path = workdir
    out = base / "svc"
    assert main([
        "generate", "--space", str(space_path), "--eval-dim", "color",
        "--out", str(out / "gen"),
    ]) == EXIT_OK

    from biasforge import fairness

    class Dead:
        def adjudicate(self, request):
            raise fairness.AdjudicatorTransportError("down")

    monkeypatch.setattr(
        "biasforge.cli.fairness.HttpAdjudicator", lambda url: Dead()
    )
    monkeypatch.setattr("biasforge.fairness.time.sleep", lambda s: None)
    code = main([
        "screen", str(out / "gen" / "task_subspace_color.jsonl"),
        "--adjudicator", "http://example.invalid/adjudicate",
        "--out", str(out / "scr"),
    ])
    capsys.readouterr()
    assert code == EXIT_SERVICE


def test_sgl_subcommand(tmp_path, capsys):
    scene = [
        {"ID": 1, "object_type": "manipulation object", "name": "cube",
         "category": ["cube", "geometry"], "state": "solid", "color": "red",
         "size": "small", "position": "left"},
        {"ID": 2, "object_type": "receiver object", "name": "cube",
         "category": ["cube", "geometry"], "state": "solid", "color": "red",
         "size": "big", "position": "right"},
        {"ID": 3, "object_type": "other object", "name": "pyramid",
         "category": ["pyramid", "geometry"], "state": "solid", "color": "blue",
         "size": "normal", "position": "middle"},
    ]
    scene_path = tmp_path / "scene.json"
    scene_path.write_text(json.dumps(scene))
    code = main(["sgl", str(scene_path), "stack the cube", "--out", str(tmp_path / "trace")])
    captured = capsys.readouterr()
    assert code == EXIT_OK
    assert captured.out.strip() == "put the small red cube on the larger cube"
    trace = json.loads((tmp_path / "trace" / "sgl_trace.json").read_text())
    assert trace["attributes"] == [["color", "red"], ["size", "small"]]


def test_analyze_zero_variance_log_renders_zero_cv(workdir, capsys):
    """An all-success log has identical rates everywhere: CV is exactly 0.00."""
    base, space, space_path, _ = workdir
    sure_model = base / "sure.json"
    save_model(PlantedBiasModel.make(base_logit=40.0), sure_model)
    out = base / "zero"
    assert main(["generate", "--space", str(space_path), "--eval-dim", "color",
                 "--out", str(out / "gen")]) == EXIT_OK
    assert main(["simulate", str(out / "gen" / "task_subspace_color.jsonl"),
                 "--space", str(space_path), "--model", str(sure_model),
                 "--seed", "1", "--reps", "5", "--out", str(out / "sim")]) == EXIT_OK
    assert main(["analyze", "--trials", str(out / "sim" / "trials.jsonl"),
                 "--space", str(space_path), "--out", str(out / "rep")]) == EXIT_OK
    capsys.readouterr()
    rows = (out / "rep" / "table.csv").read_text().splitlines()
    header, data = rows[0].split(","), rows[1].split(",")
    assert data[header.index("color_cv")] == "0.00"
    assert data[header.index("color_sr")] == "100.00"


def test_simulate_worker_count_does_not_change_log(workdir):
    """The simulation stream is keyed per (instance, repetition): chunking is irrelevant."""
    from biasforge.contexts import task_subspace
    from biasforge.metrics import trial_to_row
    from biasforge.simulate import SimRunSpec, load_model, simulate_trials

    base, space, space_path, model_path = workdir
    model = load_model(model_path)
    sub = task_subspace(space, "color")
    spec = SimRunSpec.make(model, sub, repetitions=5, seed=42)
    logs = []
    for workers in (1, 8):
        rows = "".join(
            json.dumps(trial_to_row(t), sort_keys=True) + "\n"
            for t in simulate_trials(spec, workers=workers)
        )
        logs.append(hashlib.sha256(rows.encode()).hexdigest())
    assert logs[0] == logs[1]
