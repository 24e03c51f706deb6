import orjson
import pytest
import yaml
from typer.testing import CliRunner

from app.cli import app
from core.errors import ConfigError, TrainingError
from core.records import read_records
from core.training.trainer import Trainer
from core.workflow import recursion_limit, run_k_sweep, run_seeds, run_training

runner = CliRunner()


def _write_config(cfg, path):
    path.write_text(yaml.safe_dump(cfg.model_dump(mode="json")))
    return path


def test_recursion_limit_covers_every_episode(small_cfg):
    assert recursion_limit(small_cfg) == 3 * 30 + 10


def test_training_run_writes_artifacts(tmp_path, small_cfg):
    state = run_training(small_cfg, 0, tmp_path / "run")
    report = state["final_report"]
    assert report["steps"] == small_cfg.total_steps()
    assert report["error"] is None
    assert report["episodes"] >= 2
    assert (tmp_path / "run" / "checkpoint.bin").exists()
    assert orjson.loads((tmp_path / "run" / "report.json").read_bytes())["seed"] == 0

    records = read_records(tmp_path / "run" / "metrics.jsonl")
    assert records[0]["kind"] == "run"
    evals = [r for r in records if r["kind"] == "eval"]
    assert len(evals) >= 2
    assert evals[-1]["step"] == small_cfg.total_steps()
    assert report["last_eval"] == evals[-1]


def test_same_seed_gives_identical_bytes(tmp_path, small_cfg):
    run_training(small_cfg, 3, tmp_path / "a")
    run_training(small_cfg, 3, tmp_path / "b")
    for name in ("metrics.jsonl", "checkpoint.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_train_records_when_enabled(tmp_path, small_cfg):
    cfg = small_cfg.with_updates(**{"training.metrics_every": 1})
    run_training(cfg, 0, tmp_path)
    train = [r for r in read_records(tmp_path / "metrics.jsonl") if r["kind"] == "train"]
    assert train
    assert {"pred_nll", "sparsity", "quant_sg", "commit", "total"} <= set(train[0]["loss"])
    assert set(train[0]["grad_norms"]) == {"features", "encoder", "decoder", "heads"}


def test_training_error_is_recorded(tmp_path, small_cfg, monkeypatch):
    def explode(self, batch):
        raise TrainingError("non-finite loss at step 0", {"step": 0, "total": float("nan")})

    monkeypatch.setattr(Trainer, "train_step", explode)
    cfg = small_cfg.with_updates(**{"training.warmup_updates": 1})
    report = run_training(cfg, 0, tmp_path)["final_report"]
    assert report["error"]["message"].startswith("non-finite loss")
    assert report["checkpoint"] is None
    kinds = [r["kind"] for r in read_records(tmp_path / "metrics.jsonl")]
    assert kinds == ["run", "error"]


def test_training_traces_every_collected_transition(tmp_path, small_cfg):
    state = run_training(small_cfg, 0, tmp_path / "traced", traces=True)
    records = read_records(tmp_path / "traced" / "traces.jsonl")
    assert len(records) == small_cfg.total_steps()
    assert state["final_report"]["traces"] == str(tmp_path / "traced" / "traces.jsonl")
    layout = state["env"].layout
    first = records[0]
    assert len(first["state"]) == layout.state_dim and len(first["next_state"]) == layout.state_dim
    assert len(first["action"]) == layout.action_dim
    assert {r["context"] for r in records} <= {"fork", "full"}

    run_training(small_cfg, 0, tmp_path / "plain")
    assert not (tmp_path / "plain" / "traces.jsonl").exists()
    plain = (tmp_path / "plain" / "metrics.jsonl").read_bytes()
    assert plain == (tmp_path / "traced" / "metrics.jsonl").read_bytes()


def test_k_sweep_aggregates_each_codebook_size(tmp_path, small_cfg):
    summary = run_k_sweep(small_cfg, ks=(1, 2), out_root=tmp_path)
    assert list(summary) == [1, 2]
    for k, agg in summary.items():
        assert agg["codebook_size"] == k
        assert agg["seeds"] == [0]
        evals = [r for r in read_records(tmp_path / f"k{k}" / "0" / "metrics.jsonl") if r["kind"] == "eval"]
        assert evals[-1]["codebook_size"] == k
    assert summary[1]["config_hash"] != summary[2]["config_hash"]


def test_k_sweep_rejects_bad_requests(small_cfg):
    with pytest.raises(ConfigError):
        run_k_sweep(small_cfg.with_updates(method="dense"), ks=(1,))
    with pytest.raises(ConfigError):
        run_k_sweep(small_cfg, ks=())
    with pytest.raises(ConfigError):
        run_k_sweep(small_cfg, ks=(0,))


@pytest.mark.slow
def test_parallel_seeds_match_sequential(tmp_path, small_cfg):
    cfg = small_cfg.with_updates(seeds=[0, 1])
    seq = run_seeds(cfg, tmp_path / "seq", workers=1)
    par = run_seeds(cfg, tmp_path / "par", workers=2)
    assert [r["last_eval"] for r in seq] == [r["last_eval"] for r in par]
    for seed in ("0", "1"):
        a = (tmp_path / "seq" / seed / "metrics.jsonl").read_bytes()
        b = (tmp_path / "par" / seed / "metrics.jsonl").read_bytes()
        assert a == b


# --- CLI ----------------------------------------------------------------------


def test_cli_gradcheck_passes():
    result = runner.invoke(app, ["gradcheck", "--instances", "5"])
    assert result.exit_code == 0, result.output
    assert "FAIL" not in result.output


def test_cli_oracle_bundled_system(tmp_path):
    out = tmp_path / "oracle.jsonl"
    result = runner.invoke(app, ["oracle", "gated_copy", "--lam", "0.001", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "PASS" in result.output
    assert [r["kind"] for r in read_records(out)] == ["oracle", "oracle_summary"]


def test_cli_oracle_reports_faithfulness():
    result = runner.invoke(app, ["oracle", "entangled", "--lam", "0.001"])
    assert result.exit_code == 0, result.output
    assert "faithfulness" in result.output


def test_cli_errors_exit_with_code_two(tmp_path):
    assert runner.invoke(app, ["oracle", str(tmp_path / "missing.txt")]).exit_code == 2
    assert runner.invoke(app, ["train"]).exit_code == 2
    result = runner.invoke(app, ["eval", "--checkpoint", str(tmp_path / "none.bin"), "--profile", "magnetic2d"])
    assert result.exit_code == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("env: chemical-full-fork\nmodel:\n  codebook_sizes: 3\n")
    result = runner.invoke(app, ["train", "--config", str(bad)])
    assert result.exit_code == 2
    assert "model.codebook_sizes" in result.output


def test_cli_train_eval_dump(tmp_path, small_cfg):
    config = _write_config(small_cfg, tmp_path / "small.yaml")
    result = runner.invoke(app, ["train", "--config", str(config), "--out", str(tmp_path / "runs")])
    assert result.exit_code == 0, result.output
    ckpt = tmp_path / "runs" / "0" / "checkpoint.bin"
    assert ckpt.exists()

    result = runner.invoke(
        app, ["eval", "--checkpoint", str(ckpt), "--config", str(config), "--episodes", "0", "--n-noisy", "2"]
    )
    assert result.exit_code == 0, result.output
    assert "accuracy[n=2]" in result.output

    traces = tmp_path / "eval_traces.jsonl"
    result = runner.invoke(
        app, ["eval", "--checkpoint", str(ckpt), "--config", str(config), "--episodes", "1", "--traces", str(traces)]
    )
    assert result.exit_code == 0, result.output
    records = read_records(traces)
    assert records and records[-1]["done"] is True

    lcg_dir = tmp_path / "lcgs"
    result = runner.invoke(app, ["dump-lcg", "--checkpoint", str(ckpt), "--config", str(config), "--out", str(lcg_dir)])
    assert result.exit_code == 0, result.output
    assert (lcg_dir / "code_0.txt").exists() and (lcg_dir / "true_fork.txt").exists()
