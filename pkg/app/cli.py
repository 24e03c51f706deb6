from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from core.autodiff.gradcheck import run_gradcheck
from core.autodiff.rng import Stream, make_rng
from core.config import ExperimentConfig, get_settings, load_config, profile_config
from core.envs import make_env
from core.errors import ConfigError, FcdlError
from core.evaluation.pipeline import dump_lcgs, evaluate
from core.logging_utils import configure_logging
from core.oracle import DEFAULT_LAMBDAS, bundled_systems, check_system, empirical_system, load_bundled, load_system
from core.records import RecordWriter
from core.training.checkpoint import load_checkpoint, restore_model
from core.training.trainer import build_model
from core.workflow import run_seeds

app = typer.Typer(add_completion=False, help="Fine-grained causal dynamics learning experiments.")
console = Console()


@app.callback()
def _setup() -> None:
    configure_logging(get_settings().log_level)


@contextmanager
def _diagnostics() -> Iterator[None]:
    """Map library errors to a one-line message and exit code 2."""
    try:
        yield
    except FcdlError as err:
        console.print(f"[bold red]error:[/] {escape(str(err))}")
        raise typer.Exit(code=2)


def _resolve_config(config: Optional[Path], profile: Optional[str], scale: str) -> ExperimentConfig:
    if config is not None:
        return load_config(config)
    if profile is not None:
        return profile_config(profile, scale)
    raise ConfigError("pass --config or --profile", ["env"])


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


@app.command()
def train(
    config: Optional[Path] = typer.Option(None, "--config", help="YAML experiment config."),
    profile: Optional[str] = typer.Option(None, "--profile", help="Environment profile when no config is given."),
    scale: str = typer.Option("mini", "--scale"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Run only this seed."),
    out: Optional[Path] = typer.Option(None, "--out", help="Output root; one directory per seed."),
    workers: Optional[int] = typer.Option(None, "--workers"),
    traces: bool = typer.Option(False, "--traces", help="Also write every collected transition to <run>/traces.jsonl."),
) -> None:
    """Train every configured seed and write metrics, checkpoints and a final report."""
    with _diagnostics():
        cfg = _resolve_config(config, profile, scale)
        if seed is not None:
            cfg = cfg.with_updates(seeds=[seed])
        settings = get_settings()
        results = run_seeds(cfg, out or Path(settings.output_root), workers or settings.workers, traces)

    table = Table(title=f"{cfg.env} / {cfg.method}")
    for col in ("seed", "steps", "episodes", "reward", "success", "shd", "status"):
        table.add_column(col)
    failed = False
    for r in results:
        last = r.get("last_eval") or {}
        failed |= r.get("error") is not None
        table.add_row(
            str(r["seed"]),
            str(r["steps"]),
            str(r["episodes"]),
            _fmt(last.get("reward_mean")),
            _fmt(last.get("success_rate")),
            _fmt(last.get("shd")),
            "[red]error[/]" if r.get("error") else "[green]ok[/]",
        )
    console.print(table)
    if failed:
        raise typer.Exit(code=1)


def _load_model(cfg: ExperimentConfig, checkpoint: Path):
    ckpt = load_checkpoint(checkpoint)
    seed = int(ckpt.header.get("seed", 0))
    env = make_env(cfg, seed)
    model = restore_model(ckpt, build_model(cfg, env, seed))
    return ckpt, model, env, seed


@app.command("eval")
def eval_cmd(
    checkpoint: Path = typer.Option(..., "--checkpoint"),
    config: Optional[Path] = typer.Option(None, "--config"),
    profile: Optional[str] = typer.Option(None, "--profile"),
    scale: str = typer.Option("mini", "--scale"),
    n_noisy: Optional[List[int]] = typer.Option(None, "--n-noisy", help="Noisy-variable counts (repeatable)."),
    episodes: Optional[int] = typer.Option(None, "--episodes"),
    out: Optional[Path] = typer.Option(None, "--out", help="Append the report to this JSONL file."),
    traces: Optional[Path] = typer.Option(None, "--traces", help="Write the test-episode transitions to this JSONL file."),
) -> None:
    """Evaluate a checkpoint: SHD, accuracy per noisy count, histogram, episode reward."""
    with _diagnostics():
        cfg = _resolve_config(config, profile, scale)
        ckpt, model, _, seed = _load_model(cfg, checkpoint)
        counts = n_noisy or cfg.evaluation.noisy_counts
        tracer = RecordWriter(traces) if traces is not None else None
        report = evaluate(
            model,
            cfg,
            seed,
            step=int(ckpt.header.get("step", 0)),
            episode=int(ckpt.header.get("episode", 0)),
            noisy_counts=counts,
            episodes=episodes,
            episode_noisy=max(counts) if cfg.is_chemical and counts else 0,
            trace=(lambda t: tracer.write(t.to_record())) if tracer is not None else None,
        )
        if out is not None:
            RecordWriter(out, truncate=False).write(report.to_record())

    table = Table(title=f"{cfg.env} / {cfg.method} @ step {report.step}")
    table.add_column("metric")
    table.add_column("value")
    table.add_row("shd", _fmt(report.shd))
    for name, value in report.shd_per_context.items():
        table.add_row(escape(f"shd[{name}]"), _fmt(value))
    for n, value in report.accuracy.items():
        table.add_row(escape(f"accuracy[n={n}]"), _fmt(value))
    for name, value in report.mae.items():
        table.add_row(escape(f"mae[{name}]"), _fmt(value))
    table.add_row("perplexity", _fmt(report.perplexity))
    table.add_row("reward", f"{_fmt(report.reward_mean)} ± {_fmt(report.reward_std)}")
    table.add_row("success", _fmt(report.success_rate))
    console.print(table)
    if get_settings().show_tech_details:
        for name, counts_row in report.histogram.items():
            console.print(escape(f"histogram[{name}]: {counts_row}"))


@app.command("dump-lcg")
def dump_lcg(
    checkpoint: Path = typer.Option(..., "--checkpoint"),
    out: Path = typer.Option(Path("lcgs"), "--out"),
    config: Optional[Path] = typer.Option(None, "--config"),
    profile: Optional[str] = typer.Option(None, "--profile"),
    scale: str = typer.Option("mini", "--scale"),
) -> None:
    """Write every code's eval LCG and the true context LCGs as graph text files."""
    with _diagnostics():
        cfg = _resolve_config(config, profile, scale)
        _, model, env, _ = _load_model(cfg, checkpoint)
        written = dump_lcgs(model, env, out)
    for path in written:
        console.print(str(path))


@app.command()
def oracle(
    system: str = typer.Argument(..., help="Bundled system name or path to a system file."),
    k: Optional[int] = typer.Option(None, "--k", help="Subgroup count (default: number of contexts)."),
    lam: Optional[List[float]] = typer.Option(None, "--lam", help="Sparsity weights (repeatable)."),
    draws: Optional[int] = typer.Option(None, "--draws", help="Score an empirical system from this many samples."),
    seed: int = typer.Option(0, "--seed"),
    out: Optional[Path] = typer.Option(None, "--out", help="Append verdict records to this JSONL file."),
) -> None:
    """Enumerate the score optimum of a small tabular system and check identifiability."""
    with _diagnostics():
        sys_ = load_bundled(system) if system in bundled_systems() else load_system(system)
        if draws:
            sys_ = empirical_system(sys_, draws, make_rng(seed, Stream.ORACLE))
        report = check_system(sys_, k, lam or DEFAULT_LAMBDAS)
        if out is not None:
            RecordWriter(out, truncate=False).write_many(report.to_records())

    table = Table(title=f"{sys_.name} (K={report.k})")
    for col in ("lambda", "optima", "score", "refines contexts", "true LCGs", "sparser alternatives", "verdict"):
        table.add_column(col)
    for v in report.verdicts:
        table.add_row(
            f"{v.lam:g}",
            str(len(v.optima)),
            f"{v.optima[0].score:.6f}",
            str(v.refines_contexts),
            str(v.graphs_are_true_lcgs),
            str(v.sparsity_violations),
            "[green]PASS[/]" if v.passed else "[red]FAIL[/]",
        )
    console.print(table)
    best = report.verdicts[0].optima[0]
    console.print(f"assignment: {best.assignment.tolist()}")
    for z, graph in enumerate(best.graphs):
        console.print(f"G_{z}:\n{graph.to_text()}")
    console.print(f"eta: {report.eta if report.eta is not None else 'none (no tested lambda passes)'}")
    for msg in report.faithfulness_errors:
        console.print(f"[yellow]faithfulness:[/] {escape(msg)}")


@app.command()
def gradcheck(
    seed: int = typer.Option(0, "--seed"),
    instances: int = typer.Option(100, "--instances"),
    tol: float = typer.Option(1e-5, "--tol"),
) -> None:
    """Central finite-difference check of every differentiable op."""
    rows = run_gradcheck(seed=seed, instances=instances, tol=tol)
    table = Table(title="gradient check")
    for col in ("op", "instances", "max rel error", "result"):
        table.add_column(col)
    for row in rows:
        table.add_row(
            row.op, str(row.instances), f"{row.max_rel_error:.2e}", "[green]PASS[/]" if row.passed else "[red]FAIL[/]"
        )
    console.print(table)
    if not all(row.passed for row in rows):
        raise typer.Exit(code=1)


def main() -> None:
    app()
