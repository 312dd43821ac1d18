"""CLI entry point for flipsim."""

import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import click
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from src.config.logging_config import configure_logging
from src.config.settings import SettingsError, get_settings
from src.errors.exceptions import FlipSimError
from src.models.schemas import SweepConfig, SweepRow

console = Console()

MODES = ("untargeted", "targeted")
RULES = ("benefit", "paper-literal", "random")


def setup_logging(level: Optional[str] = None):
    """Wire up logging from Settings; --verbose overrides the level only."""
    configure_logging(level=level)


def _fail(message: str) -> None:
    console.print(f"[bold red]Error:[/] {message}", style="red")
    sys.exit(1)


def _grid_options(func: Callable) -> Callable:
    """Options shared by train and sweep; each one overrides the config file."""
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="Flat JSON/YAML sweep config (a manifest.json also works)."),
        click.option("--out", "out_dir", type=click.Path(), default=None,
                     help="Output directory (default: FLIPSIM_OUT_DIR)."),
        click.option("--seed", "seeds", type=int, multiple=True, help="Seed(s); replaces config seeds."),
        click.option("--k", "k_values", type=float, multiple=True, help="Write-access fraction(s) k."),
        click.option("--b", "b_values", type=float, multiple=True, help="Local flip budget(s) b."),
        click.option("--mode", "modes", type=click.Choice(MODES), multiple=True, help="Attack mode(s)."),
        click.option("--selection-rule", type=click.Choice(RULES), default=None,
                     help="Flip selection rule."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _overrides(seeds, k_values, b_values, modes, selection_rule) -> Dict[str, Any]:
    return {
        "seeds": seeds,
        "k_values": k_values,
        "b_values": b_values,
        "modes": modes,
        "selection_rule": selection_rule,
    }


def _load_config(config_path: Optional[str], overrides: Dict[str, Any]) -> SweepConfig:
    from src.utils.validator import load_sweep_config

    return load_sweep_config(config_path, overrides)


def _rows_table(rows: Sequence[SweepRow], title: str) -> Table:
    table = Table(title=title, show_header=True)
    table.add_column("Mode", style="bold")
    table.add_column("k", justify="right")
    table.add_column("b", justify="right")
    table.add_column("k·b", justify="right")
    table.add_column("Mean acc", justify="right", style="cyan")
    table.add_column("Std", justify="right")
    table.add_column("Target dist", justify="right")
    table.add_column("Seeds", justify="right", style="dim")
    for r in rows:
        distance = "—" if r.mean_final_target_distance is None else f"{r.mean_final_target_distance:.4g}"
        table.add_row(
            r.mode.value, f"{r.k:g}", f"{r.b:g}", f"{r.global_budget:g}",
            f"{r.mean_acc_last_w:.4f}", f"{r.std_across_seeds:.4f}", distance, str(r.n_seeds),
        )
    return table


def _execute(cfg: SweepConfig, jobs: int, out_dir: Optional[str], title: str) -> Path:
    from src.services.dataset_service import dataset_fingerprint
    from src.services.export_service import emit_results
    from src.services.sweep_service import run_sweep

    settings = get_settings()
    out = Path(out_dir) if out_dir else settings.out_dir
    total = cfg.n_cells * len(cfg.seeds)

    console.print(Panel(
        f"[bold]Dataset:[/] {cfg.dataset.source}   [bold]Cells:[/] {cfg.n_cells}   "
        f"[bold]Runs:[/] {total}   [bold]Epochs:[/] {cfg.sgd.epochs}   [bold]Jobs:[/] {jobs}",
        title=title, border_style="blue",
    ))

    with Progress(
        TextColumn("[progress.description]{task.description}"), BarColumn(),
        MofNCompleteColumn(), TimeElapsedColumn(), console=console, transient=True,
    ) as progress:
        task = progress.add_task("runs", total=total)
        outcome = run_sweep(
            cfg, jobs=jobs, cache_dir=settings.cache_dir,
            on_run_done=lambda key: progress.update(
                task, advance=1, description=f"{key[0]} k={key[1]:g} b={key[2]:g} seed={key[3]}",
            ),
        )

    emit_results(
        outcome.rows, outcome.runs, out, cfg,
        extra_manifest={"dataset_fingerprint": dataset_fingerprint(cfg.dataset)},
    )
    console.print(_rows_table(outcome.rows, "Sweep Summary"))
    console.print(f"[green]Results written to[/] {out}")
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging.")
def cli(verbose):
    """flipsim: budgeted label-flipping attacks on logistic regression."""
    try:
        setup_logging("DEBUG" if verbose else None)
    except SettingsError as exc:
        _fail(str(exc))


@cli.command()
@_grid_options
def train(config_path, out_dir, seeds, k_values, b_values, modes, selection_rule):
    """Single run: first seed, first k, first b, first mode."""
    try:
        cfg = _load_config(config_path, _overrides(seeds, k_values, b_values, modes, selection_rule))
        single = cfg.model_copy(update={
            "seeds": cfg.seeds[:1],
            "k_values": cfg.k_values[:1],
            "b_values": cfg.b_values[:1],
            "modes": cfg.modes[:1],
        })
        _execute(single, 1, out_dir, "🎯 Train")
    except (FlipSimError, SettingsError) as exc:
        _fail(getattr(exc, "message", str(exc)))


@cli.command()
@_grid_options
@click.option("--jobs", type=int, default=None, help="Worker processes (default: FLIPSIM_JOBS).")
def sweep(config_path, out_dir, seeds, k_values, b_values, modes, selection_rule, jobs):
    """Run the full (mode, k, b) grid over all seeds."""
    try:
        cfg = _load_config(config_path, _overrides(seeds, k_values, b_values, modes, selection_rule))
        _execute(cfg, jobs or get_settings().jobs, out_dir, "📈 Sweep")
    except (FlipSimError, SettingsError) as exc:
        _fail(getattr(exc, "message", str(exc)))


@cli.command("oracle-check")
@click.option("--instances", default=200, type=int, show_default=True, help="Random instances to compare.")
@click.option("--seed", default=0, type=int, show_default=True, help="Instance generator seed.")
@click.option("--tolerance", default=1e-9, type=float, show_default=True, help="Allowed objective gap.")
def oracle_check(instances, seed, tolerance):
    """Compare greedy flip selection against exhaustive search."""
    from src.services.oracle_service import run_oracle_check

    try:
        report = run_oracle_check(instances=instances, seed=seed, tolerance=tolerance)
    except FlipSimError as exc:
        _fail(exc.message)

    table = Table(title="Oracle Check", show_header=True, box=None)
    table.add_column("Metric", style="bold")
    table.add_column("Value", justify="right")
    table.add_row("Instances", str(report.instances))
    table.add_row("Binary", str(report.binary_instances))
    table.add_row("Multiclass", str(report.multiclass_instances))
    table.add_row("Max gap", f"{report.max_gap:.3e}")
    table.add_row("Failures", str(len(report.failures)), style="green" if report.passed else "red")
    console.print(table)

    if not report.passed:
        console.print("\n[bold red]Failures:[/]")
        for failure in report.failures[:20]:
            console.print(f"  • {failure}", style="red")
        sys.exit(1)
    console.print(Panel("[bold green]Greedy matches the oracle on every instance.[/]",
                        title="✅ Passed", border_style="green"))


@cli.command("make-target")
@click.option("--config", "config_path", type=click.Path(), default=None, help="Flat JSON/YAML sweep config.")
def make_target(config_path):
    """Train (or load) the cached target model and print its cache key."""
    from src.services.dataset_service import load_dataset
    from src.services.sweep_service import load_or_make_target

    try:
        cfg = _load_config(config_path, {})
        train_data, _ = load_dataset(cfg.dataset)
        params, key = load_or_make_target(cfg, train_data, get_settings().cache_dir)
    except (FlipSimError, SettingsError) as exc:
        _fail(getattr(exc, "message", str(exc)))

    console.print(Panel(
        f"[bold]Cache key:[/] {key}\n"
        f"[bold]Kind:[/] {params.kind}   [bold]Shape:[/] {tuple(params.array.shape)}   "
        f"[bold]Remap:[/] {cfg.target_remap}",
        title="🎯 Target model", border_style="green",
    ))


if __name__ == "__main__":
    cli()
