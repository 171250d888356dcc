"""
Command-line interface for the subspace autoencoder pipeline.

Every command is reproducible from its config file, flags and seeds. Failures
print one machine-parsable line on stderr and exit with the error's code.
"""

import functools
import json
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from rich.table import Table

from app.core.config import settings
from app.core.errors import ConfigurationError, MissingFileError, PipelineError
from app.core.logging import get_logger, run_logger, setup_logging
from app.core.provenance import fingerprint, provenance_record
from app.eval.attributes import attribute_edit, attribute_separation, classifier_accuracy
from app.eval.grid import default_grid_assignments, tile
from app.eval.grid import mix_grid as render_mix_grid
from app.eval.inference import chw_to_hwc
from app.eval.mixing import mixing_error
from app.eval.reports import write_report
from app.jobs.config import RunConfig, load_run_config
from app.model.checkpoint import Checkpoint, load_checkpoint
from app.model.layout import SubspaceLayout
from app.synthdata.dataset import ATTRIBUTE_NAMES, SpriteDataset, attribute_bit
from app.synthdata.dataset_io import read_dataset, write_dataset
from app.synthdata.generator import generate
from app.synthdata.ppm import export_ppm
from app.tensor.tensor import set_default_dtype
from app.training.metrics import StepMetrics
from app.training.trainer import Trainer

app = typer.Typer(
    name="subspace-ae",
    help="Autoencoder with independent latent subspaces: data, training and evaluation",
    no_args_is_help=True,
    add_completion=False,
)
console = Console()
logger = get_logger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


def error_line(error: PipelineError) -> str:
    """The single stderr line reported for a failed command."""
    return f"error code={error.code} exit={error.exit_code} message={json.dumps(error.message)}"


def _fail(command: str, error: PipelineError) -> typer.Exit:
    run_logger.log_error(command, error, code=error.code, context=error.context)
    typer.echo(error_line(error), err=True)
    return typer.Exit(error.exit_code)


def handles_errors(fn: F) -> F:
    """Map pipeline, validation and I/O errors to exit codes."""

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        command = fn.__name__.replace("_", "-")
        try:
            return fn(*args, **kwargs)
        except PipelineError as e:
            raise _fail(command, e) from e
        except ValidationError as e:
            raise _fail(command, ConfigurationError(f"Invalid configuration: {e}")) from e
        except FileNotFoundError as e:
            raise _fail(command, MissingFileError(f"File not found: {e.filename}")) from e
        except OSError as e:
            raise _fail(command, PipelineError(f"I/O error: {e}", path=e.filename)) from e

    return wrapper  # type: ignore[return-value]


@app.callback()
def main() -> None:
    """Configure logging and numeric precision for every command."""
    setup_logging()
    set_default_dtype(settings.dtype)


# ----------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------


def _load_model(ckpt: Path, config: Path | None, run_config: RunConfig) -> Checkpoint:
    """Load a checkpoint; with a config file its layout must match the file's dims."""
    expected = SubspaceLayout.from_dims(run_config.train.dims) if config is not None else None
    return load_checkpoint(ckpt, expected_layout=expected)


def _check_index(dataset: SpriteDataset, index: int) -> int:
    if not 0 <= index < len(dataset):
        raise ConfigurationError(
            f"Sprite index {index} out of range for a dataset of {len(dataset)}",
            index=index,
            dataset_size=len(dataset),
        )
    return index


def parse_indices(text: str) -> list[int]:
    """Parse ``i,j[,k]`` into two or three sprite indices."""
    try:
        indices = [int(part) for part in text.split(",")]
    except ValueError as e:
        raise ConfigurationError(f"--indices must be comma-separated integers, got {text!r}") from e
    if not 2 <= len(indices) <= 3:
        raise ConfigurationError(f"--indices takes 2 or 3 sprites, got {len(indices)}")
    return indices


def reference_path(out: Path) -> Path:
    return out.with_name(f"{out.stem}_reference{out.suffix}")


def _checkpoint_fingerprint(ckpt: Checkpoint) -> str | None:
    provenance = ckpt.metadata.get("provenance") or {}
    return provenance.get("fingerprint")


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


@app.command("gen-data")
@handles_errors
def gen_data(
    out: Path = typer.Option(..., "--out", help="Destination dataset file (.sds)"),
    count: int | None = typer.Option(None, "--count", help="Number of sprites"),
    seed: int | None = typer.Option(None, "--seed", help="64-bit dataset seed"),
    config: Path | None = typer.Option(None, "--config", help="Run config (JSON/YAML)"),
) -> None:
    """
    Generate the synthetic sprite dataset with ground-truth part masks.
    """
    run_config = load_run_config(config, {"gen": {"count": count, "seed": seed}})
    params = run_config.gen

    console.print(
        Panel.fit(f"[bold blue]Generating {params.count} sprites[/bold blue] (seed {params.seed})")
    )
    with console.status("Rendering sprites..."):
        dataset = generate(params)
    write_dataset(dataset, out)
    run_logger.log_dataset_written(
        str(out), len(dataset), fingerprint("gen", params), seed=params.seed
    )

    table = Table(title="Attribute Balance")
    table.add_column("Attribute", style="cyan")
    table.add_column("Positives", justify="right")
    table.add_column("Share", justify="right")
    for name in ATTRIBUTE_NAMES:
        positives = int(dataset.attribute(name).sum())
        table.add_row(name, str(positives), f"{positives / len(dataset):.2f}")
    console.print(table)
    console.print(f"[green]Dataset written to {out}[/green]")


@app.command("train")
@handles_errors
def train(
    data: Path = typer.Option(..., "--data", help="Dataset file written by gen-data"),
    out: Path = typer.Option(..., "--out", help="Output directory for checkpoints and metrics"),
    config: Path | None = typer.Option(None, "--config", help="Run config (JSON/YAML)"),
    no_isa: bool = typer.Option(False, "--no-isa", help="Ablation: no mixing matrix, no entropy loss"),
    epochs: int | None = typer.Option(None, "--epochs", help="Override train.epochs"),
    batch_size: int | None = typer.Option(None, "--batch-size", help="Override train.batch_size"),
    seed: int | None = typer.Option(None, "--seed", help="Override train.seed"),
    lr: float | None = typer.Option(None, "--lr", help="Override train.lr"),
) -> None:
    """
    Train the autoencoder and write checkpoints plus a JSONL metrics log.
    """
    overrides = {
        "train": {
            "epochs": epochs,
            "batch_size": batch_size,
            "seed": seed,
            "lr": lr,
            "enable_isa": False if no_isa else None,
            "dataset_path": str(data),
        }
    }
    train_config = load_run_config(config, overrides).train
    dataset = read_dataset(data)
    trainer = Trainer(train_config, dataset)

    console.print(
        Panel.fit(
            f"[bold blue]Training {trainer.model.architecture}[/bold blue]\n"
            f"{len(dataset)} sprites, {train_config.epochs} epochs x {trainer.steps_per_epoch} steps, "
            f"seed {train_config.seed}"
        )
    )

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        console=console,
    ) as progress:
        task = progress.add_task(
            "Training...", total=train_config.epochs * trainer.steps_per_epoch
        )

        def on_step(metrics: StepMetrics) -> None:
            progress.update(
                task,
                advance=1,
                description=f"Epoch {metrics.epoch} L_a={metrics.L_a:.4f} acc={metrics.accuracy:.2f}",
            )

        result = trainer.fit(out, progress=on_step)

    table = Table(title="Epochs")
    table.add_column("Epoch", justify="right")
    table.add_column("Median L_a", justify="right", style="cyan")
    table.add_column("Mean total", justify="right")
    table.add_column("Mean accuracy", justify="right")
    for summary in result.epochs:
        table.add_row(
            str(summary.epoch),
            f"{summary.median_l_a:.5f}",
            f"{summary.mean_total:.5f}",
            f"{summary.mean_accuracy:.3f}",
        )
    console.print(table)
    console.print(f"[green]Final checkpoint: {result.final_checkpoint}[/green]")


@app.command("eval-mixing")
@handles_errors
def eval_mixing(
    ckpt: Path = typer.Option(..., "--ckpt", help="Checkpoint file"),
    data: Path = typer.Option(..., "--data", help="Dataset file"),
    out: Path = typer.Option(..., "--out", help="Report file (JSON)"),
    groups: int | None = typer.Option(None, "--groups", help="Number of sprite groups"),
    seed: int | None = typer.Option(None, "--seed", help="Seeds group selection"),
    config: Path | None = typer.Option(None, "--config", help="Run config (JSON/YAML)"),
) -> None:
    """
    Measure the per-subspace mixing error of a trained model.
    """
    run_config = load_run_config(config, {"eval": {"groups": groups, "seed": seed}})
    options = run_config.eval
    checkpoint = _load_model(ckpt, config, run_config)
    dataset = read_dataset(data)

    with console.status("Decoding mixes..."):
        report = mixing_error(checkpoint.model, dataset, options.groups, options.seed)

    payload = {**report.to_dict(), "architecture": checkpoint.model.architecture}
    provenance = provenance_record(
        "eval-mixing",
        {"checkpoint": _checkpoint_fingerprint(checkpoint), "groups": options.groups},
        seed=options.seed,
    )
    write_report("mixing_error", payload, out, provenance)

    table = Table(title=f"Mixing Error ({checkpoint.model.architecture})")
    table.add_column("Subspace", style="cyan")
    table.add_column("e_j", justify="right")
    table.add_column("Groups", justify="right")
    for name, value, evaluated in zip(report.subspaces, report.per_subspace, report.evaluated):
        table.add_row(name, "-" if value is None else f"{value:.5f}", str(evaluated))
    mean = "-" if report.mean is None else f"{report.mean:.5f}"
    table.add_row("[bold]mean[/bold]", mean, str(report.groups))
    console.print(table)


@app.command("analyze-subspaces")
@handles_errors
def analyze_subspaces(
    ckpt: Path = typer.Option(..., "--ckpt", help="Checkpoint file"),
    data: Path = typer.Option(..., "--data", help="Dataset file"),
    out: Path = typer.Option(..., "--out", help="Report file (JSON)"),
    config: Path | None = typer.Option(None, "--config", help="Run config (JSON/YAML)"),
) -> None:
    """
    Per-subspace PCA and class-mean distances of every labeled attribute.
    """
    run_config = load_run_config(config)
    checkpoint = _load_model(ckpt, config, run_config)
    model = checkpoint.model
    dataset = read_dataset(data)

    with console.status("Analysing subspaces..."):
        analysis = attribute_separation(model, dataset)
        accuracy = classifier_accuracy(model, dataset)

    payload = {**analysis.to_dict(), "classifier_accuracy": accuracy, "architecture": model.architecture}
    provenance = provenance_record(
        "analyze-subspaces", {"checkpoint": _checkpoint_fingerprint(checkpoint)}
    )
    write_report("subspace_analysis", payload, out, provenance)

    table = Table(title="Class-Mean Distances")
    table.add_column("Attribute", style="cyan")
    for name in model.layout.names:
        table.add_column(name, justify="right")
    table.add_column("Best", style="green")
    distances = analysis.distances()
    for attribute in ATTRIBUTE_NAMES:
        if attribute in analysis.excluded:
            continue
        row = [f"{distances[name][attribute]:.3f}" for name in model.layout.names]
        table.add_row(attribute, *row, analysis.argmax_subspace(attribute))
    console.print(table)
    console.print(f"Subspace classifier accuracy: {accuracy:.3f}")


@app.command("edit-attribute")
@handles_errors
def edit_attribute(
    ckpt: Path = typer.Option(..., "--ckpt", help="Checkpoint file"),
    data: Path = typer.Option(..., "--data", help="Dataset file"),
    attr: str = typer.Option(..., "--attr", help=f"One of: {', '.join(ATTRIBUTE_NAMES)}"),
    index: int = typer.Option(..., "--index", help="Sprite to edit"),
    out: Path = typer.Option(..., "--out", help="Edited image (PPM)"),
    strength: float | None = typer.Option(None, "--strength", help="Shift along the attribute direction"),
    with_reference: bool = typer.Option(
        False, "--with-reference", help="Also write the unedited reconstruction"
    ),
    config: Path | None = typer.Option(None, "--config", help="Run config (JSON/YAML)"),
) -> None:
    """
    Strengthen (or weaken) a labeled attribute of one sprite.
    """
    run_config = load_run_config(config, {"eval": {"strength": strength}})
    attribute_bit(attr)
    checkpoint = _load_model(ckpt, config, run_config)
    model = checkpoint.model
    dataset = read_dataset(data)
    image = dataset.images_chw([_check_index(dataset, index)])[0]

    edited = attribute_edit(model, dataset, attr, image, run_config.eval.strength)
    export_ppm(chw_to_hwc(edited), out)
    run_logger.log_image_written(
        "attribute_edit", str(out), attribute=attr, index=index, strength=run_config.eval.strength
    )
    console.print(f"[green]Edited image written to {out}[/green]")

    if with_reference:
        reference = model.reconstruct(image, through_sources=True).data
        ref_out = export_ppm(chw_to_hwc(reference), reference_path(out))
        run_logger.log_image_written("reconstruction", str(ref_out), index=index)
        console.print(f"[green]Reference written to {ref_out}[/green]")


@app.command("mix-grid")
@handles_errors
def mix_grid(
    ckpt: Path = typer.Option(..., "--ckpt", help="Checkpoint file"),
    data: Path = typer.Option(..., "--data", help="Dataset file"),
    indices: str = typer.Option(..., "--indices", help="Two or three sprites, e.g. 3,17[,42]"),
    out: Path = typer.Option(..., "--out", help="Grid image (PPM)"),
    with_reference: bool = typer.Option(
        False, "--with-reference", help="Also write the plain reconstructions"
    ),
    config: Path | None = typer.Option(None, "--config", help="Run config (JSON/YAML)"),
) -> None:
    """
    Decode a grid of subspace swaps between two or three sprites.
    """
    run_config = load_run_config(config)
    selected = parse_indices(indices)
    checkpoint = _load_model(ckpt, config, run_config)
    model = checkpoint.model
    dataset = read_dataset(data)
    images = dataset.images_chw([_check_index(dataset, i) for i in selected])

    assignments = default_grid_assignments(len(selected), model.layout.num_subspaces)
    grid = render_mix_grid(model, list(images), assignments, path=out, include_originals=True)
    run_logger.log_image_written("mix_grid", str(out), indices=selected, shape=list(grid.shape))
    console.print(f"[green]Grid {grid.shape[1]}x{grid.shape[0]} written to {out}[/green]")

    if with_reference:
        reconstructions = chw_to_hwc(model.reconstruct(images).data)
        ref_out = export_ppm(tile([list(reconstructions)]), reference_path(out))
        run_logger.log_image_written("reconstruction", str(ref_out), indices=selected)
        console.print(f"[green]Reference written to {ref_out}[/green]")


if __name__ == "__main__":
    app()
