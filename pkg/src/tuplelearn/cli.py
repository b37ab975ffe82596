"""Command-line interface: run experiments, compare runs, serve labelers.

Exit codes: 0 success, 1 runtime failure (partial outputs are flushed as
replicates finish), 2 invalid spec or arguments.
"""

from __future__ import annotations

import sys

import click

from .errors import SpecError


@click.group()
@click.version_option()
def main():
    """Active similarity learning from ranked tuple queries."""


@main.command()
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--output", "-o", "output_dir", type=click.Path(file_okay=False), default=None,
    help="Override the spec's output directory.",
)
def run(spec_file: str, output_dir: str | None):
    """Run the experiment described by SPEC_FILE (JSON)."""
    from .experiment import load_spec, run_spec

    try:
        spec = load_spec(spec_file)
    except SpecError as exc:
        click.echo(f"invalid spec: {exc}", err=True)
        sys.exit(2)
    try:
        outdir = run_spec(spec, output_dir)
    except Exception as exc:  # noqa: BLE001 - report and signal runtime failure
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {outdir}")


@main.command()
@click.argument("run_dirs", nargs=-1, required=True,
                type=click.Path(exists=True, file_okay=False))
@click.option("--output", "-o", "output_file", required=True,
              type=click.Path(dir_okay=False))
def compare(run_dirs: tuple[str, ...], output_file: str):
    """Tabulate finished runs, aligned on normalized query count."""
    from .experiment import compare_runs, write_comparison

    try:
        rows = compare_runs(list(run_dirs))
    except (SpecError, ValueError) as exc:
        click.echo(f"cannot compare: {exc}", err=True)
        sys.exit(2)
    write_comparison(rows, output_file)
    click.echo(f"wrote {output_file}")


@main.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(config_file: str, port: int | None, host: str):
    """Start the labeling session service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    try:
        config = ServiceConfig.load(config_file)
    except SpecError as exc:
        click.echo(f"invalid service config: {exc}", err=True)
        sys.exit(2)
    app = create_app(config)
    uvicorn.run(app, host=host, port=port if port is not None else config.port)


if __name__ == "__main__":
    main()
