"""Service entry point: load a backend and serve the wire protocol."""

import sys

import click

from .app import create_app
from .backend import BackendLoadError, load_backend


@click.command()
@click.option("--backend", "backend_spec", required=True,
              help="table:<path> or seq2seq:<model-id>")
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
def serve(backend_spec, port, host):
    """Serve conditional log-probabilities over HTTP JSON."""
    try:
        backend = load_backend(backend_spec)
    except BackendLoadError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(f"serving {backend.model_id} on {host}:{port}")
    import uvicorn
    uvicorn.run(create_app(backend), host=host, port=port, log_level="warning")


def main():
    serve(standalone_mode=True)


if __name__ == "__main__":
    main()
