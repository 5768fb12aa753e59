"""Headless command-line interface mirroring the HTTP endpoints.

All commands operate on a data-root directory (default ./intentforge-data)
through the same project store the service uses. Training/config values
come from an optional JSON or TOML config file plus flags; LLM endpoint
credentials come from the INTENTFORGE_LLM_* environment variables.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from .errors import IntentForgeError
from .intent_model import BBox, Region
from .service.store import ProjectStore


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError as exc:
            raise click.ClickException(
                "TOML config requires Python 3.11+; use JSON instead"
            ) from exc
        return tomllib.loads(text)
    return json.loads(text)


def _load_regions(path: str | None) -> list[Region]:
    if not path:
        return []
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        Region(
            region_id=entry["region_id"],
            image_id=entry["image_id"],
            bbox=BBox.from_list(entry["bbox"]),
            color_index=entry.get("color_index", 0),
        )
        for entry in entries
    ]


@click.group()
@click.option("--data-root", default="intentforge-data", show_default=True,
              help="Directory holding projects and runs.")
@click.pass_context
def main(ctx, data_root):
    ctx.obj = data_root


def _store(ctx) -> ProjectStore:
    return ProjectStore(ctx.obj)


def _run(fn):
    try:
        fn()
    except IntentForgeError as exc:
        click.echo(
            json.dumps({"code": exc.code, "message": exc.message,
                        "detail": exc.detail}),
            err=True,
        )
        sys.exit(1)


@main.command("create-project")
@click.argument("name")
@click.pass_context
def create_project(ctx, name):
    """Create a project and print its id."""

    def go():
        project = _store(ctx).create_project(name)
        click.echo(project.project_id)

    _run(go)


@main.command()
@click.argument("project_id")
@click.argument("files", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.pass_context
def upload(ctx, project_id, files):
    """Upload raw training images."""

    def go():
        payloads = [(Path(f).name, Path(f).read_bytes()) for f in files]
        ids = _store(ctx).upload_images(project_id, payloads)
        click.echo(json.dumps({"image_ids": ids}))

    _run(go)


@main.command()
@click.argument("project_id")
@click.option("--text", help="Intent text (or structured spec JSON).")
@click.option("--text-file", type=click.Path(exists=True),
              help="File containing the intent text.")
@click.option("--regions-file", type=click.Path(exists=True),
              help="JSON file with region annotations.")
@click.option("--backend", default="rule", show_default=True)
@click.pass_context
def intent(ctx, project_id, text, text_file, regions_file, backend):
    """Submit intent text and print the resulting specification."""
    if not text and not text_file:
        raise click.UsageError("provide --text or --text-file")

    def go():
        body = text or Path(text_file).read_text(encoding="utf-8")
        spec = _store(ctx).submit_intent(
            project_id, body, _load_regions(regions_file), backend
        )
        click.echo(json.dumps(spec, indent=2))

    _run(go)


@main.command()
@click.argument("project_id")
@click.pass_context
def preprocess(ctx, project_id):
    """Build the augmented, captioned dataset."""

    def go():
        click.echo(json.dumps(_store(ctx).preprocess(project_id), indent=2))

    _run(go)


@main.command()
@click.argument("project_id")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON or TOML file with training overrides.")
@click.option("--epochs", type=int)
@click.option("--batch-size", type=int)
@click.option("--seed", type=int)
@click.option("--wait/--no-wait", default=True, show_default=True,
              help="Wait for the run to finish.")
@click.pass_context
def train(ctx, project_id, config_path, epochs, batch_size, seed, wait):
    """Start a training run."""

    def go():
        overrides = _load_config_file(config_path)
        for key, value in (("epochs", epochs), ("batch_size", batch_size),
                           ("seed", seed)):
            if value is not None:
                overrides[key] = value
        opposing = overrides.pop("opposing_keywords", None)
        store = _store(ctx)
        result = store.start_training(project_id, overrides, opposing)
        run_id = result["run_id"]
        if wait:
            run = store.registry.get(run_id)
            run.wait()
            result = store.run_status(run_id)
        click.echo(json.dumps(result, indent=2))

    _run(go)


@main.command()
@click.argument("run_id")
@click.option("--after-step", type=int, default=0, show_default=True)
@click.option("--follow/--no-follow", default=False,
              help="Poll until the run reaches a terminal state.")
@click.pass_context
def monitor(ctx, run_id, after_step, follow):
    """Print metric events for a run."""

    def go():
        store = _store(ctx)
        cursor = after_step
        while True:
            payload = store.metric_events(run_id, cursor)
            for event in payload["events"]:
                click.echo(json.dumps(event))
                cursor = max(cursor, event["step"])
            if not follow or payload["status"] in ("finished", "failed",
                                                   "stopped"):
                break
            time.sleep(0.25)

    _run(go)


@main.command()
@click.argument("run_id")
@click.argument("step", type=int)
@click.option("--prompt")
@click.pass_context
def evaluate(ctx, run_id, step, prompt):
    """Evaluate a checkpoint: ranked intent scores for a fresh sample batch."""

    def go():
        _, scores = _store(ctx).registry.evaluate_checkpoint(
            run_id, step, prompt=prompt
        )
        click.echo(json.dumps(
            [{"metric_name": n, "value": v} for n, v in scores], indent=2
        ))

    _run(go)


@main.command()
@click.argument("run_id")
@click.argument("step", type=int)
@click.argument("prompt")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default="generated.png",
              show_default=True)
@click.pass_context
def generate(ctx, run_id, step, prompt, seed, out):
    """Generate an image from a checkpoint."""

    def go():
        from PIL import Image

        pixels = _store(ctx).registry.generate(run_id, step, prompt, seed)
        Image.fromarray(pixels).save(out)
        click.echo(out)

    _run(go)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.pass_context
def serve(ctx, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(ctx.obj), host=host, port=port)


if __name__ == "__main__":
    main()
