"""Command line: dataset generation, training, evaluation, serving, and a thin
HTTP client for live sessions."""

import json
import logging
import os
from pathlib import Path

import click

from .config import GenConfig, TrainConfig


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )


@main.command("gen-data")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--episodes", type=int, default=2000, show_default=True)
@click.option("--steps", type=int, default=5, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--shapes", default=None, help="comma-separated shape catalog")
@click.option("--colors", default=None, help="comma-separated color catalog")
def gen_data(seed, episodes, steps, out_dir, size, shapes, colors):
    """Generate an episode dataset (PNG renders + symbolic scenes)."""
    from .data import export_dataset, sample_episode, split_episode_ids
    from .data.dataset import episode_id

    kwargs = {"steps": steps, "canvas_size": size}
    if shapes:
        kwargs["shapes"] = tuple(shapes.split(","))
    if colors:
        kwargs["colors"] = tuple(colors.split(","))
    cfg = GenConfig(**kwargs)
    eps = {}
    for i in range(episodes):
        eps[episode_id(i)] = sample_episode(seed * 100_000 + i, cfg)
    export_dataset(eps, out_dir, cfg, seed=seed, splits=split_episode_ids(episodes))
    click.echo(f"wrote {episodes} episodes to {out_dir}")


@main.command()
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--epochs", type=int, default=30, show_default=True)
@click.option("--batch", "batch_size", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ablation", type=click.Choice(["no_history", "no_increment", "split_encoders"]),
              multiple=True)
@click.option("--val-limit", type=int, default=100, show_default=True,
              help="validation episodes per epoch (0 = all)")
@click.option("--resume", is_flag=True, help="continue from OUT/latest.ckpt")
@click.option("--channels", type=int, default=None, help="override feature channels")
def train(data_dir, out_dir, epochs, batch_size, seed, ablation, val_limit, resume, channels):
    """Train the adversarial model on a generated dataset."""
    from .config import ModelConfig
    from .data import load_dataset
    from .text import Vocabulary
    from .training import fit

    cfg = TrainConfig(
        epochs=epochs,
        batch_size=batch_size,
        seed=seed,
        no_history="no_history" in ablation,
        no_increment_reasoning="no_increment" in ablation,
        split_encoders="split_encoders" in ablation,
    )
    model_cfg = None
    if channels:
        _, gen_cfg, _ = load_dataset(data_dir)
        vocab = Vocabulary.from_config(gen_cfg)
        model_cfg = ModelConfig(
            vocab_size=len(vocab),
            resolution=gen_cfg.canvas_size,
            feat_channels=channels,
            use_history=not cfg.no_history,
            increment_reasoning=not cfg.no_increment_reasoning,
        )
    best = fit(data_dir, out_dir, cfg, model_cfg=model_cfg,
               val_limit=val_limit or None, resume=resume)
    click.echo(f"best checkpoint: {best}")


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--split", default="test", show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--sheets", "sheets_dir", type=click.Path(), default=None)
@click.option("--limit", type=int, default=None, help="evaluate at most N episodes")
def eval_cmd(checkpoint, data_dir, split, report_path, sheets_dir, limit):
    """Evaluate a checkpoint on a dataset split (own-output rollout)."""
    from .evalkit import evaluate_checkpoint

    report = evaluate_checkpoint(checkpoint, data_dir, split=split,
                                 report_path=report_path, sheets_dir=sheets_dir,
                                 limit=limit)
    g = report["global"]
    click.echo(json.dumps({k: round(v, 4) if isinstance(v, float) else v
                           for k, v in g.items()}))


@main.command()
@click.option("--checkpoint", default=None, type=click.Path(),
              help="defaults to $INSTRUCTPAINT_CHECKPOINT")
@click.option("--port", type=int, default=None, help="defaults to $INSTRUCTPAINT_PORT or 8000")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--persist", "persist_dir", type=click.Path(), default=None,
              help="append-only transcript log directory")
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="static frontend directory to mount at /ui")
def serve(checkpoint, port, host, persist_dir, ui_dir):
    """Serve the live manipulation API over HTTP."""
    import uvicorn

    from .service import SessionManager, create_app, load_checkpoint

    checkpoint = checkpoint or os.environ.get("INSTRUCTPAINT_CHECKPOINT")
    if not checkpoint:
        raise click.UsageError("pass --checkpoint or set INSTRUCTPAINT_CHECKPOINT")
    port = port or int(os.environ.get("INSTRUCTPAINT_PORT", "8000"))
    bundle = load_checkpoint(checkpoint)
    manager = SessionManager(bundle, persist_dir=persist_dir)
    if ui_dir is None:
        default_ui = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = default_ui if default_ui.is_dir() else None
    app = create_app(manager, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


@main.group()
@click.option("--server", default=None, help="base URL, defaults to $INSTRUCTPAINT_SERVER")
@click.pass_context
def session(ctx, server):
    """Thin HTTP client for a running server."""
    ctx.obj = server or os.environ.get("INSTRUCTPAINT_SERVER", "http://127.0.0.1:8000")


@session.command("new")
@click.pass_obj
def session_new(base):
    import httpx

    r = httpx.post(f"{base}/sessions")
    r.raise_for_status()
    click.echo(json.dumps(r.json()))


@session.command("step")
@click.argument("session_id")
@click.argument("instruction")
@click.pass_obj
def session_step(base, session_id, instruction):
    import httpx

    r = httpx.post(f"{base}/sessions/{session_id}/steps",
                   json={"instruction": instruction}, timeout=120)
    r.raise_for_status()
    click.echo(json.dumps(r.json()))


@session.command("show")
@click.argument("session_id")
@click.pass_obj
def session_show(base, session_id):
    import httpx

    r = httpx.get(f"{base}/sessions/{session_id}")
    r.raise_for_status()
    click.echo(json.dumps(r.json(), indent=2))


@session.command("delete")
@click.argument("session_id")
@click.pass_obj
def session_delete(base, session_id):
    import httpx

    r = httpx.delete(f"{base}/sessions/{session_id}")
    r.raise_for_status()
    click.echo(json.dumps(r.json()))


if __name__ == "__main__":
    main()
