"""Adversarial training: generator/discriminator updates at every timestep,
encoder updates once per sequence, teacher forcing on ground-truth images."""

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch.optim import Adam

from ..config import GenConfig, ModelConfig, TrainConfig
from ..data import load_dataset
from ..data.render import empty_canvas, render_scene, to_unit
from ..models import ManipulatorModel, pad_batch
from ..text import Vocabulary, tokenize
from .losses import (
    d_loss_fake,
    d_loss_inconsistent,
    d_loss_real,
    g_loss,
    make_mismatched,
    total_d_loss,
)

logger = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclass
class StepLosses:
    t: int
    d_real: float
    d_fake: float
    d_incons: float
    d_total: float
    g: float
    kl: float

    def check_finite(self):
        for name in ("d_real", "d_fake", "d_incons", "d_total", "g", "kl"):
            if not np.isfinite(getattr(self, name)):
                raise DivergenceError(f"non-finite {name} loss at timestep {self.t}")


class EpisodeTensors:
    """Token ids and rendered ground-truth images for a batch of equal-length episodes."""

    def __init__(self, episodes, vocab: Vocabulary, gen_cfg: GenConfig, max_len: int):
        lengths = {len(ep) for ep in episodes}
        if len(lengths) != 1:
            raise ValueError(f"episodes in a batch must share length, got {lengths}")
        self.steps = lengths.pop()
        self.batch = len(episodes)
        self.tokens = []
        for t in range(self.steps):
            ids = [tokenize(ep.steps[t].instruction, vocab) for ep in episodes]
            self.tokens.append(pad_batch(ids, max_len))
        size = gen_cfg.canvas_size
        frames = np.empty((self.steps + 1, self.batch, 3, size, size), dtype=np.float32)
        empty = to_unit(empty_canvas(size, gen_cfg.palette))
        for b, ep in enumerate(episodes):
            frames[0, b] = empty
            for t, step in enumerate(ep.steps):
                frames[t + 1, b] = to_unit(render_scene(step.scene, size, gen_cfg.palette))
        self.images = torch.from_numpy(frames)


def build_optimizers(model: ManipulatorModel, cfg: TrainConfig) -> dict[str, Adam]:
    opts = {
        "generator": Adam(model.generator.parameters(),
                          lr=cfg.lr_generator, betas=cfg.betas_gan),
        "discriminator": Adam(model.discriminator.parameters(),
                              lr=cfg.lr_discriminator, betas=cfg.betas_gan),
        "encoder": Adam(
            [{"params": model.encoder.word_parameters(), "lr": cfg.lr_word_encoder},
             {"params": model.encoder.instruction_parameters(), "lr": cfg.lr_instruction_encoder}],
            lr=cfg.lr_word_encoder, betas=cfg.betas_encoder),
    }
    if model.split_encoders:
        opts["encoder_g"] = Adam(
            [{"params": model.encoder_g.word_parameters(), "lr": cfg.lr_word_encoder},
             {"params": model.encoder_g.instruction_parameters(), "lr": cfg.lr_instruction_encoder}],
            lr=cfg.lr_word_encoder, betas=cfg.betas_encoder)
    return opts


def _encoder_step(model: ManipulatorModel, batch: EpisodeTensors, t: int,
                  encoder, h_prev, generator):
    tokens, lengths = batch.tokens[t]
    d = encoder.encode_words(tokens, lengths)
    h = encoder.advance_history(d, h_prev) if model.cfg.use_history else h_prev
    cond = encoder.condition(d, h)
    c, kl = encoder.augment(cond, sample=True, generator=generator)
    return h, cond, c, kl


def train_sequence(model: ManipulatorModel, batch: EpisodeTensors,
                   optimizers: dict, cfg: TrainConfig,
                   generator: torch.Generator | None = None) -> list[StepLosses]:
    """One unrolled episode batch.

    D and G take an optimizer step at every timestep; encoder gradients come
    only from the discriminator objective (plus the KL term) and are applied
    once after the final timestep. The generator always consumes ground-truth
    previous images (teacher forcing).
    """
    model.train()
    weights = cfg.weights
    enc = model.encoder
    enc_g = model.generator_side_encoder()
    optimizers["encoder"].zero_grad()
    if model.split_encoders:
        optimizers["encoder_g"].zero_grad()

    h = enc.initial_history(batch.batch)
    h_g = enc_g.initial_history(batch.batch) if model.split_encoders else None
    reports = []
    for t in range(batch.steps):
        h, cond, c, kl = _encoder_step(model, batch, t, enc, h, generator)
        if model.split_encoders:
            h_g, _, c, kl_g = _encoder_step(model, batch, t, enc_g, h_g, generator)
        image_prev = batch.images[t]
        image_t = batch.images[t + 1]

        # discriminator step (encoder gradients accumulate through cond and kl)
        optimizers["discriminator"].zero_grad()
        fake = model.generator(image_prev, c if model.split_encoders else c.detach())
        r_real = model.discriminator(image_t, image_prev, cond)
        r_fake = model.discriminator(fake.detach(), image_prev, cond)
        loss_real = d_loss_real(r_real)
        loss_fake = d_loss_fake(r_fake)
        cond_mis = make_mismatched(cond)
        loss_incons = None
        if cond_mis is not None:
            loss_incons = d_loss_inconsistent(model.discriminator(image_t, image_prev, cond_mis))
        loss_d = total_d_loss(loss_real, loss_fake, loss_incons, weights, kl)
        loss_d.backward(retain_graph=True)
        optimizers["discriminator"].step()

        # generator step; conditions are detached so no encoder gradient flows,
        # except for the generator-side encoder in the split ablation
        optimizers["generator"].zero_grad()
        r_g = model.discriminator(fake, image_prev, cond.detach())
        loss_g = g_loss(r_g)
        if model.split_encoders:
            loss_g = loss_g + weights.kl_weight * kl_g
        loss_g.backward(retain_graph=model.split_encoders)
        optimizers["generator"].step()

        report = StepLosses(
            t=t,
            d_real=float(loss_real.detach()),
            d_fake=float(loss_fake.detach()),
            d_incons=float(loss_incons.detach()) if loss_incons is not None else 0.0,
            d_total=float(loss_d.detach()),
            g=float(loss_g.detach()),
            kl=float(kl.detach()) if torch.is_tensor(kl) else float(kl),
        )
        report.check_finite()
        reports.append(report)

    torch.nn.utils.clip_grad_norm_(
        [p for p in enc.parameters() if p.grad is not None], cfg.encoder_clip_norm)
    optimizers["encoder"].step()
    if model.split_encoders:
        torch.nn.utils.clip_grad_norm_(
            [p for p in model.encoder_g.parameters() if p.grad is not None],
            cfg.encoder_clip_norm)
        optimizers["encoder_g"].step()
    return reports


def batch_ids(ids: list[str], batch_size: int, rng: np.random.Generator) -> list[list[str]]:
    order = list(rng.permutation(len(ids)))
    shuffled = [ids[i] for i in order]
    return [shuffled[i:i + batch_size] for i in range(0, len(shuffled), batch_size)]


METRICS_FIELDS = ["epoch", "d_real", "d_fake", "d_incons", "d_total", "g_loss", "kl",
                  "val_precision", "val_recall", "val_f1", "val_rsim", "seconds"]


def append_metrics_row(path: Path, row: dict):
    new = not path.exists()
    with open(path, "a", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=METRICS_FIELDS)
        if new:
            writer.writeheader()
        writer.writerow({k: row.get(k, "") for k in METRICS_FIELDS})


def fit(data_dir, out_dir, cfg: TrainConfig,
        model_cfg: ModelConfig | None = None,
        val_limit: int | None = 100,
        resume: bool = False,
        localizer=None,
        stop_at_f1: float | None = None) -> Path:
    """Full training run over an exported dataset; writes metrics.csv plus
    latest/best checkpoints under out_dir. Returns the best checkpoint path."""
    from ..evalkit.evaluate import evaluate_episodes
    from ..evalkit.localizer import train_localizer
    from ..service.checkpoint import CheckpointBundle, load_checkpoint, save_checkpoint
    from ..data.dataset import manifest_hash

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    episodes, gen_cfg, manifest = load_dataset(data_dir)
    data_hash = manifest_hash(data_dir)
    vocab = Vocabulary.from_config(gen_cfg)
    splits = manifest["splits"]

    torch.manual_seed(cfg.seed)
    np.random.seed(cfg.seed)
    if model_cfg is None:
        model_cfg = ModelConfig(
            vocab_size=len(vocab),
            resolution=gen_cfg.canvas_size,
            use_history=not cfg.no_history,
            increment_reasoning=not cfg.no_increment_reasoning,
        )

    start_epoch = 0
    optimizers = None
    if resume and (out / "latest.ckpt").exists():
        bundle = load_checkpoint(out / "latest.ckpt")
        model = bundle.build_model()
        model_cfg = bundle.model_config
        optimizers = build_optimizers(model, cfg)
        bundle.load_optimizer_states(optimizers, model)
        localizer = bundle.build_localizer() or localizer
        start_epoch = bundle.epoch
        logger.info("resumed from epoch %d", start_epoch)
    else:
        model = ManipulatorModel(model_cfg, split_encoders=cfg.split_encoders, seed=cfg.seed)
        optimizers = build_optimizers(model, cfg)

    if localizer is None:
        logger.info("training grid localizer on the train split")
        localizer = train_localizer(
            [episodes[eid] for eid in splits["train"]], gen_cfg)

    ca_rng = torch.Generator().manual_seed(cfg.seed + 1)
    shuffle_rng = np.random.default_rng(cfg.seed + 2)
    val_ids = splits["val"][:val_limit] if val_limit else splits["val"]
    best_f1 = -1.0
    best_path = out / "best.ckpt"

    for epoch in range(start_epoch, cfg.epochs):
        t0 = time.time()
        sums = {k: 0.0 for k in ("d_real", "d_fake", "d_incons", "d_total", "g", "kl")}
        n_steps = 0
        for ids in batch_ids(splits["train"], cfg.batch_size, shuffle_rng):
            batch = EpisodeTensors([episodes[i] for i in ids], vocab, gen_cfg, model_cfg.max_len)
            for rep in train_sequence(model, batch, optimizers, cfg, ca_rng):
                for k in sums:
                    sums[k] += getattr(rep, k)
                n_steps += 1
        means = {k: v / max(n_steps, 1) for k, v in sums.items()}

        val = {}
        if val_ids and (epoch + 1) % cfg.eval_every == 0:
            report = evaluate_episodes(
                model, vocab, gen_cfg, [episodes[i] for i in val_ids], localizer)
            val = report["global"]

        row = {
            "epoch": epoch + 1,
            "d_real": f"{means['d_real']:.4f}",
            "d_fake": f"{means['d_fake']:.4f}",
            "d_incons": f"{means['d_incons']:.4f}",
            "d_total": f"{means['d_total']:.4f}",
            "g_loss": f"{means['g']:.4f}",
            "kl": f"{means['kl']:.4f}",
            "val_precision": f"{val['precision']:.4f}" if val else "",
            "val_recall": f"{val['recall']:.4f}" if val else "",
            "val_f1": f"{val['f1']:.4f}" if val else "",
            "val_rsim": f"{val['rsim']:.4f}" if val else "",
            "seconds": f"{time.time() - t0:.1f}",
        }
        append_metrics_row(out / "metrics.csv", row)
        logger.info("epoch %d: %s", epoch + 1, row)

        bundle = CheckpointBundle.from_training(
            model=model, model_config=model_cfg, gen_config=gen_cfg, vocab=vocab,
            epoch=epoch + 1, seed=cfg.seed, dataset_hash=data_hash,
            optimizers=optimizers, localizer=localizer)
        save_checkpoint(bundle, out / "latest.ckpt")
        if val and val["f1"] > best_f1:
            best_f1 = val["f1"]
            save_checkpoint(bundle, best_path)
        if stop_at_f1 is not None and val and val["f1"] >= stop_at_f1:
            logger.info("early stop: val F1 %.4f reached target %.4f", val["f1"], stop_at_f1)
            break
    if not best_path.exists():
        save_checkpoint(bundle, best_path)
    return best_path
