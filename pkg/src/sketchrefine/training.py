"""Renderer pre-training and the multi-scale refiner/discriminator schedule.

Each resolution stage trains fresh networks in two phases: first with the
refinement level locked to 1, then with levels sampled uniformly per sample.
All randomness is derived from (seed, stage, phase, epoch, sample index), so
metrics streams are reproducible and independent of worker layout, and an
interrupted run can resume at epoch granularity.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from . import data, images, losses, morphology, networks
from .losses import LossWeights, RandomConvFeatureExtractor
from .morphology import RoughSketchConfig
from .networks import NetworkConfig

_TAG_MASK, _TAG_LEVEL, _TAG_AUGMENT, _TAG_SHUFFLE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class TrainingError(RuntimeError):
    """Raised on non-finite losses; carries the seeds of the offending batch."""

    def __init__(self, message, sample_keys=None):
        super().__init__(message)
        self.sample_keys = sample_keys or []


@dataclass(frozen=True)
class TrainConfig:
    resolution_schedule: tuple[int, ...] = (64, 128, 256)
    learning_rate: float = 0.0002
    adam_betas: tuple[float, float] = (0.5, 0.999)
    epochs_level_locked: int = 30
    epochs_level_sampled: int = 200
    batch_size: int = 8
    seed: int = 0
    checkpoint_every_epochs: int = 10
    base_channels: int = 64
    n_resblocks: int = 4
    d_style: int = 64
    mode: str = "edit"
    conditioning: str = "style"
    rough: RoughSketchConfig = field(default_factory=RoughSketchConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    renderer_stages: tuple[int, ...] = (256,)
    adapt_to_renderer: bool = True
    renderer_epochs: int = 20

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs_level_locked < 0 or self.epochs_level_sampled < 0:
            raise ConfigError("phase epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def network_config(self, resolution) -> NetworkConfig:
        return NetworkConfig(
            resolution=resolution,
            base_channels=self.base_channels,
            n_resblocks=self.n_resblocks,
            d_style=self.d_style,
            mode=self.mode,
            conditioning=self.conditioning,
        )


def desk_profile(**overrides) -> TrainConfig:
    """Laptop-scale configuration used by the verification suite."""
    base = dict(
        resolution_schedule=(64,),
        epochs_level_locked=2,
        epochs_level_sampled=2,
        batch_size=4,
        base_channels=16,
        n_resblocks=2,
        d_style=16,
        rough=RoughSketchConfig(max_radius=4).scaled_to_resolution(64),
        renderer_stages=(),
        renderer_epochs=2,
        checkpoint_every_epochs=1,
    )
    base.update(overrides)
    return TrainConfig(**base)


def overfit_profile(steps=300, n_images=16, batch_size=8, **overrides) -> TrainConfig:
    """16 images at 64px, level locked to 1, `steps` optimizer steps."""
    steps_per_epoch = max(1, (n_images + batch_size - 1) // batch_size)
    return desk_profile(
        epochs_level_locked=steps // steps_per_epoch,
        epochs_level_sampled=0,
        batch_size=batch_size,
        base_channels=32,
        n_resblocks=3,
        **overrides,
    )


def sample_level(rng: np.random.Generator) -> float:
    return float(rng.uniform(0.0, 1.0))


def train_config_from_dict(raw: dict) -> TrainConfig:
    """Build a TrainConfig from parsed JSON (lists become tuples)."""
    d = dict(raw)
    if "rough" in d:
        r = dict(d["rough"])
        for key in ("discard_patch_count_range", "discard_patch_size_range"):
            if key in r:
                r[key] = tuple(r[key])
        d["rough"] = RoughSketchConfig(**r)
    if "weights" in d:
        w = dict(d["weights"])
        if "feature_layer_weights" in w:
            w["feature_layer_weights"] = tuple(w["feature_layer_weights"])
        d["weights"] = LossWeights(**w)
    for key in ("resolution_schedule", "adam_betas", "renderer_stages"):
        if key in d:
            d[key] = tuple(d[key])
    return TrainConfig(**d)


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)


def _derived_torch_seed(*key) -> int:
    return int(np.random.SeedSequence(tuple(key)).generate_state(1)[0])


def load_arrays(manifest: data.DatasetManifest, resolution: int, subset="train"):
    records = manifest.train_records if subset == "train" else manifest.test_records
    return [data.load_pair(rec, resolution) for rec in records]


@dataclass
class Batch:
    gt_photo: torch.Tensor
    gt_sketch: torch.Tensor
    drawable: torch.Tensor
    mask: torch.Tensor
    photo_in: torch.Tensor
    levels: torch.Tensor
    radii: np.ndarray
    sample_keys: list[tuple]


def build_training_batch(items, indices, key_prefix, rough_cfg: RoughSketchConfig,
                         mode: str, fixed_level=None) -> Batch:
    """Assemble one batch; key_prefix = (seed, resolution, phase, epoch).

    Per-sample randomness is keyed on (key_prefix..., sample index, stream),
    so the result is identical however samples are distributed over workers.
    """
    photos, sketches, drawables, masks, photo_ins = [], [], [], [], []
    levels, radii, keys = [], [], []
    for idx in indices:
        photo, edges = items[idx]
        h, w = edges.shape
        key = (*key_prefix, idx)
        keys.append(key)

        if fixed_level is None:
            levels.append(sample_level(np.random.default_rng((*key, _TAG_LEVEL))))
        else:
            levels.append(float(fixed_level))
        radii.append(levels[-1] * rough_cfg.max_radius)

        if mode == "edit":
            mask = morphology.generate_mask(h, w, np.random.default_rng((*key, _TAG_MASK)))
        else:
            mask = images.all_ones_mask(h, w)

        edges_bin = morphology.binarize(edges, rough_cfg.binarize_threshold)
        region = morphology.make_drawable_region(
            edges_bin, levels[-1], rough_cfg,
            np.random.default_rng((*key, _TAG_AUGMENT)), training=True,
        )
        photos.append(photo)
        sketches.append(edges_bin)
        drawables.append(region * mask)
        masks.append(mask)
        photo_ins.append(data.masked_input(photo, mask))

    def stack_hw(arrs):
        return torch.from_numpy(np.stack(arrs)[:, None]).float()

    return Batch(
        gt_photo=torch.from_numpy(np.stack(photos)).permute(0, 3, 1, 2).float(),
        gt_sketch=stack_hw(sketches),
        drawable=stack_hw(drawables),
        mask=stack_hw(masks),
        photo_in=torch.from_numpy(np.stack(photo_ins)).permute(0, 3, 1, 2).float(),
        levels=torch.tensor(levels, dtype=torch.float32),
        radii=np.array(radii),
        sample_keys=keys,
    )


class MetricsLogger:
    """Line-oriented CSV, one row per optimizer step, flushed eagerly."""

    def __init__(self, path, fieldnames):
        self.path = Path(path)
        self.fieldnames = fieldnames
        exists = self.path.exists()
        self._fh = open(self.path, "a", newline="")
        self._writer = csv.DictWriter(self._fh, fieldnames=fieldnames)
        if not exists:
            self._writer.writeheader()
            self._fh.flush()

    def log(self, **row):
        self._writer.writerow({k: f"{v:.10g}" if isinstance(v, float) else v for k, v in row.items()})
        self._fh.flush()

    def close(self):
        self._fh.close()


REFINER_METRIC_FIELDS = [
    "step", "resolution", "phase", "epoch",
    "loss_rec", "loss_perc", "loss_adv_gen", "loss_adv_disc", "loss_total",
]
RENDERER_METRIC_FIELDS = [
    "step", "resolution", "epoch", "loss_l1", "loss_adv_gen", "loss_adv_disc", "loss_total",
]


def _require_finite(value, what, sample_keys):
    if not torch.isfinite(value):
        raise TrainingError(
            f"non-finite {what}; offending batch sample seeds: {sample_keys}",
            sample_keys=sample_keys,
        )


def refiner_train_step(batch: Batch, refiner, discriminator, opt_refiner, opt_disc,
                       weights: LossWeights, extractor, renderer=None):
    """One alternating update: discriminator on hinge loss, then refiner on
    the weighted total objective. The renderer, when present, is frozen and
    contributes the rendered-photo loss terms."""
    args = (batch.photo_in, batch.drawable, batch.mask, batch.levels)

    with torch.no_grad():
        fake = refiner(*args)
    real_scores = discriminator(batch.gt_photo, batch.gt_sketch, batch.mask)
    fake_scores = discriminator(fake.photo, fake.sketch, batch.mask)
    disc_loss = weights.adv_discriminator * losses.discriminator_hinge_loss(
        fake_scores, real_scores, weights.margin_refiner)
    _require_finite(disc_loss, "discriminator loss", batch.sample_keys)
    opt_disc.zero_grad()
    disc_loss.backward()
    opt_disc.step()

    out = refiner(*args)
    rendered = None
    if renderer is not None:
        rendered = renderer(batch.photo_in, out.sketch, batch.mask)
    rec = losses.reconstruction_loss(out.photo, out.sketch, batch.gt_photo,
                                     batch.gt_sketch, rendered_photo=rendered)
    perc = losses.perceptual_loss(out.photo, batch.gt_photo, extractor,
                                  weights.feature_layer_weights, rendered_photo=rendered)
    adv = losses.generator_adversarial_loss(
        discriminator(out.photo, out.sketch, batch.mask))
    total = losses.total_generator_objective(rec, perc, adv, weights)
    _require_finite(total, "generator loss", batch.sample_keys)
    opt_refiner.zero_grad()
    total.backward()
    opt_refiner.step()

    return {
        "loss_rec": rec.item(),
        "loss_perc": perc.item(),
        "loss_adv_gen": adv.item(),
        "loss_adv_disc": disc_loss.item(),
        "loss_total": total.item(),
    }


def _epoch_indices(n, key) -> np.ndarray:
    return np.random.default_rng((*key, _TAG_SHUFFLE)).permutation(n)


def _batched(order, batch_size):
    for start in range(0, len(order), batch_size):
        yield [int(i) for i in order[start:start + batch_size]]


def pretrain_renderer(items, cfg: TrainConfig, resolution: int, out_dir) -> Path:
    """Train the edge-to-photo renderer on (masked photo, edges, mask) -> photo
    with L1 plus a scalar spectral-norm discriminator; returns the checkpoint."""
    if not items:
        raise ConfigError("renderer pre-training needs a non-empty dataset")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    net_cfg = cfg.network_config(resolution)
    renderer = networks.build_renderer(net_cfg, _derived_torch_seed(cfg.seed, resolution, 10))
    disc = networks.build_renderer_discriminator(
        net_cfg, _derived_torch_seed(cfg.seed, resolution, 11))
    opt_r = torch.optim.Adam(renderer.parameters(), lr=cfg.learning_rate, betas=cfg.adam_betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.learning_rate, betas=cfg.adam_betas)
    logger = MetricsLogger(out_dir / f"metrics_renderer_{resolution}.csv",
                           RENDERER_METRIC_FIELDS)
    rough = cfg.rough.scaled_to_resolution(resolution)

    step = 0
    for epoch in range(cfg.renderer_epochs):
        key = (cfg.seed, resolution, 90, epoch)
        order = _epoch_indices(len(items), key)
        for indices in _batched(order, cfg.batch_size):
            batch = build_training_batch(items, indices, key, rough, cfg.mode,
                                         fixed_level=0.0)
            with torch.no_grad():
                fake = renderer(batch.photo_in, batch.gt_sketch, batch.mask)
            real_scores = disc(batch.gt_photo, batch.gt_sketch, batch.mask)
            fake_scores = disc(fake, batch.gt_sketch, batch.mask)
            d_loss = losses.discriminator_hinge_loss(
                fake_scores, real_scores, cfg.weights.margin_renderer)
            _require_finite(d_loss, "renderer discriminator loss", batch.sample_keys)
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()

            out = renderer(batch.photo_in, batch.gt_sketch, batch.mask)
            l1 = (out - batch.gt_photo).abs().mean()
            adv = losses.generator_adversarial_loss(
                disc(out, batch.gt_sketch, batch.mask))
            total = cfg.weights.rec * l1 + cfg.weights.adv_generator * adv
            _require_finite(total, "renderer loss", batch.sample_keys)
            opt_r.zero_grad()
            total.backward()
            opt_r.step()

            step += 1
            logger.log(step=step, resolution=resolution, epoch=epoch,
                       loss_l1=l1.item(), loss_adv_gen=adv.item(),
                       loss_adv_disc=d_loss.item(), loss_total=total.item())
    logger.close()

    path = out_dir / f"renderer_{resolution}.pt"
    networks.save_checkpoint(path, config=net_cfg, models={"renderer": renderer},
                             step=step, extra={"role": "renderer"})
    return path


def load_frozen_renderer(path):
    payload = networks.load_checkpoint(path)
    cfg = networks.config_from_checkpoint(payload)
    renderer = networks.RendererUNet(cfg)
    renderer.load_state_dict(payload["model_state"]["renderer"])
    renderer.eval()
    for p in renderer.parameters():
        p.requires_grad_(False)
    return renderer, cfg


def _stage_phases(cfg):
    return ((1, cfg.epochs_level_locked, 1.0), (2, cfg.epochs_level_sampled, None))


def run_schedule(manifest: data.DatasetManifest, cfg: TrainConfig, out_dir,
                 resume=False) -> dict:
    """Full pipeline: renderer pre-training where needed, then per-resolution
    refiner/discriminator training (level locked, then sampled). Returns the
    paths of final stage checkpoints, renderer checkpoints, and metrics."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = {"stages": {}, "renderers": {}, "metrics": out_dir / "metrics_refiner.csv"}

    renderers = {}
    for res in cfg.resolution_schedule:
        if cfg.adapt_to_renderer and res in cfg.renderer_stages:
            ckpt = out_dir / f"renderer_{res}.pt"
            if not (resume and ckpt.exists()):
                items = load_arrays(manifest, res)
                ckpt = pretrain_renderer(items, cfg, res, out_dir)
            renderers[res] = ckpt
            result["renderers"][res] = ckpt

    logger = MetricsLogger(result["metrics"], REFINER_METRIC_FIELDS)
    try:
        for res in cfg.resolution_schedule:
            final_path = out_dir / f"refiner_{res}_final.pt"
            if resume and final_path.exists():
                result["stages"][res] = final_path
                continue
            items = load_arrays(manifest, res)
            if not items:
                raise ConfigError("training needs a non-empty dataset")
            result["stages"][res] = _train_stage(
                items, cfg, res, out_dir, logger,
                renderers.get(res), resume=resume,
            )
    finally:
        logger.close()
    return result


def _train_stage(items, cfg, resolution, out_dir, logger, renderer_ckpt, resume):
    net_cfg = cfg.network_config(resolution)
    refiner = networks.build_refiner(net_cfg, _derived_torch_seed(cfg.seed, resolution, 0))
    disc = networks.build_discriminator(net_cfg, _derived_torch_seed(cfg.seed, resolution, 1))
    opt_r = torch.optim.Adam(refiner.parameters(), lr=cfg.learning_rate, betas=cfg.adam_betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.learning_rate, betas=cfg.adam_betas)
    extractor = RandomConvFeatureExtractor(seed=_derived_torch_seed(cfg.seed, resolution, 2))
    renderer = None
    if renderer_ckpt is not None:
        renderer, _ = load_frozen_renderer(renderer_ckpt)

    rough = cfg.rough.scaled_to_resolution(resolution)
    step = 0
    start_phase, start_epoch = 1, 0
    latest = _latest_stage_checkpoint(out_dir, resolution) if resume else None
    if latest is not None:
        payload = networks.load_checkpoint(latest)
        refiner.load_state_dict(payload["model_state"]["refiner"])
        disc.load_state_dict(payload["model_state"]["discriminator"])
        opt_r.load_state_dict(payload["optimizer_state"]["refiner"])
        opt_d.load_state_dict(payload["optimizer_state"]["discriminator"])
        step = payload["step"]
        start_phase = payload["extra"]["phase"]
        start_epoch = payload["extra"]["epoch"] + 1

    def save(path, phase, epoch):
        networks.save_checkpoint(
            path, config=net_cfg,
            models={"refiner": refiner, "discriminator": disc},
            optimizers={"refiner": opt_r, "discriminator": opt_d},
            step=step, extra={"phase": phase, "epoch": epoch, "max_radius": rough.max_radius},
        )

    for phase, epochs, fixed_level in _stage_phases(cfg):
        if phase < start_phase:
            continue
        first_epoch = start_epoch if phase == start_phase else 0
        for epoch in range(first_epoch, epochs):
            key = (cfg.seed, resolution, phase, epoch)
            order = _epoch_indices(len(items), key)
            for indices in _batched(order, cfg.batch_size):
                batch = build_training_batch(items, indices, key, rough, cfg.mode,
                                             fixed_level=fixed_level)
                metrics = refiner_train_step(batch, refiner, disc, opt_r, opt_d,
                                             cfg.weights, extractor, renderer)
                step += 1
                logger.log(step=step, resolution=resolution, phase=phase,
                           epoch=epoch, **metrics)
            if (epoch + 1) % cfg.checkpoint_every_epochs == 0:
                save(out_dir / f"refiner_{resolution}_p{phase}_e{epoch}.pt", phase, epoch)

    final_path = out_dir / f"refiner_{resolution}_final.pt"
    save(final_path, phase=2, epoch=max(cfg.epochs_level_sampled - 1, 0))
    return final_path


def _latest_stage_checkpoint(out_dir, resolution):
    candidates = sorted(
        Path(out_dir).glob(f"refiner_{resolution}_p*_e*.pt"),
        key=lambda p: (int(p.stem.split("_p")[1].split("_e")[0]),
                       int(p.stem.split("_e")[1])),
    )
    return candidates[-1] if candidates else None
