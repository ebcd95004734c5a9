"""Command-line entry points: data preparation, training, inference, serving."""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path

import click
import numpy as np

from . import data, images, inference, morphology, service, training

CHECKPOINT_DIR_ENV = "SKETCHREFINE_CHECKPOINT_DIR"


def _default_checkpoint(name):
    root = os.environ.get(CHECKPOINT_DIR_ENV)
    if root:
        candidate = Path(root) / name
        if candidate.exists():
            return candidate
    return None


def _resolve_checkpoint(value, name, required=True):
    if value is not None:
        return Path(value)
    found = _default_checkpoint(name)
    if found is None and required:
        raise click.UsageError(
            f"--checkpoint not given and {name} not found under ${CHECKPOINT_DIR_ENV}")
    return found


@click.group()
def main():
    """Sketch refinement and sketch-based photo editing."""


@main.command("prepare-data")
@click.option("--data-root", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--resolution", default=256, type=click.Choice([64, 128, 256]))
@click.option("--train-count", default=None, type=int,
              help="First N photos (filename order) go to the train split.")
@click.option("--max-radius", default=10.0, show_default=True)
@click.option("--level", default=None, type=click.FloatRange(0, 1),
              help="Fixed refinement level; sampled uniformly per image when omitted.")
@click.option("--seed", default=0, show_default=True)
def prepare_data(data_root, out_dir, resolution, train_count, max_radius, level, seed):
    """Emit (rough, fine, mask) training triples plus a manifest."""
    manifest = data.build_manifest(
        data_root, resolution, train_count if train_count is not None else 10**9)
    rough_cfg = morphology.RoughSketchConfig(
        max_radius=max_radius, rng_seed=seed).scaled_to_resolution(resolution)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "triples.jsonl"
    with open(manifest_path, "w") as fh:
        for idx, record in enumerate(manifest.train_records):
            photo, edges = data.load_pair(record, resolution)
            rng = np.random.default_rng((seed, idx))
            lvl = float(level) if level is not None else training.sample_level(rng)
            mask = morphology.generate_mask(resolution, resolution, rng)
            fine = morphology.binarize(edges, rough_cfg.binarize_threshold)
            rough = morphology.make_drawable_region(
                fine, lvl, rough_cfg, rng, training=True) * mask
            stem = record.photo_path.stem
            paths = {
                "rough": out_dir / f"{stem}_rough.png",
                "fine": out_dir / f"{stem}_fine.png",
                "mask": out_dir / f"{stem}_mask.png",
            }
            images.save_sketch_png(paths["rough"], rough)
            images.save_sketch_png(paths["fine"], fine)
            images.save_mask_png(paths["mask"], mask)
            fh.write(json.dumps({
                "rough": str(paths["rough"]),
                "fine": str(paths["fine"]),
                "mask": str(paths["mask"]),
                "level": lvl,
                "seed": seed,
            }) + "\n")
    click.echo(f"wrote {len(manifest.train_records)} triples to {out_dir}")


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              help="JSON file of TrainConfig overrides; desk profile when omitted.")
@click.option("--data-root", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--train-count", default=16, show_default=True)
@click.option("--mode", type=click.Choice(["edit", "synth"]), default=None)
@click.option("--ablate", multiple=True,
              type=click.Choice(["deform", "discard", "adapt", "concat"]))
@click.option("--resume", is_flag=True)
def train(config_path, data_root, out_dir, train_count, mode, ablate, resume):
    """Run the multi-scale training schedule."""
    if config_path is not None:
        cfg = training.train_config_from_dict(json.loads(config_path.read_text()))
    else:
        cfg = training.desk_profile()
    if mode is not None:
        cfg = dataclasses.replace(cfg, mode=mode)
    rough = cfg.rough
    if "deform" in ablate:
        rough = dataclasses.replace(rough, deform_enabled=False)
    if "discard" in ablate:
        rough = dataclasses.replace(rough, discard_enabled=False)
    cfg = dataclasses.replace(cfg, rough=rough)
    if "adapt" in ablate:
        cfg = dataclasses.replace(cfg, adapt_to_renderer=False)
    if "concat" in ablate:
        cfg = dataclasses.replace(cfg, conditioning="concat")

    manifest = data.build_manifest(data_root, cfg.resolution_schedule[0], train_count)
    result = training.run_schedule(manifest, cfg, out_dir, resume=resume)
    for res, path in result["stages"].items():
        click.echo(f"stage {res}: {path}")
    click.echo(f"metrics: {result['metrics']}")


def _load_bundle_options(checkpoint, renderer_checkpoint, need_renderer=False):
    refiner = _resolve_checkpoint(checkpoint, "refiner.pt")
    renderer = _resolve_checkpoint(renderer_checkpoint, "renderer.pt",
                                   required=need_renderer)
    return inference.load_bundle(refiner, renderer)


@main.command("refine")
@click.option("--sketch", "sketch_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--mask", "mask_path", type=click.Path(exists=True, path_type=Path))
@click.option("--photo", "photo_path", type=click.Path(exists=True, path_type=Path))
@click.option("--level", default=1.0, type=click.FloatRange(0, 1), show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path))
@click.option("--renderer-checkpoint", type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
def refine_cmd(sketch_path, mask_path, photo_path, level, checkpoint,
               renderer_checkpoint, out_dir):
    """Refine a drawn sketch at the chosen level."""
    bundle = _load_bundle_options(checkpoint, renderer_checkpoint)
    sketch = images.load_sketch_png(sketch_path)
    mask = images.load_mask_png(mask_path) if mask_path else None
    photo = images.load_photo_png(photo_path) if photo_path else None
    refined = inference.refine(bundle, sketch, level, mask=mask, photo=photo)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "refined_sketch.png"
    images.save_sketch_png(out_path, refined)
    click.echo(f"radius {inference.dilation_radius(bundle, level):g} -> {out_path}")


@main.command("edit")
@click.option("--photo", "photo_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--mask", "mask_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--sketch", "sketch_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--level", default=1.0, type=click.FloatRange(0, 1), show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path))
@click.option("--renderer-checkpoint", type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--return", "outputs", multiple=True,
              type=click.Choice(["refined_sketch", "generated_photo", "final_photo"]),
              help="Outputs to produce; all three when omitted.")
def edit_cmd(photo_path, mask_path, sketch_path, level, checkpoint,
             renderer_checkpoint, out_dir, outputs):
    """Edit the masked region of a photo, guided by a sketch."""
    outputs = outputs or ("refined_sketch", "generated_photo", "final_photo")
    bundle = _load_bundle_options(checkpoint, renderer_checkpoint,
                                  need_renderer="final_photo" in outputs)
    result = inference.edit(
        bundle,
        images.load_photo_png(photo_path),
        images.load_mask_png(mask_path),
        images.load_sketch_png(sketch_path),
        level,
        outputs=outputs,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    for key, arr in result.items():
        path = out_dir / f"{key}.png"
        if key == "refined_sketch":
            images.save_sketch_png(path, arr)
        else:
            images.save_photo_png(path, arr)
        click.echo(str(path))


@main.command("synth")
@click.option("--sketch", "sketch_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--level", default=1.0, type=click.FloatRange(0, 1), show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
def synth_cmd(sketch_path, level, checkpoint, out_dir):
    """Translate a bare sketch to a photo with a synth-mode model."""
    refiner = _resolve_checkpoint(checkpoint, "synth.pt")
    bundle = inference.load_bundle(refiner)
    result = inference.synth(bundle, images.load_sketch_png(sketch_path), level)
    out_dir.mkdir(parents=True, exist_ok=True)
    images.save_sketch_png(out_dir / "refined_sketch.png", result["refined_sketch"])
    images.save_photo_png(out_dir / "generated_photo.png", result["generated_photo"])
    click.echo(str(out_dir))


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path))
@click.option("--renderer-checkpoint", type=click.Path(exists=True, path_type=Path))
def serve_cmd(host, port, checkpoint, renderer_checkpoint):
    """Serve refine/edit/synth over HTTP."""
    refiner = _resolve_checkpoint(checkpoint, "refiner.pt")
    renderer = _resolve_checkpoint(renderer_checkpoint, "renderer.pt", required=False)
    service.serve(host, port, refiner, renderer)


if __name__ == "__main__":
    main()
