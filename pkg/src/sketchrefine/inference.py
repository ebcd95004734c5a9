"""Checkpoint loading and the refine / edit / synth operations.

A loaded bundle is an immutable snapshot: networks are in eval mode with
gradients disabled, every call runs under no_grad, and nothing mutates
state, so concurrent identical requests return identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from . import data, images, morphology, networks


class InferenceError(ValueError):
    """Request-level error (bad dimensions, missing inputs, wrong mode)."""


@dataclass(frozen=True)
class ModelBundle:
    refiner: torch.nn.Module
    config: networks.NetworkConfig
    max_radius: float
    step: int
    renderer: torch.nn.Module | None = None

    @property
    def resolution(self) -> int:
        return self.config.resolution

    @property
    def mode(self) -> str:
        return self.config.mode


def _freeze(net):
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return net


def load_bundle(refiner_checkpoint, renderer_checkpoint=None) -> ModelBundle:
    payload = networks.load_checkpoint(refiner_checkpoint)
    config = networks.config_from_checkpoint(payload)
    cls = (networks.RefinerGenerator if config.conditioning == "style"
           else networks.ConcatRefinerGenerator)
    refiner = cls(config)
    refiner.load_state_dict(payload["model_state"]["refiner"])
    _freeze(refiner)

    renderer = None
    if renderer_checkpoint is not None:
        rp = networks.load_checkpoint(renderer_checkpoint)
        rcfg = networks.config_from_checkpoint(rp)
        if rcfg.resolution != config.resolution:
            raise InferenceError(
                f"renderer resolution {rcfg.resolution} != refiner resolution {config.resolution}")
        renderer = networks.RendererUNet(rcfg)
        renderer.load_state_dict(rp["model_state"]["renderer"])
        _freeze(renderer)

    return ModelBundle(
        refiner=refiner,
        config=config,
        max_radius=float(payload["extra"].get("max_radius", 10.0)),
        step=payload["step"],
        renderer=renderer,
    )


def dilation_radius(bundle: ModelBundle, level: float) -> float:
    return morphology.validate_level(level) * bundle.max_radius


def _check_resolution(bundle, arr, what):
    r = bundle.resolution
    if arr.shape[:2] != (r, r):
        raise InferenceError(f"{what} must be {r}x{r}, got {arr.shape[0]}x{arr.shape[1]}")


def drawable_input(bundle: ModelBundle, sketch, mask, level) -> np.ndarray:
    """The coarse region actually fed to the refiner: binarized strokes
    dilated by level * max_radius, masked to the editable region."""
    sketch = images.validate_sketch(sketch)
    _check_resolution(bundle, sketch, "sketch")
    mask = images.validate_mask(mask)
    if mask.shape != sketch.shape:
        raise InferenceError("mask dimensions must match the sketch")
    radius = dilation_radius(bundle, level)
    coarse = morphology.dilate(morphology.binarize(sketch), radius)
    return coarse * mask


def _chw(arr):
    return torch.from_numpy(arr[None, None]).float()


def refine(bundle: ModelBundle, sketch, level, mask=None, photo=None) -> np.ndarray:
    """Refined stroke map for a drawn sketch at the given level.

    In edit mode the photo provides context (absent photo means blank
    context); synth-mode bundles consume the sketch alone. Deterministic.
    """
    sketch = images.validate_sketch(sketch)
    _check_resolution(bundle, sketch, "sketch")
    if mask is None:
        mask = images.all_ones_mask(*sketch.shape)
    region = drawable_input(bundle, sketch, mask, level)

    with torch.no_grad():
        if bundle.mode == "synth":
            out = bundle.refiner(None, _chw(region), None, float(level))
        else:
            if photo is None:
                photo_in = np.zeros((*sketch.shape, 3))
            else:
                photo = images.validate_photo(photo)
                _check_resolution(bundle, photo, "photo")
                photo_in = data.masked_input(photo, mask)
            photo_t = torch.from_numpy(photo_in).permute(2, 0, 1)[None].float()
            out = bundle.refiner(photo_t, _chw(region), _chw(mask), float(level))
    return out.sketch[0, 0].numpy().astype(np.float64)


def composite_known(rendered: np.ndarray, original: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Paste the untouched photo back outside the editable region."""
    m = mask[:, :, None]
    return rendered * m + original * (1.0 - m)


def edit(bundle: ModelBundle, photo, mask, sketch, level,
         outputs=("refined_sketch", "generated_photo", "final_photo")) -> dict:
    """Masked editing: refine the strokes, complete the photo, and render the
    final composite. Only the requested outputs are computed; the renderer is
    skipped entirely unless final_photo is asked for."""
    if bundle.mode != "edit":
        raise InferenceError("editing requires an edit-mode model")
    if photo is None or mask is None:
        raise InferenceError("edit mode requires both a photo and a mask")
    photo = images.validate_photo(photo)
    mask = images.validate_mask(mask)
    sketch = images.validate_sketch(sketch)
    for arr, what in ((photo, "photo"), (sketch, "sketch")):
        _check_resolution(bundle, arr, what)
    if mask.shape != sketch.shape:
        raise InferenceError("mask dimensions must match the sketch")
    unknown = set(outputs) - {"refined_sketch", "generated_photo", "final_photo"}
    if unknown:
        raise InferenceError(f"unknown outputs requested: {sorted(unknown)}")

    region = drawable_input(bundle, sketch, mask, level)
    photo_in = data.masked_input(photo, mask)
    with torch.no_grad():
        photo_t = torch.from_numpy(photo_in).permute(2, 0, 1)[None].float()
        out = bundle.refiner(photo_t, _chw(region), _chw(mask), float(level))
        result = {}
        if "refined_sketch" in outputs:
            result["refined_sketch"] = out.sketch[0, 0].numpy().astype(np.float64)
        if "generated_photo" in outputs:
            result["generated_photo"] = (
                out.photo[0].permute(1, 2, 0).numpy().astype(np.float64))
        if "final_photo" in outputs:
            if bundle.renderer is None:
                raise InferenceError("final_photo requires a renderer checkpoint")
            rendered = bundle.renderer(photo_t, out.sketch, _chw(mask))
            rendered = rendered[0].permute(1, 2, 0).numpy().astype(np.float64)
            result["final_photo"] = composite_known(rendered, photo, mask)
    return result


def synth(bundle: ModelBundle, sketch, level,
          outputs=("refined_sketch", "generated_photo")) -> dict:
    """Bare sketch-to-photo translation with the reduced-input model."""
    if bundle.mode != "synth":
        raise InferenceError("synthesis requires a synth-mode model")
    sketch = images.validate_sketch(sketch)
    _check_resolution(bundle, sketch, "sketch")
    unknown = set(outputs) - {"refined_sketch", "generated_photo"}
    if unknown:
        raise InferenceError(f"unknown outputs requested: {sorted(unknown)}")

    mask = images.all_ones_mask(*sketch.shape)
    region = drawable_input(bundle, sketch, mask, level)
    with torch.no_grad():
        out = bundle.refiner(None, _chw(region), None, float(level))
    result = {}
    if "refined_sketch" in outputs:
        result["refined_sketch"] = out.sketch[0, 0].numpy().astype(np.float64)
    if "generated_photo" in outputs:
        result["generated_photo"] = out.photo[0].permute(1, 2, 0).numpy().astype(np.float64)
    return result
