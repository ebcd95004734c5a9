"""Training objectives: L1 reconstruction, perceptual distance, hinge GAN.

Reductions are means over all elements, so the loss weights transfer across
resolutions unchanged. Terms involving the rendered photo are optional and
enter only when a frozen renderer participates (the 256 stage by default).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn


@dataclass(frozen=True)
class LossWeights:
    rec: float = 100.0
    perc: float = 1.0
    adv_generator: float = 1.0
    adv_discriminator: float = 1.0
    margin_refiner: float = 10.0   # hinge margin for the refiner's discriminator
    margin_renderer: float = 1.0   # hinge margin when pre-training the renderer
    feature_layer_weights: tuple[float, ...] = (1.0, 0.5)

    def __post_init__(self):
        values = (self.rec, self.perc, self.adv_generator, self.adv_discriminator)
        if any(v < 0 for v in values):
            raise ValueError("loss weights must be non-negative")
        if any(v < 0 for v in self.feature_layer_weights):
            raise ValueError("feature layer weights must be non-negative")


def _check_same_shape(a, b, what):
    if a.shape != b.shape:
        raise ValueError(f"{what} shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def reconstruction_loss(gen_photo, gen_sketch, gt_photo, gt_sketch, rendered_photo=None):
    """Mean-per-element L1 of each prediction/target pair, summed. The
    rendered-photo term is skipped when rendered_photo is None."""
    _check_same_shape(gen_photo, gt_photo, "photo")
    _check_same_shape(gen_sketch, gt_sketch, "sketch")
    total = (gen_photo - gt_photo).abs().mean() + (gen_sketch - gt_sketch).abs().mean()
    if rendered_photo is not None:
        _check_same_shape(rendered_photo, gt_photo, "rendered photo")
        total = total + (rendered_photo - gt_photo).abs().mean()
    return total


def perceptual_loss(gen_photo, gt_photo, extractor, layer_weights, rendered_photo=None):
    """Weighted squared feature distances against the target photo, summed
    over taps; mean-per-element within each tap."""
    gt_feats = extractor(gt_photo)
    if len(layer_weights) != len(gt_feats):
        raise ValueError(
            f"{len(layer_weights)} layer weights for {len(gt_feats)} feature taps"
        )
    gen_feats = extractor(gen_photo)
    rendered_feats = extractor(rendered_photo) if rendered_photo is not None else None
    total = gen_photo.new_zeros(())
    for i, w in enumerate(layer_weights):
        term = (gen_feats[i] - gt_feats[i]).pow(2).mean()
        if rendered_feats is not None:
            term = term + (rendered_feats[i] - gt_feats[i]).pow(2).mean()
        total = total + w * term
    return total


def generator_adversarial_loss(fake_scores):
    """Negated mean of the patch scores for generated samples."""
    return -fake_scores.mean()


def discriminator_hinge_loss(fake_scores, real_scores, margin):
    """mean ReLU(margin + fake) + mean ReLU(margin - real)."""
    return F.relu(margin + fake_scores).mean() + F.relu(margin - real_scores).mean()


def total_generator_objective(rec, perc, adv, weights: LossWeights):
    return weights.rec * rec + weights.perc * perc + weights.adv_generator * adv


class IdentityFeatureExtractor:
    """Single tap returning the input itself; handy as a loss-level oracle."""

    def __call__(self, photo):
        return [photo]


class RandomConvFeatureExtractor(nn.Module):
    """Fixed, seeded two-tap conv stack. A drop-in perceptual backbone for
    desk-scale runs where shipping pretrained weights is not an option."""

    def __init__(self, seed=0, channels=8):
        super().__init__()
        torch.manual_seed(seed)
        self.conv1 = nn.Conv2d(3, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, 2 * channels, 3, 2, 1)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, photo):
        t1 = F.relu(self.conv1(photo))
        t2 = F.relu(self.conv2(t1))
        return [t1, t2]

    __call__ = nn.Module.__call__


class VGGFeatureExtractor(nn.Module):
    """conv2_1 and conv3_1 taps of VGG19. Requires torchvision; pass
    pretrained=False to skip the weight download (taps stay random)."""

    _TAP_INDICES = (5, 10)  # conv2_1, conv3_1 outputs in vgg19().features
    _MEAN = (0.485, 0.456, 0.406)
    _STD = (0.229, 0.224, 0.225)

    def __init__(self, pretrained=True):
        super().__init__()
        try:
            from torchvision.models import vgg19
            from torchvision.models import VGG19_Weights
        except ImportError as exc:
            raise ImportError(
                "VGGFeatureExtractor needs torchvision; install the 'vgg' extra"
            ) from exc
        weights = VGG19_Weights.IMAGENET1K_V1 if pretrained else None
        features = vgg19(weights=weights).features
        self.slices = nn.ModuleList()
        start = 0
        for end in self._TAP_INDICES:
            self.slices.append(nn.Sequential(*[features[i] for i in range(start, end + 1)]))
            start = end + 1
        for p in self.parameters():
            p.requires_grad_(False)
        self.register_buffer("mean", torch.tensor(self._MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(self._STD).view(1, 3, 1, 1))

    def forward(self, photo):
        # photos arrive in [-1, 1]
        x = ((photo + 1.0) / 2.0 - self.mean) / self.std
        taps = []
        for block in self.slices:
            x = block(x)
            taps.append(x)
        return taps
