"""Level-conditioned refiner generator, patch discriminator, and edge renderer.

The refiner maps a coarse drawable region (plus masked photo context in edit
mode) back to fine lines and a completed photo. The refinement level enters
through a style MLP whose per-layer outputs drive AdaIN de-stylization. The
discriminator is a spectrally normalized patch scorer; the renderer is a
U-Net translating (masked photo, sketch, mask) to a photo and stays frozen
while the refiner trains.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.parametrizations import spectral_norm

CHECKPOINT_VERSION = 1

_EXTRA_BLOCKS = {64: 0, 128: 1, 256: 2}


@dataclass(frozen=True)
class NetworkConfig:
    resolution: int = 256
    base_channels: int = 64
    n_resblocks: int = 4
    d_style: int = 64
    style_hidden_layers: int = 3
    mode: str = "edit"  # "edit" consumes (photo, sketch, mask); "synth" sketch only
    conditioning: str = "style"  # "style" (AdaIN) or "concat" (extra level channel)
    norm_eps: float = 1e-5

    def __post_init__(self):
        if self.resolution not in _EXTRA_BLOCKS:
            raise ValueError(f"resolution must be one of {sorted(_EXTRA_BLOCKS)}")
        if self.mode not in ("edit", "synth"):
            raise ValueError("mode must be 'edit' or 'synth'")
        if self.conditioning not in ("style", "concat"):
            raise ValueError("conditioning must be 'style' or 'concat'")

    @property
    def discriminator_extra_blocks(self) -> int:
        return _EXTRA_BLOCKS[self.resolution]

    @property
    def generator_in_channels(self) -> int:
        return 5 if self.mode == "edit" else 1


@dataclass
class StyleBundle:
    """Global style code plus raw per-layer (mean, scale) pairs.

    Scales are stored unconstrained; `layer_stats` maps them through exp so
    the modulation std is always positive.
    """

    global_code: torch.Tensor
    per_layer: list[tuple[torch.Tensor, torch.Tensor]] = field(default_factory=list)

    def layer_stats(self, index):
        mean, raw_scale = self.per_layer[index]
        return mean, torch.exp(raw_scale)


def adain_modulate(features, mean, std, eps=1e-5):
    """Standardize each channel over its spatial extent, then scale and shift
    with the externally supplied statistics."""
    if mean.dim() == 1:
        mean = mean.unsqueeze(0)
    if std.dim() == 1:
        std = std.unsqueeze(0)
    mu = features.mean(dim=(2, 3), keepdim=True)
    var = features.var(dim=(2, 3), unbiased=False, keepdim=True)
    normalized = (features - mu) / torch.sqrt(var + eps)
    return std[:, :, None, None] * normalized + mean[:, :, None, None]


def _as_level_tensor(level, batch, device, dtype):
    if not torch.is_tensor(level):
        level = torch.as_tensor(level, dtype=dtype, device=device)
    level = level.to(device=device, dtype=dtype)
    if level.dim() == 0:
        level = level.expand(batch)
    if level.dim() != 1 or level.shape[0] != batch:
        raise ValueError(f"level must be scalar or shape ({batch},)")
    if (level < 0).any() or (level > 1).any():
        raise ValueError("refinement level must lie in [0, 1]")
    return level.unsqueeze(1)


class StyleMLP(nn.Module):
    """Decodes the refinement level into a global style code and raw
    per-AdaIN-layer (mean, scale) vectors."""

    def __init__(self, adain_channels, d_style=64, hidden_layers=3):
        super().__init__()
        trunk = []
        width = 1
        for _ in range(hidden_layers):
            trunk += [nn.Linear(width, d_style), nn.ReLU()]
            width = d_style
        trunk.append(nn.Linear(width, d_style))
        self.trunk = nn.Sequential(*trunk)
        self.to_mean = nn.ModuleList(nn.Linear(d_style, c) for c in adain_channels)
        self.to_scale = nn.ModuleList(nn.Linear(d_style, c) for c in adain_channels)

    def forward(self, level, batch=1, device=None, dtype=None):
        p = next(self.parameters())
        device = device or p.device
        dtype = dtype or p.dtype
        lvl = _as_level_tensor(level, batch, device, dtype)
        code = self.trunk(lvl)
        per_layer = [(m(code), s(code)) for m, s in zip(self.to_mean, self.to_scale)]
        return StyleBundle(global_code=code, per_layer=per_layer)


class _AdainResBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)

    def forward(self, x, stats1, stats2, eps):
        h = F.relu(adain_modulate(self.conv1(x), *stats1, eps=eps))
        h = adain_modulate(self.conv2(h), *stats2, eps=eps)
        return x + h


@dataclass
class GeneratorOutput:
    photo: torch.Tensor  # B x 3 x H x W in [-1, 1]
    sketch: torch.Tensor  # B x 1 x H x W in [0, 1]

    def concatenated(self):
        return torch.cat([self.photo, self.sketch], dim=1)


class RefinerGenerator(nn.Module):
    """Encoder-ResBlocks-Decoder with encoder/decoder skip connections.

    Every conv except the first and last is followed by AdaIN driven by the
    style MLP; skips bypass the modulation.
    """

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        c = config.base_channels
        in_ch = config.generator_in_channels
        self.enc0 = nn.Conv2d(in_ch, c, 7, 1, 3)
        self.enc1 = nn.Conv2d(c, 2 * c, 3, 2, 1)
        self.enc2 = nn.Conv2d(2 * c, 4 * c, 3, 2, 1)
        self.resblocks = nn.ModuleList(
            _AdainResBlock(4 * c) for _ in range(config.n_resblocks)
        )
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.dec1 = nn.Conv2d(4 * c + 2 * c, 2 * c, 3, 1, 1)
        self.dec2 = nn.Conv2d(2 * c + c, c, 3, 1, 1)
        self.final = nn.Conv2d(c, 4, 7, 1, 3)

        adain_channels = [2 * c, 4 * c]
        adain_channels += [4 * c, 4 * c] * config.n_resblocks
        adain_channels += [2 * c, c]
        self.style = StyleMLP(adain_channels, config.d_style, config.style_hidden_layers)
        self.n_adain_layers = len(adain_channels)

    def _check_spatial(self, x):
        if x.shape[-2:] != (self.config.resolution, self.config.resolution):
            raise ValueError(
                f"expected {self.config.resolution}x{self.config.resolution} inputs, "
                f"got {tuple(x.shape[-2:])}"
            )

    def forward(self, photo_in, sketch, mask, level):
        if self.config.mode == "edit":
            x = torch.cat([photo_in, sketch, mask], dim=1)
        else:
            x = sketch
        self._check_spatial(x)
        bundle = self.style(level, batch=x.shape[0], device=x.device, dtype=x.dtype)
        eps = self.config.norm_eps
        stats = [bundle.layer_stats(i) for i in range(self.n_adain_layers)]
        it = iter(stats)

        e0 = F.relu(self.enc0(x))
        e1 = F.relu(adain_modulate(self.enc1(e0), *next(it), eps=eps))
        e2 = F.relu(adain_modulate(self.enc2(e1), *next(it), eps=eps))
        h = e2
        for block in self.resblocks:
            h = block(h, next(it), next(it), eps)
        d1 = F.relu(adain_modulate(self.dec1(torch.cat([self.up(h), e1], 1)), *next(it), eps=eps))
        d2 = F.relu(adain_modulate(self.dec2(torch.cat([self.up(d1), e0], 1)), *next(it), eps=eps))
        out = self.final(d2)
        return GeneratorOutput(photo=torch.tanh(out[:, :3]), sketch=torch.sigmoid(out[:, 3:]))


class ConcatRefinerGenerator(nn.Module):
    """Ablation baseline: the level enters as a constant extra input channel
    and plain (parameter-free) instance norm replaces AdaIN."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        c = config.base_channels
        in_ch = config.generator_in_channels + 1
        self.enc0 = nn.Conv2d(in_ch, c, 7, 1, 3)
        self.enc1 = nn.Conv2d(c, 2 * c, 3, 2, 1)
        self.enc2 = nn.Conv2d(2 * c, 4 * c, 3, 2, 1)
        self.res_convs = nn.ModuleList(
            nn.Conv2d(4 * c, 4 * c, 3, 1, 1) for _ in range(2 * config.n_resblocks)
        )
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.dec1 = nn.Conv2d(4 * c + 2 * c, 2 * c, 3, 1, 1)
        self.dec2 = nn.Conv2d(2 * c + c, c, 3, 1, 1)
        self.final = nn.Conv2d(c, 4, 7, 1, 3)

    def _norm(self, x):
        return F.instance_norm(x, eps=self.config.norm_eps)

    def forward(self, photo_in, sketch, mask, level):
        if self.config.mode == "edit":
            x = torch.cat([photo_in, sketch, mask], dim=1)
        else:
            x = sketch
        lvl = _as_level_tensor(level, x.shape[0], x.device, x.dtype)
        plane = lvl[:, :, None, None].expand(-1, 1, x.shape[2], x.shape[3])
        x = torch.cat([x, plane], dim=1)

        e0 = F.relu(self.enc0(x))
        e1 = F.relu(self._norm(self.enc1(e0)))
        e2 = F.relu(self._norm(self.enc2(e1)))
        h = e2
        for i in range(0, len(self.res_convs), 2):
            r = F.relu(self._norm(self.res_convs[i](h)))
            h = h + self._norm(self.res_convs[i + 1](r))
        d1 = F.relu(self._norm(self.dec1(torch.cat([self.up(h), e1], 1))))
        d2 = F.relu(self._norm(self.dec2(torch.cat([self.up(d1), e0], 1))))
        out = self.final(d2)
        return GeneratorOutput(photo=torch.tanh(out[:, :3]), sketch=torch.sigmoid(out[:, 3:]))


class PatchDiscriminator(nn.Module):
    """SN-PatchGAN scorer over (photo, sketch, mask); raw hinge scores, no
    sigmoid. Extra downsampling blocks keep the score grid at the same size
    across resolutions (0/1/2 extra for 64/128/256)."""

    def __init__(self, config: NetworkConfig, power_iterations=1):
        super().__init__()
        self.config = config
        c = config.base_channels

        def snconv(cin, cout, stride):
            conv = nn.Conv2d(cin, cout, 4, stride, 1) if stride == 2 else \
                nn.Conv2d(cin, cout, 3, 1, 1)
            return spectral_norm(conv, n_power_iterations=power_iterations)

        blocks = [snconv(5, c, 2), snconv(c, 2 * c, 2), snconv(2 * c, 4 * c, 2)]
        for _ in range(config.discriminator_extra_blocks):
            blocks.append(snconv(4 * c, 4 * c, 2))
        self.blocks = nn.ModuleList(blocks)
        self.head = snconv(4 * c, 1, 1)

    @property
    def score_grid_size(self):
        return self.config.resolution // 2 ** (3 + self.config.discriminator_extra_blocks)

    def forward(self, photo, sketch, mask):
        if photo.shape[-2:] != sketch.shape[-2:] or photo.shape[-2:] != mask.shape[-2:]:
            raise ValueError("photo/sketch/mask spatial dims must match")
        x = torch.cat([photo, sketch, mask], dim=1)
        for block in self.blocks:
            x = F.leaky_relu(block(x), 0.2)
        return self.head(x)


class RendererUNet(nn.Module):
    """U-Net translating (masked photo, sketch, mask) to a full photo."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        c = config.base_channels
        depth = {64: 4, 128: 5, 256: 6}[config.resolution]
        enc_ch = [min(c * 2 ** i, 8 * c) for i in range(depth)]

        self.downs = nn.ModuleList()
        self.down_norms = nn.ModuleList()
        prev = 5
        for i, ch in enumerate(enc_ch):
            self.downs.append(nn.Conv2d(prev, ch, 4, 2, 1))
            self.down_norms.append(nn.BatchNorm2d(ch) if i > 0 else nn.Identity())
            prev = ch

        self.ups = nn.ModuleList()
        self.up_norms = nn.ModuleList()
        for i in reversed(range(1, depth)):
            cin = prev + (enc_ch[i] if i < depth - 1 else 0)
            self.ups.append(nn.ConvTranspose2d(cin, enc_ch[i - 1], 4, 2, 1))
            self.up_norms.append(nn.BatchNorm2d(enc_ch[i - 1]))
            prev = enc_ch[i - 1]
        self.final = nn.ConvTranspose2d(prev + enc_ch[0], 3, 4, 2, 1)

    def forward(self, photo_in, sketch, mask):
        x = torch.cat([photo_in, sketch, mask], dim=1)
        skips = []
        for conv, norm in zip(self.downs, self.down_norms):
            x = F.leaky_relu(norm(conv(x)), 0.2)
            skips.append(x)
        x = skips[-1]
        for j, (up, norm) in enumerate(zip(self.ups, self.up_norms)):
            if j > 0:
                x = torch.cat([x, skips[len(skips) - 1 - j]], dim=1)
            x = F.relu(norm(up(x)))
        x = torch.cat([x, skips[0]], dim=1)
        return torch.tanh(self.final(x))


class RendererScoreDiscriminator(nn.Module):
    """Patch backbone plus a spectrally normalized linear head producing one
    scalar score per sample; used only when pre-training the renderer."""

    def __init__(self, config: NetworkConfig, power_iterations=1):
        super().__init__()
        self.backbone = PatchDiscriminator(config, power_iterations=power_iterations)
        g = self.backbone.score_grid_size
        self.head = spectral_norm(nn.Linear(g * g, 1), n_power_iterations=power_iterations)

    def forward(self, photo, sketch, mask):
        grid = self.backbone(photo, sketch, mask)
        return self.head(grid.flatten(1))


def _init_gan_weights(module):
    # convs only: a 0.02-std init across the style MLP would crush the level
    # signal to numerical noise, so linear layers keep the default init
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, 0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def build_refiner(config: NetworkConfig, seed: int):
    torch.manual_seed(seed)
    net = (RefinerGenerator if config.conditioning == "style" else ConcatRefinerGenerator)(config)
    _init_gan_weights(net)
    return net


def build_discriminator(config: NetworkConfig, seed: int, power_iterations=1):
    torch.manual_seed(seed)
    net = PatchDiscriminator(config, power_iterations=power_iterations)
    _init_gan_weights(net)
    return net


def build_renderer(config: NetworkConfig, seed: int):
    torch.manual_seed(seed)
    net = RendererUNet(config)
    _init_gan_weights(net)
    return net


def build_renderer_discriminator(config: NetworkConfig, seed: int, power_iterations=1):
    torch.manual_seed(seed)
    net = RendererScoreDiscriminator(config, power_iterations=power_iterations)
    _init_gan_weights(net)
    return net


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def parameter_checksum(module: nn.Module) -> float:
    """Cheap freeze detector: exact sum of all parameter values."""
    with torch.no_grad():
        return float(sum(p.double().sum() for p in module.parameters()))


def save_checkpoint(path, *, config: NetworkConfig, models: dict, step: int,
                    optimizers: dict | None = None, extra: dict | None = None):
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "step": step,
        "model_state": {name: m.state_dict() for name, m in models.items()},
        "optimizer_state": {name: o.state_dict() for name, o in (optimizers or {}).items()},
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_checkpoint(path) -> dict:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    return payload


def config_from_checkpoint(payload: dict) -> NetworkConfig:
    return NetworkConfig(**payload["config"])
