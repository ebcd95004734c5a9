import dataclasses

import numpy as np
import pytest
import torch

from sketchrefine import networks
from sketchrefine.networks import (
    NetworkConfig,
    adain_modulate,
    build_discriminator,
    build_refiner,
    build_renderer,
    count_parameters,
)


def tiny_config(**kw):
    defaults = dict(resolution=64, base_channels=8, n_resblocks=2, d_style=16)
    defaults.update(kw)
    return NetworkConfig(**defaults)


def edit_inputs(cfg, batch=2, seed=0, dtype=torch.float32):
    g = torch.Generator().manual_seed(seed)
    r = cfg.resolution
    photo = torch.rand(batch, 3, r, r, generator=g, dtype=dtype) * 2 - 1
    sketch = torch.rand(batch, 1, r, r, generator=g, dtype=dtype)
    mask = (torch.rand(batch, 1, r, r, generator=g, dtype=dtype) > 0.5).to(dtype)
    return photo, sketch, mask


class TestAdainModulate:
    def test_transfers_target_stats(self):
        g = torch.Generator().manual_seed(1)
        x = torch.randn(2, 4, 16, 16, generator=g)
        x = (x - x.mean(dim=(2, 3), keepdim=True)) / x.std(dim=(2, 3), unbiased=False, keepdim=True)
        mean = torch.full((2, 4), 2.0)
        std = torch.full((2, 4), 3.0)
        out = adain_modulate(x, mean, std)
        assert torch.allclose(out.mean(dim=(2, 3)), mean, atol=1e-4)
        assert torch.allclose(out.std(dim=(2, 3), unbiased=False), std, atol=1e-4)

    def test_identity_style_standardizes(self):
        g = torch.Generator().manual_seed(2)
        x = torch.randn(1, 3, 8, 8, generator=g) * 5 + 1
        out = adain_modulate(x, torch.zeros(3), torch.ones(3))
        assert torch.allclose(out.mean(dim=(2, 3)), torch.zeros(1, 3), atol=1e-4)
        assert torch.allclose(out.std(dim=(2, 3), unbiased=False), torch.ones(1, 3), atol=1e-3)

    def test_constant_channel_collapses_to_style_mean(self):
        x = torch.full((1, 2, 8, 8), 7.0)
        out = adain_modulate(x, torch.tensor([1.5, -0.5]), torch.tensor([2.0, 2.0]))
        assert torch.allclose(out[0, 0], torch.full((8, 8), 1.5))
        assert torch.allclose(out[0, 1], torch.full((8, 8), -0.5))


class TestStyleMLP:
    def test_deterministic_and_sized(self):
        cfg = tiny_config()
        net = build_refiner(cfg, seed=3)
        a = net.style(0.5)
        b = net.style(0.5)
        assert torch.equal(a.global_code, b.global_code)
        assert len(a.per_layer) == net.n_adain_layers
        for (m1, s1), (m2, s2) in zip(a.per_layer, b.per_layer):
            assert torch.equal(m1, m2) and torch.equal(s1, s2)

    def test_zero_weights_give_zero_codes(self):
        cfg = tiny_config()
        net = build_refiner(cfg, seed=4)
        with torch.no_grad():
            for p in net.style.parameters():
                p.zero_()
        bundle = net.style(0.7)
        assert torch.equal(bundle.global_code, torch.zeros_like(bundle.global_code))
        for mean, raw in bundle.per_layer:
            assert torch.equal(mean, torch.zeros_like(mean))
            assert torch.equal(raw, torch.zeros_like(raw))

    def test_level_out_of_range_rejected(self):
        net = build_refiner(tiny_config(), seed=5)
        with pytest.raises(ValueError):
            net.style(1.2)
        with pytest.raises(ValueError):
            net.style(-0.1)


class TestRefinerGenerator:
    def test_shape_contract_256(self):
        cfg = NetworkConfig(resolution=256, base_channels=4, n_resblocks=1, d_style=8)
        net = build_refiner(cfg, seed=6)
        photo, sketch, mask = edit_inputs(cfg, batch=1)
        out = net(photo, sketch, mask, 0.5)
        assert out.photo.shape == (1, 3, 256, 256)
        assert out.sketch.shape == (1, 1, 256, 256)
        assert out.concatenated().shape == (1, 4, 256, 256)

    def test_output_ranges_bounded(self):
        cfg = tiny_config()
        net = build_refiner(cfg, seed=7)
        out = net(*edit_inputs(cfg), 1.0)
        assert out.photo.min() >= -1.0 and out.photo.max() <= 1.0
        assert out.sketch.min() >= 0.0 and out.sketch.max() <= 1.0

    def test_level_changes_output(self):
        cfg = tiny_config()
        net = build_refiner(cfg, seed=8)
        inputs = edit_inputs(cfg)
        lo = net(*inputs, 0.0)
        hi = net(*inputs, 1.0)
        assert not torch.allclose(lo.sketch, hi.sketch)

    def test_synth_mode_takes_sketch_only(self):
        cfg = tiny_config(mode="synth")
        net = build_refiner(cfg, seed=9)
        sketch = torch.rand(2, 1, 64, 64)
        out = net(None, sketch, None, 0.3)
        assert out.photo.shape == (2, 3, 64, 64)
        assert out.sketch.shape == (2, 1, 64, 64)

    def test_resolution_mismatch_rejected(self):
        cfg = tiny_config()
        net = build_refiner(cfg, seed=10)
        with pytest.raises(ValueError):
            net(torch.zeros(1, 3, 32, 32), torch.zeros(1, 1, 32, 32),
                torch.zeros(1, 1, 32, 32), 0.5)

    def test_forward_pure_bitwise_double(self):
        cfg = tiny_config()
        net = build_refiner(cfg, seed=11).double().eval()
        inputs = edit_inputs(cfg, dtype=torch.float64)
        with torch.no_grad():
            a = net(*inputs, 0.25)
            b = net(*inputs, 0.25)
        assert torch.equal(a.photo, b.photo)
        assert torch.equal(a.sketch, b.sketch)


class TestConcatBaseline:
    def test_shape_contract(self):
        cfg = tiny_config(conditioning="concat")
        net = build_refiner(cfg, seed=12)
        out = net(*edit_inputs(cfg), 0.5)
        assert out.photo.shape == (2, 3, 64, 64)
        assert out.sketch.shape == (2, 1, 64, 64)

    def test_level_plane_changes_output(self):
        cfg = tiny_config(conditioning="concat")
        net = build_refiner(cfg, seed=13)
        inputs = edit_inputs(cfg)
        assert not torch.allclose(net(*inputs, 0.0).sketch, net(*inputs, 1.0).sketch)

    def test_parameter_count_accounting(self):
        style = build_refiner(tiny_config(), seed=14)
        concat = build_refiner(tiny_config(conditioning="concat"), seed=14)
        style_machinery = count_parameters(style.style)
        # the concat net pays for one extra input channel in its first conv
        extra_channel = style.enc0.out_channels * 1 * 7 * 7
        assert count_parameters(style) - count_parameters(concat) == style_machinery - extra_channel


class TestPatchDiscriminator:
    @pytest.mark.parametrize("res,extra,grid", [(64, 0, 8), (128, 1, 8), (256, 2, 8)])
    def test_grid_shape_per_resolution(self, res, extra, grid):
        cfg = NetworkConfig(resolution=res, base_channels=4, n_resblocks=1, d_style=8)
        assert cfg.discriminator_extra_blocks == extra
        net = build_discriminator(cfg, seed=15)
        assert net.score_grid_size == grid
        x = torch.rand(1, 3, res, res) * 2 - 1
        s = torch.rand(1, 1, res, res)
        m = torch.ones(1, 1, res, res)
        scores = net(x, s, m)
        assert scores.shape == (1, 1, grid, grid)

    def test_spectral_norm_unit_singular_values(self):
        cfg = tiny_config()
        net = build_discriminator(cfg, seed=16, power_iterations=5)
        photo, sketch, mask = edit_inputs(cfg)
        net.train()
        for _ in range(40):
            net(photo, sketch, mask)
        net.eval()
        for module in net.modules():
            if isinstance(module, torch.nn.Conv2d) and hasattr(module, "parametrizations"):
                w = module.weight.detach().reshape(module.weight.shape[0], -1)
                top = torch.linalg.svdvals(w).max().item()
                assert abs(top - 1.0) < 1e-2

    def test_scores_respond_to_input(self):
        cfg = tiny_config()
        net = build_discriminator(cfg, seed=17).eval()
        photo, sketch, mask = edit_inputs(cfg)
        with torch.no_grad():
            a = net(photo, sketch, mask)
            b = net(photo * 0.5, sketch, mask)
        assert not torch.allclose(a, b)

    def test_dim_mismatch_rejected(self):
        net = build_discriminator(tiny_config(), seed=18)
        with pytest.raises(ValueError):
            net(torch.zeros(1, 3, 64, 64), torch.zeros(1, 1, 32, 32), torch.zeros(1, 1, 64, 64))


class TestRenderer:
    def test_output_shape_and_range(self):
        cfg = tiny_config()
        net = build_renderer(cfg, seed=19).eval()
        photo, sketch, mask = edit_inputs(cfg)
        with torch.no_grad():
            out = net(photo, sketch, mask)
        assert out.shape == (2, 3, 64, 64)
        assert out.min() >= -1.0 and out.max() <= 1.0

    @pytest.mark.parametrize("res", [64, 128])
    def test_multiple_resolutions(self, res):
        cfg = NetworkConfig(resolution=res, base_channels=4, n_resblocks=1, d_style=8)
        net = build_renderer(cfg, seed=20).eval()
        x = torch.zeros(1, 3, res, res)
        s = torch.zeros(1, 1, res, res)
        m = torch.ones(1, 1, res, res)
        with torch.no_grad():
            assert net(x, s, m).shape == (1, 3, res, res)


class TestCheckpoints:
    def test_round_trip_bitwise(self, tmp_path):
        cfg = tiny_config()
        gen = build_refiner(cfg, seed=21)
        disc = build_discriminator(cfg, seed=22)
        opt = torch.optim.Adam(gen.parameters(), lr=2e-4, betas=(0.5, 0.999))
        path = tmp_path / "ckpt.pt"
        networks.save_checkpoint(
            path, config=cfg, models={"refiner": gen, "discriminator": disc},
            optimizers={"refiner": opt}, step=17, extra={"phase": 1},
        )
        payload = networks.load_checkpoint(path)
        assert payload["step"] == 17
        assert payload["extra"] == {"phase": 1}
        assert networks.config_from_checkpoint(payload) == cfg
        for name, src in payload["model_state"]["refiner"].items():
            assert torch.equal(src, gen.state_dict()[name])
        gen2 = build_refiner(cfg, seed=99)
        gen2.load_state_dict(payload["model_state"]["refiner"])
        for a, b in zip(gen.state_dict().values(), gen2.state_dict().values()):
            assert torch.equal(a, b)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.pt"
        torch.save({"version": 999}, path)
        with pytest.raises(ValueError):
            networks.load_checkpoint(path)
