import numpy as np
import pytest
from PIL import Image


def make_shape_dataset(root, n=6, size=64, seed=0):
    """Synthetic photos with solid backgrounds and a few filled rectangles,
    so the fallback edge operator finds real structure."""
    (root / "photos").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n):
        img = np.full((size, size, 3), rng.integers(30, 120, size=3), dtype=np.uint8)
        for _ in range(int(rng.integers(2, 5))):
            y0, x0 = rng.integers(0, size - 12, size=2)
            h, w = rng.integers(8, size // 2, size=2)
            color = rng.integers(0, 256, size=3)
            img[y0:min(y0 + h, size), x0:min(x0 + w, size)] = color
        Image.fromarray(img, "RGB").save(root / "photos" / f"img_{i:03d}.png")
    return root


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    return make_shape_dataset(root, n=6, size=64, seed=0)


@pytest.fixture(scope="session")
def tiny_checkpoints(tmp_path_factory):
    """Untrained but loadable checkpoints: edit refiner + renderer + synth refiner."""
    from sketchrefine import networks

    out = tmp_path_factory.mktemp("checkpoints")
    cfg = networks.NetworkConfig(resolution=64, base_channels=8, n_resblocks=1, d_style=8)
    networks.save_checkpoint(
        out / "refiner.pt", config=cfg,
        models={"refiner": networks.build_refiner(cfg, 1)},
        step=0, extra={"max_radius": 4.0},
    )
    networks.save_checkpoint(
        out / "renderer.pt", config=cfg,
        models={"renderer": networks.build_renderer(cfg, 2)},
        step=0, extra={"role": "renderer"},
    )
    synth_cfg = networks.NetworkConfig(
        resolution=64, base_channels=8, n_resblocks=1, d_style=8, mode="synth")
    networks.save_checkpoint(
        out / "synth.pt", config=synth_cfg,
        models={"refiner": networks.build_refiner(synth_cfg, 3)},
        step=0, extra={"max_radius": 4.0},
    )
    return out
