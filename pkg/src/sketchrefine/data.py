"""Photo/edge-map pair loading, manifests, and the fallback edge operator.

Directory layout: photos/*.png with optional matching stems in edges/*.png.
When an edge file is missing, a deterministic Sobel-magnitude operator stands
in, so the pipeline stays testable without an external edge detector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import images


class IngestError(RuntimeError):
    """Raised when a referenced file is missing or unreadable."""

    def __init__(self, path, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = Path(path)


@dataclass(frozen=True)
class PairRecord:
    photo_path: Path
    edge_path: Path | None = None


@dataclass
class DatasetManifest:
    records: list[PairRecord]
    train_indices: list[int]
    test_indices: list[int]
    resolution: int

    def __post_init__(self):
        if set(self.train_indices) & set(self.test_indices):
            raise ValueError("train/test splits must be disjoint")

    @property
    def train_records(self) -> list[PairRecord]:
        return [self.records[i] for i in self.train_indices]

    @property
    def test_records(self) -> list[PairRecord]:
        return [self.records[i] for i in self.test_indices]


def build_manifest(data_root, resolution: int, train_count: int) -> DatasetManifest:
    """Scan photos/ and edges/, split by filename order: first N train, rest test."""
    root = Path(data_root)
    photo_dir = root / "photos"
    if not photo_dir.is_dir():
        raise IngestError(photo_dir, "photo directory not found")
    edge_dir = root / "edges"
    records = []
    for photo_path in sorted(photo_dir.glob("*.png")):
        edge_path = edge_dir / photo_path.name
        records.append(PairRecord(photo_path, edge_path if edge_path.exists() else None))
    if not records:
        raise IngestError(photo_dir, "no PNG photos found")
    n_train = min(train_count, len(records))
    return DatasetManifest(
        records=records,
        train_indices=list(range(n_train)),
        test_indices=list(range(n_train, len(records))),
        resolution=resolution,
    )


def save_manifest(manifest: DatasetManifest, path) -> None:
    """One JSON record per line; the first line carries split metadata."""
    with open(path, "w") as fh:
        fh.write(json.dumps({
            "resolution": manifest.resolution,
            "train_indices": manifest.train_indices,
            "test_indices": manifest.test_indices,
        }) + "\n")
        for rec in manifest.records:
            fh.write(json.dumps({
                "photo": str(rec.photo_path),
                "edge": str(rec.edge_path) if rec.edge_path else None,
            }) + "\n")


def load_manifest(path) -> DatasetManifest:
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    meta, rows = lines[0], lines[1:]
    records = []
    for row in rows:
        photo = Path(row["photo"])
        if not photo.exists():
            raise IngestError(photo, "referenced photo missing")
        edge = Path(row["edge"]) if row["edge"] else None
        if edge is not None and not edge.exists():
            raise IngestError(edge, "referenced edge map missing")
        records.append(PairRecord(photo, edge))
    return DatasetManifest(
        records=records,
        train_indices=meta["train_indices"],
        test_indices=meta["test_indices"],
        resolution=meta["resolution"],
    )


def _center_crop_square(im: Image.Image) -> Image.Image:
    w, h = im.size
    side = min(w, h)
    left = (w - side) // 2
    top = (h - side) // 2
    return im.crop((left, top, left + side, top + side))


def _open_resized(path, resolution: int, mode: str) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im = im.convert(mode)
            im = _center_crop_square(im)
            if im.size != (resolution, resolution):
                im = im.resize((resolution, resolution), Image.BILINEAR)
            return np.asarray(im)
    except (FileNotFoundError, OSError) as exc:
        raise IngestError(path, f"unreadable image: {exc}") from exc


def load_pair(record: PairRecord, resolution: int,
              edge_threshold: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """(photo in [-1,1], edge sketch in [0,1]) at the requested resolution."""
    photo = images.signed_from_bytes(_open_resized(record.photo_path, resolution, "RGB"))
    if record.edge_path is not None:
        sketch = images.unit_from_bytes(_open_resized(record.edge_path, resolution, "L"))
    else:
        sketch = fallback_edges(photo, threshold=edge_threshold)
    return photo, sketch


def fallback_edges(photo: np.ndarray, threshold: float = 0.25) -> np.ndarray:
    """Deterministic stand-in edge detector: thresholded Sobel magnitude of
    the luminance, reflect-padded at the border."""
    photo = images.validate_photo(photo)
    rgb = (photo + 1.0) / 2.0
    lum = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    p = np.pad(lum, 1, mode="reflect")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]
          - p[:-2, :-2] - 2 * p[1:-1, :-2] - p[2:, :-2])
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]
          - p[:-2, :-2] - 2 * p[:-2, 1:-1] - p[:-2, 2:])
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak == 0.0:
        return np.zeros_like(lum)
    return ((mag / peak) >= threshold).astype(np.float64)


def masked_input(photo: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero the photo (internal mid-gray) wherever the mask is 1."""
    photo = images.validate_photo(photo)
    mask = images.validate_mask(mask)
    if photo.shape[:2] != mask.shape:
        raise ValueError(f"dims mismatch: photo {photo.shape[:2]} vs mask {mask.shape}")
    return photo * (1.0 - mask)[:, :, None]
