"""View datasets: JSONL manifests pairing images with radar parameters.

A manifest is one JSON object per line::

    {"image": "img/az000_el45.png", "azimuth_deg": 0.0, "elevation_deg": 45.0,
     "altitude_m": 1.0, "range_res_m": 0.3, "azimuth_res_m": 0.3,
     "n_range": 64, "n_azimuth": 64, "split": "train"}

``n_range``/``n_azimuth`` are optional; when present they are cross-checked
against the decoded image.  Image paths resolve relative to the manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imageio import load_image
from .radar import RadarConfig
from .validation import InvalidParameterError

REQUIRED_KEYS = ("image", "azimuth_deg", "elevation_deg", "altitude_m",
                 "range_res_m", "azimuth_res_m")


@dataclass
class ViewRecord:
    image: str
    azimuth_deg: float
    elevation_deg: float
    altitude_m: float
    range_res_m: float
    azimuth_res_m: float
    split: str = "train"
    n_range: int | None = None
    n_azimuth: int | None = None

    def to_json(self) -> str:
        rec = {
            "image": self.image,
            "azimuth_deg": self.azimuth_deg,
            "elevation_deg": self.elevation_deg,
            "altitude_m": self.altitude_m,
            "range_res_m": self.range_res_m,
            "azimuth_res_m": self.azimuth_res_m,
            "split": self.split,
        }
        if self.n_range is not None:
            rec["n_range"] = self.n_range
        if self.n_azimuth is not None:
            rec["n_azimuth"] = self.n_azimuth
        return json.dumps(rec, sort_keys=True)


@dataclass
class DatasetManifest:
    records: list[ViewRecord]
    root: Path = field(default_factory=Path)

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class ViewDataset:
    """Paired (RadarConfig, image) views with train/test split tags."""

    views: list[tuple[RadarConfig, np.ndarray]]
    splits: list[str]

    def __len__(self) -> int:
        return len(self.views)

    def _subset(self, tag: str):
        return [v for v, s in zip(self.views, self.splits) if s == tag]

    def train_views(self):
        return self._subset("train")

    def test_views(self):
        return self._subset("test")


def save_manifest(records, path) -> None:
    path = Path(path)
    path.write_text("\n".join(r.to_json() for r in records) + "\n")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise InvalidParameterError(f"manifest not found: {path}")
    records = []
    for i, line in enumerate(path.read_text().splitlines()):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidParameterError(f"manifest record {i}: invalid JSON ({exc})") from exc
        missing = [k for k in REQUIRED_KEYS if k not in doc]
        if missing:
            raise InvalidParameterError(
                f"manifest record {i}: missing keys {', '.join(missing)}"
            )
        split = doc.get("split", "train")
        if split not in ("train", "test"):
            raise InvalidParameterError(
                f"manifest record {i}: split must be train or test, got {split!r}"
            )
        try:
            records.append(
                ViewRecord(
                    image=str(doc["image"]),
                    azimuth_deg=float(doc["azimuth_deg"]),
                    elevation_deg=float(doc["elevation_deg"]),
                    altitude_m=float(doc["altitude_m"]),
                    range_res_m=float(doc["range_res_m"]),
                    azimuth_res_m=float(doc["azimuth_res_m"]),
                    split=split,
                    n_range=int(doc["n_range"]) if "n_range" in doc else None,
                    n_azimuth=int(doc["n_azimuth"]) if "n_azimuth" in doc else None,
                )
            )
        except (TypeError, ValueError) as exc:
            raise InvalidParameterError(f"manifest record {i}: {exc}") from exc
    if not records:
        raise InvalidParameterError(f"manifest {path} lists no views (empty dataset)")
    return DatasetManifest(records=records, root=path.parent)


def load_dataset(manifest_path) -> ViewDataset:
    """Load every manifest view: decode images, build configs, cross-check dims."""
    manifest = load_manifest(manifest_path)
    views: list[tuple[RadarConfig, np.ndarray]] = []
    splits: list[str] = []
    for i, rec in enumerate(manifest.records):
        img_path = manifest.root / rec.image
        if not img_path.exists():
            raise InvalidParameterError(f"view {i}: image file missing: {img_path}")
        img, _ = load_image(img_path)
        h, w = img.shape
        if rec.n_range is not None and rec.n_range != h:
            raise InvalidParameterError(
                f"view {i}: manifest n_range={rec.n_range} but image height={h}"
            )
        if rec.n_azimuth is not None and rec.n_azimuth != w:
            raise InvalidParameterError(
                f"view {i}: manifest n_azimuth={rec.n_azimuth} but image width={w}"
            )
        cfg = RadarConfig(
            azimuth_deg=rec.azimuth_deg,
            elevation_deg=rec.elevation_deg,
            altitude_m=rec.altitude_m,
            range_res_m=rec.range_res_m,
            azimuth_res_m=rec.azimuth_res_m,
            n_range=h,
            n_azimuth=w,
        )
        views.append((cfg, img))
        splits.append(rec.split)
    return ViewDataset(views=views, splits=splits)
