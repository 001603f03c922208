"""Radar view configuration."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .validation import InvalidParameterError


@dataclass(frozen=True)
class RadarConfig:
    """One side-looking radar view.

    Attributes:
        azimuth_deg: platform azimuth angle, degrees.
        elevation_deg: grazing angle between beam and ground plane, degrees.
        altitude_m: platform altitude above the scene origin's ground plane.
        range_res_m: range resolution, meters per pixel.
        azimuth_res_m: azimuth resolution, meters per pixel.
        n_range: image height in range pixels.
        n_azimuth: image width in azimuth pixels.
        ray_grid: computation-plane grid dims (azimuth cells, range-like cells);
            defaults to (n_azimuth, n_range).
    """

    azimuth_deg: float
    elevation_deg: float
    altitude_m: float = 10000.0
    range_res_m: float = 0.3
    azimuth_res_m: float = 0.3
    n_range: int = 128
    n_azimuth: int = 128
    ray_grid: tuple[int, int] | None = None

    def __post_init__(self):
        if not (0.0 < self.elevation_deg < 90.0):
            raise InvalidParameterError(
                f"elevation_deg must lie in (0, 90), got {self.elevation_deg}"
            )
        if self.range_res_m <= 0 or self.azimuth_res_m <= 0:
            raise InvalidParameterError("resolutions must be positive")
        if self.n_range < 1 or self.n_azimuth < 1:
            raise InvalidParameterError("image dimensions must be >= 1")
        if self.ray_grid is not None:
            n, m = self.ray_grid
            if n < 1 or m < 1:
                raise InvalidParameterError("ray_grid dimensions must be >= 1")
            object.__setattr__(self, "ray_grid", (int(n), int(m)))
        for name in ("azimuth_deg", "elevation_deg", "altitude_m"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")

    @property
    def n_rays(self) -> tuple[int, int]:
        """Effective (azimuth, range) ray-grid dims."""
        return self.ray_grid if self.ray_grid is not None else (self.n_azimuth, self.n_range)

    @property
    def azimuth_rad(self) -> float:
        return float(np.deg2rad(self.azimuth_deg))

    @property
    def elevation_rad(self) -> float:
        return float(np.deg2rad(self.elevation_deg))

    @property
    def slant_range_m(self) -> float:
        """Slant range from the platform to the scene origin."""
        return self.altitude_m / np.sin(self.elevation_rad)

    @property
    def ground_extent_m(self) -> float:
        """Ground-range extent of the illuminated image window."""
        return self.range_res_m * self.n_range

    def with_view(self, azimuth_deg: float, elevation_deg: float) -> "RadarConfig":
        return replace(self, azimuth_deg=azimuth_deg, elevation_deg=elevation_deg)


def parse_view_string(text: str) -> RadarConfig:
    """Parse ``"az=0,el=45,alt=10,dr=0.3,da=0.3,nr=128,na=128"`` into a config."""
    keys = {
        "az": "azimuth_deg", "el": "elevation_deg", "alt": "altitude_m",
        "dr": "range_res_m", "da": "azimuth_res_m",
        "nr": "n_range", "na": "n_azimuth",
    }
    kwargs: dict[str, float | int] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise InvalidParameterError(f"malformed view entry {item!r}")
        k, _, v = item.partition("=")
        k = k.strip().lower()
        if k not in keys:
            raise InvalidParameterError(f"unknown view key {k!r}")
        field = keys[k]
        kwargs[field] = int(v) if field.startswith("n_") else float(v)
    if "azimuth_deg" not in kwargs or "elevation_deg" not in kwargs:
        raise InvalidParameterError("view string must set at least az= and el=")
    return RadarConfig(**kwargs)  # type: ignore[arg-type]
