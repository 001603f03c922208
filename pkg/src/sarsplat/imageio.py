"""16-bit grayscale image I/O (PNG and PGM) with normalization sidecars.

Images store linear magnitude quantized to uint16.  The normalization mode
and scale are recorded in a ``<file>.json`` sidecar so loading restores the
original intensities within 1/65535 of the scale.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .validation import InvalidParameterError, check_sar_image

MAX_U16 = 65535


def save_image(img, path, normalization: str = "fixed-max", max_val: float | None = None) -> float:
    """Quantize and write an intensity image; returns the scale used.

    Args:
        img: (H, W) non-negative intensities.
        path: output path; ``.png`` or ``.pgm`` (binary P5, big-endian).
        normalization: ``"fixed-max"`` (scale by ``max_val``, default 1.0) or
            ``"per-image-max"`` (scale by the image's own peak).
        max_val: scale for fixed-max mode.
    """
    img = check_sar_image(img)
    if normalization == "fixed-max":
        scale = 1.0 if max_val is None else float(max_val)
    elif normalization == "per-image-max":
        scale = float(img.max()) if img.max() > 0 else 1.0
    else:
        raise InvalidParameterError(f"unknown normalization {normalization!r}")
    if scale <= 0:
        raise InvalidParameterError("normalization scale must be positive")

    quant = np.clip(np.round(img / scale * MAX_U16), 0, MAX_U16).astype(np.uint16)
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        Image.fromarray(quant).save(path)  # uint16 -> 16-bit grayscale PNG
    elif suffix == ".pgm":
        header = f"P5\n{quant.shape[1]} {quant.shape[0]}\n{MAX_U16}\n".encode("ascii")
        path.write_bytes(header + quant.astype(">u2").tobytes())
    else:
        raise InvalidParameterError(f"unsupported image extension {suffix!r}")

    sidecar = {"normalization": normalization, "max_val": scale}
    Path(str(path) + ".json").write_text(json.dumps(sidecar) + "\n")
    return scale


def _read_pgm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4 and i < len(raw):
        # Skip whitespace and comment lines in the header.
        while i < len(raw) and raw[i : i + 1].isspace():
            i += 1
        if i < len(raw) and raw[i : i + 1] == b"#":
            while i < len(raw) and raw[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(raw) and not raw[i : i + 1].isspace():
            i += 1
        tokens.append(raw[start:i])
    if len(tokens) < 4 or tokens[0] not in (b"P2", b"P5"):
        raise InvalidParameterError(f"{path}: not a PGM file")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if tokens[0] == b"P5":
        i += 1  # single whitespace after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        need = width * height * np.dtype(dtype).itemsize
        data = np.frombuffer(raw[i : i + need], dtype=dtype)
        if data.size != width * height:
            raise InvalidParameterError(f"{path}: truncated PGM body")
    else:
        vals = raw[i:].split()
        if len(vals) < width * height:
            raise InvalidParameterError(f"{path}: truncated PGM body")
        data = np.array(vals[: width * height], dtype=np.float64)
    return data.reshape(height, width).astype(np.float64) / maxval


def load_image(path):
    """Read a 16-bit grayscale image back to linear intensity.

    Returns:
        (img, scale): float image (already multiplied by the sidecar scale
        when present, otherwise in [0, 1]) and the scale applied.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidParameterError(f"image file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".png":
        with Image.open(path) as im:
            arr = np.asarray(im)
        if arr.ndim != 2:
            raise InvalidParameterError(f"{path}: expected single-channel image")
        arr = arr.astype(np.float64) / MAX_U16
    elif suffix == ".pgm":
        arr = _read_pgm(path)
    else:
        raise InvalidParameterError(f"unsupported image extension {suffix!r}")

    scale = 1.0
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text())
            scale = float(meta.get("max_val", 1.0))
        except (json.JSONDecodeError, TypeError, ValueError):
            scale = 1.0
    return arr * scale, scale
