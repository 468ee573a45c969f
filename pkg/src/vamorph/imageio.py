"""Image and file helpers with atomic writes."""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError


def read_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit PNG/JPEG as (H, W) grayscale or (H, W, 3) RGB."""
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8).copy()
        if im.mode in ("RGB", "RGBA", "P", "LA"):
            if im.mode == "LA":
                return np.asarray(im.convert("L"), dtype=np.uint8).copy()
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
        raise ValidationError(f"{path}: unsupported image mode {im.mode}")


def image_size(path: str | Path) -> tuple[int, int]:
    """(width, height) without decoding pixel data."""
    with Image.open(path) as im:
        return im.size


def png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(img)).save(buf, format="PNG")
    return buf.getvalue()


def atomic_write_bytes(path: str | Path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def atomic_write_text(path: str | Path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_png(path: str | Path, img: np.ndarray):
    atomic_write_bytes(path, png_bytes(img))
