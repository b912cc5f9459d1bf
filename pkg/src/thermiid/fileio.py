"""Readers and writers for PFM (linear float) and PNG (display) images."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
import png

from .errors import InvalidInputError
from .imagecore import as_image

DISPLAY_GAMMA = 2.2

# edge label map codes for PNG export
LABEL_PNG_CODES = {0: 0, 1: 255, 2: 128}  # None, Albedo, Shading


def write_pfm(path, image) -> None:
    """Write a 1- or 3-channel image as little-endian PFM (rows stored bottom-up)."""
    arr = as_image(image)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim == 3 and arr.shape[2] != 3:
        raise InvalidInputError(f"PFM stores 1 or 3 channels, got {arr.shape[2]}")
    header = b"PF\n" if arr.ndim == 3 else b"Pf\n"
    h, w = arr.shape[:2]
    data = np.ascontiguousarray(np.flipud(arr).astype("<f4"))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(data.tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into a float64 array, (H, W) or (H, W, 3)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    # three whitespace-terminated header tokens: magic, "W H", scale
    m = re.match(rb"(P[Ff])\s+(\d+)\s+(\d+)\s+([-+0-9.eE]+)\s", raw)
    if m is None:
        raise InvalidInputError(f"{path}: not a PFM file")
    magic, w, h, scale = m.group(1), int(m.group(2)), int(m.group(3)), float(m.group(4))
    nch = 3 if magic == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * nch
    body = raw[m.end():]
    if len(body) < 4 * count:
        raise InvalidInputError(f"{path}: truncated PFM data")
    data = np.frombuffer(body, dtype=dtype, count=count).astype(np.float64)
    shape = (h, w, 3) if nch == 3 else (h, w)
    return np.flipud(data.reshape(shape)).copy()


def encode_display(image, gamma=DISPLAY_GAMMA) -> np.ndarray:
    return np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) ** (1.0 / gamma)


def write_png(path, image, bitdepth=8, gamma=DISPLAY_GAMMA) -> None:
    """Write a linear [0, 1] image as a gamma-encoded 8- or 16-bit PNG."""
    if bitdepth not in (8, 16):
        raise InvalidInputError(f"bitdepth must be 8 or 16, got {bitdepth}")
    arr = as_image(image)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim == 3 and arr.shape[2] != 3:
        raise InvalidInputError(f"PNG export supports 1 or 3 channels, got {arr.shape[2]}")
    maxval = (1 << bitdepth) - 1
    q = np.round(encode_display(arr, gamma) * maxval).astype(np.uint16 if bitdepth == 16 else np.uint8)
    _write_raw_png(path, q, bitdepth)


def _write_raw_png(path, q: np.ndarray, bitdepth: int) -> None:
    h, w = q.shape[:2]
    greyscale = q.ndim == 2
    rows = q.reshape(h, -1)
    writer = png.Writer(width=w, height=h, greyscale=greyscale, bitdepth=bitdepth)
    with open(path, "wb") as fh:
        writer.write(fh, rows.tolist())


def read_png(path, gamma=DISPLAY_GAMMA) -> np.ndarray:
    """Read an 8- or 16-bit PNG and decode it back to linear [0, 1] floats."""
    reader = png.Reader(filename=str(path))
    w, h, rows, info = reader.asDirect()
    planes = info["planes"]
    arr = np.array([np.asarray(r) for r in rows], dtype=np.float64)
    maxval = (1 << info["bitdepth"]) - 1
    arr = arr.reshape(h, w, planes) / maxval
    if info.get("alpha"):
        arr = arr[..., :-1]
    if arr.shape[2] == 1:
        arr = arr[..., 0]
    return arr ** gamma


def write_label_png(path, labels: np.ndarray) -> None:
    """Write an edge label map as 8-bit grey: 0 None, 128 Shading, 255 Albedo."""
    labels = np.asarray(labels)
    lut = np.zeros(256, dtype=np.uint8)
    for code, grey in LABEL_PNG_CODES.items():
        lut[code] = grey
    _write_raw_png(path, lut[labels.astype(np.uint8)], 8)


def read_label_png(path) -> np.ndarray:
    reader = png.Reader(filename=str(path))
    w, h, rows, info = reader.asDirect()
    if info["planes"] != 1 or info["bitdepth"] != 8:
        raise InvalidInputError(f"{path}: not an 8-bit grey label map")
    grey = np.array([np.asarray(r) for r in rows], dtype=np.uint8).reshape(h, w)
    labels = np.zeros((h, w), dtype=np.int8)
    for code, value in LABEL_PNG_CODES.items():
        labels[grey == value] = code
    return labels


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
