"""Raster file I/O: 8-bit RGB frames, 16-bit depth PNGs with scale sidecars,
binary masks, and base64 helpers for the remote wire protocol."""

import base64
import io

import numpy as np
from PIL import Image


def save_image_png(image, path):
    """Float [0,1] HxWx3 -> 8-bit RGB PNG."""
    arr = np.clip(np.nan_to_num(np.asarray(image)), 0.0, 1.0)
    Image.fromarray((np.round(arr * 255.0)).astype(np.uint8), mode="RGB").save(path)


def load_image_png(path):
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_mask_png(mask, path):
    Image.fromarray(np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8),
                    mode="L").save(path)


def load_mask_png(path):
    return np.asarray(Image.open(path).convert("L")) > 127


def save_depth_png(depth, path, sidecar_path):
    """16-bit grayscale PNG; sidecar records (scale, offset) with
    depth = png_value * scale + offset."""
    d = np.asarray(depth, dtype=np.float64)
    finite = np.isfinite(d)
    lo = float(d[finite].min()) if finite.any() else 0.0
    hi = float(d[finite].max()) if finite.any() else 1.0
    scale = (hi - lo) / 65535.0 if hi > lo else 1.0
    q = np.zeros(d.shape, dtype=np.uint16)
    q[finite] = np.round((d[finite] - lo) / scale).astype(np.uint16)
    Image.fromarray(q, mode="I;16").save(path)
    with open(sidecar_path, "w") as fh:
        fh.write(f"scale {scale!r}\noffset {lo!r}\n")


def load_depth_png(path, sidecar_path):
    q = np.asarray(Image.open(path), dtype=np.float64)
    scale, offset = 1.0, 0.0
    with open(sidecar_path) as fh:
        for line in fh:
            key, val = line.split()
            if key == "scale":
                scale = float(val)
            elif key == "offset":
                offset = float(val)
    return q * scale + offset


def image_to_png_bytes(image):
    arr = np.clip(np.nan_to_num(np.asarray(image)), 0.0, 1.0)
    buf = io.BytesIO()
    Image.fromarray((np.round(arr * 255.0)).astype(np.uint8), mode="RGB").save(
        buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_image(data):
    arr = np.asarray(Image.open(io.BytesIO(data)).convert("RGB"), dtype=np.float64)
    return arr / 255.0


def mask_to_png_bytes(mask):
    buf = io.BytesIO()
    Image.fromarray(np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8),
                    mode="L").save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_mask(data):
    return np.asarray(Image.open(io.BytesIO(data)).convert("L")) > 127


def b64encode(data):
    return base64.b64encode(data).decode("ascii")


def b64decode(text):
    return base64.b64decode(text.encode("ascii"))
