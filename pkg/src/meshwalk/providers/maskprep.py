"""Inpainting-mask preprocessing.

Thin slivers of known content (1-2 px specks and protrusions left by
projection) produce out-of-distribution conditioning for inpainting models.
A 3x3 morphological opening of the known mask removes them; the removed ring
is handed back to the provider as fillable area, with its image values
pre-filled by isotropic diffusion from the surviving known neighborhood so the
conditioning image carries no stray speckle colors.
"""

import numpy as np
from scipy import ndimage

OPEN_KERNEL = np.ones((3, 3), dtype=bool)
DIFFUSION_ITERS = 50

_CROSS = np.array([[0.0, 1.0, 0.0],
                   [1.0, 0.0, 1.0],
                   [0.0, 1.0, 0.0]])


def open_mask(mask):
    """3x3 opening of the known mask; beyond-frame pixels count as known."""
    mask = np.asarray(mask, dtype=bool)
    eroded = ndimage.binary_erosion(mask, structure=OPEN_KERNEL, border_value=1)
    return ndimage.binary_dilation(eroded, structure=OPEN_KERNEL, border_value=0)


def diffuse_fill(image, fill_mask, known_mask, iterations=DIFFUSION_ITERS):
    """Fill pixels by iterated averaging of known 4-neighbors.

    Filled pixels become sources for later iterations. Pixels that never
    acquire a known neighbor keep their original values.
    """
    img = np.asarray(image, dtype=np.float64).copy()
    have = np.asarray(known_mask, dtype=bool).copy()
    todo = np.asarray(fill_mask, dtype=bool) & ~have
    for _ in range(iterations):
        if not todo.any():
            break
        w = have.astype(np.float64)
        wsum = ndimage.convolve(w, _CROSS, mode="constant")
        vsum = np.stack(
            [ndimage.convolve(img[..., c] * w, _CROSS, mode="constant")
             for c in range(img.shape[-1])], axis=-1)
        ready = todo & (wsum > 0)
        if not ready.any():
            break
        img[ready] = vsum[ready] / wsum[ready][..., None]
        have |= ready
        todo &= ~ready
    return img


def preprocess_mask(mask, image):
    """Open the known mask and pre-fill the removed ring in the image.

    Returns (opened_mask, prefilled_image). The ring (known minus opened)
    becomes provider-fillable area; its prefilled colors only serve as
    conditioning context.
    """
    mask = np.asarray(mask, dtype=bool)
    opened = open_mask(mask)
    ring = mask & ~opened
    if not ring.any():
        return opened, np.asarray(image, dtype=np.float64).copy()
    prefilled = diffuse_fill(image, ring, opened)
    return opened, prefilled
