"""Procedural stand-in provider: deterministic smooth textures and depth,
pure functions of (seed, frame_index). Useful for plumbing tests and
fully offline runs without the synthetic world."""

import numpy as np

from .base import Provider, ProviderRequest


def _smooth_field(shape, key, grid=9, lo=0.0, hi=1.0):
    rng = np.random.default_rng(np.random.SeedSequence(key))
    coarse = rng.uniform(lo, hi, (grid, grid))
    h, w = shape
    rows = np.linspace(0, grid - 1, h)
    cols = np.linspace(0, grid - 1, w)
    r0 = np.clip(rows.astype(int), 0, grid - 2)
    c0 = np.clip(cols.astype(int), 0, grid - 2)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    a = coarse[np.ix_(r0, c0)]
    b = coarse[np.ix_(r0, c0 + 1)]
    c = coarse[np.ix_(r0 + 1, c0)]
    d = coarse[np.ix_(r0 + 1, c0 + 1)]
    return a * (1 - fr) * (1 - fc) + b * (1 - fr) * fc + c * fr * (1 - fc) + d * fr * fc


class StubProvider(Provider):
    def __init__(self, seed=0):
        self.seed = seed

    def inpaint(self, request: ProviderRequest):
        h, w = request.mask.shape
        chans = [_smooth_field((h, w), [self.seed, request.frame_index, 101 + c])
                 for c in range(3)]
        return np.stack(chans, axis=-1)

    def predict_depth(self, image, frame_index):
        h, w = np.asarray(image).shape[:2]
        return _smooth_field((h, w), [self.seed, frame_index, 7], lo=2.0, hi=4.0)
