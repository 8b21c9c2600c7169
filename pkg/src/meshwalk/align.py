"""Depth alignment: make predicted depth consistent with the scene geometry.

Predictions are corrected in disparity (1/depth) space by a robust global
affine fit plus a smooth bilinear residual grid, both minimizing mismatch to
the mesh-projected depth on the visible mask. The correction is recomputed
from scratch each frame and never persisted, so consecutive frames share no
optimizer state.
"""

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_GRID = (17, 17)
DEFAULT_SMOOTHNESS = 1.0
IRLS_TOL = 1e-6
IRLS_MAX_ITERS = 100
IRLS_EPS = 1e-8
MIN_DISPARITY = 1e-8


class AlignmentError(ValueError):
    pass


class UnderdeterminedError(AlignmentError):
    pass


class DegenerateFitError(AlignmentError):
    pass


@dataclass
class AffineFit:
    a: float
    b: float
    residual: float          # mean L1 disparity residual at the optimum
    iterations: int
    history: list            # L1 objective value after each accepted update


@dataclass
class DepthCorrection:
    """Per-frame parametric depth correction, applied in disparity space.

    corrected_disp = exp(log_scale) * disp + disp_shift + bilinear(grid).
    The identity correction is (0, 0, zero grid).
    """

    log_scale: float
    disp_shift: float
    grid: np.ndarray

    @classmethod
    def identity(cls, grid_shape=DEFAULT_GRID):
        return cls(0.0, 0.0, np.zeros(grid_shape))

    def is_identity(self):
        return self.log_scale == 0.0 and self.disp_shift == 0.0 and not self.grid.any()

    def apply(self, depth):
        depth = np.asarray(depth, dtype=np.float64)
        if self.is_identity():
            return depth.copy()
        disp = 1.0 / np.maximum(depth, 1e-300)
        corrected = np.exp(self.log_scale) * disp + self.disp_shift
        if self.grid.any():
            corrected = corrected + bilinear_field(self.grid, depth.shape)
        return 1.0 / np.maximum(corrected, MIN_DISPARITY)


def _weighted_affine(x, y, w):
    sw = w.sum()
    sx = (w * x).sum()
    sy = (w * y).sum()
    sxx = (w * x * x).sum()
    sxy = (w * x * y).sum()
    det = sw * sxx - sx * sx
    if abs(det) < 1e-30:
        raise UnderdeterminedError("degenerate normal equations (constant input?)")
    a = (sw * sxy - sx * sy) / det
    b = (sxx * sy - sx * sxy) / det
    return a, b


def fit_scale_shift_l1(raw, target, mask):
    """Least-absolute-deviation affine fit target_disp ~ a*raw_disp + b via IRLS.

    Operates on disparities of the two depth maps restricted to the mask.
    Raises UnderdeterminedError for masks below 2 pixels and DegenerateFitError
    when the optimal slope is non-positive (inverted or garbage input).
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() < 2:
        raise UnderdeterminedError(f"mask has {int(mask.sum())} pixels, need >= 2")
    raw = np.asarray(raw, dtype=np.float64)[mask]
    target = np.asarray(target, dtype=np.float64)[mask]
    if (raw <= 0).any() or (target <= 0).any():
        raise AlignmentError("raw/target depth must be positive on the mask")
    x = 1.0 / raw
    y = 1.0 / target

    a, b = _weighted_affine(x, y, np.ones_like(x))
    obj = np.abs(y - (a * x + b)).mean()
    history = [obj]
    iters = 0
    for iters in range(1, IRLS_MAX_ITERS + 1):
        r = np.abs(y - (a * x + b))
        w = 1.0 / np.maximum(r, IRLS_EPS)
        a_new, b_new = _weighted_affine(x, y, w)
        obj_new = np.abs(y - (a_new * x + b_new)).mean()
        if obj_new > obj:
            # the majorizer step cannot increase the true objective except at
            # convergence under the eps clamp; stop at the last good iterate
            break
        moved = max(abs(a_new - a), abs(b_new - b))
        a, b, obj = a_new, b_new, obj_new
        history.append(obj)
        if moved < IRLS_TOL:
            break
    if a <= 0:
        raise DegenerateFitError(f"optimal disparity scale a={a:.4g} <= 0")
    return AffineFit(a=float(a), b=float(b), residual=float(obj),
                     iterations=iters, history=history)


def _grid_pixel_weights(shape, grid_shape):
    """Bilinear weights of every pixel onto a grid spanning the full frame.

    Returns (idx4, w4): per pixel the four node flat indices and weights.
    """
    h, w = shape
    gh, gw = grid_shape
    rows = np.linspace(0.0, gh - 1.0, h) if h > 1 else np.zeros(1)
    cols = np.linspace(0.0, gw - 1.0, w) if w > 1 else np.zeros(1)
    r, c = np.meshgrid(rows, cols, indexing="ij")
    r0 = np.clip(np.floor(r).astype(np.int64), 0, gh - 2) if gh > 1 else np.zeros_like(r, np.int64)
    c0 = np.clip(np.floor(c).astype(np.int64), 0, gw - 2) if gw > 1 else np.zeros_like(c, np.int64)
    fr = r - r0
    fc = c - c0
    r1 = np.minimum(r0 + 1, gh - 1)
    c1 = np.minimum(c0 + 1, gw - 1)
    idx4 = np.stack([r0 * gw + c0, r0 * gw + c1, r1 * gw + c0, r1 * gw + c1], axis=-1)
    w4 = np.stack([(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc], axis=-1)
    return idx4.reshape(-1, 4), w4.reshape(-1, 4)


def bilinear_field(grid, shape):
    """Evaluate a control grid over the frame by bilinear interpolation."""
    idx4, w4 = _grid_pixel_weights(shape, grid.shape)
    return (grid.ravel()[idx4] * w4).sum(axis=1).reshape(shape)


def grid_laplacian(grid_shape):
    """4-neighbor graph Laplacian of the control grid (constants in its kernel)."""
    gh, gw = grid_shape
    n = gh * gw
    L = np.zeros((n, n))
    for i in range(gh):
        for j in range(gw):
            k = i * gw + j
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < gh and 0 <= jj < gw:
                    L[k, k] += 1.0
                    L[k, ii * gw + jj] -= 1.0
    return L


def fit_residual_grid(raw_corrected, target, mask, grid_shape=DEFAULT_GRID,
                      smoothness=DEFAULT_SMOOTHNESS):
    """Smooth bilinear grid soaking up the disparity residual left by the affine stage.

    Minimizes sum_mask (target_disp - corrected_disp - B(grid))^2
    + smoothness * ||L grid||^2 as one linear solve. Nodes without any masked
    support are set purely by the smoothness term.
    """
    mask = np.asarray(mask, dtype=bool)
    shape = mask.shape
    resid = np.zeros(shape)
    resid[mask] = 1.0 / np.asarray(target, np.float64)[mask] \
        - 1.0 / np.asarray(raw_corrected, np.float64)[mask]

    gh, gw = grid_shape
    n = gh * gw
    idx4, w4 = _grid_pixel_weights(shape, grid_shape)
    sel = mask.ravel()
    idx4 = idx4[sel]
    w4 = w4[sel]
    rvec = resid.ravel()[sel]

    ata = np.zeros(n * n)
    atb = np.zeros(n)
    for p in range(4):
        atb += np.bincount(idx4[:, p], weights=w4[:, p] * rvec, minlength=n)
        for q in range(4):
            ata += np.bincount(idx4[:, p] * n + idx4[:, q],
                               weights=w4[:, p] * w4[:, q], minlength=n * n)
    ata = ata.reshape(n, n)
    L = grid_laplacian(grid_shape)
    system = ata + smoothness * (L.T @ L)
    try:
        sol = np.linalg.solve(system, atb)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(system, atb, rcond=None)[0]
    return sol.reshape(grid_shape)


def align_depth(raw, render, grid_shape=DEFAULT_GRID, smoothness=DEFAULT_SMOOTHNESS,
                use_grid=True):
    """Align a predicted depth map to the rendered scene depth on the visible mask.

    Returns (aligned_depth, DepthCorrection, info). On a degenerate affine fit
    the correction falls back to a pure median-ratio disparity scale and the
    event is recorded in info["fallback"].
    """
    raw = np.asarray(raw, dtype=np.float64)
    mask = render.mask & np.isfinite(render.depth)
    target = np.where(mask, render.depth, 1.0)
    info = {"fallback": False}
    try:
        fit = fit_scale_shift_l1(raw, target, mask)
        a, b = fit.a, fit.b
        info.update(a=a, b=b, iterations=fit.iterations,
                    affine_residual_disp=fit.residual)
    except DegenerateFitError as exc:
        ratio = np.median((1.0 / target[mask]) / (1.0 / raw[mask]))
        a, b = float(max(ratio, MIN_DISPARITY)), 0.0
        info.update(a=a, b=b, iterations=0, affine_residual_disp=float("nan"),
                    fallback=True)
        log.warning("degenerate affine depth fit (%s); falling back to median ratio %.4g",
                    exc, a)

    grid = np.zeros(grid_shape)
    if use_grid and not info["fallback"]:
        affine_depth = 1.0 / np.maximum(a / raw + b, MIN_DISPARITY)
        grid = fit_residual_grid(affine_depth, target, mask, grid_shape, smoothness)

    correction = DepthCorrection(log_scale=float(np.log(a)), disp_shift=float(b),
                                 grid=grid)
    aligned = correction.apply(raw)
    resid_depth = np.abs(aligned[mask] - target[mask]).mean() if mask.any() else 0.0
    resid_disp = np.abs(1.0 / aligned[mask] - 1.0 / target[mask]).mean() if mask.any() else 0.0
    info.update(residual_l1_depth=float(resid_depth), residual_l1_disp=float(resid_disp))
    return aligned, correction, info


def calibrate_global_scale(provider_depths, reference_depths):
    """Ratio of the median reference depth to the median provider depth,
    pooled over all pixels of all frames."""
    if not provider_depths or not reference_depths:
        raise AlignmentError("both depth lists must be nonempty")
    if len(provider_depths) != len(reference_depths):
        raise AlignmentError("depth lists must have equal length")
    prov = np.concatenate([np.asarray(d, np.float64).ravel() for d in provider_depths])
    ref = np.concatenate([np.asarray(d, np.float64).ravel() for d in reference_depths])
    denom = np.median(prov)
    if denom == 0:
        raise AlignmentError("provider depth median is zero")
    return float(np.median(ref) / denom)
