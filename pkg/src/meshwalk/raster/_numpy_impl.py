"""Pure-numpy fallback for the native kernels.

Semantics match meshwalk.raster._kernels exactly: faces are visited in
ascending id order with a strict depth test, so depth ties resolve to the
lowest face id here as well. Fine for small meshes and environments without a
compiler; the acceptance-scale runs want the compiled kernel.
"""

import numpy as np


def rasterize(verts_cam, colors, faces, height, width, fx, fy, cx, cy, near):
    depth = np.full((height, width), np.inf)
    fid = np.full((height, width), -1, dtype=np.int32)
    color = np.zeros((height, width, 3))

    z_all = verts_cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u_all = fx * verts_cam[:, 0] / z_all + cx
        v_all = fy * verts_cam[:, 1] / z_all + cy

    for f in range(faces.shape[0]):
        i0, i1, i2 = faces[f]
        z0, z1, z2 = z_all[i0], z_all[i1], z_all[i2]
        if z0 < near or z1 < near or z2 < near:
            continue
        u0, u1, u2 = u_all[i0], u_all[i1], u_all[i2]
        v0, v1, v2 = v_all[i0], v_all[i1], v_all[i2]
        area = (u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0)
        if abs(area) < 1e-14:
            continue
        xmin = max(int(np.ceil(min(u0, u1, u2) - 1e-9)), 0)
        xmax = min(int(np.floor(max(u0, u1, u2) + 1e-9)), width - 1)
        ymin = max(int(np.ceil(min(v0, v1, v2) - 1e-9)), 0)
        ymax = min(int(np.floor(max(v0, v1, v2) + 1e-9)), height - 1)
        if xmin > xmax or ymin > ymax:
            continue

        px, py = np.meshgrid(np.arange(xmin, xmax + 1, dtype=np.float64),
                             np.arange(ymin, ymax + 1, dtype=np.float64))
        w0 = (u1 * v2 - u2 * v1) + px * (v1 - v2) + py * (u2 - u1)
        w1 = (u2 * v0 - u0 * v2) + px * (v2 - v0) + py * (u0 - u2)
        w2 = (u0 * v1 - u1 * v0) + px * (v0 - v1) + py * (u1 - u0)
        sgn = 1.0 if area > 0 else -1.0
        tol = 1e-9 * abs(area)
        cover = (sgn * w0 >= -tol) & (sgn * w1 >= -tol) & (sgn * w2 >= -tol)
        if not cover.any():
            continue

        # expression structure mirrors the compiled kernel so both backends
        # produce bit-identical depths (and hence identical tie-breaks)
        inv_area = 1.0 / area
        q0, q1, q2 = 1.0 / z0, 1.0 / z1, 1.0 / z2
        l0, l1, l2 = w0 * inv_area, w1 * inv_area, w2 * inv_area
        invz = l0 * q0 + l1 * q1 + l2 * q2
        cover &= invz > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            z = 1.0 / invz
        block = depth[ymin:ymax + 1, xmin:xmax + 1]
        win = cover & (z < block)
        if not win.any():
            continue
        block[win] = z[win]
        fid[ymin:ymax + 1, xmin:xmax + 1][win] = f
        cmix = ((l0 * q0)[..., None] * colors[i0]
                + (l1 * q1)[..., None] * colors[i1]
                + (l2 * q2)[..., None] * colors[i2]) * z[..., None]
        color[ymin:ymax + 1, xmin:xmax + 1][win] = cmix[win]

    return depth, color, fid


def splat_min_depth(us, vs, zs, height, width):
    buf = np.full((height, width), np.inf)
    x0 = np.floor(us).astype(np.int64)
    y0 = np.floor(vs).astype(np.int64)
    for dy in (0, 1):
        for dx in (0, 1):
            x = x0 + dx
            y = y0 + dy
            ok = (x >= 0) & (x < width) & (y >= 0) & (y < height)
            np.minimum.at(buf, (y[ok], x[ok]), zs[ok])
    return buf
