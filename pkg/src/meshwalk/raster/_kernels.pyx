# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Native rasterization kernels: z-buffer triangle fill and min-depth splatting."""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, fabs, floor

cnp.import_array()


def rasterize(double[:, ::1] verts_cam, double[:, ::1] colors, int[:, ::1] faces,
              int height, int width, double fx, double fy, double cx, double cy,
              double near):
    """Z-buffer rasterization of camera-space triangles.

    Colors and depth are interpolated perspective-correctly (1/z is affine in
    screen space). Faces with any vertex in front of the near plane are
    discarded. Depth ties resolve to the lowest face id because faces are
    visited in ascending order with a strict depth test.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] depth_arr = np.full((height, width), np.inf)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] fid_arr = np.full((height, width), -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] color_arr = np.zeros((height, width, 3))
    cdef double[:, ::1] depth = depth_arr
    cdef int[:, ::1] fid = fid_arr
    cdef double[:, :, ::1] color = color_arr

    cdef Py_ssize_t nf = faces.shape[0]
    cdef Py_ssize_t f, px, py
    cdef int i0, i1, i2, xmin, xmax, ymin, ymax
    cdef double z0, z1, z2, u0, u1, u2, v0, v1, v2
    cdef double area, inv_area, tol, sgn
    cdef double w0, w1, w2, l0, l1, l2, invz, z
    cdef double q0, q1, q2, umin, umax, vmin, vmax

    for f in range(nf):
        i0 = faces[f, 0]; i1 = faces[f, 1]; i2 = faces[f, 2]
        z0 = verts_cam[i0, 2]; z1 = verts_cam[i1, 2]; z2 = verts_cam[i2, 2]
        if z0 < near or z1 < near or z2 < near:
            continue
        u0 = fx * verts_cam[i0, 0] / z0 + cx
        v0 = fy * verts_cam[i0, 1] / z0 + cy
        u1 = fx * verts_cam[i1, 0] / z1 + cx
        v1 = fy * verts_cam[i1, 1] / z1 + cy
        u2 = fx * verts_cam[i2, 0] / z2 + cx
        v2 = fy * verts_cam[i2, 1] / z2 + cy

        area = (u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0)
        if fabs(area) < 1e-14:
            continue

        umin = u0
        if u1 < umin: umin = u1
        if u2 < umin: umin = u2
        umax = u0
        if u1 > umax: umax = u1
        if u2 > umax: umax = u2
        vmin = v0
        if v1 < vmin: vmin = v1
        if v2 < vmin: vmin = v2
        vmax = v0
        if v1 > vmax: vmax = v1
        if v2 > vmax: vmax = v2

        xmin = <int>ceil(umin - 1e-9)
        xmax = <int>floor(umax + 1e-9)
        ymin = <int>ceil(vmin - 1e-9)
        ymax = <int>floor(vmax + 1e-9)
        if xmin < 0: xmin = 0
        if ymin < 0: ymin = 0
        if xmax > width - 1: xmax = width - 1
        if ymax > height - 1: ymax = height - 1
        if xmin > xmax or ymin > ymax:
            continue

        inv_area = 1.0 / area
        sgn = 1.0 if area > 0.0 else -1.0
        tol = 1e-9 * fabs(area)
        q0 = 1.0 / z0; q1 = 1.0 / z1; q2 = 1.0 / z2

        for py in range(ymin, ymax + 1):
            for px in range(xmin, xmax + 1):
                w0 = (u1 * v2 - u2 * v1) + px * (v1 - v2) + py * (u2 - u1)
                if sgn * w0 < -tol:
                    continue
                w1 = (u2 * v0 - u0 * v2) + px * (v2 - v0) + py * (u0 - u2)
                if sgn * w1 < -tol:
                    continue
                w2 = (u0 * v1 - u1 * v0) + px * (v0 - v1) + py * (u1 - u0)
                if sgn * w2 < -tol:
                    continue
                l0 = w0 * inv_area; l1 = w1 * inv_area; l2 = w2 * inv_area
                invz = l0 * q0 + l1 * q1 + l2 * q2
                if invz <= 0.0:
                    continue
                z = 1.0 / invz
                if z < depth[py, px]:
                    depth[py, px] = z
                    fid[py, px] = <int>f
                    color[py, px, 0] = (l0 * q0 * colors[i0, 0] + l1 * q1 * colors[i1, 0]
                                        + l2 * q2 * colors[i2, 0]) * z
                    color[py, px, 1] = (l0 * q0 * colors[i0, 1] + l1 * q1 * colors[i1, 1]
                                        + l2 * q2 * colors[i2, 1]) * z
                    color[py, px, 2] = (l0 * q0 * colors[i0, 2] + l1 * q1 * colors[i1, 2]
                                        + l2 * q2 * colors[i2, 2]) * z

    return depth_arr, color_arr, fid_arr


def splat_min_depth(double[::1] us, double[::1] vs, double[::1] zs,
                    int height, int width):
    """Min-z scatter of points onto the four pixel corners of each target location."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] buf_arr = np.full((height, width), np.inf)
    cdef double[:, ::1] buf = buf_arr
    cdef Py_ssize_t n = us.shape[0]
    cdef Py_ssize_t i
    cdef int x0, y0, x, y, dx, dy
    cdef double u, v, z

    for i in range(n):
        u = us[i]; v = vs[i]; z = zs[i]
        x0 = <int>floor(u); y0 = <int>floor(v)
        for dy in range(2):
            y = y0 + dy
            if y < 0 or y >= height:
                continue
            for dx in range(2):
                x = x0 + dx
                if x < 0 or x >= width:
                    continue
                if z < buf[y, x]:
                    buf[y, x] = z
    return buf_arr
