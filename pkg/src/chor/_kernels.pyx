# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels. Mirrors _kernels_np.py expression-for-expression; the
extension is built with -ffp-contract=off so both backends round identically.
"""

from libc.math cimport floor

import numpy as np

cimport numpy as cnp

cnp.import_array()


def blend_affine(double[:, ::1] points, double[:, ::1] weights, double[:, :, ::1] mats):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t nj = mats.shape[0]
    out_arr = np.zeros((n, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double x, y, z, px, py, pz, w
    cdef double m00, m01, m02, m03, m10, m11, m12, m13, m20, m21, m22, m23
    with nogil:
        for i in range(n):
            x = points[i, 0]
            y = points[i, 1]
            z = points[i, 2]
            for j in range(nj):
                w = weights[i, j]
                m00 = mats[j, 0, 0]; m01 = mats[j, 0, 1]; m02 = mats[j, 0, 2]; m03 = mats[j, 0, 3]
                m10 = mats[j, 1, 0]; m11 = mats[j, 1, 1]; m12 = mats[j, 1, 2]; m13 = mats[j, 1, 3]
                m20 = mats[j, 2, 0]; m21 = mats[j, 2, 1]; m22 = mats[j, 2, 2]; m23 = mats[j, 2, 3]
                px = ((x * m00 + y * m01) + z * m02) + m03
                py = ((x * m10 + y * m11) + z * m12) + m13
                pz = ((x * m20 + y * m21) + z * m22) + m23
                out[i, 0] = out[i, 0] + w * px
                out[i, 1] = out[i, 1] + w * py
                out[i, 2] = out[i, 2] + w * pz
    return out_arr


def project_flags(double[:, ::1] points, double[:, ::1] R, double[::1] t,
                  double f, double cx, double cy, int width, int height,
                  const unsigned char[:, ::1] mask):
    cdef Py_ssize_t n = points.shape[0]
    in_img_arr = np.zeros(n, dtype=np.uint8)
    in_mask_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] in_img = in_img_arr
    cdef unsigned char[::1] in_mask = in_mask_arr
    cdef Py_ssize_t i
    cdef double x, y, z, X, Y, Z, invz, u, v
    cdef long px, py
    cdef double r00 = R[0, 0], r01 = R[0, 1], r02 = R[0, 2]
    cdef double r10 = R[1, 0], r11 = R[1, 1], r12 = R[1, 2]
    cdef double r20 = R[2, 0], r21 = R[2, 1], r22 = R[2, 2]
    cdef double t0 = t[0], t1 = t[1], t2 = t[2]
    with nogil:
        for i in range(n):
            x = points[i, 0]
            y = points[i, 1]
            z = points[i, 2]
            Z = ((x * r20 + y * r21) + z * r22) + t2
            if Z <= 1e-6:
                continue
            X = ((x * r00 + y * r01) + z * r02) + t0
            Y = ((x * r10 + y * r11) + z * r12) + t1
            invz = 1.0 / Z
            u = (f * X) * invz + cx
            v = (f * Y) * invz + cy
            px = <long>floor(u + 0.5)
            py = <long>floor(v + 0.5)
            if px >= 0 and px < width and py >= 0 and py < height:
                in_img[i] = 1
                if mask[py, px] != 0:
                    in_mask[i] = 1
    return in_img_arr, in_mask_arr


def laplace_smooth(double[:, :, :, ::1] weights, int iterations):
    cdef Py_ssize_t nx = weights.shape[0]
    cdef Py_ssize_t ny = weights.shape[1]
    cdef Py_ssize_t nz = weights.shape[2]
    cdef Py_ssize_t nc = weights.shape[3]
    w_arr = np.array(weights, dtype=np.float64, copy=True)
    acc_arr = np.zeros_like(w_arr)
    cdef double[:, :, :, ::1] w = w_arr
    cdef double[:, :, :, ::1] acc = acc_arr
    cdef double[:, :, :, ::1] tmp
    cdef Py_ssize_t it, i, j, k, c
    cdef double s, cnt, total
    with nogil:
        for it in range(iterations):
            for i in range(nx):
                for j in range(ny):
                    for k in range(nz):
                        cnt = 1.0
                        if i < nx - 1: cnt += 1.0
                        if i > 0: cnt += 1.0
                        if j < ny - 1: cnt += 1.0
                        if j > 0: cnt += 1.0
                        if k < nz - 1: cnt += 1.0
                        if k > 0: cnt += 1.0
                        total = 0.0
                        for c in range(nc):
                            s = w[i, j, k, c]
                            if i < nx - 1: s += w[i + 1, j, k, c]
                            if i > 0: s += w[i - 1, j, k, c]
                            if j < ny - 1: s += w[i, j + 1, k, c]
                            if j > 0: s += w[i, j - 1, k, c]
                            if k < nz - 1: s += w[i, j, k + 1, c]
                            if k > 0: s += w[i, j, k - 1, c]
                            s /= cnt
                            acc[i, j, k, c] = s
                            total += s
                        if total <= 0.0:
                            total = 1.0
                        for c in range(nc):
                            acc[i, j, k, c] /= total
            tmp = w
            w = acc
            acc = tmp
    if iterations % 2 == 1:
        return acc_arr
    return w_arr


def trilinear(double[:, :, :, ::1] field, double[::1] origin, double[::1] cell,
              double[:, ::1] points):
    cdef Py_ssize_t nx = field.shape[0]
    cdef Py_ssize_t ny = field.shape[1]
    cdef Py_ssize_t nz = field.shape[2]
    cdef Py_ssize_t nc = field.shape[3]
    cdef Py_ssize_t n = points.shape[0]
    out_arr = np.zeros((n, nc), dtype=np.float64)
    inside_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] out = out_arr
    cdef unsigned char[::1] inside = inside_arr
    cdef Py_ssize_t i, c, ix, iy, iz, dx, dy, dz
    cdef double gx, gy, gz, fx, fy, fz, wx, wy, wz, wgt
    with nogil:
        for i in range(n):
            gx = (points[i, 0] - origin[0]) / cell[0]
            gy = (points[i, 1] - origin[1]) / cell[1]
            gz = (points[i, 2] - origin[2]) / cell[2]
            if not (gx >= 0.0 and gx <= nx - 1 and
                    gy >= 0.0 and gy <= ny - 1 and
                    gz >= 0.0 and gz <= nz - 1):
                continue
            inside[i] = 1
            ix = <Py_ssize_t>floor(gx)
            iy = <Py_ssize_t>floor(gy)
            iz = <Py_ssize_t>floor(gz)
            if ix < 0: ix = 0
            if ix > nx - 2: ix = nx - 2
            if iy < 0: iy = 0
            if iy > ny - 2: iy = ny - 2
            if iz < 0: iz = 0
            if iz > nz - 2: iz = nz - 2
            fx = gx - ix
            fy = gy - iy
            fz = gz - iz
            for dz in range(2):
                wz = fz if dz else 1.0 - fz
                for dy in range(2):
                    wy = fy if dy else 1.0 - fy
                    for dx in range(2):
                        wx = fx if dx else 1.0 - fx
                        wgt = (wx * wy) * wz
                        for c in range(nc):
                            out[i, c] = out[i, c] + wgt * field[ix + dx, iy + dy, iz + dz, c]
    return out_arr, inside_arr


def fill_rects(long[::1] x0, long[::1] x1, long[::1] y0, long[::1] y1,
               int height, int width):
    cdef Py_ssize_t m = x0.shape[0]
    out_arr = np.zeros((height, width), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t r, yy, xx
    with nogil:
        for r in range(m):
            for yy in range(y0[r], y1[r] + 1):
                for xx in range(x0[r], x1[r] + 1):
                    out[yy, xx] = 1
    return out_arr
