"""Numpy fallback kernels.

Every floating-point expression here fixes its association order explicitly
(no BLAS, no fused reductions) so the compiled twin in _kernels.pyx, built
with -ffp-contract=off, produces bitwise-identical results.
"""

from __future__ import annotations

import numpy as np


def blend_affine(points, weights, mats):
    """out_i = sum_j w_ij * (M_j[:, :3] p_i + M_j[:, 3]).

    points (N, 3) f64, weights (N, J) f64, mats (J, 3, 4) f64 -> (N, 3) f64.
    """
    x = points[:, 0]
    y = points[:, 1]
    z = points[:, 2]
    n = points.shape[0]
    ox = np.zeros(n)
    oy = np.zeros(n)
    oz = np.zeros(n)
    for j in range(mats.shape[0]):
        m = mats[j]
        w = weights[:, j]
        px = ((x * m[0, 0] + y * m[0, 1]) + z * m[0, 2]) + m[0, 3]
        py = ((x * m[1, 0] + y * m[1, 1]) + z * m[1, 2]) + m[1, 3]
        pz = ((x * m[2, 0] + y * m[2, 1]) + z * m[2, 2]) + m[2, 3]
        ox = ox + w * px
        oy = oy + w * py
        oz = oz + w * pz
    return np.stack([ox, oy, oz], axis=1)


def project_flags(points, R, t, f, cx, cy, width, height, mask):
    """Project points and test image/mask membership with nearest-pixel lookup.

    Returns (in_img, in_mask) uint8 arrays. A point counts as in-image when its
    depth exceeds 1e-6 m and its nearest pixel lies inside the bounds.
    """
    x = points[:, 0]
    y = points[:, 1]
    z = points[:, 2]
    X = ((x * R[0, 0] + y * R[0, 1]) + z * R[0, 2]) + t[0]
    Y = ((x * R[1, 0] + y * R[1, 1]) + z * R[1, 2]) + t[1]
    Z = ((x * R[2, 0] + y * R[2, 1]) + z * R[2, 2]) + t[2]
    valid = Z > 1e-6
    safe = np.where(valid, Z, 1.0)
    invz = 1.0 / safe
    u = (f * X) * invz + cx
    v = (f * Y) * invz + cy
    px = np.floor(u + 0.5).astype(np.int64)
    py = np.floor(v + 0.5).astype(np.int64)
    in_img = valid & (px >= 0) & (px < width) & (py >= 0) & (py < height)
    in_mask = np.zeros(points.shape[0], dtype=np.uint8)
    idx = np.nonzero(in_img)[0]
    if idx.size:
        hit = mask[py[idx], px[idx]] != 0
        in_mask[idx[hit]] = 1
    return in_img.astype(np.uint8), in_mask


def laplace_smooth(weights, iterations):
    """Iterated 6-neighborhood mean over a (nx, ny, nz, C) lattice.

    Each pass replaces a cell by the mean of itself and its in-grid axis
    neighbors, then re-normalizes each cell's channel vector to sum 1.
    """
    w = np.array(weights, dtype=np.float64, copy=True)
    nx, ny, nz, nc = w.shape
    count = np.full((nx, ny, nz), 1.0)
    count[:-1] += 1.0
    count[1:] += 1.0
    count[:, :-1] += 1.0
    count[:, 1:] += 1.0
    count[:, :, :-1] += 1.0
    count[:, :, 1:] += 1.0
    for _ in range(int(iterations)):
        acc = w.copy()
        acc[:-1] += w[1:]
        acc[1:] += w[:-1]
        acc[:, :-1] += w[:, 1:]
        acc[:, 1:] += w[:, :-1]
        acc[:, :, :-1] += w[:, :, 1:]
        acc[:, :, 1:] += w[:, :, :-1]
        acc /= count[:, :, :, None]
        total = acc[..., 0].copy()
        for c in range(1, nc):
            total += acc[..., c]
        total = np.where(total > 0.0, total, 1.0)
        acc /= total[:, :, :, None]
        w = acc
    return w


def trilinear(field, origin, cell, points):
    """Sample a (nx, ny, nz, C) lattice at arbitrary points.

    Lattice values sit at cell centers origin + i * cell. Returns
    (values (N, C), inside (N,) uint8); values for outside points are 0.
    """
    nx, ny, nz, nc = field.shape
    n = points.shape[0]
    gx = (points[:, 0] - origin[0]) / cell[0]
    gy = (points[:, 1] - origin[1]) / cell[1]
    gz = (points[:, 2] - origin[2]) / cell[2]
    inside = (
        (gx >= 0.0) & (gx <= nx - 1) &
        (gy >= 0.0) & (gy <= ny - 1) &
        (gz >= 0.0) & (gz <= nz - 1)
    )
    ix = np.clip(np.floor(gx).astype(np.int64), 0, nx - 2)
    iy = np.clip(np.floor(gy).astype(np.int64), 0, ny - 2)
    iz = np.clip(np.floor(gz).astype(np.int64), 0, nz - 2)
    fx = gx - ix
    fy = gy - iy
    fz = gz - iz
    out = np.zeros((n, nc))
    for dz in (0, 1):
        wz = fz if dz else 1.0 - fz
        for dy in (0, 1):
            wy = fy if dy else 1.0 - fy
            for dx in (0, 1):
                wx = fx if dx else 1.0 - fx
                wgt = (wx * wy) * wz
                vals = field[ix + dx, iy + dy, iz + dz]
                out = out + wgt[:, None] * vals
    out[~inside] = 0.0
    return out, inside.astype(np.uint8)


def fill_rects(x0, x1, y0, y1, height, width):
    """Union of inclusive integer rectangles as a (height, width) uint8 mask.

    Bounds must already be clipped to the image.
    """
    diff = np.zeros((height + 1, width + 1), dtype=np.int64)
    np.add.at(diff, (y0, x0), 1)
    np.add.at(diff, (y0, x1 + 1), -1)
    np.add.at(diff, (y1 + 1, x0), -1)
    np.add.at(diff, (y1 + 1, x1 + 1), 1)
    acc = np.cumsum(np.cumsum(diff, axis=0), axis=1)
    return (acc[:height, :width] > 0).astype(np.uint8)
