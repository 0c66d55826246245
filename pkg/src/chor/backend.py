"""Kernel backend selection: compiled extension when available, numpy fallback.

Override with CHORUS_BACKEND=compiled|numpy|auto (default auto). Both backends
produce bitwise-identical results; the compiled one is just faster.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_np

BACKEND_ENV = "CHORUS_BACKEND"

_compiled = None
_requested = os.environ.get(BACKEND_ENV, "auto")
if _requested not in ("auto", "compiled", "numpy"):
    raise ValueError(f"{BACKEND_ENV} must be auto, compiled, or numpy; got {_requested!r}")
if _requested in ("auto", "compiled"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "compiled kernels requested via CHORUS_BACKEND but the "
                "chor._kernels extension is not built"
            )
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_np


def active_backend() -> str:
    return "compiled" if _impl is _compiled and _compiled is not None else "numpy"


def _f64c(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def blend_affine(points, weights, mats) -> np.ndarray:
    """Weighted affine blend: sum_j w_ij (R_j p_i + t_j)."""
    points = _f64c(points)
    weights = _f64c(weights)
    mats = _f64c(mats)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"points must be (N, 3), got {points.shape}")
    if weights.shape != (points.shape[0], mats.shape[0]):
        raise ValueError(
            f"weights shape {weights.shape} does not match "
            f"{points.shape[0]} points x {mats.shape[0]} bones"
        )
    return _impl.blend_affine(points, weights, mats)


def project_flags(points, R, t, f, cx, cy, width, height, mask):
    """Per-point (in_image, in_mask) uint8 flags under a perspective camera."""
    points = _f64c(points)
    mask_u8 = np.ascontiguousarray(mask, dtype=np.uint8)
    if mask_u8.shape != (int(height), int(width)):
        raise ValueError(f"mask shape {mask_u8.shape} != image {int(height)}x{int(width)}")
    return _impl.project_flags(
        points, _f64c(R), _f64c(t), float(f), float(cx), float(cy),
        int(width), int(height), mask_u8,
    )


def laplace_smooth(weights, iterations: int) -> np.ndarray:
    w = _f64c(weights)
    if w.ndim != 4:
        raise ValueError(f"expected (nx, ny, nz, C) lattice, got shape {w.shape}")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    return _impl.laplace_smooth(w, int(iterations))


def trilinear(field, origin, cell, points):
    fld = _f64c(field)
    if fld.ndim == 3:
        fld = fld[:, :, :, None]
    pts = _f64c(points)
    return _impl.trilinear(fld, _f64c(origin), _f64c(cell), pts)


def fill_rects(x0, x1, y0, y1, height, width) -> np.ndarray:
    x0 = np.ascontiguousarray(x0, dtype=np.int64)
    x1 = np.ascontiguousarray(x1, dtype=np.int64)
    y0 = np.ascontiguousarray(y0, dtype=np.int64)
    y1 = np.ascontiguousarray(y1, dtype=np.int64)
    if x0.size and (
        x0.min() < 0 or y0.min() < 0
        or x1.max() >= width or y1.max() >= height
        or np.any(x1 < x0) or np.any(y1 < y0)
    ):
        raise ValueError("rect bounds must be clipped to the image and non-empty")
    return _impl.fill_rects(x0, x1, y0, y1, int(height), int(width))
