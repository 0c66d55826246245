"""Shared small helpers: SO(3) maps, deterministic parallel mapping, hashing."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "CHORUS_THREADS"


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(r: np.ndarray) -> np.ndarray:
    """Axis-angle 3-vector to rotation matrix."""
    r = np.asarray(r, dtype=np.float64)
    theta = float(np.linalg.norm(r))
    K = skew(r)
    if theta < 1e-8:
        # second-order series, exact enough at this magnitude
        return np.eye(3) + K + 0.5 * (K @ K)
    K = K / theta
    s, c = np.sin(theta), np.cos(theta)
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def so3_log(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to axis-angle 3-vector (angle in [0, pi])."""
    R = np.asarray(R, dtype=np.float64)
    c = (np.trace(R) - 1.0) * 0.5
    c = min(1.0, max(-1.0, c))
    theta = np.arccos(c)
    if theta < 1e-8:
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) * 0.5
    if np.pi - theta < 1e-6:
        # near pi: axis from the symmetric part
        A = (R + np.eye(3)) * 0.5
        axis = np.sqrt(np.maximum(np.diag(A), 0.0))
        # fix signs using off-diagonal terms
        if axis[0] > 0:
            axis[1] = np.copysign(axis[1], A[0, 1])
            axis[2] = np.copysign(axis[2], A[0, 2])
        elif axis[1] > 0:
            axis[2] = np.copysign(axis[2], A[1, 2])
        axis /= max(np.linalg.norm(axis), 1e-12)
        return axis * theta
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return v * (theta / (2.0 * np.sin(theta)))


def so3_right_jacobian(w: np.ndarray) -> np.ndarray:
    """Right Jacobian of the exponential map: d Exp(w+dw) ~ Exp(w) Exp(Jr dw)."""
    w = np.asarray(w, dtype=np.float64)
    theta = float(np.linalg.norm(w))
    K = skew(w)
    if theta < 1e-4:
        t2 = theta * theta
        a = 0.5 - t2 / 24.0
        b = 1.0 / 6.0 - t2 / 120.0
    else:
        a = (1.0 - np.cos(theta)) / (theta * theta)
        b = (theta - np.sin(theta)) / (theta * theta * theta)
    return np.eye(3) - a * K + b * (K @ K)


def fibonacci_sphere(n: int) -> np.ndarray:
    """n near-uniform unit directions, deterministic."""
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    phi = golden * i
    return np.stack([rho * np.cos(phi), z, rho * np.sin(phi)], axis=1)


def resolve_threads(threads: int | None) -> int:
    if threads is not None:
        n = int(threads)
    else:
        n = int(os.environ.get(THREADS_ENV, "1"))
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    return n


def map_ordered(fn, items, threads: int):
    """Apply fn to items, preserving input order in the result list."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]
