"""Volumetric skinning-weight fields and the canonical/posed warps.

A weight field stores, per voxel center, a convex combination over the 24
bones. Construction: inverse-distance interpolation of the surface vertex
weights over the k nearest vertices, then a distance-based fade toward the
root bone far from the body, then iterated Laplacian smoothing. Points warp
by blending per-bone rigid transforms with their (trilinearly sampled)
weights.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from . import backend
from .body import BodyMesh, BoneTransforms, PoseParams, forward_kinematics
from .grid import GridSpec

K_NEIGHBORS = 30
DEWEIGHT_TAU = 0.8
DEWEIGHT_EXPONENT = 0.25
SMOOTH_ITERATIONS = 30
COINCIDENCE_EPS = 1e-9


@dataclass(frozen=True)
class SkinningConfig:
    k: int = K_NEIGHBORS
    deweight_tau: float = DEWEIGHT_TAU
    deweight_exponent: float = DEWEIGHT_EXPONENT
    smooth_iterations: int = SMOOTH_ITERATIONS

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.deweight_tau > 0:
            raise ValueError(f"deweight_tau must be positive, got {self.deweight_tau}")
        if not self.deweight_exponent > 0:
            raise ValueError(f"deweight_exponent must be positive, got {self.deweight_exponent}")
        if self.smooth_iterations < 0:
            raise ValueError(f"smooth_iterations must be >= 0, got {self.smooth_iterations}")


@dataclass(frozen=True)
class WeightField:
    spec: GridSpec
    weights: np.ndarray        # (nx, ny, nz, n_bones) rows nonneg, sum 1
    d_min: np.ndarray | None = None  # (nx, ny, nz) distance to nearest source vertex

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        nx, ny, nz = self.spec.resolution
        if w.shape[:3] != (nx, ny, nz):
            raise ValueError(f"weights shape {w.shape} does not match grid {self.spec.resolution}")
        object.__setattr__(self, "weights", w)

    @property
    def n_bones(self) -> int:
        return self.weights.shape[3]

    def flat_weights(self) -> np.ndarray:
        return self.spec.flatten(self.weights)


def _sorted_knn(vertices: np.ndarray, queries: np.ndarray, k: int):
    """k nearest vertices per query, ties broken toward the lower index."""
    tree = cKDTree(vertices)
    k_eff = min(k, vertices.shape[0])
    dist, idx = tree.query(queries, k=k_eff, workers=1)
    if k_eff == 1:
        dist = dist[:, None]
        idx = idx[:, None]
    # stable two-pass sort: by index first, then by distance, so equal
    # distances come out in ascending index order
    order = np.argsort(idx, axis=1, kind="stable")
    dist = np.take_along_axis(dist, order, axis=1)
    idx = np.take_along_axis(idx, order, axis=1)
    order = np.argsort(dist, axis=1, kind="stable")
    dist = np.take_along_axis(dist, order, axis=1)
    idx = np.take_along_axis(idx, order, axis=1)
    return dist, idx


def compute_lbs_field(
    vertices: np.ndarray,
    vertex_weights: np.ndarray,
    spec: GridSpec,
    k: int = K_NEIGHBORS,
) -> WeightField:
    """Inverse-distance interpolation of vertex weights over k nearest vertices.

    A voxel center coinciding with a vertex (distance < 1e-9) copies that
    vertex's weights exactly.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    vertex_weights = np.asarray(vertex_weights, dtype=np.float64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ValueError(f"vertices must be (M, 3), got {vertices.shape}")
    if vertex_weights.shape[0] != vertices.shape[0]:
        raise ValueError("vertex_weights rows must match vertices")
    centers = spec.voxel_centers()
    dist, idx = _sorted_knn(vertices, centers, k)

    n_bones = vertex_weights.shape[1]
    n = centers.shape[0]
    num = np.zeros((n, n_bones))
    den = np.zeros(n)
    safe = np.maximum(dist, COINCIDENCE_EPS)
    for kk in range(dist.shape[1]):
        invd = 1.0 / safe[:, kk]
        num = num + vertex_weights[idx[:, kk]] * invd[:, None]
        den = den + invd
    w = num / den[:, None]

    coincident = dist[:, 0] < COINCIDENCE_EPS
    if np.any(coincident):
        w[coincident] = vertex_weights[idx[coincident, 0]]

    total = w[:, 0].copy()
    for c in range(1, n_bones):
        total += w[:, c]
    w = w / total[:, None]

    return WeightField(
        spec=spec,
        weights=spec.unflatten(w),
        d_min=spec.unflatten(dist[:, 0].copy()),
    )


def deweight(
    field: WeightField,
    tau: float = DEWEIGHT_TAU,
    exponent: float = DEWEIGHT_EXPONENT,
) -> WeightField:
    """Fade weights toward the root bone away from the body surface.

    alpha = max((tau - d) / (tau + d), 0) ** exponent; the cell's weights
    become (1 - alpha) e_root + alpha w. On the surface (d = 0) the weights
    are untouched; at d >= tau the cell is fully pinned to the root.
    """
    if field.d_min is None:
        raise ValueError("field carries no source distances; build it with compute_lbs_field")
    d = field.d_min
    alpha = np.maximum((tau - d) / (tau + d), 0.0) ** exponent
    w = field.weights * alpha[..., None]
    w[..., 0] += 1.0 - alpha
    return replace(field, weights=w)


def laplace_smooth(field: WeightField, iterations: int = SMOOTH_ITERATIONS) -> WeightField:
    """Iterated in-grid 6-neighborhood averaging with per-cell renormalization."""
    return replace(field, weights=backend.laplace_smooth(field.weights, iterations))


def build_weight_field(
    vertices: np.ndarray,
    vertex_weights: np.ndarray,
    spec: GridSpec,
    config: SkinningConfig = SkinningConfig(),
) -> WeightField:
    """Full pipeline: interpolate, deweight, smooth."""
    field = compute_lbs_field(vertices, vertex_weights, spec, k=config.k)
    field = deweight(field, tau=config.deweight_tau, exponent=config.deweight_exponent)
    field = laplace_smooth(field, iterations=config.smooth_iterations)
    return field


def canonical_weight_field(
    body: BodyMesh, spec: GridSpec, config: SkinningConfig = SkinningConfig()
) -> WeightField:
    return build_weight_field(body.vertices, body.weights, spec, config)


def pose_mesh(body: BodyMesh, bones: BoneTransforms) -> np.ndarray:
    """Skin the template vertices with per-bone transforms."""
    return backend.blend_affine(body.vertices, body.weights, bones.mats)


def posed_weight_field(
    body: BodyMesh,
    pose: PoseParams,
    spec: GridSpec,
    config: SkinningConfig = SkinningConfig(),
) -> tuple[WeightField, BoneTransforms]:
    """Weight field built around the posed surface (for the inverse warp)."""
    bones = forward_kinematics(body.skeleton, pose)
    posed_vertices = pose_mesh(body, bones)
    field = build_weight_field(posed_vertices, body.weights, spec, config)
    return field, bones


def sample_weights(field: WeightField, points: np.ndarray) -> np.ndarray:
    """Trilinear weight lookup at arbitrary points, renormalized to sum 1.

    Raises if any point falls outside the field's sampled region.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    vals, inside = backend.trilinear(
        field.weights, field.spec.origin, field.spec.cell_size, pts
    )
    n_out = int(pts.shape[0] - int(inside.sum()))
    if n_out:
        raise ValueError(f"{n_out} of {pts.shape[0]} points fall outside the weight field")
    total = vals[:, 0].copy()
    for c in range(1, vals.shape[1]):
        total += vals[:, c]
    total = np.where(total > 0.0, total, 1.0)
    return vals / total[:, None]


def warp_forward(field: WeightField, bones: BoneTransforms, points: np.ndarray) -> np.ndarray:
    """Canonical-space points to posed space through the canonical field."""
    w = sample_weights(field, points)
    return backend.blend_affine(np.ascontiguousarray(points, dtype=np.float64), w, bones.mats)


def warp_inverse(
    posed_field: WeightField, bones: BoneTransforms, points: np.ndarray
) -> np.ndarray:
    """Posed-space points to canonical space through a posed-space field."""
    w = sample_weights(posed_field, points)
    return backend.blend_affine(
        np.ascontiguousarray(points, dtype=np.float64), w, bones.inverse_mats()
    )
