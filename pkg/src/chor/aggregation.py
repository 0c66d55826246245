"""Canonical occupancy aggregation from posed multi-view mask evidence.

Every voxel center is warped into each view by its pose's bone transforms
(blended with the canonical weight field), projected, and looked up in that
view's mask. The field value is the score-weighted fraction of mask hits
among the views whose image actually covers the projected point:

    value(x) = sum_k r_k hit_k(x) / sum_k r_k seen_k(x),   0 where unseen.

Scores r_k equalize azimuth coverage: cameras fall into equal azimuth bins
and each view carries 1 / (views in its bin).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from . import backend, field_io
from .body import BodyMesh, PoseParams, forward_kinematics, part_vertices
from .camera import AZIMUTH_BINS, DegenerateAzimuthError, PerspectiveCamera, azimuth_bin, azimuth_of
from .grid import GridSpec
from .skinning import SkinningConfig, WeightField, posed_weight_field
from .util import map_ordered

log = logging.getLogger(__name__)

HOLISTIC = "holistic"
INTERACTION_EPS = 0.13


@dataclass(frozen=True)
class ViewSample:
    view_id: str
    camera: PerspectiveCamera
    pose: PoseParams
    mask: np.ndarray                 # (H, W) bool, object evidence
    human_mask: np.ndarray | None = None
    prompt: str = "default"
    score: float = 1.0

    def __post_init__(self):
        mask = np.asarray(self.mask)
        expected = (self.camera.height, self.camera.width)
        if mask.shape != expected:
            raise ValueError(f"mask shape {mask.shape} does not match camera image {expected}")
        if self.human_mask is not None and np.asarray(self.human_mask).shape != expected:
            raise ValueError("human mask shape does not match camera image")
        if not self.score >= 0:
            raise ValueError(f"score must be nonnegative, got {self.score}")


@dataclass(frozen=True)
class OccupancyField:
    spec: GridSpec
    values: np.ndarray            # (nx, ny, nz) in [0, 1]
    semantic: tuple[str, str] | str = HOLISTIC  # HOLISTIC or (prompt, part)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.spec.resolution:
            raise ValueError(f"values shape {v.shape} does not match grid {self.spec.resolution}")
        object.__setattr__(self, "values", v)
        sem = self.semantic
        if sem != HOLISTIC:
            sem = tuple(sem)
            if len(sem) != 2:
                raise ValueError(f"semantic must be {HOLISTIC!r} or (prompt, part), got {sem}")
            object.__setattr__(self, "semantic", sem)

    def save(self, path, extra_meta: dict | None = None) -> None:
        field_io.write_chor(path, self.spec, self.values, field_io.KIND_SCALAR)
        meta = {"semantic": list(self.semantic) if self.semantic != HOLISTIC else HOLISTIC}
        if extra_meta:
            meta.update(extra_meta)
        field_io.write_sidecar(path, meta)

    @staticmethod
    def load(path) -> "OccupancyField":
        spec, kind, values = field_io.read_chor(path)
        if kind != field_io.KIND_SCALAR:
            raise field_io.ChorFormatError(f"{path}: expected a scalar field")
        semantic = HOLISTIC
        meta = field_io.read_sidecar(path)
        if meta and "semantic" in meta:
            sem = meta["semantic"]
            semantic = HOLISTIC if sem == HOLISTIC else (sem[0], sem[1])
        return OccupancyField(spec=spec, values=values, semantic=semantic)


def assign_accumulation_scores(views, bins: int = AZIMUTH_BINS):
    """Equalize azimuth coverage: score = 1 / (views in the camera's bin).

    Views with degenerate azimuth (camera on the vertical axis) are dropped
    with a warning.
    """
    scored = []
    azimuths = []
    for view in views:
        try:
            azimuths.append(azimuth_of(view.camera))
            scored.append(view)
        except DegenerateAzimuthError:
            log.warning("view %s: degenerate azimuth, dropped from aggregation", view.view_id)
    counts = np.zeros(bins, dtype=np.int64)
    bin_of = [azimuth_bin(az, bins) for az in azimuths]
    for b in bin_of:
        counts[b] += 1
    return [
        replace(view, score=1.0 / counts[b])
        for view, b in zip(scored, bin_of)
    ]


def bin_counts(views, bins: int = AZIMUTH_BINS) -> np.ndarray:
    counts = np.zeros(bins, dtype=np.int64)
    for view in views:
        try:
            counts[azimuth_bin(azimuth_of(view.camera), bins)] += 1
        except DegenerateAzimuthError:
            continue
    return counts


def _sorted_views(views):
    return sorted(views, key=lambda v: v.view_id)


def aggregate(
    views,
    weight_field: WeightField,
    body: BodyMesh,
    threads: int = 1,
    identity_warp: bool = False,
) -> OccupancyField:
    """Holistic canonical occupancy from scored views.

    identity_warp disables canonicalization (points are tested where they sit)
    and exists for ablation only.
    """
    views = _sorted_views(views)
    if not views:
        raise ValueError("no views to aggregate")
    spec = weight_field.spec
    centers = spec.voxel_centers()
    flat_w = weight_field.flat_weights()

    def per_view(view: ViewSample):
        if identity_warp:
            posed = centers
        else:
            bones = forward_kinematics(body.skeleton, view.pose)
            posed = backend.blend_affine(centers, flat_w, bones.mats)
        cam = view.camera
        in_img, in_mask = backend.project_flags(
            posed, cam.R, cam.t, cam.f, cam.cx, cam.cy, cam.width, cam.height, view.mask
        )
        return in_img, in_mask

    results = map_ordered(per_view, views, threads)
    num = np.zeros(centers.shape[0])
    den = np.zeros(centers.shape[0])
    for view, (in_img, in_mask) in zip(views, results):
        num = num + view.score * in_mask.astype(np.float64)
        den = den + view.score * in_img.astype(np.float64)
    values = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    return OccupancyField(spec=spec, values=spec.unflatten(values), semantic=HOLISTIC)


def interaction_region(
    body: BodyMesh,
    part: str,
    spec: GridSpec,
    eps: float = INTERACTION_EPS,
) -> np.ndarray:
    """Flat indices of voxel centers within eps of any vertex of the part.

    Raises when the region comes out empty (eps too small for the grid).
    """
    if eps <= 0:
        raise ValueError(f"interaction radius must be positive, got {eps}")
    idx = part_vertices(body, part)
    pts = body.vertices[idx]
    centers = spec.voxel_centers()
    tree = cKDTree(pts)
    dist, _ = tree.query(centers, k=1, workers=1)
    region = np.nonzero(dist <= eps)[0]
    if region.size == 0:
        raise ValueError(f"interaction region for part {part!r} is empty at eps={eps}")
    return region


@dataclass(frozen=True)
class SelectiveStats:
    candidates: int
    used: int


def selective_aggregate(
    views,
    weight_field: WeightField,
    body: BodyMesh,
    prompt: str,
    part: str,
    eps: float = INTERACTION_EPS,
    threads: int = 1,
) -> tuple[OccupancyField, SelectiveStats]:
    """Aggregation restricted to prompt views showing contact with the part.

    A view participates only when at least one warped interaction-region point
    projects inside its object mask. With no surviving views the returned
    field is all zero.
    """
    candidates = _sorted_views(v for v in views if v.prompt == prompt)
    spec = weight_field.spec
    centers = spec.voxel_centers()
    flat_w = weight_field.flat_weights()
    region = interaction_region(body, part, spec, eps)
    region_pts = centers[region]
    region_w = flat_w[region]

    def per_view(view: ViewSample):
        bones = forward_kinematics(body.skeleton, view.pose)
        cam = view.camera
        reg_posed = backend.blend_affine(region_pts, region_w, bones.mats)
        _, reg_hit = backend.project_flags(
            reg_posed, cam.R, cam.t, cam.f, cam.cx, cam.cy, cam.width, cam.height, view.mask
        )
        if not reg_hit.any():
            return None
        posed = backend.blend_affine(centers, flat_w, bones.mats)
        return backend.project_flags(
            posed, cam.R, cam.t, cam.f, cam.cx, cam.cy, cam.width, cam.height, view.mask
        )

    results = map_ordered(per_view, candidates, threads)
    num = np.zeros(centers.shape[0])
    den = np.zeros(centers.shape[0])
    used = 0
    for view, res in zip(candidates, results):
        if res is None:
            continue
        used += 1
        in_img, in_mask = res
        num = num + view.score * in_mask.astype(np.float64)
        den = den + view.score * in_img.astype(np.float64)
    if used == 0:
        log.warning("selective aggregation for (%s, %s): no views showed contact", prompt, part)
    values = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    field = OccupancyField(spec=spec, values=spec.unflatten(values), semantic=(prompt, part))
    return field, SelectiveStats(candidates=len(candidates), used=used)


@dataclass(frozen=True)
class PosedSampler:
    """Cached posed-to-canonical coordinates for one pose.

    Building one runs the expensive posed-field pipeline; sampling any
    canonical field with it afterwards is cheap.
    """

    spec: GridSpec
    coords: np.ndarray   # (n_cells, 3) canonical coordinates of posed centers
    identity: bool = False

    def sample(self, field: OccupancyField) -> OccupancyField:
        if field.spec != self.spec:
            raise ValueError("field grid does not match the sampler grid")
        if self.identity:
            return replace(field)
        vals, _ = backend.trilinear(
            field.values, self.spec.origin, self.spec.cell_size, self.coords
        )
        vals = vals[:, 0]  # outside points already sampled as 0
        return replace(field, values=self.spec.unflatten(vals))


def build_posed_sampler(
    body: BodyMesh,
    pose: PoseParams,
    spec: GridSpec,
    config: SkinningConfig = SkinningConfig(),
    identity_warp: bool = False,
) -> PosedSampler:
    if identity_warp:
        return PosedSampler(spec=spec, coords=spec.voxel_centers(), identity=True)
    pfield, bones = posed_weight_field(body, pose, spec, config)
    centers = spec.voxel_centers()
    flat_w = pfield.flat_weights()
    coords = backend.blend_affine(centers, flat_w, bones.inverse_mats())
    return PosedSampler(spec=spec, coords=coords)


def infer_posed(
    field: OccupancyField,
    body: BodyMesh,
    pose: PoseParams,
    config: SkinningConfig = SkinningConfig(),
    identity_warp: bool = False,
) -> OccupancyField:
    """Resample a canonical field into the given pose's space.

    Each posed voxel center is carried back to canonical space with the
    inverse blended bone transforms (weights from a field built around the
    posed surface) and the canonical field is sampled there; points leaving
    the grid read as empty.
    """
    sampler = build_posed_sampler(body, pose, field.spec, config, identity_warp)
    return sampler.sample(field)
