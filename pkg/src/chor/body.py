"""Articulated 24-joint body: skeleton, kinematics, procedural surface template.

Coordinate convention: y up, z forward (the body faces +z), right-handed.
That puts the subject's anatomical LEFT on +x and RIGHT on -x.

Bone transforms are expressed relative to the canonical pose, so every bone
transform is the identity when the canonical pose itself is evaluated. The
canonical pose is all-zero joint rotations except the hips, rotated about z by
+pi/6 (left) and -pi/6 (right) to keep the legs apart.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .util import rodrigues

N_JOINTS = 24

JOINT_NAMES = [
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "chest", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
    "left_hand", "right_hand",
]

PARENTS = np.array(
    [-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21],
    dtype=np.int64,
)

_OFFSETS = np.array([
    [0.00, 0.00, 0.00],    # pelvis
    [+0.09, -0.06, 0.00],  # left_hip
    [-0.09, -0.06, 0.00],  # right_hip
    [0.00, +0.11, 0.00],   # spine1
    [0.00, -0.38, 0.00],   # left_knee
    [0.00, -0.38, 0.00],   # right_knee
    [0.00, +0.12, 0.00],   # spine2
    [0.00, -0.40, 0.00],   # left_ankle
    [0.00, -0.40, 0.00],   # right_ankle
    [0.00, +0.12, 0.00],   # chest
    [0.00, -0.05, +0.12],  # left_foot
    [0.00, -0.05, +0.12],  # right_foot
    [0.00, +0.14, 0.00],   # neck
    [+0.08, +0.08, 0.00],  # left_collar
    [-0.08, +0.08, 0.00],  # right_collar
    [0.00, +0.09, 0.00],   # head
    [+0.10, +0.02, 0.00],  # left_shoulder
    [-0.10, +0.02, 0.00],  # right_shoulder
    [+0.26, 0.00, 0.00],   # left_elbow
    [-0.26, 0.00, 0.00],   # right_elbow
    [+0.25, 0.00, 0.00],   # left_wrist
    [-0.25, 0.00, 0.00],   # right_wrist
    [+0.08, 0.00, 0.00],   # left_hand
    [-0.08, 0.00, 0.00],   # right_hand
])

PART_NAMES = [
    "rightHand", "leftHand", "rightArm", "leftArm",
    "rightLowerLeg", "leftLowerLeg", "rightUpperLeg", "leftUpperLeg",
    "rightFoot", "leftFoot", "torso", "face",
]
PART_INDEX = {name: i for i, name in enumerate(PART_NAMES)}

# (start joint, end joint, radius, part); the capsule is rigidly attached to
# its start joint. End joint -1 marks a leaf cap extended past the start joint
# along the incoming bone direction by the given length.
_CAPSULES = [
    (0, 1, 0.090, "torso"),
    (0, 2, 0.090, "torso"),
    (0, 3, 0.110, "torso"),
    (1, 4, 0.070, "leftUpperLeg"),
    (2, 5, 0.070, "rightUpperLeg"),
    (3, 6, 0.115, "torso"),
    (4, 7, 0.055, "leftLowerLeg"),
    (5, 8, 0.055, "rightLowerLeg"),
    (6, 9, 0.110, "torso"),
    (7, 10, 0.040, "leftFoot"),
    (8, 11, 0.040, "rightFoot"),
    (9, 12, 0.055, "torso"),
    (9, 13, 0.055, "torso"),
    (9, 14, 0.055, "torso"),
    (12, 15, 0.060, "face"),
    (13, 16, 0.050, "torso"),
    (14, 17, 0.050, "torso"),
    (16, 18, 0.045, "leftArm"),
    (17, 19, 0.045, "rightArm"),
    (18, 20, 0.040, "leftArm"),
    (19, 21, 0.040, "rightArm"),
    (20, 22, 0.035, "leftHand"),
    (21, 23, 0.035, "rightHand"),
]
# leaf caps: (joint, length, radius, part)
_LEAF_CAPS = [
    (10, 0.04, 0.035, "leftFoot"),
    (11, 0.04, 0.035, "rightFoot"),
    (15, 0.12, 0.090, "face"),
    (22, 0.08, 0.030, "leftHand"),
    (23, 0.08, 0.030, "rightHand"),
]

JOINT_BLEND_RADIUS = 0.03  # vertices this close to a joint split 50/50 across it


@dataclass(frozen=True)
class Skeleton:
    parents: np.ndarray  # (24,) int, parents[0] == -1, parents[j] < j
    offsets: np.ndarray  # (24, 3) rest offsets from parent, meters

    def __post_init__(self):
        parents = np.asarray(self.parents, dtype=np.int64)
        offsets = np.asarray(self.offsets, dtype=np.float64)
        n = parents.shape[0]
        if offsets.shape != (n, 3):
            raise ValueError(f"offsets shape {offsets.shape} does not match {n} joints")
        if parents[0] != -1:
            raise ValueError("joint 0 must be the root (parent -1)")
        for j in range(1, n):
            if not 0 <= parents[j] < j:
                raise ValueError(f"parent of joint {j} must precede it, got {parents[j]}")
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "offsets", offsets)

    @property
    def n_joints(self) -> int:
        return self.parents.shape[0]


@dataclass(frozen=True)
class PoseParams:
    """global_orient: root axis-angle; joint_rots[j-1]: axis-angle of joint j."""

    global_orient: np.ndarray
    joint_rots: np.ndarray  # (n_joints - 1, 3)

    def __post_init__(self):
        go = np.asarray(self.global_orient, dtype=np.float64).reshape(3)
        jr = np.asarray(self.joint_rots, dtype=np.float64)
        if jr.ndim != 2 or jr.shape[1] != 3:
            raise ValueError(f"joint_rots must be (n-1, 3), got {jr.shape}")
        object.__setattr__(self, "global_orient", go)
        object.__setattr__(self, "joint_rots", jr)

    def to_dict(self) -> dict:
        return {
            "global_orient": self.global_orient.tolist(),
            "joint_rots": self.joint_rots.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "PoseParams":
        extra = set(d) - {"global_orient", "joint_rots"}
        if extra:
            raise ValueError(f"unknown pose keys: {sorted(extra)}")
        return PoseParams(np.array(d["global_orient"]), np.array(d["joint_rots"]))


@dataclass(frozen=True)
class BoneTransforms:
    """Per-bone rigid maps taking canonical-space points to posed space."""

    mats: np.ndarray    # (n, 3, 4) rows [R | t]
    joints: np.ndarray  # (n, 3) posed joint positions

    def inverse_mats(self) -> np.ndarray:
        R = self.mats[:, :, :3]
        t = self.mats[:, :, 3]
        Rt = np.transpose(R, (0, 2, 1))
        ti = -np.einsum("nij,nj->ni", Rt, t)
        return np.concatenate([Rt, ti[:, :, None]], axis=2)


@dataclass(frozen=True)
class Capsule:
    a: np.ndarray      # segment start, canonical space
    b: np.ndarray      # segment end
    radius: float
    bone: int          # bone the capsule rigidly follows
    part: int          # index into PART_NAMES


@dataclass(frozen=True)
class BodyMesh:
    skeleton: Skeleton
    vertices: np.ndarray   # (N, 3) canonical space
    weights: np.ndarray    # (N, n_joints) rows nonnegative, sum 1
    parts: np.ndarray      # (N,) part index per vertex
    capsules: tuple = field(default=(), compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        p = np.asarray(self.parts, dtype=np.int64)
        n = v.shape[0]
        if w.shape != (n, self.skeleton.n_joints):
            raise ValueError(f"weights shape {w.shape} does not match {n} x {self.skeleton.n_joints}")
        if p.shape != (n,):
            raise ValueError(f"parts shape {p.shape} does not match {n} vertices")
        if np.any(w < 0):
            raise ValueError("negative skinning weights")
        sums = w.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise ValueError("skinning weight rows must sum to 1")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "parts", p)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]


def default_skeleton() -> Skeleton:
    return Skeleton(PARENTS.copy(), _OFFSETS.copy())


def canonical_pose(n_joints: int = N_JOINTS) -> PoseParams:
    rots = np.zeros((n_joints - 1, 3))
    if n_joints == N_JOINTS:
        rots[0, 2] = +np.pi / 6.0   # left hip
        rots[1, 2] = -np.pi / 6.0   # right hip
    return PoseParams(np.zeros(3), rots)


def _global_transforms(skel: Skeleton, pose: PoseParams) -> np.ndarray:
    """Accumulated joint-to-world 4x4s for the given pose."""
    n = skel.n_joints
    if pose.joint_rots.shape[0] != n - 1:
        raise ValueError(f"pose has {pose.joint_rots.shape[0] + 1} joints, skeleton has {n}")
    G = np.zeros((n, 4, 4))
    for j in range(n):
        rot = pose.global_orient if j == 0 else pose.joint_rots[j - 1]
        local = np.eye(4)
        local[:3, :3] = rodrigues(rot)
        local[:3, 3] = skel.offsets[j]
        if j == 0:
            G[0] = local
        else:
            G[j] = G[skel.parents[j]] @ local
    return G


def joint_positions(skel: Skeleton, pose: PoseParams) -> np.ndarray:
    return _global_transforms(skel, pose)[:, :3, 3].copy()


def forward_kinematics(skel: Skeleton, pose: PoseParams) -> BoneTransforms:
    """Bone maps relative to the canonical pose (identity at the canonical pose)."""
    G = _global_transforms(skel, pose)
    Gc = _global_transforms(skel, canonical_pose(skel.n_joints))
    n = skel.n_joints
    mats = np.zeros((n, 3, 4))
    for j in range(n):
        Rc = Gc[j, :3, :3]
        tc = Gc[j, :3, 3]
        B = np.eye(4)
        B[:3, :3] = Rc.T
        B[:3, 3] = -Rc.T @ tc
        full = G[j] @ B
        mats[j] = full[:3, :]
    return BoneTransforms(mats=mats, joints=G[:, :3, 3].copy())


def _orthonormal_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([0.0, 1.0, 0.0])
    if abs(float(axis @ ref)) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    e1 = np.cross(axis, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


def _sample_capsule(a, b, radius, count):
    """Deterministic near-uniform surface samples on the capsule from a to b.

    Uses the hat-box map: surface area per unit of the extended axial
    coordinate is constant across both caps and the cylinder.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    h = float(np.linalg.norm(b - a))
    axis = (b - a) / h if h > 1e-12 else np.array([0.0, 1.0, 0.0])
    e1, e2 = _orthonormal_frame(axis)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    i = np.arange(count, dtype=np.float64)
    zeta = -radius + (i + 0.5) / count * (h + 2.0 * radius)
    phi = golden * i
    pts = np.empty((count, 3))
    for k in range(count):
        z = zeta[k]
        if z < 0.0:
            rho = np.sqrt(max(radius * radius - z * z, 0.0))
            center = a + z * axis
        elif z > h:
            zz = z - h
            rho = np.sqrt(max(radius * radius - zz * zz, 0.0))
            center = b + zz * axis
        else:
            rho = radius
            center = a + z * axis
        pts[k] = center + rho * (np.cos(phi[k]) * e1 + np.sin(phi[k]) * e2)
    return pts


def _capsule_table(skel: Skeleton) -> list[Capsule]:
    pose = canonical_pose(skel.n_joints)
    P = joint_positions(skel, pose)
    caps = []
    for start, end, radius, part in _CAPSULES:
        caps.append(Capsule(P[start].copy(), P[end].copy(), radius, start, PART_INDEX[part]))
    for joint, length, radius, part in _LEAF_CAPS:
        parent = skel.parents[joint]
        d = P[joint] - P[parent]
        d = d / np.linalg.norm(d)
        caps.append(Capsule(P[joint].copy(), P[joint] + length * d, radius, joint, PART_INDEX[part]))
    return caps


def build_body(n_vertices: int = 1536) -> BodyMesh:
    """Procedural capsule-sampled body, about 1.7 m tall, pelvis at the origin.

    Vertex skinning weights are hard assignments to the capsule's bone, split
    50/50 across a joint for vertices within JOINT_BLEND_RADIUS of it.
    """
    skel = default_skeleton()
    caps = _capsule_table(skel)
    n_caps = len(caps)
    min_per = 8
    if n_vertices < min_per * n_caps:
        raise ValueError(f"need at least {min_per * n_caps} vertices, got {n_vertices}")

    areas = np.array([
        2.0 * np.pi * c.radius * (np.linalg.norm(c.b - c.a) + 2.0 * c.radius)
        for c in caps
    ])
    counts = np.full(n_caps, min_per, dtype=np.int64)
    spare = n_vertices - min_per * n_caps
    quota = spare * areas / areas.sum()
    base = np.floor(quota).astype(np.int64)
    counts += base
    rem = spare - int(base.sum())
    if rem > 0:
        frac = quota - base
        order = np.lexsort((np.arange(n_caps), -frac))
        counts[order[:rem]] += 1

    pose = canonical_pose(skel.n_joints)
    P = joint_positions(skel, pose)
    # joints adjacent to each capsule: the start joint connects to the start
    # bone's parent, the end joint (if any) to the bone on its far side
    verts, weights, parts = [], [], []
    for c, count in zip(caps, counts):
        pts = _sample_capsule(c.a, c.b, c.radius, int(count))
        w = np.zeros((len(pts), skel.n_joints))
        w[:, c.bone] = 1.0
        # far-side joint: for a segment capsule the end sits at another joint
        end_joint = None
        for start, end, _r, _p in _CAPSULES:
            if start == c.bone and np.allclose(P[end], c.b):
                end_joint = end
                break
        if end_joint is not None:
            near = np.linalg.norm(pts - P[end_joint], axis=1) < JOINT_BLEND_RADIUS
            w[near, c.bone] = 0.5
            w[near, end_joint] = 0.5
        parent = skel.parents[c.bone]
        if parent >= 0:
            near = np.linalg.norm(pts - P[c.bone], axis=1) < JOINT_BLEND_RADIUS
            w[near] = 0.0
            w[near, c.bone] = 0.5
            w[near, parent] = 0.5
        verts.append(pts)
        weights.append(w)
        parts.append(np.full(len(pts), c.part, dtype=np.int64))

    return BodyMesh(
        skeleton=skel,
        vertices=np.concatenate(verts),
        weights=np.concatenate(weights),
        parts=np.concatenate(parts),
        capsules=tuple(caps),
    )


def part_vertices(body: BodyMesh, part: str) -> np.ndarray:
    """Indices of vertices labeled with the named part."""
    if part not in PART_INDEX:
        raise KeyError(f"unknown part {part!r}; expected one of {PART_NAMES}")
    return np.nonzero(body.parts == PART_INDEX[part])[0]


def save_template(body: BodyMesh, path) -> None:
    joints = [
        {"parent": int(body.skeleton.parents[j]), "offset": body.skeleton.offsets[j].tolist()}
        for j in range(body.skeleton.n_joints)
    ]
    vertices = []
    for i in range(body.n_vertices):
        nz = np.nonzero(body.weights[i])[0]
        vertices.append({
            "pos": body.vertices[i].tolist(),
            "weights": [[int(j), float(body.weights[i, j])] for j in nz],
            "part": PART_NAMES[body.parts[i]],
        })
    Path(path).write_text(json.dumps({"joints": joints, "vertices": vertices}) + "\n")


def load_template(path) -> BodyMesh:
    """Parse a template file; re-normalizes weight rows, rejects negatives."""
    data = json.loads(Path(path).read_text())
    extra = set(data) - {"joints", "vertices"}
    if extra:
        raise ValueError(f"unknown template keys: {sorted(extra)}")
    joints = data["joints"]
    n = len(joints)
    parents = np.array([j["parent"] for j in joints], dtype=np.int64)
    offsets = np.array([j["offset"] for j in joints], dtype=np.float64)
    skel = Skeleton(parents, offsets)
    nv = len(data["vertices"])
    verts = np.zeros((nv, 3))
    weights = np.zeros((nv, n))
    parts = np.zeros(nv, dtype=np.int64)
    for i, v in enumerate(data["vertices"]):
        verts[i] = v["pos"]
        for j, wv in v["weights"]:
            if wv < 0:
                raise ValueError(f"vertex {i}: negative weight {wv} on joint {j}")
            if not 0 <= j < n:
                raise ValueError(f"vertex {i}: weight on unknown joint {j}")
            weights[i, j] = wv
        total = weights[i].sum()
        if total <= 0:
            raise ValueError(f"vertex {i}: weights sum to zero")
        weights[i] /= total
        if v["part"] not in PART_INDEX:
            raise ValueError(f"vertex {i}: unknown part {v['part']!r}")
        parts[i] = PART_INDEX[v["part"]]
    return BodyMesh(skeleton=skel, vertices=verts, weights=weights, parts=parts)
