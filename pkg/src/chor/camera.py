"""Cameras: projection, weak-perspective conversion, refinement, view statistics.

Pixel model: u = f * X / Z + cx, v = f * Y / Z + cy on camera coords
X = R x + t, with depth Z positive in front of the camera.

Look-at convention (fixed throughout): z_cam points from the camera to the
target, x_cam = normalize(up x z_cam), y_cam = z_cam x x_cam. With the default
world up +y, a camera on the +z axis looking at the origin therefore maps
world +x to decreasing u.

Weak-perspective convention: normalized image coordinates span [-1, 1] across
the longer image side L. A weak camera (s, tx, ty) with body orientation phi
projects a person-centric point p as n = s * ((Rodrigues(phi) p)_xy + (tx, ty))
with (tx, ty) in meters. The matching perspective initialization uses depth
2 f / (s L) with f in pixels, i.e. the depth 2f/s with f measured in units
of the longer side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import fibonacci_sphere, rodrigues, so3_right_jacobian

INIT_FOV_DEG = 46.4
FIT_LR = 0.01
FIT_ITERATIONS = 2400
FIT_STOP_PX = 0.7
MIN_DEPTH = 1e-6
ENTROPY_SIGMA = 0.01
ENTROPY_GRID = 4096
AZIMUTH_BINS = 12


class DegenerateAzimuthError(ValueError):
    pass


@dataclass(frozen=True)
class PerspectiveCamera:
    f: float
    cx: float
    cy: float
    R: np.ndarray  # (3, 3) world-to-camera rotation
    t: np.ndarray  # (3,) world-to-camera translation, meters
    width: int
    height: int

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-6 or np.linalg.det(R) < 0:
            raise ValueError("R must be a rotation matrix")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "f", float(self.f))
        object.__setattr__(self, "cx", float(self.cx))
        object.__setattr__(self, "cy", float(self.cy))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.R.T @ self.t

    def to_dict(self) -> dict:
        return {
            "f": self.f, "cx": self.cx, "cy": self.cy,
            "R": [float(v) for v in self.R.reshape(-1)],
            "t": [float(v) for v in self.t],
            "width": self.width, "height": self.height,
        }

    @staticmethod
    def from_dict(d: dict) -> "PerspectiveCamera":
        extra = set(d) - {"f", "cx", "cy", "R", "t", "width", "height"}
        if extra:
            raise ValueError(f"unknown camera keys: {sorted(extra)}")
        return PerspectiveCamera(
            f=d["f"], cx=d["cx"], cy=d["cy"],
            R=np.array(d["R"], dtype=np.float64).reshape(3, 3),
            t=np.array(d["t"], dtype=np.float64),
            width=d["width"], height=d["height"],
        )


@dataclass(frozen=True)
class WeakCamera:
    s: float
    tx: float
    ty: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"weak-perspective scale must be positive, got {self.s}")


def project(cam: PerspectiveCamera, points: np.ndarray) -> np.ndarray:
    """Perspective projection to pixels; raises if any depth <= 1e-6 m."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    cam_pts = pts @ cam.R.T + cam.t
    Z = cam_pts[:, 2]
    if np.any(Z <= MIN_DEPTH):
        raise ValueError(f"{int(np.sum(Z <= MIN_DEPTH))} points at or behind the camera")
    uv = np.stack([
        cam.f * cam_pts[:, 0] / Z + cam.cx,
        cam.f * cam_pts[:, 1] / Z + cam.cy,
    ], axis=1)
    return uv[0] if single else uv


def look_at(position, target, up=(0.0, 1.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """(R, t) for a camera at `position` looking at `target`."""
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    z = target - position
    nz = np.linalg.norm(z)
    if nz < 1e-12:
        raise ValueError("camera position coincides with target")
    z = z / nz
    x = np.cross(up, z)
    nx = np.linalg.norm(x)
    if nx < 1e-12:
        raise ValueError("view direction parallel to up vector")
    x = x / nx
    y = np.cross(z, x)
    R = np.stack([x, y, z], axis=0)
    t = -R @ position
    return R, t


def focal_from_fov(width: int, fov_deg: float = INIT_FOV_DEG) -> float:
    return (width / 2.0) / np.tan(np.deg2rad(fov_deg) / 2.0)


def weak_to_perspective_init(
    weak: WeakCamera, phi: np.ndarray, width: int, height: int,
    fov_deg: float = INIT_FOV_DEG,
) -> PerspectiveCamera:
    """Perspective starting point for refinement from a weak camera estimate."""
    f0 = focal_from_fov(width, fov_deg)
    L = float(max(width, height))
    depth = 2.0 * f0 / (weak.s * L)
    return PerspectiveCamera(
        f=f0, cx=width / 2.0, cy=height / 2.0,
        R=rodrigues(np.asarray(phi, dtype=np.float64)),
        t=np.array([weak.tx, weak.ty, depth]),
        width=width, height=height,
    )


@dataclass(frozen=True)
class FitConfig:
    lr: float = FIT_LR
    iterations: int = FIT_ITERATIONS
    stop_px: float = FIT_STOP_PX
    reject_px: float | None = None


@dataclass(frozen=True)
class FitResult:
    camera: PerspectiveCamera
    rms_px: float
    iterations: int
    converged: bool
    rejected: bool


def _loss_and_grad(params, Y, joints2d, f0, cx, cy, with_grad=True):
    """Mean squared pixel error and its gradient in (w, t, u).

    Rotation R = Exp(w) R0 enters through Y = R0 J; focal f = f0 exp(u).
    """
    w = params[0:3]
    t = params[3:6]
    u = params[6]
    f = f0 * np.exp(u)
    Re = rodrigues(w)
    X = Y @ Re.T + t
    Z = np.maximum(X[:, 2], MIN_DEPTH)
    px = f * X[:, 0] / Z + cx
    py = f * X[:, 1] / Z + cy
    ex = px - joints2d[:, 0]
    ey = py - joints2d[:, 1]
    n = Y.shape[0]
    loss = float(np.sum(ex * ex + ey * ey) / n)
    if not with_grad:
        return loss, None
    # dL/dX per joint
    scale = 2.0 / n
    ax = scale * ex * (f / Z)
    ay = scale * ey * (f / Z)
    az = scale * (-(ex * f * X[:, 0] + ey * f * X[:, 1]) / (Z * Z))
    A = np.stack([ax, ay, az], axis=1)          # (n, 3)
    g_t = A.sum(axis=0)
    # dX/dw = -Exp(w) [Y]x Jr(w); contract with A
    ReTA = A @ Re                                # rows Re^T A_i
    g_w = so3_right_jacobian(w).T @ np.cross(Y, ReTA).sum(axis=0)
    g_f = float(np.sum(ex * (X[:, 0] / Z) + ey * (X[:, 1] / Z)) * scale)
    g_u = g_f * f
    return loss, np.concatenate([g_w, g_t, [g_u]])


def reprojection_loss(joints3d, joints2d, init: PerspectiveCamera, params) -> float:
    """Loss at an offset (w, t, u) from the initial camera; exposed for checks."""
    Y = np.asarray(joints3d, dtype=np.float64) @ init.R.T
    loss, _ = _loss_and_grad(
        np.asarray(params, dtype=np.float64), Y,
        np.asarray(joints2d, dtype=np.float64), init.f, init.cx, init.cy,
        with_grad=False,
    )
    return loss


def reprojection_grad(joints3d, joints2d, init: PerspectiveCamera, params) -> np.ndarray:
    Y = np.asarray(joints3d, dtype=np.float64) @ init.R.T
    _, g = _loss_and_grad(
        np.asarray(params, dtype=np.float64), Y,
        np.asarray(joints2d, dtype=np.float64), init.f, init.cx, init.cy,
    )
    return g


def fit_perspective(
    joints3d: np.ndarray,
    joints2d: np.ndarray,
    init: PerspectiveCamera,
    config: FitConfig = FitConfig(),
) -> FitResult:
    """Refine a perspective camera by Adam on mean squared reprojection error.

    Optimizes an axis-angle rotation increment, the translation, and the focal
    length (log-parameterized); principal point stays fixed. Reports the
    best-so-far iterate, never a worse final one. Off-image joints still
    contribute. Early-stops once the pixel RMS drops below config.stop_px.
    """
    joints3d = np.asarray(joints3d, dtype=np.float64)
    joints2d = np.asarray(joints2d, dtype=np.float64)
    if joints3d.shape[0] != joints2d.shape[0] or joints3d.shape[0] < 3:
        raise ValueError("need matching 3D/2D joints, at least 3")
    Y = joints3d @ init.R.T

    params = np.zeros(7)
    params[3:6] = init.t
    m = np.zeros(7)
    v = np.zeros(7)
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    def rebuild(p):
        return PerspectiveCamera(
            f=init.f * float(np.exp(p[6])), cx=init.cx, cy=init.cy,
            R=rodrigues(p[0:3]) @ init.R, t=p[3:6].copy(),
            width=init.width, height=init.height,
        )

    best_loss, _ = _loss_and_grad(params, Y, joints2d, init.f, init.cx, init.cy, with_grad=False)
    best_params = params.copy()
    stop_sq = config.stop_px * config.stop_px
    it = 0
    converged = best_loss < stop_sq
    while it < config.iterations and not converged:
        loss, grad = _loss_and_grad(params, Y, joints2d, init.f, init.cx, init.cy)
        if loss < best_loss:
            best_loss = loss
            best_params = params.copy()
        if best_loss < stop_sq:
            converged = True
            break
        it += 1
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        mh = m / (1.0 - beta1 ** it)
        vh = v / (1.0 - beta2 ** it)
        params = params - config.lr * mh / (np.sqrt(vh) + eps)

    final_loss, _ = _loss_and_grad(params, Y, joints2d, init.f, init.cx, init.cy, with_grad=False)
    if final_loss < best_loss:
        best_loss = final_loss
        best_params = params.copy()
    rms = float(np.sqrt(best_loss))
    rejected = config.reject_px is not None and rms > config.reject_px
    return FitResult(
        camera=rebuild(best_params),
        rms_px=rms,
        iterations=it,
        converged=rms < config.stop_px,
        rejected=rejected,
    )


def azimuth_of(cam: PerspectiveCamera) -> float:
    """Azimuth of the camera position around +y, 0 at +z, in [0, 2 pi)."""
    c = cam.position
    if np.hypot(c[0], c[2]) < 1e-9:
        raise DegenerateAzimuthError("camera sits on the vertical axis; azimuth undefined")
    az = float(np.arctan2(c[0], c[2]))
    return az % (2.0 * np.pi)


def azimuth_bin(azimuth: float, bins: int = AZIMUTH_BINS) -> int:
    width = 2.0 * np.pi / bins
    return min(int(azimuth / width), bins - 1)


def camera_entropy(
    cameras,
    sigma: float = ENTROPY_SIGMA,
    grid_points: int = ENTROPY_GRID,
) -> float:
    """Shannon entropy (bits) of the camera direction distribution.

    Kernel density on the unit sphere: one Gaussian kernel in geodesic
    distance per camera, evaluated on a near-uniform direction grid and
    normalized to a discrete distribution.
    """
    dirs = []
    for cam in cameras:
        c = cam.position if isinstance(cam, PerspectiveCamera) else np.asarray(cam, dtype=np.float64)
        norm = np.linalg.norm(c)
        if norm < 1e-9:
            raise ValueError("camera at the origin has no direction")
        dirs.append(c / norm)
    if not dirs:
        raise ValueError("no cameras given")
    dirs = np.array(dirs)
    grid = fibonacci_sphere(grid_points)
    cosang = np.clip(grid @ dirs.T, -1.0, 1.0)
    geo = np.arccos(cosang)
    dens = np.exp(-(geo * geo) / (2.0 * sigma * sigma)).sum(axis=1)
    total = dens.sum()
    if total <= 0.0:
        raise ValueError("kernel density underflowed everywhere; sigma too small")
    p = dens / total
    nz = p[p > 0.0]
    return float(-(nz * np.log2(nz)).sum())
